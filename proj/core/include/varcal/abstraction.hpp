#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "varcal/corpus.hpp"
#include "varcal/cpd.hpp"
#include "varcal/embeddings.hpp"
#include "varcal/kmeans.hpp"

namespace varcal {

/// Universal POS categories plus PUNCT; X is the catch-all.
enum class UniversalTag {
  kAdj,
  kAdp,
  kAdv,
  kConj,
  kDet,
  kNoun,
  kNum,
  kPron,
  kPrt,
  kVerb,
  kX,
  kPunct,
};

inline constexpr std::array<UniversalTag, 12> kAllTags = {
    UniversalTag::kAdj,  UniversalTag::kAdp, UniversalTag::kAdv,
    UniversalTag::kConj, UniversalTag::kDet, UniversalTag::kNoun,
    UniversalTag::kNum,  UniversalTag::kPron, UniversalTag::kPrt,
    UniversalTag::kVerb, UniversalTag::kX,   UniversalTag::kPunct};

std::string_view tag_name(UniversalTag tag);
UniversalTag tag_from_name(std::string_view name);  // InputError on unknown

enum class TagSource { kHuman, kModel, kOracleA, kOracleB };
std::string_view tag_source_name(TagSource source);

/// Tag multiset for one context and one system.
struct TagAssignment {
  std::string context_id;
  TagSource source = TagSource::kHuman;
  WordCounts tags;  // tag name -> count, one tag per word sample
};

/// Pluggable word tagger. Implementations receive the context for both its
/// text (built-in heuristics) and its id (external annotations).
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual UniversalTag tag(const Context& context,
                           const std::string& word) const = 0;
};

/// Self-contained baseline: closed-class lexicon, then suffix heuristics,
/// then NOUN; pure punctuation maps to PUNCT. Exists so the pipeline runs
/// without external annotations (an accuracy caveat, not a replica of a
/// trained tagger).
class BaselineTagger : public Tagger {
 public:
  UniversalTag tag(const Context& context,
                   const std::string& word) const override;
};

/// External annotations keyed by (context_id, word), loaded from TSV rows
/// "context_id<TAB>source<TAB>word<TAB>tag". The source column is kept for
/// provenance; lookups ignore it. Rows with source "context" annotate the
/// context's own words (e.g. its last word for the regression features).
/// Conflicting duplicates raise IntegrityError; lookups of missing pairs
/// raise TaggingError naming the pair.
class ExternalTagAnnotations : public Tagger {
 public:
  explicit ExternalTagAnnotations(std::istream& tsv);
  UniversalTag tag(const Context& context,
                   const std::string& word) const override;
  bool has(const std::string& context_id, const std::string& word) const;
  std::size_t size() const { return tags_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, UniversalTag> tags_;
};

UniversalTag tag_word(const Context& context, const std::string& word,
                      const Tagger& tagger);

/// Tags every word of a cpd/word-count multiset.
TagAssignment tag_counts(const Context& context, const WordCounts& words,
                         TagSource source, const Tagger& tagger);

/// TVD between the tag distributions (mle over each multiset). Throws
/// MetricError when either side is empty.
double tvd_syn(const WordCounts& human_tags, const WordCounts& model_tags);

/// Tag-space projection of a word cpd: sums probability mass per tag name.
/// Equals mle(tag_counts(...).tags) when p itself is an mle of word counts.
/// Throws MetricError on an empty cpd.
Cpd tag_cpd(const Context& context, const Cpd& p, const Tagger& tagger);

struct SemTvdParams {
  std::optional<int> fixed_k;  // unset: select_k on the embedded words
  KmeansOptions kmeans;
};

/// Word → group partition reused across cpd pairs of one context.
struct SemPartition {
  std::map<std::string, std::string> group_of;  // joint-support words
  std::vector<std::string> oov_words;           // no embedding: own group
  std::optional<Clustering> clustering;         // over the embedded words
  std::vector<std::string> clustered_words;     // aligned with assignment
  int k_used = 0;
  bool degenerate = false;  // no embedded words at all
};

/// Clusters the joint support of p and q: embedded words are standardized
/// over the joint set and k-means clustered, OOV words share one group.
SemPartition build_sem_partition(const Cpd& p, const Cpd& q,
                                 const EmbeddingTable& table,
                                 const SemTvdParams& params = {});

/// Sums cpd mass per group. Words absent from the partition (possible only
/// when reusing a partition built from other cpds) fall into the OOV group.
Cpd repartition(const Cpd& p, const SemPartition& partition);

/// TVD between repartitioned cpds under a shared partition.
double tvd_over_partition(const Cpd& p, const Cpd& q,
                          const SemPartition& partition);

struct SemTvdResult {
  double value = 0.0;
  SemPartition partition;  // reusable for the oracle pair
};

/// Semantic TVD between two cpds; the returned partition allows computing
/// the oracle-oracle value over the same clustering.
SemTvdResult tvd_sem(const Cpd& human, const Cpd& model,
                     const EmbeddingTable& table,
                     const SemTvdParams& params = {});

}  // namespace varcal
