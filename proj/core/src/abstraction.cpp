#include "varcal/abstraction.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <set>
#include <sstream>

#include "varcal/errors.hpp"

namespace varcal {

std::string_view tag_name(UniversalTag tag) {
  switch (tag) {
    case UniversalTag::kAdj:
      return "ADJ";
    case UniversalTag::kAdp:
      return "ADP";
    case UniversalTag::kAdv:
      return "ADV";
    case UniversalTag::kConj:
      return "CONJ";
    case UniversalTag::kDet:
      return "DET";
    case UniversalTag::kNoun:
      return "NOUN";
    case UniversalTag::kNum:
      return "NUM";
    case UniversalTag::kPron:
      return "PRON";
    case UniversalTag::kPrt:
      return "PRT";
    case UniversalTag::kVerb:
      return "VERB";
    case UniversalTag::kX:
      return "X";
    case UniversalTag::kPunct:
      return "PUNCT";
  }
  throw InputError("unknown tag value");
}

UniversalTag tag_from_name(std::string_view name) {
  for (UniversalTag tag : kAllTags) {
    if (tag_name(tag) == name) return tag;
  }
  throw InputError("unknown tag name: \"" + std::string(name) + "\"");
}

std::string_view tag_source_name(TagSource source) {
  switch (source) {
    case TagSource::kHuman:
      return "human";
    case TagSource::kModel:
      return "model";
    case TagSource::kOracleA:
      return "oracle_a";
    case TagSource::kOracleB:
      return "oracle_b";
  }
  throw InputError("unknown tag source value");
}

namespace {

std::string lower_ascii(const std::string& word) {
  std::string out = word;
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool has_alnum(const std::string& word) {
  for (unsigned char c : word) {
    if (std::isalnum(c) || c >= 0x80) return true;
  }
  return false;
}

bool has_digit(const std::string& word) {
  for (unsigned char c : word) {
    if (std::isdigit(c)) return true;
  }
  return false;
}

const std::map<std::string, UniversalTag>& closed_class_lexicon() {
  static const std::map<std::string, UniversalTag> lexicon = [] {
    std::map<std::string, UniversalTag> lex;
    auto add = [&lex](UniversalTag tag,
                      std::initializer_list<const char*> words) {
      for (const char* w : words) lex[w] = tag;
    };
    add(UniversalTag::kDet,
        {"the", "a", "an", "this", "that", "these", "those", "some", "any",
         "no", "every", "each", "all", "both", "either", "neither",
         "another", "such"});
    add(UniversalTag::kPron,
        {"i", "you", "he", "she", "it", "we", "they", "me", "him", "us",
         "them", "mine", "yours", "hers", "ours", "theirs", "my", "your",
         "his", "her", "its", "our", "their", "myself", "yourself",
         "himself", "herself", "itself", "ourselves", "themselves", "who",
         "whom", "whose", "which", "what", "something", "anything",
         "nothing", "everything", "someone", "anyone", "everyone",
         "nobody", "somebody", "everybody"});
    add(UniversalTag::kAdp,
        {"of", "in", "for", "on", "with", "at", "by", "from", "about",
         "into", "over", "after", "under", "between", "through", "during",
         "against", "among", "within", "without", "before", "behind",
         "above", "below", "near", "since", "until", "upon", "across",
         "toward", "towards", "around", "beside", "besides", "despite",
         "beyond", "onto", "via", "because", "although", "though", "while",
         "if", "unless", "whereas", "whether"});
    add(UniversalTag::kConj,
        {"and", "or", "but", "nor", "so", "yet", "plus"});
    add(UniversalTag::kPrt, {"to", "'s"});
    add(UniversalTag::kVerb,
        {"is", "are", "was", "were", "be", "been", "being", "am", "have",
         "has", "had", "having", "do", "does", "did", "doing", "will",
         "would", "can", "could", "may", "might", "must", "shall",
         "should", "get", "got", "gets", "go", "goes", "went", "gone",
         "say", "says", "said", "make", "makes", "made", "take", "takes",
         "took", "taken", "come", "comes", "came", "see", "sees", "saw",
         "seen", "know", "knows", "knew", "known", "think", "thinks",
         "thought", "want", "wants", "wanted", "give", "gives", "gave",
         "given", "find", "finds", "found", "tell", "tells", "told",
         "become", "becomes", "became", "feel", "feels", "felt", "put",
         "keep", "keeps", "kept", "let", "lets", "begin", "begins",
         "began", "begun", "seem", "seems", "seemed", "help", "helps",
         "show", "shows", "showed", "shown", "hear", "hears", "heard",
         "run", "runs", "ran", "move", "moves", "moved", "live", "lives",
         "lived", "believe", "believes", "believed"});
    add(UniversalTag::kAdv,
        {"not", "n't", "very", "too", "also", "just", "then", "there",
         "when", "where", "how", "why", "now", "here", "again", "always",
         "never", "often", "soon", "still", "almost", "quite", "rather",
         "perhaps", "maybe", "even", "only", "well", "more", "most",
         "less", "least", "once", "twice", "away", "back", "up", "down",
         "out", "off", "ever", "really", "already", "yesterday", "today",
         "tomorrow", "together", "instead", "however", "therefore"});
    add(UniversalTag::kNum,
        {"zero", "one", "two", "three", "four", "five", "six", "seven",
         "eight", "nine", "ten", "eleven", "twelve", "thirteen",
         "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
         "nineteen", "twenty", "thirty", "forty", "fifty", "sixty",
         "seventy", "eighty", "ninety", "hundred", "thousand", "million",
         "billion"});
    add(UniversalTag::kAdj,
        {"good", "new", "old", "great", "high", "small", "large", "big",
         "little", "long", "young", "few", "bad", "same", "able", "last",
         "next", "early", "late", "hard", "easy", "strong", "different",
         "important", "sure", "true", "whole", "free", "full", "many",
         "much", "own", "other", "first", "second", "third"});
    return lex;
  }();
  return lexicon;
}

UniversalTag suffix_heuristic(const std::string& lower) {
  const auto ends_with = [&lower](std::string_view suffix) {
    return lower.size() > suffix.size() + 1 &&
           lower.compare(lower.size() - suffix.size(), suffix.size(),
                         suffix) == 0;
  };
  if (ends_with("ly")) return UniversalTag::kAdv;
  if (ends_with("ing") || ends_with("ed") || ends_with("ize") ||
      ends_with("ise")) {
    return UniversalTag::kVerb;
  }
  if (ends_with("ous") || ends_with("ful") || ends_with("ive") ||
      ends_with("able") || ends_with("ible") || ends_with("ish") ||
      ends_with("less") || ends_with("ical") || ends_with("est")) {
    return UniversalTag::kAdj;
  }
  return UniversalTag::kNoun;
}

}  // namespace

UniversalTag BaselineTagger::tag(const Context& context,
                                 const std::string& word) const {
  (void)context;  // lexical decision only
  if (word.empty() || !has_alnum(word)) return UniversalTag::kPunct;
  if (has_digit(word)) return UniversalTag::kNum;
  const std::string lower = lower_ascii(word);
  const auto& lexicon = closed_class_lexicon();
  auto it = lexicon.find(lower);
  if (it != lexicon.end()) return it->second;
  return suffix_heuristic(lower);
}

ExternalTagAnnotations::ExternalTagAnnotations(std::istream& tsv) {
  static const std::set<std::string> kSources = {"human", "model", "oracle_a",
                                                 "oracle_b", "context"};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(tsv, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "context_id\tsource\tword\ttag") continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 4) {
      throw FormatError("tag annotations line " + std::to_string(line_no) +
                        ": expected 4 tab-separated fields, got " +
                        std::to_string(fields.size()));
    }
    if (kSources.count(fields[1]) == 0) {
      throw FormatError("tag annotations line " + std::to_string(line_no) +
                        ": unknown source \"" + fields[1] + "\"");
    }
    UniversalTag tag;
    try {
      tag = tag_from_name(fields[3]);
    } catch (const InputError&) {
      throw FormatError("tag annotations line " + std::to_string(line_no) +
                        ": unknown tag \"" + fields[3] + "\"");
    }
    const std::pair<std::string, std::string> key{fields[0], fields[2]};
    auto [it, inserted] = tags_.emplace(key, tag);
    if (!inserted && it->second != tag) {
      throw IntegrityError("tag annotations line " + std::to_string(line_no) +
                           ": conflicting tag for (" + fields[0] + ", " +
                           fields[2] + ")");
    }
  }
}

bool ExternalTagAnnotations::has(const std::string& context_id,
                                 const std::string& word) const {
  return tags_.find({context_id, word}) != tags_.end();
}

UniversalTag ExternalTagAnnotations::tag(const Context& context,
                                         const std::string& word) const {
  auto it = tags_.find({context.context_id, word});
  if (it == tags_.end()) {
    throw TaggingError("no tag annotation for (" + context.context_id + ", " +
                       word + ")");
  }
  return it->second;
}

UniversalTag tag_word(const Context& context, const std::string& word,
                      const Tagger& tagger) {
  return tagger.tag(context, word);
}

TagAssignment tag_counts(const Context& context, const WordCounts& words,
                         TagSource source, const Tagger& tagger) {
  TagAssignment assignment;
  assignment.context_id = context.context_id;
  assignment.source = source;
  for (const auto& [word, count] : words.counts) {
    assignment.tags.add(std::string(tag_name(tagger.tag(context, word))),
                        count);
  }
  return assignment;
}

double tvd_syn(const WordCounts& human_tags, const WordCounts& model_tags) {
  if (human_tags.empty() || model_tags.empty()) {
    throw MetricError("tvd_syn: empty tag multiset");
  }
  return tvd(mle(human_tags), mle(model_tags));
}

Cpd tag_cpd(const Context& context, const Cpd& p, const Tagger& tagger) {
  if (p.empty()) {
    throw MetricError("tag_cpd: empty cpd for context " + context.context_id);
  }
  Cpd::Entries mass;
  for (const auto& [word, prob] : p.entries()) {
    mass[std::string(tag_name(tagger.tag(context, word)))] += prob;
  }
  return Cpd::from_entries(std::move(mass));
}

SemPartition build_sem_partition(const Cpd& p, const Cpd& q,
                                 const EmbeddingTable& table,
                                 const SemTvdParams& params) {
  // Joint support; map order keeps everything deterministic.
  std::set<std::string> joint;
  for (const auto& [word, prob] : p.entries()) joint.insert(word);
  for (const auto& [word, prob] : q.entries()) joint.insert(word);

  SemPartition partition;
  std::vector<std::vector<double>> raw;
  for (const auto& word : joint) {
    if (const auto* vec = table.find(word)) {
      partition.clustered_words.push_back(word);
      raw.push_back(*vec);
    } else {
      partition.oov_words.push_back(word);
      partition.group_of[word] = "oov";
    }
  }
  if (partition.clustered_words.empty()) {
    partition.degenerate = true;
    partition.k_used = 0;
    return partition;
  }

  // Scaling is per context: statistics over exactly the joint word set
  // being clustered, one vector per word type.
  const auto points = standardize_vectors(raw);
  const int n_embedded = static_cast<int>(points.size());
  int k;
  if (params.fixed_k.has_value()) {
    if (*params.fixed_k < 1) {
      throw InputError("tvd_sem: fixed_k must be at least 1");
    }
    k = std::min(*params.fixed_k, n_embedded);
  } else if (n_embedded < 3) {
    k = n_embedded;  // 1 or 2 points: each its own group
  } else {
    k = std::min(select_k(points, params.kmeans), n_embedded);
  }
  partition.clustering = kmeans(points, k, params.kmeans);
  partition.k_used = k;
  for (std::size_t i = 0; i < partition.clustered_words.size(); ++i) {
    partition.group_of[partition.clustered_words[i]] =
        "cluster_" + std::to_string(partition.clustering->assignment[i]);
  }
  return partition;
}

Cpd repartition(const Cpd& p, const SemPartition& partition) {
  std::map<std::string, double> groups;
  for (const auto& [word, prob] : p.entries()) {
    auto it = partition.group_of.find(word);
    // Unknown words appear only when a partition is reused for cpds it was
    // not built from (the oracle pair); they join the OOV group.
    if (it == partition.group_of.end()) {
      groups["oov"] += prob;
    } else {
      groups[it->second] += prob;
    }
  }
  return Cpd::from_entries(std::move(groups));
}

double tvd_over_partition(const Cpd& p, const Cpd& q,
                          const SemPartition& partition) {
  return tvd(repartition(p, partition), repartition(q, partition));
}

SemTvdResult tvd_sem(const Cpd& human, const Cpd& model,
                     const EmbeddingTable& table, const SemTvdParams& params) {
  SemTvdResult result;
  result.partition = build_sem_partition(human, model, table, params);
  result.value = tvd_over_partition(human, model, result.partition);
  return result;
}

}  // namespace varcal
