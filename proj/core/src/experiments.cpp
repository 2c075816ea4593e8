#include "varcal/experiments.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"
#include "varcal/rng.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

namespace {

long banker_round(double x) {
  return static_cast<long>(std::nearbyint(x));  // default mode: half-to-even
}

}  // namespace

std::vector<ImprovementResult> improvement_sweep(
    const std::map<std::string, double>& model_tvds,
    const std::map<std::string, double>& oracle_tvds,
    const std::vector<int>& ks, const std::vector<std::uint64_t>& seeds,
    std::pair<long, long> oracle_sizes) {
  if (model_tvds.size() != oracle_tvds.size()) {
    throw InputError("improvement_sweep: tvd maps cover different contexts");
  }
  std::vector<std::string> ids;
  ids.reserve(model_tvds.size());
  for (const auto& [id, value] : model_tvds) {
    if (oracle_tvds.find(id) == oracle_tvds.end()) {
      throw InputError("improvement_sweep: context " + id +
                       " missing from oracle tvds");
    }
    ids.push_back(id);
  }
  if (ids.empty()) {
    throw InputError("improvement_sweep: no contexts");
  }
  for (int k : ks) {
    if (k < 0 || k > 100) {
      throw InputError("improvement_sweep: k=" + std::to_string(k) +
                       " outside [0,100]");
    }
  }
  const std::size_t n = ids.size();
  std::vector<ImprovementResult> results;
  results.reserve(ks.size() * seeds.size());
  for (std::uint64_t seed : seeds) {
    // One permutation per seed keeps replaced sets nested across k.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(derive_seed(seed, "improvement"));
    rng.shuffle(perm);
    for (int k : ks) {
      const long m = banker_round(static_cast<double>(k) / 100.0 *
                                  static_cast<double>(n));
      std::vector<bool> replaced(n, false);
      for (long i = 0; i < m; ++i) replaced[perm[i]] = true;
      ImprovementResult result;
      result.k_percent = k;
      result.seed = seed;
      result.oracle_sizes = oracle_sizes;
      result.context_ids = ids;
      result.tvd_values.reserve(n);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double value = replaced[i] ? oracle_tvds.at(ids[i])
                                         : model_tvds.at(ids[i]);
        result.tvd_values.push_back(value);
        sum += value;
        if (replaced[i]) result.replaced_context_ids.push_back(ids[i]);
      }
      result.mean_tvd = sum / static_cast<double>(n);
      results.push_back(std::move(result));
    }
  }
  return results;
}

SubsampleRun subsample_mse(
    const std::map<std::string, std::vector<GenerationRecord>>& full_records,
    const std::vector<long>& sizes, const std::vector<std::uint64_t>& seeds,
    const std::map<std::string, Cpd>& oracles) {
  if (sizes.empty() || seeds.empty()) {
    throw InputError("subsample_mse: sizes and seeds must be nonempty");
  }
  long max_size = 0;
  for (long size : sizes) {
    if (size < 1) throw InputError("subsample_mse: sizes must be positive");
    max_size = std::max(max_size, size);
  }

  // Evaluable = enough non-rejected records for the largest size, plus an
  // oracle cpd; everything else is excluded from every cell (paired cells).
  struct Eligible {
    std::string context_id;
    std::vector<const std::string*> words;  // non-rejected sliced words
    double full_tvd = 0.0;
    const Cpd* oracle = nullptr;
  };
  std::vector<Eligible> eligible;
  SubsampleRun run;
  for (const auto& [context_id, records] : full_records) {
    Eligible e;
    e.context_id = context_id;
    for (const auto& record : records) {
      if (!record.rejected && record.sliced_word.has_value()) {
        e.words.push_back(&*record.sliced_word);
      }
    }
    auto oracle_it = oracles.find(context_id);
    if (oracle_it == oracles.end() ||
        static_cast<long>(e.words.size()) < max_size) {
      run.excluded_context_ids.push_back(context_id);
      continue;
    }
    e.oracle = &oracle_it->second;
    WordCounts full_counts;
    for (const auto* word : e.words) full_counts.add(*word);
    e.full_tvd = tvd(mle(full_counts), *e.oracle);
    eligible.push_back(std::move(e));
  }
  if (eligible.empty()) {
    throw InputError("subsample_mse: no evaluable contexts");
  }

  for (long size : sizes) {
    for (std::uint64_t seed : seeds) {
      SubsampleResult result;
      result.subsample_size = size;
      result.seed = seed;
      double total = 0.0;
      for (const auto& e : eligible) {
        Rng rng(derive_seed(seed, e.context_id,
                            static_cast<std::uint64_t>(size)));
        auto picked = rng.sample_indices(e.words.size(),
                                         static_cast<std::size_t>(size));
        WordCounts counts;
        for (auto idx : picked) counts.add(*e.words[idx]);
        const double sub_tvd = tvd(mle(counts), *e.oracle);
        const double err = sub_tvd - e.full_tvd;
        result.context_ids.push_back(e.context_id);
        result.squared_errors.push_back(err * err);
        total += err * err;
      }
      result.mse = total / static_cast<double>(eligible.size());
      run.results.push_back(std::move(result));
    }
  }
  return run;
}

namespace {

std::vector<EvaluationItem> build_token_items(
    const Dataset& dataset, const std::map<std::string, Cpd>& token_cpds,
    const BpeVocab& vocab, std::vector<std::string>& skipped) {
  std::vector<EvaluationItem> items;
  for (const auto& context : dataset.contexts) {
    auto cpd_it = token_cpds.find(context.context_id);
    auto rs_it = dataset.response_sets.find(context.context_id);
    if (cpd_it == token_cpds.end() || rs_it == dataset.response_sets.end()) {
      skipped.push_back(context.context_id);
      continue;
    }
    EvaluationItem item;
    item.context_id = context.context_id;
    item.gold_atom = bpe_first_token(" " + context.corpus_word, vocab);
    // Answers sharing a first token merge into one entry with summed count.
    WordCounts token_counts;
    for (const auto& [word, count] : rs_it->second.responses) {
      token_counts.add(bpe_first_token(" " + word, vocab), count);
    }
    item.responses.context_id = context.context_id;
    for (const auto& [token, count] : token_counts.counts) {
      item.responses.responses.emplace_back(token, count);
    }
    item.model = cpd_it->second;
    item.context_length_words = count_context_words(context.context_text);
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace

EvaluationResult token_level_eval(
    const Dataset& dataset,
    const std::map<std::string, std::vector<GenerationRecord>>& generations,
    const BpeVocab& vocab, const OracleConfig& config) {
  std::map<std::string, Cpd> token_cpds;
  for (const auto& [context_id, records] : generations) {
    WordCounts counts;
    for (const auto& record : records) {
      // Word-level rejection does not apply here: a truncated word still
      // has a well-defined first token. Only empty text contributes nothing.
      if (record.raw_text.empty()) continue;
      const std::string token = first_token_of_text(record.raw_text, vocab);
      if (token.empty()) continue;
      counts.add(token);
    }
    if (counts.total == 0) continue;
    token_cpds.emplace(context_id, mle(counts));
  }
  std::vector<std::string> skipped;
  auto items = build_token_items(dataset, token_cpds, vocab, skipped);
  return evaluate_items(items, config, std::move(skipped));
}

EvaluationResult token_level_eval_with_cpds(
    const Dataset& dataset, const std::map<std::string, Cpd>& token_cpds,
    const BpeVocab& vocab, const OracleConfig& config) {
  std::vector<std::string> skipped;
  auto items = build_token_items(dataset, token_cpds, vocab, skipped);
  return evaluate_items(items, config, std::move(skipped));
}

std::string improvement_results_to_jsonl(
    const std::vector<ImprovementResult>& results) {
  std::string out;
  for (const auto& result : results) {
    ordered_json row;
    row["k_percent"] = result.k_percent;
    row["seed"] = result.seed;
    row["mean_tvd"] = result.mean_tvd;
    row["n_contexts"] = result.context_ids.size();
    row["n_replaced"] = result.replaced_context_ids.size();
    row["oracle_sizes"] = ordered_json::array(
        {result.oracle_sizes.first, result.oracle_sizes.second});
    row["replaced_context_ids"] = result.replaced_context_ids;
    row["tvd_values"] = result.tvd_values;
    out += row.dump();
    out += '\n';
  }
  return out;
}

std::string subsample_run_to_jsonl(const SubsampleRun& run) {
  std::string out;
  for (const auto& result : run.results) {
    ordered_json row;
    row["subsample_size"] = result.subsample_size;
    row["seed"] = result.seed;
    row["mse"] = result.mse;
    row["n_contexts"] = result.context_ids.size();
    row["excluded_context_ids"] = run.excluded_context_ids;
    out += row.dump();
    out += '\n';
  }
  return out;
}

}  // namespace varcal
