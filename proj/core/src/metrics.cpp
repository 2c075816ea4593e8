#include "varcal/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"
#include "varcal/rng.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

std::string_view gold_convention_name(GoldConvention convention) {
  switch (convention) {
    case GoldConvention::kOriginalCorpusWord:
      return "original";
    case GoldConvention::kHumanMajority:
      return "human_majority";
    case GoldConvention::kOracleMajority:
      return "oracle_majority";
  }
  throw InputError("unknown gold convention value");
}

GoldConvention gold_convention_from_name(std::string_view name) {
  if (name == "original") return GoldConvention::kOriginalCorpusWord;
  if (name == "human_majority") return GoldConvention::kHumanMajority;
  if (name == "oracle_majority") return GoldConvention::kOracleMajority;
  throw InputError("unknown gold convention: \"" + std::string(name) + "\"");
}

std::pair<long, long> default_oracle_sizes(long total) {
  const long half = total / 2;
  return {half, total - half};
}

OracleSplit split_oracle(const ResponseSet& responses,
                         std::optional<std::pair<long, long>> sizes,
                         std::uint64_t seed) {
  const long total = responses.total();
  const auto [size_a, size_b] = sizes.value_or(default_oracle_sizes(total));
  if (size_a < 1 || size_b < 1) {
    throw SplitError("oracle split for " + responses.context_id +
                     ": both halves must be nonempty");
  }
  if (size_a + size_b > total) {
    throw SplitError("oracle split for " + responses.context_id + ": need " +
                     std::to_string(size_a + size_b) + " responses, have " +
                     std::to_string(total));
  }
  // Expand the multiset in sorted word order so the draw depends only on
  // (multiset, sizes, seed).
  std::vector<const std::string*> expanded;
  expanded.reserve(total);
  for (const auto& [word, count] : responses.responses) {
    for (long i = 0; i < count; ++i) expanded.push_back(&word);
  }
  Rng rng(seed);
  rng.shuffle(expanded);
  WordCounts half_a, half_b;
  for (long i = 0; i < size_a; ++i) half_a.add(*expanded[i]);
  for (long i = size_a; i < size_a + size_b; ++i) half_b.add(*expanded[i]);
  OracleSplit split;
  split.context_id = responses.context_id;
  split.oracle_a = mle(half_a);
  split.oracle_b = mle(half_b);
  split.sizes = {size_a, size_b};
  split.seed = seed;
  return split;
}

double ece(const std::vector<CalibrationPoint>& points, int n_bins) {
  if (points.empty()) throw MetricError("ece: empty point list");
  if (n_bins < 1) throw MetricError("ece: n_bins must be at least 1");
  std::vector<double> sum_conf(n_bins, 0.0);
  std::vector<long> n_correct(n_bins, 0), count(n_bins, 0);
  for (const auto& point : points) {
    if (!(point.confidence >= 0.0 && point.confidence <= 1.0)) {
      throw MetricError("ece: confidence " +
                        std::to_string(point.confidence) +
                        " outside [0,1]");
    }
    // Left-inclusive edges; the last bin additionally includes its right
    // edge so confidence 1.0 lands in bin n_bins - 1.
    int bin = static_cast<int>(point.confidence * n_bins);
    bin = std::min(bin, n_bins - 1);
    sum_conf[bin] += point.confidence;
    if (point.correct) ++n_correct[bin];
    ++count[bin];
  }
  const double n = static_cast<double>(points.size());
  double total = 0.0;
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const double avg_conf = sum_conf[b] / count[b];
    const double accuracy = static_cast<double>(n_correct[b]) / count[b];
    total += (count[b] / n) * std::abs(avg_conf - accuracy);
  }
  return total;
}

std::string gold_label(const Context& context, GoldConvention convention,
                       const Cpd& human, const OracleSplit* oracle,
                       TieBreak rule, std::uint64_t tie_seed) {
  switch (convention) {
    case GoldConvention::kOriginalCorpusWord:
      return context.corpus_word;
    case GoldConvention::kHumanMajority:
      return mode(human, rule, tie_seed).word;
    case GoldConvention::kOracleMajority:
      if (oracle == nullptr) {
        throw UsageError("oracle_majority gold requires an oracle split");
      }
      return mode(oracle->oracle_a, rule, tie_seed).word;
  }
  throw InputError("unknown gold convention value");
}

long count_context_words(const std::string& context_text) {
  long count = 0;
  bool in_token = false;
  for (unsigned char c : context_text) {
    const bool ws = std::isspace(c) != 0;
    if (!ws && !in_token) ++count;
    in_token = !ws;
  }
  return count;
}

namespace {

constexpr std::array<std::string_view, 3> kSystems = {"model", "human",
                                                      "oracle"};

struct PreparedItem {
  const EvaluationItem* item;
  Cpd human_full;
  ModeResult model_mode;
  std::string human_majority_gold;
};

double sample_stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace

EvaluationResult evaluate_items(const std::vector<EvaluationItem>& items,
                                const OracleConfig& config,
                                std::vector<std::string> skipped) {
  if (config.resamples < 1) {
    throw MetricError("evaluate: resamples must be at least 1");
  }
  // Prepare evaluable items; contexts whose responses cannot support the
  // requested split are skipped and listed, mirroring missing model cpds.
  std::vector<PreparedItem> prepared;
  for (const auto& item : items) {
    const long total = item.responses.total();
    const auto sizes = config.sizes.value_or(default_oracle_sizes(total));
    if (sizes.first < 1 || sizes.second < 1 ||
        sizes.first + sizes.second > total) {
      skipped.push_back(item.context_id);
      continue;
    }
    PreparedItem p;
    p.item = &item;
    p.human_full = mle(item.responses.to_counts());
    p.model_mode = mode(item.model, config.tie_break,
                        derive_seed(config.base_seed, item.context_id, 9001));
    p.human_majority_gold =
        mode(p.human_full, config.tie_break,
             derive_seed(config.base_seed, item.context_id, 9002))
            .word;
    prepared.push_back(std::move(p));
  }
  if (prepared.empty()) {
    throw MetricError("evaluate: no evaluable contexts");
  }

  EvaluationResult result;
  result.aggregate.evaluated = prepared.size();
  result.aggregate.skipped_context_ids = std::move(skipped);
  result.aggregate.oracle_sizes = config.sizes;
  result.aggregate.base_seed = config.base_seed;
  result.aggregate.resamples = config.resamples;
  result.aggregate.ece_bins = config.ece_bins;

  // Per-resample ECE values, keyed [convention][system].
  std::map<std::string, std::map<std::string, std::vector<double>>> ece_values;

  std::vector<double> mean_tvd_model_oracle(prepared.size(), 0.0);
  std::vector<double> mean_tvd_oracle_oracle(prepared.size(), 0.0);
  result.reports.resize(prepared.size());

  for (int r = 0; r < config.resamples; ++r) {
    std::map<std::string, std::map<std::string, std::vector<CalibrationPoint>>>
        points;  // [convention][system]
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const auto& p = prepared[i];
      const auto& item = *p.item;
      const std::uint64_t split_seed =
          derive_seed(config.base_seed, item.context_id,
                      static_cast<std::uint64_t>(r));
      const OracleSplit split =
          split_oracle(item.responses, config.sizes, split_seed);

      const ModeResult mode_a =
          mode(split.oracle_a, config.tie_break,
               derive_seed(split_seed, "mode_a"));
      const ModeResult mode_b =
          mode(split.oracle_b, config.tie_break,
               derive_seed(split_seed, "mode_b"));

      for (GoldConvention convention : kAllGoldConventions) {
        std::string gold;
        switch (convention) {
          case GoldConvention::kOriginalCorpusWord:
            gold = item.gold_atom;
            break;
          case GoldConvention::kHumanMajority:
            gold = p.human_majority_gold;
            break;
          case GoldConvention::kOracleMajority:
            gold = mode_a.word;
            break;
        }
        const std::string conv(gold_convention_name(convention));
        points[conv]["model"].push_back(
            {p.model_mode.probability, p.model_mode.word == gold});
        points[conv]["human"].push_back(
            {mode_b.probability, mode_b.word == gold});
        points[conv]["oracle"].push_back(
            {mode_a.probability, mode_a.word == gold});
      }

      const double tvd_mo = tvd(item.model, split.oracle_a);
      const double tvd_oo = tvd(split.oracle_a, split.oracle_b);
      mean_tvd_model_oracle[i] += tvd_mo / config.resamples;
      mean_tvd_oracle_oracle[i] += tvd_oo / config.resamples;

      if (r == 0) {
        ContextReport& report = result.reports[i];
        report.context_id = item.context_id;
        report.tvd_model_human = tvd(item.model, p.human_full);
        report.tvd_oracle_oracle = tvd_oo;
        report.tvd_model_oracle = tvd_mo;
        report.entropy_human = entropy(p.human_full);
        report.entropy_model = entropy(item.model);
        report.context_length_words = item.context_length_words;
        report.model_mode = p.model_mode.word;
        report.model_confidence = p.model_mode.probability;
        for (GoldConvention convention : kAllGoldConventions) {
          const std::string conv(gold_convention_name(convention));
          std::string gold;
          switch (convention) {
            case GoldConvention::kOriginalCorpusWord:
              gold = item.gold_atom;
              break;
            case GoldConvention::kHumanMajority:
              gold = p.human_majority_gold;
              break;
            case GoldConvention::kOracleMajority:
              gold = mode_a.word;
              break;
          }
          report.gold[conv] = gold;
          report.model_correct[conv] = (p.model_mode.word == gold);
        }
      }
    }
    for (auto& [conv, by_system] : points) {
      for (auto& [system, pts] : by_system) {
        ece_values[conv][system].push_back(ece(pts, config.ece_bins));
      }
    }
  }

  if (config.average_tvd_over_resamples) {
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      result.reports[i].tvd_model_oracle = mean_tvd_model_oracle[i];
      result.reports[i].tvd_oracle_oracle = mean_tvd_oracle_oracle[i];
    }
  }

  for (auto& [conv, by_system] : ece_values) {
    for (auto& [system, values] : by_system) {
      EceCell cell;
      cell.resamples = static_cast<int>(values.size());
      for (double v : values) cell.mean += v;
      cell.mean /= static_cast<double>(values.size());
      cell.stddev = sample_stddev(values);
      result.aggregate.ece[conv][system] = cell;
    }
  }

  double sum_model = 0.0, sum_oracle = 0.0;
  for (const auto& report : result.reports) {
    sum_model += report.tvd_model_human;
    sum_oracle += report.tvd_oracle_oracle;
  }
  const double n = static_cast<double>(result.reports.size());
  result.aggregate.expected_tvd["model"] = sum_model / n;
  result.aggregate.expected_tvd["oracle"] = sum_oracle / n;
  // The full human cpd against itself; kept for the table's column shape.
  result.aggregate.expected_tvd["human"] = 0.0;
  return result;
}

EvaluationResult evaluate(const Dataset& dataset,
                          const std::map<std::string, Cpd>& model_cpds,
                          const OracleConfig& config) {
  std::vector<EvaluationItem> items;
  std::vector<std::string> skipped;
  for (const auto& context : dataset.contexts) {
    auto model_it = model_cpds.find(context.context_id);
    if (model_it == model_cpds.end()) {
      skipped.push_back(context.context_id);
      continue;
    }
    auto rs_it = dataset.response_sets.find(context.context_id);
    if (rs_it == dataset.response_sets.end()) {
      skipped.push_back(context.context_id);
      continue;
    }
    EvaluationItem item;
    item.context_id = context.context_id;
    item.gold_atom = context.corpus_word;
    item.responses = rs_it->second;
    item.model = model_it->second;
    item.context_length_words = count_context_words(context.context_text);
    items.push_back(std::move(item));
  }
  return evaluate_items(items, config, std::move(skipped));
}

// ---------------------------------------------------------------------------
// Serialization

std::string context_reports_to_jsonl(
    const std::vector<ContextReport>& reports) {
  std::string out;
  for (const auto& report : reports) {
    ordered_json row;
    row["context_id"] = report.context_id;
    row["tvd_model_human"] = report.tvd_model_human;
    row["tvd_oracle_oracle"] = report.tvd_oracle_oracle;
    row["tvd_model_oracle"] = report.tvd_model_oracle;
    row["entropy_human"] = report.entropy_human;
    row["entropy_model"] = report.entropy_model;
    row["context_length_words"] = report.context_length_words;
    row["model_mode"] = report.model_mode;
    row["model_confidence"] = report.model_confidence;
    row["gold"] = report.gold;
    row["model_correct"] = report.model_correct;
    out += row.dump();
    out += '\n';
  }
  return out;
}

std::vector<ContextReport> context_reports_from_jsonl(std::istream& in) {
  std::vector<ContextReport> reports;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError("context reports line " + std::to_string(line_no) +
                       ": " + e.what());
    }
    try {
      ContextReport report;
      report.context_id = row.at("context_id").get<std::string>();
      report.tvd_model_human = row.at("tvd_model_human").get<double>();
      report.tvd_oracle_oracle = row.at("tvd_oracle_oracle").get<double>();
      report.tvd_model_oracle = row.at("tvd_model_oracle").get<double>();
      report.entropy_human = row.at("entropy_human").get<double>();
      report.entropy_model = row.at("entropy_model").get<double>();
      report.context_length_words =
          row.at("context_length_words").get<long>();
      report.model_mode = row.at("model_mode").get<std::string>();
      report.model_confidence = row.at("model_confidence").get<double>();
      for (auto& [key, value] : row.at("gold").items()) {
        report.gold[key] = value.get<std::string>();
      }
      for (auto& [key, value] : row.at("model_correct").items()) {
        report.model_correct[key] = value.get<bool>();
      }
      reports.push_back(std::move(report));
    } catch (const ordered_json::exception& e) {
      throw SchemaError("context reports line " + std::to_string(line_no) +
                        ": " + e.what());
    }
  }
  return reports;
}

std::string aggregate_report_to_json(const AggregateReport& aggregate) {
  ordered_json doc;
  doc["evaluated"] = aggregate.evaluated;
  doc["skipped_context_ids"] = aggregate.skipped_context_ids;
  ordered_json tvd_row;
  for (const char* system : {"model", "human", "oracle"}) {
    auto it = aggregate.expected_tvd.find(system);
    tvd_row[system] =
        it == aggregate.expected_tvd.end() ? ordered_json() : ordered_json(it->second);
  }
  doc["expected_tvd"] = tvd_row;
  ordered_json table;
  for (GoldConvention convention : kAllGoldConventions) {
    const std::string conv(gold_convention_name(convention));
    ordered_json row;
    auto conv_it = aggregate.ece.find(conv);
    for (const char* system : {"model", "human", "oracle"}) {
      if (conv_it == aggregate.ece.end() ||
          conv_it->second.find(system) == conv_it->second.end()) {
        row[system] = nullptr;
        continue;
      }
      const EceCell& cell = conv_it->second.at(system);
      row[system] = {{"mean", cell.mean},
                     {"stddev", cell.stddev},
                     {"resamples", cell.resamples}};
    }
    table[conv] = row;
  }
  doc["ece"] = table;
  ordered_json oracle;
  if (aggregate.oracle_sizes) {
    oracle["sizes"] =
        ordered_json::array({aggregate.oracle_sizes->first,
                             aggregate.oracle_sizes->second});
  } else {
    oracle["sizes"] = nullptr;
  }
  oracle["base_seed"] = aggregate.base_seed;
  oracle["resamples"] = aggregate.resamples;
  oracle["ece_bins"] = aggregate.ece_bins;
  doc["oracle"] = oracle;
  return doc.dump(2) + "\n";
}

}  // namespace varcal
