// varcal command-line tool: artifact-oriented front end over the core
// library. Every subcommand reads/writes UTF-8 JSONL/CSV/SVG artifacts in
// --out-dir and records a manifest (tool version, input digests, options)
// so runs are auditable and byte-reproducible.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "varcal/abstraction.hpp"
#include "varcal/ard.hpp"
#include "varcal/bpe.hpp"
#include "varcal/corpus.hpp"
#include "varcal/cpd.hpp"
#include "varcal/endpoint.hpp"
#include "varcal/errors.hpp"
#include "varcal/experiments.hpp"
#include "varcal/io.hpp"
#include "varcal/manifest.hpp"
#include "varcal/metrics.hpp"
#include "varcal/report.hpp"
#include "varcal/rng.hpp"
#include "varcal/sampler.hpp"
#include "varcal/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace varcal;

namespace {

// ---------------------------------------------------------------------------
// Small I/O helpers.

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError(std::string("cannot open ") + what + " file: " + path);
  }
  return in;
}

void write_text(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot open output file for writing: " + path.string());
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) {
    throw InputError("failed writing output file: " + path.string());
  }
}

fs::path ensure_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) {
    throw UsageError("--out-dir is required");
  }
  fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw InputError("cannot create --out-dir " + out_dir + ": " +
                     ec.message());
  }
  return dir;
}

Dataset load_dataset(const std::string& path) {
  auto in = open_input(path, "dataset");
  return parse_canonical_jsonl(in);
}

std::map<std::string, Cpd> load_cpds(const std::string& path) {
  auto in = open_input(path, "cpd");
  return read_cpds_jsonl(in);
}

std::vector<ContextReport> load_reports(const std::string& path) {
  auto in = open_input(path, "context report");
  return context_reports_from_jsonl(in);
}

std::vector<GenerationRecord> load_generations(const std::string& path) {
  auto in = open_input(path, "generations");
  return read_generations_jsonl(in);
}

// ---------------------------------------------------------------------------
// Flag parsing helpers (comma-separated lists keep config files flat).

std::vector<std::string> split_csv_field(const std::string& raw) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : raw) {
    if (c == ',') {
      parts.push_back(current);
      current.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      current += c;
    }
  }
  parts.push_back(current);
  return parts;
}

long parse_long(const std::string& text, const std::string& flag) {
  try {
    std::size_t pos = 0;
    long value = std::stol(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing");
    return value;
  } catch (const std::exception&) {
    throw UsageError(flag + ": not an integer: '" + text + "'");
  }
}

std::optional<std::pair<long, long>> parse_oracle_sizes(
    const std::string& raw) {
  if (raw.empty()) return std::nullopt;
  auto parts = split_csv_field(raw);
  if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
    throw UsageError("--oracle-sizes expects two comma-separated integers");
  }
  return std::make_pair(parse_long(parts[0], "--oracle-sizes"),
                        parse_long(parts[1], "--oracle-sizes"));
}

std::vector<long> parse_long_list(const std::string& raw,
                                  const std::string& flag) {
  std::vector<long> values;
  for (const auto& part : split_csv_field(raw)) {
    if (part.empty()) continue;
    values.push_back(parse_long(part, flag));
  }
  if (values.empty()) {
    throw UsageError(flag + ": expected a comma-separated integer list");
  }
  return values;
}

TieBreak parse_tie_break(const std::string& raw) {
  if (raw == "lexicographic") return TieBreak::kLexicographic;
  if (raw == "seeded") return TieBreak::kSeededRandom;
  throw UsageError("--tie-break must be 'lexicographic' or 'seeded'");
}

std::string render_sizes(const std::optional<std::pair<long, long>>& sizes) {
  if (!sizes) return "half";
  return std::to_string(sizes->first) + "," + std::to_string(sizes->second);
}

// ---------------------------------------------------------------------------
// Manifest assembly.

Manifest make_manifest(const std::string& subcommand) {
  Manifest manifest;
  manifest.tool_version = std::string(kVersion);
  manifest.subcommand = subcommand;
  return manifest;
}

void finish_manifest(Manifest& manifest, const fs::path& out_dir) {
  manifest.outputs.push_back((out_dir / "manifest.json").string());
  write_manifest(manifest, out_dir.string());
}

// ---------------------------------------------------------------------------
// Shared option bundles.

struct OracleFlags {
  std::string oracle_sizes;  // "a,b" or empty for half split
  std::uint64_t seed = 0;
  int resamples = 20;
  int bins = 10;
  std::string tie_break = "lexicographic";
  bool average_tvd = false;

  OracleConfig to_config() const {
    OracleConfig config;
    config.sizes = parse_oracle_sizes(oracle_sizes);
    config.base_seed = seed;
    config.resamples = resamples;
    config.ece_bins = bins;
    config.tie_break = parse_tie_break(tie_break);
    config.average_tvd_over_resamples = average_tvd;
    return config;
  }

  void add_to(CLI::App* sub) {
    sub->add_option("--oracle-sizes", oracle_sizes,
                    "Oracle split sizes 'a,b' (default: half split)");
    sub->add_option("--seed", seed, "Base seed for oracle resampling")
        ->capture_default_str();
    sub->add_option("--resamples", resamples,
                    "Number of oracle split resamples")
        ->capture_default_str();
    sub->add_option("--bins", bins, "ECE confidence bins")
        ->capture_default_str();
    sub->add_option("--tie-break", tie_break,
                    "Mode tie rule: lexicographic|seeded")
        ->check(CLI::IsMember({"lexicographic", "seeded"}))
        ->capture_default_str();
    sub->add_flag("--average-tvd", average_tvd,
                  "Average per-context oracle TVDs over all resamples");
  }

  void record(Manifest& manifest) const {
    manifest.options["oracle_sizes"] = render_sizes(
        parse_oracle_sizes(oracle_sizes));
    manifest.options["seed"] = std::to_string(seed);
    manifest.options["resamples"] = std::to_string(resamples);
    manifest.options["bins"] = std::to_string(bins);
    manifest.options["tie_break"] = tie_break;
    manifest.options["average_tvd"] = average_tvd ? "true" : "false";
  }
};

// Filters for picking one sampling configuration out of a mixed cache file.
struct GenerationFilter {
  std::string model_id;     // empty: accept all
  std::string prompt_mode;  // empty: accept all
  double temperature = -1;  // negative: accept all

  void add_to(CLI::App* sub) {
    sub->add_option("--model-id", model_id,
                    "Only use generations from this model");
    sub->add_option("--prompt-mode", prompt_mode,
                    "Only use generations with this prompt mode")
        ->check(CLI::IsMember({"completion", "chat_independent",
                               "chat_diverse"}));
    sub->add_option("--temperature", temperature,
                    "Only use generations at this temperature");
  }

  std::vector<GenerationRecord> apply(
      std::vector<GenerationRecord> records) const {
    std::optional<PromptMode> mode;
    if (!prompt_mode.empty()) mode = prompt_mode_from_name(prompt_mode);
    std::vector<GenerationRecord> kept;
    kept.reserve(records.size());
    for (auto& record : records) {
      if (!model_id.empty() && record.model_id != model_id) continue;
      if (mode && record.prompt_mode != *mode) continue;
      if (temperature >= 0 && record.temperature != temperature) continue;
      kept.push_back(std::move(record));
    }
    return kept;
  }

  void record(Manifest& manifest) const {
    if (!model_id.empty()) manifest.options["model_id"] = model_id;
    if (!prompt_mode.empty()) manifest.options["prompt_mode"] = prompt_mode;
    if (temperature >= 0) {
      manifest.options["temperature"] = std::to_string(temperature);
    }
  }
};

// ---------------------------------------------------------------------------
// ingest

struct IngestOptions {
  std::string input;
  std::string format = "provo";
  std::string out_dir;
  CsvColumnMap columns{"Text_ID", "Word_Number", "Text", "Word", "Response",
                       std::nullopt};
  std::string count_column;
};

void run_ingest(const IngestOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("ingest");
  add_input_digest(manifest, opt.input);
  manifest.options["format"] = opt.format;

  Dataset dataset;
  if (opt.format == "provo") {
    CsvColumnMap columns = opt.columns;
    if (!opt.count_column.empty()) columns.count = opt.count_column;
    manifest.options["col_passage"] = columns.passage;
    manifest.options["col_wordnum"] = columns.word_num;
    manifest.options["col_context"] = columns.context;
    manifest.options["col_target"] = columns.target;
    manifest.options["col_response"] = columns.response;
    if (columns.count) manifest.options["col_count"] = *columns.count;
    auto in = open_input(opt.input, "input CSV");
    dataset = parse_provo_csv(in, columns);
  } else {
    auto in = open_input(opt.input, "input JSONL");
    dataset = parse_canonical_jsonl(in);
  }

  fs::path dataset_path = out_dir / "dataset.jsonl";
  write_text(dataset_path, emit_canonical_jsonl(dataset));

  ValidationReport validation = validate_dataset(dataset);
  ordered_json vjson;
  vjson["context_count"] = validation.context_count;
  vjson["response_set_count"] = validation.response_set_count;
  vjson["min_responses"] = validation.min_responses;
  vjson["median_responses"] = validation.median_responses;
  vjson["max_responses"] = validation.max_responses;
  vjson["breaches"] = validation.breaches;
  vjson["responses_ingested"] = dataset.ingestion.responses_ingested;
  vjson["empty_responses_dropped"] = dataset.ingestion.empty_responses_dropped;
  vjson["multiword_responses_truncated"] =
      dataset.ingestion.multiword_responses_truncated;
  fs::path validation_path = out_dir / "validation.json";
  write_text(validation_path, vjson.dump(2) + "\n");

  manifest.outputs.push_back(dataset_path.string());
  manifest.outputs.push_back(validation_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "ingest: " << validation.context_count << " contexts, "
            << dataset.ingestion.responses_ingested << " responses";
  if (!validation.ok()) {
    std::cout << ", " << validation.breaches.size() << " validation breaches";
  }
  std::cout << "\n";
}

// ---------------------------------------------------------------------------
// sample

struct SampleOptions {
  std::string dataset;
  std::string generations;
  std::string endpoint_url;
  std::string model_id;
  int n_samples = 40;
  double temperature = 1.0;
  std::string prompt_mode = "completion";
  std::optional<long> seed;
  long retry_factor = 5;
  int max_tokens = 10;
  int batch_size = 20;
  int concurrency = 4;
  int timeout_s = 120;
  std::string out_dir;
};

void run_sample(const SampleOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("sample");
  add_input_digest(manifest, opt.dataset);
  manifest.options["endpoint_url"] = opt.endpoint_url;
  manifest.options["model_id"] = opt.model_id;
  manifest.options["n_samples"] = std::to_string(opt.n_samples);
  manifest.options["temperature"] = std::to_string(opt.temperature);
  manifest.options["prompt_mode"] = opt.prompt_mode;
  manifest.options["seed"] =
      opt.seed ? std::to_string(*opt.seed) : std::string("none");
  manifest.options["retry_factor"] = std::to_string(opt.retry_factor);

  Dataset dataset = load_dataset(opt.dataset);

  EndpointConfig endpoint;
  endpoint.base_url = opt.endpoint_url;
  endpoint.model_id = opt.model_id;
  endpoint.max_tokens = opt.max_tokens;
  endpoint.batch_size = opt.batch_size;
  endpoint.concurrency = opt.concurrency;
  endpoint.timeout_s = opt.timeout_s;

  CollectOptions collect;
  collect.n_per_context = opt.n_samples;
  collect.temperature = opt.temperature;
  collect.prompt_mode = prompt_mode_from_name(opt.prompt_mode);
  collect.seed = opt.seed;
  collect.retry_factor = opt.retry_factor;

  GenerationCache cache(opt.generations);
  CollectResult result =
      collect_generations(dataset.contexts, endpoint, collect, cache);

  ordered_json stats;
  stats["contexts"] = dataset.contexts.size();
  stats["records"] = result.records.size();
  stats["attempts"] = result.stats.attempts;
  stats["rejections"] = result.stats.rejections;
  stats["rejection_rate"] = result.stats.rejection_rate();
  stats["http_requests"] = result.http_requests;
  stats["incomplete_context_ids"] = result.incomplete_context_ids;
  stats["warnings"] = result.warnings;
  fs::path stats_path = out_dir / "stats.json";
  write_text(stats_path, stats.dump(2) + "\n");

  manifest.outputs.push_back(cache.path());
  manifest.outputs.push_back(stats_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "sample: " << result.records.size() << " records ("
            << result.http_requests << " HTTP requests, rejection rate "
            << result.stats.rejection_rate() << ")\n";
  for (const auto& warning : result.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
  if (!result.incomplete_context_ids.empty()) {
    std::cerr << "warning: " << result.incomplete_context_ids.size()
              << " context(s) incomplete after the attempt budget\n";
  }
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
  std::string generations;
  std::string estimator = "mc";
  std::string dataset;                    // biased: corpus + human words
  std::string scores;                     // biased: replay file
  std::string endpoint_url;               // biased: live scoring
  std::string model_id;                   // metadata + filter
  std::vector<std::string> nucleus;       // extra candidate files
  std::string greedy;                     // greedy candidate file
  GenerationFilter filter;
  std::optional<long> n_samples_meta;
  std::string out_dir;
};

std::map<std::string, std::vector<std::string>> sliced_words_by_context(
    const std::vector<GenerationRecord>& records) {
  std::map<std::string, std::vector<std::string>> words;
  for (const auto& record : records) {
    if (record.sliced_word) {
      words[record.context_id].push_back(*record.sliced_word);
    }
  }
  return words;
}

void run_estimate(const EstimateOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("estimate");
  add_input_digest(manifest, opt.generations);
  manifest.options["estimator"] = opt.estimator;
  opt.filter.record(manifest);

  auto records = opt.filter.apply(load_generations(opt.generations));
  if (records.empty()) {
    throw InputError("no generation records match the requested filters");
  }
  std::string model_id =
      !opt.filter.model_id.empty() ? opt.filter.model_id
                                   : records.front().model_id;

  auto groups = group_by_context(std::move(records));
  std::map<std::string, Cpd> cpds;
  std::vector<std::string> skipped;

  if (opt.estimator == "mc") {
    for (const auto& [context_id, group] : groups) {
      try {
        cpds[context_id] = mc_estimate(group);
      } catch (const EstimationError&) {
        skipped.push_back(context_id);
      }
    }
  } else {  // biased
    if (opt.dataset.empty()) {
      throw UsageError(
          "--estimator biased requires --dataset for corpus and human "
          "candidate words");
    }
    add_input_digest(manifest, opt.dataset);
    Dataset dataset = load_dataset(opt.dataset);

    std::map<std::string, std::vector<std::string>> nucleus_words;
    for (const auto& path : opt.nucleus) {
      add_input_digest(manifest, path);
      auto extra = sliced_words_by_context(
          opt.filter.apply(load_generations(path)));
      for (auto& [context_id, words] : extra) {
        auto& sink = nucleus_words[context_id];
        sink.insert(sink.end(), words.begin(), words.end());
      }
    }
    std::map<std::string, std::vector<std::string>> greedy_words;
    if (!opt.greedy.empty()) {
      add_input_digest(manifest, opt.greedy);
      greedy_words = sliced_words_by_context(
          opt.filter.apply(load_generations(opt.greedy)));
    }

    std::unique_ptr<EndpointClient> client;
    std::unique_ptr<LogprobScorer> scorer;
    EndpointScorer* live_scorer = nullptr;
    if (!opt.scores.empty()) {
      add_input_digest(manifest, opt.scores);
      auto in = open_input(opt.scores, "score replay");
      scorer = std::make_unique<ReplayScorer>(in);
    } else if (!opt.endpoint_url.empty()) {
      EndpointConfig endpoint;
      endpoint.base_url = opt.endpoint_url;
      endpoint.model_id = model_id;
      client = std::make_unique<EndpointClient>(endpoint);
      auto live = std::make_unique<EndpointScorer>(*client);
      live_scorer = live.get();
      scorer = std::move(live);
      manifest.options["endpoint_url"] = opt.endpoint_url;
    } else {
      throw UsageError(
          "--estimator biased requires --scores or --endpoint-url");
    }

    for (const auto& context : dataset.contexts) {
      auto group = groups.find(context.context_id);
      if (group == groups.end()) {
        skipped.push_back(context.context_id);
        continue;
      }
      CandidateSources sources;
      for (const auto& record : group->second) {
        if (record.sliced_word) {
          sources.unbiased_samples.push_back(*record.sliced_word);
        }
      }
      if (auto it = nucleus_words.find(context.context_id);
          it != nucleus_words.end()) {
        sources.nucleus_samples = it->second;
      }
      if (auto it = greedy_words.find(context.context_id);
          it != greedy_words.end() && !it->second.empty()) {
        sources.greedy_word = it->second.front();
      }
      sources.corpus_word = context.corpus_word;
      auto responses = dataset.response_sets.find(context.context_id);
      if (responses != dataset.response_sets.end()) {
        for (const auto& [word, count] : responses->second.responses) {
          sources.human_words.push_back(word);
        }
      }
      auto pool = build_candidate_pool(sources);
      if (pool.empty()) {
        skipped.push_back(context.context_id);
        continue;
      }
      auto scored = score_candidates(context, pool, *scorer);
      cpds[context.context_id] = biased_estimate(scored);
    }

    if (live_scorer) {
      std::string lines;
      for (const auto& [key, value] : live_scorer->scored()) {
        ordered_json row;
        row["context_id"] = key.first;
        row["word"] = key.second;
        row["log_joint"] = value;
        lines += row.dump();
        lines += '\n';
      }
      fs::path scores_path = out_dir / "scores.jsonl";
      write_text(scores_path, lines);
      manifest.outputs.push_back(scores_path.string());
    }
  }

  if (cpds.empty()) {
    throw EstimationError("estimate: no context yielded a cpd");
  }

  CpdFileMeta meta;
  meta.model_id = model_id;
  meta.estimator = opt.estimator;
  meta.n_samples = opt.n_samples_meta;

  std::ostringstream cpd_stream;
  write_cpds_jsonl(cpd_stream, cpds, meta);
  fs::path cpds_path = out_dir / "cpds.jsonl";
  write_text(cpds_path, cpd_stream.str());

  std::sort(skipped.begin(), skipped.end());
  ordered_json summary;
  summary["estimator"] = opt.estimator;
  summary["model_id"] = model_id;
  summary["estimated"] = cpds.size();
  summary["skipped_context_ids"] = skipped;
  fs::path summary_path = out_dir / "estimate_summary.json";
  write_text(summary_path, summary.dump(2) + "\n");

  manifest.outputs.push_back(cpds_path.string());
  manifest.outputs.push_back(summary_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "estimate: " << cpds.size() << " cpds (" << opt.estimator
            << "), " << skipped.size() << " skipped\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string dataset;
  std::string cpds;
  OracleFlags oracle;
  std::string out_dir;
};

void run_evaluate(const EvaluateOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("evaluate");
  add_input_digest(manifest, opt.dataset);
  add_input_digest(manifest, opt.cpds);
  opt.oracle.record(manifest);

  Dataset dataset = load_dataset(opt.dataset);
  auto cpds = load_cpds(opt.cpds);
  EvaluationResult result = evaluate(dataset, cpds, opt.oracle.to_config());

  fs::path reports_path = out_dir / "context_reports.jsonl";
  write_text(reports_path, context_reports_to_jsonl(result.reports));
  fs::path aggregate_path = out_dir / "aggregate.json";
  write_text(aggregate_path, aggregate_report_to_json(result.aggregate));

  manifest.outputs.push_back(reports_path.string());
  manifest.outputs.push_back(aggregate_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "evaluate: " << result.aggregate.evaluated << " contexts, "
            << result.aggregate.skipped_context_ids.size()
            << " skipped; expected TVD model="
            << result.aggregate.expected_tvd.at("model")
            << " oracle=" << result.aggregate.expected_tvd.at("oracle")
            << "\n";
}

// ---------------------------------------------------------------------------
// experiment improve

struct ImproveOptions {
  std::string reports;
  std::string ks = "0,10,20,30,40,50,60,70,80,90,100";
  std::uint64_t seed = 0;
  int n_seeds = 10;
  std::string oracle_sizes;
  std::string out_dir;
};

void run_improve(const ImproveOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("experiment improve");
  add_input_digest(manifest, opt.reports);
  manifest.options["ks"] = opt.ks;
  manifest.options["seed"] = std::to_string(opt.seed);
  manifest.options["n_seeds"] = std::to_string(opt.n_seeds);

  auto reports = load_reports(opt.reports);
  std::map<std::string, double> model_tvds;
  std::map<std::string, double> oracle_tvds;
  for (const auto& report : reports) {
    model_tvds[report.context_id] = report.tvd_model_oracle;
    oracle_tvds[report.context_id] = report.tvd_oracle_oracle;
  }

  std::vector<int> ks;
  for (long k : parse_long_list(opt.ks, "--ks")) {
    ks.push_back(static_cast<int>(k));
  }
  if (opt.n_seeds < 1) throw UsageError("--n-seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < opt.n_seeds; ++i) {
    seeds.push_back(opt.seed + static_cast<std::uint64_t>(i));
  }

  std::pair<long, long> sizes{0, 0};
  if (auto parsed = parse_oracle_sizes(opt.oracle_sizes)) sizes = *parsed;
  auto results = improvement_sweep(model_tvds, oracle_tvds, ks, seeds, sizes);

  fs::path results_path = out_dir / "improvement.jsonl";
  write_text(results_path, improvement_results_to_jsonl(results));
  manifest.outputs.push_back(results_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "experiment improve: " << results.size() << " cells over "
            << model_tvds.size() << " contexts\n";
}

// ---------------------------------------------------------------------------
// experiment subsample

struct SubsampleOptions {
  std::string dataset;
  std::string generations;
  std::string sizes = "5,10,15,20,30,40";
  std::uint64_t seed = 0;
  int n_seeds = 10;
  std::string target = "human";  // human: full mle; oracle: oracle_a
  std::string oracle_sizes;
  GenerationFilter filter;
  std::string out_dir;
};

void run_subsample(const SubsampleOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("experiment subsample");
  add_input_digest(manifest, opt.dataset);
  add_input_digest(manifest, opt.generations);
  manifest.options["sizes"] = opt.sizes;
  manifest.options["seed"] = std::to_string(opt.seed);
  manifest.options["n_seeds"] = std::to_string(opt.n_seeds);
  manifest.options["target"] = opt.target;
  opt.filter.record(manifest);

  Dataset dataset = load_dataset(opt.dataset);
  auto records = opt.filter.apply(load_generations(opt.generations));
  auto groups = group_by_context(std::move(records));

  auto split_sizes = parse_oracle_sizes(opt.oracle_sizes);
  std::map<std::string, Cpd> targets;
  for (const auto& [context_id, responses] : dataset.response_sets) {
    if (opt.target == "human") {
      auto counts = responses.to_counts();
      if (counts.empty()) continue;
      targets[context_id] = mle(counts);
    } else {
      try {
        auto split = split_oracle(responses, split_sizes,
                                  derive_seed(opt.seed, context_id, 0));
        targets[context_id] = split.oracle_a;
      } catch (const SplitError&) {
        continue;  // excluded by subsample_mse as a missing target
      }
    }
  }

  std::vector<long> sizes = parse_long_list(opt.sizes, "--sizes");
  if (opt.n_seeds < 1) throw UsageError("--n-seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < opt.n_seeds; ++i) {
    seeds.push_back(opt.seed + static_cast<std::uint64_t>(i));
  }

  SubsampleRun run = subsample_mse(groups, sizes, seeds, targets);

  fs::path results_path = out_dir / "subsample.jsonl";
  write_text(results_path, subsample_run_to_jsonl(run));
  manifest.outputs.push_back(results_path.string());
  finish_manifest(manifest, out_dir);

  std::size_t kept =
      run.results.empty() ? 0 : run.results.front().context_ids.size();
  std::cout << "experiment subsample: " << run.results.size()
            << " cells over " << kept << " contexts ("
            << run.excluded_context_ids.size() << " excluded)\n";
}

// ---------------------------------------------------------------------------
// experiment token

struct TokenOptions {
  std::string dataset;
  std::string generations;
  std::string merges;
  std::string vocab;
  GenerationFilter filter;
  OracleFlags oracle;
  std::string out_dir;
};

void run_token(const TokenOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("experiment token");
  add_input_digest(manifest, opt.dataset);
  add_input_digest(manifest, opt.generations);
  add_input_digest(manifest, opt.merges);
  opt.filter.record(manifest);
  opt.oracle.record(manifest);

  Dataset dataset = load_dataset(opt.dataset);
  auto records = opt.filter.apply(load_generations(opt.generations));
  auto groups = group_by_context(std::move(records));

  auto merges_in = open_input(opt.merges, "merges");
  std::optional<std::ifstream> vocab_in;
  if (!opt.vocab.empty()) {
    add_input_digest(manifest, opt.vocab);
    vocab_in.emplace(open_input(opt.vocab, "vocab"));
  }
  BpeVocab vocab =
      BpeVocab::load(merges_in, vocab_in ? &*vocab_in : nullptr);

  EvaluationResult result =
      token_level_eval(dataset, groups, vocab, opt.oracle.to_config());

  fs::path reports_path = out_dir / "token_context_reports.jsonl";
  write_text(reports_path, context_reports_to_jsonl(result.reports));
  fs::path aggregate_path = out_dir / "token_aggregate.json";
  write_text(aggregate_path, aggregate_report_to_json(result.aggregate));

  manifest.outputs.push_back(reports_path.string());
  manifest.outputs.push_back(aggregate_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "experiment token: " << result.aggregate.evaluated
            << " contexts, " << result.aggregate.skipped_context_ids.size()
            << " skipped; expected TVD model="
            << result.aggregate.expected_tvd.at("model") << "\n";
}

// ---------------------------------------------------------------------------
// regress

std::string last_word_for_tagging(const std::string& context_text) {
  std::string_view text(context_text);
  while (!text.empty() &&
         std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  std::size_t start = text.size();
  while (start > 0 &&
         !std::isspace(static_cast<unsigned char>(text[start - 1]))) {
    --start;
  }
  std::string chunk(text.substr(start));
  std::string normalized = normalize_word(chunk);
  return normalized.empty() ? chunk : normalized;
}

struct RegressOptions {
  std::string reports;
  std::string dataset;
  std::string tags;
  int max_iters = 500;
  double tol = 1e-6;
  double interval = 0.95;
  double prune_threshold = 1e6;
  std::string out_dir;
};

void run_regress(const RegressOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("regress");
  add_input_digest(manifest, opt.reports);
  add_input_digest(manifest, opt.dataset);
  manifest.options["max_iters"] = std::to_string(opt.max_iters);
  manifest.options["tol"] = std::to_string(opt.tol);
  manifest.options["interval"] = std::to_string(opt.interval);
  manifest.options["tagger"] = opt.tags.empty() ? "baseline" : "external";

  auto reports = load_reports(opt.reports);
  Dataset dataset = load_dataset(opt.dataset);

  std::unique_ptr<Tagger> tagger;
  std::unique_ptr<ExternalTagAnnotations> external;
  if (!opt.tags.empty()) {
    add_input_digest(manifest, opt.tags);
    auto in = open_input(opt.tags, "tag annotation");
    external = std::make_unique<ExternalTagAnnotations>(in);
  } else {
    tagger = std::make_unique<BaselineTagger>();
  }

  std::map<std::string, std::string> last_word_tags;
  for (const auto& report : reports) {
    const Context* context = dataset.find_context(report.context_id);
    if (!context) continue;
    std::string word = last_word_for_tagging(context->context_text);
    if (word.empty()) continue;
    if (external) {
      if (!external->has(context->context_id, word)) continue;
      last_word_tags[report.context_id] =
          std::string(tag_name(external->tag(*context, word)));
    } else {
      last_word_tags[report.context_id] =
          std::string(tag_name(tagger->tag(*context, word)));
    }
  }

  FeatureMatrix features = build_features(reports, last_word_tags);

  ArdOptions options;
  options.max_iters = opt.max_iters;
  options.tol = opt.tol;
  options.interval_level = opt.interval;
  options.prune_threshold = opt.prune_threshold;
  ArdFit fit = fit_ard(features, options);

  fs::path features_path = out_dir / "features.csv";
  write_text(features_path, feature_matrix_to_csv(features));
  fs::path ard_path = out_dir / "ard.json";
  write_text(ard_path, ard_fit_to_json(fit, features.feature_names));

  ordered_json summary;
  summary["rows"] = features.context_ids.size();
  summary["dropped_context_ids"] = features.dropped_context_ids;
  std::vector<std::string> constant;
  for (std::size_t i = 0; i < features.feature_names.size(); ++i) {
    if (features.constant_features[i]) {
      constant.push_back(features.feature_names[i]);
    }
  }
  summary["constant_features"] = constant;
  summary["converged"] = fit.converged;
  summary["iterations_run"] = fit.iterations_run;
  fs::path summary_path = out_dir / "regress_summary.json";
  write_text(summary_path, summary.dump(2) + "\n");

  manifest.outputs.push_back(features_path.string());
  manifest.outputs.push_back(ard_path.string());
  manifest.outputs.push_back(summary_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "regress: " << features.context_ids.size() << " rows, "
            << features.dropped_context_ids.size() << " dropped, "
            << (fit.converged ? "converged" : "max iterations") << " after "
            << fit.iterations_run << " iteration(s)\n";
}

// ---------------------------------------------------------------------------
// abstract syn / sem

struct AbstractOptions {
  std::string dataset;
  std::string cpds;
  std::string tags;            // syn only
  std::string embeddings;      // sem only
  std::string embeddings_format = "text";
  int fixed_k = 0;             // sem only; 0 = select automatically
  std::string oracle_sizes;
  std::uint64_t seed = 0;
  std::string out_dir;
};

void run_abstract_syn(const AbstractOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("abstract syn");
  add_input_digest(manifest, opt.dataset);
  add_input_digest(manifest, opt.cpds);
  manifest.options["oracle_sizes"] =
      render_sizes(parse_oracle_sizes(opt.oracle_sizes));
  manifest.options["seed"] = std::to_string(opt.seed);
  manifest.options["tagger"] = opt.tags.empty() ? "baseline" : "external";

  Dataset dataset = load_dataset(opt.dataset);
  auto cpds = load_cpds(opt.cpds);
  auto sizes = parse_oracle_sizes(opt.oracle_sizes);

  std::unique_ptr<Tagger> tagger;
  if (!opt.tags.empty()) {
    add_input_digest(manifest, opt.tags);
    auto in = open_input(opt.tags, "tag annotation");
    tagger = std::make_unique<ExternalTagAnnotations>(in);
  } else {
    tagger = std::make_unique<BaselineTagger>();
  }

  std::string lines;
  std::vector<std::string> skipped;
  std::size_t evaluated = 0;
  for (const auto& context : dataset.contexts) {
    auto model_it = cpds.find(context.context_id);
    auto responses_it = dataset.response_sets.find(context.context_id);
    if (model_it == cpds.end() || responses_it == dataset.response_sets.end()) {
      skipped.push_back(context.context_id);
      continue;
    }
    OracleSplit split;
    try {
      split = split_oracle(responses_it->second, sizes,
                           derive_seed(opt.seed, context.context_id, 0));
    } catch (const SplitError&) {
      skipped.push_back(context.context_id);
      continue;
    }
    Cpd human = mle(responses_it->second.to_counts());
    Cpd tags_human = tag_cpd(context, human, *tagger);
    Cpd tags_model = tag_cpd(context, model_it->second, *tagger);
    Cpd tags_a = tag_cpd(context, split.oracle_a, *tagger);
    Cpd tags_b = tag_cpd(context, split.oracle_b, *tagger);

    ordered_json row;
    row["context_id"] = context.context_id;
    row["tvd_model_human"] = tvd(model_it->second, human);
    row["tvd_syn_model_human"] = tvd(tags_model, tags_human);
    row["tvd_syn_model_oracle"] = tvd(tags_model, tags_a);
    row["tvd_syn_oracle_oracle"] = tvd(tags_b, tags_a);
    lines += row.dump();
    lines += '\n';
    ++evaluated;
  }
  if (evaluated == 0) {
    throw MetricError("abstract syn: no evaluable contexts");
  }

  fs::path rows_path = out_dir / "abstraction_syn.jsonl";
  write_text(rows_path, lines);
  ordered_json summary;
  summary["evaluated"] = evaluated;
  summary["skipped_context_ids"] = skipped;
  fs::path summary_path = out_dir / "abstraction_syn_summary.json";
  write_text(summary_path, summary.dump(2) + "\n");

  manifest.outputs.push_back(rows_path.string());
  manifest.outputs.push_back(summary_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "abstract syn: " << evaluated << " contexts, "
            << skipped.size() << " skipped\n";
}

void run_abstract_sem(const AbstractOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("abstract sem");
  add_input_digest(manifest, opt.dataset);
  add_input_digest(manifest, opt.cpds);
  add_input_digest(manifest, opt.embeddings);
  manifest.options["oracle_sizes"] =
      render_sizes(parse_oracle_sizes(opt.oracle_sizes));
  manifest.options["seed"] = std::to_string(opt.seed);
  manifest.options["embeddings_format"] = opt.embeddings_format;
  manifest.options["k"] =
      opt.fixed_k > 0 ? std::to_string(opt.fixed_k) : std::string("auto");

  Dataset dataset = load_dataset(opt.dataset);
  auto cpds = load_cpds(opt.cpds);
  auto sizes = parse_oracle_sizes(opt.oracle_sizes);

  std::set<std::string> vocabulary;
  for (const auto& [context_id, cpd] : cpds) {
    for (const auto& [word, prob] : cpd.entries()) vocabulary.insert(word);
  }
  for (const auto& [context_id, responses] : dataset.response_sets) {
    for (const auto& [word, count] : responses.responses) {
      vocabulary.insert(word);
    }
  }

  EmbeddingFormat format = opt.embeddings_format == "binary"
                               ? EmbeddingFormat::kBinary
                               : EmbeddingFormat::kText;
  auto embeddings_in = open_input(opt.embeddings, "embedding");
  EmbeddingTable table = load_embeddings(embeddings_in, format, vocabulary);

  std::string lines;
  std::vector<std::string> skipped;
  std::size_t evaluated = 0;
  for (const auto& context : dataset.contexts) {
    auto model_it = cpds.find(context.context_id);
    auto responses_it = dataset.response_sets.find(context.context_id);
    if (model_it == cpds.end() || responses_it == dataset.response_sets.end()) {
      skipped.push_back(context.context_id);
      continue;
    }
    OracleSplit split;
    try {
      split = split_oracle(responses_it->second, sizes,
                           derive_seed(opt.seed, context.context_id, 0));
    } catch (const SplitError&) {
      skipped.push_back(context.context_id);
      continue;
    }
    Cpd human = mle(responses_it->second.to_counts());

    SemTvdParams params;
    if (opt.fixed_k > 0) params.fixed_k = opt.fixed_k;
    params.kmeans.seed = derive_seed(opt.seed, context.context_id);
    SemTvdResult result = tvd_sem(human, model_it->second, table, params);

    ordered_json row;
    row["context_id"] = context.context_id;
    row["k_used"] = result.partition.k_used;
    row["degenerate"] = result.partition.degenerate;
    row["n_oov"] = result.partition.oov_words.size();
    row["tvd_model_human"] = tvd(model_it->second, human);
    row["tvd_sem_model_human"] = result.value;
    row["tvd_sem_model_oracle"] =
        tvd_over_partition(model_it->second, split.oracle_a, result.partition);
    row["tvd_sem_oracle_oracle"] =
        tvd_over_partition(split.oracle_b, split.oracle_a, result.partition);
    lines += row.dump();
    lines += '\n';
    ++evaluated;
  }
  if (evaluated == 0) {
    throw MetricError("abstract sem: no evaluable contexts");
  }

  fs::path rows_path = out_dir / "abstraction_sem.jsonl";
  write_text(rows_path, lines);
  ordered_json summary;
  summary["evaluated"] = evaluated;
  summary["skipped_context_ids"] = skipped;
  summary["embedding_vocabulary"] = table.vectors.size();
  fs::path summary_path = out_dir / "abstraction_sem_summary.json";
  write_text(summary_path, summary.dump(2) + "\n");

  manifest.outputs.push_back(rows_path.string());
  manifest.outputs.push_back(summary_path.string());
  finish_manifest(manifest, out_dir);

  std::cout << "abstract sem: " << evaluated << " contexts, "
            << skipped.size() << " skipped\n";
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  std::string reports;
  int bins = 20;
  std::string dataset;     // topk: human cpd source
  std::string cpds;        // topk: model cpd source
  std::string context_id;  // topk target context
  int topk = 15;
  std::string out_dir;
};

void run_report(const ReportOptions& opt) {
  fs::path out_dir = ensure_out_dir(opt.out_dir);
  Manifest manifest = make_manifest("report");
  add_input_digest(manifest, opt.reports);
  manifest.options["bins"] = std::to_string(opt.bins);

  auto reports = load_reports(opt.reports);
  std::vector<double> model_tvds;
  std::vector<double> oracle_tvds;
  std::vector<double> diffs;
  for (const auto& report : reports) {
    model_tvds.push_back(report.tvd_model_oracle);
    oracle_tvds.push_back(report.tvd_oracle_oracle);
    diffs.push_back(report.tvd_model_oracle - report.tvd_oracle_oracle);
  }

  auto emit = [&](const std::string& stem, const std::string& json,
                  const std::optional<std::string>& svg) {
    fs::path json_path = out_dir / (stem + ".json");
    write_text(json_path, json + "\n");
    manifest.outputs.push_back(json_path.string());
    if (svg) {
      fs::path svg_path = out_dir / (stem + ".svg");
      write_text(svg_path, *svg);
      manifest.outputs.push_back(svg_path.string());
    }
  };

  HistogramData hist_model = histogram(model_tvds, opt.bins);
  emit("histogram_model", histogram_to_json(hist_model),
       render_histogram_svg(hist_model, "TVD(model, oracle)"));
  HistogramData hist_oracle = histogram(oracle_tvds, opt.bins);
  emit("histogram_oracle", histogram_to_json(hist_oracle),
       render_histogram_svg(hist_oracle, "TVD(oracle, oracle)"));
  HistogramData hist_diff = histogram(diffs, opt.bins, -1.0, 1.0);
  emit("histogram_diff", histogram_to_json(hist_diff),
       render_histogram_svg(hist_diff, "TVD difference (model - oracle)"));

  if (reports.size() >= 2) {
    KdeCurve kde_model = kde(model_tvds);
    KdeCurve kde_oracle = kde(oracle_tvds);
    ordered_json kde_json;
    kde_json["model"] = ordered_json::parse(kde_to_json(kde_model));
    kde_json["oracle"] = ordered_json::parse(kde_to_json(kde_oracle));
    emit("kde", kde_json.dump(),
         render_kde_svg({kde_model, kde_oracle}, {"model", "oracle"},
                        "TVD distribution"));
  }

  bool topk_requested = !opt.context_id.empty();
  if (topk_requested) {
    if (opt.dataset.empty() || opt.cpds.empty()) {
      throw UsageError(
          "--context-id requires --dataset and --cpds for the top-k "
          "comparison");
    }
    add_input_digest(manifest, opt.dataset);
    add_input_digest(manifest, opt.cpds);
    manifest.options["context_id"] = opt.context_id;
    manifest.options["topk"] = std::to_string(opt.topk);
    Dataset dataset = load_dataset(opt.dataset);
    auto cpds = load_cpds(opt.cpds);
    auto responses_it = dataset.response_sets.find(opt.context_id);
    auto model_it = cpds.find(opt.context_id);
    if (responses_it == dataset.response_sets.end()) {
      throw InputError("report: context not in dataset: " + opt.context_id);
    }
    if (model_it == cpds.end()) {
      throw InputError("report: context has no model cpd: " + opt.context_id);
    }
    Cpd human = mle(responses_it->second.to_counts());
    TopkComparison comparison =
        topk_comparison(human, model_it->second, opt.topk);
    emit("topk", topk_to_json(comparison),
         render_topk_svg(comparison, "Top-" + std::to_string(opt.topk) +
                                         " words: " + opt.context_id));
  }

  finish_manifest(manifest, out_dir);
  std::cout << "report: " << reports.size() << " contexts summarized\n";
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{
      "varcal: measures how well a language model's next-word predictive "
      "distribution reproduces human population variability"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "",
                 "Key-value config file (section per subcommand); "
                 "command-line flags override it");
  app.require_subcommand(1);

  IngestOptions ingest_opt;
  auto* ingest = app.add_subcommand(
      "ingest", "Parse a predictability-norm CSV into canonical JSONL");
  ingest->add_option("--input", ingest_opt.input, "Input CSV/JSONL file")
      ->required();
  ingest->add_option("--format", ingest_opt.format,
                     "Input format: provo|canonical")
      ->check(CLI::IsMember({"provo", "canonical"}))
      ->capture_default_str();
  ingest->add_option("--col-passage", ingest_opt.columns.passage,
                     "CSV column holding the passage id")
      ->capture_default_str();
  ingest->add_option("--col-wordnum", ingest_opt.columns.word_num,
                     "CSV column holding the word number")
      ->capture_default_str();
  ingest->add_option("--col-context", ingest_opt.columns.context,
                     "CSV column holding the context text")
      ->capture_default_str();
  ingest->add_option("--col-target", ingest_opt.columns.target,
                     "CSV column holding the corpus word")
      ->capture_default_str();
  ingest->add_option("--col-response", ingest_opt.columns.response,
                     "CSV column holding the human answer")
      ->capture_default_str();
  ingest->add_option("--col-count", ingest_opt.count_column,
                     "CSV column holding an answer count (default: one row "
                     "per answer)");
  ingest->add_option("--out-dir", ingest_opt.out_dir, "Output directory")
      ->required();
  ingest->callback([&] { run_ingest(ingest_opt); });

  SampleOptions sample_opt;
  auto* sample = app.add_subcommand(
      "sample", "Collect model generations through an HTTP endpoint");
  sample->add_option("--dataset", sample_opt.dataset, "Canonical dataset")
      ->required();
  sample->add_option("--generations", sample_opt.generations,
                     "Generation cache JSONL (created if missing)")
      ->required();
  sample->add_option("--endpoint-url", sample_opt.endpoint_url,
                     "Endpoint base URL, e.g. http://host:port/v1")
      ->required();
  sample->add_option("--model-id", sample_opt.model_id, "Model identifier")
      ->required();
  sample->add_option("--n-samples", sample_opt.n_samples,
                     "Generations per context")
      ->capture_default_str();
  sample->add_option("--temperature", sample_opt.temperature,
                     "Sampling temperature")
      ->capture_default_str();
  sample->add_option("--prompt-mode", sample_opt.prompt_mode,
                     "completion|chat_independent|chat_diverse")
      ->check(CLI::IsMember({"completion", "chat_independent",
                             "chat_diverse"}))
      ->capture_default_str();
  long sample_seed = -1;
  sample->add_option("--seed", sample_seed,
                     "Seed recorded on fresh generations");
  sample->add_option("--retry-factor", sample_opt.retry_factor,
                     "Attempt budget = retry-factor x n-samples")
      ->capture_default_str();
  sample->add_option("--max-tokens", sample_opt.max_tokens,
                     "Token cap per generation")
      ->capture_default_str();
  sample->add_option("--batch-size", sample_opt.batch_size,
                     "Completions requested per call")
      ->capture_default_str();
  sample->add_option("--concurrency", sample_opt.concurrency,
                     "Contexts processed in parallel")
      ->capture_default_str();
  sample->add_option("--timeout", sample_opt.timeout_s,
                     "HTTP timeout in seconds")
      ->capture_default_str();
  sample->add_option("--out-dir", sample_opt.out_dir, "Output directory")
      ->required();
  sample->callback([&] {
    if (sample_seed >= 0) sample_opt.seed = sample_seed;
    run_sample(sample_opt);
  });

  EstimateOptions estimate_opt;
  auto* estimate = app.add_subcommand(
      "estimate", "Estimate per-context word cpds from generations");
  estimate->add_option("--generations", estimate_opt.generations,
                       "Generations JSONL")
      ->required();
  estimate->add_option("--estimator", estimate_opt.estimator, "mc|biased")
      ->check(CLI::IsMember({"mc", "biased"}))
      ->capture_default_str();
  estimate->add_option("--dataset", estimate_opt.dataset,
                       "Canonical dataset (required for biased)");
  estimate->add_option("--scores", estimate_opt.scores,
                       "Replay JSONL of candidate log-joint scores");
  estimate->add_option("--endpoint-url", estimate_opt.endpoint_url,
                       "Endpoint for live candidate scoring");
  estimate->add_option("--nucleus-generations", estimate_opt.nucleus,
                       "Extra candidate generation files (repeatable)");
  estimate->add_option("--greedy-generations", estimate_opt.greedy,
                       "Greedy-decoded generation file (first word used)");
  long estimate_n_samples = -1;
  estimate->add_option("--n-samples", estimate_n_samples,
                       "Recorded in the cpd file metadata");
  estimate_opt.filter.add_to(estimate);
  estimate->add_option("--out-dir", estimate_opt.out_dir, "Output directory")
      ->required();
  estimate->callback([&] {
    if (estimate_n_samples >= 0) {
      estimate_opt.n_samples_meta = estimate_n_samples;
    }
    run_estimate(estimate_opt);
  });

  EvaluateOptions evaluate_opt;
  auto* evaluate = app.add_subcommand(
      "evaluate", "TVD calibration and accuracy-style ECE evaluation");
  evaluate->add_option("--dataset", evaluate_opt.dataset, "Canonical dataset")
      ->required();
  evaluate->add_option("--cpds", evaluate_opt.cpds, "Model cpd JSONL")
      ->required();
  evaluate_opt.oracle.add_to(evaluate);
  evaluate->add_option("--out-dir", evaluate_opt.out_dir, "Output directory")
      ->required();
  evaluate->callback([&] { run_evaluate(evaluate_opt); });

  auto* experiment =
      app.add_subcommand("experiment", "Secondary analyses");
  experiment->require_subcommand(1);

  ImproveOptions improve_opt;
  auto* improve = experiment->add_subcommand(
      "improve", "Artificial-improvement sweep toward the oracle");
  improve->add_option("--reports", improve_opt.reports,
                      "context_reports.jsonl from evaluate")
      ->required();
  improve->add_option("--ks", improve_opt.ks,
                      "Comma-separated replacement percentages")
      ->capture_default_str();
  improve->add_option("--seed", improve_opt.seed, "First permutation seed")
      ->capture_default_str();
  improve->add_option("--n-seeds", improve_opt.n_seeds,
                      "Number of consecutive seeds")
      ->capture_default_str();
  improve->add_option("--oracle-sizes", improve_opt.oracle_sizes,
                      "Echoed into the result metadata");
  improve->add_option("--out-dir", improve_opt.out_dir, "Output directory")
      ->required();
  improve->callback([&] { run_improve(improve_opt); });

  SubsampleOptions subsample_opt;
  auto* subsample = experiment->add_subcommand(
      "subsample", "TVD estimation error versus sample count");
  subsample->add_option("--dataset", subsample_opt.dataset,
                        "Canonical dataset")
      ->required();
  subsample->add_option("--generations", subsample_opt.generations,
                        "Generations JSONL")
      ->required();
  subsample->add_option("--sizes", subsample_opt.sizes,
                        "Comma-separated subsample sizes")
      ->capture_default_str();
  subsample->add_option("--seed", subsample_opt.seed, "First subsample seed")
      ->capture_default_str();
  subsample->add_option("--n-seeds", subsample_opt.n_seeds,
                        "Number of consecutive seeds")
      ->capture_default_str();
  subsample->add_option("--target", subsample_opt.target,
                        "Comparison target: human (full mle) | oracle "
                        "(first oracle half)")
      ->check(CLI::IsMember({"human", "oracle"}))
      ->capture_default_str();
  subsample->add_option("--oracle-sizes", subsample_opt.oracle_sizes,
                        "Oracle split sizes for --target oracle");
  subsample_opt.filter.add_to(subsample);
  subsample->add_option("--out-dir", subsample_opt.out_dir,
                        "Output directory")
      ->required();
  subsample->callback([&] { run_subsample(subsample_opt); });

  TokenOptions token_opt;
  auto* token = experiment->add_subcommand(
      "token", "Token-level (first BPE token) evaluation");
  token->add_option("--dataset", token_opt.dataset, "Canonical dataset")
      ->required();
  token->add_option("--generations", token_opt.generations,
                    "Generations JSONL")
      ->required();
  token->add_option("--merges", token_opt.merges, "BPE merges.txt")
      ->required();
  token->add_option("--vocab", token_opt.vocab, "Optional vocab.json");
  token_opt.filter.add_to(token);
  token_opt.oracle.add_to(token);
  token->add_option("--out-dir", token_opt.out_dir, "Output directory")
      ->required();
  token->callback([&] { run_token(token_opt); });

  RegressOptions regress_opt;
  auto* regress = app.add_subcommand(
      "regress", "ARD regression of per-context TVD on context features");
  regress->add_option("--reports", regress_opt.reports,
                      "context_reports.jsonl from evaluate")
      ->required();
  regress->add_option("--dataset", regress_opt.dataset, "Canonical dataset")
      ->required();
  regress->add_option("--tags", regress_opt.tags,
                      "External tag TSV (default: built-in baseline tagger)");
  regress->add_option("--max-iters", regress_opt.max_iters,
                      "Hyperparameter update iterations")
      ->capture_default_str();
  regress->add_option("--tol", regress_opt.tol, "Convergence tolerance")
      ->capture_default_str();
  regress->add_option("--interval", regress_opt.interval,
                      "Credible interval level")
      ->capture_default_str();
  regress->add_option("--prune-threshold", regress_opt.prune_threshold,
                      "Alpha above which a feature is pruned to zero")
      ->capture_default_str();
  regress->add_option("--out-dir", regress_opt.out_dir, "Output directory")
      ->required();
  regress->callback([&] { run_regress(regress_opt); });

  auto* abstract_cmd = app.add_subcommand(
      "abstract", "TVD under syntactic or semantic abstraction");
  abstract_cmd->require_subcommand(1);

  AbstractOptions syn_opt;
  auto* syn = abstract_cmd->add_subcommand(
      "syn", "TVD between part-of-speech tag distributions");
  syn->add_option("--dataset", syn_opt.dataset, "Canonical dataset")
      ->required();
  syn->add_option("--cpds", syn_opt.cpds, "Model cpd JSONL")->required();
  syn->add_option("--tags", syn_opt.tags,
                  "External tag TSV (default: built-in baseline tagger)");
  syn->add_option("--oracle-sizes", syn_opt.oracle_sizes,
                  "Oracle split sizes 'a,b'");
  syn->add_option("--seed", syn_opt.seed, "Oracle split seed")
      ->capture_default_str();
  syn->add_option("--out-dir", syn_opt.out_dir, "Output directory")
      ->required();
  syn->callback([&] { run_abstract_syn(syn_opt); });

  AbstractOptions sem_opt;
  auto* sem = abstract_cmd->add_subcommand(
      "sem", "TVD between embedding-cluster distributions");
  sem->add_option("--dataset", sem_opt.dataset, "Canonical dataset")
      ->required();
  sem->add_option("--cpds", sem_opt.cpds, "Model cpd JSONL")->required();
  sem->add_option("--embeddings", sem_opt.embeddings,
                  "Word embedding file (word2vec format)")
      ->required();
  sem->add_option("--embeddings-format", sem_opt.embeddings_format,
                  "text|binary")
      ->check(CLI::IsMember({"text", "binary"}))
      ->capture_default_str();
  sem->add_option("--k", sem_opt.fixed_k,
                  "Fixed cluster count (default: knee selection)");
  sem->add_option("--oracle-sizes", sem_opt.oracle_sizes,
                  "Oracle split sizes 'a,b'");
  sem->add_option("--seed", sem_opt.seed,
                  "Base seed for oracle splits and clustering")
      ->capture_default_str();
  sem->add_option("--out-dir", sem_opt.out_dir, "Output directory")
      ->required();
  sem->callback([&] { run_abstract_sem(sem_opt); });

  ReportOptions report_opt;
  auto* report = app.add_subcommand(
      "report", "Histograms, KDE curves and top-k comparisons");
  report->add_option("--reports", report_opt.reports,
                     "context_reports.jsonl from evaluate")
      ->required();
  report->add_option("--bins", report_opt.bins, "Histogram bins")
      ->capture_default_str();
  report->add_option("--dataset", report_opt.dataset,
                     "Canonical dataset (for --context-id)");
  report->add_option("--cpds", report_opt.cpds,
                     "Model cpd JSONL (for --context-id)");
  report->add_option("--context-id", report_opt.context_id,
                     "Emit a top-k comparison for this context");
  report->add_option("--topk", report_opt.topk, "Top-k size")
      ->capture_default_str();
  report->add_option("--out-dir", report_opt.out_dir, "Output directory")
      ->required();
  report->callback([&] { run_report(report_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "varcal: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "varcal: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
