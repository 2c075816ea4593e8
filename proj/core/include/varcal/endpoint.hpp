#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "varcal/corpus.hpp"
#include "varcal/sampler.hpp"

namespace varcal {

/// Connection settings for an OpenAI-compatible generation endpoint.
/// api_key falls back to the VARCAL_API_KEY environment variable when empty.
struct EndpointConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080/v1"
  std::string model_id;
  std::string api_key;
  int max_tokens = 10;        // per-generation length cap
  int batch_size = 20;        // completions requested per call (n)
  int max_http_retries = 3;   // transport/5xx retries per request
  int backoff_ms = 100;       // exponential backoff base
  int timeout_s = 120;
  int concurrency = 4;        // contexts processed in parallel
};

struct CollectOptions {
  int n_per_context = 40;
  double temperature = 1.0;
  PromptMode prompt_mode = PromptMode::kCompletion;
  std::optional<long> seed;  // recorded on new generations
  // A context is abandoned (reported incomplete, never fatal) once total
  // attempts reach retry_factor * n_per_context without n non-rejected words.
  long retry_factor = 5;
};

struct CollectResult {
  std::vector<GenerationRecord> records;  // cached + fresh, dataset order
  RejectionStats stats;                   // over `records`
  std::vector<std::string> incomplete_context_ids;
  std::vector<std::string> warnings;
  long http_requests = 0;  // network calls made by this run (0 = all cached)
};

/// Append-only JSONL store of generation records. Completed work is never
/// re-requested: a collection run counts the cached non-rejected records per
/// (context, model, prompt_mode, temperature) before going to the network.
class GenerationCache {
 public:
  /// Opens (or creates) the backing file and loads existing records.
  explicit GenerationCache(std::string path);

  const std::vector<GenerationRecord>& records() const { return records_; }

  /// Records matching the key, in stored order.
  std::vector<GenerationRecord> for_key(const std::string& context_id,
                                        const std::string& model_id,
                                        PromptMode mode,
                                        double temperature) const;

  long non_rejected_count(const std::string& context_id,
                          const std::string& model_id, PromptMode mode,
                          double temperature) const;
  long attempt_count(const std::string& context_id,
                     const std::string& model_id, PromptMode mode,
                     double temperature) const;
  int next_sample_index(const std::string& context_id,
                        const std::string& model_id, PromptMode mode,
                        double temperature) const;

  /// Appends to memory and to the backing file (flushed per record).
  void append(const GenerationRecord& record);

  const std::string& path() const { return path_; }

 private:
  using Key = std::tuple<std::string, std::string, int, double>;
  static Key key_of(const GenerationRecord& record);

  std::string path_;
  std::vector<GenerationRecord> records_;
  std::map<Key, std::vector<std::size_t>> by_key_;
  mutable std::mutex mutex_;
};

/// Raw token-level logprobs echoed back for a scoring request.
struct EchoLogprobs {
  std::vector<std::string> tokens;
  std::vector<std::optional<double>> token_logprobs;
  std::vector<long> text_offsets;
};

/// Thin HTTP client for the two wire forms. Retries transport errors and
/// 429/5xx with exponential backoff; other HTTP errors fail immediately.
class EndpointClient {
 public:
  explicit EndpointClient(EndpointConfig config);
  ~EndpointClient();

  EndpointClient(const EndpointClient&) = delete;
  EndpointClient& operator=(const EndpointClient&) = delete;

  /// POST {base}/completions; returns choices[].text in order.
  std::vector<std::string> complete(const std::string& prompt, int n,
                                    double temperature);

  /// POST {base}/chat/completions with a single user message; returns the
  /// assistant message content.
  std::string chat(const std::string& prompt, double temperature);

  /// POST {base}/completions with echo + logprobs at temperature 0,
  /// max_tokens 0; returns the echoed token logprobs.
  EchoLogprobs score_echo(const std::string& prompt);

  long requests_made() const { return requests_.load(); }
  const EndpointConfig& config() const { return config_; }

 private:
  struct Impl;
  std::string post_json(const std::string& path, const std::string& body);

  EndpointConfig config_;
  std::unique_ptr<Impl> impl_;
  std::atomic<long> requests_{0};
};

/// Scores words against the endpoint by echoing "context + ' ' + word" and
/// summing the logprobs of tokens whose text_offset lies in the appended
/// " word" suffix. Results are memoized per (context_id, word).
class EndpointScorer : public LogprobScorer {
 public:
  explicit EndpointScorer(EndpointClient& client);
  std::optional<double> log_joint(const Context& context,
                                  const std::string& word) override;

  /// Everything scored so far, for replay-file persistence.
  const std::map<std::pair<std::string, std::string>, double>& scored() const {
    return scored_;
  }

 private:
  EndpointClient& client_;
  std::map<std::pair<std::string, std::string>, double> scored_;
  std::mutex mutex_;
};

/// Chat prompt construction (fixed templates, <CONTEXT> substituted).
std::string chat_prompt_independent(const std::string& context_text);
std::string chat_prompt_diverse(const std::string& context_text);

/// Splits a chat_diverse reply into candidate items (newline / comma /
/// semicolon separated, enumeration markers stripped).
std::vector<std::string> parse_word_list(const std::string& content);

/// Samples n_per_context words for every context, reusing the cache and
/// appending fresh generations to it. Transport failure after retries
/// aborts with CollectionError; exhausted attempt budgets only mark the
/// context incomplete.
CollectResult collect_generations(const std::vector<Context>& contexts,
                                  const EndpointConfig& endpoint,
                                  const CollectOptions& options,
                                  GenerationCache& cache);

}  // namespace varcal
