#include "varcal/endpoint.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "varcal/errors.hpp"

namespace varcal {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kChatPromptIndependent =
    "You are ChatGPT, a large language model trained by OpenAI. I want you "
    "to answer which word is a plausible continuation to the context "
    "<CONTEXT>. I have no specific intent, I just want your guess. Return "
    "only the word and nothing else.";

constexpr std::string_view kChatPromptDiverse =
    "You are ChatGPT, a large language model trained by OpenAI. I want you "
    "to answer which 40 words are plausible continuations to the context "
    "<CONTEXT>. I have no specific intent, I just want your guess. Return "
    "only the words and nothing else.";

std::string substitute_context(std::string_view tmpl,
                               const std::string& context_text) {
  std::string out(tmpl);
  const std::string marker = "<CONTEXT>";
  auto pos = out.find(marker);
  out.replace(pos, marker.size(), context_text);
  return out;
}

struct SplitUrl {
  std::string host_port;  // scheme://host[:port], what httplib::Client takes
  std::string prefix;     // path prefix, no trailing slash
};

SplitUrl split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw InputError("endpoint base_url must include a scheme: " + base_url);
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  SplitUrl split;
  if (path_start == std::string::npos) {
    split.host_port = base_url;
  } else {
    split.host_port = base_url.substr(0, path_start);
    split.prefix = base_url.substr(path_start);
  }
  while (!split.prefix.empty() && split.prefix.back() == '/') {
    split.prefix.pop_back();
  }
  return split;
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

std::string chat_prompt_independent(const std::string& context_text) {
  return substitute_context(kChatPromptIndependent, context_text);
}

std::string chat_prompt_diverse(const std::string& context_text) {
  return substitute_context(kChatPromptDiverse, context_text);
}

// ---------------------------------------------------------------------------
// GenerationCache

GenerationCache::GenerationCache(std::string path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    if (!in) throw InputError("cannot open generation cache: " + path_);
    auto records = read_generations_jsonl(in);
    for (auto& record : records) {
      by_key_[key_of(record)].push_back(records_.size());
      records_.push_back(std::move(record));
    }
  }
}

GenerationCache::Key GenerationCache::key_of(const GenerationRecord& record) {
  return {record.context_id, record.model_id,
          static_cast<int>(record.prompt_mode), record.temperature};
}

std::vector<GenerationRecord> GenerationCache::for_key(
    const std::string& context_id, const std::string& model_id,
    PromptMode mode, double temperature) const {
  std::lock_guard lock(mutex_);
  std::vector<GenerationRecord> out;
  auto it =
      by_key_.find({context_id, model_id, static_cast<int>(mode), temperature});
  if (it == by_key_.end()) return out;
  out.reserve(it->second.size());
  for (auto idx : it->second) out.push_back(records_[idx]);
  return out;
}

long GenerationCache::non_rejected_count(const std::string& context_id,
                                         const std::string& model_id,
                                         PromptMode mode,
                                         double temperature) const {
  std::lock_guard lock(mutex_);
  auto it =
      by_key_.find({context_id, model_id, static_cast<int>(mode), temperature});
  if (it == by_key_.end()) return 0;
  long count = 0;
  for (auto idx : it->second) {
    if (!records_[idx].rejected) ++count;
  }
  return count;
}

long GenerationCache::attempt_count(const std::string& context_id,
                                    const std::string& model_id,
                                    PromptMode mode, double temperature) const {
  std::lock_guard lock(mutex_);
  auto it =
      by_key_.find({context_id, model_id, static_cast<int>(mode), temperature});
  return it == by_key_.end() ? 0 : static_cast<long>(it->second.size());
}

int GenerationCache::next_sample_index(const std::string& context_id,
                                       const std::string& model_id,
                                       PromptMode mode,
                                       double temperature) const {
  std::lock_guard lock(mutex_);
  auto it =
      by_key_.find({context_id, model_id, static_cast<int>(mode), temperature});
  if (it == by_key_.end()) return 0;
  int max_index = -1;
  for (auto idx : it->second) {
    max_index = std::max(max_index, records_[idx].sample_index);
  }
  return max_index + 1;
}

void GenerationCache::append(const GenerationRecord& record) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw InputError("cannot append to generation cache: " + path_);
  out << generation_to_json_line(record) << '\n';
  out.flush();
  if (!out) throw InputError("write failed on generation cache: " + path_);
  by_key_[key_of(record)].push_back(records_.size());
  records_.push_back(record);
}

// ---------------------------------------------------------------------------
// EndpointClient

struct EndpointClient::Impl {
  SplitUrl url;
  std::unique_ptr<httplib::Client> http;
  std::mutex mutex;  // httplib::Client is not thread-safe per request
};

EndpointClient::EndpointClient(EndpointConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  impl_->url = split_base_url(config_.base_url);
  impl_->http = std::make_unique<httplib::Client>(impl_->url.host_port);
  impl_->http->set_connection_timeout(config_.timeout_s, 0);
  impl_->http->set_read_timeout(config_.timeout_s, 0);
  impl_->http->set_write_timeout(config_.timeout_s, 0);
  if (config_.api_key.empty()) {
    if (const char* env = std::getenv("VARCAL_API_KEY")) {
      config_.api_key = env;
    }
  }
}

EndpointClient::~EndpointClient() = default;

std::string EndpointClient::post_json(const std::string& path,
                                      const std::string& body) {
  const std::string full_path = impl_->url.prefix + path;
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_http_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
    }
    httplib::Result res;
    {
      std::lock_guard lock(impl_->mutex);
      ++requests_;
      res = impl_->http->Post(full_path, headers, body, "application/json");
    }
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    last_error = "HTTP " + std::to_string(res->status) + ": " +
                 res->body.substr(0, 200);
    if (!retryable_status(res->status)) break;
  }
  throw CollectionError("request to " + full_path + " failed: " + last_error);
}

std::vector<std::string> EndpointClient::complete(const std::string& prompt,
                                                  int n, double temperature) {
  ordered_json body;
  body["model"] = config_.model_id;
  body["prompt"] = prompt;
  body["max_tokens"] = config_.max_tokens;
  body["temperature"] = temperature;
  body["n"] = n;
  body["logprobs"] = nullptr;
  const std::string raw = post_json("/completions", body.dump());
  ordered_json response;
  try {
    response = ordered_json::parse(raw);
  } catch (const std::exception& e) {
    throw CollectionError(std::string("malformed completion response: ") +
                          e.what());
  }
  if (!response.contains("choices") || !response["choices"].is_array()) {
    throw CollectionError("completion response missing choices array");
  }
  std::vector<std::string> texts;
  for (const auto& choice : response["choices"]) {
    texts.push_back(choice.at("text").get<std::string>());
  }
  return texts;
}

std::string EndpointClient::chat(const std::string& prompt,
                                 double temperature) {
  ordered_json body;
  body["model"] = config_.model_id;
  body["messages"] =
      ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = temperature;
  const std::string raw = post_json("/chat/completions", body.dump());
  ordered_json response;
  try {
    response = ordered_json::parse(raw);
  } catch (const std::exception& e) {
    throw CollectionError(std::string("malformed chat response: ") + e.what());
  }
  try {
    return response.at("choices").at(0).at("message").at("content")
        .get<std::string>();
  } catch (const std::exception& e) {
    throw CollectionError(std::string("chat response missing content: ") +
                          e.what());
  }
}

EchoLogprobs EndpointClient::score_echo(const std::string& prompt) {
  ordered_json body;
  body["model"] = config_.model_id;
  body["prompt"] = prompt;
  body["max_tokens"] = 0;
  body["temperature"] = 0.0;
  body["n"] = 1;
  body["logprobs"] = 0;
  body["echo"] = true;
  const std::string raw = post_json("/completions", body.dump());
  ordered_json response;
  try {
    response = ordered_json::parse(raw);
  } catch (const std::exception& e) {
    throw ScoringError(std::string("malformed scoring response: ") + e.what());
  }
  EchoLogprobs echo;
  try {
    const auto& lp = response.at("choices").at(0).at("logprobs");
    for (const auto& t : lp.at("tokens")) {
      echo.tokens.push_back(t.get<std::string>());
    }
    for (const auto& v : lp.at("token_logprobs")) {
      if (v.is_null()) {
        echo.token_logprobs.push_back(std::nullopt);
      } else {
        echo.token_logprobs.push_back(v.get<double>());
      }
    }
    for (const auto& o : lp.at("text_offset")) {
      echo.text_offsets.push_back(o.get<long>());
    }
  } catch (const std::exception& e) {
    throw ScoringError(std::string("scoring response missing logprobs: ") +
                       e.what());
  }
  if (echo.tokens.size() != echo.token_logprobs.size() ||
      echo.tokens.size() != echo.text_offsets.size()) {
    throw ScoringError("scoring response logprob arrays disagree in length");
  }
  return echo;
}

// ---------------------------------------------------------------------------
// EndpointScorer

EndpointScorer::EndpointScorer(EndpointClient& client) : client_(client) {}

std::optional<double> EndpointScorer::log_joint(const Context& context,
                                                const std::string& word) {
  {
    std::lock_guard lock(mutex_);
    auto it = scored_.find({context.context_id, word});
    if (it != scored_.end()) return it->second;
  }
  const std::string prompt = context.context_text + " " + word;
  const long boundary = static_cast<long>(context.context_text.size());
  const EchoLogprobs echo = client_.score_echo(prompt);
  double total = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < echo.tokens.size(); ++i) {
    if (echo.text_offsets[i] < boundary) continue;
    if (!echo.token_logprobs[i].has_value()) {
      throw ScoringError("no logprob for continuation token \"" +
                         echo.tokens[i] + "\" scoring \"" + word +
                         "\" in context " + context.context_id);
    }
    total += *echo.token_logprobs[i];
    any = true;
  }
  if (!any) {
    throw ScoringError("no continuation tokens found scoring \"" + word +
                       "\" in context " + context.context_id);
  }
  std::lock_guard lock(mutex_);
  scored_[{context.context_id, word}] = total;
  return total;
}

// ---------------------------------------------------------------------------
// Diverse-list parsing

std::vector<std::string> parse_word_list(const std::string& content) {
  std::vector<std::string> pieces;
  std::string current;
  auto flush = [&]() {
    // Trim whitespace.
    std::size_t b = 0, e = current.size();
    while (b < e && std::isspace(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(current[e - 1])))
      --e;
    std::string item = current.substr(b, e - b);
    current.clear();
    if (item.empty()) return;
    // Strip a leading enumeration marker: digits followed by '.', ')' or
    // ':', or a bullet character.
    std::size_t p = 0;
    while (p < item.size() &&
           std::isdigit(static_cast<unsigned char>(item[p]))) {
      ++p;
    }
    if (p > 0 && p < item.size() &&
        (item[p] == '.' || item[p] == ')' || item[p] == ':')) {
      item.erase(0, p + 1);
    } else if (item.size() > 1 && (item[0] == '-' || item[0] == '*') &&
               std::isspace(static_cast<unsigned char>(item[1]))) {
      item.erase(0, 2);
    }
    while (!item.empty() &&
           std::isspace(static_cast<unsigned char>(item.front()))) {
      item.erase(item.begin());
    }
    if (!item.empty()) pieces.push_back(std::move(item));
  };
  for (char c : content) {
    if (c == '\n' || c == ',' || c == ';') {
      flush();
    } else {
      current += c;
    }
  }
  flush();
  return pieces;
}

// ---------------------------------------------------------------------------
// collect_generations

namespace {

GenerationRecord make_record(const Context& ctx, const EndpointConfig& cfg,
                             const CollectOptions& opts, int sample_index,
                             std::string raw_text,
                             std::optional<std::string> sliced) {
  GenerationRecord rec;
  rec.context_id = ctx.context_id;
  rec.model_id = cfg.model_id;
  rec.sample_index = sample_index;
  rec.raw_text = std::move(raw_text);
  rec.rejected = !sliced.has_value();
  rec.sliced_word = std::move(sliced);
  rec.temperature = opts.temperature;
  rec.prompt_mode = opts.prompt_mode;
  rec.seed = opts.seed;
  return rec;
}

struct ContextOutcome {
  bool incomplete = false;
  std::vector<std::string> warnings;
};

ContextOutcome collect_for_context(const Context& ctx, EndpointClient& client,
                                   const CollectOptions& opts,
                                   GenerationCache& cache) {
  const auto& cfg = client.config();
  const long budget =
      std::max<long>(opts.retry_factor * opts.n_per_context, opts.n_per_context);
  ContextOutcome outcome;

  auto have = [&]() {
    return cache.non_rejected_count(ctx.context_id, cfg.model_id,
                                    opts.prompt_mode, opts.temperature);
  };
  auto attempts = [&]() {
    return cache.attempt_count(ctx.context_id, cfg.model_id, opts.prompt_mode,
                               opts.temperature);
  };
  auto next_index = [&]() {
    return cache.next_sample_index(ctx.context_id, cfg.model_id,
                                   opts.prompt_mode, opts.temperature);
  };

  if (opts.prompt_mode == PromptMode::kChatDiverse) {
    // One request yields the whole list; fewer than n items is accepted
    // with a warning rather than retried.
    if (have() > 0 || attempts() > 0) return outcome;
    const std::string reply =
        client.chat(chat_prompt_diverse(ctx.context_text), opts.temperature);
    auto pieces = parse_word_list(reply);
    if (pieces.size() > static_cast<std::size_t>(opts.n_per_context)) {
      pieces.resize(opts.n_per_context);
    }
    int index = next_index();
    for (auto& piece : pieces) {
      auto sliced = first_word(piece, /*treat_end_as_boundary=*/true);
      cache.append(make_record(ctx, cfg, opts, index++, piece, sliced));
    }
    if (pieces.size() < static_cast<std::size_t>(opts.n_per_context)) {
      outcome.warnings.push_back(
          ctx.context_id + ": diverse list returned " +
          std::to_string(pieces.size()) + " of " +
          std::to_string(opts.n_per_context) + " requested words");
    }
    return outcome;
  }

  while (have() < opts.n_per_context) {
    if (attempts() >= budget) {
      outcome.incomplete = true;
      return outcome;
    }
    const long missing = opts.n_per_context - have();
    if (opts.prompt_mode == PromptMode::kCompletion) {
      const int n = static_cast<int>(std::min<long>(
          missing, std::max(1, cfg.batch_size)));
      auto texts = client.complete(ctx.context_text, n, opts.temperature);
      if (texts.empty()) {
        throw CollectionError("endpoint returned no completions for context " +
                              ctx.context_id);
      }
      int index = next_index();
      for (auto& text : texts) {
        auto sliced = slice_first_word(text);
        cache.append(make_record(ctx, cfg, opts, index++, text, sliced));
      }
    } else {  // kChatIndependent: one sample per request
      const std::string reply = client.chat(
          chat_prompt_independent(ctx.context_text), opts.temperature);
      // A chat reply is a finished string, so its end is a word boundary.
      auto sliced = first_word(reply, /*treat_end_as_boundary=*/true);
      cache.append(make_record(ctx, cfg, opts, next_index(), reply, sliced));
    }
  }
  return outcome;
}

}  // namespace

CollectResult collect_generations(const std::vector<Context>& contexts,
                                  const EndpointConfig& endpoint,
                                  const CollectOptions& options,
                                  GenerationCache& cache) {
  if (options.n_per_context <= 0) {
    throw InputError("n_per_context must be positive");
  }
  if (options.temperature <= 0.0) {
    throw InputError("temperature must be positive");
  }
  EndpointClient client(endpoint);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex outcome_mutex;
  std::string first_error;
  std::vector<std::string> incomplete;
  std::vector<std::string> warnings;

  auto worker = [&]() {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= contexts.size()) return;
      try {
        auto outcome = collect_for_context(contexts[i], client, options, cache);
        std::lock_guard lock(outcome_mutex);
        if (outcome.incomplete) incomplete.push_back(contexts[i].context_id);
        for (auto& w : outcome.warnings) warnings.push_back(std::move(w));
      } catch (const std::exception& e) {
        std::lock_guard lock(outcome_mutex);
        if (first_error.empty()) first_error = e.what();
        failed.store(true);
        return;
      }
    }
  };

  const std::size_t wanted =
      static_cast<std::size_t>(std::max(1, endpoint.concurrency));
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min(wanted, contexts.size()));
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  if (failed.load()) {
    throw CollectionError("generation collection aborted: " + first_error);
  }

  CollectResult result;
  result.http_requests = client.requests_made();
  std::sort(incomplete.begin(), incomplete.end());
  result.incomplete_context_ids = std::move(incomplete);
  std::sort(warnings.begin(), warnings.end());
  result.warnings = std::move(warnings);
  for (const auto& ctx : contexts) {
    auto records = cache.for_key(ctx.context_id, endpoint.model_id,
                                 options.prompt_mode, options.temperature);
    std::sort(records.begin(), records.end(),
              [](const GenerationRecord& a, const GenerationRecord& b) {
                return a.sample_index < b.sample_index;
              });
    for (auto& rec : records) {
      result.stats.attempts += 1;
      if (rec.rejected) result.stats.rejections += 1;
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace varcal
