#pragma once

#include "forge/cues.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace forge {

// ------------------------------------------------------------------ classifier

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};

  std::chrono::milliseconds delay_before(int attempt) const;  // attempt >= 1
};

struct ClassifierConfig {
  // Sampling settings are fixed by the annotation protocol.
  static constexpr double kTemperature = 0.0;
  static constexpr int kMaxTokens = 512;

  std::string endpoint = "http://127.0.0.1:8000";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "FORGE_CLASSIFIER_API_KEY";
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{30'000};
  RetryPolicy retry;
};

class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, bool retryable) : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// Sends one chat-completion request body; returns the assistant text.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const nlohmann::json& body) = 0;
};

// OpenAI-style chat completions over HTTP(S). Bearer token read from the
// environment variable named in the config, when set.
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(ClassifierConfig config);
  std::string complete(const nlohmann::json& body) override;

 private:
  ClassifierConfig config_;
};

struct AuditEntry {
  std::size_t item = 0;
  Behavior behavior = Behavior::Backtracking;
  nlohmann::json request;
  std::string reply;
  int attempts = 0;
  std::string error;
};

class AuditLog {
 public:
  void add(AuditEntry e);
  std::vector<AuditEntry> entries() const;
  void write_jsonl(std::ostream& out) const;

 private:
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

enum class CountStatus : std::uint8_t { Counted, Unavailable, Unparseable };

struct BehaviorResult {
  CountStatus status = CountStatus::Unavailable;
  std::uint64_t count = 0;
  std::string detail;  // raw reply (Unparseable) or transport error (Unavailable)
};

struct LlmCounts {
  std::array<BehaviorResult, 4> results;

  const BehaviorResult& operator[](Behavior b) const { return results[static_cast<std::size_t>(b)]; }
  BehaviorResult& operator[](Behavior b) { return results[static_cast<std::size_t>(b)]; }
  bool complete() const;
  // Throws ClassifierError unless every behavior was counted.
  BehaviorCounts require() const;
};

class ClassifierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sends `body`, retrying retryable transport errors under `retry`. Rethrows the
// last TransportError. `attempts` receives the number of sends made.
std::string complete_with_retry(ChatTransport& transport, const nlohmann::json& body, const RetryPolicy& retry,
                                int* attempts = nullptr);

// The request body for one behavior question about `text`.
nlohmann::json classifier_request(std::string_view text, Behavior behavior, const ClassifierConfig& config);

// Reads the integer answer: "<count>N</count>" or a bare integer.
std::optional<std::uint64_t> parse_count_reply(std::string_view reply);

// Four questions per text, at most max_in_flight in the air across the batch.
std::vector<LlmCounts> count_llm_batch(std::span<const std::string> texts, const ClassifierConfig& config,
                                       ChatTransport& transport, AuditLog* audit = nullptr);

LlmCounts count_llm(std::string_view text, const ClassifierConfig& config, ChatTransport& transport,
                    AuditLog* audit = nullptr);
LlmCounts count_llm(std::string_view text, const ClassifierConfig& config, AuditLog* audit = nullptr);

// ------------------------------------------------------------------ detector

enum class DetectorKind : std::uint8_t { Rules, Llm };

std::optional<DetectorKind> detector_from_name(std::string_view name);

// A counting backend shared by the report and corpus pipelines.
class Detector {
 public:
  static Detector rules();
  static Detector llm(ClassifierConfig config, std::shared_ptr<ChatTransport> transport = nullptr,
                      std::shared_ptr<AuditLog> audit = nullptr);

  DetectorKind kind() const { return kind_; }
  // Throws ClassifierError when the classifier cannot produce all four counts.
  BehaviorCounts count(std::string_view text) const;
  // Batched form; the classifier keeps max_in_flight requests in the air
  // across all texts.
  std::vector<BehaviorCounts> count_many(std::span<const std::string> texts) const;

 private:
  DetectorKind kind_ = DetectorKind::Rules;
  ClassifierConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  std::shared_ptr<AuditLog> audit_;
};

// ------------------------------------------------------------------ report

struct BehaviorReport {
  std::size_t n_traces = 0;
  std::array<std::uint64_t, 4> sums{};
  std::array<std::uint64_t, 4> present{};  // traces with count >= 1
  std::vector<BehaviorCounts> per_trace;

  double mean(Behavior b) const;
  double proportion(Behavior b) const;
  std::uint64_t sum(Behavior b) const { return sums[static_cast<std::size_t>(b)]; }

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Throws std::invalid_argument on an empty list.
BehaviorReport report(std::span<const BehaviorCounts> counts);
BehaviorReport report(std::span<const std::string> traces, const Detector& detector);

}  // namespace forge
