#pragma once

#include "forge/annotate.hpp"
#include "forge/cues.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

inline constexpr double kDefaultTokensPerWord = 1.3;
inline constexpr std::uint64_t kDefaultTokenBudget = 8'300'000;

std::size_t count_whitespace_words(std::string_view text);
std::uint64_t estimate_tokens(std::string_view text, double tokens_per_word = kDefaultTokensPerWord);

struct Document {
  std::string id;
  std::string text;
  std::string source;
  std::uint64_t token_estimate = 0;

  friend bool operator==(const Document&, const Document&) = default;
};

// Parses one JSONL record ({id, text, source}); token_estimate is recomputed.
// Returns nullopt for malformed records.
std::optional<Document> parse_document(std::string_view line, double tokens_per_word = kDefaultTokensPerWord);
std::string document_json(const Document& doc);

struct BehaviorLabels {
  std::array<bool, 4> present{};

  static BehaviorLabels from(const BehaviorCounts& counts);
  bool operator[](Behavior b) const { return present[static_cast<std::size_t>(b)]; }
  bool any() const;
  friend bool operator==(const BehaviorLabels&, const BehaviorLabels&) = default;
};

// ------------------------------------------------------------------ QTA

struct QTADocument {
  std::string question;
  std::string thinking;
  std::string answer;

  friend bool operator==(const QTADocument&, const QTADocument&) = default;
};

class QtaValidationError : public std::runtime_error {
 public:
  QtaValidationError(const std::string& what, std::string raw) : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

std::string serialize_qta(const QTADocument& doc);
// Strict: the three tags in order, surrounding whitespace only. Throws QtaValidationError.
QTADocument parse_qta(std::string_view text);

// ------------------------------------------------------------------ analyze

struct AnalyzeOptions {
  std::size_t sample = 200'000;
  std::uint64_t seed = 0;
  double tokens_per_word = kDefaultTokensPerWord;
  std::optional<std::filesystem::path> checkpoint;
  std::size_t checkpoint_every = 10'000;  // input lines between checkpoint writes
  // Test hook: stop after this many input lines, leaving the checkpoint behind.
  std::optional<std::size_t> stop_after_lines;
};

struct SampledDoc {
  std::string id;
  BehaviorCounts counts;
  friend bool operator==(const SampledDoc&, const SampledDoc&) = default;
};

struct AnalyzeReport {
  std::uint64_t lines = 0;
  std::uint64_t documents = 0;  // valid records seen
  std::uint64_t malformed = 0;
  bool complete = true;         // false when stopped early
  std::vector<SampledDoc> sample;

  double mean(Behavior b) const;
  double proportion(Behavior b) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reservoir sample (Algorithm R) of the valid records; only sampled documents
// are sent to the detector.
AnalyzeReport analyze(std::istream& corpus, const Detector& detector, const AnalyzeOptions& options);

// ------------------------------------------------------------------ partition

struct PartitionOptions {
  std::uint64_t token_budget = kDefaultTokenBudget;
  double tokens_per_word = kDefaultTokensPerWord;
  unsigned threads = 0;
  std::size_t max_in_flight = 64;
};

struct SetSummary {
  std::uint64_t documents = 0;
  std::uint64_t tokens = 0;
  bool shortfall = false;
};

struct PartitionReport {
  SetSummary enriched;
  SetSummary minimized;
  std::uint64_t lines = 0;
  std::uint64_t malformed = 0;
  std::uint64_t undetected = 0;  // classifier could not label the document
  std::size_t peak_in_flight = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Writes labelled documents as JSONL to the two sinks. Stops reading once both
// sets have reached the budget. Throws std::invalid_argument for a zero budget.
PartitionReport partition(std::istream& corpus, const Detector& detector, const PartitionOptions& options,
                          std::ostream& enriched, std::ostream& minimized);

// ------------------------------------------------------------------ reformat

enum class ReformatMode : std::uint8_t { Enriched, Minimized };
enum class RewriterKind : std::uint8_t { Templated, External };

std::string_view mode_name(ReformatMode mode);
std::optional<ReformatMode> mode_from_name(std::string_view name);

// "we" -> "I", "let's" -> "let me", "our" -> "my", "us" -> "me".
std::string to_first_person(std::string_view text);

struct ReformatResult {
  std::optional<QTADocument> qta;
  std::string drop_reason;  // set when qta is empty
  std::string raw;          // external reply, kept on validation failure
};

class Rewriter {
 public:
  static Rewriter templated();
  static Rewriter external(ClassifierConfig config, std::shared_ptr<ChatTransport> transport = nullptr);

  RewriterKind kind() const { return kind_; }
  // Throws std::invalid_argument for an empty document.
  ReformatResult rewrite(const Document& doc, ReformatMode mode) const;

 private:
  RewriterKind kind_ = RewriterKind::Templated;
  ClassifierConfig config_;
  std::shared_ptr<ChatTransport> transport_;
};

QTADocument templated_qta(std::string_view text);
nlohmann::json rewrite_request(const Document& doc, ReformatMode mode, const ClassifierConfig& config);

struct ReformatOptions {
  ReformatMode mode = ReformatMode::Enriched;
  double tokens_per_word = kDefaultTokensPerWord;
  unsigned threads = 0;
  std::size_t max_in_flight = 64;
};

struct DroppedDoc {
  std::string id;
  std::string reason;
  std::string raw;
};

struct ReformatReport {
  std::uint64_t lines = 0;
  std::uint64_t malformed = 0;
  std::uint64_t kept = 0;
  std::uint64_t token_sum = 0;  // over the serialized QTA output
  std::vector<DroppedDoc> dropped;

  nlohmann::json to_json() const;
};

// Output records: {"id", "qta"} JSONL in input order.
ReformatReport reformat_stream(std::istream& corpus, const Rewriter& rewriter, const ReformatOptions& options,
                               std::ostream& out);

}  // namespace forge
