#include "forge/annotate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace forge {

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  if (attempt <= 1) return std::chrono::milliseconds{0};
  double ms = static_cast<double>(initial_backoff.count());
  for (int i = 2; i < attempt; ++i) ms *= multiplier;
  ms = std::min(ms, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds{static_cast<std::int64_t>(ms)};
}

// ------------------------------------------------------------------ transport

HttpChatTransport::HttpChatTransport(ClassifierConfig config) : config_(std::move(config)) {}

std::string HttpChatTransport::complete(const nlohmann::json& body) {
  httplib::Client client(config_.endpoint);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("request failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status != 200) {
    bool retryable = res->status == 429 || res->status >= 500;
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status), retryable);
  }
  nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw TransportError("endpoint returned invalid JSON", false);
  try {
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TransportError("endpoint reply lacks choices[0].message.content", false);
  }
}

// ------------------------------------------------------------------ audit

void AuditLog::add(AuditEntry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard lock(mu_);
  std::vector<AuditEntry> out = entries_;
  std::sort(out.begin(), out.end(), [](const AuditEntry& a, const AuditEntry& b) {
    return a.item != b.item ? a.item < b.item : a.behavior < b.behavior;
  });
  return out;
}

void AuditLog::write_jsonl(std::ostream& out) const {
  for (const AuditEntry& e : entries()) {
    nlohmann::json j{{"item", e.item},       {"behavior", behavior_name(e.behavior)},
                     {"request", e.request}, {"reply", e.reply},
                     {"attempts", e.attempts}, {"error", e.error}};
    out << j.dump() << '\n';
  }
}

// ------------------------------------------------------------------ protocol

namespace {

struct Question {
  const char* definition;
  const char* examples;
};

Question question_for(Behavior b) {
  switch (b) {
    case Behavior::Backtracking:
      return {"Backtracking: the reasoning notices that an approach fails and explicitly abandons it for "
              "another one.",
              "- \"This approach won't work because 8 * 35 is far above the target. Let me try a different "
              "pair.\" (1 occurrence)\n"
              "- \"That doesn't work, going back to the numbers 25 and 30.\" (1 occurrence)"};
    case Behavior::Verification:
      return {"Verification: the reasoning checks an intermediate or final result against the goal.",
              "- \"This sequence results in 1, which is not equal to 22.\" (1 occurrence)\n"
              "- \"Let's verify: 30 - 25 = 5, 5 + 3 = 8, 8 * 4 = 32.\" (1 occurrence)"};
    case Behavior::SubgoalSetting:
      return {"Subgoal setting: the reasoning breaks the problem into intermediate goals.",
              "- \"To solve this, we first need to make 8 from 30, 25 and 3.\" (1 occurrence)\n"
              "- \"To solve this system of equations, let's first isolate x in the first equation, then "
              "substitute it into the second.\" (1 occurrence)"};
    case Behavior::BackwardChaining:
      return {"Backward chaining: the reasoning starts from the goal and works toward the given inputs.",
              "- \"To reach the target of 75, we need a number divisible by 5, so the rest must give 15.\" "
              "(1 occurrence)\n"
              "- \"Working backwards from 32: 8 * 4 = 32, so 30, 25 and 3 must give 8.\" (1 occurrence)"};
  }
  return {"", ""};
}

}  // namespace

nlohmann::json classifier_request(std::string_view text, Behavior behavior, const ClassifierConfig& config) {
  Question q = question_for(behavior);
  std::string user;
  user += "Behavior: ";
  user += behavior_name(behavior);
  user += "\n\n";
  user += q.definition;
  user += "\n\nExamples:\n";
  user += q.examples;
  user +=
      "\n\nCount the distinct occurrences of this behavior in the reasoning below. Reply with the number "
      "only, as <count>N</count>.\n\n<trace>\n";
  user += text;
  user += "\n</trace>";
  return nlohmann::json{
      {"model", config.model},
      {"temperature", ClassifierConfig::kTemperature},
      {"max_tokens", ClassifierConfig::kMaxTokens},
      {"messages",
       nlohmann::json::array(
           {{{"role", "system"},
             {"content", "You annotate reasoning traces. You count how often a given behavior occurs."}},
            {{"role", "user"}, {"content", user}}})},
  };
}

std::optional<std::uint64_t> parse_count_reply(std::string_view reply) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::string_view body = trim(reply);
  if (std::size_t open = body.find("<count>"); open != std::string_view::npos) {
    std::size_t close = body.find("</count>", open);
    if (close == std::string_view::npos) return std::nullopt;
    body = trim(body.substr(open + 7, close - open - 7));
  }
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc{} || ptr != body.data() + body.size()) return std::nullopt;
  return value;
}

bool LlmCounts::complete() const {
  return std::all_of(results.begin(), results.end(),
                     [](const BehaviorResult& r) { return r.status == CountStatus::Counted; });
}

BehaviorCounts LlmCounts::require() const {
  BehaviorCounts out;
  for (Behavior b : kBehaviors) {
    const BehaviorResult& r = (*this)[b];
    switch (r.status) {
      case CountStatus::Counted: out[b] = r.count; break;
      case CountStatus::Unavailable:
        throw ClassifierError("classifier unavailable for " + std::string(behavior_name(b)) + ": " + r.detail);
      case CountStatus::Unparseable:
        throw ClassifierError("unparseable classifier reply for " + std::string(behavior_name(b)) + ": " +
                              r.detail);
    }
  }
  return out;
}

std::vector<LlmCounts> count_llm_batch(std::span<const std::string> texts, const ClassifierConfig& config,
                                       ChatTransport& transport, AuditLog* audit) {
  std::vector<LlmCounts> out(texts.size());
  const std::size_t jobs = texts.size() * kBehaviors.size();
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      std::size_t job = next.fetch_add(1);
      if (job >= jobs) return;
      std::size_t item = job / kBehaviors.size();
      Behavior behavior = kBehaviors[job % kBehaviors.size()];
      nlohmann::json body = classifier_request(texts[item], behavior, config);

      AuditEntry entry{item, behavior, body, {}, 0, {}};
      BehaviorResult result;
      for (int attempt = 1; attempt <= std::max(1, config.retry.max_attempts); ++attempt) {
        std::this_thread::sleep_for(config.retry.delay_before(attempt));
        entry.attempts = attempt;
        try {
          entry.reply = transport.complete(body);
          entry.error.clear();
          if (auto n = parse_count_reply(entry.reply)) {
            result = BehaviorResult{CountStatus::Counted, *n, {}};
          } else {
            result = BehaviorResult{CountStatus::Unparseable, 0, entry.reply};
          }
          break;
        } catch (const TransportError& e) {
          entry.error = e.what();
          result = BehaviorResult{CountStatus::Unavailable, 0, e.what()};
          if (!e.retryable()) break;
        }
      }
      out[item][behavior] = result;
      if (audit) audit->add(std::move(entry));
    }
  };

  std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(config.max_in_flight, 1), jobs);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

LlmCounts count_llm(std::string_view text, const ClassifierConfig& config, ChatTransport& transport,
                    AuditLog* audit) {
  std::string owned(text);
  return count_llm_batch(std::span<const std::string>(&owned, 1), config, transport, audit).front();
}

LlmCounts count_llm(std::string_view text, const ClassifierConfig& config, AuditLog* audit) {
  HttpChatTransport transport(config);
  return count_llm(text, config, transport, audit);
}

std::string complete_with_retry(ChatTransport& transport, const nlohmann::json& body, const RetryPolicy& retry,
                                int* attempts) {
  const int limit = std::max(1, retry.max_attempts);
  for (int attempt = 1;; ++attempt) {
    std::this_thread::sleep_for(retry.delay_before(attempt));
    if (attempts) *attempts = attempt;
    try {
      return transport.complete(body);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= limit) throw;
    }
  }
}

// ------------------------------------------------------------------ detector

std::optional<DetectorKind> detector_from_name(std::string_view name) {
  if (name == "rules") return DetectorKind::Rules;
  if (name == "llm") return DetectorKind::Llm;
  return std::nullopt;
}

Detector Detector::rules() { return Detector{}; }

Detector Detector::llm(ClassifierConfig config, std::shared_ptr<ChatTransport> transport,
                       std::shared_ptr<AuditLog> audit) {
  Detector d;
  d.kind_ = DetectorKind::Llm;
  if (!transport) transport = std::make_shared<HttpChatTransport>(config);
  d.config_ = std::move(config);
  d.transport_ = std::move(transport);
  d.audit_ = std::move(audit);
  return d;
}

BehaviorCounts Detector::count(std::string_view text) const {
  if (kind_ == DetectorKind::Rules) return count_rules(text);
  return count_llm(text, config_, *transport_, audit_.get()).require();
}

std::vector<BehaviorCounts> Detector::count_many(std::span<const std::string> texts) const {
  std::vector<BehaviorCounts> out;
  out.reserve(texts.size());
  if (kind_ == DetectorKind::Rules) {
    for (const std::string& t : texts) out.push_back(count_rules(t));
    return out;
  }
  for (const LlmCounts& c : count_llm_batch(texts, config_, *transport_, audit_.get())) out.push_back(c.require());
  return out;
}

// ------------------------------------------------------------------ report

double BehaviorReport::mean(Behavior b) const {
  return n_traces == 0 ? 0.0 : static_cast<double>(sum(b)) / static_cast<double>(n_traces);
}

double BehaviorReport::proportion(Behavior b) const {
  return n_traces == 0 ? 0.0
                       : static_cast<double>(present[static_cast<std::size_t>(b)]) / static_cast<double>(n_traces);
}

std::string BehaviorReport::to_csv() const {
  std::ostringstream out;
  out << "behavior,n_traces,sum,mean,traces_with_behavior,proportion\n";
  out.precision(17);
  for (Behavior b : kBehaviors) {
    out << behavior_name(b) << ',' << n_traces << ',' << sum(b) << ',' << mean(b) << ','
        << present[static_cast<std::size_t>(b)] << ',' << proportion(b) << '\n';
  }
  return out.str();
}

nlohmann::json BehaviorReport::to_json() const {
  nlohmann::json behaviors = nlohmann::json::object();
  for (Behavior b : kBehaviors) {
    behaviors[std::string(behavior_name(b))] = {
        {"sum", sum(b)},
        {"mean", mean(b)},
        {"traces_with_behavior", present[static_cast<std::size_t>(b)]},
        {"proportion", proportion(b)},
    };
  }
  return {{"n_traces", n_traces}, {"behaviors", behaviors}};
}

BehaviorReport report(std::span<const BehaviorCounts> counts) {
  if (counts.empty()) throw std::invalid_argument("report needs at least one trace");
  BehaviorReport r;
  r.n_traces = counts.size();
  r.per_trace.assign(counts.begin(), counts.end());
  for (const BehaviorCounts& c : counts) {
    for (std::size_t i = 0; i < 4; ++i) {
      r.sums[i] += c.counts[i];
      if (c.counts[i] > 0) ++r.present[i];
    }
  }
  return r;
}

BehaviorReport report(std::span<const std::string> traces, const Detector& detector) {
  if (traces.empty()) throw std::invalid_argument("report needs at least one trace");
  return report(detector.count_many(traces));
}

}  // namespace forge
