#include "doctest.h"

#include "forge/annotate.hpp"
#include "forge/tracegen.hpp"
#include "support/mock_classifier.hpp"

#include <chrono>
#include <cstdlib>
#include <set>

using namespace forge;
using forge::testing::MockClassifier;

namespace {

ClassifierConfig config_for(const MockClassifier& mock) {
  ClassifierConfig cfg;
  cfg.endpoint = mock.endpoint();
  cfg.timeout = std::chrono::milliseconds(2000);
  cfg.retry.initial_backoff = std::chrono::milliseconds(1);
  cfg.retry.max_backoff = std::chrono::milliseconds(4);
  return cfg;
}

const std::string kTrace =
    "Trying 30+25 gives 55. This gives 55, which is not equal to 32. This approach won't work because it ends at "
    "55 instead of 32. Working backwards from 32: 4 * 8 = 32.";

}  // namespace

TEST_CASE("count_llm asks four questions at temperature 0 with at most 512 tokens") {
  MockClassifier mock(forge::testing::rules_reply);
  ::setenv("FORGE_TEST_KEY", "sekret", 1);
  ClassifierConfig cfg = config_for(mock);
  cfg.api_key_env = "FORGE_TEST_KEY";
  LlmCounts counts = count_llm(kTrace, cfg);
  auto reqs = mock.requests();
  REQUIRE(reqs.size() == 4);
  std::set<std::string> asked;
  for (const auto& r : reqs) {
    CHECK(r.body["temperature"] == 0);
    CHECK(r.body["max_tokens"].get<int>() <= 512);
    CHECK(r.authorization == "Bearer sekret");
    asked.insert(std::string(behavior_name(forge::testing::unpack_question(r.body).first)));
  }
  CHECK(asked.size() == 4);
  REQUIRE(counts.complete());
  CHECK(counts.require() == count_rules(kTrace));
  ::unsetenv("FORGE_TEST_KEY");
}

TEST_CASE("a rules-backed endpoint reproduces the rule counts exactly") {
  MockClassifier mock(forge::testing::rules_reply);
  std::vector<std::string> traces;
  for (const Puzzle& p : generate(17, 6)) {
    for (Profile prof : kProfiles) {
      if (prof == Profile::EmptyCot || prof == Profile::PlaceholderCot) continue;
      traces.push_back(synthesize(p, prof, 3).thinking);
    }
  }
  ClassifierConfig cfg = config_for(mock);
  cfg.max_in_flight = 3;
  auto audit = std::make_shared<AuditLog>();
  Detector llm = Detector::llm(cfg, nullptr, audit);
  std::vector<BehaviorCounts> got = llm.count_many(traces);
  REQUIRE(got.size() == traces.size());
  std::uint64_t deviation = 0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    BehaviorCounts want = count_rules(traces[i]);
    for (Behavior b : kBehaviors) deviation += got[i][b] > want[b] ? got[i][b] - want[b] : want[b] - got[i][b];
  }
  CHECK(deviation == 0);
  CHECK(mock.requests().size() == 4 * traces.size());
  CHECK(audit->entries().size() == 4 * traces.size());
  CHECK(mock.peak_concurrency() <= 3);
  CHECK(report(traces, llm).to_csv() == report(traces, Detector::rules()).to_csv());
}

TEST_CASE("server errors surface as unavailable, never as zero") {
  MockClassifier mock([](const nlohmann::json&, httplib::Response& res) {
    res.status = 503;
    return std::string();
  });
  ClassifierConfig cfg = config_for(mock);
  cfg.retry.max_attempts = 3;
  auto audit = std::make_shared<AuditLog>();
  LlmCounts counts = count_llm(kTrace, cfg, audit.get());
  CHECK(mock.requests().size() == 12);
  CHECK_FALSE(counts.complete());
  for (Behavior b : kBehaviors) {
    CHECK(counts[b].status == CountStatus::Unavailable);
    CHECK(counts[b].detail.find("503") != std::string::npos);
  }
  for (const auto& e : audit->entries()) CHECK(e.attempts == 3);
  CHECK_THROWS_AS(counts.require(), ClassifierError);
  CHECK_THROWS_AS(Detector::llm(cfg).count(kTrace), ClassifierError);
}

TEST_CASE("client errors are not retried") {
  MockClassifier mock([](const nlohmann::json&, httplib::Response& res) {
    res.status = 400;
    return std::string();
  });
  LlmCounts counts = count_llm(kTrace, config_for(mock));
  CHECK(mock.requests().size() == 4);
  for (Behavior b : kBehaviors) CHECK(counts[b].status == CountStatus::Unavailable);
}

TEST_CASE("timeouts surface as unavailable") {
  MockClassifier mock([](const nlohmann::json&, httplib::Response&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    return std::string("<count>1</count>");
  });
  ClassifierConfig cfg = config_for(mock);
  cfg.timeout = std::chrono::milliseconds(100);
  cfg.retry.max_attempts = 1;
  LlmCounts counts = count_llm(kTrace, cfg);
  for (Behavior b : kBehaviors) {
    CHECK(counts[b].status == CountStatus::Unavailable);
    CHECK(counts[b].count == 0);
  }
}

TEST_CASE("an unreachable endpoint is unavailable") {
  ClassifierConfig cfg;
  {
    MockClassifier gone(forge::testing::rules_reply);
    cfg = config_for(gone);
  }
  cfg.retry.max_attempts = 2;
  LlmCounts counts = count_llm(kTrace, cfg);
  for (Behavior b : kBehaviors) CHECK(counts[b].status == CountStatus::Unavailable);
}

TEST_CASE("unparseable replies keep the raw text") {
  MockClassifier mock([](const nlohmann::json&, httplib::Response&) { return std::string("I think three"); });
  LlmCounts counts = count_llm(kTrace, config_for(mock));
  for (Behavior b : kBehaviors) {
    CHECK(counts[b].status == CountStatus::Unparseable);
    CHECK(counts[b].detail == "I think three");
  }
  CHECK_THROWS_AS(counts.require(), ClassifierError);
}

TEST_CASE("parse_count_reply") {
  CHECK(parse_count_reply("<count>3</count>") == 3u);
  CHECK(parse_count_reply("  The answer: <count> 12 </count>\n") == 12u);
  CHECK(parse_count_reply("0") == 0u);
  CHECK(parse_count_reply("7\n") == 7u);
  CHECK_FALSE(parse_count_reply(""));
  CHECK_FALSE(parse_count_reply("<count>-1</count>"));
  CHECK_FALSE(parse_count_reply("<count>2"));
  CHECK_FALSE(parse_count_reply("two"));
  CHECK_FALSE(parse_count_reply("3 times"));
}

TEST_CASE("retry delays grow and cap") {
  RetryPolicy p;
  CHECK(p.delay_before(1).count() == 0);
  CHECK(p.delay_before(2).count() == 200);
  CHECK(p.delay_before(3).count() == 400);
  CHECK(p.delay_before(20).count() == 5000);
}

TEST_CASE("reports aggregate counts") {
  std::vector<BehaviorCounts> counts(3);
  counts[0].counts = {2, 0, 0, 1};
  counts[1].counts = {0, 0, 0, 1};
  BehaviorReport r = report(counts);
  CHECK(r.mean(Behavior::Backtracking) == doctest::Approx(2.0 / 3));
  CHECK(r.proportion(Behavior::BackwardChaining) == doctest::Approx(2.0 / 3));
  CHECK(r.sum(Behavior::Verification) == 0);
  CHECK(r.to_csv().starts_with("behavior,n_traces,sum,mean,traces_with_behavior,proportion\nbacktracking,3,2,"));
  CHECK(r.to_json()["n_traces"] == 3);
  CHECK_THROWS_AS(report(std::span<const BehaviorCounts>{}), std::invalid_argument);
  CHECK(detector_from_name("rules") == DetectorKind::Rules);
  CHECK(detector_from_name("llm") == DetectorKind::Llm);
  CHECK_FALSE(detector_from_name("regex"));
}
