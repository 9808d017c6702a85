// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all nine
//   acceptance 3 7        run a subset
//
// Exit status is 0 only if every selected criterion passes.

#include "cli.hpp"

#include "forge/amplify.hpp"
#include "forge/annotate.hpp"
#include "forge/corpus.hpp"
#include "forge/puzzle.hpp"
#include "forge/scorer.hpp"
#include "forge/seed.hpp"
#include "forge/tracegen.hpp"
#include "support/mock_classifier.hpp"
#include "support/naive_oracle.hpp"

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <streambuf>

using namespace forge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

int tenths_of(const Trace& t, const Puzzle& p) {
  return score(parse_response(format_response(t.thinking, t.answer)), p).tenths();
}

// ------------------------------------------------------------------ 1

Outcome worked_example() {
  Puzzle p{"worked", {25, 30, 3, 4}, 32, 0};
  int right = score(parse_response("<think>30-25=5, 5+3=8, 8*4=32</think>\n<answer>(30-25+3)*4</answer>"), p).tenths();
  int wrong = score(parse_response("<answer>25+30+3+4</answer>"), p).tenths();
  int untagged = score(parse_response("(30-25+3)*4"), p).tenths();
  bool pass = right == 10 && wrong == 1 && untagged == 0;
  return {pass, "correct=" + fmt(right / 10.0, 1) + " wrong-valued=" + fmt(wrong / 10.0, 1) +
                    " untagged=" + fmt(untagged / 10.0, 1)};
}

// ------------------------------------------------------------------ 2

Outcome oracle_equivalence() {
  std::size_t instances = 0, agree = 0;
  for (std::int64_t a = 1; a <= 10; ++a) {
    for (std::int64_t b = 1; b <= 10; ++b) {
      for (std::int64_t c = 1; c <= 10; ++c) {
        std::vector<std::int64_t> nums = {a, b, c};
        std::set<oracle::Frac> reach = oracle::reachable(nums);
        for (std::int64_t target = 1; target <= 100; ++target) {
          Puzzle p{"x", nums, target, 0};
          bool ours = solve(p).status == SolveStatus::Solvable;
          bool theirs = reach.count(oracle::Frac{target, 1}) > 0;
          ++instances;
          agree += ours == theirs;
        }
      }
    }
  }
  return {agree == instances, std::to_string(agree) + "/" + std::to_string(instances) + " instances agree"};
}

// ------------------------------------------------------------------ 3, 4, 5

constexpr std::uint64_t kDatasetSeed = 2024;

const DatasetSplit& dataset(Profile p) {
  static std::map<Profile, DatasetSplit> cache;
  auto it = cache.find(p);
  if (it == cache.end()) it = cache.emplace(p, build_dataset(p, kDatasetSeed)).first;
  return it->second;
}

std::vector<const Example*> all_examples(Profile p) {
  std::vector<const Example*> out;
  for (const Example& e : dataset(p).train) out.push_back(&e);
  for (const Example& e : dataset(p).eval) out.push_back(&e);
  return out;
}

bool enabled(const BehaviorFlags& f, Behavior b) {
  switch (b) {
    case Behavior::Backtracking: return f.backtracking;
    case Behavior::Verification: return f.verification;
    case Behavior::SubgoalSetting: return f.subgoal;
    case Behavior::BackwardChaining: return f.backward;
  }
  return false;
}

Outcome dataset_construction() {
  bool pass = true;
  std::ostringstream detail;
  for (Profile prof : kProfiles) {
    const DatasetSplit& split = dataset(prof);
    BehaviorFlags flags = profile_flags(prof);
    std::size_t pure = 0, disabled_clean = 0, total = 0;
    for (const Example* ex : all_examples(prof)) {
      BehaviorCounts c = count_rules(ex->trace.thinking);
      bool clean = true, present = true;
      for (Behavior b : kBehaviors) {
        if (enabled(flags, b)) present = present && c[b] >= 1;
        else clean = clean && c[b] == 0;
      }
      ++total;
      disabled_clean += clean;
      pure += clean && present;
    }
    double purity = static_cast<double>(pure) / static_cast<double>(total);
    bool ok = split.train.size() == 1000 && split.eval.size() == 200 && purity >= 0.95 && disabled_clean == total;
    pass = pass && ok;
    detail << profile_name(prof) << "=" << split.train.size() << "/" << split.eval.size() << ",purity "
           << fmt(purity, 3) << (disabled_clean == total ? "" : ",LEAK") << " ";
  }
  return {pass, detail.str()};
}

Outcome control_contracts() {
  std::size_t empty_ok = 0, empty_total = 0;
  for (const Example* ex : all_examples(Profile::EmptyCot)) {
    ++empty_total;
    empty_ok += ex->trace.thinking.empty();
  }
  std::map<std::string, std::size_t> reference;
  for (const Example* ex : all_examples(Profile::AllStrategies)) {
    std::istringstream words(ex->trace.thinking);
    std::size_t n = 0;
    for (std::string w; words >> w;) ++n;
    reference[ex->puzzle.id] = n;
  }
  std::size_t matched = 0, pairs = 0;
  for (const Example* ex : all_examples(Profile::PlaceholderCot)) {
    auto it = reference.find(ex->puzzle.id);
    if (it == reference.end()) continue;
    std::istringstream words(ex->trace.thinking);
    std::size_t n = 0;
    for (std::string w; words >> w;) ++n;
    ++pairs;
    matched += std::abs(static_cast<double>(n) - static_cast<double>(it->second)) <=
               0.05 * static_cast<double>(it->second);
  }
  double rate = pairs ? static_cast<double>(matched) / static_cast<double>(pairs) : 0.0;
  bool pass = empty_ok == empty_total && pairs == 1200 && rate >= 0.99;
  return {pass, "empty " + std::to_string(empty_ok) + "/" + std::to_string(empty_total) + ", placeholder within 5%: " +
                    std::to_string(matched) + "/" + std::to_string(pairs)};
}

Outcome incorrect_variant() {
  std::size_t ok = 0, total = 0;
  for (const Example* ex : all_examples(Profile::AllStrategiesIncorrect)) {
    ++total;
    BehaviorCounts c = count_rules(ex->trace.thinking);
    bool all_four = c.backtracking() >= 1 && c.verification() >= 1 && c.subgoal_setting() >= 1 &&
                    c.backward_chaining() >= 1;
    ok += all_four && tenths_of(ex->trace, ex->puzzle) < 10;
  }
  return {ok == total && total == 1200, std::to_string(ok) + "/" + std::to_string(total) +
                                            " traces below 1.0 with all four behaviors"};
}

// ------------------------------------------------------------------ 6

const std::array<std::string, 4> kPlanted = {
    "This approach won't work because the sum is too big.",
    "Let's verify this result by adding.",
    "To solve this, we first need to find a factor.",
    "Working backwards from 24 helps.",
};
const std::string kFiller = "The numbers here are listed one after another.";

struct FixtureDoc {
  std::string id;
  std::string text;
  std::array<std::uint64_t, 4> planted{};
};

FixtureDoc fixture_doc(std::uint64_t i) {
  FixtureDoc d;
  d.id = "doc-" + std::to_string(i);
  std::uint64_t h = mix64(i ^ 0xC0FFEEull);
  std::uint64_t fillers = 1 + (h & 3);
  h >>= 2;
  for (std::size_t b = 0; b < 4; ++b) {
    std::uint64_t r = h % 10;
    h /= 10;
    d.planted[b] = r < 7 ? 0 : r < 9 ? 1 : 2;
  }
  std::string text = kFiller;
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::uint64_t k = 0; k < d.planted[b]; ++k) text += ' ' + kPlanted[b];
  }
  for (std::uint64_t f = 1; f < fillers; ++f) text += ' ' + kFiller;
  d.text = text;
  return d;
}

std::string fixture_line(const FixtureDoc& d) {
  return nlohmann::json{{"id", d.id}, {"text", d.text}, {"source", "fixture"}}.dump() + "\n";
}

std::uint64_t word_tokens(const std::string& text) {
  std::istringstream in(text);
  std::uint64_t words = 0;
  for (std::string w; in >> w;) ++words;
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(words) * 1.3));
}

// Serves fixture lines on demand so the stream itself holds no corpus.
class FixtureStream : public std::streambuf {
 public:
  explicit FixtureStream(std::uint64_t count) : count_(count) {}

 protected:
  int_type underflow() override {
    if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
    if (next_ >= count_) return traits_type::eof();
    line_ = fixture_line(fixture_doc(next_++));
    setg(line_.data(), line_.data(), line_.data() + line_.size());
    return traits_type::to_int_type(*gptr());
  }

 private:
  std::uint64_t count_;
  std::uint64_t next_ = 0;
  std::string line_;
};

class NullBuffer : public std::streambuf {
 protected:
  int_type overflow(int_type c) override { return traits_type::not_eof(c); }
  std::streamsize xsputn(const char*, std::streamsize n) override { return n; }
};

constexpr long kMemoryCeilingKiB = 64 * 1024;

// Peak resident set of a child that streams `docs` fixture documents through
// analyze and partition.
long streamed_peak_kib(std::uint64_t docs) {
  std::fflush(nullptr);
  pid_t pid = ::fork();
  if (pid == 0) {
    FixtureStream a(docs);
    std::istream in_a(&a);
    AnalyzeOptions ao;
    ao.sample = 1000;
    AnalyzeReport r = analyze(in_a, Detector::rules(), ao);
    FixtureStream p(docs);
    std::istream in_p(&p);
    NullBuffer null;
    std::ostream e(&null), m(&null);
    PartitionOptions po;
    po.token_budget = 1'000'000'000;  // never reached: the whole stream flows through
    po.max_in_flight = 64;
    PartitionReport pr = partition(in_p, Detector::rules(), po, e, m);
    bool ok = r.documents == docs && pr.lines == docs;
    ::_exit(ok ? 0 : 3);
  }
  int status = 0;
  struct rusage usage {};
  if (::wait4(pid, &status, 0, &usage) != pid || !WIFEXITED(status) || WEXITSTATUS(status) != 0) return -1;
  return usage.ru_maxrss;
}

Outcome corpus_pipeline() {
  constexpr std::uint64_t kDocs = 10'000;
  constexpr std::uint64_t kBudget = 40'000;
  std::string corpus;
  std::vector<FixtureDoc> docs;
  for (std::uint64_t i = 0; i < kDocs; ++i) {
    docs.push_back(fixture_doc(i));
    corpus += fixture_line(docs.back());
  }

  // Expected membership: each label's documents in order until the budget is first reached.
  std::vector<std::string> want_enriched, want_minimized;
  std::uint64_t tok_e = 0, tok_m = 0;
  std::array<std::uint64_t, 4> planted_sum{};
  for (const FixtureDoc& d : docs) {
    bool any = false;
    for (std::size_t b = 0; b < 4; ++b) {
      planted_sum[b] += d.planted[b];
      any = any || d.planted[b] > 0;
    }
    std::uint64_t t = word_tokens(d.text);
    if (any && tok_e < kBudget) {
      want_enriched.push_back(d.id);
      tok_e += t;
    } else if (!any && tok_m < kBudget) {
      want_minimized.push_back(d.id);
      tok_m += t;
    }
  }

  std::istringstream in(corpus);
  std::ostringstream enriched, minimized;
  PartitionOptions po;
  po.token_budget = kBudget;
  po.threads = 4;
  po.max_in_flight = 32;
  PartitionReport pr = partition(in, Detector::rules(), po, enriched, minimized);

  std::map<std::string, const FixtureDoc*> by_id;
  for (const FixtureDoc& d : docs) by_id[d.id] = &d;
  auto read_set = [&](const std::string& text, bool want_any, std::size_t& mislabeled, std::uint64_t& tokens,
                      std::uint64_t& last) {
    std::vector<std::string> ids;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
      auto j = nlohmann::json::parse(line);
      const FixtureDoc* d = by_id.at(j["id"].get<std::string>());
      bool any = false;
      for (std::uint64_t c : d->planted) any = any || c > 0;
      mislabeled += any != want_any;
      last = word_tokens(d->text);
      tokens += last;
      ids.push_back(d->id);
    }
    return ids;
  };
  std::size_t mislabeled = 0;
  std::uint64_t te = 0, tm = 0, last_e = 0, last_m = 0;
  auto got_e = read_set(enriched.str(), true, mislabeled, te, last_e);
  auto got_m = read_set(minimized.str(), false, mislabeled, tm, last_m);
  bool membership = mislabeled == 0 && got_e == want_enriched && got_m == want_minimized;
  bool budget = te >= kBudget && te - last_e < kBudget && tm >= kBudget && tm - last_m < kBudget &&
                pr.enriched.tokens == te && pr.minimized.tokens == tm;

  std::istringstream in2(corpus);
  AnalyzeOptions ao;
  ao.sample = kDocs;
  ao.seed = 11;
  AnalyzeReport ar = analyze(in2, Detector::rules(), ao);
  bool means = ar.sample.size() == kDocs;
  for (Behavior b : kBehaviors) {
    std::size_t k = static_cast<std::size_t>(b);
    std::uint64_t sum = 0;
    for (const SampledDoc& s : ar.sample) sum += s.counts[b];
    means = means && sum == planted_sum[k] &&
            ar.mean(b) == static_cast<double>(planted_sum[k]) / static_cast<double>(kDocs);
  }

  long peak = streamed_peak_kib(1'000'000);
  bool memory = peak > 0 && peak < kMemoryCeilingKiB;

  std::ostringstream detail;
  detail << "membership " << (membership ? "exact" : "WRONG") << " (" << got_e.size() << "+" << got_m.size()
         << " docs), budget " << (budget ? "within one doc" : "OFF") << ", analyze means "
         << (means ? "exact" : "WRONG") << ", 1e6-doc peak RSS " << peak / 1024 << " MiB (ceiling "
         << kMemoryCeilingKiB / 1024 << ")";
  return {membership && budget && means && memory, detail.str()};
}

// ------------------------------------------------------------------ 7

ExperimentConfig amplification_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.include_guess = true;
  c.policy.seed = seed;
  return c;
}

Outcome amplification() {
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t masked_ok = 0, wins = 0, calm = 0;
  std::ostringstream detail;

  for (std::uint64_t seed : seeds) {
    ExperimentConfig treat = amplification_config(seed);
    treat.seed_mass = std::pair{Behavior::Backtracking, 0.1};
    ExperimentConfig control = amplification_config(seed);
    control.mask_behavior = Behavior::Backtracking;
    ExperimentResult t = run_experiment(treat);
    ExperimentResult c = run_experiment(control);

    bool zero = c.training.steps.size() == 250;
    const auto& strategies = c.training.final_state.strategies();
    for (const StepMetrics& m : c.training.steps) {
      for (std::size_t k = 0; k < strategies.size(); ++k) {
        if (strategies[k].flags.backtracking) zero = zero && m.probabilities[k] == 0.0;
      }
    }
    masked_ok += zero;
    wins += t.final_eval_reward > c.final_eval_reward;
    detail << "s" << seed << ":" << fmt(t.final_eval_reward, 3) << ">" << fmt(c.final_eval_reward, 3) << " ";
  }

  // Symmetric control: every strategy earns the same reward on unsolvable puzzles.
  GenConfig gen;
  gen.require_solvable = false;
  gen.min_target = 500;
  std::vector<Puzzle> stream;
  for (const Puzzle& p : generate(404, 2000, gen)) {
    if (solve(p).status == SolveStatus::Unsolvable) stream.push_back(p);
    if (stream.size() == 200) break;
  }
  auto strategies = all_strategies({}, true);
  PolicyState init(strategies, std::vector<bool>(strategies.size(), true));
  auto drift = [](const TrainResult& r) {
    std::vector<double> p0 = r.initial.probabilities();
    double d = 0;
    for (const StepMetrics& m : r.steps) {
      for (std::size_t k = 0; k < p0.size(); ++k) d = std::max(d, std::abs(m.probabilities[k] - p0[k]));
    }
    return d;
  };
  double worst = 0;
  for (std::uint64_t seed : seeds) {
    PolicyConfig cfg;
    cfg.seed = seed;
    PolicyConfig frozen = cfg;
    frozen.learning_rate = 0;
    double moving = drift(train(cfg, init, stream));
    double still = drift(train(frozen, init, stream));
    calm += moving <= still;
    worst = std::max(worst, moving - still);
  }

  bool pass = masked_ok == seeds.size() && calm == seeds.size() && wins == seeds.size();
  std::ostringstream head;
  head << "(a) masked at 0: " << masked_ok << "/5, (b) drift <= frozen: " << calm << "/5 (max excess "
       << worst << "), (c) treatment > masked: " << wins << "/5 [" << detail.str() << "]";
  return {pass, head.str()};
}

// ------------------------------------------------------------------ 8

struct Run {
  int code = 0;
  std::string out;
};

Run forge_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::dispatch(args, out, err);
  return {code, out.str()};
}

std::map<std::string, std::string> hash_tree(const fs::path& root) {
  std::map<std::string, std::string> hashes;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) hashes[fs::relative(entry.path(), root).string()] = cli::sha256_file(entry.path());
  }
  return hashes;
}

Outcome determinism() {
  fs::path base = fs::temp_directory_path() / ("forge-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::path inputs = base / "inputs";
  fs::create_directories(inputs);
  {
    std::ofstream docs(inputs / "docs.jsonl");
    for (std::uint64_t i = 0; i < 400; ++i) docs << fixture_line(fixture_doc(i));
    std::ofstream amp(inputs / "amplify.toml");
    amp << "[policy]\nsteps = 15\nbatch_size = 16\nseed = 3\n[experiment]\ntrain_puzzles = 64\neval_puzzles = 32\n"
           "include_guess = true\nseed_behavior = backtracking\nseed_mass = 0.1\n";
  }
  std::string in = inputs.string();
  if (forge_cli({"puzzle", "gen", "--seed", "5", "--count", "40", "--out", in + "/puzzles.jsonl"}).code != 0 ||
      forge_cli({"primes", "build", "--profile", "all_strategies", "--seed", "6", "--count", "60", "--eval", "10",
                 "--out-dir", in + "/traces"})
              .code != 0) {
    return {false, "could not prepare inputs"};
  }
  {
    std::ifstream puzzles(inputs / "puzzles.jsonl");
    std::ofstream responses(inputs / "responses.jsonl");
    std::size_t i = 0;
    for (std::string line; std::getline(puzzles, line); ++i) {
      auto j = nlohmann::json::parse(line);
      auto witness = solve(Puzzle{"r", j["numbers"].get<std::vector<std::int64_t>>(), j["target"].get<std::int64_t>(), 0}).witness;
      std::string answer = i % 3 == 0 ? "1+1" : witness ? render(*witness) : "1";
      responses << nlohmann::json{{"puzzle_id", j["id"]}, {"text", "<answer>" + answer + "</answer>"}}.dump() << '\n';
    }
  }

  auto run_all = [&](const fs::path& dir) {
    std::string d = dir.string();
    fs::create_directories(dir);
    std::vector<std::vector<std::string>> commands = {
        {"puzzle", "gen", "--seed", "9", "--count", "200", "--out", d + "/puzzles.jsonl", "--threads", "4"},
        {"score", "--puzzles", in + "/puzzles.jsonl", "--responses", in + "/responses.jsonl", "--out",
         d + "/rewards.jsonl"},
        {"primes", "build", "--profile", "backtracking_only", "--seed", "1", "--out-dir", d + "/primes"},
        {"primes", "build", "--profile", "all", "--seed", "2", "--count", "120", "--eval", "20", "--out-dir",
         d + "/primes_all"},
        {"annotate", "--in", in + "/traces/train.jsonl", "--out", d + "/counts.jsonl"},
        {"annotate", "report", "--in", d + "/counts.jsonl", "--out", d + "/report.csv"},
        {"corpus", "analyze", "--in", in + "/docs.jsonl", "--sample", "100", "--seed", "4", "--out",
         d + "/analyze.json", "--csv", d + "/analyze.csv"},
        {"corpus", "partition", "--in", in + "/docs.jsonl", "--budget", "1500", "--threads", "4", "--out-dir",
         d + "/partition"},
        {"corpus", "reformat", "--in", in + "/docs.jsonl", "--mode", "enriched", "--threads", "4", "--out",
         d + "/qta.jsonl"},
        {"amplify", "run", "--config", in + "/amplify.toml", "--out", d + "/metrics.csv"},
    };
    for (const auto& c : commands) {
      if (forge_cli(c).code != 0) return false;
    }
    return true;
  };
  bool ran = run_all(base / "first") && run_all(base / "second");
  auto a = hash_tree(base / "first");
  auto b = hash_tree(base / "second");
  std::size_t same = 0;
  std::string differing;
  for (const auto& [name, h] : a) {
    bool match = b.count(name) && b.at(name) == h;
    same += match;
    if (!match) differing += " " + name;
  }
  fs::remove_all(base);
  bool pass = ran && !a.empty() && a.size() == b.size() && same == a.size();
  return {pass, std::to_string(same) + "/" + std::to_string(a.size()) + " output files byte-identical across two runs" +
                    (ran ? "" : " (a command failed)") + (differing.empty() ? "" : ", differing:" + differing)};
}

// ------------------------------------------------------------------ 9

Outcome classifier_protocol() {
  using forge::testing::MockClassifier;
  std::vector<std::string> traces;
  for (const Puzzle& p : generate(77, 5)) {
    for (Profile prof : {Profile::AllStrategies, Profile::BacktrackingOnly, Profile::BacktrackingSubgoal}) {
      traces.push_back(synthesize(p, prof, 1).thinking);
    }
  }

  MockClassifier mock(forge::testing::rules_reply);
  ClassifierConfig cfg;
  cfg.endpoint = mock.endpoint();
  cfg.retry.initial_backoff = std::chrono::milliseconds(1);
  cfg.retry.max_backoff = std::chrono::milliseconds(4);
  cfg.timeout = std::chrono::milliseconds(2000);
  HttpChatTransport transport(cfg);
  std::vector<LlmCounts> counted = count_llm_batch(traces, cfg, transport);

  std::map<std::string, std::set<Behavior>> asked;
  std::map<std::string, int> per_trace;
  bool settings = true;
  for (const auto& r : mock.requests()) {
    settings = settings && r.body["temperature"] == 0 && r.body["max_tokens"].get<int>() <= 512;
    auto [behavior, trace] = forge::testing::unpack_question(r.body);
    asked[trace].insert(behavior);
    ++per_trace[trace];
  }
  bool four_each = per_trace.size() == std::set<std::string>(traces.begin(), traces.end()).size();
  for (const auto& [trace, n] : per_trace) four_each = four_each && n == 4 && asked[trace].size() == 4;
  bool counts_ok = true;
  for (std::size_t i = 0; i < traces.size(); ++i) counts_ok = counts_ok && counted[i].require() == count_rules(traces[i]);

  // Failure modes: server errors, timeouts, unreachable endpoint.
  MockClassifier failing([](const nlohmann::json&, httplib::Response& res) {
    res.status = 503;
    return std::string();
  });
  MockClassifier slow([](const nlohmann::json&, httplib::Response&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    return std::string("<count>0</count>");
  });
  std::string unreachable;
  {
    MockClassifier gone(forge::testing::rules_reply);
    unreachable = gone.endpoint();
  }
  bool failures_marked = true;
  for (const std::string& endpoint : {failing.endpoint(), slow.endpoint(), unreachable}) {
    ClassifierConfig bad = cfg;
    bad.endpoint = endpoint;
    bad.timeout = std::chrono::milliseconds(100);
    bad.retry.max_attempts = 2;
    LlmCounts c = count_llm(traces.front(), bad);
    for (Behavior b : kBehaviors) failures_marked = failures_marked && c[b].status == CountStatus::Unavailable;
    bool threw = false;
    try {
      Detector::llm(bad).count(traces.front());
    } catch (const ClassifierError&) {
      threw = true;
    }
    failures_marked = failures_marked && !c.complete() && threw;
  }

  bool pass = settings && four_each && counts_ok && failures_marked;
  std::ostringstream detail;
  detail << mock.requests().size() << " requests for " << traces.size() << " traces, "
         << (four_each ? "4 distinct questions each" : "WRONG request count") << ", "
         << (settings ? "temperature 0 and <=512 tokens" : "BAD sampling settings") << ", failures "
         << (failures_marked ? "marked unavailable" : "NOT marked");
  return {pass, detail.str()};
}

struct Criterion {
  int number;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "worked-example rewards", worked_example},
      {2, "solver agrees with the naive enumerator", oracle_equivalence},
      {3, "dataset sizes and profile purity", dataset_construction},
      {4, "empty and placeholder control contracts", control_contracts},
      {5, "incorrect variant keeps behaviors and misses", incorrect_variant},
      {6, "corpus partition, analyze and bounded memory", corpus_pipeline},
      {7, "amplification properties", amplification},
      {8, "dataset commands are byte-deterministic", determinism},
      {9, "classifier protocol against a mock endpoint", classifier_protocol},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << "criterion " << c.number << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.title << "  ("
              << o.detail << ")  [" << fmt(secs, 2) << "s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
