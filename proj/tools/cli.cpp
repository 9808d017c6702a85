#include "cli.hpp"

#include "forge/amplify.hpp"
#include "forge/annotate.hpp"
#include "forge/corpus.hpp"
#include "forge/puzzle.hpp"
#include "forge/scorer.hpp"
#include "forge/tracegen.hpp"
#include "forge/version.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace forge::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {}

  void set_json(bool on) { json_ = on; }
  void info(const std::string& msg, const json& fields = json::object()) { emit("info", msg, fields); }
  void warn(const std::string& msg, const json& fields = json::object()) { emit("warn", msg, fields); }
  void error(const std::string& msg, const json& fields = json::object()) { emit("error", msg, fields); }

 private:
  void emit(const char* level, const std::string& msg, const json& fields) {
    if (json_) {
      json line = {{"level", level}, {"msg", msg}};
      for (const auto& [k, v] : fields.items()) line[k] = v;
      err_ << line.dump() << '\n';
      return;
    }
    err_ << "forge: ";
    if (std::string_view(level) != "info") err_ << level << ": ";
    err_ << msg;
    for (const auto& [k, v] : fields.items()) err_ << ' ' << k << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
    err_ << '\n';
  }

  std::ostream& err_;
  bool json_ = false;
};

struct Context {
  std::ostream& out;
  Logger log;
};

// ------------------------------------------------------------------ files

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot read " + path);
  return in;
}

class OutputFile {
 public:
  explicit OutputFile(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    stream_.open(path_, std::ios::binary | std::ios::trunc);
    if (!stream_) throw DomainError("cannot write " + path_.string());
  }
  std::ostream& stream() { return stream_; }
  const fs::path& path() const { return path_; }
  void close() {
    stream_.close();
    if (stream_.fail()) throw DomainError("failed writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream stream_;
};

// Output goes to --out when given, stdout otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) file_.emplace(path);
    stream_ = file_ ? &file_->stream() : &fallback;
  }
  std::ostream& stream() { return *stream_; }
  bool to_file() const { return file_.has_value(); }
  void close() {
    if (file_) file_->close();
    else stream_->flush();
  }

 private:
  std::optional<OutputFile> file_;
  std::ostream* stream_ = nullptr;
};

void write_json_file(const fs::path& path, const json& j) {
  OutputFile f(path);
  f.stream() << j.dump(2) << '\n';
  f.close();
}

fs::path manifest_beside(const std::string& out) { return fs::path(out + ".manifest.json"); }

// Manifests carry no timestamps or output locations, so reruns match byte for byte.
json manifest(const std::string& command, json config) {
  return {{"tool", "forge"}, {"version", kVersion}, {"command", command}, {"config", std::move(config)},
          {"files", json::object()}};
}

void record_file(json& m, const fs::path& path, std::uint64_t records) {
  m["files"][path.filename().string()] = {{"records", records}, {"sha256", sha256_file(path.string())}};
}

template <typename F>
void for_each_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    f(n, line);
  }
}

json parse_record(std::size_t line_no, const std::string& line, const std::string& file) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DomainError(file + ":" + std::to_string(line_no) + ": not a JSON object");
  }
  return j;
}

std::string id_field(const json& j, std::initializer_list<const char*> keys, std::size_t line_no) {
  for (const char* k : keys) {
    auto it = j.find(k);
    if (it == j.end()) continue;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  }
  return "line-" + std::to_string(line_no);
}

// ------------------------------------------------------------------ shared records

json puzzle_json(const Puzzle& p) {
  return {{"id", p.id}, {"numbers", p.numbers}, {"target", p.target}, {"seed", p.seed}};
}

Puzzle puzzle_from_json(const json& j) {
  Puzzle p;
  p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  p.numbers = j.at("numbers").get<std::vector<std::int64_t>>();
  p.target = j.at("target").get<std::int64_t>();
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  check_puzzle(p);
  return p;
}

struct ClassifierFlags {
  ClassifierConfig config;
  long timeout_ms = 30'000;
  int retries = 3;

  void attach(CLI::App* app) {
    app->add_option("--endpoint", config.endpoint, "Classifier base URL (scheme://host[:port])")->capture_default_str();
    app->add_option("--endpoint-path", config.path, "Chat completion path")->capture_default_str();
    app->add_option("--model", config.model, "Classifier model name")->capture_default_str();
    app->add_option("--api-key-env", config.api_key_env, "Environment variable holding the bearer token")
        ->capture_default_str();
    app->add_option("--max-in-flight", config.max_in_flight, "Concurrent classifier requests")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--timeout-ms", timeout_ms, "Per-request timeout")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--retries", retries, "Attempts per request")->capture_default_str()->check(CLI::PositiveNumber);
  }

  ClassifierConfig resolved() const {
    ClassifierConfig c = config;
    c.timeout = std::chrono::milliseconds(timeout_ms);
    c.retry.max_attempts = retries;
    return c;
  }

  json to_json() const {
    return {{"endpoint", config.endpoint}, {"endpoint_path", config.path},   {"model", config.model},
            {"api_key_env", config.api_key_env}, {"max_in_flight", config.max_in_flight},
            {"timeout_ms", timeout_ms},      {"retries", retries}};
  }
};

const std::vector<std::string> kDetectorNames = {"rules", "llm"};

Detector make_detector(const std::string& name, const ClassifierFlags& flags,
                       std::shared_ptr<AuditLog> audit = nullptr) {
  if (*detector_from_name(name) == DetectorKind::Rules) return Detector::rules();
  return Detector::llm(flags.resolved(), nullptr, std::move(audit));
}

json detector_config(const std::string& name, const ClassifierFlags& flags) {
  json j = {{"detector", name}};
  if (name == "llm") j["classifier"] = flags.to_json();
  return j;
}

// ------------------------------------------------------------------ puzzle

struct PuzzleGenArgs {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::string out;
  GenConfig gen;
  bool solvable = true;
};

int run_puzzle_gen(Context& ctx, PuzzleGenArgs& a) {
  a.gen.require_solvable = a.solvable;
  std::vector<Puzzle> puzzles;
  try {
    puzzles = generate(a.seed, a.count, a.gen);
  } catch (const RejectionBudgetExceeded& e) {
    throw DomainError(e.what());
  }
  Sink sink(a.out, ctx.out);
  for (const Puzzle& p : puzzles) sink.stream() << puzzle_json(p).dump() << '\n';
  sink.close();
  if (sink.to_file()) {
    json m = manifest("puzzle gen", {{"seed", a.seed},
                                     {"count", a.count},
                                     {"min_num", a.gen.min_number},
                                     {"max_num", a.gen.max_number},
                                     {"min_target", a.gen.min_target},
                                     {"max_target", a.gen.max_target},
                                     {"solvable", a.solvable},
                                     {"threads", a.gen.threads}});
    record_file(m, a.out, puzzles.size());
    write_json_file(manifest_beside(a.out), m);
  }
  ctx.log.info("generated puzzles", {{"count", puzzles.size()}});
  return kOk;
}

struct PuzzleSolveArgs {
  std::vector<std::int64_t> numbers;
  std::int64_t target = 0;
  std::optional<std::uint64_t> budget;
};

int run_puzzle_solve(Context& ctx, PuzzleSolveArgs& a) {
  Puzzle p{"cli", a.numbers, a.target, 0};
  try {
    check_puzzle(p);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  SolveResult r = solve(p, a.budget);
  json j = {{"status", to_string(r.status)}, {"explored", r.explored}};
  j["witness"] = r.witness ? json(render(*r.witness)) : json(nullptr);
  ctx.out << j.dump() << '\n';
  return kOk;
}

// ------------------------------------------------------------------ score

struct ScoreArgs {
  std::string puzzles;
  std::string responses;
  std::string out;
};

int run_score(Context& ctx, ScoreArgs& a) {
  std::unordered_map<std::string, Puzzle> by_id;
  {
    std::ifstream in = open_input(a.puzzles);
    for_each_line(in, [&](std::size_t n, const std::string& line) {
      json j = parse_record(n, line, a.puzzles);
      Puzzle p;
      try {
        p = puzzle_from_json(j);
      } catch (const std::exception& e) {
        throw DomainError(a.puzzles + ":" + std::to_string(n) + ": " + e.what());
      }
      std::string id = p.id;
      if (!by_id.emplace(id, std::move(p)).second) {
        throw DomainError(a.puzzles + ":" + std::to_string(n) + ": duplicate puzzle id " + id);
      }
    });
  }
  std::ifstream in = open_input(a.responses);
  Sink sink(a.out, ctx.out);
  std::uint64_t records = 0;
  std::int64_t tenths = 0;
  for_each_line(in, [&](std::size_t n, const std::string& line) {
    json j = parse_record(n, line, a.responses);
    std::string where = a.responses + ":" + std::to_string(n);
    if (!j.contains("puzzle_id") || !j.contains("text") || !j["text"].is_string()) {
      throw DomainError(where + ": expected {puzzle_id, text}");
    }
    std::string id = id_field(j, {"puzzle_id"}, n);
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DomainError(where + ": unknown puzzle_id " + id);
    RewardBreakdown r = score(parse_response(j["text"].get<std::string>()), it->second);
    json row = {{"puzzle_id", id}, {"format_ok", r.format_ok}, {"answer_correct", r.answer_correct},
                {"total", r.total()}};
    sink.stream() << row.dump() << '\n';
    ++records;
    tenths += r.tenths();
  });
  sink.close();
  if (sink.to_file()) {
    json m = manifest("score", {{"puzzles", a.puzzles}, {"responses", a.responses}});
    record_file(m, a.out, records);
    m["mean_reward"] = records ? static_cast<double>(tenths) / (10.0 * static_cast<double>(records)) : 0.0;
    write_json_file(manifest_beside(a.out), m);
  }
  ctx.log.info("scored responses", {{"records", records}});
  return kOk;
}

// ------------------------------------------------------------------ primes

struct PrimesArgs {
  std::string profile;
  std::uint64_t seed = 0;
  std::string out_dir = "primes";
  std::size_t count = 1200;
  std::size_t eval = 200;
  unsigned threads = 0;
};

std::vector<std::string> profile_choices() {
  std::vector<std::string> names;
  for (Profile p : kProfiles) names.emplace_back(profile_name(p));
  names.emplace_back("all");
  return names;
}

json example_json(const Example& ex) {
  return {{"puzzle_id", ex.trace.puzzle_id},
          {"numbers", ex.puzzle.numbers},
          {"target", ex.puzzle.target},
          {"prompt", countdown_prompt(ex.puzzle)},
          {"thinking", ex.trace.thinking},
          {"answer", ex.trace.answer},
          {"correct", ex.trace.correct},
          {"profile", profile_name(ex.trace.profile)}};
}

json chat_json(const Example& ex) {
  json messages = json::array({
      {{"role", "system"}, {"content", kSystemPrompt}},
      {{"role", "user"}, {"content", countdown_prompt(ex.puzzle)}},
      {{"role", "assistant"}, {"content", format_response(ex.trace.thinking, ex.trace.answer)}},
  });
  return {{"puzzle_id", ex.trace.puzzle_id}, {"messages", std::move(messages)}};
}

void write_examples(const fs::path& path, const std::vector<Example>& rows, json (*render)(const Example&),
                    json& m) {
  OutputFile f(path);
  for (const Example& ex : rows) f.stream() << render(ex).dump() << '\n';
  f.close();
  record_file(m, path, rows.size());
}

int run_primes_build(Context& ctx, PrimesArgs& a) {
  if (a.eval > a.count) throw UsageError("--eval must not exceed --count");
  std::vector<Profile> profiles;
  if (a.profile == "all") profiles.assign(kProfiles.begin(), kProfiles.end());
  else profiles.push_back(*profile_from_name(a.profile));

  for (Profile p : profiles) {
    std::string name(profile_name(p));
    fs::path dir = a.profile == "all" ? fs::path(a.out_dir) / name : fs::path(a.out_dir);
    DatasetOptions opts;
    opts.total = a.count;
    opts.eval = a.eval;
    opts.threads = a.threads;
    DatasetSplit split = build_dataset(p, a.seed, opts);

    json m = manifest("primes build", {{"profile", name},
                                       {"seed", a.seed},
                                       {"count", a.count},
                                       {"eval", a.eval},
                                       {"threads", a.threads}});
    write_examples(dir / "train.jsonl", split.train, example_json, m);
    write_examples(dir / "eval.jsonl", split.eval, example_json, m);
    write_examples(dir / "train_chat.jsonl", split.train, chat_json, m);
    write_examples(dir / "eval_chat.jsonl", split.eval, chat_json, m);
    std::size_t correct = 0;
    for (const Example& ex : split.train) correct += ex.trace.correct;
    for (const Example& ex : split.eval) correct += ex.trace.correct;
    m["correct"] = correct;
    write_json_file(dir / "manifest.json", m);
    ctx.log.info("built dataset", {{"profile", name}, {"train", split.train.size()}, {"eval", split.eval.size()}});
  }
  return kOk;
}

// ------------------------------------------------------------------ annotate

struct AnnotateArgs {
  std::string in;
  std::string detector = "rules";
  std::string out;
  std::string audit;
  ClassifierFlags classifier;
};

const char* status_name(CountStatus s) {
  switch (s) {
    case CountStatus::Counted: return "counted";
    case CountStatus::Unavailable: return "unavailable";
    case CountStatus::Unparseable: return "unparseable";
  }
  return "unavailable";
}

int run_annotate(Context& ctx, AnnotateArgs& a) {
  if (a.in.empty()) throw UsageError("annotate needs --in");
  struct Row {
    std::string id;
    json profile;
  };
  std::vector<Row> rows;
  std::vector<std::string> texts;
  {
    std::ifstream in = open_input(a.in);
    for_each_line(in, [&](std::size_t n, const std::string& line) {
      json j = parse_record(n, line, a.in);
      const json* text = nullptr;
      for (const char* key : {"thinking", "text"}) {
        if (j.contains(key) && j[key].is_string()) {
          text = &j[key];
          break;
        }
      }
      if (!text) throw DomainError(a.in + ":" + std::to_string(n) + ": no thinking or text field");
      rows.push_back({id_field(j, {"puzzle_id", "id"}, n), j.value("profile", json(nullptr))});
      texts.push_back(text->get<std::string>());
    });
  }

  std::vector<LlmCounts> results(texts.size());
  auto audit = std::make_shared<AuditLog>();
  if (*detector_from_name(a.detector) == DetectorKind::Rules) {
    std::vector<BehaviorCounts> counts = Detector::rules().count_many(texts);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (Behavior b : kBehaviors) results[i][b] = {CountStatus::Counted, counts[i][b], {}};
    }
  } else {
    ClassifierConfig cfg = a.classifier.resolved();
    HttpChatTransport transport(cfg);
    results = count_llm_batch(texts, cfg, transport, audit.get());
  }

  Sink sink(a.out, ctx.out);
  std::uint64_t incomplete = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    json counts = json::object();
    json status = json::object();
    for (Behavior b : kBehaviors) {
      std::string key(behavior_name(b));
      const BehaviorResult& r = results[i][b];
      counts[key] = r.status == CountStatus::Counted ? json(r.count) : json(nullptr);
      status[key] = status_name(r.status);
    }
    bool complete = results[i].complete();
    incomplete += !complete;
    json row = {{"id", rows[i].id}, {"counts", counts}, {"status", status}, {"complete", complete}};
    if (!rows[i].profile.is_null()) row["profile"] = rows[i].profile;
    sink.stream() << row.dump() << '\n';
  }
  sink.close();

  if (!a.audit.empty()) {
    OutputFile f(a.audit);
    audit->write_jsonl(f.stream());
    f.close();
  }
  if (sink.to_file()) {
    json cfg = detector_config(a.detector, a.classifier);
    cfg["in"] = a.in;
    json m = manifest("annotate", cfg);
    record_file(m, a.out, rows.size());
    m["incomplete"] = incomplete;
    write_json_file(manifest_beside(a.out), m);
  }
  if (incomplete) {
    ctx.log.error("classifier could not count every trace", {{"incomplete", incomplete}, {"traces", rows.size()}});
    return kDomainError;
  }
  ctx.log.info("annotated traces", {{"traces", rows.size()}});
  return kOk;
}

struct ReportArgs {
  std::string in;
  std::string out;
};

int run_annotate_report(Context& ctx, ReportArgs& a) {
  std::ifstream in = open_input(a.in);
  std::vector<BehaviorCounts> counts;
  std::uint64_t skipped = 0;
  for_each_line(in, [&](std::size_t n, const std::string& line) {
    json j = parse_record(n, line, a.in);
    if (!j.contains("counts") || !j["counts"].is_object()) {
      throw DomainError(a.in + ":" + std::to_string(n) + ": no counts object");
    }
    BehaviorCounts c;
    bool complete = true;
    for (Behavior b : kBehaviors) {
      const json& v = j["counts"].value(std::string(behavior_name(b)), json(nullptr));
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        complete = false;
        break;
      }
      c[b] = v.get<std::uint64_t>();
    }
    if (complete) counts.push_back(c);
    else ++skipped;
  });
  if (counts.empty()) throw DomainError("no complete count records in " + a.in);
  if (skipped) ctx.log.warn("skipped records with unavailable counts", {{"skipped", skipped}});
  Sink sink(a.out, ctx.out);
  sink.stream() << report(counts).to_csv();
  sink.close();
  return kOk;
}

// ------------------------------------------------------------------ corpus

struct AnalyzeArgs {
  std::string in;
  std::size_t sample = 200'000;
  std::uint64_t seed = 0;
  std::string detector = "rules";
  std::string checkpoint;
  std::size_t checkpoint_every = 10'000;
  double tokens_per_word = kDefaultTokensPerWord;
  std::string out;
  std::string csv;
  ClassifierFlags classifier;
};

int run_corpus_analyze(Context& ctx, AnalyzeArgs& a) {
  AnalyzeOptions opts;
  opts.sample = a.sample;
  opts.seed = a.seed;
  opts.tokens_per_word = a.tokens_per_word;
  opts.checkpoint_every = a.checkpoint_every;
  if (!a.checkpoint.empty()) opts.checkpoint = a.checkpoint;
  std::ifstream in = open_input(a.in);
  AnalyzeReport r = analyze(in, make_detector(a.detector, a.classifier), opts);

  json cfg = detector_config(a.detector, a.classifier);
  cfg.update({{"in", a.in}, {"sample", a.sample}, {"seed", a.seed}, {"tokens_per_word", a.tokens_per_word}});
  json doc = {{"tool", "forge"}, {"version", kVersion}, {"command", "corpus analyze"}, {"config", cfg},
              {"report", r.to_json()}};
  Sink sink(a.out, ctx.out);
  sink.stream() << doc.dump(2) << '\n';
  sink.close();
  if (!a.csv.empty()) {
    OutputFile f(a.csv);
    f.stream() << r.to_csv();
    f.close();
  }
  ctx.log.info("analyzed corpus", {{"documents", r.documents}, {"sampled", r.sample.size()}, {"malformed", r.malformed}});
  return kOk;
}

struct PartitionArgs {
  std::string in;
  std::string detector = "rules";
  std::uint64_t budget = kDefaultTokenBudget;
  std::string out_dir;
  double tokens_per_word = kDefaultTokensPerWord;
  unsigned threads = 0;
  std::size_t max_in_flight = 64;
  ClassifierFlags classifier;
};

int run_corpus_partition(Context& ctx, PartitionArgs& a) {
  PartitionOptions opts;
  opts.token_budget = a.budget;
  opts.tokens_per_word = a.tokens_per_word;
  opts.threads = a.threads;
  opts.max_in_flight = a.max_in_flight;
  std::ifstream in = open_input(a.in);
  fs::path dir(a.out_dir);
  OutputFile enriched(dir / "enriched.jsonl");
  OutputFile minimized(dir / "minimized.jsonl");
  PartitionReport r = partition(in, make_detector(a.detector, a.classifier), opts, enriched.stream(), minimized.stream());
  enriched.close();
  minimized.close();

  json cfg = detector_config(a.detector, a.classifier);
  cfg.update({{"in", a.in},
              {"budget", a.budget},
              {"tokens_per_word", a.tokens_per_word},
              {"threads", a.threads},
              {"queue_depth", a.max_in_flight}});
  json m = manifest("corpus partition", cfg);
  record_file(m, enriched.path(), r.enriched.documents);
  record_file(m, minimized.path(), r.minimized.documents);
  json report = r.to_json();
  report.erase("peak_in_flight");  // scheduling-dependent
  m["report"] = report;
  write_json_file(dir / "manifest.json", m);
  for (const std::string& w : r.warnings) ctx.log.warn(w);
  ctx.log.info("partitioned corpus", {{"enriched", r.enriched.documents},
                                      {"minimized", r.minimized.documents},
                                      {"peak_in_flight", r.peak_in_flight}});
  return kOk;
}

struct ReformatArgs {
  std::string in;
  std::string mode = "enriched";
  std::string rewriter = "templated";
  std::string out;
  double tokens_per_word = kDefaultTokensPerWord;
  unsigned threads = 0;
  std::size_t max_in_flight = 64;
  ClassifierFlags classifier;
};

int run_corpus_reformat(Context& ctx, ReformatArgs& a) {
  ReformatOptions opts;
  opts.mode = *mode_from_name(a.mode);
  opts.tokens_per_word = a.tokens_per_word;
  opts.threads = a.threads;
  opts.max_in_flight = a.max_in_flight;
  Rewriter rewriter = a.rewriter == "external" ? Rewriter::external(a.classifier.resolved()) : Rewriter::templated();
  std::ifstream in = open_input(a.in);
  OutputFile out(a.out);
  ReformatReport r = reformat_stream(in, rewriter, opts, out.stream());
  out.close();

  json cfg = {{"in", a.in},
              {"mode", a.mode},
              {"rewriter", a.rewriter},
              {"tokens_per_word", a.tokens_per_word},
              {"threads", a.threads},
              {"queue_depth", a.max_in_flight}};
  if (a.rewriter == "external") cfg["classifier"] = a.classifier.to_json();
  json m = manifest("corpus reformat", cfg);
  record_file(m, out.path(), r.kept);
  m.update(r.to_json());
  write_json_file(manifest_beside(a.out), m);
  ctx.log.info("reformatted corpus", {{"kept", r.kept}, {"dropped", r.dropped.size()}, {"token_sum", r.token_sum}});
  return kOk;
}

// ------------------------------------------------------------------ amplify

struct AmplifyArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<unsigned> threads;
};

int run_amplify(Context& ctx, AmplifyArgs& a) {
  std::ifstream in = open_input(a.config);
  std::stringstream text;
  text << in.rdbuf();
  ExperimentConfig cfg = ExperimentConfig::from_key_values(parse_key_values(text.str()));
  if (a.seed) cfg.policy.seed = *a.seed;
  if (a.steps) cfg.policy.steps = *a.steps;
  if (a.threads) cfg.policy.threads = *a.threads;
  cfg.policy.validate();

  ExperimentResult r;
  try {
    r = run_experiment(cfg);
  } catch (const TrainingError& e) {
    ctx.log.error(e.what(), {{"state", e.state()}});
    throw DomainError("training stopped");
  }
  OutputFile out(a.out);
  out.stream() << metrics_csv(r.training.final_state, r.training.steps);
  out.close();

  json m = manifest("amplify run", cfg.to_json());
  m["config_file"] = a.config;
  record_file(m, out.path(), r.training.steps.size());
  json rewards = json::object();
  const auto& strategies = r.training.final_state.strategies();
  for (std::size_t k = 0; k < strategies.size(); ++k) rewards[strategies[k].name] = r.eval_rewards[k];
  m["eval_rewards"] = rewards;
  m["initial_eval_reward"] = r.initial_eval_reward;
  m["final_eval_reward"] = r.final_eval_reward;
  m["final_policy"] = r.training.final_state.to_json();
  write_json_file(manifest_beside(a.out), m);
  ctx.log.info("amplification finished",
               {{"initial_eval_reward", r.initial_eval_reward}, {"final_eval_reward", r.final_eval_reward}});
  return kOk;
}

// ------------------------------------------------------------------ suggestions

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

void collect_names(const CLI::App* app, std::vector<std::string>& options, std::vector<std::string>& commands) {
  for (const CLI::Option* opt : app->get_options()) {
    for (const std::string& n : opt->get_lnames()) options.push_back("--" + n);
  }
  for (const CLI::App* sub : app->get_subcommands({})) {
    commands.push_back(sub->get_name());
    collect_names(sub, options, commands);
  }
}

void collect_remaining(const CLI::App* app, std::vector<std::string>& out) {
  for (const std::string& s : app->remaining()) out.push_back(s);
  for (const CLI::App* sub : app->get_subcommands({})) collect_remaining(sub, out);
}

std::optional<std::string> suggest(const CLI::App& root, const std::vector<std::string>& args) {
  std::vector<std::string> options, commands;
  collect_names(&root, options, commands);
  std::vector<std::string> unknown;
  collect_remaining(&root, unknown);
  if (unknown.empty()) unknown = args;
  for (const std::string& word : unknown) {
    std::string key = word.substr(0, word.find('='));
    const auto& pool = key.starts_with("-") ? options : commands;
    if (std::find(pool.begin(), pool.end(), key) != pool.end()) continue;
    std::optional<std::string> best;
    std::size_t best_d = std::max<std::size_t>(2, key.size() / 3) + 1;
    for (const std::string& cand : pool) {
      std::size_t d = edit_distance(key, cand);
      if (d < best_d) {
        best_d = d;
        best = cand;
      }
    }
    if (best) return "unknown '" + key + "', did you mean '" + *best + "'?";
  }
  for (const std::string& word : unknown) {
    if (word.find_first_not_of("0123456789.-") != std::string::npos) return "unknown '" + word + "'";
  }
  return std::nullopt;
}

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> md(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!md || EVP_DigestInit_ex(md.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 unavailable");
  std::array<char, 1 << 16> buf;
  while (in.read(buf.data(), buf.size()) || in.gcount() > 0) {
    EVP_DigestUpdate(md.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int len = 0;
  EVP_DigestFinal_ex(md.get(), digest.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Countdown reasoning-behavior toolkit", "forge"};
  app.set_version_flag("--version", std::string("forge ") + kVersion);
  app.set_config("--settings", "", "Read option defaults from a TOML/INI file ([puzzle.gen] style sections)");
  bool json_logs = false;
  app.add_flag("--json", json_logs, "Log to stderr as JSON lines");
  app.require_subcommand(1);
  app.fallthrough();

  std::map<const CLI::App*, std::function<int(Context&)>> handlers;
  auto detector_opt = [](CLI::App* sub, std::string& target) {
    sub->add_option("--detector", target, "Behavior detector")
        ->capture_default_str()
        ->check(CLI::IsMember(kDetectorNames));
  };

  // puzzle
  CLI::App* puzzle = app.add_subcommand("puzzle", "Generate and solve Countdown puzzles");
  puzzle->require_subcommand(1);
  PuzzleGenArgs gen;
  CLI::App* gen_cmd = puzzle->add_subcommand("gen", "Generate puzzles as JSONL");
  gen_cmd->add_option("--seed", gen.seed, "Generation seed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of puzzles")->required();
  gen_cmd->add_option("--out", gen.out, "Output JSONL (stdout when omitted)");
  gen_cmd->add_option("--min-num", gen.gen.min_number, "Smallest source number")->capture_default_str();
  gen_cmd->add_option("--max-num", gen.gen.max_number, "Largest source number")->capture_default_str();
  gen_cmd->add_option("--min-target", gen.gen.min_target, "Smallest target")->capture_default_str();
  gen_cmd->add_option("--max-target", gen.gen.max_target, "Largest target")->capture_default_str();
  gen_cmd->add_flag("--solvable,!--no-solvable", gen.solvable, "Keep only solvable puzzles (default on)");
  gen_cmd->add_option("--threads", gen.gen.threads, "Worker threads (0 = all cores)")->capture_default_str();
  handlers[gen_cmd] = [&](Context& c) { return run_puzzle_gen(c, gen); };

  PuzzleSolveArgs solve_args;
  CLI::App* solve_cmd = puzzle->add_subcommand("solve", "Solve one puzzle and print a witness");
  solve_cmd->add_option("--numbers", solve_args.numbers, "Source numbers, comma separated")
      ->required()
      ->delimiter(',');
  solve_cmd->add_option("--target", solve_args.target, "Target value")->required();
  solve_cmd->add_option("--budget", solve_args.budget, "Node budget");
  handlers[solve_cmd] = [&](Context& c) { return run_puzzle_solve(c, solve_args); };

  // score
  ScoreArgs score_args;
  CLI::App* score_cmd = app.add_subcommand("score", "Score responses against puzzles");
  score_cmd->add_option("--puzzles", score_args.puzzles, "Puzzle JSONL")->required();
  score_cmd->add_option("--responses", score_args.responses, "Response JSONL ({puzzle_id, text})")->required();
  score_cmd->add_option("--out", score_args.out, "Reward JSONL (stdout when omitted)");
  handlers[score_cmd] = [&](Context& c) { return run_score(c, score_args); };

  // primes
  CLI::App* primes = app.add_subcommand("primes", "Build behavior-profile trace datasets");
  primes->require_subcommand(1);
  PrimesArgs primes_args;
  CLI::App* build_cmd = primes->add_subcommand("build", "Write train/eval JSONL and a chat export");
  build_cmd->add_option("--profile", primes_args.profile, "Behavior profile, or 'all'")
      ->required()
      ->check(CLI::IsMember(profile_choices()));
  build_cmd->add_option("--seed", primes_args.seed, "Dataset seed")->capture_default_str();
  build_cmd->add_option("--out-dir", primes_args.out_dir, "Output directory")->capture_default_str();
  build_cmd->add_option("--count", primes_args.count, "Traces per profile")->capture_default_str()->check(CLI::PositiveNumber);
  build_cmd->add_option("--eval", primes_args.eval, "Held-out traces per profile")->capture_default_str();
  build_cmd->add_option("--threads", primes_args.threads, "Worker threads (0 = all cores)")->capture_default_str();
  handlers[build_cmd] = [&](Context& c) { return run_primes_build(c, primes_args); };

  // annotate
  AnnotateArgs ann;
  CLI::App* ann_cmd = app.add_subcommand("annotate", "Count behaviors in traces");
  ann_cmd->require_subcommand(0, 1);
  ann_cmd->add_option("--in", ann.in, "Trace JSONL (thinking or text field)");
  detector_opt(ann_cmd, ann.detector);
  ann_cmd->add_option("--out", ann.out, "Counts JSONL (stdout when omitted)");
  ann_cmd->add_option("--audit", ann.audit, "Write classifier requests and replies as JSONL");
  ann.classifier.attach(ann_cmd);
  handlers[ann_cmd] = [&](Context& c) { return run_annotate(c, ann); };

  ReportArgs rep;
  CLI::App* rep_cmd = ann_cmd->add_subcommand("report", "Aggregate counts into a CSV table");
  rep_cmd->add_option("--in", rep.in, "Counts JSONL")->required();
  rep_cmd->add_option("--out", rep.out, "Report CSV (stdout when omitted)");
  handlers[rep_cmd] = [&](Context& c) { return run_annotate_report(c, rep); };

  // corpus
  CLI::App* corpus = app.add_subcommand("corpus", "Analyze, partition and reformat document corpora");
  corpus->require_subcommand(1);
  AnalyzeArgs an;
  CLI::App* an_cmd = corpus->add_subcommand("analyze", "Sample documents and report behavior frequencies");
  an_cmd->add_option("--in", an.in, "Document JSONL ({id, text, source})")->required();
  an_cmd->add_option("--sample", an.sample, "Reservoir size")->capture_default_str()->check(CLI::PositiveNumber);
  an_cmd->add_option("--seed", an.seed, "Sampling seed")->capture_default_str();
  detector_opt(an_cmd, an.detector);
  an_cmd->add_option("--checkpoint", an.checkpoint, "Resumable checkpoint file");
  an_cmd->add_option("--checkpoint-every", an.checkpoint_every, "Lines between checkpoints")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  an_cmd->add_option("--tokens-per-word", an.tokens_per_word, "Token estimate ratio")->capture_default_str();
  an_cmd->add_option("--out", an.out, "Report JSON (stdout when omitted)");
  an_cmd->add_option("--csv", an.csv, "Also write the per-behavior table as CSV");
  an.classifier.attach(an_cmd);
  handlers[an_cmd] = [&](Context& c) { return run_corpus_analyze(c, an); };

  PartitionArgs pa;
  CLI::App* pa_cmd = corpus->add_subcommand("partition", "Split documents into behavior-enriched and -minimized sets");
  pa_cmd->add_option("--in", pa.in, "Document JSONL")->required();
  detector_opt(pa_cmd, pa.detector);
  pa_cmd->add_option("--budget", pa.budget, "Token budget per set")->capture_default_str()->check(CLI::PositiveNumber);
  pa_cmd->add_option("--out-dir", pa.out_dir, "Output directory")->required();
  pa_cmd->add_option("--tokens-per-word", pa.tokens_per_word, "Token estimate ratio")->capture_default_str();
  pa_cmd->add_option("--threads", pa.threads, "Worker threads (0 = all cores)")->capture_default_str();
  pa_cmd->add_option("--queue-depth", pa.max_in_flight, "Documents in flight between pipeline stages")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  pa.classifier.attach(pa_cmd);
  handlers[pa_cmd] = [&](Context& c) { return run_corpus_partition(c, pa); };

  ReformatArgs rf;
  CLI::App* rf_cmd = corpus->add_subcommand("reformat", "Rewrite documents as question/thinking/answer");
  rf_cmd->add_option("--in", rf.in, "Document JSONL")->required();
  rf_cmd->add_option("--mode", rf.mode, "enriched or minimized")
      ->capture_default_str()
      ->check(CLI::IsMember({"enriched", "minimized"}));
  rf_cmd->add_option("--rewriter", rf.rewriter, "templated or external")
      ->capture_default_str()
      ->check(CLI::IsMember({"templated", "external"}));
  rf_cmd->add_option("--out", rf.out, "QTA JSONL")->required();
  rf_cmd->add_option("--tokens-per-word", rf.tokens_per_word, "Token estimate ratio")->capture_default_str();
  rf_cmd->add_option("--threads", rf.threads, "Worker threads (0 = all cores)")->capture_default_str();
  rf_cmd->add_option("--queue-depth", rf.max_in_flight, "Documents in flight between pipeline stages")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  rf.classifier.attach(rf_cmd);
  handlers[rf_cmd] = [&](Context& c) { return run_corpus_reformat(c, rf); };

  // amplify
  CLI::App* amplify = app.add_subcommand("amplify", "Policy-gradient amplification over search strategies");
  amplify->require_subcommand(1);
  AmplifyArgs am;
  CLI::App* am_cmd = amplify->add_subcommand("run", "Train and write per-step metrics");
  am_cmd->add_option("--config", am.config, "Experiment settings (key = value)")->required();
  am_cmd->add_option("--out", am.out, "Metrics CSV")->required();
  am_cmd->add_option("--seed", am.seed, "Override the training seed");
  am_cmd->add_option("--steps", am.steps, "Override the step count");
  am_cmd->add_option("--threads", am.threads, "Override the thread count");
  handlers[am_cmd] = [&](Context& c) { return run_amplify(c, am); };

  Context ctx{out, Logger(err)};
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    app.exit(e, out, err);
    if (auto hint = suggest(app, args)) err << *hint << '\n';
    return kUsageError;
  }
  ctx.log.set_json(json_logs);

  const CLI::App* leaf = &app;
  while (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
  auto it = handlers.find(leaf);
  if (it == handlers.end()) {
    err << leaf->help();
    return kUsageError;
  }
  try {
    return it->second(ctx);
  } catch (const UsageError& e) {
    ctx.log.error(e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    ctx.log.error(e.what());
    return kDomainError;
  }
}

}  // namespace forge::cli
