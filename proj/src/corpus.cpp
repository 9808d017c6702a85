#include "forge/corpus.hpp"

#include "forge/parallel.hpp"
#include "forge/pipeline.hpp"
#include "forge/seed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace forge {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t kFnvBasis = 0xCBF29CE484222325ULL;

nlohmann::json counts_json(const BehaviorCounts& c) {
  nlohmann::json j = nlohmann::json::object();
  for (Behavior b : kBehaviors) j[std::string(behavior_name(b))] = c[b];
  return j;
}

// Input line plus its position; the document is filled in by the worker.
struct Line {
  std::uint64_t number = 0;
  std::string text;
};

}  // namespace

std::size_t count_whitespace_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::uint64_t estimate_tokens(std::string_view text, double tokens_per_word) {
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(count_whitespace_words(text)) * tokens_per_word));
}

std::optional<Document> parse_document(std::string_view line, double tokens_per_word) {
  nlohmann::json j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) return std::nullopt;
  Document doc;
  doc.text = text->get<std::string>();
  if (auto id = j.find("id"); id != j.end()) {
    if (id->is_string()) {
      doc.id = id->get<std::string>();
    } else if (id->is_number_integer()) {
      doc.id = id->dump();
    } else if (!id->is_null()) {
      return std::nullopt;
    }
  }
  if (auto src = j.find("source"); src != j.end() && src->is_string()) doc.source = src->get<std::string>();
  doc.token_estimate = estimate_tokens(doc.text, tokens_per_word);
  return doc;
}

std::string document_json(const Document& doc) {
  nlohmann::json j = {{"id", doc.id}, {"text", doc.text}, {"source", doc.source}, {"token_estimate", doc.token_estimate}};
  return j.dump();
}

BehaviorLabels BehaviorLabels::from(const BehaviorCounts& counts) {
  BehaviorLabels l;
  for (Behavior b : kBehaviors) l.present[static_cast<std::size_t>(b)] = counts[b] >= 1;
  return l;
}

bool BehaviorLabels::any() const { return std::any_of(present.begin(), present.end(), [](bool p) { return p; }); }

// ------------------------------------------------------------------ QTA

namespace {

constexpr std::array<std::string_view, 3> kQtaTags = {"question", "thinking", "answer"};

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::optional<std::string> xml_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '<') return std::nullopt;
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    std::size_t semi = s.find(';', i);
    if (semi == std::string_view::npos) return std::nullopt;
    std::string_view ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else return std::nullopt;
    i = semi;
  }
  return out;
}

}  // namespace

std::string serialize_qta(const QTADocument& doc) {
  return "<question>" + xml_escape(doc.question) + "</question><thinking>" + xml_escape(doc.thinking) +
         "</thinking><answer>" + xml_escape(doc.answer) + "</answer>";
}

QTADocument parse_qta(std::string_view text) {
  const std::string raw(text);
  std::string_view rest = trim(text);
  std::array<std::string, 3> fields;
  for (std::size_t k = 0; k < kQtaTags.size(); ++k) {
    std::string open = "<" + std::string(kQtaTags[k]) + ">";
    std::string close = "</" + std::string(kQtaTags[k]) + ">";
    if (k > 0) rest = trim(rest);
    if (!rest.starts_with(open)) throw QtaValidationError("expected " + open, raw);
    rest.remove_prefix(open.size());
    std::size_t end = rest.find(close);
    if (end == std::string_view::npos) throw QtaValidationError("missing " + close, raw);
    auto body = xml_unescape(rest.substr(0, end));
    if (!body) throw QtaValidationError("stray markup inside <" + std::string(kQtaTags[k]) + ">", raw);
    fields[k] = std::move(*body);
    rest.remove_prefix(end + close.size());
  }
  if (!trim(rest).empty()) throw QtaValidationError("text after </answer>", raw);
  return QTADocument{std::move(fields[0]), std::move(fields[1]), std::move(fields[2])};
}

// ------------------------------------------------------------------ analyze

double AnalyzeReport::mean(Behavior b) const {
  if (sample.empty()) return 0.0;
  std::uint64_t sum = 0;
  for (const auto& s : sample) sum += s.counts[b];
  return static_cast<double>(sum) / static_cast<double>(sample.size());
}

double AnalyzeReport::proportion(Behavior b) const {
  if (sample.empty()) return 0.0;
  std::uint64_t n = 0;
  for (const auto& s : sample) n += s.counts[b] >= 1;
  return static_cast<double>(n) / static_cast<double>(sample.size());
}

nlohmann::json AnalyzeReport::to_json() const {
  nlohmann::json means = nlohmann::json::object();
  nlohmann::json props = nlohmann::json::object();
  for (Behavior b : kBehaviors) {
    means[std::string(behavior_name(b))] = mean(b);
    props[std::string(behavior_name(b))] = proportion(b);
  }
  return {{"lines", lines},         {"documents", documents}, {"malformed", malformed}, {"complete", complete},
          {"sampled", sample.size()}, {"mean_counts", means},   {"proportion_present", props}};
}

std::string AnalyzeReport::to_csv() const {
  std::ostringstream out;
  out << "behavior,sampled,mean,proportion\n";
  for (Behavior b : kBehaviors) {
    out << behavior_name(b) << ',' << sample.size() << ',' << mean(b) << ',' << proportion(b) << '\n';
  }
  return out.str();
}

namespace {

struct AnalyzeState {
  std::uint64_t seed = 0;
  std::size_t sample = 0;
  std::uint64_t lines = 0;
  std::uint64_t documents = 0;
  std::uint64_t malformed = 0;
  std::uint64_t prefix_hash = kFnvBasis;
  std::vector<SampledDoc> reservoir;
};

void write_checkpoint(const std::filesystem::path& path, const AnalyzeState& st, const Rng& rng) {
  nlohmann::json res = nlohmann::json::array();
  for (const auto& s : st.reservoir) {
    res.push_back({{"id", s.id}, {"counts", s.counts.counts}});
  }
  std::ostringstream engine;
  engine << const_cast<Rng&>(rng).engine();
  nlohmann::json j = {{"seed", st.seed},           {"sample", st.sample},       {"lines", st.lines},
                      {"documents", st.documents}, {"malformed", st.malformed}, {"prefix_hash", st.prefix_hash},
                      {"rng", engine.str()},       {"reservoir", res}};
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

bool read_checkpoint(const std::filesystem::path& path, AnalyzeState& st, Rng& rng) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw CheckpointMismatch("unreadable checkpoint " + path.string());
  try {
    if (j.at("seed").get<std::uint64_t>() != st.seed) {
      throw CheckpointMismatch("checkpoint " + path.string() + " was written with a different seed");
    }
    if (j.at("sample").get<std::size_t>() != st.sample) {
      throw CheckpointMismatch("checkpoint " + path.string() + " was written with a different sample size");
    }
    st.lines = j.at("lines").get<std::uint64_t>();
    st.documents = j.at("documents").get<std::uint64_t>();
    st.malformed = j.at("malformed").get<std::uint64_t>();
    st.prefix_hash = j.at("prefix_hash").get<std::uint64_t>();
    std::istringstream engine(j.at("rng").get<std::string>());
    engine >> rng.engine();
    if (!engine) throw CheckpointMismatch("corrupt generator state in " + path.string());
    st.reservoir.clear();
    for (const auto& r : j.at("reservoir")) {
      SampledDoc s;
      s.id = r.at("id").get<std::string>();
      s.counts.counts = r.at("counts").get<std::array<std::uint64_t, 4>>();
      st.reservoir.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointMismatch("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return true;
}

}  // namespace

AnalyzeReport analyze(std::istream& corpus, const Detector& detector, const AnalyzeOptions& options) {
  if (options.sample == 0) throw std::invalid_argument("sample must be positive");
  AnalyzeState st;
  st.seed = options.seed;
  st.sample = options.sample;
  Rng rng(derive_seed(options.seed, {0x5A3B1E}));

  std::uint64_t resume_at = 0;
  std::uint64_t expected_hash = kFnvBasis;
  if (options.checkpoint && read_checkpoint(*options.checkpoint, st, rng)) {
    resume_at = st.lines;
    expected_hash = st.prefix_hash;
  }

  std::uint64_t hash = kFnvBasis;
  std::uint64_t line_no = 0;
  std::string line;
  bool complete = true;

  // Replay the already-consumed prefix, checking it is the same input.
  while (line_no < resume_at) {
    if (!std::getline(corpus, line)) {
      throw CheckpointMismatch("input is shorter than the checkpointed position");
    }
    hash = fnv1a(hash, line);
    hash = fnv1a(hash, "\n");
    ++line_no;
  }
  if (hash != expected_hash) throw CheckpointMismatch("input differs from the checkpointed corpus");

  std::size_t since_checkpoint = 0;
  while (std::getline(corpus, line)) {
    if (options.stop_after_lines && line_no >= *options.stop_after_lines) {
      complete = false;
      break;
    }
    ++line_no;
    hash = fnv1a(hash, line);
    hash = fnv1a(hash, "\n");
    if (!trim(line).empty()) {
      std::optional<Document> doc = parse_document(line, options.tokens_per_word);
      if (!doc) {
        ++st.malformed;
      } else {
        if (doc->id.empty()) doc->id = "line-" + std::to_string(line_no);
        std::uint64_t seen = st.documents++;
        if (seen < st.sample) {
          st.reservoir.push_back(SampledDoc{doc->id, detector.count(doc->text)});
        } else {
          auto slot = static_cast<std::uint64_t>(rng.uniform(0, static_cast<std::int64_t>(seen)));
          if (slot < st.sample) st.reservoir[slot] = SampledDoc{doc->id, detector.count(doc->text)};
        }
      }
    }
    st.lines = line_no;
    st.prefix_hash = hash;
    if (options.checkpoint && ++since_checkpoint >= std::max<std::size_t>(options.checkpoint_every, 1)) {
      write_checkpoint(*options.checkpoint, st, rng);
      since_checkpoint = 0;
    }
  }
  st.lines = line_no;
  st.prefix_hash = hash;
  if (options.checkpoint) write_checkpoint(*options.checkpoint, st, rng);

  AnalyzeReport report;
  report.lines = st.lines;
  report.documents = st.documents;
  report.malformed = st.malformed;
  report.complete = complete;
  report.sample = std::move(st.reservoir);
  return report;
}

// ------------------------------------------------------------------ partition

nlohmann::json PartitionReport::to_json() const {
  auto set = [](const SetSummary& s) {
    return nlohmann::json{{"documents", s.documents}, {"tokens", s.tokens}, {"shortfall", s.shortfall}};
  };
  return {{"enriched", set(enriched)}, {"minimized", set(minimized)}, {"lines", lines},
          {"malformed", malformed},    {"undetected", undetected},    {"peak_in_flight", peak_in_flight},
          {"warnings", warnings}};
}

namespace {

struct Labelled {
  std::uint64_t line = 0;
  bool blank = false;
  std::optional<Document> doc;
  std::optional<BehaviorCounts> counts;
  std::string error;
};

template <typename Out, typename Transform, typename Sink>
PipelineStats stream_lines(std::istream& in, Transform&& transform, Sink&& sink, unsigned threads,
                           std::size_t max_in_flight, std::uint64_t& lines) {
  std::uint64_t n = 0;
  auto source = [&]() -> std::optional<Line> {
    Line l;
    if (!std::getline(in, l.text)) return std::nullopt;
    l.number = ++n;
    return l;
  };
  PipelineStats stats = run_ordered_pipeline<Line, Out>(source, transform, sink, resolve_threads(threads), max_in_flight);
  lines = n;
  return stats;
}

}  // namespace

PartitionReport partition(std::istream& corpus, const Detector& detector, const PartitionOptions& options,
                          std::ostream& enriched, std::ostream& minimized) {
  if (options.token_budget == 0) throw std::invalid_argument("token_budget must be positive");
  PartitionReport report;
  const std::uint64_t budget = options.token_budget;

  auto transform = [&](Line&& l) {
    Labelled out;
    out.line = l.number;
    if (trim(l.text).empty()) {
      out.blank = true;
      return out;
    }
    out.doc = parse_document(l.text, options.tokens_per_word);
    if (!out.doc) return out;
    if (out.doc->id.empty()) out.doc->id = "line-" + std::to_string(l.number);
    try {
      out.counts = detector.count(out.doc->text);
    } catch (const ClassifierError& e) {
      out.error = e.what();
    }
    return out;
  };

  auto sink = [&](Labelled&& item) {
    if (item.blank) return true;
    if (!item.doc) {
      ++report.malformed;
      return true;
    }
    if (!item.counts) {
      ++report.undetected;
      report.warnings.push_back("document " + item.doc->id + " skipped: " + item.error);
      return true;
    }
    BehaviorLabels labels = BehaviorLabels::from(*item.counts);
    SetSummary& set = labels.any() ? report.enriched : report.minimized;
    std::ostream& out = labels.any() ? enriched : minimized;
    if (set.tokens < budget) {
      nlohmann::json j = {{"id", item.doc->id},
                          {"text", item.doc->text},
                          {"source", item.doc->source},
                          {"token_estimate", item.doc->token_estimate},
                          {"counts", counts_json(*item.counts)}};
      out << j.dump() << '\n';
      ++set.documents;
      set.tokens += item.doc->token_estimate;
    }
    return report.enriched.tokens < budget || report.minimized.tokens < budget;
  };

  PipelineStats stats =
      stream_lines<Labelled>(corpus, transform, sink, options.threads, options.max_in_flight, report.lines);
  report.peak_in_flight = stats.peak_in_flight;
  for (auto [name, set] : {std::pair{"enriched", &report.enriched}, std::pair{"minimized", &report.minimized}}) {
    if (set->tokens < budget) {
      set->shortfall = true;
      report.warnings.push_back(std::string("corpus exhausted: ") + name + " set has " + std::to_string(set->tokens) +
                                " of " + std::to_string(budget) + " tokens");
    }
  }
  return report;
}

// ------------------------------------------------------------------ reformat

std::string_view mode_name(ReformatMode mode) { return mode == ReformatMode::Enriched ? "enriched" : "minimized"; }

std::optional<ReformatMode> mode_from_name(std::string_view name) {
  if (name == "enriched") return ReformatMode::Enriched;
  if (name == "minimized") return ReformatMode::Minimized;
  return std::nullopt;
}

namespace {

bool is_word_char(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '\''; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string match_case(std::string_view original, std::string replacement) {
  if (!original.empty() && std::isupper(static_cast<unsigned char>(original.front())) && !replacement.empty()) {
    replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
  }
  return replacement;
}

std::optional<std::string> first_person_word(const std::string& w) {
  if (w == "we") return "I";
  if (w == "let's") return "let me";
  if (w == "our") return "my";
  if (w == "ours") return "mine";
  if (w == "us") return "me";
  if (w == "ourselves") return "myself";
  if (w == "we're") return "I'm";
  if (w == "we've") return "I've";
  if (w == "we'll") return "I'll";
  if (w == "we'd") return "I'd";
  return std::nullopt;
}

std::vector<std::string_view> split_sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || is_space(text[i + 1]))) {
      auto s = trim(text.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(s);
      start = i + 1;
    }
  }
  if (start < text.size()) {
    auto s = trim(text.substr(start));
    if (!s.empty()) out.push_back(s);
  }
  return out;
}

bool is_problem_statement(std::string_view sentence) {
  static constexpr std::array<std::string_view, 10> kVerbs = {"find",     "compute", "calculate", "solve",  "prove",
                                                              "show",     "determine", "evaluate", "simplify", "given"};
  std::string head = lower(sentence.substr(0, 12));
  for (auto v : kVerbs) {
    if (head.starts_with(v) && (head.size() == v.size() || !std::isalpha(static_cast<unsigned char>(head[v.size()])))) {
      return true;
    }
  }
  return false;
}

bool is_expr_char(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '*' || c == '/' || c == '=' ||
         c == '.' || c == '(' || c == ')' || c == ' ' || c == '^';
}

// The last run of arithmetic characters that holds a digit.
std::optional<std::string> final_numeric_expression(std::string_view sentence) {
  std::optional<std::string> best;
  std::size_t i = 0;
  while (i < sentence.size()) {
    if (!is_expr_char(sentence[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < sentence.size() && is_expr_char(sentence[j])) ++j;
    std::string_view run = trim(sentence.substr(i, j - i));
    while (!run.empty() && (run.back() == '.' || run.back() == '=' || is_space(run.back()))) run.remove_suffix(1);
    while (!run.empty() && (run.front() == '=' || is_space(run.front()))) run.remove_prefix(1);
    // Drop unmatched outer parentheses.
    auto depth = [](std::string_view r) {
      long d = 0;
      for (char c : r) d += c == '(' ? 1 : c == ')' ? -1 : 0;
      return d;
    };
    while (!run.empty() && run.front() == '(' && depth(run) > 0) run.remove_prefix(1);
    while (!run.empty() && run.back() == ')' && depth(run) < 0) run.remove_suffix(1);
    if (std::any_of(run.begin(), run.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      best = std::string(run);
    }
    i = j;
  }
  return best;
}

std::string join(std::span<const std::string_view> parts) {
  std::string out;
  for (auto p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

constexpr int kRewriteMaxTokens = 4096;

std::string rewrite_instructions(ReformatMode mode) {
  std::string common =
      "Rewrite the document as one question, a thinking section and an answer. Reply with exactly "
      "<question>...</question><thinking>...</thinking><answer>...</answer> and nothing else. "
      "Escape &, < and > inside the sections.";
  if (mode == ReformatMode::Enriched) {
    return common +
           " Write the thinking in the first person. Keep every place where the author checks a result, abandons an "
           "approach and goes back, splits the problem into intermediate goals, or works backwards from the goal, and "
           "state those moves explicitly.";
  }
  return common + " Write the thinking as a direct derivation.";
}

}  // namespace

std::string to_first_person(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  bool pending_we = false;  // previous word was a replaced "we"
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      if (!is_space(text[i])) pending_we = false;
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_char(text[j])) ++j;
    std::string_view word = text.substr(i, j - i);
    std::string key = lower(word);
    if (pending_we && (key == "are" || key == "were")) {
      out += key == "are" ? "am" : "was";
      pending_we = false;
    } else if (auto rep = first_person_word(key)) {
      out += (*rep)[0] == 'I' ? *rep : match_case(word, *rep);
      pending_we = key == "we";
    } else {
      out += word;
      pending_we = false;
    }
    i = j;
  }
  return out;
}

QTADocument templated_qta(std::string_view text) {
  std::string folded;
  folded.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    // U+2019 right single quotation mark
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 && static_cast<unsigned char>(text[i + 2]) == 0x99) {
      folded += '\'';
      i += 2;
    } else {
      folded += text[i];
    }
  }
  std::vector<std::string_view> sentences = split_sentences(folded);
  if (sentences.empty()) throw std::invalid_argument("empty document");

  QTADocument qta;
  std::size_t q = sentences.size();
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    if (sentences[k].ends_with('?')) {
      q = k;
      break;
    }
  }
  if (q == sentences.size()) {
    for (std::size_t k = 0; k < sentences.size(); ++k) {
      if (is_problem_statement(sentences[k])) {
        q = k;
        break;
      }
    }
  }
  if (q == sentences.size()) {
    q = 0;
    qta.question = "Explain the following: " + std::string(sentences[0]);
  } else {
    qta.question = std::string(sentences[q]);
  }

  std::vector<std::string_view> rest;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    if (k != q) rest.push_back(sentences[k]);
  }
  std::string_view final_sentence;
  if (rest.size() >= 2) {
    final_sentence = rest.back();
    qta.thinking = join(std::span(rest).first(rest.size() - 1));
  } else if (rest.size() == 1) {
    final_sentence = rest.front();
    qta.thinking = std::string(rest.front());
  } else {
    final_sentence = sentences[q];
  }
  qta.answer = final_numeric_expression(final_sentence).value_or(std::string(final_sentence));
  qta.thinking = to_first_person(qta.thinking);
  return qta;
}

nlohmann::json rewrite_request(const Document& doc, ReformatMode mode, const ClassifierConfig& config) {
  return {{"model", config.model},
          {"temperature", ClassifierConfig::kTemperature},
          {"max_tokens", kRewriteMaxTokens},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", rewrite_instructions(mode)}},
                                  {{"role", "user"}, {"content", doc.text}}})}};
}

Rewriter Rewriter::templated() { return Rewriter{}; }

Rewriter Rewriter::external(ClassifierConfig config, std::shared_ptr<ChatTransport> transport) {
  Rewriter r;
  r.kind_ = RewriterKind::External;
  if (!transport) transport = std::make_shared<HttpChatTransport>(config);
  r.config_ = std::move(config);
  r.transport_ = std::move(transport);
  return r;
}

ReformatResult Rewriter::rewrite(const Document& doc, ReformatMode mode) const {
  if (trim(doc.text).empty()) throw std::invalid_argument("empty document");
  ReformatResult result;
  QTADocument qta;
  if (kind_ == RewriterKind::Templated) {
    qta = templated_qta(doc.text);
  } else {
    try {
      result.raw = complete_with_retry(*transport_, rewrite_request(doc, mode, config_), config_.retry);
    } catch (const TransportError& e) {
      result.drop_reason = std::string("rewriter unavailable: ") + e.what();
      return result;
    }
    try {
      qta = parse_qta(result.raw);
    } catch (const QtaValidationError& e) {
      result.drop_reason = std::string("invalid QTA: ") + e.what();
      return result;
    }
  }
  if (mode == ReformatMode::Enriched && !count_rules(qta.thinking).any()) {
    result.drop_reason = "no behavior cue left in thinking";
    return result;
  }
  result.qta = std::move(qta);
  result.raw.clear();
  return result;
}

nlohmann::json ReformatReport::to_json() const {
  nlohmann::json drops = nlohmann::json::array();
  for (const auto& d : dropped) {
    nlohmann::json j = {{"id", d.id}, {"reason", d.reason}};
    if (!d.raw.empty()) j["raw"] = d.raw;
    drops.push_back(std::move(j));
  }
  return {{"lines", lines}, {"malformed", malformed}, {"kept", kept}, {"dropped", drops}, {"token_sum", token_sum}};
}

ReformatReport reformat_stream(std::istream& corpus, const Rewriter& rewriter, const ReformatOptions& options,
                               std::ostream& out) {
  struct Item {
    bool blank = false;
    std::optional<Document> doc;
    ReformatResult result;
  };
  ReformatReport report;

  auto transform = [&](Line&& l) {
    Item item;
    if (trim(l.text).empty()) {
      item.blank = true;
      return item;
    }
    item.doc = parse_document(l.text, options.tokens_per_word);
    if (!item.doc) return item;
    if (item.doc->id.empty()) item.doc->id = "line-" + std::to_string(l.number);
    if (trim(item.doc->text).empty()) {
      item.result.drop_reason = "empty document";
    } else {
      item.result = rewriter.rewrite(*item.doc, options.mode);
    }
    return item;
  };

  auto sink = [&](Item&& item) {
    if (item.blank) return true;
    if (!item.doc) {
      ++report.malformed;
      return true;
    }
    if (!item.result.qta) {
      report.dropped.push_back(DroppedDoc{item.doc->id, item.result.drop_reason, item.result.raw});
      return true;
    }
    std::string qta = serialize_qta(*item.result.qta);
    report.token_sum += estimate_tokens(qta, options.tokens_per_word);
    ++report.kept;
    out << nlohmann::json{{"id", item.doc->id}, {"qta", qta}}.dump() << '\n';
    return true;
  };

  stream_lines<Item>(corpus, transform, sink, options.threads, options.max_in_flight, report.lines);
  return report;
}

}  // namespace forge
