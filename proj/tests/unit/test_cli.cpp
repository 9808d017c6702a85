#include "doctest.h"

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

using forge::cli::dispatch;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("puzzle gen prints JSONL to stdout") {
  Result r = run({"puzzle", "gen", "--seed", "7", "--count", "10"});
  CHECK(r.code == 0);
  CHECK(lines(r.out) == 10);
  auto first = nlohmann::json::parse(r.out.substr(0, r.out.find('\n')));
  CHECK(first.contains("id"));
  CHECK(first["numbers"].size() == 3);
  CHECK(run({"puzzle", "gen", "--seed", "7", "--count", "10", "--threads", "1"}).out == r.out);
}

TEST_CASE("usage errors exit 2 with a suggestion") {
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  Result typo = run({"puzzle", "gen", "--sed", "7", "--count", "3"});
  CHECK(typo.code == 2);
  CHECK(typo.err.find("did you mean '--seed'") != std::string::npos);
  Result sub = run({"primes", "biuld"});
  CHECK(sub.code == 2);
  CHECK(sub.err.find("did you mean 'build'") != std::string::npos);
  CHECK(run({"primes", "build", "--profile", "verification_only"}).code == 2);
  CHECK(run({"puzzle", "solve", "--numbers", "1,2", "--target", "3"}).code == 2);
}

TEST_CASE("help and version exit 0") {
  Result help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("amplify") != std::string::npos);
  Result version = run({"--version"});
  CHECK(version.code == 0);
  CHECK(version.out.starts_with("forge "));
}

TEST_CASE("domain errors exit 1") {
  Result missing = run({"score", "--puzzles", "/nonexistent/p.jsonl", "--responses", "/nonexistent/r.jsonl"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("cannot read") != std::string::npos);
  Result json_log = run({"--json", "score", "--puzzles", "/nonexistent/p.jsonl", "--responses", "/nonexistent/r"});
  CHECK(json_log.code == 1);
  auto line = nlohmann::json::parse(json_log.err.substr(0, json_log.err.find('\n')));
  CHECK(line["level"] == "error");
}

TEST_CASE("score writes one record per response and a manifest") {
  auto dir = std::filesystem::temp_directory_path() / ("forge-cli-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  {
    std::ofstream p(dir / "p.jsonl");
    p << R"({"id":"w","numbers":[25,30,3,4],"target":32,"seed":0})" << '\n';
    std::ofstream r(dir / "r.jsonl");
    r << R"({"puzzle_id":"w","text":"<answer>(30-25+3)*4</answer>"})" << '\n'
      << R"({"puzzle_id":"w","text":"<answer>25+30+3+4</answer>"})" << '\n'
      << R"({"puzzle_id":"w","text":"(30-25+3)*4"})" << '\n';
  }
  std::string out = (dir / "rewards.jsonl").string();
  Result r = run({"score", "--puzzles", (dir / "p.jsonl").string(), "--responses", (dir / "r.jsonl").string(),
                  "--out", out});
  CHECK(r.code == 0);
  std::ifstream in(out);
  std::vector<double> totals;
  for (std::string line; std::getline(in, line);) totals.push_back(nlohmann::json::parse(line)["total"]);
  CHECK(totals == std::vector<double>{1.0, 0.1, 0.0});
  std::ifstream m(out + ".manifest.json");
  auto manifest = nlohmann::json::parse(m);
  CHECK(manifest["files"]["rewards.jsonl"]["records"] == 3);
  CHECK(manifest["files"]["rewards.jsonl"]["sha256"] == forge::cli::sha256_file(out));

  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << R"({"puzzle_id":"nope","text":"x"})" << '\n';
  }
  CHECK(run({"score", "--puzzles", (dir / "p.jsonl").string(), "--responses", (dir / "bad.jsonl").string()}).code == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sha256 of a known file") {
  auto path = std::filesystem::temp_directory_path() / ("forge-sha-" + std::to_string(::getpid()));
  { std::ofstream(path) << "abc"; }
  CHECK(forge::cli::sha256_file(path.string()) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::filesystem::remove(path);
}
