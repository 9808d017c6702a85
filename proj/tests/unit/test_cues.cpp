#include "doctest.h"

#include "forge/cues.hpp"
#include "forge/seed.hpp"

using namespace forge;

namespace {

BehaviorCounts counts(std::uint64_t bt, std::uint64_t ver, std::uint64_t sub, std::uint64_t bwd) {
  BehaviorCounts c;
  c.counts = {bt, ver, sub, bwd};
  return c;
}

}  // namespace

TEST_CASE("count_rules on the canonical cue sentences") {
  CHECK(count_rules("This approach won't work because the sum is too big.") == counts(1, 0, 0, 0));
  CHECK(count_rules("") == counts(0, 0, 0, 0));
  CHECK(count_rules("This sequence results in 1, which is not equal to 22") == counts(0, 1, 0, 0));
  CHECK(count_rules("8*35 is 280 which is too high") == counts(0, 1, 0, 0));
  CHECK(count_rules("To solve this, we first need to find a factor.") == counts(0, 0, 1, 0));
  CHECK(count_rules("To reach the target of 75, we need a number divisible by 5.") == counts(0, 0, 0, 1));
  CHECK(count_rules("Working backwards from 24 helps.") == counts(0, 0, 0, 1));
  CHECK(count_rules("Let's verify this result by adding.") == counts(0, 1, 0, 0));
}

TEST_CASE("count_rules ignores case, curly apostrophes and whitespace layout") {
  BehaviorCounts base = count_rules("This approach won't work because x. Let's verify: y.");
  CHECK(count_rules("  THIS   APPROACH\nwon\xE2\x80\x99t work because x.\tlet\xE2\x80\x99s VERIFY: y.  ") == base);
  CHECK(base == counts(1, 1, 0, 0));
}

TEST_CASE("overlapping cues count once, earliest then longest") {
  // "that doesn't work, going back" swallows the nested "going back to".
  CHECK(count_rules("That doesn't work, going back to the start.") == counts(1, 0, 0, 0));
  auto m = find_cues("this approach won't work because of 3");
  REQUIRE(m.size() == 1);
  CHECK(m[0].end - m[0].begin == std::string("this approach won't work because").size());
  CHECK(count_rules("Let me check. Let me check.") == counts(0, 2, 0, 0));
}

TEST_CASE("gap cues stop at sentence ends") {
  CHECK(count_rules("To reach the target of 3.5, we need more.") == counts(0, 0, 0, 1));
  CHECK(count_rules("To reach the target of 10. Then we need more.") == counts(0, 0, 0, 0));
  CHECK(count_rules("To reach the target of " + std::string(80, 'x') + " we need more.") == counts(0, 0, 0, 0));
}

TEST_CASE("every phrase template carries exactly its own behavior") {
  const auto& reg = CueRegistry::instance();
  std::vector<std::pair<std::string_view, std::string>> values = {
      {"value", "20"}, {"target", "32"}, {"a", "30"}, {"b", "25"}, {"steps", "30 - 25 = 5, 5 + 3 = 8, 8 * 4 = 32"},
      {"need", "8"}, {"relation", "8 * 4 = 32"}, {"rest", "30, 25, 3"}};
  for (const PhraseTemplate& t : reg.templates()) {
    std::string text = fill_template(t.text, values);
    CAPTURE(text);
    BehaviorCounts c = count_rules(text);
    for (Behavior b : kBehaviors) CHECK(c[b] == (b == t.behavior ? 1u : 0u));
  }
}

TEST_CASE("property: concatenation loses at most the junction") {
  const auto& reg = CueRegistry::instance();
  std::vector<std::string> pieces = {"Trying 3+4 gives 7.", "We have the numbers.", "so", "going", "back to",
                                     "which is not", "equal to 5", "first", "we need"};
  for (const Cue& c : reg.cues()) {
    std::string s;
    for (const auto& seg : c.segments) s += seg + " 12 ";
    pieces.push_back(s);
  }
  Rng rng(99);
  for (int i = 0; i < 400; ++i) {
    std::string a, b;
    for (int k = 0; k < 4; ++k) a += pieces[rng.index(pieces.size())] + " ";
    for (int k = 0; k < 4; ++k) b += pieces[rng.index(pieces.size())] + " ";
    BehaviorCounts ca = count_rules(a), cb = count_rules(b), cab = count_rules(a + b);
    std::uint64_t lhs = 0, rhs = 0;
    for (Behavior beh : kBehaviors) {
      lhs += cab[beh];
      rhs += ca[beh] + cb[beh];
    }
    CHECK(lhs + 4 >= rhs);
  }
}

TEST_CASE("behavior names round trip") {
  for (Behavior b : kBehaviors) CHECK(behavior_from_name(behavior_name(b)) == b);
  CHECK_FALSE(behavior_from_name("analogy"));
}
