#include <doctest.h>

#include <algorithm>
#include <set>

#include "vicsim/error.hpp"
#include "vicsim/keyinfo.hpp"
#include "vicsim/rng.hpp"

using namespace vicsim;

namespace {

const char* kFig3Scenario =
    "The user was concerned about loud banging noises coming from upstairs, which they believed to be in the "
    "second floor of their building. The user provided their location as \"courtyard Apartments\" and shared "
    "details about the noise, including that it was coming from above them and that it happened during nighttime "
    "and afternoon. The user also mentioned that they were a student at UCLA and that they had not reported the "
    "noise to the university. The dispatcher sent an officer to the location and the user spoke with the officer, "
    "Jane. The officer confirmed that the noise was coming from upstairs and that they would investigate further.";

const char* kCortrightScenario =
    "The user reported a classmate who was extremely disrespectful towards a teacher and made the entire class "
    "super uncomfortable by pacing the classroom and crying and screaming and shouting. The user provided the "
    "classroom number ([Dante] room ###) and the professor's name [Cortright].";

const char* kCortrightUtterance = "It was yesterday during our 2nd period class. The teacher is Mrs. Cortright.";

TypedKeywordSet set_of(std::initializer_list<std::pair<EntityType, const char*>> items) {
  TypedKeywordSet s;
  for (const auto& [t, w] : items) s.insert(t, w);
  return s;
}

bool has(const TypedKeywordSet& s, EntityType t, const std::string& surface) {
  return std::any_of(s.begin(), s.end(), [&](const TypedKeyword& k) { return k.type == t && k.surface == surface; });
}

std::set<std::string> normalized(const TypedKeywordSet& s) {
  auto v = s.normalized_strings();
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("normalization folds case and strips punctuation") {
  CHECK(normalize_keyword("Cortright") == "cortright");
  CHECK(normalize_keyword("St.") == "st");
  CHECK(normalize_keyword("10:30am") == "1030am");
  TypedKeyword k(EntityType::PERSON, "Jane");
  CHECK(k.normalized == "jane");
  CHECK(k.surface == "Jane");
}

TEST_CASE("keyword set dedups on type and normalized form") {
  TypedKeywordSet s;
  CHECK(s.insert(EntityType::PERSON, "Jane"));
  CHECK_FALSE(s.insert(EntityType::PERSON, "JANE"));
  CHECK(s.insert(EntityType::MISC, "jane"));
  CHECK_FALSE(s.insert(EntityType::MISC, "..."));
  CHECK(s.size() == 2);
  CHECK(s.normalized_strings().size() == 1);
}

TEST_CASE("rule extractor finds the listed scenario keywords") {
  RuleBasedNer ner;
  auto kws = extract_keywords(kFig3Scenario, ner, KeywordSource::scenario);
  CHECK(has(kws, EntityType::ORDINAL, "second"));
  CHECK(has(kws, EntityType::TIME, "nighttime"));
  CHECK(has(kws, EntityType::TIME, "afternoon"));
  CHECK(has(kws, EntityType::TITLE, "student"));
  CHECK(has(kws, EntityType::ORGANIZATION, "UCLA"));
  CHECK(has(kws, EntityType::PERSON, "Jane"));
  CHECK_FALSE(has(kws, EntityType::TITLE, "user"));
}

TEST_CASE("rule extractor edge cases") {
  RuleBasedNer ner;
  CHECK(extract_keywords("", ner).empty());
  CHECK(extract_keywords("   ", ner).empty());

  auto officer = extract_keywords("Officer Jane arrived at 10:30am", ner);
  REQUIRE(officer.size() == 2);
  CHECK(officer.items()[0] == TypedKeyword(EntityType::PERSON, "Jane"));
  CHECK(officer.items()[1] == TypedKeyword(EntityType::TIME, "10:30am"));

  // Mask tags are never keywords.
  CHECK(extract_keywords("People are going through rooms at [FAC] right now", ner).empty());
  // Multi-word locations are split into tokens.
  auto park = extract_keywords("The one near City Park", ner);
  CHECK(normalized(park) == std::set<std::string>{"one", "city", "park"});
}

TEST_CASE("keyword overlap from raw scenario and utterance text") {
  RuleBasedNer ner;
  auto truth = extract_keywords(kCortrightScenario, ner, KeywordSource::scenario);
  auto utt = extract_keywords(kCortrightUtterance, ner);
  CHECK(normalized(truth) == std::set<std::string>{"dante", "cortright", "professor", "teacher"});
  CHECK(normalized(utt) == std::set<std::string>{"2nd", "cortright", "yesterday", "teacher"});
  auto score = match_keywords(utt, truth);
  CHECK(std::set<std::string>(score.matched.begin(), score.matched.end()) ==
        std::set<std::string>{"cortright", "teacher"});
  CHECK(score.precision == 0.5);
  CHECK(score.recall == 0.5);
}

TEST_CASE("extractor on a hallucinated reply") {
  RuleBasedNer ner;
  auto truth = extract_keywords(
      "The user reported two dogs that were roaming without their owner in Downtown and Los Angeles. The user "
      "provided a detailed description of the dogs, including their colors and breeds. The user also shared that "
      "they had posted about the dogs on a Nextdoor page.",
      ner, KeywordSource::scenario);
  auto model = extract_keywords(
      "They are both black and brown, medium size, and seem to be a mix of German Shepherd and Labrador.", ner);
  CHECK(normalized(truth) == std::set<std::string>{"angeles", "los", "downtown", "owner", "two", "nextdoor"});
  CHECK(normalized(model) == std::set<std::string>{"labrador", "shepherd", "german"});
  auto score = match_keywords(model, truth);
  CHECK(score.precision == 0.0);
  CHECK(is_low_precision(score));
}

TEST_CASE("match_keywords conventions") {
  auto utt = set_of({{EntityType::ORDINAL, "2nd"},
                     {EntityType::PERSON, "Cortright"},
                     {EntityType::DATE, "yesterday"},
                     {EntityType::TITLE, "teacher"}});
  auto truth = set_of({{EntityType::PERSON, "Dante"},
                       {EntityType::PERSON, "Cortright"},
                       {EntityType::TITLE, "professor"},
                       {EntityType::TITLE, "teacher"}});
  auto s = match_keywords(utt, truth);
  CHECK(s.matched == std::vector<std::string>{"cortright", "teacher"});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == doctest::Approx(0.5).epsilon(1e-12));

  auto same = match_keywords(truth, truth);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  auto empty = match_keywords(TypedKeywordSet{}, truth);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);

  // Typed matching distinguishes entity types.
  auto typed_utt = set_of({{EntityType::MISC, "Cortright"}});
  CHECK(match_keywords(typed_utt, truth).counts.matched == 1);
  CHECK(match_keywords(typed_utt, truth, MatchMode::typed).counts.matched == 0);
}

TEST_CASE("aggregation is micro by default") {
  auto one = aggregate_overlap({{2, 4, 4}});
  CHECK(one.micro.precision == 0.5);
  CHECK(one.micro.recall == 0.5);

  auto two = aggregate_overlap({{1, 2, 4}, {3, 3, 4}});
  CHECK(two.micro.precision == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(two.micro.recall == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two.macro.precision == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(two.macro.recall == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("corpus faithfulness flags scenarios without keywords") {
  RuleBasedNer ner;
  CHECK_THROWS_AS(corpus_faithfulness({}, ner), InvalidArgument);
  auto summary = corpus_faithfulness({{kCortrightUtterance, kCortrightScenario}, {"hello", "nothing to see here"}}, ner);
  CHECK(summary.skipped == 1);
  CHECK(summary.items[1].skipped);
  CHECK(summary.micro.precision == 0.5);
  CHECK(summary.micro.recall == 0.5);
}

TEST_CASE("low precision threshold is strict") {
  auto below = score_from_counts({39, 100, 100});
  auto at = score_from_counts({40, 100, 100});
  CHECK(is_low_precision(below));
  CHECK_FALSE(is_low_precision(at));
  // No extra entity introduced -> never flagged.
  CHECK_FALSE(is_low_precision(score_from_counts({0, 0, 5})));

  KeywordPair dog{set_of({{EntityType::MISC, "Labrador"}, {EntityType::MISC, "Shepherd"}, {EntityType::MISC, "German"}}),
                  set_of({{EntityType::LOCATION, "Angeles"},
                          {EntityType::LOCATION, "Los"},
                          {EntityType::LOCATION, "Downtown"},
                          {EntityType::TITLE, "owner"},
                          {EntityType::NUMBER, "two"},
                          {EntityType::ORGANIZATION, "Nextdoor"}})};
  CHECK(low_precision_flags({dog}) == std::vector<std::size_t>{0});
}

TEST_CASE("unknown NER backend is unavailable") {
  CHECK_THROWS_AS(make_ner_backend("corenlp"), BackendUnavailable);
  CHECK(make_ner_backend("rule")->name() == "rule");
}

// Brute-force pairwise oracle over small random typed sets.
TEST_CASE("match_keywords equals pairwise oracle and satisfies P/R symmetry") {
  const char* pool[] = {"Jane", "jane", "UCLA", "second", "Park", "park", "two", "Two", "noon", "Kevin"};
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    TypedKeywordSet a, b;
    const auto na = rng.index(7);
    const auto nb = 1 + rng.index(6);
    while (a.size() < na) a.insert(kAllEntityTypes[rng.index(9)], pool[rng.index(10)]);
    while (b.size() < nb) b.insert(kAllEntityTypes[rng.index(9)], pool[rng.index(10)]);

    std::vector<std::string> ua, tb;
    for (const auto& k : a) {
      bool dup = false;
      for (const auto& s : ua) dup = dup || s == k.normalized;
      if (!dup) ua.push_back(k.normalized);
    }
    for (const auto& k : b) {
      bool dup = false;
      for (const auto& s : tb) dup = dup || s == k.normalized;
      if (!dup) tb.push_back(k.normalized);
    }
    std::size_t m = 0;
    for (const auto& x : ua) {
      bool hit = false;
      for (const auto& y : tb) hit = hit || x == y;
      m += hit;
    }
    auto s = match_keywords(a, b);
    CHECK(s.counts.matched == m);
    CHECK(s.precision == (ua.empty() ? 0.0 : double(m) / double(ua.size())));
    CHECK(s.recall == double(m) / double(tb.size()));
    if (!a.empty()) CHECK(s.precision == match_keywords(b, a).recall);
  }
}
