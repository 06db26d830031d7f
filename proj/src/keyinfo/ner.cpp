#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"
#include "vicsim/keyinfo.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {

using WordSet = std::set<std::string, std::less<>>;

const WordSet& stopwords() {
  static const WordSet words = {
      "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are",
      "around", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
      "by", "can", "can't", "could", "did", "didn't", "do", "does", "doesn't", "doing", "don't", "down",
      "during", "each", "either", "else", "even", "ever", "every", "few", "for", "from", "further", "had",
      "has", "have", "having", "he", "he's", "her", "here", "hers", "herself", "hi", "hello", "him",
      "himself", "his", "how", "i", "i'd", "i'll", "i'm", "i've", "if", "in", "into", "is", "isn't", "it",
      "it's", "its", "itself", "just", "let", "let's", "may", "maybe", "me", "might", "more", "most", "must",
      "my", "myself", "no", "nor", "not", "now", "of", "off", "ok", "okay", "on", "once", "only", "or",
      "other", "our", "ours", "ourselves", "out", "over", "own", "please", "same", "she", "she's", "should",
      "so", "some", "such", "than", "thank", "thanks", "that", "that's", "the", "their", "theirs", "them",
      "themselves", "then", "there", "there's", "these", "they", "they're", "they've", "this", "those",
      "through", "to", "too", "under", "until", "up", "us", "very", "was", "wasn't", "we", "we'll", "we're",
      "were", "what", "what's", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
      "would", "yes", "yeah", "you", "you're", "your", "yours", "yourself", "yourselves",
      // role words
      "user", "users", "dispatcher", "dispatchers",
      // all-caps noise
      "id", "tv", "pm",
  };
  return words;
}

const WordSet& honorifics() {
  static const WordSet words = {"mr", "mrs", "ms", "miss", "dr", "prof", "sir", "madam"};
  return words;
}

const WordSet& abbreviations() {
  static const WordSet words = {"mr", "mrs", "ms", "dr", "prof", "st", "ave", "rd", "jr", "sr", "mt", "vs"};
  return words;
}

const WordSet& titles() {
  static const WordSet words = {
      "student", "students", "professor", "teacher", "teachers", "officer", "officers", "owner", "manager",
      "guard", "coach", "dean", "doctor", "nurse", "driver", "director", "president", "chief", "sergeant",
      "detective", "instructor", "supervisor", "janitor", "custodian", "librarian", "principal", "counselor",
      "advisor", "landlord", "captain", "lieutenant", "deputy", "trooper", "chancellor", "provost"};
  return words;
}

const WordSet& ordinals() {
  static const WordSet words = {"first",  "second", "third",   "fourth",  "fifth",     "sixth",   "seventh",
                                "eighth", "ninth",  "tenth",   "eleventh", "twelfth",  "last"};
  return words;
}

const WordSet& number_words() {
  static const WordSet words = {"zero",    "one",      "two",     "three",   "four",     "five",    "six",
                                "seven",   "eight",    "nine",    "ten",     "eleven",   "twelve",  "thirteen",
                                "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
                                "thirty",  "forty",    "fifty",   "sixty",   "seventy",  "eighty",  "ninety",
                                "hundred", "thousand", "dozen"};
  return words;
}

const WordSet& time_words() {
  static const WordSet words = {"morning", "afternoon", "evening", "night",  "nighttime", "tonight", "noon",
                                "midnight", "overnight", "hour",   "hours",  "minute",    "minutes", "daytime"};
  return words;
}

const WordSet& date_words() {
  static const WordSet words = {"yesterday", "today",    "tomorrow", "weekend",  "monday",    "tuesday",
                                "wednesday", "thursday", "friday",   "saturday", "sunday",    "christmas",
                                "thanksgiving", "easter", "halloween", "week",   "weekday"};
  return words;
}

const WordSet& months() {
  static const WordSet words = {"january", "february", "march",     "april",   "may",      "june",
                                "july",    "august",   "september", "october", "november", "december"};
  return words;
}

const WordSet& location_suffixes() {
  static const WordSet words = {
      "street", "st", "avenue", "ave", "road", "rd", "drive", "dr", "lane", "boulevard", "blvd", "way", "park",
      "hall", "halls", "apartments", "apartment", "plaza", "lot", "gym", "building", "center", "centre",
      "library", "campus", "heights", "tower", "towers", "square", "court", "garage", "quad", "commons",
      "house", "village", "city", "county", "angeles", "york", "downtown", "arena", "stadium", "station"};
  return words;
}

const WordSet& org_suffixes() {
  static const WordSet words = {"university", "college", "department", "police", "company", "inc", "corp",
                                "club", "school", "institute", "association", "society", "foundation",
                                "agency", "bank", "hospital", "church"};
  return words;
}

bool contains(const WordSet& set, std::string_view w) { return set.find(w) != set.end(); }

struct Token {
  std::string surface;
  std::string lower;
  bool sentence_initial = false;
  bool break_before = false;  // punctuation or tag between this and the previous token
};

std::string fold_apostrophes(std::string s) {
  // U+2019 right single quotation mark -> '
  return text::replace_all(std::move(s), "\xE2\x80\x99", "'");
}

bool word_char(std::string_view t, std::size_t i) {
  const char c = t[i];
  if (text::is_alnum(c)) return true;
  const bool prev_alnum = i > 0 && text::is_alnum(t[i - 1]);
  const bool next_alnum = i + 1 < t.size() && text::is_alnum(t[i + 1]);
  if (c == '\'') return prev_alnum && next_alnum && text::is_alpha(t[i + 1]);
  if (c == ':' || c == '/') return prev_alnum && next_alnum && text::is_digit(t[i - 1]) && text::is_digit(t[i + 1]);
  return false;
}

std::vector<Token> tokenize(std::string_view raw) {
  const std::string owned = fold_apostrophes(std::string(raw));
  std::string_view t = owned;
  std::vector<Token> tokens;
  bool sentence_start = true;
  bool pending_break = true;
  std::size_t i = 0;
  while (i < t.size()) {
    const char c = t[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '\n') {
      sentence_start = pending_break = true;
      ++i;
      continue;
    }
    if (c == '[') {
      auto tags = find_mask_tags(t.substr(i));
      if (!tags.empty() && tags.front().span.begin == 0) {
        i += tags.front().span.end;
        pending_break = true;
        sentence_start = false;
        continue;
      }
    }
    if (!word_char(t, i)) {
      if (c == '.' || c == '!' || c == '?') sentence_start = true;
      pending_break = true;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < t.size() && word_char(t, j)) ++j;
    Token tok;
    tok.surface = std::string(t.substr(i, j - i));
    if (tok.surface.size() > 2 && tok.surface.ends_with("'s")) tok.surface.resize(tok.surface.size() - 2);
    tok.lower = text::to_lower(tok.surface);
    tok.sentence_initial = sentence_start;
    tok.break_before = pending_break;
    tokens.push_back(std::move(tok));
    sentence_start = pending_break = false;
    i = j;
    // "Mrs." / "St." do not end a sentence.
    if (i < t.size() && t[i] == '.' && contains(abbreviations(), tokens.back().lower)) ++i;
  }
  return tokens;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!text::is_digit(c)) return false;
  }
  return true;
}

bool is_clock(std::string_view lower) {
  // h:mm, h:mm(am|pm), h(am|pm)
  std::string_view s = lower;
  if (s.ends_with("am") || s.ends_with("pm")) s.remove_suffix(2);
  const bool had_meridiem = s.size() != lower.size();
  auto colon = s.find(':');
  if (colon == std::string_view::npos) return had_meridiem && !s.empty() && s.size() <= 2 && all_digits(s);
  return colon >= 1 && colon <= 2 && s.size() - colon == 3 && all_digits(s.substr(0, colon)) &&
         all_digits(s.substr(colon + 1));
}

bool is_numeric_ordinal(std::string_view lower) {
  if (lower.size() < 3) return false;
  auto suffix = lower.substr(lower.size() - 2);
  if (suffix != "st" && suffix != "nd" && suffix != "rd" && suffix != "th") return false;
  return all_digits(lower.substr(0, lower.size() - 2));
}

bool is_date_pattern(std::string_view lower) {
  if (all_digits(lower) && lower.size() == 4 && (lower.starts_with("19") || lower.starts_with("20"))) return true;
  auto slash = lower.find('/');
  return slash != std::string_view::npos && slash > 0;
}

bool is_capitalized(std::string_view s) {
  if (s.empty() || !text::is_upper(s.front())) return false;
  for (char c : s.substr(1)) {
    if (text::is_lower(c)) return true;
  }
  return s.size() == 1;
}

bool is_all_caps(std::string_view s) {
  std::size_t letters = 0;
  for (char c : s) {
    if (text::is_lower(c)) return false;
    letters += text::is_upper(c);
  }
  return letters >= 2;
}

bool is_mixed_lower_start(std::string_view s) {
  if (s.empty() || !text::is_lower(s.front())) return false;
  for (char c : s) {
    if (text::is_upper(c)) return true;
  }
  return false;
}

std::optional<EntityType> lexical_type(const Token& tok) {
  const auto& w = tok.lower;
  if (is_clock(w)) return EntityType::TIME;
  if (contains(ordinals(), w) || is_numeric_ordinal(w)) return EntityType::ORDINAL;
  if (contains(date_words(), w) || is_date_pattern(w)) return EntityType::DATE;
  if (contains(months(), w) && is_capitalized(tok.surface)) return EntityType::DATE;
  if (all_digits(w) || contains(number_words(), w)) return EntityType::NUMBER;
  if (contains(time_words(), w)) return EntityType::TIME;
  return std::nullopt;
}

}  // namespace

std::vector<TypedKeyword> RuleBasedNer::recognize(std::string_view text) const {
  const auto tokens = tokenize(text);
  std::vector<TypedKeyword> out;
  std::vector<std::size_t> run;

  auto flush_run = [&]() {
    if (run.empty()) return;
    const auto& last = tokens[run.back()].lower;
    EntityType type = EntityType::PERSON;
    bool suffixed = false;
    if (contains(location_suffixes(), last)) {
      type = EntityType::LOCATION;
      suffixed = true;
    } else if (contains(org_suffixes(), last)) {
      type = EntityType::ORGANIZATION;
      suffixed = true;
    }
    std::size_t begin = 0;
    if (tokens[run.front()].sentence_initial && !(suffixed && run.size() >= 2)) begin = 1;
    for (std::size_t k = begin; k < run.size(); ++k) out.emplace_back(type, tokens[run[k]].surface);
    run.clear();
  };

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    if (tok.break_before) flush_run();
    const bool next_is_name =
        i + 1 < tokens.size() && !tokens[i + 1].break_before && is_capitalized(tokens[i + 1].surface);

    if (contains(stopwords(), tok.lower) && !(tok.lower == "may" && is_capitalized(tok.surface) &&
                                              !tok.sentence_initial)) {
      flush_run();
      continue;
    }
    if (auto type = lexical_type(tok)) {
      flush_run();
      out.emplace_back(*type, tok.surface);
      continue;
    }
    if (contains(honorifics(), tok.lower)) {
      flush_run();
      continue;
    }
    if (contains(titles(), tok.lower)) {
      flush_run();
      if (!next_is_name) out.emplace_back(EntityType::TITLE, tok.surface);
      continue;
    }
    if (is_all_caps(tok.surface)) {
      flush_run();
      out.emplace_back(EntityType::ORGANIZATION, tok.surface);
      continue;
    }
    if (is_mixed_lower_start(tok.surface)) {
      flush_run();
      out.emplace_back(EntityType::MISC, tok.surface);
      continue;
    }
    if (is_capitalized(tok.surface) && tok.surface.size() > 1) {
      if (tok.sentence_initial) flush_run();
      run.push_back(i);
      continue;
    }
    flush_run();
  }
  flush_run();
  return out;
}

ExternalNer::ExternalNer(std::string command) : command_(std::move(command)) {
  if (command_.empty()) {
    if (const char* env = std::getenv("VICSIM_NER_COMMAND"); env != nullptr) command_ = env;
  }
  if (command_.empty()) throw BackendUnavailable("external NER backend: VICSIM_NER_COMMAND is not set");
}

std::vector<TypedKeyword> ExternalNer::recognize(std::string_view text) const {
  auto tmp = std::filesystem::temp_directory_path() /
             ("vicsim-ner-" + std::to_string(text::fnv1a(text)) + "-" + std::to_string(std::rand()) + ".txt");
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
  }
  const std::string cmd = command_ + " < '" + tmp.string() + "'";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    std::filesystem::remove(tmp);
    throw BackendFailure("external NER backend could not start: " + command_);
  }
  std::string output;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
  const int status = ::pclose(pipe);
  std::filesystem::remove(tmp);
  if (status != 0) throw BackendFailure("external NER backend exited with status " + std::to_string(status));

  std::vector<TypedKeyword> out;
  std::size_t pos = 0;
  while (pos < output.size()) {
    auto eol = output.find('\n', pos);
    if (eol == std::string::npos) eol = output.size();
    std::string_view line(output.data() + pos, eol - pos);
    pos = eol + 1;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) continue;
    auto type = parse_entity_type(text::trim(line.substr(0, tab)));
    auto surface = text::trim(line.substr(tab + 1));
    if (type && !surface.empty()) out.emplace_back(*type, std::string(surface));
  }
  return out;
}

std::unique_ptr<NerBackend> make_ner_backend(std::string_view name) {
  if (name == "rule") return std::make_unique<RuleBasedNer>();
  if (name == "external") return std::make_unique<ExternalNer>();
  throw BackendUnavailable("unknown NER backend '" + std::string(name) + "'");
}

}  // namespace vicsim
