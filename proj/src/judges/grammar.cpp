#include <algorithm>
#include <set>
#include <sstream>

#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/judges.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

GrammarRegistry::GrammarRegistry(std::vector<std::string> ids) : ids_(std::move(ids)) {
  if (ids_.size() != kSize) {
    throw InvalidArgument("grammar registry must list " + std::to_string(kSize) + " categories, got " +
                          std::to_string(ids_.size()));
  }
  std::set<std::string> seen(ids_.begin(), ids_.end());
  if (seen.size() != ids_.size()) throw InvalidArgument("grammar registry has duplicate ids");
  if (!seen.count(std::string(kNoError))) throw InvalidArgument("grammar registry lacks NoError");
  // NoError goes first so index 0 is the clean class.
  auto it = std::find(ids_.begin(), ids_.end(), kNoError);
  std::rotate(ids_.begin(), it, it + 1);
}

GrammarRegistry GrammarRegistry::parse(std::string_view text) {
  std::vector<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (t.empty() || t[0] == '#') continue;
    ids.emplace_back(t);
  }
  return GrammarRegistry(std::move(ids));
}

const GrammarRegistry& GrammarRegistry::bundled() {
  static const GrammarRegistry r = parse(read_file(asset_path("grammar_registry.txt")));
  return r;
}

std::optional<std::size_t> GrammarRegistry::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return i;
  return std::nullopt;
}

std::string grammar_label_text(std::string_view id) {
  std::string out;
  for (std::size_t i = 0; i < id.size(); ++i) {
    const char c = id[i];
    if (text::is_upper(c) && i > 0) out += ' ';
    out += static_cast<char>(text::is_upper(c) ? c - 'A' + 'a' : c);
  }
  return out;
}

namespace {

bool missing_end_punctuation(std::string_view t) {
  std::size_t end = t.size();
  while (end > 0 && (t[end - 1] == '"' || t[end - 1] == '\'' || t[end - 1] == ')' || t[end - 1] == ']' ||
                     t[end - 1] == '}'))
    --end;
  if (end == 0) return true;
  const char c = t[end - 1];
  return c != '.' && c != '?' && c != '!';
}

bool lowercase_start(std::string_view t) {
  for (char c : t) {
    if (text::is_alpha(c)) return text::is_lower(c);
    if (text::is_digit(c)) return false;
  }
  return false;
}

bool unbalanced(std::string_view t) {
  std::vector<char> stack;
  int quotes = 0;
  for (char c : t) {
    if (c == '(' || c == '[' || c == '{') stack.push_back(c);
    if (c == ')' || c == ']' || c == '}') {
      const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (stack.empty() || stack.back() != open) return true;
      stack.pop_back();
    }
    if (c == '"') ++quotes;
  }
  return !stack.empty() || quotes % 2 != 0;
}

}  // namespace

StyleFlags style_flags(std::string_view raw) {
  const auto t = text::trim(raw);
  StyleFlags f;
  if (t.empty()) return f;
  f.missing_end_punctuation = missing_end_punctuation(t);
  f.lowercase_start = lowercase_start(t);
  f.double_space = t.find("  ") != std::string_view::npos;
  f.unbalanced_delimiter = unbalanced(t);
  return f;
}

GrammarLabel RuleGrammarJudge::classify(std::string_view raw) const {
  const auto f = style_flags(raw);
  if (f.missing_end_punctuation) return {std::string(kPunctuationError), 1.0};
  if (f.lowercase_start) return {std::string(kCapitalizationError), 1.0};
  if (f.double_space) return {std::string(kSpacingError), 1.0};
  if (f.unbalanced_delimiter) return {std::string(kUnbalancedDelimiter), 1.0};
  return {std::string(kNoError), 1.0};
}

}  // namespace vicsim
