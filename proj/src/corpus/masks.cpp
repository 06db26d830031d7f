#include <map>

#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

bool is_mask_tag(std::string_view s) {
  if (s.size() < 3 || s.front() != '[' || s.back() != ']') return false;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (!text::is_upper(s[i]) && s[i] != '_') return false;
  }
  return true;
}

std::vector<MaskTag> find_mask_tags(std::string_view text, std::size_t utterance) {
  std::vector<MaskTag> tags;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '[') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (text::is_upper(text[j]) || text[j] == '_')) ++j;
    if (j < text.size() && text[j] == ']' && j > i + 1) {
      tags.push_back({utterance, std::string(text.substr(i, j + 1 - i)), {i, j + 1}});
      i = j + 1;
    } else {
      ++i;
    }
  }
  return tags;
}

std::vector<MaskTag> enumerate_mask_tags(const Dialogue& dialogue) {
  std::vector<MaskTag> all;
  for (const auto& u : dialogue.utterances) {
    auto tags = find_mask_tags(u.text, u.index);
    all.insert(all.end(), tags.begin(), tags.end());
  }
  return all;
}

TableFiller::TableFiller(std::map<std::string, std::vector<std::string>> table) : table_(std::move(table)) {}

TableFiller& TableFiller::add(std::string tag, std::string replacement) {
  table_[std::move(tag)].push_back(std::move(replacement));
  return *this;
}

std::string TableFiller::fill(std::string_view tag, std::size_t occurrence) {
  std::string key(tag);
  if (is_mask_tag(key)) key = key.substr(1, key.size() - 2);
  auto it = table_.find(key);
  if (it == table_.end() || it->second.empty()) {
    throw InvalidArgument("no filler entry for mask tag [" + key + "]");
  }
  return it->second[occurrence % it->second.size()];
}

FillResult fill_masks(const Dialogue& dialogue, MaskFiller& filler, const FillOptions& options) {
  FillResult result{dialogue, {}};
  std::map<std::string, std::string> chosen;
  std::map<std::string, std::size_t> occurrences;
  for (auto& u : result.dialogue.utterances) {
    auto tags = find_mask_tags(u.text, u.index);
    if (tags.empty()) continue;
    std::string rebuilt;
    std::size_t cursor = 0;
    for (const auto& t : tags) {
      std::string replacement;
      if (options.consistent) {
        auto it = chosen.find(t.tag);
        if (it == chosen.end()) {
          it = chosen.emplace(t.tag, filler.fill(t.tag, 0)).first;
        }
        replacement = it->second;
      } else {
        replacement = filler.fill(t.tag, occurrences[t.tag]++);
      }
      rebuilt.append(u.text, cursor, t.span.begin - cursor);
      rebuilt += replacement;
      cursor = t.span.end;
      result.provenance[{u.index, t.span}] = replacement;
    }
    rebuilt.append(u.text, cursor, std::string::npos);
    u.text = std::move(rebuilt);
  }
  return result;
}

}  // namespace vicsim
