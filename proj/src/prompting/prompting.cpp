#include "vicsim/prompting.hpp"

#include <array>

#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {

constexpr std::array<std::string_view, 4> kSlots = {"system", "scenario", "keywords", "history"};

std::vector<std::string> split_blocks(const std::string& text) {
  std::vector<std::string> blocks;
  std::string current;
  std::size_t pos = 0;
  auto flush = [&] {
    auto t = text::trim(current);
    if (!t.empty()) blocks.emplace_back(t);
    current.clear();
  };
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    if (text::trim(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current += line;
    }
    pos = nl + 1;
  }
  flush();
  return blocks;
}

std::string load_trimmed(const std::string& rel) { return std::string(text::trim(read_file(asset_path(rel)))); }

}  // namespace

bool operator==(const Turn& a, const Turn& b) { return a.role == b.role && a.text == b.text; }

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)), blocks_(split_blocks(text_)) {
  if (blocks_.empty()) throw InvalidArgument("template '" + name_ + "' is empty");
}

PromptTemplate PromptTemplate::load(std::string_view name) {
  auto path = asset_path("templates/" + std::string(name) + ".txt");
  if (!std::filesystem::exists(path)) throw NotFound("unknown template '" + std::string(name) + "'");
  return PromptTemplate(std::string(name), read_file(path));
}

std::string PromptTemplate::render(const PromptBundle& bundle) const {
  const std::array<std::string, 4> values = {
      bundle.system_text, bundle.scenario_text,
      bundle.keyword_block ? render_keyword_block(*bundle.keyword_block) : std::string(),
      render_history(bundle.history)};

  std::string out;
  for (const auto& block : blocks_) {
    std::string rendered;
    bool has_slot = false;
    bool has_value = false;
    std::size_t i = 0;
    while (i < block.size()) {
      bool matched = false;
      if (block[i] == '{') {
        for (std::size_t s = 0; s < kSlots.size(); ++s) {
          const auto& slot = kSlots[s];
          if (block.compare(i + 1, slot.size(), slot) == 0 && i + 1 + slot.size() < block.size() &&
              block[i + 1 + slot.size()] == '}') {
            has_slot = true;
            has_value = has_value || !values[s].empty();
            rendered += values[s];
            i += slot.size() + 2;
            matched = true;
            break;
          }
        }
      }
      if (!matched) rendered += block[i++];
    }
    if (has_slot && !has_value) continue;
    if (!out.empty()) out += "\n\n";
    out += rendered;
  }
  out += '\n';
  return out;
}

std::string_view role_label(Role role) { return role == Role::user ? "User" : "Dispatcher"; }

std::string render_keyword_block(const TypedKeywordSet& keywords) {
  if (keywords.empty()) return "No key information.";
  std::string out;
  for (const auto& k : keywords) {
    if (!out.empty()) out += '\n';
    out += to_string(k.type);
    out += " : ";
    out += k.surface;
  }
  return out;
}

std::string render_history(const std::vector<Turn>& history) {
  std::string out;
  for (const auto& t : history) {
    if (!out.empty()) out += '\n';
    out += role_label(t.role);
    out += ": ";
    out += t.text;
  }
  return out;
}

std::string assemble_prompt(const PromptBundle& bundle, const PromptTemplate& tmpl) {
  if (text::trim(bundle.system_text).empty()) throw InvalidArgument("system text is empty");
  if (text::trim(bundle.scenario_text).empty()) throw InvalidArgument("scenario is empty");
  return tmpl.render(bundle);
}

std::string assemble_prompt(const PromptBundle& bundle, std::string_view template_name) {
  return assemble_prompt(bundle, PromptTemplate::load(template_name));
}

const std::string& default_system_prompt() {
  static const std::string text = load_trimmed("templates/system.txt");
  return text;
}

const std::string& default_error_style_suffix() {
  static const std::string text = load_trimmed("templates/error_style.txt");
  return text;
}

std::vector<PromptBundle> make_training_pairs(const Dialogue& dialogue) {
  return make_training_pairs(dialogue, default_system_prompt());
}

std::vector<PromptBundle> make_training_pairs(const Dialogue& dialogue, std::string_view system_text) {
  std::vector<PromptBundle> out;
  std::vector<Turn> history;
  for (const auto& u : dialogue.utterances) {
    if (u.role == Role::user) {
      PromptBundle b;
      b.system_text = system_text;
      b.scenario_text = dialogue.scenario.value_or("");
      b.history = history;
      b.target = u.text;
      out.push_back(std::move(b));
    }
    history.push_back({u.role, u.text});
  }
  return out;
}

PromptBundle augment_with_keywords(PromptBundle bundle, const TypedKeywordSet& scenario_keywords) {
  bundle.keyword_block = scenario_keywords;
  return bundle;
}

PromptBundle error_style_suffix(PromptBundle bundle, bool enabled) {
  return enabled ? error_style_suffix(std::move(bundle), true, default_error_style_suffix()) : bundle;
}

PromptBundle error_style_suffix(PromptBundle bundle, bool enabled, std::string_view suffix) {
  if (!enabled || suffix.empty()) return bundle;
  auto& s = bundle.system_text;
  if (s.size() >= suffix.size() && std::string_view(s).substr(s.size() - suffix.size()) == suffix) return bundle;
  if (!s.empty()) s += '\n';
  s += suffix;
  return bundle;
}

}  // namespace vicsim
