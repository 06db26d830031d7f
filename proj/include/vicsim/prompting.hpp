#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vicsim/corpus.hpp"
#include "vicsim/keyinfo.hpp"

namespace vicsim {

struct Turn {
  Role role = Role::user;
  std::string text;
};

bool operator==(const Turn& a, const Turn& b);

struct PromptBundle {
  std::string system_text;
  std::string scenario_text;
  std::optional<TypedKeywordSet> keyword_block;
  std::vector<Turn> history;
  // Gold user response; never rendered.
  std::optional<std::string> target;
};

// Text template with {system}, {scenario}, {keywords} and {history} slots.
//
// The template is split into blocks at blank lines. A block whose slots all
// render empty is dropped; kept blocks are joined by one blank line and the
// result ends with a single newline. Slot markers inside substituted values
// are left alone.
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string text);

  // Loads templates/<name>.txt from the asset directory. Throws NotFound.
  static PromptTemplate load(std::string_view name);

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }

  std::string render(const PromptBundle& bundle) const;

 private:
  std::string name_;
  std::string text_;
  std::vector<std::string> blocks_;
};

std::string_view role_label(Role role);  // "User" / "Dispatcher"

// "TYPE : surface" lines in set order, or "No key information." when empty.
std::string render_keyword_block(const TypedKeywordSet& keywords);
// "User: text" lines.
std::string render_history(const std::vector<Turn>& history);

// Throws InvalidArgument when system or scenario text is empty.
std::string assemble_prompt(const PromptBundle& bundle, const PromptTemplate& tmpl);
std::string assemble_prompt(const PromptBundle& bundle, std::string_view template_name = "default");

// Contents of templates/system.txt, trimmed.
const std::string& default_system_prompt();
// Contents of templates/error_style.txt, trimmed.
const std::string& default_error_style_suffix();

// One bundle per user utterance: history is everything before it, target is
// the utterance. A dialogue without a scenario yields an empty scenario_text.
std::vector<PromptBundle> make_training_pairs(const Dialogue& dialogue);
std::vector<PromptBundle> make_training_pairs(const Dialogue& dialogue, std::string_view system_text);

// Replaces any existing keyword block.
PromptBundle augment_with_keywords(PromptBundle bundle, const TypedKeywordSet& scenario_keywords);

// Appends suffix to the system text on its own line, once.
PromptBundle error_style_suffix(PromptBundle bundle, bool enabled);
PromptBundle error_style_suffix(PromptBundle bundle, bool enabled, std::string_view suffix);

}  // namespace vicsim
