#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <string>
#include <vector>

#include "vicsim/adversarial.hpp"
#include "vicsim/corpus.hpp"
#include "vicsim/rng.hpp"

namespace vicsim::testing {

inline const std::vector<std::string>& clean_sentences() {
  static const std::vector<std::string> s = {
      "Someone is following me near the library.",
      "I lost my backpack in the gym.",
      "There is a loud party next door.",
      "My friend fell and hurt her leg.",
      "The light in the hallway is broken.",
      "A man keeps knocking on my door.",
      "I think my bike was stolen today.",
      "The car was parked in the fire lane.",
      "I saw smoke coming from the lab.",
      "He has been drinking all night.",
      "She is not answering her phone.",
      "The elevator is stuck on the third floor.",
      "I am waiting outside the main entrance.",
      "We heard glass breaking a minute ago.",
      "My roommate is very upset right now.",
      "The water is leaking from the ceiling.",
  };
  return s;
}

inline std::string drop_terminal(const std::string& s) {
  return !s.empty() && s.back() == '.' ? s.substr(0, s.size() - 1) : s;
}

inline GenerationContext plain_context(const std::string& scenario = "A caller reports an incident.") {
  PromptBundle b;
  b.system_text = "You are a caller.";
  b.scenario_text = scenario;
  b.history = {{Role::dispatcher, "What is going on?"}};
  return make_context(b, PromptTemplate::load("default"));
}

// Real targets drop the final period with this probability; the scripted
// generator drops it with kFakeDrop.
inline constexpr double kRealDrop = 0.7;
inline constexpr double kFakeDrop = 0.1;

// Best achievable real/fake accuracy on balanced pairs when the terminal
// period is the only signal.
inline double bayes_accuracy(double real_drop, double fake_drop) {
  return 0.5 * (std::max(real_drop, fake_drop) + std::max(1 - real_drop, 1 - fake_drop));
}

inline std::vector<TrainingExample> period_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto ctx = plain_context();
  std::vector<TrainingExample> out;
  const auto& s = clean_sentences();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sent = s[rng.index(s.size())];
    out.push_back({ctx, rng.bernoulli(kRealDrop) ? drop_terminal(sent) : sent});
  }
  return out;
}

inline ScriptedGenerator period_generator() {
  std::vector<std::pair<std::string, double>> pool;
  for (const auto& sent : clean_sentences()) {
    pool.emplace_back(sent, 1 - kFakeDrop);
    pool.emplace_back(drop_terminal(sent), kFakeDrop);
  }
  return ScriptedGenerator(pool);
}

// Ten dialogues written as turn codes: D is a dispatcher turn; U is a user
// turn followed by + (positive), - (negative) or 0 (neutral), then optional
// style marks p (no final period) and l (lowercase start).
inline const std::vector<std::string>& ten_dialogue_codes() {
  static const std::vector<std::string> codes = {
      "U- D U- D U+", "U0 U- D U0", "D U-p D U+ U+", "U- U- U- D", "U0",
      "U+l D U0 D U- D U0", "D U- D U-p", "U- D U0p U0 U+", "U0 D", "U-l U+ D U0 D U- U-",
  };
  return codes;
}

inline const char* kFixtureLexicon = "great 1\nsad -1\n";

inline std::string fixture_text(const std::string& code) {
  std::string t = code[1] == '+' ? "That is great." : code[1] == '-' ? "I am so sad." : "The door is open.";
  if (code.find('p') != std::string::npos) t.pop_back();
  if (code.find('l') != std::string::npos) t[0] = static_cast<char>(t[0] - 'A' + 'a');
  return t;
}

inline std::vector<Dialogue> ten_dialogues() {
  std::vector<Dialogue> out;
  for (std::size_t k = 0; k < ten_dialogue_codes().size(); ++k) {
    Dialogue d;
    d.id = "fx" + std::to_string(k + 1);
    d.timestamp = {2018, 6, 1};
    std::size_t i = 0;
    std::string code;
    for (char c : ten_dialogue_codes()[k] + " ") {
      if (c != ' ') {
        code += c;
        continue;
      }
      if (code == "D") d.utterances.push_back({Role::dispatcher, "Okay.", i++});
      else d.utterances.push_back({Role::user, fixture_text(code), i++});
      code.clear();
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace vicsim::testing
