#pragma once

// Session-service stubs shared by the unit and acceptance suites.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "vicsim/runtime.hpp"
#include "vicsim/text.hpp"

namespace vicsim::testing {

// Replies "<first scenario word> ack <last dispatcher text>". The scenario's
// first word tags the session, so a reply that lands in another session's
// history is detectable. Sleeps a few microseconds to widen race windows.
class TaggedGenerator : public GeneratorBackend {
 public:
  explicit TaggedGenerator(std::size_t max_concurrency = 0) : max_concurrency_(max_concurrency) {}
  std::string name() const override { return "tagged"; }
  GeneratedSample sample(const GenerationContext& context, const DecodeParams& params) const override {
    const int now = ++active_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::microseconds(params.seed % 200));
    GeneratedSample s;
    s.context = context;
    const auto words = text::split_whitespace(context.bundle.scenario_text);
    s.text = std::string(words.empty() ? "" : words.front()) + " ack";
    for (auto it = context.bundle.history.rbegin(); it != context.bundle.history.rend(); ++it) {
      if (it->role == Role::dispatcher) {
        s.text += " " + it->text;
        break;
      }
    }
    for (auto tok : text::split_whitespace(s.text)) s.tokens.emplace_back(tok);
    s.log_probs.assign(s.tokens.size(), 0.0);
    --active_;
    return s;
  }
  double supervised_step(const std::vector<TrainingExample>&, double = 1.0) override { return 0.0; }
  double apply_reward_update(const std::vector<GeneratedSample>&, const std::vector<double>&) override { return 0.0; }
  nlohmann::json save_state() const override { return {{"backend", "tagged"}}; }
  void load_state(const nlohmann::json&) override {}
  std::size_t max_concurrency() const override { return max_concurrency_; }

  int peak() const { return peak_.load(); }

 private:
  std::size_t max_concurrency_;
  mutable std::atomic<int> active_{0};
  mutable std::atomic<int> peak_{0};
};

inline ServiceBackends tagged_backends(std::shared_ptr<const GeneratorBackend> generator) {
  ServiceBackends b = default_backends("echo");
  b.generator = std::move(generator);
  return b;
}

struct StressResult {
  std::size_t messages = 0;
  std::size_t violations = 0;  // misplaced, reordered or missing turns
  std::size_t replay_mismatches = 0;
};

// sessions threads each post messages_per_session tagged messages to their
// own session, then every history is checked turn by turn and replayed from
// its event log.
inline StressResult run_session_stress(SessionManager& manager, std::size_t sessions,
                                       std::size_t messages_per_session) {
  std::vector<std::string> ids;
  for (std::size_t s = 0; s < sessions; ++s) {
    ids.push_back(manager.create("tag" + std::to_string(s) + " reports a theft at the Main Library.").id);
  }
  std::vector<std::thread> threads;
  std::atomic<std::size_t> posted{0};
  for (std::size_t s = 0; s < sessions; ++s) {
    threads.emplace_back([&, s] {
      for (std::size_t m = 0; m < messages_per_session; ++m) {
        manager.post(ids[s], "t" + std::to_string(s) + "m" + std::to_string(m));
        ++posted;
      }
    });
  }
  for (auto& t : threads) t.join();

  StressResult r;
  r.messages = posted.load();
  for (std::size_t s = 0; s < sessions; ++s) {
    const auto session = manager.get(ids[s]);
    if (session.history.size() != 2 * messages_per_session) ++r.violations;
    for (std::size_t m = 0; m < messages_per_session && 2 * m + 1 < session.history.size(); ++m) {
      const auto msg = "t" + std::to_string(s) + "m" + std::to_string(m);
      const auto& d = session.history[2 * m];
      const auto& v = session.history[2 * m + 1];
      if (d.role != Role::dispatcher || d.text != msg) ++r.violations;
      if (v.role != Role::user || v.text != "tag" + std::to_string(s) + " ack " + msg) ++r.violations;
    }
    const auto replayed = replay(manager.events(ids[s]), *manager.backends().ner);
    if (!(replayed.history == session.history)) ++r.replay_mismatches;
  }
  return r;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace vicsim::testing
