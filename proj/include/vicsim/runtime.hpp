#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vicsim/adversarial.hpp"
#include "vicsim/eval.hpp"
#include "vicsim/judges.hpp"
#include "vicsim/keyinfo.hpp"
#include "vicsim/prompting.hpp"

namespace vicsim {

struct SessionOptions {
  std::string template_name = "default";
  bool keywords = true;
  bool error_style = false;
  // Lets the victim follow a reply with a second unprompted message.
  bool may_double_text = false;
  double double_text_probability = 0.15;
  DecodeParams decode;
  std::uint64_t seed = 0;

  // Keys as in to_json; absent keys keep defaults. Throws InvalidArgument.
  static SessionOptions from_json(const nlohmann::json& j);
  // Config keys: template, keywords, error_style, may_double_text,
  // decode.{temperature, top_p, max_tokens, greedy}, seed.
  static SessionOptions from_config(const Config& c);
  nlohmann::ordered_json to_json() const;
};

nlohmann::ordered_json keywords_json(const TypedKeywordSet& set);

// One persisted change to a session. The log of a session is the ordered
// list of its events.
struct SessionEvent {
  enum class Kind { created, dispatcher, victim, failed, deleted };
  Kind kind = Kind::created;
  std::string text;  // scenario for created, message otherwise, error for failed
  nlohmann::json data;  // created: {session_id, options, created_at}

  nlohmann::json to_json() const;
  static SessionEvent from_json(const nlohmann::json& j);
};

struct Session {
  std::string id;
  Scenario scenario;
  std::vector<Turn> history;
  SessionOptions options;
  std::string created_at;
  bool pending = false;  // a dispatcher turn has no reply yet
  bool deleted = false;
  std::size_t victim_turns = 0;

  nlohmann::ordered_json to_json() const;
};

// state(session) == fold(apply, events). Keywords are re-extracted from the
// scenario with ner.
Session replay(const std::vector<SessionEvent>& events, const NerBackend& ner);
void apply(Session& session, const SessionEvent& event);

std::vector<SessionEvent> read_event_log(const std::filesystem::path& path);

struct VictimReply {
  std::string text;
  EmotionLabel emotion;
  GrammarLabel grammar;
  OverlapScore keyword_matches;
  double latency_ms = 0.0;
  std::vector<std::string> followups;

  nlohmann::ordered_json to_json() const;
};

// Caps concurrent calls into a backend; 0 means no cap.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(std::size_t limit) : limit_(limit) {}
  void acquire();
  void release();

 private:
  std::size_t limit_;
  std::size_t active_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

struct ServiceBackends {
  std::shared_ptr<const GeneratorBackend> generator;
  std::shared_ptr<const NerBackend> ner;
  std::shared_ptr<const EmotionJudge> emotion;
  std::shared_ptr<const GrammarJudge> grammar;
};

// Restores a saved copy, scripted or echo generator. Throws InvalidArgument.
std::shared_ptr<GeneratorBackend> generator_from_state(const nlohmann::json& state);
// "echo", "scripted", "checkpoint:<path>" for any saved generator, or
// "copy:<path>" for a saved copy generator only. A directory path means its
// generator.json. Throws BackendUnavailable.
std::shared_ptr<GeneratorBackend> make_generator(const std::string& spec);
ServiceBackends default_backends(const std::string& generator_spec);

// Thread-safe session store. Each session serializes its own turns; the
// generator's max_concurrency bounds sampling across sessions.
class SessionManager {
 public:
  // With a data directory every event is appended to
  // <dir>/sessions/<id>.jsonl before the call returns, and existing logs are
  // replayed on construction.
  explicit SessionManager(ServiceBackends backends, std::optional<std::filesystem::path> data_dir = std::nullopt,
                          SessionOptions defaults = {});

  // Throws InvalidArgument for an empty scenario.
  Session create(const std::string& scenario, const std::optional<SessionOptions>& options = std::nullopt);
  // Throws NotFound, InvalidArgument (empty text) or BackendFailure. On
  // failure the dispatcher turn stays in the history, marked pending.
  VictimReply post(const std::string& id, const std::string& text);
  Session get(const std::string& id) const;
  // Throws NotFound, InvalidArgument when there is no victim reply yet.
  nlohmann::ordered_json debrief(const std::string& id) const;
  void remove(const std::string& id);
  std::vector<SessionEvent> events(const std::string& id) const;
  std::size_t size() const;
  const ServiceBackends& backends() const { return backends_; }
  const SessionOptions& defaults() const { return defaults_; }

 private:
  struct Entry {
    mutable std::mutex mu;
    Session session;
    std::vector<SessionEvent> log;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void record(Entry& entry, SessionEvent event);
  std::string new_id();

  ServiceBackends backends_;
  std::optional<std::filesystem::path> data_dir_;
  SessionOptions defaults_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t id_salt_ = 0;
  std::unique_ptr<ConcurrencyGate> gate_;
};

// Session-scoped report: keyword coverage of all victim replies together,
// their emotion trajectory, grammar distribution and length statistics.
nlohmann::ordered_json session_debrief(const Session& session, const ServiceBackends& backends);

// HTTP front end over a SessionManager.
class HttpService {
 public:
  explicit HttpService(SessionManager& manager);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Returns the bound port; 0 binds any free port. Throws IoError.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vicsim
