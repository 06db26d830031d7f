#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>

#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/rng.hpp"
#include "vicsim/runtime.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kDoubleTextStream = 0x444f55424c45ULL;

const char* kind_name(SessionEvent::Kind k) {
  switch (k) {
    case SessionEvent::Kind::created: return "created";
    case SessionEvent::Kind::dispatcher: return "dispatcher";
    case SessionEvent::Kind::victim: return "victim";
    case SessionEvent::Kind::failed: return "failed";
    case SessionEvent::Kind::deleted: return "deleted";
  }
  return "unknown";
}

SessionEvent::Kind parse_kind(const std::string& s) {
  for (auto k : {SessionEvent::Kind::created, SessionEvent::Kind::dispatcher, SessionEvent::Kind::victim,
                 SessionEvent::Kind::failed, SessionEvent::Kind::deleted}) {
    if (s == kind_name(k)) return k;
  }
  throw InvalidArgument("unknown session event '" + s + "'");
}

std::string hex64(std::uint64_t v) {
  static const char* kDigits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

std::vector<std::string> victim_texts(const Session& s) {
  std::vector<std::string> out;
  for (const auto& t : s.history) {
    if (t.role == Role::user) out.push_back(t.text);
  }
  return out;
}

std::size_t dispatcher_turns(const Session& s) {
  std::size_t n = 0;
  for (const auto& t : s.history) n += t.role == Role::dispatcher;
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Options

SessionOptions SessionOptions::from_json(const json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw InvalidArgument("options must be an object");
  SessionOptions o;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "template") {
        o.template_name = value.get<std::string>();
      } else if (key == "keywords") {
        o.keywords = value.get<bool>();
      } else if (key == "error_style") {
        o.error_style = value.get<bool>();
      } else if (key == "may_double_text") {
        o.may_double_text = value.get<bool>();
      } else if (key == "double_text_probability") {
        o.double_text_probability = value.get<double>();
      } else if (key == "seed") {
        if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0)) {
          throw InvalidArgument("seed must be a non-negative integer");
        }
        o.seed = value.get<std::uint64_t>();
      } else if (key == "decode") {
        if (!value.is_object()) throw InvalidArgument("decode must be an object");
        for (const auto& [dk, dv] : value.items()) {
          if (dk == "temperature") {
            o.decode.temperature = dv.get<double>();
          } else if (dk == "top_p") {
            o.decode.top_p = dv.get<double>();
          } else if (dk == "max_tokens") {
            if (!dv.is_number_integer() || dv.get<long long>() < 1) {
              throw InvalidArgument("decode.max_tokens must be a positive integer");
            }
            o.decode.max_tokens = dv.get<std::size_t>();
          } else if (dk == "greedy") {
            o.decode.greedy = dv.get<bool>();
          } else {
            throw InvalidArgument("unknown decode option '" + dk + "'");
          }
        }
      } else {
        throw InvalidArgument("unknown session option '" + key + "'");
      }
    }
  } catch (const json::type_error& e) {
    throw InvalidArgument(std::string("bad session option type: ") + e.what());
  }
  if (!(o.decode.temperature > 0.0)) throw InvalidArgument("decode.temperature must be positive");
  if (!(o.decode.top_p > 0.0 && o.decode.top_p <= 1.0)) throw InvalidArgument("decode.top_p must be in (0, 1]");
  if (o.decode.max_tokens == 0) throw InvalidArgument("decode.max_tokens must be positive");
  if (!(o.double_text_probability >= 0.0 && o.double_text_probability <= 1.0)) {
    throw InvalidArgument("double_text_probability must be in [0, 1]");
  }
  PromptTemplate::load(o.template_name);
  return o;
}

SessionOptions SessionOptions::from_config(const Config& c) {
  static const std::vector<std::string> kKeys = {
      "template", "keywords", "error_style", "may_double_text", "double_text_probability", "seed",
      "decode.temperature", "decode.top_p", "decode.max_tokens", "decode.greedy"};
  json j = json::object();
  for (const auto& [key, value] : c.values()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw InvalidArgument("unknown session config key '" + key + "'");
    }
    json v;
    std::visit([&](const auto& x) { v = x; }, value);
    if (key.rfind("decode.", 0) == 0) {
      j["decode"][key.substr(7)] = v;
    } else {
      j[key] = v;
    }
  }
  return from_json(j);
}

ordered_json SessionOptions::to_json() const {
  ordered_json j;
  j["template"] = template_name;
  j["keywords"] = keywords;
  j["error_style"] = error_style;
  j["may_double_text"] = may_double_text;
  j["double_text_probability"] = double_text_probability;
  j["decode"] = {{"temperature", decode.temperature},
                 {"top_p", decode.top_p},
                 {"max_tokens", decode.max_tokens},
                 {"greedy", decode.greedy}};
  j["seed"] = seed;
  return j;
}

ordered_json keywords_json(const TypedKeywordSet& set) {
  auto out = ordered_json::array();
  for (const auto& k : set) {
    out.push_back({{"type", std::string(to_string(k.type))}, {"surface", k.surface}, {"normalized", k.normalized}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Events

json SessionEvent::to_json() const {
  json j;
  j["event"] = kind_name(kind);
  if (kind != Kind::deleted) j["text"] = text;
  if (!data.is_null()) j["data"] = data;
  return j;
}

SessionEvent SessionEvent::from_json(const json& j) {
  try {
    SessionEvent e;
    e.kind = parse_kind(j.at("event").get<std::string>());
    if (auto it = j.find("text"); it != j.end()) e.text = it->get<std::string>();
    if (auto it = j.find("data"); it != j.end()) e.data = *it;
    return e;
  } catch (const json::exception& ex) {
    throw InvalidArgument(std::string("malformed session event: ") + ex.what());
  }
}

ordered_json Session::to_json() const {
  ordered_json j;
  j["session_id"] = id;
  j["scenario"] = scenario.summary;
  j["keywords"] = keywords_json(scenario.keywords);
  j["created_at"] = created_at;
  j["options"] = options.to_json();
  auto& h = j["history"] = ordered_json::array();
  for (const auto& t : history) {
    h.push_back({{"role", t.role == Role::user ? "victim" : "dispatcher"}, {"text", t.text}});
  }
  j["pending"] = pending;
  return j;
}

void apply(Session& session, const SessionEvent& event) {
  switch (event.kind) {
    case SessionEvent::Kind::created:
      session.id = event.data.at("session_id").get<std::string>();
      session.options = SessionOptions::from_json(event.data.at("options"));
      session.created_at = event.data.at("created_at").get<std::string>();
      session.scenario.summary = event.text;
      session.history.clear();
      session.pending = false;
      session.deleted = false;
      session.victim_turns = 0;
      break;
    case SessionEvent::Kind::dispatcher:
      session.history.push_back({Role::dispatcher, event.text});
      session.pending = true;
      break;
    case SessionEvent::Kind::victim:
      session.history.push_back({Role::user, event.text});
      session.pending = false;
      ++session.victim_turns;
      break;
    case SessionEvent::Kind::failed:
      break;
    case SessionEvent::Kind::deleted:
      session.deleted = true;
      break;
  }
}

Session replay(const std::vector<SessionEvent>& events, const NerBackend& ner) {
  if (events.empty() || events.front().kind != SessionEvent::Kind::created) {
    throw InvalidArgument("event log must start with a created event");
  }
  Session s;
  for (const auto& e : events) apply(s, e);
  s.scenario = make_scenario(s.scenario.summary, ner);
  return s;
}

std::vector<SessionEvent> read_event_log(const std::filesystem::path& path) {
  std::vector<SessionEvent> out;
  const auto content = read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    auto eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    const auto line = std::string_view(content).substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(SessionEvent::from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ordered_json VictimReply::to_json() const {
  ordered_json j;
  j["text"] = text;
  j["emotion"] = {{"label", std::string(vicsim::to_string(emotion.value))}, {"confidence", emotion.confidence}};
  j["grammar"] = {{"label", grammar.value}, {"confidence", grammar.confidence}};
  j["keyword_matches"] = vicsim::to_json(keyword_matches);
  j["latency_ms"] = latency_ms;
  j["followups"] = followups;
  return j;
}

void ConcurrencyGate::acquire() {
  if (limit_ == 0) return;
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return active_ < limit_; });
  ++active_;
}

void ConcurrencyGate::release() {
  if (limit_ == 0) return;
  {
    std::lock_guard lock(mu_);
    --active_;
  }
  cv_.notify_one();
}

// ---------------------------------------------------------------------------
// Backends

std::shared_ptr<GeneratorBackend> generator_from_state(const json& state) {
  const auto backend = state.is_object() ? state.value("backend", "") : "";
  std::shared_ptr<GeneratorBackend> g;
  if (backend == "copy") return std::make_shared<CopyGenerator>(state);
  if (backend == "scripted") {
    g = std::make_shared<ScriptedGenerator>(std::vector<std::pair<std::string, double>>{{"-", 1.0}});
  } else if (backend == "echo") {
    g = std::make_shared<EchoGenerator>();
  } else {
    throw InvalidArgument("unknown generator state backend '" + backend + "'");
  }
  g->load_state(state);
  return g;
}

std::shared_ptr<GeneratorBackend> make_generator(const std::string& spec) {
  if (spec == "echo") return std::make_shared<EchoGenerator>();
  if (spec == "scripted") {
    return std::make_shared<ScriptedGenerator>(std::vector<std::pair<std::string, double>>{
        {"I need help, someone took my bag.", 1.0},
        {"I am not sure, it happened so fast.", 1.0},
        {"He was wearing a black jacket.", 1.0},
        {"Please hurry.", 1.0}});
  }
  const auto colon = spec.find(':');
  const auto kind = spec.substr(0, colon);
  if (colon == std::string::npos || (kind != "copy" && kind != "checkpoint")) {
    throw BackendUnavailable("unknown generator backend '" + spec + "' (echo, scripted, checkpoint:<path>)");
  }
  std::filesystem::path path = spec.substr(colon + 1);
  if (std::filesystem::is_directory(path)) path /= "generator.json";
  try {
    auto state = json::parse(read_file(path));
    if (kind == "copy" && state.value("backend", "") != "copy") {
      throw InvalidArgument("checkpoint holds a '" + state.value("backend", "") + "' generator");
    }
    return generator_from_state(state);
  } catch (const std::exception& e) {
    throw BackendUnavailable("cannot load generator " + path.string() + ": " + e.what());
  }
}

ServiceBackends default_backends(const std::string& generator_spec) {
  ServiceBackends b;
  b.generator = make_generator(generator_spec);
  b.ner = std::shared_ptr<const NerBackend>(make_ner_backend("rule"));
  b.emotion = std::make_shared<LexiconEmotionJudge>();
  b.grammar = std::make_shared<RuleGrammarJudge>();
  return b;
}

// ---------------------------------------------------------------------------
// Debrief

ordered_json session_debrief(const Session& session, const ServiceBackends& backends) {
  const auto replies = victim_texts(session);
  if (replies.empty()) throw InvalidArgument("session " + session.id + " has no victim reply yet");

  RunMetadata meta;
  meta.source = "model";
  meta.config_hash = sha256_hex(session.options.to_json().dump());
  meta.seeds["session"] = session.options.seed;
  meta.backends["generator"] = backends.generator->name();
  meta.backends["ner"] = backends.ner->name();
  meta.backends["emotion"] = backends.emotion->name();
  meta.backends["grammar"] = backends.grammar->name();
  ReportBuilder report(meta);

  if (!session.scenario.keywords.empty()) {
    TypedKeywordSet said;
    for (const auto& r : replies) {
      for (const auto& k : extract_keywords(r, *backends.ner)) said.insert(k);
    }
    report.faithfulness(aggregate_overlap({match_keywords(said, session.scenario.keywords).counts}));
  }

  Dialogue d;
  d.id = session.id;
  for (const auto& r : replies) d.utterances.push_back({Role::user, r, d.utterances.size()});
  report.trajectory(emotion_trajectory({d}, *backends.emotion, ResponseSource::model));
  report.grammar(grammar_distribution(replies, *backends.grammar));
  report.length(length_emotion_stats(replies, ValenceLexicon::bundled()));
  return report.build();
}

// ---------------------------------------------------------------------------
// SessionManager

SessionManager::SessionManager(ServiceBackends backends, std::optional<std::filesystem::path> data_dir,
                               SessionOptions defaults)
    : backends_(std::move(backends)), data_dir_(std::move(data_dir)), defaults_(std::move(defaults)) {
  if (!backends_.generator || !backends_.ner || !backends_.emotion || !backends_.grammar) {
    throw BackendUnavailable("session manager needs generator, NER, emotion and grammar backends");
  }
  gate_ = std::make_unique<ConcurrencyGate>(backends_.generator->max_concurrency());
  id_salt_ = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}() ^
             static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  if (!data_dir_) return;
  const auto dir = *data_dir_ / "sessions";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".jsonl") continue;
    auto log = read_event_log(entry.path());
    if (log.empty()) continue;
    auto e = std::make_shared<Entry>();
    e->session = replay(log, *backends_.ner);
    e->log = std::move(log);
    if (e->session.deleted) continue;
    sessions_[e->session.id] = std::move(e);
  }
}

std::string SessionManager::new_id() {
  std::lock_guard lock(mu_);
  std::string id;
  do {
    auto rng = Rng::derive(id_salt_, counter_++);
    id = "s-" + hex64(rng.next_u64());
  } while (sessions_.count(id) != 0);
  return id;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("no session '" + id + "'");
  return it->second;
}

void SessionManager::record(Entry& entry, SessionEvent event) {
  if (data_dir_) {
    const auto path = *data_dir_ / "sessions" / (entry.session.id + ".jsonl");
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << event.to_json().dump() << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to " + path.string());
  }
  apply(entry.session, event);
  entry.log.push_back(std::move(event));
}

Session SessionManager::create(const std::string& scenario, const std::optional<SessionOptions>& options) {
  if (text::trim(scenario).empty()) throw InvalidArgument("scenario must be non-empty");
  auto e = std::make_shared<Entry>();
  SessionEvent created;
  created.kind = SessionEvent::Kind::created;
  created.text = scenario;
  created.data = {{"session_id", new_id()},
                  {"options", options.value_or(defaults_).to_json()},
                  {"created_at", utc_timestamp()}};
  e->session.id = created.data["session_id"].get<std::string>();
  record(*e, std::move(created));
  e->session.scenario = make_scenario(scenario, *backends_.ner);
  Session copy = e->session;
  std::lock_guard lock(mu_);
  sessions_[copy.id] = std::move(e);
  return copy;
}

VictimReply SessionManager::post(const std::string& id, const std::string& text) {
  if (text::trim(text).empty()) throw InvalidArgument("message text must be non-empty");
  auto e = find(id);
  std::lock_guard lock(e->mu);
  if (e->session.deleted) throw NotFound("no session '" + id + "'");

  record(*e, {SessionEvent::Kind::dispatcher, text, nullptr});
  const auto& opts = e->session.options;
  const auto tmpl = PromptTemplate::load(opts.template_name);
  const auto turn = dispatcher_turns(e->session);

  auto generate = [&](std::uint64_t stream) {
    PromptBundle bundle;
    bundle.system_text = default_system_prompt();
    bundle.scenario_text = e->session.scenario.summary;
    if (opts.keywords) bundle.keyword_block = e->session.scenario.keywords;
    bundle.history = e->session.history;
    bundle = error_style_suffix(std::move(bundle), opts.error_style);
    auto params = opts.decode;
    params.seed = Rng::derive(opts.seed, stream).next_u64();
    const auto ctx = make_context(std::move(bundle), tmpl);
    gate_->acquire();
    try {
      auto s = backends_.generator->sample(ctx, params);
      gate_->release();
      if (text::trim(s.text).empty()) throw BackendFailure("generator returned an empty reply");
      return std::make_pair(s.text, params.seed);
    } catch (...) {
      gate_->release();
      throw;
    }
  };

  const auto start = std::chrono::steady_clock::now();
  std::pair<std::string, std::uint64_t> reply;
  try {
    reply = generate(turn);
  } catch (const std::exception& ex) {
    record(*e, {SessionEvent::Kind::failed, ex.what(), nullptr});
    throw BackendFailure(std::string("generation failed: ") + ex.what());
  }
  record(*e, {SessionEvent::Kind::victim, reply.first, {{"seed", reply.second}}});

  VictimReply out;
  out.text = reply.first;
  out.emotion = backends_.emotion->classify(out.text);
  out.grammar = backends_.grammar->classify(out.text);
  out.keyword_matches = match_keywords(extract_keywords(out.text, *backends_.ner), e->session.scenario.keywords);

  if (opts.may_double_text) {
    auto coin = Rng::derive(opts.seed ^ kDoubleTextStream, turn);
    if (coin.bernoulli(opts.double_text_probability)) {
      try {
        auto extra = generate(turn ^ (kDoubleTextStream << 8));
        record(*e, {SessionEvent::Kind::victim, extra.first, {{"seed", extra.second}}});
        out.followups.push_back(extra.first);
      } catch (const std::exception& ex) {
        record(*e, {SessionEvent::Kind::failed, ex.what(), nullptr});
      }
    }
  }
  out.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Session SessionManager::get(const std::string& id) const {
  auto e = find(id);
  std::lock_guard lock(e->mu);
  return e->session;
}

ordered_json SessionManager::debrief(const std::string& id) const {
  const auto s = get(id);
  return session_debrief(s, backends_);
}

void SessionManager::remove(const std::string& id) {
  auto e = find(id);
  {
    std::lock_guard lock(e->mu);
    record(*e, {SessionEvent::Kind::deleted, {}, nullptr});
  }
  std::lock_guard lock(mu_);
  sessions_.erase(id);
}

std::vector<SessionEvent> SessionManager::events(const std::string& id) const {
  auto e = find(id);
  std::lock_guard lock(e->mu);
  return e->log;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace vicsim
