#include <doctest.h>

#include <set>
#include <thread>

#include "support/runtime_fixtures.hpp"
#include "support/schema_check.hpp"
#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/runtime.hpp"

#include <httplib.h>

using namespace vicsim;
using namespace vicsim::testing;
using nlohmann::json;

namespace {

const std::string kScenario = "The user reported that Officer Daniels saw a stolen bike near Baker Library on Monday.";

class FailingGenerator : public EchoGenerator {
 public:
  std::string name() const override { return "failing"; }
  GeneratedSample sample(const GenerationContext&, const DecodeParams&) const override {
    throw BackendFailure("model offline");
  }
};

ServiceBackends with_generator(std::shared_ptr<const GeneratorBackend> g) { return tagged_backends(std::move(g)); }

std::shared_ptr<const GeneratorBackend> scripted() {
  return std::make_shared<ScriptedGenerator>(std::vector<std::pair<std::string, double>>{
      {"Daniels saw it.", 1.0}, {"i dont know", 1.0}, {"It was near the library.", 2.0}, {"Please hurry!", 1.0}});
}

}  // namespace

TEST_CASE("create extracts keywords and rejects empty scenarios") {
  SessionManager mgr(default_backends("echo"));
  const auto s = mgr.create(kScenario);
  CHECK_FALSE(s.scenario.keywords.empty());
  std::set<std::string> norm;
  for (const auto& k : s.scenario.keywords) norm.insert(k.normalized);
  CHECK(norm.count("daniels") == 1);
  CHECK_THROWS_AS(mgr.create("   "), InvalidArgument);
  CHECK_THROWS_AS(mgr.create(""), InvalidArgument);

  std::set<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.insert(mgr.create(kScenario).id);
  CHECK(ids.size() == 200);
}

TEST_CASE("echo stub reply carries rule-judge metrics of the returned text") {
  SessionManager mgr(default_backends("echo"));
  const auto id = mgr.create(kScenario).id;
  const auto reply = mgr.post(id, "Did Daniels see who took it?");
  CHECK(reply.text == "echo: Did Daniels see who took it?");
  CHECK(reply.grammar.value == RuleGrammarJudge().classify(reply.text).value);
  CHECK(reply.emotion.value == LexiconEmotionJudge().classify(reply.text).value);
  const auto ner = make_ner_backend("rule");
  const auto expected = match_keywords(extract_keywords(reply.text, *ner), mgr.get(id).scenario.keywords);
  CHECK(reply.keyword_matches.counts.matched == expected.counts.matched);
  CHECK(reply.keyword_matches.recall == expected.recall);
  CHECK(reply.keyword_matches.counts.matched >= 1);
  CHECK(reply.latency_ms >= 0.0);
  CHECK(reply.followups.empty());

  const auto s = mgr.get(id);
  REQUIRE(s.history.size() == 2);
  CHECK(s.history[0].role == Role::dispatcher);
  CHECK(s.history[1].text == reply.text);
  CHECK_FALSE(s.pending);
}

TEST_CASE("unknown, deleted and empty inputs") {
  SessionManager mgr(default_backends("echo"));
  CHECK_THROWS_AS(mgr.post("nope", "hello"), NotFound);
  CHECK_THROWS_AS(mgr.get("nope"), NotFound);
  const auto id = mgr.create(kScenario).id;
  CHECK_THROWS_AS(mgr.post(id, "  "), InvalidArgument);
  CHECK_THROWS_AS(mgr.debrief(id), InvalidArgument);
  mgr.remove(id);
  CHECK_THROWS_AS(mgr.post(id, "hello"), NotFound);
  CHECK_THROWS_AS(mgr.remove(id), NotFound);
  CHECK(mgr.size() == 0);
}

TEST_CASE("event log replays to the live state") {
  const auto dir = fresh_dir("vicsim_runtime_replay");
  std::string id;
  Session live;
  {
    SessionOptions opts;
    opts.seed = 17;
    SessionManager mgr(with_generator(scripted()), dir, opts);
    id = mgr.create(kScenario).id;
    for (int i = 0; i < 12; ++i) {
      mgr.post(id, "Question " + std::to_string(i) + "?");
      const auto now = mgr.get(id);
      // state == fold(log) after every turn
      CHECK(replay(mgr.events(id), *mgr.backends().ner).history == now.history);
    }
    live = mgr.get(id);
    const auto other = mgr.create("Another case at the gym.").id;
    mgr.post(other, "Hi");
    mgr.remove(other);
  }
  const auto log = read_event_log(dir / "sessions" / (id + ".jsonl"));
  CHECK(log.size() == 25);
  const auto replayed = replay(log, *make_ner_backend("rule"));
  CHECK(replayed.history == live.history);
  CHECK(replayed.id == live.id);
  CHECK(replayed.created_at == live.created_at);
  CHECK(replayed.options.to_json() == live.options.to_json());
  CHECK(keywords_json(replayed.scenario.keywords) == keywords_json(live.scenario.keywords));

  // Restart from disk: the deleted session stays gone.
  SessionManager restarted(with_generator(scripted()), dir);
  CHECK(restarted.size() == 1);
  CHECK(restarted.get(id).history == live.history);
  restarted.post(id, "Anything else?");
  CHECK(restarted.get(id).history.size() == live.history.size() + 2);
}

TEST_CASE("same seed and dispatcher messages reproduce replies") {
  SessionOptions opts;
  opts.seed = 99;
  SessionManager a(with_generator(scripted()), std::nullopt, opts);
  SessionManager b(with_generator(scripted()), std::nullopt, opts);
  const auto ia = a.create(kScenario).id;
  for (int i = 0; i < 20; ++i) a.post(ia, "Message " + std::to_string(i));

  // Replay the dispatcher side of a's log into b.
  const auto ib = b.create(kScenario).id;
  for (const auto& e : a.events(ia)) {
    if (e.kind == SessionEvent::Kind::dispatcher) b.post(ib, e.text);
  }
  CHECK(a.get(ia).history == b.get(ib).history);

  std::set<std::string> distinct;
  for (const auto& t : a.get(ia).history) {
    if (t.role == Role::user) distinct.insert(t.text);
  }
  CHECK(distinct.size() > 1);

  SessionOptions other = opts;
  other.seed = 100;
  const auto ic = b.create(kScenario, other).id;
  for (int i = 0; i < 20; ++i) b.post(ic, "Message " + std::to_string(i));
  CHECK_FALSE(a.get(ia).history == b.get(ic).history);
}

TEST_CASE("generation failure keeps the dispatcher turn pending") {
  const auto dir = fresh_dir("vicsim_runtime_failure");
  SessionManager mgr(with_generator(std::make_shared<FailingGenerator>()), dir);
  const auto id = mgr.create(kScenario).id;
  CHECK_THROWS_AS(mgr.post(id, "Where are you?"), BackendFailure);
  const auto s = mgr.get(id);
  REQUIRE(s.history.size() == 1);
  CHECK(s.history[0].text == "Where are you?");
  CHECK(s.pending);
  const auto log = mgr.events(id);
  REQUIRE(log.size() == 3);
  CHECK(log[2].kind == SessionEvent::Kind::failed);
  const auto replayed = replay(read_event_log(dir / "sessions" / (id + ".jsonl")), *mgr.backends().ner);
  CHECK(replayed.pending);
  CHECK(replayed.history == s.history);
}

TEST_CASE("concurrent sessions never interleave") {
  auto gen = std::make_shared<TaggedGenerator>();
  SessionManager mgr(tagged_backends(gen));
  const auto r = run_session_stress(mgr, 20, 50);
  CHECK(r.messages == 1000);
  CHECK(r.violations == 0);
  CHECK(r.replay_mismatches == 0);
  CHECK(gen->peak() > 1);
}

TEST_CASE("messages to one session queue behind each other") {
  SessionManager mgr(tagged_backends(std::make_shared<TaggedGenerator>()));
  const auto id = mgr.create("solo reports noise.").id;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int m = 0; m < 10; ++m) mgr.post(id, "w" + std::to_string(t) + "-" + std::to_string(m));
    });
  }
  for (auto& th : threads) th.join();
  const auto h = mgr.get(id).history;
  REQUIRE(h.size() == 160);
  for (std::size_t i = 0; i < h.size(); i += 2) {
    CHECK(h[i].role == Role::dispatcher);
    CHECK(h[i + 1].text == "solo ack " + h[i].text);
  }
}

TEST_CASE("backend concurrency budget is enforced") {
  auto gen = std::make_shared<TaggedGenerator>(2);
  SessionManager mgr(tagged_backends(gen));
  const auto r = run_session_stress(mgr, 8, 10);
  CHECK(r.violations == 0);
  CHECK(gen->peak() <= 2);
}

TEST_CASE("double text only when enabled") {
  SessionManager mgr(default_backends("echo"));
  const auto off = mgr.create(kScenario).id;
  for (int i = 0; i < 10; ++i) CHECK(mgr.post(off, "Hello?").followups.empty());
  CHECK(mgr.get(off).history.size() == 20);

  SessionOptions opts;
  opts.may_double_text = true;
  opts.double_text_probability = 1.0;
  const auto on = mgr.create(kScenario, opts).id;
  const auto reply = mgr.post(on, "Hello?");
  REQUIRE(reply.followups.size() == 1);
  const auto h = mgr.get(on).history;
  REQUIRE(h.size() == 3);
  CHECK(h[1].role == Role::user);
  CHECK(h[2].role == Role::user);
  CHECK(h[2].text == reply.followups[0]);
}

TEST_CASE("session options parse and validate") {
  const auto o = SessionOptions::from_json(
      json::parse(R"({"keywords": false, "seed": 4, "decode": {"temperature": 0.7, "greedy": true}})"));
  CHECK_FALSE(o.keywords);
  CHECK(o.seed == 4);
  CHECK(o.decode.temperature == doctest::Approx(0.7));
  CHECK(o.decode.greedy);
  CHECK(SessionOptions::from_json(o.to_json()).to_json() == o.to_json());
  CHECK_THROWS_AS(SessionOptions::from_json(json::parse(R"({"color": 1})")), InvalidArgument);
  CHECK_THROWS_AS(SessionOptions::from_json(json::parse(R"({"keywords": "yes"})")), InvalidArgument);
  CHECK_THROWS_AS(SessionOptions::from_json(json::parse(R"({"decode": {"top_p": 0}})")), InvalidArgument);
  CHECK_THROWS_AS(SessionOptions::from_json(json::parse(R"({"template": "missing"})")), NotFound);

  const auto c = Config::parse("template = \"default\"\nkeywords = false\n[decode]\ntop_p = 0.5\nmax_tokens = 12\n");
  const auto fc = SessionOptions::from_config(c);
  CHECK_FALSE(fc.keywords);
  CHECK(fc.decode.top_p == doctest::Approx(0.5));
  CHECK(fc.decode.max_tokens == 12);
  CHECK_THROWS_AS(SessionOptions::from_config(Config::parse("bogus = 1\n")), InvalidArgument);
}

TEST_CASE("generator backends by name") {
  CHECK(make_generator("echo")->name() == "echo");
  CHECK(make_generator("scripted")->name() == "scripted");
  CHECK_THROWS_AS(make_generator("gpt"), BackendUnavailable);
  CHECK_THROWS_AS(make_generator("copy:/nonexistent/generator.json"), BackendUnavailable);

  const auto dir = fresh_dir("vicsim_runtime_copy");
  write_file_atomic(dir / "generator.json", R"({"backend": "echo"})");
  CHECK_THROWS_AS(make_generator("copy:" + (dir / "generator.json").string()), BackendUnavailable);
}

TEST_CASE("debrief equals recomputation over the session log") {
  SessionOptions opts;
  opts.seed = 3;
  SessionManager mgr(with_generator(scripted()), std::nullopt, opts);
  const auto id = mgr.create(kScenario).id;
  for (int i = 0; i < 9; ++i) mgr.post(id, "Tell me more " + std::to_string(i));
  const auto report = mgr.debrief(id);
  CHECK_FALSE(validate_both(report, "report.schema.json").has_value());

  std::vector<std::string> replies;
  for (const auto& e : mgr.events(id)) {
    if (e.kind == SessionEvent::Kind::victim) replies.push_back(e.text);
  }
  REQUIRE(replies.size() == 9);

  // Keyword coverage over the whole session: normalized union against truth.
  const auto ner = make_ner_backend("rule");
  std::set<std::string> truth, said;
  for (const auto& k : extract_keywords(kScenario, *ner, KeywordSource::scenario)) truth.insert(k.normalized);
  for (const auto& r : replies) {
    for (const auto& k : ner->recognize(r)) {
      const auto n = normalize_keyword(k.surface);
      if (!n.empty()) said.insert(n);
    }
  }
  std::size_t hit = 0;
  for (const auto& s : said) hit += truth.count(s);
  const auto& micro = report["faithfulness"]["micro"];
  CHECK(micro["matched"] == hit);
  CHECK(micro["truth"] == truth.size());
  CHECK(micro["recall"].get<double>() == doctest::Approx(double(hit) / truth.size()).epsilon(1e-12));

  // Grammar tallies by hand.
  RuleGrammarJudge g;
  std::map<std::string, std::size_t> tally;
  for (const auto& r : replies) ++tally[g.classify(r).value];
  const auto& labels = report["grammar"]["labels"];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto label = labels[i].get<std::string>();
    CHECK(report["grammar"]["counts"][i].get<std::size_t>() == (tally.count(label) ? tally[label] : 0));
  }

  // Trajectory: replies only, progress i / (n - 1).
  const auto& records = report["emotion_trajectory"]["records"];
  REQUIRE(records.size() == 9);
  LexiconEmotionJudge lex;
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(records[i]["progress"].get<double>() == doctest::Approx(i / 8.0));
    CHECK(records[i]["emotion"] == std::string(to_string(lex.classify(replies[i]).value)));
  }
  std::size_t words = 0;
  for (const auto& r : replies) words += text::split_whitespace(r).size();
  CHECK(report["length_emotion"]["mean_words"].get<double>() == doctest::Approx(words / 9.0));
  CHECK(report["source"] == "model");
}

TEST_CASE("debrief edge cases") {
  auto b = default_backends("echo");
  b.emotion = std::make_shared<ConstantEmotionJudge>(Emotion::neutral);
  SessionManager mgr(b);
  const auto id = mgr.create(kScenario).id;
  mgr.post(id, "Hello there.");
  auto one = mgr.debrief(id);
  REQUIRE(one["emotion_trajectory"]["records"].size() == 1);
  CHECK(one["emotion_trajectory"]["records"][0]["progress"] == 0.0);
  for (int i = 0; i < 6; ++i) mgr.post(id, "More please.");
  const auto many = mgr.debrief(id);
  for (const auto& bin : many["emotion_trajectory"]["bins"]) {
    if (bin["n"].get<std::size_t>() > 0) CHECK(bin["neutral_rate"] == 1.0);
  }

  // Scenario without entities: no faithfulness section, report still valid.
  const auto plain = mgr.create("someone called about noise.").id;
  mgr.post(plain, "ok.");
  const auto r = mgr.debrief(plain);
  CHECK(r["faithfulness"].is_null());
  CHECK_FALSE(validate_both(r, "report.schema.json").has_value());
}

TEST_CASE("HTTP API responses validate against the schema") {
  const auto dir = fresh_dir("vicsim_runtime_http");
  SessionManager mgr(default_backends("echo"), dir);
  HttpService service(mgr);
  const int port = service.bind("127.0.0.1", 0);
  std::thread server([&] { service.serve(); });
  httplib::Client cli("127.0.0.1", port);
  for (int i = 0; i < 100 && !service.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

  auto check = [](const httplib::Result& res, int status, const std::string& definition,
                  const std::string& schema = "api.schema.json") {
    REQUIRE(res);
    CHECK(res->status == status);
    const auto body = json::parse(res->body);
    const auto problem = validate_both(body, schema, definition);
    CHECK_MESSAGE(!problem.has_value(), problem.value_or(""));
    return body;
  };

  check(cli.Get("/healthz"), 200, "health");

  const json create_req = {{"scenario", kScenario}, {"options", {{"seed", 5}}}};
  CHECK_FALSE(validate_both(create_req, "api.schema.json", "create_request").has_value());
  const auto created = check(cli.Post("/sessions", create_req.dump(), "application/json"), 201, "create_response");
  const auto id = created["session_id"].get<std::string>();
  CHECK_FALSE(created["keywords"].empty());

  check(cli.Get("/sessions/" + id + "/debrief"), 422, "error");
  const auto reply = check(cli.Post("/sessions/" + id + "/messages", R"({"text": "Where is Daniels now?"})",
                                    "application/json"),
                           200, "victim_reply");
  CHECK(reply["text"] == "echo: Where is Daniels now?");
  cli.Post("/sessions/" + id + "/messages", R"({"text": "Is he hurt?"})", "application/json");

  const auto session = check(cli.Get("/sessions/" + id), 200, "session");
  CHECK(session["history"].size() == 4);
  CHECK(session["history"][1]["role"] == "victim");
  CHECK(session["options"]["seed"] == 5);

  const auto debrief = check(cli.Get("/sessions/" + id + "/debrief"), 200, "", "report.schema.json");
  CHECK(debrief == json::parse(mgr.debrief(id).dump()));

  check(cli.Post("/sessions", R"({"scenario": ""})", "application/json"), 422, "error");
  check(cli.Post("/sessions", "not json", "application/json"), 400, "error");
  check(cli.Post("/sessions", R"({"scenario": "x", "options": {"bogus": 1}})", "application/json"), 422, "error");
  check(cli.Post("/sessions/" + id + "/messages", R"({"text": ""})", "application/json"), 422, "error");
  check(cli.Post("/sessions/missing/messages", R"({"text": "hi"})", "application/json"), 404, "error");
  check(cli.Get("/sessions/missing"), 404, "error");

  auto del = cli.Delete("/sessions/" + id);
  REQUIRE(del);
  CHECK(del->status == 204);
  check(cli.Post("/sessions/" + id + "/messages", R"({"text": "hi"})", "application/json"), 404, "error");

  service.stop();
  server.join();
}
