// vicsim command-line entry point.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "vicsim/adversarial.hpp"
#include "vicsim/assets.hpp"
#include "vicsim/config.hpp"
#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"
#include "vicsim/eval.hpp"
#include "vicsim/judges.hpp"
#include "vicsim/keyinfo.hpp"
#include "vicsim/prompting.hpp"
#include "vicsim/rng.hpp"
#include "vicsim/runtime.hpp"
#include "vicsim/text.hpp"

using namespace vicsim;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using ResponseKey = std::pair<std::string, std::size_t>;
using ResponseMap = std::map<ResponseKey, std::string>;

Date parse_date_flag(const std::string& flag, const std::string& value) {
  auto d = Date::parse(value);
  if (!d) throw InvalidArgument(flag + " must be YYYY-MM-DD, got '" + value + "'");
  return *d;
}

std::vector<Dialogue> load_dialogues(const std::string& path) {
  auto loaded = load_corpus(path);
  if (!loaded.rejections.empty()) {
    std::cerr << "warning: " << loaded.rejections.size() << " invalid record(s) skipped in " << path << "\n";
  }
  return std::move(loaded.dialogues);
}

void write_jsonl(const std::string& path, const std::vector<ordered_json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  write_file_atomic(path, out);
}

ResponseMap load_responses(const std::string& path) {
  ResponseMap out;
  const auto content = read_file(path);
  std::size_t pos = 0, line = 0;
  while (pos < content.size()) {
    auto eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    const auto row = std::string_view(content).substr(pos, eol - pos);
    pos = eol + 1;
    ++line;
    if (text::trim(row).empty()) continue;
    try {
      const auto j = json::parse(row);
      out[{j.at("dialogue_id").get<std::string>(), j.at("utterance").get<std::size_t>()}] =
          j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw InvalidArgument(path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::size_t> user_indices(const Dialogue& d) {
  std::vector<std::size_t> out;
  for (const auto& u : d.utterances) {
    if (u.role == Role::user) out.push_back(u.index);
  }
  return out;
}

bool has_scenario(const Dialogue& d) { return d.scenario && !text::trim(*d.scenario).empty(); }

// Dialogues whose user turns are all answered in responses, with those turns
// replaced by the responses.
std::vector<Dialogue> substitute_responses(const std::vector<Dialogue>& corpus, const ResponseMap& responses) {
  std::set<std::string> ids;
  std::vector<Dialogue> out;
  for (const auto& d : corpus) {
    ids.insert(d.id);
    std::size_t found = 0;
    const auto users = user_indices(d);
    for (auto i : users) found += responses.count({d.id, i});
    if (found == 0) continue;
    if (found != users.size()) {
      throw InvalidArgument("responses cover " + std::to_string(found) + " of " + std::to_string(users.size()) +
                            " user turns in dialogue " + d.id);
    }
    Dialogue m = d;
    for (auto i : users) m.utterances[i].text = responses.at({d.id, i});
    out.push_back(std::move(m));
  }
  for (const auto& [key, text] : responses) {
    if (!ids.count(key.first)) throw InvalidArgument("response for unknown dialogue " + key.first);
  }
  if (out.empty()) throw InvalidArgument("no response matches a corpus dialogue");
  return out;
}

struct Judges {
  std::shared_ptr<const EmotionJudge> emotion;
  std::shared_ptr<const GrammarJudge> grammar;
};

Judges make_judges(const std::string& kind, const std::string& model_path) {
  if (kind == "rule") return {std::make_shared<LexiconEmotionJudge>(), std::make_shared<RuleGrammarJudge>()};
  if (model_path.empty()) throw InvalidArgument("--judges model needs --model <discriminator.json>");
  auto model = std::make_shared<StyleDiscriminator>();
  model->load_state(json::parse(read_file(model_path)));
  return {std::make_shared<ModelEmotionJudge>(model), std::make_shared<ModelGrammarJudge>(model)};
}

std::vector<std::string> user_texts(const std::vector<Dialogue>& dialogues) {
  std::vector<std::string> out;
  for (const auto& d : dialogues) {
    for (const auto& u : d.utterances) {
      if (u.role == Role::user) out.push_back(u.text);
    }
  }
  return out;
}

void add_metrics(ReportBuilder& report, const std::vector<Dialogue>& dialogues, ResponseSource source,
                 const Judges& judges, const NerBackend& ner) {
  std::vector<ResponsePair> pairs;
  std::vector<KeywordPair> keyword_pairs;
  std::vector<std::string> grounded;
  for (const auto& d : dialogues) {
    if (!has_scenario(d)) continue;
    const auto truth = extract_keywords(*d.scenario, ner, KeywordSource::scenario);
    for (const auto& u : d.utterances) {
      if (u.role != Role::user) continue;
      pairs.push_back({u.text, *d.scenario});
      keyword_pairs.push_back({extract_keywords(u.text, ner), truth});
      grounded.push_back(u.text);
    }
  }
  if (!pairs.empty()) {
    try {
      report.faithfulness(corpus_faithfulness(pairs, ner));
    } catch (const InvalidArgument& e) {
      std::cerr << "warning: faithfulness skipped: " << e.what() << "\n";
    }
    report.hallucination(hallucination_emotion_association(grounded, low_precision_flags(keyword_pairs),
                                                           *judges.emotion));
  }
  const auto texts = user_texts(dialogues);
  if (texts.empty()) throw InvalidArgument("corpus has no user utterances");
  report.trajectory(emotion_trajectory(dialogues, *judges.emotion, source));
  report.length(length_emotion_stats(texts, ValenceLexicon::bundled()));
  report.successive(successive_emotion_stats(dialogues, ValenceLexicon::bundled()));
  report.grammar(grammar_distribution(texts, *judges.grammar));
}

DecodeParams decode_from(double temperature, double top_p, std::size_t max_tokens, bool greedy) {
  DecodeParams p;
  p.temperature = temperature;
  p.top_p = top_p;
  p.max_tokens = max_tokens;
  p.greedy = greedy;
  return p;
}

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VicSim: victim-simulator training, evaluation and session service"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and filter a raw dialogue JSONL corpus");
  std::string ingest_in, ingest_out, ingest_rejections, ingest_from = "2018-01-01", ingest_to = "2019-12-31";
  std::size_t ingest_min = 3;
  ingest->add_option("--in", ingest_in, "Raw JSONL corpus")->required();
  ingest->add_option("--out", ingest_out, "Filtered JSONL corpus")->required();
  ingest->add_option("--rejections", ingest_rejections, "Write rejected records as JSONL");
  ingest->add_option("--min-utterances", ingest_min, "Minimum utterances per dialogue")->capture_default_str();
  ingest->add_option("--from", ingest_from, "First date kept")->capture_default_str();
  ingest->add_option("--to", ingest_to, "Last date kept")->capture_default_str();

  // synth-corpus
  auto* synth = app.add_subcommand("synth-corpus", "Write a synthetic dialogue corpus");
  std::size_t synth_n = 200;
  std::uint64_t synth_seed = 0;
  std::string synth_out, synth_log;
  bool synth_clean = false;
  synth->add_option("--n", synth_n, "Number of dialogues")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output JSONL")->required();
  synth->add_option("--injection-log", synth_log, "Write per-utterance injected errors as JSONL");
  synth->add_flag("--error-free", synth_clean, "Disable grammar error injection");

  // extract-keywords
  auto* extract = app.add_subcommand("extract-keywords", "Typed keywords of scenarios or free text");
  std::string extract_corpus, extract_text, extract_out, extract_ner = "rule";
  auto* extract_corpus_opt = extract->add_option("--corpus", extract_corpus, "Corpus whose scenarios to process");
  extract->add_option("--text", extract_text, "Single text to process")->excludes(extract_corpus_opt);
  extract->add_option("--out", extract_out, "Output JSONL (stdout when omitted)");
  extract->add_option("--ner", extract_ner, "NER backend")->check(CLI::IsMember({"rule", "external"}))
      ->capture_default_str();

  // render-prompts
  auto* render = app.add_subcommand("render-prompts", "Render training prompts for every user turn");
  std::string render_corpus, render_out, render_template = "default", render_ner = "rule";
  bool render_keywords = false, render_error_style = false;
  render->add_option("--corpus", render_corpus, "Corpus JSONL")->required();
  render->add_option("--out", render_out, "Output JSONL")->required();
  render->add_option("--template", render_template, "Prompt template name")->capture_default_str();
  render->add_flag("--keywords", render_keywords, "Add the scenario keyword block");
  render->add_flag("--error-style", render_error_style, "Append the error-style instruction");
  render->add_option("--ner", render_ner, "NER backend")->check(CLI::IsMember({"rule", "external"}))
      ->capture_default_str();

  // distill
  auto* distill = app.add_subcommand("distill", "Pre-train a discriminator on emotion and grammar labels");
  std::string distill_backend = "style", distill_out;
  std::size_t distill_n_emotion = 2000, distill_n_grammar = 5000, distill_epochs = 5;
  std::uint64_t distill_seed = 0;
  double distill_heldout = 0.2;
  distill->add_option("--backend", distill_backend, "Learner")->check(CLI::IsMember({"style", "majority"}))
      ->capture_default_str();
  distill->add_option("--out", distill_out, "Output directory")->required();
  distill->add_option("--n-emotion", distill_n_emotion, "Synthetic emotion examples")->capture_default_str();
  distill->add_option("--n-grammar", distill_n_grammar, "Synthetic grammar examples")->capture_default_str();
  distill->add_option("--epochs", distill_epochs, "Training epochs")->capture_default_str();
  distill->add_option("--seed", distill_seed, "Random seed")->capture_default_str();
  distill->add_option("--heldout", distill_heldout, "Held-out fraction")->capture_default_str();

  // train-gan
  auto* train = app.add_subcommand("train-gan", "Adversarial training of the victim generator");
  std::string train_corpus, train_out, train_config, train_generator = "copy", train_discriminator = "style",
                                                     train_init;
  bool train_keywords = false, train_error_style = false;
  std::optional<std::size_t> train_rounds;
  std::optional<std::uint64_t> train_seed;
  std::size_t train_heldout = 200;
  train->add_option("--corpus", train_corpus, "Training corpus JSONL")->required();
  train->add_option("--out", train_out, "Run directory")->required();
  train->add_option("--config", train_config, "GAN config (TOML subset)");
  train->add_option("--generator", train_generator, "Generator backend")
      ->check(CLI::IsMember({"copy", "scripted", "echo"}))->capture_default_str();
  train->add_option("--discriminator", train_discriminator, "Discriminator backend")
      ->check(CLI::IsMember({"style", "logistic", "constant"}))->capture_default_str();
  train->add_option("--discriminator-init", train_init, "Saved discriminator state to start from");
  train->add_flag("--keywords", train_keywords, "Add the scenario keyword block to prompts");
  train->add_flag("--error-style", train_error_style, "Append the error-style instruction");
  train->add_option("--rounds", train_rounds, "Override max_rounds");
  train->add_option("--seed", train_seed, "Override seed");
  train->add_option("--heldout", train_heldout, "Cap on held-out pairs for accuracy tracking")
      ->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "Generate a reply for every user turn of a corpus");
  std::string gen_corpus, gen_out, gen_backend, gen_template = "default";
  bool gen_keywords = false, gen_error_style = false, gen_greedy = false;
  std::uint64_t gen_seed = 0;
  double gen_temperature = 1.0, gen_top_p = 0.9;
  std::size_t gen_max_tokens = 32;
  generate->add_option("--corpus", gen_corpus, "Corpus JSONL")->required();
  generate->add_option("--generator", gen_backend, "echo, scripted, checkpoint:<path> or copy:<path>")->required();
  generate->add_option("--out", gen_out, "Responses JSONL")->required();
  generate->add_option("--template", gen_template, "Prompt template name")->capture_default_str();
  generate->add_flag("--keywords", gen_keywords, "Add the scenario keyword block");
  generate->add_flag("--error-style", gen_error_style, "Append the error-style instruction");
  generate->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  generate->add_option("--temperature", gen_temperature, "Sampling temperature")->capture_default_str();
  generate->add_option("--top-p", gen_top_p, "Nucleus mass")->capture_default_str();
  generate->add_option("--max-tokens", gen_max_tokens, "Reply length cap")->capture_default_str();
  generate->add_flag("--greedy", gen_greedy, "Greedy decoding");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Compute the evaluation report for a corpus or responses");
  std::string eval_corpus, eval_responses, eval_judges = "rule", eval_model, eval_out, eval_ner = "rule",
                                                      eval_timestamp;
  bool eval_no_timestamp = false;
  evaluate->add_option("--corpus", eval_corpus, "Reference corpus JSONL")->required();
  evaluate->add_option("--responses", eval_responses, "Generated responses JSONL; omit to evaluate the corpus");
  evaluate->add_option("--judges", eval_judges, "Judge family")->check(CLI::IsMember({"rule", "model"}))
      ->capture_default_str();
  evaluate->add_option("--model", eval_model, "Distilled discriminator for --judges model");
  evaluate->add_option("--out", eval_out, "Report directory")->required();
  evaluate->add_option("--ner", eval_ner, "NER backend")->check(CLI::IsMember({"rule", "external"}))
      ->capture_default_str();
  evaluate->add_option("--timestamp", eval_timestamp, "generated_at value (default: now)");
  evaluate->add_flag("--no-timestamp", eval_no_timestamp, "Leave generated_at null");

  // survey-export
  auto* survey = app.add_subcommand("survey-export", "Blinded three-way rating form with answer key");
  std::string survey_corpus, survey_a, survey_b, survey_out;
  std::uint64_t survey_seed = 0;
  std::size_t survey_items = 20;
  survey->add_option("--corpus", survey_corpus, "Corpus with the human turns")->required();
  survey->add_option("--model-a", survey_a, "Responses JSONL of the first model")->required();
  survey->add_option("--model-b", survey_b, "Responses JSONL of the second model")->required();
  survey->add_option("--out", survey_out, "Output directory")->required();
  survey->add_option("--seed", survey_seed, "Option-order seed")->capture_default_str();
  survey->add_option("--items", survey_items, "Maximum items")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  std::string serve_host = "127.0.0.1", serve_backend, serve_data_dir, serve_config;
  int serve_port = 8080;
  serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_port, "Port; 0 picks a free one")->capture_default_str();
  serve->add_option("--backend", serve_backend, "Generator (default: $VICSIM_BACKEND or echo)");
  serve->add_option("--data-dir", serve_data_dir, "Session log directory (default: $VICSIM_DATA_DIR)");
  serve->add_option("--config", serve_config, "Session defaults (TOML subset)");

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == argv[1];
    if (!known) {
      std::cerr << "error: unknown subcommand '" << argv[1] << "'\n" << app.help();
      return 2;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  try {
    if (ingest->parsed()) {
      FilterOptions f;
      f.min_utterances = ingest_min;
      f.from = parse_date_flag("--from", ingest_from);
      f.to = parse_date_flag("--to", ingest_to);
      auto loaded = load_corpus(ingest_in);
      const auto kept = filter_corpus(loaded.dialogues, f);
      save_corpus(ingest_out, kept);
      if (!ingest_rejections.empty()) {
        std::vector<ordered_json> rows;
        for (const auto& r : loaded.rejections) {
          rows.push_back({{"line", r.line}, {"rule", std::string(to_string(r.rule))}, {"reason", r.reason}});
        }
        write_jsonl(ingest_rejections, rows);
      }
      std::cout << "kept " << kept.size() << " of " << loaded.dialogues.size() << " valid dialogues; "
                << loaded.rejections.size() << " record(s) rejected\n";
    } else if (synth->parsed()) {
      std::vector<InjectionRecord> log;
      const auto profile = synth_clean ? SynthesisProfile::error_free() : SynthesisProfile::default_profile();
      const auto corpus = synthesize_corpus(synth_n, synth_seed, profile, &log);
      save_corpus(synth_out, corpus);
      if (!synth_log.empty()) {
        std::vector<ordered_json> rows;
        for (const auto& r : log) {
          rows.push_back({{"dialogue_id", r.dialogue_id},
                          {"utterance", r.utterance},
                          {"error", std::string(to_string(r.error))}});
        }
        write_jsonl(synth_log, rows);
      }
      std::cout << "wrote " << corpus.size() << " dialogues to " << synth_out << "\n";
    } else if (extract->parsed()) {
      const auto ner = make_ner_backend(extract_ner);
      std::vector<ordered_json> rows;
      if (!extract_text.empty()) {
        rows.push_back({{"keywords", keywords_json(extract_keywords(extract_text, *ner))}});
      } else if (!extract_corpus.empty()) {
        for (const auto& d : load_dialogues(extract_corpus)) {
          if (!has_scenario(d)) continue;
          rows.push_back(
              {{"dialogue_id", d.id},
               {"keywords", keywords_json(extract_keywords(*d.scenario, *ner, KeywordSource::scenario))}});
        }
      } else {
        throw InvalidArgument("one of --corpus or --text is required");
      }
      if (extract_out.empty()) {
        for (const auto& r : rows) std::cout << r.dump() << "\n";
      } else {
        write_jsonl(extract_out, rows);
      }
    } else if (render->parsed()) {
      const auto ner = make_ner_backend(render_ner);
      ExampleOptions opts{render_keywords, render_error_style, render_template};
      std::vector<ordered_json> rows;
      for (const auto& d : load_dialogues(render_corpus)) {
        if (!has_scenario(d)) continue;
        const auto examples = build_examples({d}, *ner, opts);
        const auto users = user_indices(d);
        for (std::size_t i = 0; i < examples.size(); ++i) {
          rows.push_back({{"dialogue_id", d.id},
                          {"utterance", users.at(i)},
                          {"prompt", examples[i].context.prompt},
                          {"target", examples[i].target}});
        }
      }
      write_jsonl(render_out, rows);
      std::cout << "wrote " << rows.size() << " prompts to " << render_out << "\n";
    } else if (distill->parsed()) {
      const auto dataset = distillation_dataset(synthesize_emotion_corpus(distill_n_emotion, distill_seed),
                                                synthesize_grammar_corpus(distill_n_grammar, distill_seed + 1,
                                                                          injectable_grammar_classes()),
                                                distill_seed + 2);
      DistillOptions opts;
      opts.epochs = distill_epochs;
      opts.seed = distill_seed;
      opts.heldout_fraction = distill_heldout;
      DistillReport report;
      const std::filesystem::path out = distill_out;
      if (distill_backend == "style") {
        StyleDiscriminatorOptions so;
        so.seed = distill_seed;
        StyleDiscriminator model(so);
        report = distill_discriminator(model, dataset, opts);
        write_file_atomic(out / "discriminator.json", model.save_state().dump() + "\n");
      } else {
        MajorityLabelLearner learner;
        report = distill_discriminator(learner, dataset, opts);
      }
      write_file_atomic(out / "distill_report.json", to_json(report).dump(2) + "\n");
      std::cout << "held-out accuracy " << report.overall_accuracy << " (" << report.learner << ")\n";
    } else if (train->parsed()) {
      auto config = train_config.empty() ? GanConfig{} : GanConfig::from_config(Config::load(train_config));
      if (train_rounds) config.max_rounds = *train_rounds;
      if (train_seed) config.seed = *train_seed;
      config.validate();

      const auto ner = make_ner_backend("rule");
      std::vector<Dialogue> eligible;
      for (auto& d : load_dialogues(train_corpus)) {
        if (d.training_eligible() && has_scenario(d)) eligible.push_back(std::move(d));
      }
      if (eligible.empty()) throw InvalidArgument("corpus has no dialogue with a scenario and both roles");
      const auto split = split_corpus(eligible, {0.8, 0.2}, config.seed);
      ExampleOptions eo{train_keywords, train_error_style, "default"};
      const auto train_pairs = build_examples(split.train, *ner, eo);
      auto heldout = build_examples(split.eval, *ner, eo);
      if (heldout.size() > train_heldout) heldout.resize(train_heldout);
      if (train_pairs.empty()) throw InvalidArgument("no training pairs");

      std::unique_ptr<GeneratorBackend> generator;
      if (train_generator == "copy") {
        CopyGeneratorOptions co;
        co.seed = config.seed;
        generator = std::make_unique<CopyGenerator>(train_pairs, co);
      } else if (train_generator == "scripted") {
        generator = std::make_unique<ScriptedGenerator>(std::vector<std::pair<std::string, double>>{
            {"I need help, someone took my bag.", 1.0},
            {"i dont know", 1.0},
            {"He was wearing a black jacket.", 1.0},
            {"please hurry", 1.0}});
      } else {
        generator = std::make_unique<EchoGenerator>();
      }
      std::unique_ptr<DiscriminatorBackend> discriminator;
      if (train_discriminator == "style") {
        StyleDiscriminatorOptions so;
        so.seed = config.seed;
        discriminator = std::make_unique<StyleDiscriminator>(so);
      } else if (train_discriminator == "logistic") {
        discriminator = std::make_unique<LogisticDiscriminator>();
      } else {
        discriminator = std::make_unique<ConstantDiscriminator>();
      }
      if (!train_init.empty()) discriminator->load_state(json::parse(read_file(train_init)));

      GanRunOptions ro;
      ro.run_dir = std::filesystem::path(train_out);
      ro.heldout = heldout;
      ro.on_round = [](const TrainingMetrics& m) { std::cout << to_json(m).dump() << "\n"; };
      const auto result = train_gan(*generator, *discriminator, train_pairs, config, ro);
      write_file_atomic(std::filesystem::path(train_out) / "generator.json", generator->save_state().dump() + "\n");
      write_file_atomic(std::filesystem::path(train_out) / "discriminator.json",
                        discriminator->save_state().dump() + "\n");
      std::cout << "trained " << result.metrics.size() << " round(s); run in " << train_out << "\n";
    } else if (generate->parsed()) {
      const auto generator = make_generator(gen_backend);
      const auto ner = make_ner_backend("rule");
      ExampleOptions eo{gen_keywords, gen_error_style, gen_template};
      auto decode = decode_from(gen_temperature, gen_top_p, gen_max_tokens, gen_greedy);
      std::vector<ordered_json> rows;
      std::uint64_t stream = 0;
      for (const auto& d : load_dialogues(gen_corpus)) {
        if (!has_scenario(d)) continue;
        const auto examples = build_examples({d}, *ner, eo);
        const auto users = user_indices(d);
        for (std::size_t i = 0; i < examples.size(); ++i) {
          decode.seed = Rng::derive(gen_seed, stream++).next_u64();
          const auto s = generator->sample(examples[i].context, decode);
          rows.push_back({{"dialogue_id", d.id}, {"utterance", users.at(i)}, {"text", s.text}});
        }
      }
      write_jsonl(gen_out, rows);
      std::cout << "wrote " << rows.size() << " responses to " << gen_out << "\n";
    } else if (evaluate->parsed()) {
      const auto judges = make_judges(eval_judges, eval_model);
      const auto ner = make_ner_backend(eval_ner);
      const auto corpus = load_dialogues(eval_corpus);
      RunMetadata meta;
      meta.source = eval_responses.empty() ? "human" : "model";
      std::string hash_input = "corpus=" + sha256_hex(read_file(eval_corpus)) + "\njudges=" + eval_judges +
                               "\nner=" + eval_ner + "\n";
      if (!eval_responses.empty()) hash_input += "responses=" + sha256_hex(read_file(eval_responses)) + "\n";
      if (!eval_model.empty()) hash_input += "model=" + sha256_hex(read_file(eval_model)) + "\n";
      meta.config_hash = sha256_hex(hash_input);
      meta.backends["emotion"] = judges.emotion->name();
      meta.backends["grammar"] = judges.grammar->name();
      meta.backends["ner"] = ner->name();
      ReportBuilder report(meta);
      if (eval_responses.empty()) {
        add_metrics(report, corpus, ResponseSource::human, judges, *ner);
      } else {
        const auto model = substitute_responses(corpus, load_responses(eval_responses));
        add_metrics(report, model, ResponseSource::model, judges, *ner);
        std::set<std::string> ids;
        for (const auto& d : model) ids.insert(d.id);
        std::vector<Dialogue> human;
        for (const auto& d : corpus) {
          if (ids.count(d.id)) human.push_back(d);
        }
        const auto reference = grammar_distribution(user_texts(human), *judges.grammar);
        const auto generated = grammar_distribution(user_texts(model), *judges.grammar);
        report.grammar_correlation("human", distribution_correlation(reference, generated));
      }
      const auto stamp = eval_no_timestamp ? std::string() : (eval_timestamp.empty() ? utc_timestamp() : eval_timestamp);
      report.write(eval_out, stamp);
      std::cout << "wrote report to " << eval_out << "\n";
    } else if (survey->parsed()) {
      const auto corpus = load_dialogues(survey_corpus);
      const auto a = load_responses(survey_a);
      const auto b = load_responses(survey_b);
      std::vector<SurveyIncident> incidents;
      for (const auto& d : corpus) {
        for (auto i : user_indices(d)) {
          if (incidents.size() >= survey_items) break;
          const ResponseKey key{d.id, i};
          if (!a.count(key) || !b.count(key)) continue;
          SurveyIncident inc;
          inc.id = d.id + "#" + std::to_string(i);
          for (std::size_t k = 0; k < i; ++k) inc.history.push_back({d.utterances[k].role, d.utterances[k].text});
          inc.responses = {{"human", d.utterances[i].text}, {"model_a", a.at(key)}, {"model_b", b.at(key)}};
          incidents.push_back(std::move(inc));
        }
      }
      if (incidents.empty()) throw InvalidArgument("no user turn is answered by both models");
      write_survey(export_survey(incidents, {"human", "model_a", "model_b"}, survey_seed), survey_out);
      std::cout << "wrote " << incidents.size() << " survey items to " << survey_out << "\n";
    } else if (serve->parsed()) {
      const auto backend = serve_backend.empty() ? env_or("VICSIM_BACKEND", "echo") : serve_backend;
      const auto data_dir = serve_data_dir.empty() ? env_or("VICSIM_DATA_DIR", "") : serve_data_dir;
      const auto defaults = serve_config.empty() ? SessionOptions{}
                                                 : SessionOptions::from_config(Config::load(serve_config));
      SessionManager manager(default_backends(backend),
                             data_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(data_dir),
                             defaults);
      HttpService service(manager);
      const int port = service.bind(serve_host, serve_port);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        service.stop();
      });
      std::cout << "listening on http://" << serve_host << ":" << port << " (generator " << backend << ")"
                << std::endl;
      service.serve();
      g_stop = true;
      watcher.join();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
