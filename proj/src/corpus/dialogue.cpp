#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "vicsim/assets.hpp"
#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

namespace {

constexpr std::array<std::string_view, 9> kEventNames = {
    "SuspiciousActivity", "AccidentTrafficParking", "DrugsAlcohol",
    "EmergencyMessage",   "FacilitiesMaintenance",  "HarassmentAbuse",
    "MentalHealth",       "NoiseDisturbance",       "TheftLostItem",
};

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : kDays[m - 1];
}

}  // namespace

std::string_view to_string(Role role) { return role == Role::user ? "user" : "dispatcher"; }

std::optional<Role> parse_role(std::string_view s) {
  if (s == "user") return Role::user;
  if (s == "dispatcher") return Role::dispatcher;
  return std::nullopt;
}

std::string_view to_string(EventType type) { return kEventNames[static_cast<std::size_t>(type)]; }

std::optional<EventType> parse_event_type(std::string_view s) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == s) return kAllEventTypes[i];
  }
  return std::nullopt;
}

std::optional<Date> Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!text::is_digit(iso[i])) return std::nullopt;
  }
  auto num = [&](std::size_t b, std::size_t n) {
    int v = 0;
    for (std::size_t i = b; i < b + n; ++i) v = v * 10 + (iso[i] - '0');
    return v;
  };
  Date d{num(0, 4), num(5, 2), num(8, 2)};
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    return std::nullopt;
  }
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::size_t Dialogue::user_count() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.role == Role::user;
  return n;
}

std::size_t Dialogue::dispatcher_count() const { return utterances.size() - user_count(); }

bool Dialogue::training_eligible() const { return user_count() > 0 && dispatcher_count() > 0; }

bool operator==(const Utterance& a, const Utterance& b) {
  return a.role == b.role && a.text == b.text && a.index == b.index;
}

bool operator==(const Dialogue& a, const Dialogue& b) {
  return a.id == b.id && a.event_type == b.event_type && a.timestamp == b.timestamp &&
         a.scenario == b.scenario && a.utterances == b.utterances;
}

std::optional<std::string> validate(const Dialogue& dialogue) {
  if (dialogue.id.empty()) return "empty id";
  for (std::size_t i = 0; i < dialogue.utterances.size(); ++i) {
    const auto& u = dialogue.utterances[i];
    if (u.index != i) return "utterance indices are not consecutive from 0";
    if (text::trim(u.text).empty()) return "utterance " + std::to_string(i) + " is blank";
  }
  return std::nullopt;
}

std::string_view to_string(RejectionRule rule) {
  switch (rule) {
    case RejectionRule::malformed_json: return "malformed_json";
    case RejectionRule::schema_violation: return "schema_violation";
    case RejectionRule::unknown_event_type: return "unknown_event_type";
    case RejectionRule::test_entry: return "test_entry";
    case RejectionRule::invalid_utterance: return "invalid_utterance";
  }
  return "unknown";
}

LoadResult parse_corpus(std::string_view jsonl) {
  using nlohmann::json;
  LoadResult result;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    auto eol = jsonl.find('\n', pos);
    if (eol == std::string_view::npos) eol = jsonl.size();
    auto line = jsonl.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;

    auto reject = [&](RejectionRule rule, std::string reason) {
      result.rejections.push_back({line_no, rule, std::move(reason)});
    };

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      reject(RejectionRule::malformed_json, e.what());
      continue;
    }
    if (!record.is_object()) {
      reject(RejectionRule::schema_violation, "record is not an object");
      continue;
    }
    auto string_field = [&](const char* key) -> const std::string* {
      auto it = record.find(key);
      if (it == record.end() || !it->is_string()) return nullptr;
      return it->get_ptr<const std::string*>();
    };
    const auto* id = string_field("id");
    const auto* event = string_field("event_type");
    const auto* stamp = string_field("timestamp");
    if (id == nullptr || event == nullptr || stamp == nullptr) {
      reject(RejectionRule::schema_violation, "id, event_type and timestamp must be strings");
      continue;
    }
    if (*event == "Test") {
      reject(RejectionRule::test_entry, "event_type 'Test': test entries are eliminated");
      continue;
    }
    auto type = parse_event_type(*event);
    if (!type) {
      reject(RejectionRule::unknown_event_type, "unknown event_type '" + *event + "'");
      continue;
    }
    auto date = Date::parse(*stamp);
    if (!date) {
      reject(RejectionRule::schema_violation, "timestamp '" + *stamp + "' is not YYYY-MM-DD");
      continue;
    }
    Dialogue d;
    d.id = *id;
    d.event_type = *type;
    d.timestamp = *date;
    if (auto it = record.find("scenario"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) {
        reject(RejectionRule::schema_violation, "scenario must be a string or null");
        continue;
      }
      d.scenario = it->get<std::string>();
    }
    auto utts = record.find("utterances");
    if (utts == record.end() || !utts->is_array()) {
      reject(RejectionRule::schema_violation, "utterances must be an array");
      continue;
    }
    bool ok = true;
    for (const auto& u : *utts) {
      if (!u.is_object() || !u.contains("role") || !u.contains("text") || !u["role"].is_string() ||
          !u["text"].is_string()) {
        reject(RejectionRule::schema_violation, "utterance needs string role and text");
        ok = false;
        break;
      }
      auto role = parse_role(u["role"].get<std::string>());
      if (!role) {
        reject(RejectionRule::invalid_utterance, "role must be user or dispatcher");
        ok = false;
        break;
      }
      d.utterances.push_back({*role, u["text"].get<std::string>(), d.utterances.size()});
    }
    if (!ok) continue;
    if (auto problem = validate(d)) {
      reject(RejectionRule::invalid_utterance, *problem);
      continue;
    }
    result.dialogues.push_back(std::move(d));
  }
  return result;
}

LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat) {
  return parse_corpus(read_file(path));
}

std::string serialize_dialogue(const Dialogue& dialogue) {
  nlohmann::ordered_json j;
  j["id"] = dialogue.id;
  j["event_type"] = std::string(to_string(dialogue.event_type));
  j["timestamp"] = dialogue.timestamp.to_string();
  j["scenario"] = dialogue.scenario ? nlohmann::ordered_json(*dialogue.scenario) : nlohmann::ordered_json(nullptr);
  auto& utts = j["utterances"] = nlohmann::ordered_json::array();
  for (const auto& u : dialogue.utterances) {
    utts.push_back({{"role", std::string(to_string(u.role))}, {"text", u.text}});
  }
  return j.dump();
}

std::string serialize_corpus(const std::vector<Dialogue>& dialogues) {
  std::string out;
  for (const auto& d : dialogues) {
    out += serialize_dialogue(d);
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& dialogues) {
  write_file_atomic(path, serialize_corpus(dialogues));
}

std::vector<Dialogue> filter_corpus(const std::vector<Dialogue>& dialogues, const FilterOptions& options) {
  if (options.to < options.from) {
    throw InvalidArgument("date range is inverted: " + options.from.to_string() + " > " +
                          options.to.to_string());
  }
  std::vector<Dialogue> kept;
  for (const auto& d : dialogues) {
    if (d.utterances.size() < options.min_utterances) continue;
    if (d.timestamp < options.from || options.to < d.timestamp) continue;
    kept.push_back(d);
  }
  return kept;
}

std::size_t turn_number(const Dialogue& dialogue, std::size_t utterance_index, TurnCounting counting) {
  if (utterance_index >= dialogue.utterances.size()) {
    throw InvalidArgument("utterance index out of range");
  }
  if (counting == TurnCounting::utterance) return utterance_index;
  std::size_t run = 0;
  for (std::size_t i = 1; i <= utterance_index; ++i) {
    if (dialogue.utterances[i].role != dialogue.utterances[i - 1].role) ++run;
  }
  return run;
}

}  // namespace vicsim
