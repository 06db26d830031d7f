#include <algorithm>
#include <cmath>

#include "vicsim/corpus.hpp"
#include "vicsim/error.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

std::string_view to_string(InjectedError e) {
  switch (e) {
    case InjectedError::none: return "none";
    case InjectedError::missing_end_punctuation: return "missing_end_punctuation";
    case InjectedError::lowercase_start: return "lowercase_start";
    case InjectedError::double_space: return "double_space";
    case InjectedError::unclosed_bracket: return "unclosed_bracket";
  }
  return "none";
}

SynthesisProfile SynthesisProfile::default_profile() {
  SynthesisProfile p;
  p.slots = {
      {"PERSON", {"Jane", "Dante", "Cortright", "Maria", "Kevin", "Priya", "Omar", "Lucas", "Mei", "Tyler",
                  "Aisha", "Diego"}},
      {"PLACE", {"Carnegie Library", "Heights Hall", "Lincoln Park", "Maple Apartments", "Union Plaza",
                 "Grant Street", "Foster Gym", "Oak Lot", "Birch Avenue", "Summit Center"}},
      {"TIME", {"nighttime", "afternoon", "morning", "evening", "midnight", "noon", "10:30pm", "2:00am"}},
      {"DATE", {"yesterday", "today", "Monday", "Friday", "Saturday", "Sunday"}},
      {"ORDINAL", {"second", "third", "first", "fourth", "fifth"}},
      {"TITLE", {"student", "professor", "teacher", "manager", "guard", "coach"}},
      {"ORG", {"UCLA", "USC", "NYU", "UIUC", "CMU"}},
      {"NUMBER", {"two", "three", "four", "five", "six"}},
  };

  const std::string tail =
      " The user said they were a {TITLE} at {ORG} and that it happened on the {ORDINAL} floor."
      " The dispatcher sent an officer and the user later spoke with {PERSON}.";
  auto scen = [&](std::string head) { return head + tail; };

  p.events = {
      {EventType::SuspiciousActivity,
       {{scen("The user reported {NUMBER} people checking car doors near {PLACE} during the {TIME} {DATE}."),
         scen("The user reported a stranger looking into windows at {PLACE} around {TIME}.")},
        {"There is someone suspicious walking around {PLACE} right now.",
         "I see {NUMBER} people trying car doors outside."}}},
      {EventType::AccidentTrafficParking,
       {{scen("The user reported a car blocking the entrance of {PLACE} since {TIME} {DATE}."),
         scen("The user reported a minor crash involving {NUMBER} cars near {PLACE} in the {TIME}.")},
        {"A car is blocking the entrance at {PLACE}.", "There was a small crash near {PLACE}."}}},
      {EventType::DrugsAlcohol,
       {{scen("The user reported {NUMBER} people smoking something in the stairwell of {PLACE} at {TIME}."),
         scen("The user reported a group drinking heavily near {PLACE} during the {TIME} {DATE}.")},
        {"People are smoking weed in the stairwell.", "There is a group drinking near {PLACE}."}}},
      {EventType::EmergencyMessage,
       {{scen("The user reported smoke coming from a room in {PLACE} during the {TIME} {DATE}."),
         scen("The user reported someone collapsed on the sidewalk by {PLACE} at {TIME}.")},
        {"There is smoke coming out of a room here.", "Someone collapsed outside {PLACE}."}}},
      {EventType::FacilitiesMaintenance,
       {{scen("The user reported a broken door lock at {PLACE} that had been failing since {DATE}."),
         scen("The user reported water leaking from the ceiling in {PLACE} during the {TIME}.")},
        {"The door lock at {PLACE} is broken.", "Water is leaking from the ceiling."}}},
      {EventType::HarassmentAbuse,
       {{scen("The user reported being followed by {NUMBER} people outside {PLACE} during the {TIME}."),
         scen("The user reported receiving threatening messages from a classmate since {DATE}.")},
        {"Someone keeps following me near {PLACE}.", "I keep getting threatening messages."}}},
      {EventType::MentalHealth,
       {{scen("The user reported a friend who seemed very distressed in {PLACE} during the {TIME} {DATE}."),
         scen("The user reported a roommate who had not left the room since {DATE}.")},
        {"My friend is not doing well and I am worried.", "I need help for my roommate."}}},
      {EventType::NoiseDisturbance,
       {{scen("The user reported loud music coming from {PLACE} during the {TIME} {DATE}."),
         scen("The user reported loud banging noises upstairs in {PLACE} since {TIME}.")},
        {"There is loud music coming from {PLACE}.", "Loud banging noises are coming from upstairs."}}},
      {EventType::TheftLostItem,
       {{scen("The user reported a stolen laptop from a desk at {PLACE} during the {TIME} {DATE}."),
         scen("The user reported {NUMBER} bikes missing from the rack near {PLACE} since {DATE}.")},
        {"My laptop was stolen from my desk at {PLACE}.", "Someone stole my bike from the rack."}}},
  };

  p.answers = {
      {"PLACE", {"At {PLACE}.", "I am at {PLACE} right now.", "It is near {PLACE}.",
                 "It is happening at {PLACE} by the main entrance."}},
      {"TIME", {"Around {TIME}.", "It started around {TIME}.", "It began in the {TIME} and is still going."}},
      {"DATE", {"It was {DATE}.", "It also happened {DATE}.", "I first noticed it {DATE}."}},
      {"ORDINAL", {"The {ORDINAL} floor.", "It is on the {ORDINAL} floor.",
                   "I think it is the {ORDINAL} floor near the stairs."}},
      {"TITLE", {"I am a {TITLE} here.", "I am a {TITLE} at {ORG}.", "Yes, I work here as a {TITLE}."}},
      {"NUMBER", {"There are {NUMBER} of them.", "I saw {NUMBER} people.", "Maybe {NUMBER} or so."}},
      {"PERSON", {"I spoke with {PERSON}.", "Officer {PERSON} was here earlier.", "{PERSON} can confirm it."}},
  };
  p.questions = {
      {"PLACE", {"Where are you located?", "What is the location?"}},
      {"TIME", {"What time did this start?", "When did this happen?"}},
      {"DATE", {"Has this happened before?", "What day was this?"}},
      {"ORDINAL", {"Which floor is it on?", "Which floor are you on?"}},
      {"TITLE", {"Are you a student or staff?", "What is your role there?"}},
      {"NUMBER", {"How many people are there?", "How many did you see?"}},
      {"PERSON", {"Who did you speak with?", "Did anyone else see it?"}},
  };
  p.fillers = {"Yes.",
               "No.",
               "Thank you.",
               "Okay, thanks.",
               "Yes, please send someone.",
               "No, not yet.",
               "It is still going on.",
               "I think they left now.",
               "Can someone come check it out?",
               "I will wait outside for the officer."};
  p.emotional_phrases = {"I am really scared.", "This is so frustrating.", "I am very worried.",
                         "Thank you so much, I appreciate it.", "I am upset about this.",
                         "That is great, thanks."};
  p.dispatcher_closers = {"Thank you. We will send an officer.", "Okay, an officer is on the way.",
                          "Thanks for letting us know.", "We will check the area."};
  p.p_missing_end_punctuation = 0.35;
  p.p_lowercase_start = 0.10;
  p.p_double_space = 0.05;
  p.p_unclosed_bracket = 0.03;
  return p;
}

SynthesisProfile SynthesisProfile::error_free() {
  auto p = default_profile();
  p.p_missing_end_punctuation = p.p_lowercase_start = p.p_double_space = p.p_unclosed_bracket = 0.0;
  return p;
}

std::optional<std::string> inject_error(std::string_view clean, InjectedError error, Rng& rng) {
  std::string s(text::trim(clean));
  if (s.empty()) return std::nullopt;
  switch (error) {
    case InjectedError::none:
      return s;
    case InjectedError::missing_end_punctuation: {
      if (s.back() != '.' && s.back() != '!' && s.back() != '?') return std::nullopt;
      while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) s.pop_back();
      s = std::string(text::trim(s));
      return s.empty() ? std::nullopt : std::optional(s);
    }
    case InjectedError::lowercase_start: {
      if (!text::is_upper(s.front())) return std::nullopt;
      s.front() = static_cast<char>(s.front() - 'A' + 'a');
      return s;
    }
    case InjectedError::double_space: {
      std::vector<std::size_t> spaces;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == ' ') spaces.push_back(i);
      }
      if (spaces.empty()) return std::nullopt;
      s.insert(spaces[rng.index(spaces.size())], " ");
      return s;
    }
    case InjectedError::unclosed_bracket: {
      std::vector<std::size_t> starts;
      for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i - 1] == ' ' && text::is_alpha(s[i])) starts.push_back(i);
      }
      if (starts.empty()) return std::nullopt;
      s.insert(starts[rng.index(starts.size())], "(");
      return s;
    }
  }
  return std::nullopt;
}

namespace {

using SlotValues = std::map<std::string, std::string>;

std::string fill_slots(std::string t, const SlotValues& values) {
  for (const auto& [name, value] : values) t = text::replace_all(std::move(t), "{" + name + "}", value);
  return t;
}

int days_from_civil(Date d) {
  int y = d.year - (d.month <= 2);
  const int era = (y >= 0 ? y : y - 399) / 400;
  const int yoe = y - era * 400;
  const int doy = (153 * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
  const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

Date civil_from_days(int z) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const int doe = z - era * 146097;
  const int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const int mp = (5 * doy + 2) / 153;
  const int d = doy - (153 * mp + 2) / 5 + 1;
  const int m = mp + (mp < 10 ? 3 : -9);
  return {yoe + era * 400 + (m <= 2), m, d};
}

class Synthesizer {
 public:
  Synthesizer(const SynthesisProfile& profile, std::uint64_t seed) : p_(profile), rng_(seed) {}

  Dialogue make(std::size_t ordinal, std::vector<InjectionRecord>* log) {
    Dialogue d;
    d.id = "synth-" + std::to_string(ordinal);
    const auto& type = kAllEventTypes[rng_.index(kAllEventTypes.size())];
    d.event_type = type;
    const int lo = days_from_civil(p_.from);
    const int hi = days_from_civil(p_.to);
    d.timestamp = civil_from_days(lo + static_cast<int>(rng_.index(static_cast<std::size_t>(hi - lo + 1))));

    SlotValues values;
    for (const auto& [name, pool] : p_.slots) values[name] = pool[rng_.index(pool.size())];

    const auto& templates = p_.events.at(type);
    d.scenario = fill_slots(pick(templates.scenarios), values);

    const std::size_t n = p_.min_utterances + rng_.index(p_.max_utterances - p_.min_utterances + 1);
    std::vector<std::string> slot_names;
    for (const auto& [name, qs] : p_.questions) slot_names.push_back(name);
    std::optional<std::string> pending;

    for (std::size_t i = 0; i < n; ++i) {
      Role role = Role::user;
      if (i > 0) {
        const Role prev = d.utterances.back().role;
        if (prev == Role::user) {
          role = rng_.bernoulli(p_.consecutive_user_rate) ? Role::user : Role::dispatcher;
        } else {
          role = rng_.bernoulli(0.05) ? Role::dispatcher : Role::user;
        }
      }
      std::string utterance;
      if (role == Role::dispatcher) {
        if (i + 1 == n || rng_.bernoulli(0.2)) {
          utterance = pick(p_.dispatcher_closers);
          pending.reset();
        } else {
          pending = slot_names[rng_.index(slot_names.size())];
          utterance = pick(p_.questions.at(*pending));
        }
      } else {
        utterance = user_utterance(i == 0 ? &templates.openings : nullptr, pending, values);
        pending.reset();
        utterance = maybe_mask(std::move(utterance), values);
        InjectedError err = draw_error();
        if (err != InjectedError::none) {
          if (auto injected = inject_error(utterance, err, rng_)) {
            utterance = *injected;
          } else {
            err = InjectedError::none;
          }
        }
        total_words_ += static_cast<double>(text::word_count(utterance));
        ++user_utterances_;
        if (log != nullptr) log->push_back({d.id, i, err});
      }
      d.utterances.push_back({role, std::move(utterance), i});
    }
    // Guarantee at least one dispatcher turn.
    if (d.dispatcher_count() == 0) {
      d.utterances.push_back({Role::dispatcher, pick(p_.dispatcher_closers), d.utterances.size()});
    }
    return d;
  }

 private:
  const std::string& pick(const std::vector<std::string>& pool) { return pool[rng_.index(pool.size())]; }

  // Two random candidates; keep whichever pulls the running mean toward the
  // target word count.
  std::string steer(const std::vector<std::string>& candidates) {
    const auto& a = pick(candidates);
    const auto& b = pick(candidates);
    const double next = static_cast<double>(user_utterances_ + 1);
    auto deviation = [&](const std::string& s) {
      const double mean = (total_words_ + static_cast<double>(text::word_count(s))) / next;
      return std::abs(mean - p_.target_mean_words);
    };
    return deviation(a) <= deviation(b) ? a : b;
  }

  std::string user_utterance(const std::vector<std::string>* openings, const std::optional<std::string>& pending,
                             const SlotValues& values) {
    std::vector<std::string> candidates;
    if (openings != nullptr) {
      candidates = *openings;
    } else if (pending && rng_.bernoulli(p_.answer_rate)) {
      candidates = p_.answers.at(*pending);
    } else if (rng_.bernoulli(0.3)) {
      auto it = p_.answers.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng_.index(p_.answers.size())));
      candidates = it->second;
    } else {
      candidates = p_.fillers;
    }
    if (rng_.bernoulli(p_.emotion_word_rate)) {
      const auto& phrase = pick(p_.emotional_phrases);
      for (auto& c : candidates) c += " " + phrase;
      if (openings == nullptr) candidates.push_back(phrase);
    }
    return fill_slots(steer(candidates), values);
  }

  std::string maybe_mask(std::string s, const SlotValues& values) {
    if (!rng_.bernoulli(p_.mask_tag_rate)) return s;
    for (const auto& [slot, tag] : {std::pair{"PLACE", "[LOCATION]"}, std::pair{"PERSON", "[NAME]"}}) {
      const auto& value = values.at(slot);
      auto pos = s.find(value);
      if (pos != std::string::npos && pos > 0) return s.replace(pos, value.size(), tag);
    }
    return s;
  }

  InjectedError draw_error() {
    const double u = rng_.uniform();
    double acc = 0.0;
    const std::pair<double, InjectedError> table[] = {
        {p_.p_missing_end_punctuation, InjectedError::missing_end_punctuation},
        {p_.p_lowercase_start, InjectedError::lowercase_start},
        {p_.p_double_space, InjectedError::double_space},
        {p_.p_unclosed_bracket, InjectedError::unclosed_bracket},
    };
    for (const auto& [rate, kind] : table) {
      acc += rate;
      if (u < acc) return kind;
    }
    return InjectedError::none;
  }

  const SynthesisProfile& p_;
  Rng rng_;
  double total_words_ = 0.0;
  std::size_t user_utterances_ = 0;
};

}  // namespace

std::vector<Dialogue> synthesize_corpus(std::size_t n_dialogues, std::uint64_t seed, const SynthesisProfile& profile,
                                        std::vector<InjectionRecord>* log) {
  if (n_dialogues < 1) throw InvalidArgument("n_dialogues must be at least 1");
  if (profile.min_utterances < 2 || profile.max_utterances < profile.min_utterances) {
    throw InvalidArgument("profile utterance bounds are invalid");
  }
  const double rate_sum = profile.p_missing_end_punctuation + profile.p_lowercase_start + profile.p_double_space +
                          profile.p_unclosed_bracket;
  if (rate_sum > 1.0 + 1e-12) throw InvalidArgument("grammar error rates sum above 1");
  Synthesizer synth(profile, seed);
  std::vector<Dialogue> out;
  out.reserve(n_dialogues);
  for (std::size_t i = 0; i < n_dialogues; ++i) out.push_back(synth.make(i, log));
  return out;
}

}  // namespace vicsim
