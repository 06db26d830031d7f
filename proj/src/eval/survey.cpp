#include <set>

#include "vicsim/assets.hpp"
#include "vicsim/error.hpp"
#include "vicsim/eval.hpp"
#include "vicsim/rng.hpp"

namespace vicsim {

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

SurveyExport export_survey(const std::vector<SurveyIncident>& incidents, const std::vector<std::string>& sources,
                           std::uint64_t seed) {
  if (sources.size() != kSurveySources) throw InvalidArgument("survey needs exactly 3 response sources");
  if (std::set<std::string>(sources.begin(), sources.end()).size() != sources.size())
    throw InvalidArgument("survey sources must be distinct");
  for (const auto& inc : incidents)
    for (const auto& s : sources)
      if (!inc.responses.count(s)) throw InvalidArgument("incident '" + inc.id + "' has no response from " + s);

  SurveyExport out;
  out.form_csv = "item,incident,history,option,response";
  for (const auto& scale : kSurveyScales) out.form_csv += "," + scale;
  out.form_csv += "\n";
  out.answer_key["seed"] = seed;
  out.answer_key["sources"] = sources;
  out.answer_key["scale"] = {{"min", 1}, {"max", 5}};
  auto& items = out.answer_key["items"] = nlohmann::ordered_json::array();

  for (std::size_t i = 0; i < incidents.size(); ++i) {
    const auto& inc = incidents[i];
    std::vector<std::size_t> order(kSurveySources);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng::derive(seed, i).shuffle(order);
    out.orders.push_back(order);

    const std::string item = std::to_string(i + 1);
    const std::string history = render_history(inc.history);
    nlohmann::ordered_json key;
    key["item"] = i + 1;
    key["incident"] = inc.id;
    auto& shown = key["options"] = nlohmann::ordered_json::object();
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const std::string option(1, static_cast<char>('A' + pos));
      const auto& source = sources[order[pos]];
      shown[option] = source;
      out.form_csv += item + "," + csv_field(inc.id) + "," + csv_field(history) + "," + option + "," +
                      csv_field(inc.responses.at(source));
      for (std::size_t s = 0; s < kSurveyScales.size(); ++s) out.form_csv += ",";
      out.form_csv += "\n";
    }
    items.push_back(std::move(key));
  }
  return out;
}

void write_survey(const SurveyExport& survey, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "survey_form.csv", survey.form_csv);
  write_file_atomic(dir / "survey_key.json", survey.answer_key.dump(2) + "\n");
}

}  // namespace vicsim
