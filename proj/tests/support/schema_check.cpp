#include "support/schema_check.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace vicsim::testing {

namespace {

using nlohmann::json;

bool type_matches(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    if (v.is_number_float()) {
      const double d = v.get<double>();
      return std::isfinite(d) && std::floor(d) == d;
    }
    return false;
  }
  return false;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& v, const json& s, const std::string& path, std::vector<std::string>& errors) const {
    if (s.is_boolean()) {
      if (!s.get<bool>()) errors.push_back(path + ": schema false");
      return;
    }
    if (auto ref = s.find("$ref"); ref != s.end()) {
      check(v, resolve(ref->get<std::string>()), path, errors);
      return;
    }
    if (auto t = s.find("type"); t != s.end()) {
      bool ok = false;
      if (t->is_string()) ok = type_matches(v, *t);
      else
        for (const auto& one : *t) ok = ok || type_matches(v, one);
      if (!ok) {
        errors.push_back(path + ": expected type " + t->dump() + ", got " + v.type_name());
        return;
      }
    }
    if (auto e = s.find("enum"); e != s.end()) {
      bool found = false;
      for (const auto& x : *e) found = found || x == v;
      if (!found) errors.push_back(path + ": value " + v.dump() + " not in enum");
    }
    if (auto c = s.find("const"); c != s.end() && *c != v) errors.push_back(path + ": value differs from const");
    if (auto one = s.find("oneOf"); one != s.end()) {
      std::size_t passing = 0;
      for (const auto& alt : *one) {
        std::vector<std::string> sub;
        check(v, alt, path, sub);
        passing += sub.empty();
      }
      if (passing != 1) errors.push_back(path + ": oneOf matched " + std::to_string(passing) + " alternatives");
    }
    if (auto any = s.find("anyOf"); any != s.end()) {
      bool ok = false;
      for (const auto& alt : *any) {
        std::vector<std::string> sub;
        check(v, alt, path, sub);
        ok = ok || sub.empty();
      }
      if (!ok) errors.push_back(path + ": anyOf matched nothing");
    }
    if (v.is_number()) {
      const double d = v.get<double>();
      if (auto m = s.find("minimum"); m != s.end() && d < m->get<double>())
        errors.push_back(path + ": below minimum");
      if (auto m = s.find("maximum"); m != s.end() && d > m->get<double>())
        errors.push_back(path + ": above maximum");
    }
    if (v.is_string()) {
      if (auto m = s.find("minLength"); m != s.end() && v.get<std::string>().size() < m->get<std::size_t>())
        errors.push_back(path + ": string too short");
    }
    if (v.is_array()) {
      if (auto m = s.find("minItems"); m != s.end() && v.size() < m->get<std::size_t>())
        errors.push_back(path + ": too few items");
      if (auto m = s.find("maxItems"); m != s.end() && v.size() > m->get<std::size_t>())
        errors.push_back(path + ": too many items");
      if (auto items = s.find("items"); items != s.end())
        for (std::size_t i = 0; i < v.size(); ++i) check(v[i], *items, path + "/" + std::to_string(i), errors);
    }
    if (v.is_object()) {
      if (auto req = s.find("required"); req != s.end())
        for (const auto& k : *req)
          if (!v.contains(k.get<std::string>())) errors.push_back(path + ": missing " + k.get<std::string>());
      const auto props = s.find("properties");
      const auto extra = s.find("additionalProperties");
      for (const auto& [key, value] : v.items()) {
        if (props != s.end() && props->contains(key)) {
          check(value, (*props)[key], path + "/" + key, errors);
        } else if (extra != s.end()) {
          if (extra->is_boolean() && !extra->get<bool>()) errors.push_back(path + ": unexpected property " + key);
          else if (extra->is_object()) check(value, *extra, path + "/" + key, errors);
        }
      }
    }
  }

  const json& resolve(const std::string& ref) const {
    const std::string prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0) throw std::runtime_error("unsupported $ref " + ref);
    return root_.at("definitions").at(ref.substr(prefix.size()));
  }

 private:
  const json& root_;
};

std::string temp_path(const std::string& stem) {
  static int counter = 0;
  return (std::filesystem::temp_directory_path() /
          (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".json"))
      .string();
}

}  // namespace

nlohmann::json load_schema(const std::string& file) {
  std::ifstream in(std::filesystem::path(VICSIM_SCHEMA_DIR) / file);
  if (!in) throw std::runtime_error("cannot open schema " + file);
  return nlohmann::json::parse(in);
}

std::vector<std::string> schema_errors(const nlohmann::json& instance, const nlohmann::json& schema,
                                       const std::string& definition) {
  Validator v(schema);
  std::vector<std::string> errors;
  const auto& root = definition.empty() ? schema : v.resolve("#/definitions/" + definition);
  v.check(instance, root, "", errors);
  return errors;
}

ExternalResult python_validate(const nlohmann::json& instance, const nlohmann::json& schema,
                               const std::string& definition) {
  ExternalResult r;
  nlohmann::json wrapped = schema;
  if (!definition.empty()) {
    wrapped = {{"$schema", "http://json-schema.org/draft-07/schema#"},
               {"definitions", schema.at("definitions")},
               {"$ref", "#/definitions/" + definition}};
  }
  const auto schema_file = temp_path("vicsim_schema");
  const auto instance_file = temp_path("vicsim_instance");
  const auto out_file = temp_path("vicsim_out");
  std::ofstream(schema_file) << wrapped.dump();
  std::ofstream(instance_file) << instance.dump();
  const std::string script =
      "import json,sys\n"
      "try:\n import jsonschema\nexcept ImportError:\n print('unavailable'); sys.exit(3)\n"
      "s=json.load(open(sys.argv[1])); i=json.load(open(sys.argv[2]))\n"
      "try:\n jsonschema.Draft7Validator(s).validate(i); print('ok')\n"
      "except jsonschema.ValidationError as e:\n print(e.message); sys.exit(1)\n";
  const auto script_file = temp_path("vicsim_script") + ".py";
  std::ofstream(script_file) << script;
  const std::string cmd = "python3 " + script_file + " " + schema_file + " " + instance_file + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream out(out_file);
  std::stringstream ss;
  ss << out.rdbuf();
  r.message = ss.str();
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.available = code == 0 || code == 1;
  r.valid = code == 0;
  for (const auto& f : {schema_file, instance_file, out_file, script_file}) std::remove(f.c_str());
  return r;
}

std::optional<std::string> validate_both(const nlohmann::json& instance, const std::string& schema_file,
                                         const std::string& definition) {
  const auto schema = load_schema(schema_file);
  const auto errors = schema_errors(instance, schema, definition);
  if (!errors.empty()) return "in-process: " + errors.front();
  const auto py = python_validate(instance, schema, definition);
  if (py.available && !py.valid) return "jsonschema: " + py.message;
  return std::nullopt;
}

}  // namespace vicsim::testing
