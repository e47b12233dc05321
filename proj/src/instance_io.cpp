#include "divlab/instance_io.hpp"

#include "divlab/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace divlab {

using nlohmann::json;

namespace {

Vec to_vec(const json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) throw ContractError("expected a number or an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json from_vec(const Vec& v) {
  if (v.size() == 1) return v(0);
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json vec_array(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::vector<std::vector<Vec>> to_table(const json& j) {
  std::vector<std::vector<Vec>> out;
  for (const auto& row : j) {
    std::vector<Vec> r;
    for (const auto& v : row) r.push_back(to_vec(v));
    out.push_back(std::move(r));
  }
  return out;
}

json from_table(const std::vector<std::vector<Vec>>& table) {
  json a = json::array();
  for (const auto& row : table) {
    json r = json::array();
    for (const Vec& v : row) r.push_back(from_vec(v));
    a.push_back(std::move(r));
  }
  return a;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ContractError(std::string("malformed JSON: ") + e.what());
  }
}

template <typename F>
auto with_schema_errors(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ContractError(std::string("JSON document does not match the schema: ") + e.what());
  }
}

json instance_json(const FiniteInstance& inst) {
  json j;
  j["weights"] = inst.weights;
  if (!inst.features.empty()) {
    json f = json::array();
    for (const Vec& z : inst.features) f.push_back(vec_array(z));
    j["features"] = std::move(f);
  }
  j["representations"] = inst.representations;
  j["source_functions"] = from_table(inst.source_functions);
  j["target_functions"] = from_table(inst.target_functions);
  j["sources"] = inst.sources;
  j["target_true"] = inst.target_true;
  j["true_rep"] = inst.true_rep;
  return j;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FiniteInstance parse_instance(const std::string& text) {
  const json j = parse_json(text);
  FiniteInstance inst = with_schema_errors([&] {
    FiniteInstance r;
    r.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("features"))
      for (const auto& z : j["features"]) r.features.push_back(to_vec(z));
    r.representations = j.at("representations").get<std::vector<std::vector<std::size_t>>>();
    r.source_functions = to_table(j.at("source_functions"));
    r.target_functions = to_table(j.at("target_functions"));
    r.sources = j.at("sources").get<std::vector<std::size_t>>();
    r.target_true = j.at("target_true").get<std::size_t>();
    r.true_rep = j.at("true_rep").get<std::size_t>();
    return r;
  });
  validate(inst);
  return inst;
}

FiniteInstance load_instance(const std::filesystem::path& path) {
  try {
    return parse_instance(read_text_file(path));
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw ContractError(path.string() + ": " + msg);
  }
}

std::string instance_to_json(const FiniteInstance& inst) { return instance_json(inst).dump(2) + "\n"; }

FiniteClass parse_class(const std::string& text) {
  const json j = parse_json(text);
  FiniteClass F = with_schema_errors([&] {
    FiniteClass r;
    r.values = to_table(j.at("values"));
    if (j.contains("domain")) {
      r.domain = j["domain"].get<std::vector<std::string>>();
    } else if (!r.values.empty()) {
      for (std::size_t x = 0; x < r.values.front().size(); ++x) r.domain.push_back("x" + std::to_string(x));
    }
    if (j.contains("function_names")) r.function_names = j["function_names"].get<std::vector<std::string>>();
    return r;
  });
  validate(F);
  return F;
}

FiniteClass load_class(const std::filesystem::path& path) {
  try {
    return parse_class(read_text_file(path));
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw ContractError(path.string() + ": " + msg);
  }
}

std::string class_to_json(const FiniteClass& F) {
  json j;
  j["domain"] = F.domain;
  if (!F.function_names.empty()) j["function_names"] = F.function_names;
  j["values"] = from_table(F.values);
  return j.dump(2) + "\n";
}

std::string hard_instance_to_json(const HardInstance& inst) {
  json j = instance_json(to_finite_instance(inst));
  json c;
  c["family"] = inst.family == HardFamily::relu ? "relu" : "general";
  c["eps"] = inst.eps;
  if (inst.activation) {
    c["activation"] = inst.activation->name;
    c["x1"] = inst.activation->x1;
    c["x2"] = inst.activation->x2;
    c["M"] = inst.M;
  }
  json packing = json::array();
  for (const Vec& v : inst.packing.vectors) packing.push_back(vec_array(v));
  c["packing"] = std::move(packing);
  json sources = json::array();
  for (const Vec& v : inst.source_params) sources.push_back(vec_array(v));
  c["source_params"] = std::move(sources);
  c["u"] = vec_array(inst.u);
  json support = json::array();
  for (const Vec& v : inst.support) support.push_back(vec_array(v));
  c["support"] = std::move(support);
  c["lower_bound"] = inst.lower_bound;
  c["source_excess"] = inst.source_excess;
  c["target_excess"] = inst.target_excess;
  c["ratio"] = inst.ratio.to_string();
  c["bound_holds"] = inst.bound_holds;
  j["construction"] = std::move(c);
  return j.dump(2) + "\n";
}

}  // namespace divlab
