#pragma once

#include "sdc/problems/lasso.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace sdc {

// JSON container for Lasso instances:
//   {"format": "sdc-lasso/1", "n", "k", "dynamic_range_db", "noise_std", "seed",
//    "lambda", "rows": [J...], "b": [...], "ground_truth": [...] | null}
// Doubles are written with round-trip precision, so reading back is exact.

inline nlohmann::json to_json(const LassoInstance& inst) {
  nlohmann::json j;
  j["format"] = "sdc-lasso/1";
  j["n"] = inst.n;
  j["k"] = inst.k;
  j["dynamic_range_db"] = inst.dynamic_range_db;
  j["noise_std"] = inst.noise_std;
  j["seed"] = inst.seed;
  j["lambda"] = inst.lambda;
  j["rows"] = inst.rows;
  j["b"] = std::vector<double>(inst.b.data(), inst.b.data() + inst.b.size());
  if (inst.ground_truth) {
    const Vec& g = *inst.ground_truth;
    j["ground_truth"] = std::vector<double>(g.data(), g.data() + g.size());
  } else {
    j["ground_truth"] = nullptr;
  }
  return j;
}

inline LassoInstance lasso_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "sdc-lasso/1") {
      throw Error(ErrorKind::parse_error, "lasso json: missing or unknown format tag");
    }
    LassoInstance inst;
    inst.n = j.at("n").get<Index>();
    inst.k = j.at("k").get<Index>();
    inst.dynamic_range_db = j.at("dynamic_range_db").get<double>();
    inst.noise_std = j.at("noise_std").get<double>();
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.lambda = j.at("lambda").get<double>();
    inst.rows = j.at("rows").get<std::vector<Index>>();
    const auto b = j.at("b").get<std::vector<double>>();
    inst.b = Eigen::Map<const Vec>(b.data(), static_cast<Index>(b.size()));
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      const auto g = j["ground_truth"].get<std::vector<double>>();
      inst.ground_truth = Vec(Eigen::Map<const Vec>(g.data(), static_cast<Index>(g.size())));
    }
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, std::string("lasso json: ") + e.what());
  }
}

inline void write_lasso(const LassoInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot open " + path);
  out << to_json(inst).dump() << '\n';
}

inline LassoInstance read_lasso(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, path + ": " + e.what());
  }
  return lasso_from_json(j);
}

}  // namespace sdc
