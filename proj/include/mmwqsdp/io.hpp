#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "gibbs.hpp"
#include "gibbs_spec.hpp"
#include "instance.hpp"
#include "learn.hpp"
#include "mmw.hpp"
#include "orsim.hpp"

namespace mmwqsdp::io {

using json = nlohmann::json;

// Errors raised while decoding carry the JSON path of the offending field.
inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw UsageError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw UsageError(path + "." + key + ": missing field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw UsageError(path + ": expected a number");
  return j.get<double>();
}

inline long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw UsageError(path + ": expected an integer");
  return j.get<long>();
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(json::array({m(i, k).real(), m(i, k).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw UsageError(path + ": expected a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = j[i];
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      throw UsageError(rp + ": expected a row of " + std::to_string(n) + " entries");
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& e = row[k];
      const std::string ep = rp + "[" + std::to_string(k) + "]";
      if (!e.is_array() || e.size() != 2) throw UsageError(ep + ": expected a [re, im] pair");
      m(i, k) = Complex(number(e[0], ep + "[0]"), number(e[1], ep + "[1]"));
    }
  }
  return m;
}

// Runs a constructor and prefixes contract errors with the field path.
template <class F>
auto labeled(const std::string& path, F&& make) {
  try {
    return make();
  } catch (const ContractViolation& e) {
    throw ContractViolation(path + ": " + e.what());
  }
}

inline HermitianMatrix hermitian_from_json(const json& j, const std::string& path) {
  Matrix m = matrix_from_json(j, path);
  return labeled(path, [&] { return HermitianMatrix(std::move(m)); });
}

inline DensityMatrix density_from_json(const json& j, const std::string& path) {
  HermitianMatrix h = hermitian_from_json(j, path);
  return labeled(path, [&] { return DensityMatrix(h); });
}

inline void expect_kind(const json& doc, const std::string& kind) {
  const auto& k = field(doc, "kind", "$");
  if (!k.is_string() || k.get<std::string>() != kind)
    throw UsageError("$.kind: expected \"" + kind + "\", found " + k.dump());
}

inline void expect_dim(const json& doc, Eigen::Index actual, const std::string& path) {
  if (doc.contains("dim") && integer(doc["dim"], "$.dim") != actual)
    throw ContractViolation(path + ": dimension " + std::to_string(actual) + " does not match $.dim");
}

inline json meta_to_json(const InstanceMeta& m) {
  json j = json::object();
  if (m.trace_bound) j["B"] = *m.trace_bound;
  if (m.rank) j["r"] = *m.rank;
  if (m.sparsity) j["s"] = *m.sparsity;
  if (m.seed) j["seed"] = *m.seed;
  return j;
}

inline InstanceMeta meta_from_json(const json& doc) {
  InstanceMeta m;
  if (!doc.contains("meta")) return m;
  const auto& j = doc["meta"];
  if (!j.is_object()) throw UsageError("$.meta: expected an object");
  if (j.contains("B")) m.trace_bound = number(j["B"], "$.meta.B");
  if (j.contains("r")) m.rank = static_cast<int>(integer(j["r"], "$.meta.r"));
  if (j.contains("s")) m.sparsity = static_cast<int>(integer(j["s"], "$.meta.s"));
  if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
  return m;
}

// ---- sdp

inline json to_json(const SdpInstance& inst) {
  json cons = json::array();
  for (const auto& c : inst.constraints()) cons.push_back({{"A", matrix_to_json(c.a.matrix())}, {"a", c.bound}});
  return {{"kind", "sdp"}, {"dim", inst.dim()}, {"epsilon", inst.epsilon()}, {"constraints", cons},
          {"meta", meta_to_json(inst.meta())}};
}

inline SdpInstance sdp_from_json(const json& doc) {
  expect_kind(doc, "sdp");
  const double eps = number(field(doc, "epsilon", "$"), "$.epsilon");
  const auto& arr = field(doc, "constraints", "$");
  if (!arr.is_array()) throw UsageError("$.constraints: expected an array");
  std::vector<Constraint> cons;
  for (std::size_t j = 0; j < arr.size(); ++j) {
    const std::string p = "$.constraints[" + std::to_string(j) + "]";
    HermitianMatrix a = hermitian_from_json(field(arr[j], "A", p), p + ".A");
    expect_dim(doc, a.dim(), p + ".A");
    cons.push_back({std::move(a), number(field(arr[j], "a", p), p + ".a")});
  }
  return labeled("$", [&] { return SdpInstance(std::move(cons), eps, meta_from_json(doc)); });
}

// ---- state

inline json to_json(const DensityMatrix& rho) {
  return {{"kind", "state"}, {"dim", rho.dim()}, {"matrix", matrix_to_json(rho.matrix())}};
}

inline DensityMatrix state_from_json(const json& doc) {
  expect_kind(doc, "state");
  DensityMatrix rho = density_from_json(field(doc, "matrix", "$"), "$.matrix");
  expect_dim(doc, rho.dim(), "$.matrix");
  return rho;
}

// ---- gibbs-spec

inline json terms_to_json(const std::vector<GibbsTerm>& terms) {
  json arr = json::array();
  for (const auto& t : terms)
    arr.push_back({{"c", t.coefficient}, {"trace_weight", t.trace_weight}, {"state", matrix_to_json(t.state.matrix())}});
  return arr;
}

inline json to_json(const GibbsSpec& spec) {
  return {{"kind", "gibbs-spec"},
          {"dim", spec.dim()},
          {"bound_B", spec.bound()},
          {"rank_bound", spec.rank_bound()},
          {"plus_terms", terms_to_json(spec.plus_terms())},
          {"minus_terms", terms_to_json(spec.minus_terms())}};
}

inline std::vector<GibbsTerm> terms_from_json(const json& doc, const std::string& key, Eigen::Index n) {
  std::vector<GibbsTerm> out;
  if (!doc.contains(key)) return out;
  const auto& arr = doc[key];
  if (!arr.is_array()) throw UsageError("$." + key + ": expected an array");
  for (std::size_t j = 0; j < arr.size(); ++j) {
    const std::string p = "$." + key + "[" + std::to_string(j) + "]";
    GibbsTerm t;
    t.coefficient = number(field(arr[j], "c", p), p + ".c");
    t.trace_weight = number(field(arr[j], "trace_weight", p), p + ".trace_weight");
    t.state = density_from_json(field(arr[j], "state", p), p + ".state");
    if (t.state.dim() != n) throw ContractViolation(p + ".state: dimension does not match $.dim");
    out.push_back(std::move(t));
  }
  return out;
}

inline GibbsSpec gibbs_spec_from_json(const json& doc) {
  expect_kind(doc, "gibbs-spec");
  const auto n = static_cast<Eigen::Index>(integer(field(doc, "dim", "$"), "$.dim"));
  const double b = number(field(doc, "bound_B", "$"), "$.bound_B");
  const int r = static_cast<int>(integer(field(doc, "rank_bound", "$"), "$.rank_bound"));
  auto plus = terms_from_json(doc, "plus_terms", n);
  auto minus = terms_from_json(doc, "minus_terms", n);
  return labeled("$", [&] { return GibbsSpec(n, std::move(plus), std::move(minus), b, r); });
}

// ---- measurement-set

inline json to_json(const MeasurementSet& meas) {
  json ops = json::array();
  for (const auto& e : meas.ops()) ops.push_back(matrix_to_json(e.matrix()));
  return {{"kind", "measurement-set"}, {"dim", meas.dim()}, {"rank_bound", meas.rank_bound()}, {"operators", ops}};
}

inline MeasurementSet measurement_set_from_json(const json& doc) {
  expect_kind(doc, "measurement-set");
  const int r = static_cast<int>(integer(field(doc, "rank_bound", "$"), "$.rank_bound"));
  const auto& arr = field(doc, "operators", "$");
  if (!arr.is_array()) throw UsageError("$.operators: expected an array");
  std::vector<HermitianMatrix> ops;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = "$.operators[" + std::to_string(i) + "]";
    ops.push_back(hermitian_from_json(arr[i], p));
    expect_dim(doc, ops.back().dim(), p);
  }
  return labeled("$", [&] { return MeasurementSet(std::move(ops), r); });
}

// ---- or-instance

inline json to_json(const OrInstance& inst) {
  json proj = json::array();
  for (const auto& p : inst.projectors()) proj.push_back(matrix_to_json(p.matrix()));
  return {{"kind", "or-instance"}, {"dim", inst.dim()},        {"eps", inst.eps()},
          {"phi", inst.phi()},     {"xi", inst.xi()},          {"projectors", proj},
          {"input_state", matrix_to_json(inst.input().matrix())}};
}

inline OrInstance or_instance_from_json(const json& doc) {
  expect_kind(doc, "or-instance");
  const auto& arr = field(doc, "projectors", "$");
  if (!arr.is_array()) throw UsageError("$.projectors: expected an array");
  std::vector<HermitianMatrix> proj;
  for (std::size_t i = 0; i < arr.size(); ++i)
    proj.push_back(hermitian_from_json(arr[i], "$.projectors[" + std::to_string(i) + "]"));
  DensityMatrix rho = density_from_json(field(doc, "input_state", "$"), "$.input_state");
  expect_dim(doc, rho.dim(), "$.input_state");
  const double eps = number(field(doc, "eps", "$"), "$.eps");
  const double phi = number(field(doc, "phi", "$"), "$.phi");
  const double xi = number(field(doc, "xi", "$"), "$.xi");
  return labeled("$", [&] { return OrInstance(std::move(proj), std::move(rho), eps, phi, xi); });
}

// ---- files

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

inline std::string kind_of(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string())
    throw UsageError("$.kind: missing or not a string");
  return doc["kind"].get<std::string>();
}

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

inline void write_file(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError(path + ": cannot open for writing");
  out << dump(doc);
  if (!out) throw ResourceError(path + ": write failed");
}

// ---- reports

// Infinity is not representable in JSON; encode it as null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline json to_json(const FeasibilityResult& r) {
  json j = {{"verdict", to_string(r.verdict)},
            {"rounds", r.rounds_used},
            {"round_cap", r.round_cap},
            {"delta", r.delta},
            {"epsilon", r.epsilon},
            {"backend", r.backend},
            {"violated_indices", r.violated},
            {"counters", r.counters},
            {"claimed_bound", r.claimed_bound},
            {"final_max_violation", r.exact_max_violation},
            {"promise_violation_seen", r.promise_violation_seen}};
  if (r.witness) j["witness"] = matrix_to_json(r.witness->matrix());
  return j;
}

inline json to_json(const EstimatorReport& r) {
  return {{"value", r.value},
          {"repetitions", r.repetitions},
          {"target_error", r.target_error},
          {"empirical_success", r.empirical_success},
          {"mean", r.mean},
          {"second_moment", r.second_moment},
          {"std_error", r.std_error},
          {"constants", r.constants}};
}

inline json to_json(const GibbsDiagnostics& d) {
  return {{"delta", d.delta},
          {"shift", d.shift},
          {"xi", d.xi},
          {"lambda_min", finite_or_null(d.lambda_min)},
          {"z_supp", to_json(d.z_supp)},
          {"kernel_dim", to_json(d.kernel)},
          {"z_prime", d.z_prime},
          {"support_probability", d.support_probability},
          {"samples", d.samples},
          {"support_accepted", d.support_accepted},
          {"support_attempts", d.support_attempts},
          {"support_acceptance_rate", d.support_acceptance_rate()},
          {"kernel_accepted", d.kernel_accepted},
          {"kernel_attempts", d.kernel_attempts},
          {"kernel_acceptance_rate", d.kernel_acceptance_rate()},
          {"clamps", d.clamps},
          {"eigendecompositions", d.eigendecompositions},
          {"kernel_only", d.kernel_only}};
}

inline json to_json(const JaynesDescription& d) {
  json terms = json::array();
  for (const auto& t : d.terms)
    terms.push_back({{"index", t.index},
                     {"coefficient", t.coefficient},
                     {"raise_rounds", t.raise_rounds},
                     {"lower_rounds", t.lower_rounds}});
  return {{"kind", "jaynes-description"}, {"dim", d.dim}, {"delta", d.delta}, {"terms", terms},
          {"form", "exp(sum_i coefficient_i E_i) / Tr"}};
}

}  // namespace mmwqsdp::io
