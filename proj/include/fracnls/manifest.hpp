#pragma once

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "solver.hpp"

namespace fracnls {

struct RunManifest {
  ProblemParams params;
  GridDescriptor grid;
  SolverConfig solver;
  std::vector<std::string> tasks;
  std::string output_dir;
  std::optional<ConstantsTable> constants_inline;  // exactly one of these two
  std::optional<GridDescriptor> estimate_on;       // is set after validation
  std::vector<std::string> warnings;
};

struct SweepSpec {
  RunManifest base;
  std::string axis;  // one of mu, a, q, p, s1, s2
  std::vector<double> values;
};

inline const std::vector<std::string>& known_tasks() {
  static const std::vector<std::string> names = {
      "conditions", "h_geometry", "local_min", "mountain_pass", "critical_thresholds",
      "fiber_scan"};
  return names;
}

namespace detail {

using nlohmann::json;

inline bool fetch_number(const json& obj, const char* key, double& out) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) return false;
  out = it->get<double>();
  return true;
}

inline bool fetch_int(const json& obj, const char* key, long& out) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) return false;
  out = it->get<long>();
  return true;
}

inline GridDescriptor parse_grid(const json& g, const std::string& where, int expected_dim,
                                 std::vector<ValidationIssue>& issues) {
  GridDescriptor out;
  out.dim = expected_dim;
  long m = 0;
  double L = 0.0;
  if (!fetch_int(g, "points_per_axis", m))
    issues.push_back({where + "/points_per_axis", "required integer"});
  else if (m < 4 || m % 2 != 0)
    issues.push_back({where + "/points_per_axis", "must be even and at least 4"});
  else
    out.points_per_axis = static_cast<int>(m);
  if (!fetch_number(g, "box_half_length", L))
    issues.push_back({where + "/box_half_length", "required number"});
  else if (!(L > 0.0) || !std::isfinite(L))
    issues.push_back({where + "/box_half_length", "must be positive and finite"});
  else
    out.box_half_length = L;
  if (g.contains("dim")) {
    long d = 0;
    if (!fetch_int(g, "dim", d) || d != expected_dim)
      issues.push_back({where + "/dim", "when present, must equal params N"});
  }
  if (g.contains("spacing")) {
    double sp = 0.0;
    if (!fetch_number(g, "spacing", sp) ||
        std::abs(sp * out.points_per_axis - 2.0 * out.box_half_length) >
            1e-9 * out.box_half_length)
      issues.push_back({where + "/spacing", "inconsistent with points_per_axis and box"});
  }
  return out;
}

}  // namespace detail

// Parse and fully validate a manifest document, accumulating every problem
// with its JSON pointer before giving up.
inline RunManifest validate_manifest(const nlohmann::json& doc) {
  using nlohmann::json;
  std::vector<ValidationIssue> issues;
  RunManifest m;

  if (!doc.is_object()) {
    issues.push_back({"", "manifest must be a JSON object"});
    throw ValidationError(std::move(issues));
  }

  // params
  int N = 0;
  double s1 = 0, s2 = 0, p = 0, q = 0, mu = 0, a = 0;
  if (!doc.contains("params") || !doc["params"].is_object()) {
    issues.push_back({"/params", "required object"});
  } else {
    const json& pj = doc["params"];
    long n_long = 0;
    bool ok = true;
    if (!detail::fetch_int(pj, "N", n_long)) {
      issues.push_back({"/params/N", "required integer"});
      ok = false;
    }
    double* slots[6] = {&s1, &s2, &p, &q, &mu, &a};
    const char* names[6] = {"s1", "s2", "p", "q", "mu", "a"};
    for (int i = 0; i < 6; ++i) {
      if (!detail::fetch_number(pj, names[i], *slots[i])) {
        issues.push_back({std::string("/params/") + names[i], "required number"});
        ok = false;
      }
    }
    if (ok) {
      N = static_cast<int>(n_long);
      for (auto& issue : ProblemParams::check(N, s1, s2, p, q, mu, a))
        issues.push_back({"/params" + issue.pointer, issue.message});
      if (N == 1)
        m.warnings.push_back(
            "params/N: dimension 1 is supported for fast runs; the existence theory "
            "assumes N >= 2");
    }
  }
  const bool params_ok =
      issues.empty() ||
      std::none_of(issues.begin(), issues.end(),
                   [](const ValidationIssue& i) { return i.pointer.rfind("/params", 0) == 0; });
  if (params_ok) m.params = ProblemParams::create(N, s1, s2, p, q, mu, a);

  // grid
  if (!doc.contains("grid") || !doc["grid"].is_object())
    issues.push_back({"/grid", "required object"});
  else if (params_ok)
    m.grid = detail::parse_grid(doc["grid"], "/grid", m.params.N, issues);

  // constants: either inline values or an estimation grid
  if (!doc.contains("constants") || !doc["constants"].is_object()) {
    issues.push_back({"/constants", "required object: either {gn_q, gn_p, sobolev_S} or {estimate_on: {...}}"});
  } else {
    const json& cj = doc["constants"];
    if (cj.contains("estimate_on")) {
      if (!cj["estimate_on"].is_object())
        issues.push_back({"/constants/estimate_on", "must be a grid object"});
      else if (params_ok)
        m.estimate_on =
            detail::parse_grid(cj["estimate_on"], "/constants/estimate_on", m.params.N, issues);
    } else {
      ConstantsTable ct;
      bool ok = true;
      const char* names[3] = {"gn_q", "gn_p", "sobolev_S"};
      double* slots[3] = {&ct.gn_q, &ct.gn_p, &ct.sobolev_S};
      for (int i = 0; i < 3; ++i) {
        if (!detail::fetch_number(cj, names[i], *slots[i]) || !(*slots[i] > 0.0)) {
          issues.push_back({std::string("/constants/") + names[i], "required positive number"});
          ok = false;
        }
      }
      ct.provenance = Provenance::UserSupplied;
      if (ok) m.constants_inline = ct;
    }
  }

  // solver (all fields optional, defaulted)
  if (doc.contains("solver")) {
    if (!doc["solver"].is_object()) {
      issues.push_back({"/solver", "must be an object"});
    } else {
      const json& sj = doc["solver"];
      long li = 0;
      double d = 0.0;
      if (sj.contains("max_iters")) {
        if (!detail::fetch_int(sj, "max_iters", li) || li < 1)
          issues.push_back({"/solver/max_iters", "must be a positive integer"});
        else
          m.solver.max_iters = static_cast<int>(li);
      }
      auto positive = [&](const char* key, double& slot) {
        if (!sj.contains(key)) return;
        if (!detail::fetch_number(sj, key, d) || !(d > 0.0))
          issues.push_back({std::string("/solver/") + key, "must be a positive number"});
        else
          slot = d;
      };
      positive("step", m.solver.step);
      positive("tau", m.solver.tau);
      positive("grad_tol", m.solver.grad_tol);
      positive("pohozaev_tol", m.solver.pohozaev_tol);
      positive("t_cap", m.solver.t_cap);
      if (sj.contains("symmetrize_every")) {
        if (!detail::fetch_int(sj, "symmetrize_every", li) || li < 0)
          issues.push_back({"/solver/symmetrize_every", "must be a nonnegative integer"});
        else
          m.solver.symmetrize_every = static_cast<int>(li);
      }
      if (sj.contains("seed")) {
        if (!detail::fetch_int(sj, "seed", li))
          issues.push_back({"/solver/seed", "must be an integer"});
        else
          m.solver.seed = li;
      }
      if (sj.contains("precondition")) {
        if (!sj["precondition"].is_boolean())
          issues.push_back({"/solver/precondition", "must be a boolean"});
        else
          m.solver.precondition = sj["precondition"].get<bool>();
      }
      if (sj.contains("pohozaev_land")) {
        if (!sj["pohozaev_land"].is_boolean())
          issues.push_back({"/solver/pohozaev_land", "must be a boolean"});
        else
          m.solver.pohozaev_land = sj["pohozaev_land"].get<bool>();
      }
    }
  }

  // tasks
  if (!doc.contains("tasks") || !doc["tasks"].is_array() || doc["tasks"].empty()) {
    issues.push_back({"/tasks", "required non-empty array of task names"});
  } else {
    const auto& names = known_tasks();
    int i = 0;
    for (const auto& t : doc["tasks"]) {
      const std::string ptr = "/tasks/" + std::to_string(i++);
      if (!t.is_string()) {
        issues.push_back({ptr, "task names must be strings"});
        continue;
      }
      const std::string name = t.get<std::string>();
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        issues.push_back({ptr, "unknown task '" + name + "'"});
        continue;
      }
      if (params_ok && m.params.regime == Regime::SobolevCritical &&
          (name == "mountain_pass" || name == "h_geometry")) {
        issues.push_back({ptr, "task '" + name + "' is not defined in the SobolevCritical regime"});
        continue;
      }
      if (params_ok && m.params.regime == Regime::SubcriticalPair &&
          name == "critical_thresholds") {
        issues.push_back({ptr, "task 'critical_thresholds' requires the SobolevCritical regime"});
        continue;
      }
      if (std::find(m.tasks.begin(), m.tasks.end(), name) != m.tasks.end()) {
        m.warnings.push_back("tasks: duplicate '" + name + "' ignored");
        continue;
      }
      m.tasks.push_back(name);
    }
  }

  // output_dir
  if (!doc.contains("output_dir") || !doc["output_dir"].is_string() ||
      doc["output_dir"].get<std::string>().empty())
    issues.push_back({"/output_dir", "required non-empty string"});
  else
    m.output_dir = doc["output_dir"].get<std::string>();

  if (!issues.empty()) throw ValidationError(std::move(issues));
  return m;
}

inline SweepSpec validate_sweep(const nlohmann::json& doc) {
  std::vector<ValidationIssue> issues;
  if (!doc.is_object()) {
    issues.push_back({"", "sweep spec must be a JSON object"});
    throw ValidationError(std::move(issues));
  }
  SweepSpec s;
  if (!doc.contains("base") || !doc["base"].is_object()) {
    issues.push_back({"/base", "required manifest object"});
    throw ValidationError(std::move(issues));
  }
  try {
    s.base = validate_manifest(doc["base"]);
  } catch (const ValidationError& e) {
    for (const auto& it : e.issues()) issues.push_back({"/base" + it.pointer, it.message});
  }
  static const std::vector<std::string> axes = {"mu", "a", "q", "p", "s1", "s2"};
  if (!doc.contains("axis") || !doc["axis"].is_string() ||
      std::find(axes.begin(), axes.end(), doc["axis"].get<std::string>()) == axes.end())
    issues.push_back({"/axis", "required: one of mu, a, q, p, s1, s2"});
  else
    s.axis = doc["axis"].get<std::string>();
  if (!doc.contains("values") || !doc["values"].is_array() || doc["values"].empty()) {
    issues.push_back({"/values", "required non-empty array of numbers"});
  } else {
    double prev = -std::numeric_limits<double>::infinity();
    int i = 0;
    for (const auto& v : doc["values"]) {
      const std::string ptr = "/values/" + std::to_string(i++);
      if (!v.is_number()) {
        issues.push_back({ptr, "must be a number"});
        continue;
      }
      const double x = v.get<double>();
      if (!(x > prev)) issues.push_back({ptr, "values must be strictly ascending"});
      prev = x;
      s.values.push_back(x);
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return s;
}

namespace detail {

// Git-style content hash: sha1 over "blob <len>\0<bytes>".
inline std::string git_blob_sha1(const std::string& bytes) {
  std::string framed = "blob " + std::to_string(bytes.size());
  framed.push_back('\0');
  framed += bytes;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(framed.data(), framed.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw Error("sha1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

inline void write_json_atomic(const std::string& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

// Estimated constants are cached per (N, s, r, grid) so that sweeps touching
// many rows do not repeat identical ascents.
struct EstimateCache {
  std::map<std::tuple<int, double, double, int, double>, double> values;
  std::mutex mu;

  double gn(int N, double s, double r, const GridDescriptor& g) {
    auto key = std::make_tuple(N, s, r, g.points_per_axis, g.box_half_length);
    {
      std::lock_guard<std::mutex> lock(mu);
      auto it = values.find(key);
      if (it != values.end()) return it->second;
    }
    const double v = estimate_gn_constant(N, s, r, g).value;
    std::lock_guard<std::mutex> lock(mu);
    values.emplace(key, v);
    return v;
  }

  double sobolev(int N, double s, const GridDescriptor& g) {
    auto key = std::make_tuple(N, s, -1.0, g.points_per_axis, g.box_half_length);
    {
      std::lock_guard<std::mutex> lock(mu);
      auto it = values.find(key);
      if (it != values.end()) return it->second;
    }
    const double v = estimate_sobolev_constant(N, s, g).value;
    std::lock_guard<std::mutex> lock(mu);
    values.emplace(key, v);
    return v;
  }
};

inline EstimateCache& estimate_cache() {
  static EstimateCache c;
  return c;
}

inline ConstantsTable resolve_constants(const RunManifest& m) {
  if (m.constants_inline) return *m.constants_inline;
  if (!m.estimate_on) throw ParameterError("manifest has neither inline constants nor estimate_on");
  const GridDescriptor g = *m.estimate_on;
  ConstantsTable ct;
  ct.provenance = Provenance::Estimated;
  ct.grid_used = g;
  auto& cache = estimate_cache();
  ct.gn_q = cache.gn(m.params.N, m.params.s1, m.params.q, g);
  ct.sobolev_S = cache.sobolev(m.params.N, m.params.s1, g);
  if (m.params.regime == Regime::SobolevCritical)
    // At p = 2N/(N-2 s1) the p-quotient and the Sobolev quotient describe the
    // same extremal problem: gn_p = sobolev_S^{-2*/2}.
    ct.gn_p = std::pow(ct.sobolev_S, -m.params.two_star_s1() / 2.0);
  else
    ct.gn_p = cache.gn(m.params.N, m.params.s1, m.params.p, g);
  return ct;
}

inline nlohmann::json params_json(const ProblemParams& prm) {
  return nlohmann::json{{"N", prm.N},
                        {"s1", prm.s1},
                        {"s2", prm.s2},
                        {"p", prm.p},
                        {"q", prm.q},
                        {"mu", prm.mu},
                        {"a", prm.a},
                        {"kappa_p", prm.kappa_p()},
                        {"kappa_q", prm.kappa_q()},
                        {"two_star_s1", prm.two_star_s1()},
                        {"two_star_s2", prm.two_star_s2()},
                        {"regime", to_string(prm.regime)}};
}

inline nlohmann::json grid_json(const GridDescriptor& g) {
  return nlohmann::json{{"dim", g.dim},
                        {"points_per_axis", g.points_per_axis},
                        {"box_half_length", g.box_half_length},
                        {"spacing", g.spacing()}};
}

inline nlohmann::json constants_json(const ConstantsTable& ct) {
  nlohmann::json j{{"gn_q", ct.gn_q},
                   {"gn_p", ct.gn_p},
                   {"sobolev_S", ct.sobolev_S},
                   {"provenance", to_string(ct.provenance)}};
  j["grid_used"] = ct.grid_used ? grid_json(*ct.grid_used) : nlohmann::json(nullptr);
  return j;
}

// The critical-regime thresholds depend on p only through the requirement
// p = 2N/(N-2 s1), so they are well-defined companions of any parameter set.
inline CriticalThresholds thresholds_for_report(const ProblemParams& prm,
                                                const ConstantsTable& ct) {
  if (prm.regime == Regime::SobolevCritical) return critical_thresholds(prm, ct);
  ProblemParams crit = ProblemParams::unchecked(prm.N, prm.s1, prm.s2, prm.two_star_s1(),
                                                prm.q, prm.mu, prm.a, Regime::SobolevCritical);
  ConstantsTable ct_crit = ct;
  ct_crit.gn_p = std::pow(ct.sobolev_S, -prm.two_star_s1() / 2.0);
  return critical_thresholds(crit, ct_crit);
}

}  // namespace detail

// Condition verdict report: parameters, the constants they were judged
// against, the three admissibility checks with both sides, the h positivity
// window, and the critical-regime mass thresholds.
inline nlohmann::json conditions_report(const ProblemParams& prm, const ConstantsTable& ct) {
  using nlohmann::json;
  require_constants(ct);
  json rep;
  json sources;
  rep["params"] = detail::params_json(prm);
  sources["params"] = "user-supplied";
  rep["constants"] = detail::constants_json(ct);
  sources["constants"] =
      ct.provenance == Provenance::Estimated ? "estimated" : "user-supplied";

  if (prm.regime == Regime::SubcriticalPair) {
    const auto a0 = check_A0(prm, ct);
    const auto a1 = check_A1(prm, ct);
    const auto a2 = check_A2(prm, ct);
    rep["A0"] = json{{"vacuous", a0.vacuous},
                     {"pass", a0.pass},
                     {"lhs", a0.lhs},
                     {"rhs", a0.rhs}};
    rep["A1"] = json{{"pass", a1.pass}, {"lhs", a1.lhs}, {"rhs", a1.rhs}};
    rep["A2"] = json{{"pass", a2.pass}, {"lhs", a2.lhs}, {"rhs", a2.rhs}};
    sources["A0"] = sources["A1"] = sources["A2"] = "formula";
    if (a1.pass) {
      const auto hg = h_geometry(prm, ct);
      rep["h_geometry"] = json{{"R0", hg.R0},
                               {"R1", hg.R1},
                               {"t_max", hg.t_max},
                               {"h_at_tmax", hg.h_at_tmax}};
      sources["h_geometry"] = "formula";
    } else {
      rep["h_geometry"] = nullptr;
    }
  } else {
    rep["A0"] = nullptr;
    rep["A1"] = nullptr;
    rep["A2"] = nullptr;
    rep["h_geometry"] = nullptr;
  }

  const auto th = detail::thresholds_for_report(prm, ct);
  rep["critical"] = json{{"a0", th.a0},
                         {"abar0", th.abar0},
                         {"K0", th.K0},
                         {"rho_a", th.rho_a},
                         {"A_mu", th.A_mu},
                         {"pass", prm.a < std::min(th.a0, th.abar0)}};
  sources["critical"] = "formula";

  rep["caveat"] = std::string("threshold verdicts are conditional on the constants table "
                              "(provenance: ") +
                  to_string(ct.provenance) + ")";
  rep["sources"] = sources;
  return rep;
}

struct TaskOutcome {
  std::string name;
  std::string status;  // "ok" or "error"
  std::string error;
  std::vector<std::string> outputs;
  double seconds = 0.0;
};

struct RunResult {
  std::string manifest_hash;
  ConstantsTable constants;
  std::vector<TaskOutcome> tasks;
  std::vector<std::string> warnings;
  std::string summary_path;
};

namespace detail {

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iter,energy,pohozaev,grad_norm,seminorm_s1\n";
  char buf[160];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g\n", r.iter, r.energy,
                  r.pohozaev, r.grad_norm, r.seminorm_s1);
    out += buf;
  }
  return out;
}

inline nlohmann::json record_json(const SolutionRecord& rec, const std::string& stem) {
  nlohmann::json j{{"lambda", rec.lambda},
                   {"energy_level", rec.energy_level},
                   {"pohozaev_residual", rec.pohozaev_residual},
                   {"seminorm_s1", rec.seminorm_s1},
                   {"classification", to_string(rec.classification)},
                   {"level_name", to_string(rec.level_name)},
                   {"iterations", rec.iterations},
                   {"converged", rec.converged},
                   {"preconditions_verified", rec.preconditions_verified},
                   {"field", stem + "_field.fnls"},
                   {"field_csv", stem + "_field.csv"},
                   {"trace", stem + "_trace.csv"}};
  j["sources"] = nlohmann::json{{"lambda", "measured"},
                                {"energy_level", "measured"},
                                {"pohozaev_residual", "measured"},
                                {"seminorm_s1", "measured"}};
  return j;
}

inline void run_solver_task(const RunManifest& m, const ConstantsTable& ct, bool is_min,
                            const std::filesystem::path& dir, TaskOutcome& outcome) {
  std::vector<TraceRow> trace;
  const std::string stem = is_min ? "local_min" : "mountain_pass";
  SolutionRecord rec =
      is_min ? local_minimize(m.params, ct, m.grid, m.solver, nullptr, &trace)
             : mountain_pass(m.params, ct, m.grid, m.solver, nullptr, &trace);
  write_field(rec.field, (dir / (stem + "_field.fnls")).string());
  write_field_csv(rec.field, (dir / (stem + "_field.csv")).string());
  write_file_atomic((dir / (stem + "_trace.csv")).string(), trace_csv(trace));
  write_json_atomic((dir / (stem + ".json")).string(), record_json(rec, stem));
  outcome.outputs = {stem + ".json", stem + "_field.fnls", stem + "_field.csv",
                     stem + "_trace.csv"};
}

inline void run_one_task(const RunManifest& m, const ConstantsTable& ct,
                         const std::string& name, const std::filesystem::path& dir,
                         TaskOutcome& outcome) {
  using nlohmann::json;
  if (name == "conditions") {
    write_json_atomic((dir / "conditions.json").string(), conditions_report(m.params, ct));
    outcome.outputs = {"conditions.json"};
  } else if (name == "h_geometry") {
    const auto hg = h_geometry(m.params, ct);
    json j{{"R0", hg.R0}, {"R1", hg.R1}, {"t_max", hg.t_max}, {"h_at_tmax", hg.h_at_tmax}};
    j["sources"] = "formula";
    write_json_atomic((dir / "h_geometry.json").string(), j);
    outcome.outputs = {"h_geometry.json"};
  } else if (name == "critical_thresholds") {
    const auto th = critical_thresholds(m.params, ct);
    json j{{"a0", th.a0},
           {"abar0", th.abar0},
           {"K0", th.K0},
           {"rho_a", th.rho_a},
           {"A_mu", th.A_mu},
           {"pass", m.params.a < std::min(th.a0, th.abar0)}};
    j["sources"] = "formula";
    write_json_atomic((dir / "critical_thresholds.json").string(), j);
    outcome.outputs = {"critical_thresholds.json"};
  } else if (name == "fiber_scan") {
    const Field seed = gaussian_seed(m.grid, m.params.a, m.solver.seed);
    const auto cf = fiber_coefficients(seed, m.params);
    const auto geom = fiber_geometry(cf, m.params);
    json j{{"coefficients", {{"A", cf.A}, {"B", cf.B}, {"C", cf.C}, {"D", cf.D}}},
           {"geometry",
            {{"xi", geom.xi},
             {"t_max_pt", geom.t_max_pt},
             {"c_zero", geom.c_zero},
             {"d_zero", geom.d_zero},
             {"phi_at_xi", geom.phi_at_xi},
             {"phi_at_tmax", geom.phi_at_tmax},
             {"classification_at_zero", to_string(geom.classification_at_zero)}}},
           {"sources", "measured"}};
    write_json_atomic((dir / "fiber_scan.json").string(), j);
    std::string csv = "t,phi,dphi,d2phi\n";
    char buf[160];
    const double lo = geom.xi - 1.0, hi = geom.d_zero + 0.5;
    const int npts = 1201;
    for (int i = 0; i < npts; ++i) {
      const double t = lo + (hi - lo) * i / (npts - 1);
      std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g\n", t,
                    fiber_value(cf, t, m.params), fiber_deriv(cf, t, m.params),
                    fiber_second_deriv(cf, t, m.params));
      csv += buf;
    }
    write_file_atomic((dir / "fiber_scan.csv").string(), csv);
    outcome.outputs = {"fiber_scan.json", "fiber_scan.csv"};
  } else if (name == "local_min") {
    run_solver_task(m, ct, true, dir, outcome);
  } else if (name == "mountain_pass") {
    run_solver_task(m, ct, false, dir, outcome);
  } else {
    throw ParameterError("unknown task '" + name + "'");
  }
}

}  // namespace detail

// Execute every task of a validated manifest, writing one JSON (plus field
// and trace files for the solvers) per task into output_dir. A failing task
// is recorded in the summary and does not stop later tasks. Identical
// manifests produce byte-identical task files; wall-clock timings live only
// in the summary's metadata block.
inline RunResult run(const RunManifest& m, const std::string& manifest_bytes) {
  namespace fs = std::filesystem;
  RunResult out;
  out.manifest_hash = detail::git_blob_sha1(manifest_bytes);
  out.warnings = m.warnings;
  const fs::path dir(m.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output_dir " + m.output_dir + ": " + ec.message());

  out.constants = detail::resolve_constants(m);

  for (const auto& name : m.tasks) {
    TaskOutcome outcome;
    outcome.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      detail::run_one_task(m, out.constants, name, dir, outcome);
      outcome.status = "ok";
    } catch (const Error& e) {
      outcome.status = "error";
      outcome.error = e.what();
    }
    outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.tasks.push_back(std::move(outcome));
  }

  nlohmann::json summary;
  summary["manifest_hash"] = out.manifest_hash;
  summary["constants"] = detail::constants_json(out.constants);
  summary["params"] = detail::params_json(m.params);
  summary["grid"] = detail::grid_json(m.grid);
  summary["warnings"] = out.warnings;
  nlohmann::json tasks = nlohmann::json::array();
  nlohmann::json timings;
  double total = 0.0;
  for (const auto& t : out.tasks) {
    nlohmann::json tj{{"name", t.name}, {"status", t.status}, {"outputs", t.outputs}};
    if (!t.error.empty()) tj["error"] = t.error;
    tasks.push_back(tj);
    timings[t.name] = t.seconds;
    total += t.seconds;
  }
  summary["tasks"] = tasks;
  // Everything under metadata is timing-dependent and excluded from
  // reproducibility comparisons.
  summary["metadata"] = nlohmann::json{{"task_wall_time_s", timings}, {"total_wall_time_s", total}};
  out.summary_path = (dir / "summary.json").string();
  detail::write_json_atomic(out.summary_path, summary);
  return out;
}

namespace detail {

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";
  std::map<std::string, std::string> cells;
};

inline std::string fmt_num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline SweepRow sweep_row(const RunManifest& base, const std::string& axis, double value) {
  SweepRow row;
  row.value = value;

  ProblemParams p0 = base.params;
  double s1 = p0.s1, s2 = p0.s2, p = p0.p, q = p0.q, mu = p0.mu, a = p0.a;
  if (axis == "mu") mu = value;
  else if (axis == "a") a = value;
  else if (axis == "q") q = value;
  else if (axis == "p") p = value;
  else if (axis == "s1") s1 = value;
  else s2 = value;

  auto issues = ProblemParams::check(p0.N, s1, s2, p, q, mu, a);
  if (!issues.empty()) {
    row.status = "skipped_invalid: params" + issues.front().pointer + " " + issues.front().message;
    return row;
  }
  ProblemParams prm = ProblemParams::create(p0.N, s1, s2, p, q, mu, a);
  row.cells["regime"] = to_string(prm.regime);

  RunManifest m = base;
  m.params = prm;
  // Task/regime compatibility can flip along the axis; incompatible tasks are
  // dropped from this row rather than failing the whole sweep.
  ConstantsTable ct;
  try {
    ct = resolve_constants(m);
  } catch (const Error& e) {
    row.status = std::string("skipped_invalid: constants: ") + e.what();
    return row;
  }

  const bool subcritical = prm.regime == Regime::SubcriticalPair;
  if (subcritical) {
    const auto a0 = check_A0(prm, ct);
    const auto a1 = check_A1(prm, ct);
    const auto a2 = check_A2(prm, ct);
    row.cells["A0_pass"] = a0.pass ? "1" : "0";
    row.cells["A0_lhs"] = fmt_num(a0.lhs);
    row.cells["A0_rhs"] = a0.vacuous ? "vacuous" : fmt_num(a0.rhs);
    row.cells["A1_pass"] = a1.pass ? "1" : "0";
    row.cells["A1_lhs"] = fmt_num(a1.lhs);
    row.cells["A1_rhs"] = fmt_num(a1.rhs);
    row.cells["A2_pass"] = a2.pass ? "1" : "0";
    row.cells["A2_lhs"] = fmt_num(a2.lhs);
    row.cells["A2_rhs"] = fmt_num(a2.rhs);
    if (a1.pass) {
      const auto hg = h_geometry(prm, ct);
      row.cells["R0"] = fmt_num(hg.R0);
      row.cells["R1"] = fmt_num(hg.R1);
      row.cells["t_max"] = fmt_num(hg.t_max);
    } else {
      row.cells["R0"] = row.cells["R1"] = row.cells["t_max"] = "degenerate";
    }
  }
  const auto th = thresholds_for_report(prm, ct);
  row.cells["a0"] = fmt_num(th.a0);
  row.cells["abar0"] = fmt_num(th.abar0);
  row.cells["K0"] = fmt_num(th.K0);

  const bool want_local =
      std::find(m.tasks.begin(), m.tasks.end(), "local_min") != m.tasks.end();
  const bool want_mp =
      std::find(m.tasks.begin(), m.tasks.end(), "mountain_pass") != m.tasks.end();
  if (want_local) {
    try {
      const auto rec = local_minimize(prm, ct, m.grid, m.solver);
      row.cells["gamma"] = fmt_num(rec.energy_level);
      row.cells["lambda_local"] = fmt_num(rec.lambda);
      row.cells["local_converged"] = rec.converged ? "1" : "0";
    } catch (const Error& e) {
      row.cells["gamma"] = row.cells["lambda_local"] = "";
      row.cells["local_converged"] = std::string("error: ") + e.what();
    }
  }
  if (want_mp && subcritical) {
    try {
      const auto rec = mountain_pass(prm, ct, m.grid, m.solver);
      row.cells["sigma"] = fmt_num(rec.energy_level);
      row.cells["lambda_mountain"] = fmt_num(rec.lambda);
      row.cells["mountain_converged"] = rec.converged ? "1" : "0";
    } catch (const Error& e) {
      row.cells["sigma"] = row.cells["lambda_mountain"] = "";
      row.cells["mountain_converged"] = std::string("error: ") + e.what();
    }
  }
  return row;
}

}  // namespace detail

// Evaluate the base manifest across one parameter axis and aggregate the
// verdicts, thresholds, levels and multipliers into output_dir/sweep.csv.
// Rows are computed concurrently; invalid parameter points are flagged, not
// fatal.
inline std::string sweep(const SweepSpec& spec) {
  namespace fs = std::filesystem;
  const std::vector<std::string> columns = {
      "axis",       "value",        "status",          "regime",
      "A0_pass",    "A0_lhs",       "A0_rhs",          "A1_pass",
      "A1_lhs",     "A1_rhs",       "A2_pass",         "A2_lhs",
      "A2_rhs",     "R0",           "R1",              "t_max",
      "a0",         "abar0",        "K0",              "gamma",
      "lambda_local", "local_converged", "sigma",      "lambda_mountain",
      "mountain_converged"};

  std::vector<detail::SweepRow> rows(spec.values.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_workers = std::max(1u, std::min<unsigned>(
      std::thread::hardware_concurrency(), static_cast<unsigned>(spec.values.size())));
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (unsigned w = 0; w < n_workers; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < spec.values.size(); i = next.fetch_add(1)) {
        try {
          rows[i] = detail::sweep_row(spec.base, spec.axis, spec.values[i]);
        } catch (const Error& e) {
          rows[i].value = spec.values[i];
          rows[i].status = std::string("error: ") + e.what();
        }
      }
    });
  }
  for (auto& t : workers) t.join();

  std::string csv = "# sources: condition columns and thresholds are formula values against "
                    "the manifest constants table; gamma/sigma/lambda columns are measured "
                    "solver outputs\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    csv += columns[i] + (i + 1 < columns.size() ? "," : "\n");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    for (std::size_t cidx = 0; cidx < columns.size(); ++cidx) {
      const std::string& col = columns[cidx];
      std::string cell;
      if (col == "axis") cell = spec.axis;
      else if (col == "value") cell = detail::fmt_num(spec.values[i]);
      else if (col == "status") cell = row.status;
      else {
        auto it = row.cells.find(col);
        if (it != row.cells.end()) cell = it->second;
      }
      // Keep the CSV well-formed even when error messages carry commas.
      if (cell.find_first_of(",\"\n") != std::string::npos) {
        std::string quoted = "\"";
        for (char ch : cell) {
          if (ch == '"') quoted += "\"\"";
          else if (ch == '\n') quoted += ' ';
          else quoted += ch;
        }
        quoted += "\"";
        cell = quoted;
      }
      csv += cell + (cidx + 1 < columns.size() ? "," : "\n");
    }
  }

  const fs::path dir(spec.base.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output_dir " + spec.base.output_dir + ": " + ec.message());
  const std::string path = (dir / "sweep.csv").string();
  detail::write_file_atomic(path, csv);
  return path;
}

// Exit-code policy shared by every CLI verb.
inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  return 3;
}

}  // namespace fracnls
