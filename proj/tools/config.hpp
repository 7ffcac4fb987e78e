#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "transonic/beltrami.hpp"

namespace transonic::cli {

using nlohmann::json;

/// Run configuration. Boundary data and force shapes are cosine-coefficient lists [m, n, amplitude].
struct RunConfig {
  double gamma = 2.0, rho0 = 1.0, u0 = 0.5;
  double L0 = -1.0, L1 = 1.0;
  double force_alpha = 1.0, force_theta = 0.0;
  double a = 1.0, b = 1.0;
  std::size_t n2 = 33, n3 = 33;
  double epsilon = 1e-3, epsilon_cap = 0.05;
  CosineSeries h0;                 ///< potential entrance datum
  CosineSeries stream, potential;  ///< tangential entrance data (h2, h3) = grad-perp stream + grad potential
  ForcePerturbation phi0;
  std::size_t modes = 16, axial = 840;
  int vortical_index = -1;  ///< largest vortical mode index; -1 uses every index the cross grid admits
  SigmaLadder ladder;
  double tolerance = 1e-10;
  std::size_t max_iterations = 40;
  double residual_tolerance = 1e-7;
  std::size_t output_stride = 16;  ///< axial stride of the dumped 3-D fields
};

namespace detail {

inline json series_to_json(const CosineSeries& s) {
  json j = json::array();
  for (const auto& t : s.terms) j.push_back({t.m, t.n, t.amplitude});
  return j;
}

inline CosineSeries series_from_json(const json& j, const std::string& where) {
  require(j.is_array(), ErrorKind::validation, where + " must be a list of [m, n, amplitude]");
  CosineSeries s;
  for (const auto& t : j) {
    require(t.is_array() && t.size() == 3 && t[0].is_number_integer() && t[1].is_number_integer() &&
                t[2].is_number(),
            ErrorKind::validation, where + " entries must be [m, n, amplitude]");
    const int m = t[0].get<int>(), n = t[1].get<int>();
    require(m >= 0 && n >= 0, ErrorKind::validation, where + " indices must be nonnegative");
    s.terms.push_back({m, n, t[2].get<double>()});
  }
  return s;
}

/// Appends wall_flat_bump(A) when obj[key] = A.
inline void add_bump(CosineSeries& s, const json& obj, const std::string& key) {
  if (!obj.contains(key)) return;
  require(obj[key].is_number(), ErrorKind::validation, key + " must be a number");
  for (const auto& t : wall_flat_bump(obj[key].get<double>()).terms) s.terms.push_back(t);
}

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  require(obj.is_object(), ErrorKind::validation, where + " must be an object");
  for (const auto& [k, v] : obj.items())
    require(allowed.count(k) > 0, ErrorKind::validation, "unknown key '" + k + "' in " + where);
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::validation, std::string("bad value for '") + key + "'");
  }
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  return {
      {"gas", {{"gamma", c.gamma}, {"rho0", c.rho0}, {"u0", c.u0}}},
      {"duct", {{"L0", c.L0}, {"L1", c.L1}}},
      {"force", {{"alpha", c.force_alpha}, {"theta", c.force_theta}}},
      {"cross_section", {{"a", c.a}, {"b", c.b}, {"n2", c.n2}, {"n3", c.n3}}},
      {"epsilon", c.epsilon},
      {"epsilon_cap", c.epsilon_cap},
      {"entrance", {{"h0", detail::series_to_json(c.h0)},
                    {"stream", detail::series_to_json(c.stream)},
                    {"potential", detail::series_to_json(c.potential)}}},
      {"force_perturbation",
       {{"terms", detail::series_to_json(c.phi0.shape)}, {"center", c.phi0.center}, {"width", c.phi0.width}}},
      {"resolution", {{"modes", c.modes}, {"axial", c.axial}, {"vortical_index", c.vortical_index}}},
      {"sigma_ladder", {{"start", c.ladder.start}, {"stop", c.ladder.stop}, {"factor", c.ladder.factor}}},
      {"tolerances",
       {{"fixed_point", c.tolerance}, {"max_iterations", c.max_iterations}, {"residual", c.residual_tolerance}}},
      {"output", {{"axial_stride", c.output_stride}}},
  };
}

/// Checks ranges and the grid conditions of the axial extension.
inline void validate(const RunConfig& c) {
  require(c.gamma > 1.0 && c.rho0 > 0.0 && c.u0 > 0.0, ErrorKind::validation, "need gamma > 1, rho0 > 0, u0 > 0");
  require(c.L0 < 0.0 && c.L1 > 0.0, ErrorKind::validation, "need L0 < 0 < L1");
  require(c.a > 0.0 && c.b > 0.0 && c.n2 >= 5 && c.n3 >= 5, ErrorKind::validation,
          "cross section needs positive sides and at least 5 nodes per side");
  require(c.epsilon >= 0.0 && c.epsilon <= c.epsilon_cap, ErrorKind::validation, "need 0 <= epsilon <= epsilon_cap");
  require(c.modes >= 1 && c.axial >= 8, ErrorKind::validation, "need modes >= 1 and axial >= 8");
  require(c.tolerance > 0.0 && c.max_iterations >= 1 && c.residual_tolerance > 0.0, ErrorKind::validation,
          "tolerances must be positive");
  require(c.output_stride >= 1, ErrorKind::validation, "axial_stride must be positive");
  require(c.phi0.width > 0.0, ErrorKind::validation, "force perturbation width must be positive");
  c.ladder.values();
  make_admissible_force(make_gas(c.gamma, c.rho0, c.u0), c.L0, c.L1, c.force_alpha, c.force_theta);
  const double cells = double(c.axial) * (c.L1 - c.L0) / (2.0 * c.L1 - c.L0);
  require(std::abs(cells - std::round(cells)) < 1e-9, ErrorKind::grid_incompatibility,
          "the exit L1 is not an axial node for this resolution");
}

inline RunConfig from_json(const json& j) {
  using detail::check_keys;
  using detail::read;
  RunConfig c;
  check_keys(j, {"gas", "duct", "force", "cross_section", "epsilon", "epsilon_cap", "entrance", "force_perturbation",
                 "resolution", "sigma_ladder", "tolerances", "output"},
             "config");
  if (j.contains("gas")) {
    const auto& g = j["gas"];
    check_keys(g, {"gamma", "rho0", "u0"}, "gas");
    read(g, "gamma", c.gamma);
    read(g, "rho0", c.rho0);
    read(g, "u0", c.u0);
  }
  if (j.contains("duct")) {
    check_keys(j["duct"], {"L0", "L1"}, "duct");
    read(j["duct"], "L0", c.L0);
    read(j["duct"], "L1", c.L1);
  }
  if (j.contains("force")) {
    check_keys(j["force"], {"alpha", "theta"}, "force");
    read(j["force"], "alpha", c.force_alpha);
    read(j["force"], "theta", c.force_theta);
  }
  if (j.contains("cross_section")) {
    const auto& x = j["cross_section"];
    check_keys(x, {"a", "b", "n2", "n3"}, "cross_section");
    read(x, "a", c.a);
    read(x, "b", c.b);
    read(x, "n2", c.n2);
    read(x, "n3", c.n3);
  }
  read(j, "epsilon", c.epsilon);
  read(j, "epsilon_cap", c.epsilon_cap);
  if (j.contains("entrance")) {
    const auto& e = j["entrance"];
    check_keys(e, {"h0", "h0_bump", "stream", "stream_bump", "potential"}, "entrance");
    if (e.contains("h0")) c.h0 = detail::series_from_json(e["h0"], "entrance.h0");
    if (e.contains("stream")) c.stream = detail::series_from_json(e["stream"], "entrance.stream");
    if (e.contains("potential")) c.potential = detail::series_from_json(e["potential"], "entrance.potential");
    detail::add_bump(c.h0, e, "h0_bump");
    detail::add_bump(c.stream, e, "stream_bump");
  }
  if (j.contains("force_perturbation")) {
    const auto& f = j["force_perturbation"];
    check_keys(f, {"terms", "center", "width"}, "force_perturbation");
    if (f.contains("terms")) c.phi0.shape = detail::series_from_json(f["terms"], "force_perturbation.terms");
    read(f, "center", c.phi0.center);
    read(f, "width", c.phi0.width);
  }
  if (j.contains("resolution")) {
    const auto& r = j["resolution"];
    check_keys(r, {"modes", "axial", "vortical_index"}, "resolution");
    read(r, "modes", c.modes);
    read(r, "axial", c.axial);
    read(r, "vortical_index", c.vortical_index);
  }
  if (j.contains("sigma_ladder")) {
    const auto& l = j["sigma_ladder"];
    check_keys(l, {"start", "stop", "factor"}, "sigma_ladder");
    read(l, "start", c.ladder.start);
    read(l, "stop", c.ladder.stop);
    read(l, "factor", c.ladder.factor);
  }
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    check_keys(t, {"fixed_point", "max_iterations", "residual"}, "tolerances");
    read(t, "fixed_point", c.tolerance);
    read(t, "max_iterations", c.max_iterations);
    read(t, "residual", c.residual_tolerance);
  }
  if (j.contains("output")) {
    check_keys(j["output"], {"axial_stride"}, "output");
    read(j["output"], "axial_stride", c.output_stride);
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::validation, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::validation, std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline FlowSetup make_setup(const RunConfig& c, std::size_t modes, std::size_t axial) {
  const auto gas = make_gas(c.gamma, c.rho0, c.u0);
  const auto force = make_admissible_force(gas, c.L0, c.L1, c.force_alpha, c.force_theta);
  return make_flow_setup(gas, force, axial, build_rectangle(c.a, c.b, c.n2, c.n3), modes);
}

inline FlowSetup make_setup(const RunConfig& c) { return make_setup(c, c.modes, c.axial); }

inline PotentialProblem potential_problem(const RunConfig& c, unsigned threads) {
  PotentialProblem p;
  p.epsilon = c.epsilon;
  p.epsilon_cap = c.epsilon_cap;
  p.h0 = c.h0;
  p.phi0 = c.phi0;
  p.tolerance = c.tolerance;
  p.max_iterations = c.max_iterations;
  p.ladder = c.ladder;
  p.threads = threads;
  return p;
}

inline BeltramiProblem beltrami_problem(const RunConfig& c, unsigned threads) {
  BeltramiProblem p;
  p.epsilon = c.epsilon;
  p.epsilon_cap = c.epsilon_cap;
  p.h.stream = c.stream;
  p.h.potential = c.potential;
  p.phi0 = c.phi0;
  p.tolerance = c.tolerance;
  p.max_iterations = c.max_iterations;
  p.residual_tolerance = c.residual_tolerance;
  p.ladder = c.ladder;
  p.threads = threads;
  return p;
}

}  // namespace transonic::cli
