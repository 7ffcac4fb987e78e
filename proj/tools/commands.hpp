#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>

#include "config.hpp"
#include "output.hpp"
#include "verify.hpp"

namespace transonic::cli {

namespace fs = std::filesystem;

/// Failed property checks; maps to exit code 4.
struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  fs::path out = "out";
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

inline void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

inline std::string run_id(const RunConfig& c, const std::string& command) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(command + to_json(c).dump())));
  return buf;
}

inline json admissibility_json(const AdmissibilityReport& a) {
  return {{"damping_margin", a.damping_margin},
          {"multiplier_shift", a.multiplier_shift},
          {"exit_damping", a.exit_damping},
          {"multiplier_margin", a.multiplier_margin},
          {"extended_damping_margin", a.extended_damping_margin}};
}

inline json sonic_json(const SonicSurface& S) {
  return {{"sup_xi", S.sup_xi}, {"c1_norm", S.c1_norm}, {"mach_residual", S.mach_residual}};
}

/// Wall-clock timings live apart from report.json so the report stays byte-reproducible.
class Timer {
 public:
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    t_[name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  void write(const fs::path& dir) const { write_json(dir / "timings.json", t_); }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  json t_ = json::object();
};

inline void background_command(const RunConfig& c, const RunOptions& o) {
  Timer t;
  const auto gas = make_gas(c.gamma, c.rho0, c.u0);
  const auto force = make_admissible_force(gas, c.L0, c.L1, c.force_alpha, c.force_theta);
  const auto bg = solve_background(gas, force, AxialGrid(force.L0, force.L2, c.axial));
  const auto adm = verify_admissibility(bg);
  BackgroundFlow ext;
  const auto ea = verify_extended_admissibility(bg, &ext);
  t.lap("solve");
  CsvWriter csv(o.out / "background.csv", {"x1", "rho", "u", "c2", "M2", "k11", "k1", "f", "Phi"});
  for (std::size_t i = 0; i < bg.nodes(); ++i) {
    const long l = long(i);
    csv.row({bg.x(i), bg.rho(0, l), bg.u(0, l), bg.c2(0, l), bg.M2(0, l), bg.k11(0, l), bg.k1(0, l), bg.f(0, l),
             bg.Phi[l]});
  }
  const long si = bg.sonic_index;
  json rep = {{"run_id", run_id(c, "background")},
              {"command", "background"},
              {"config", to_json(c)},
              {"sonic", {{"index", si}, {"x1", bg.x(std::size_t(si))}, {"rho", bg.rho(0, si)}, {"u", bg.u(0, si)},
                         {"M2_slope", bg.M2(1, si)}}},
              {"admissibility", admissibility_json(adm)},
              {"extended_admissibility", admissibility_json(ea)},
              {"multiplier_minimum", multiplier_minimum(bg, adm.multiplier_shift, false)},
              {"extended_multiplier_minimum", multiplier_minimum(ext, ea.multiplier_shift, true)}};
  write_json(o.out / "report.json", rep);
  t.lap("output");
  t.write(o.out);
}

namespace detail {

struct Dump {
  const FlowSetup& s;
  const RunConfig& c;
  std::array<const Eigen::MatrixXd*, 3> u;
  const Eigen::MatrixXd *rho, *M2;
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> extra;
};

inline double force_potential(const Dump& d, std::size_t c, std::size_t i) {
  return d.s.bg.Phi[long(i)] + d.c.epsilon * d.c.phi0.eval(d.s.cs, d.s.grid.x(i), d.s.cs.x2(c), d.s.cs.x3(c))[0];
}

/// field.csv, field.vtk and sonic.csv. Returns the Bernoulli deviation over the dumped rows.
inline double dump_fields(const Dump& d, const SonicSurface& S, const fs::path& dir) {
  const std::size_t n = d.s.omega_nodes(), nc = d.s.cs.nodes(), st = d.c.output_stride;
  std::vector<std::string> head{"x1", "x2", "x3", "u1", "u2", "u3", "rho", "M2", "Phi"};
  for (const auto& e : d.extra) head.push_back(e.first);
  CsvWriter csv(dir / "field.csv", head);
  std::vector<std::size_t> slices;
  for (std::size_t i = 0; i < n; i += st) slices.push_back(i);
  if (slices.back() != n - 1) slices.push_back(n - 1);
  double bern = 0.0;
  const auto& gas = d.s.gas;
  for (std::size_t i : slices)
    for (std::size_t c = 0; c < nc; ++c) {
      const long lc = long(c), li = long(i);
      const double u1 = (*d.u[0])(lc, li), u2 = (*d.u[1])(lc, li), u3 = (*d.u[2])(lc, li), rho = (*d.rho)(lc, li);
      const double Phi = force_potential(d, c, i);
      std::vector<double> row{d.s.grid.x(i), d.s.cs.x2(c), d.s.cs.x3(c), u1, u2, u3, rho, (*d.M2)(lc, li), Phi};
      for (const auto& e : d.extra) row.push_back((*e.second)(lc, li));
      csv.row(row);
      bern = std::max(bern, std::abs(0.5 * (u1 * u1 + u2 * u2 + u3 * u3) + gas.enthalpy(rho) - Phi - gas.B0));
    }

  const double h1 = d.s.grid.h() * double(st);
  const std::size_t n1 = (n - 1) / st + 1;
  auto strided = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd r(m.rows(), long(n1));
    for (std::size_t k = 0; k < n1; ++k) r.col(long(k)) = m.col(long(k * st));
    return r;
  };
  VtkWriter vtk(dir / "field.vtk", d.c.n2, d.c.n3, n1, {0.0, 0.0, d.s.grid.x0},
                {d.c.a / double(d.c.n2 - 1), d.c.b / double(d.c.n3 - 1), h1});
  vtk.vectors("velocity", {strided(*d.u[0]), strided(*d.u[1]), strided(*d.u[2])});
  vtk.scalars("rho", strided(*d.rho));
  vtk.scalars("M2", strided(*d.M2));
  for (const auto& e : d.extra) vtk.scalars(e.first, strided(*e.second));

  CsvWriter sc(dir / "sonic.csv", {"x2", "x3", "xi", "dxi_dx2", "dxi_dx3"});
  for (std::size_t c = 0; c < nc; ++c)
    sc.row({d.s.cs.x2(c), d.s.cs.x3(c), S.xi[long(c)], S.dxi_dx2[long(c)], S.dxi_dx3[long(c)]});
  return bern;
}

}  // namespace detail

inline void potential_command(const RunConfig& c, const RunOptions& o) {
  Timer t;
  const FlowSetup s = make_setup(c);
  t.lap("setup");
  const PotentialSolution sol = fixed_point_solve(s, potential_problem(c, o.threads));
  t.lap("solve");
  CsvWriter it(o.out / "iterations.csv", {"iteration", "h1_difference", "ratio", "h4_norm", "continuation_tolerance",
                                          "linear_relative_residual"});
  for (std::size_t k = 0; k < sol.history.size(); ++k) {
    const auto& h = sol.history[k];
    it.row({double(k + 1), h.h1_difference, h.ratio, h.h4_norm, h.continuation_tolerance, h.linear_relative_residual});
  }
  const detail::Dump d{s, c, {&sol.velocity[0], &sol.velocity[1], &sol.velocity[2]}, &sol.rho, &sol.M2, {}};
  const double bern = detail::dump_fields(d, sol.sonic, o.out);
  json rep = {{"run_id", run_id(c, "solve-potential")},
              {"command", "solve-potential"},
              {"config", to_json(c)},
              {"iterations", sol.iterations()},
              {"ball_radius", sol.ball_radius},
              {"max_h4", sol.max_h4},
              {"residuals",
               {{"equation_l2", sol.residual_l2},
                {"equation_max", sol.residual_max},
                {"bernoulli", sol.bernoulli_error},
                {"wall", sol.wall_residual},
                {"entrance", sol.entrance_residual},
                {"source_compatibility", sol.source_compatibility}}},
              {"min_mach_slope", sol.min_mach_slope},
              {"admissibility", admissibility_json(s.adm)},
              {"sonic", sonic_json(sol.sonic)},
              {"dumped_bernoulli", bern}};
  write_json(o.out / "report.json", rep);
  t.lap("output");
  t.write(o.out);
}

inline void beltrami_command(const RunConfig& c, const RunOptions& o) {
  Timer t;
  const FlowSetup s = make_setup(c);
  const VorticalBases vb = vortical_bases(s.cs, c.vortical_index);
  t.lap("setup");
  const BeltramiState st = beltrami_fixed_point(s, vb, beltrami_problem(c, o.threads));
  t.lap("solve");
  CsvWriter it(o.out / "iterations.csv",
               {"iteration", "difference", "ratio", "strong_norm", "pi_max", "continuation_tolerance", "slip",
                "wall_neumann", "entrance"});
  for (std::size_t k = 0; k < st.history.size(); ++k) {
    const auto& h = st.history[k];
    it.row({double(k + 1), h.difference, h.ratio, h.strong_norm, h.pi_max, h.continuation_tolerance, h.slip,
            h.wall_neumann, h.entrance});
  }
  const detail::Dump d{s,
                       c,
                       {&st.velocity[0], &st.velocity[1], &st.velocity[2]},
                       &st.rho,
                       &st.M2,
                       {{"kappa", &st.kappa},
                        {"Pi", &st.Pi},
                        {"w1", &st.vorticity[0]},
                        {"w2", &st.vorticity[1]},
                        {"w3", &st.vorticity[2]}}};
  const double bern = detail::dump_fields(d, st.sonic, o.out);
  json rep = {{"run_id", run_id(c, "solve-beltrami")},
              {"command", "solve-beltrami"},
              {"config", to_json(c)},
              {"iterations", st.iterations()},
              {"ball_radius", st.ball_radius},
              {"max_strong", st.max_strong},
              {"residual_tolerance", st.residual_tolerance},
              {"residuals",
               {{"continuity_l2", st.continuity_l2},
                {"continuity_max", st.continuity_max},
                {"curl_l2", st.curl_l2},
                {"curl_max", st.curl_max},
                {"transport_l2", st.transport_l2},
                {"transport_max", st.transport_max},
                {"divergence_curl", st.divergence_curl},
                {"bernoulli", st.bernoulli_error},
                {"slip", st.slip},
                {"wall_neumann", st.wall_neumann},
                {"entrance", st.entrance_residual},
                {"source_compatibility", st.source_compatibility}}},
              {"kappa", {{"wall", st.kappa_wall}, {"interior", st.kappa_interior}}},
              {"Pi", {{"max", st.pi_max}, {"wall", st.pi_wall}, {"end_flux", st.pi_end_flux}}},
              {"vorticity_max", st.vorticity_max},
              {"transport", {{"wall_excursion", st.transport.wall_excursion},
                             {"min_axial_speed", st.transport.min_axial_speed}}},
              {"min_mach_slope", st.min_mach_slope},
              {"admissibility", admissibility_json(s.adm)},
              {"sonic", sonic_json(st.sonic)},
              {"dumped_bernoulli", bern}};
  write_json(o.out / "report.json", rep);
  t.lap("output");
  t.write(o.out);
}

/// Property suite. Criteria whose data are absent from the config are reported as skipped.
inline void verify_command(const RunConfig& c, const RunOptions& o) {
  const auto res = run_suite(c, o.threads);
  json rep = suite_json(res);
  rep["run_id"] = run_id(c, "verify");
  rep["config"] = to_json(c);
  write_json(o.out / "verify.json", rep);
  json tj = json::object();
  for (const auto& r : res) tj[std::to_string(r.id)] = r.seconds;
  write_json(o.out / "timings.json", tj);
  if (!rep["pass"].get<bool>()) throw VerificationFailure("property checks failed; see verify.json");
}

/// Re-renders report.json of a solve directory as text and re-checks it against the dumped files.
inline void report_command(const RunOptions& o) {
  std::ifstream in(o.out / "report.json");
  require(bool(in), ErrorKind::validation, "no report.json in " + o.out.string());
  json rep;
  try {
    rep = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::validation, std::string("report.json is not valid JSON: ") + e.what());
  }
  require(rep.contains("config") && rep.contains("command"), ErrorKind::validation, "report.json lacks config");
  const RunConfig c = from_json(rep["config"]);
  require(to_json(c) == rep["config"], ErrorKind::data_inconsistency, "echoed config does not round-trip");
  const std::string cmd = rep["command"].get<std::string>();

  std::ostringstream txt;
  txt << "run " << rep["run_id"].get<std::string>() << "  " << cmd << '\n';
  std::function<void(const json&, const std::string&)> walk = [&](const json& j, const std::string& pre) {
    for (const auto& [k, v] : j.items()) {
      if (k == "config") continue;
      if (v.is_object()) {
        walk(v, pre + k + ".");
      } else if (v.is_number_float()) {
        txt << "  " << pre << k << " = " << num(v.get<double>()) << '\n';
      } else {
        txt << "  " << pre << k << " = " << v.dump() << '\n';
      }
    }
  };
  walk(rep, "");

  if (rep.contains("dumped_bernoulli")) {
    const auto [head, rows] = read_csv(o.out / "field.csv");
    auto col = [&](const std::string& name) {
      for (std::size_t k = 0; k < head.size(); ++k)
        if (head[k] == name) return k;
      throw Error(ErrorKind::data_inconsistency, "field.csv lacks column " + name);
    };
    const std::size_t i1 = col("u1"), i2 = col("u2"), i3 = col("u3"), ir = col("rho"), ip = col("Phi");
    const auto gas = make_gas(c.gamma, c.rho0, c.u0);
    double bern = 0.0;
    for (const auto& r : rows)
      bern = std::max(bern, std::abs(0.5 * (r[i1] * r[i1] + r[i2] * r[i2] + r[i3] * r[i3]) + gas.enthalpy(r[ir]) -
                                     r[ip] - gas.B0));
    const double drift = std::abs(bern - rep["dumped_bernoulli"].get<double>());
    txt << "  re-evaluated Bernoulli deviation = " << num(bern) << " (drift " << num(drift) << ")\n";
    require(drift <= 1e-12, ErrorKind::data_inconsistency, "Bernoulli re-evaluation drifts from the report");
  }
  open_out(o.out / "report.txt") << txt.str();
}

}  // namespace transonic::cli
