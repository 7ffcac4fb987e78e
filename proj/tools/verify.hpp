#pragma once

#include <chrono>
#include <cmath>
#include <numbers>
#include <functional>
#include <limits>
#include <quadmath.h>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "config.hpp"
#include "output.hpp"
#include "streamline_oracle.hpp"

namespace transonic::cli {

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;  ///< "<=", ">=", "<", ">"
  double bound = 0.0;
  bool pass = false;
};

struct Criterion {
  int id = 0;
  std::string title;
  std::vector<Check> checks;
  std::string error;  ///< error record when a solver threw
  std::string skipped;  ///< reason when the config carries no data for this criterion
  double seconds = 0.0;
  double time_limit = 0.0;  ///< 0 when the criterion has no runtime bound

  bool pass() const {
    if (!skipped.empty()) return error.empty();
    if (!error.empty() || checks.empty()) return false;
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  void le(const std::string& n, double v, double b) { checks.push_back({n, v, "<=", b, v <= b}); }
  void lt(const std::string& n, double v, double b) { checks.push_back({n, v, "<", b, v < b}); }
  void ge(const std::string& n, double v, double b) { checks.push_back({n, v, ">=", b, v >= b}); }
  void gt(const std::string& n, double v, double b) { checks.push_back({n, v, ">", b, v > b}); }
};

namespace suite {

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Sonic state, conservation on 10^4 nodes and the required force integral, against closed forms.
inline void background(const RunConfig& cfg, Criterion& r) {
  const auto gas = make_gas(cfg.gamma, cfg.rho0, cfg.u0);
  const auto force = make_admissible_force(gas, cfg.L0, cfg.L1, cfg.force_alpha, cfg.force_theta);
  const double g = cfg.gamma, m = cfg.rho0 * cfg.u0;
  const double rho_s = std::pow(m * m / g, 1.0 / (g + 1.0)), u_s = m / rho_s;
  auto enthalpy = [&](double rho) { return g / (g - 1.0) * std::pow(rho, g - 1.0); };
  const double required = enthalpy(rho_s) + 0.5 * u_s * u_s - enthalpy(cfg.rho0) - 0.5 * cfg.u0 * cfg.u0;

  // 10^4 intervals keep x1 = 0 on the grid.
  const auto bg = solve_background(gas, force, AxialGrid(cfg.L0, cfg.L1, 10000));
  require(bg.sonic_index >= 0, ErrorKind::no_sonic_point, "background has no sonic node");
  r.le("sonic density error", std::abs(bg.rho(0, bg.sonic_index) - rho_s), 1e-8);
  r.le("sonic speed error", std::abs(bg.u(0, bg.sonic_index) - u_s), 1e-8);
  double mass = 0.0, bern = 0.0;
  for (std::size_t i = 0; i < bg.nodes(); ++i) {
    const double u = bg.u(0, long(i)), rho = bg.rho(0, long(i));
    mass = std::max(mass, std::abs(rho * u - m));
    bern = std::max(bern, std::abs(0.5 * u * u + enthalpy(rho) - bg.Phi[long(i)] - gas.B0));
  }
  r.le("mass flux deviation (10^4 + 1 nodes)", mass, 1e-10);
  r.le("Bernoulli deviation (10^4 + 1 nodes)", bern, 1e-10);
  const double quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double x) { return force.f(x); }, cfg.L0, 0.0, 15, 1e-14);
  r.le("force integral over [L0, 0] vs closed form", std::abs(force.integral(cfg.L0, 0.0) - required), 1e-10);
  r.le("independent quadrature vs closed form", std::abs(quad - required), 1e-10);
}

/// Damping and multiplier inequalities of the background and its extension.
inline void admissibility(const RunConfig& cfg, Criterion& r) {
  const auto gas = make_gas(cfg.gamma, cfg.rho0, cfg.u0);
  const auto force = make_admissible_force(gas, cfg.L0, cfg.L1, cfg.force_alpha, cfg.force_theta);
  const auto bg = solve_background(gas, force, AxialGrid(force.L0, force.L2, cfg.axial));
  const auto a = verify_admissibility(bg);
  r.gt("damping margin kappa*", a.damping_margin, 0.0);
  r.ge("multiplier minimum", multiplier_minimum(bg, a.multiplier_shift, false), 4.0);
  BackgroundFlow ext;
  const auto e = verify_extended_admissibility(bg, &ext);
  r.gt("exit damping k0", e.exit_damping, 0.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ext.nodes(); ++i)
    for (int j = 0; j <= 4; ++j)
      worst = std::max(worst, 2 * ext.a1(0, long(i)) + (2 * j - 1) * ext.a11(1, long(i)) + e.damping_margin);
  r.le("max extended damping inequality + kappa* (j <= 4)", worst, 0.0);
  r.ge("extended multiplier minimum", multiplier_minimum(ext, e.multiplier_shift, true), 4.0);
}

/// Exact reflection weights and C^3 matching of E(sin) at L1 = 1.
inline void extension(Criterion& r) {
  const auto c = extension_coefficients_exact();
  const std::array<std::int64_t, 4> want{-10, 160, -405, 256};
  double off = 0.0;
  for (int j = 0; j < 4; ++j)
    off = std::max(off, c[std::size_t(j)] == Rational(want[std::size_t(j)]) ? 0.0 : 1.0);
  r.le("weights differ from (-10, 160, -405, 256)", off, 0.0);
  using Q = __float128;
  const Q L1 = 1, h = Q(1) / 1000;
  const auto w = extension_coefficients();
  auto Ef = [&](Q x) -> Q {
    if (x <= L1) return sinq(x);
    Q s = 0;
    for (int j = 1; j <= 4; ++j) s += Q(w[std::size_t(j - 1)]) * sinq(L1 + (L1 - x) / j);
    return s;
  };
  std::vector<Q> left(8), right(8);
  for (int q = 0; q < 8; ++q) {
    left[std::size_t(q)] = -q;
    right[std::size_t(q)] = q;
  }
  const auto wl = fd_weights<Q>(Q(0), left, 3), wr = fd_weights<Q>(Q(0), right, 3);
  for (int k = 0; k <= 3; ++k) {
    Q dl = 0, dr = 0;
    for (int q = 0; q < 8; ++q) {
      dl += wl[std::size_t(k)][std::size_t(q)] * sinq(L1 - q * h);
      dr += wr[std::size_t(k)][std::size_t(q)] * Ef(L1 + q * h);
    }
    for (int e = 0; e < k; ++e) {
      dl /= h;
      dr /= h;
    }
    r.le("jump of derivative " + std::to_string(k) + " at L1 (h = 1e-3)", std::abs(double(dl - dr)), 1e-6);
  }
}

/// p(s) with p(0) = p''(0) = 0 and p'(D) = 0; a manufactured axial profile for the mixed solver.
inline double profile(double s, double D, int k) {
  switch (k) {
    case 0: return s - s * s * s / (3 * D * D);
    case 1: return 1 - s * s / (D * D);
    default: return -2 * s / (D * D);
  }
}

/// Manufactured solution profile(x - L0) b_1 of the background mixed operator.
inline void mixed(const RunConfig& cfg, Criterion& r) {
  const std::size_t j = 1;
  std::vector<double> err;
  // 1260 and 2520 intervals on [L0, L2] put 840 and 1680 on [L0, L1].
  for (std::size_t n1 : {std::size_t(1260), std::size_t(2520)}) {
    const FlowSetup s = make_setup(cfg, 16, n1);
    const double D = s.grid.x1 - s.grid.x0;
    const std::size_t n = s.omega_nodes();
    auto gs = build_galerkin(s.ext, assemble_coefficients(s.bg, s.cs, n), s.basis, s.E);
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(long(s.basis.size()), long(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double t = s.grid.x(i) - s.grid.x0;
      F(long(j), long(i)) = s.bg.k11(0, long(i)) * profile(t, D, 2) + s.bg.k1(0, long(i)) * profile(t, D, 1) -
                            s.basis.eigenvalue(j) * profile(t, D, 0);
    }
    const auto sol = solve_linear_mixed(gs, s.basis, s.E, F, cfg.ladder);
    const Eigen::VectorXd w = s.omega().trapezoid();
    double e2 = 0.0, r2 = 0.0;
    Eigen::MatrixXd exact = Eigen::MatrixXd::Zero(sol.psi.rows(), sol.psi.cols());
    for (long i = 0; i < sol.psi.cols(); ++i) {
      exact(long(j), i) = profile(s.grid.x(std::size_t(i)) - s.grid.x0, D, 0);
      e2 += w[i] * (sol.psi.col(i) - exact.col(i)).squaredNorm();
      r2 += w[i] * exact(long(j), i) * exact(long(j), i);
    }
    err.push_back(std::sqrt(e2 / r2));
    if (n1 != 2520) continue;
    r.le("relative L2 error (16 modes, 1680 intervals on [L0, L1])", err.back(), 1e-4);
    double rising = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < sol.differences.size(); ++k)
      rising = std::max(rising, sol.differences[k] - sol.differences[k - 1]);
    r.lt("largest increase of consecutive ladder differences", rising, 0.0);
    const auto zero = solve_linear_mixed(gs, s.basis, s.E, Eigen::MatrixXd::Zero(F.rows(), F.cols()), cfg.ladder);
    r.le("max |psi| for F = 0", max_abs(zero.psi), 0.0);
    const auto en = energy_diagnostics(exact, F, s.bg, s.basis, s.adm.multiplier_shift);
    r.lt("energy constant", en.energy_constant, std::numeric_limits<double>::infinity());
    r.gt("energy constant positive", en.energy_constant, 0.0);
    r.gt("interior coercivity", en.coercivity, 0.0);
    r.le("energy identity balance", en.balance, 1e-6);
  }
  r.ge("observed order 840 -> 1680", std::log2(err[0] / err[1]), 2.0);
}

/// Two potential solves at eps and eps / 2.
inline void potential(const RunConfig& cfg, unsigned threads, Criterion& r) {
  require(cfg.epsilon > 0.0, ErrorKind::validation, "the potential criterion needs epsilon > 0");
  const FlowSetup s = make_setup(cfg);
  std::array<double, 2> sup{};
  for (int k = 0; k < 2; ++k) {
    RunConfig c = cfg;
    c.epsilon = cfg.epsilon / double(1 << k);
    const auto sol = fixed_point_solve(s, potential_problem(c, threads));
    const std::string tag = " (eps = " + num(c.epsilon) + ")";
    double ratio = 0.0;
    for (std::size_t i = 1; i < sol.history.size(); ++i) ratio = std::max(ratio, sol.history[i].ratio);
    r.ge("iterations" + tag, double(sol.iterations()), 2.0);
    r.le("max contraction ratio from the second iterate" + tag, ratio, 0.5);
    r.le("full equation residual L2" + tag, sol.residual_l2, 1e-6);
    r.le("largest H4 proxy / ball radius" + tag, sol.max_h4 / sol.ball_radius, 1.0);
    r.gt("min M^2 increment per node" + tag, sol.min_mach_slope, 0.0);
    r.le("max |M^2(xi) - 1|" + tag, sol.sonic.mach_residual, 1e-8);
    r.gt("sup |xi|" + tag, sol.sonic.sup_xi, 0.0);
    r.lt("sup |xi| / eps" + tag, sol.sonic.sup_xi / c.epsilon, std::numeric_limits<double>::infinity());
    sup[std::size_t(k)] = sol.sonic.sup_xi;
  }
  const double q = sup[0] / sup[1];
  r.ge("sup |xi| ratio when eps halves", q, 1.5);
  r.le("sup |xi| ratio when eps halves ", q, 2.5);
}

/// Irrotational limit, full-system residuals, streamline transport of kappa.
inline void beltrami(const RunConfig& cfg, unsigned threads, Criterion& r) {
  require(cfg.epsilon > 0.0 && !(cfg.stream.empty() && cfg.potential.empty()), ErrorKind::validation,
          "the Beltrami criterion needs epsilon > 0 and tangential entrance data");
  const FlowSetup s = make_setup(cfg);
  const VorticalBases vb = vortical_bases(s.cs, cfg.vortical_index);

  BeltramiProblem flat = beltrami_problem(cfg, threads);
  flat.h = {};
  const BeltramiState b0 = beltrami_fixed_point(s, vb, flat);
  RunConfig pc = cfg;
  pc.h0 = {};
  const PotentialSolution ps = fixed_point_solve(s, potential_problem(pc, threads));
  double d = 0.0;
  for (int j = 0; j < 3; ++j) d = std::max(d, max_abs(b0.velocity[std::size_t(j)] - ps.velocity[std::size_t(j)]));
  r.le("h = 0: max velocity difference to the potential solver", d, 1e-10);
  r.le("h = 0: max M^2 difference to the potential solver", max_abs(b0.M2 - ps.M2), 1e-10);

  const BeltramiProblem bp = beltrami_problem(cfg, threads);
  const BeltramiState st = beltrami_fixed_point(s, vb, bp);
  double ratio = 0.0;
  for (std::size_t i = 1; i < st.history.size(); ++i) ratio = std::max(ratio, st.history[i].ratio);
  r.le("max contraction ratio from the second iterate", ratio, 0.5);
  r.le("largest strong norm / ball radius", st.max_strong / st.ball_radius, 1.0);
  const double bar = 10.0 * bp.residual_tolerance;
  r.le("L2 of div(rho u)", st.continuity_l2, bar);
  r.le("L2 of curl u - kappa rho u", st.curl_l2, bar);
  r.le("L2 of u . grad kappa", st.transport_l2, bar);
  r.le("max |kappa| and |d1 kappa| on the wall", st.kappa_wall, 1e-12);
  r.gt("max interior vorticity", st.vorticity_max, 1e-10);

  const oracle::PointVelocity u(s, vb, st.field);
  const Eigen::VectorXd k0 = vb.neumann.analyze(st.kappa.col(0));
  const Eigen::VectorXd k1 = vb.neumann.analyze(st.kappa.col(st.kappa.cols() - 1));
  std::mt19937 rng(20240607u);
  std::uniform_real_distribution<double> U(0.02, 0.98);
  double worst = 0.0;
  for (int line = 0; line < 50; ++line) {
    const double x2 = U(rng) * s.cs.a, x3 = U(rng) * s.cs.b;
    const auto end = u.trace(x2, x3, s.omega_nodes() / 4);
    worst = std::max(worst, std::abs(oracle::neumann_point(vb.neumann, k1, end[0], end[1]) -
                                     oracle::neumann_point(vb.neumann, k0, x2, x3)));
  }
  r.le("kappa variation along 50 traced streamlines", worst, 1e-6);
}

/// Manufactured div-curl problem on two axial grids and the closed-form harmonic mode.
inline void divcurl(const RunConfig& cfg, Criterion& r) {
  const double pi = std::numbers::pi;
  const double L = cfg.L1 - cfg.L0;
  {
    const double lam = 2.5, x = 0.3 * cfg.L0 + 0.7 * cfg.L1, k = std::sqrt(lam);
    const double exact = std::cosh(k * (x - cfg.L1)) / std::cosh(k * L);
    r.le("harmonic mode vs cosh closed form", std::abs(harmonic_mode(lam, 1.0, cfg.L0, cfg.L1, x) - exact), 1e-12);
    r.le("harmonic mode entrance value", std::abs(harmonic_mode(lam, 1.0, cfg.L0, cfg.L1, cfg.L0) - 1.0), 1e-12);
    r.le("harmonic mode exit slope", std::abs(harmonic_mode(lam, 1.0, cfg.L0, cfg.L1, cfg.L1, 1)), 1e-12);
  }
  std::vector<double> curl_err;
  std::size_t fine = cfg.axial;
  if (fine % 2 != 0) fine = 840;
  try {
    RunConfig half = cfg;
    half.axial = fine / 2;
    validate(half);
  } catch (const Error&) {
    fine = 840;
  }
  for (std::size_t n1 : {fine / 2, fine}) {
    const FlowSetup s = make_setup(cfg, 4, n1);
    const VorticalBases vb = vortical_bases(s.cs, cfg.vortical_index);
    const long kq = vb.dirichlet.find(1, 1), ke = vb.vec.find(1, 1, 1), kb = vb.neumann.find(1, 2);
    const double alpha = vb.dirichlet.eigenvalue(std::size_t(kq)), beta = vb.vec.eigenvalue(std::size_t(ke));
    const AxialGrid g = s.omega();
    const double w = pi / L;
    const long n = long(g.nodes()), nc = long(s.cs.nodes());
    // u* = (q_11, sin(w (x1 - L0)) e_11 curl type), f = -Lap u*, g = (curl u*)'(L0) + 1e-3 grad b_12.
    std::array<Eigen::MatrixXd, 3> f;
    for (auto& x : f) x = Eigen::MatrixXd::Zero(nc, n);
    for (long i = 0; i < n; ++i) {
      const double sn = std::sin(w * (g.x(std::size_t(i)) - g.x0));
      f[0].col(i) = alpha * vb.dirichlet.table().col(kq);
      f[1].col(i) = (beta + w * w) * sn * vb.vec.table(0).col(ke);
      f[2].col(i) = (beta + w * w) * sn * vb.vec.table(1).col(ke);
    }
    const Eigen::VectorXd g2 = vb.dirichlet.table(Deriv::d3).col(kq) - w * vb.vec.table(1).col(ke) +
                               1e-3 * vb.neumann.table(Deriv::d2).col(kb);
    const Eigen::VectorXd g3 = w * vb.vec.table(0).col(ke) - vb.dirichlet.table(Deriv::d2).col(kq) +
                               1e-3 * vb.neumann.table(Deriv::d3).col(kb);
    const DivCurlSolution sol = solve_divcurl(s, vb, f, g2, g3);
    VelocityField vf = zero_velocity(s, vb);
    vf.p = sol.u.p;
    vf.c = sol.u.c;
    vf.phi = sol.phi;
    const VelocityGrid v = evaluate_velocity(s, vb, vf, true);
    double div = 0.0, slip = 0.0, curl = 0.0, scale = 0.0;
    for (long i = 0; i < n; ++i)
      for (long c = 0; c < nc; ++c) {
        div = std::max(div, std::abs(v.divergence(c, i)));
        const auto cv = v.curl(c, i);
        for (int j = 0; j < 3; ++j) {
          curl = std::max(curl, std::abs(cv[std::size_t(j)] - f[std::size_t(j)](c, i)));
          scale = std::max(scale, std::abs(f[std::size_t(j)](c, i)));
        }
      }
    for (std::size_t c : s.cs.boundary_nodes()) {
      const auto nn = s.cs.normal(c);
      for (long i = 0; i < n; ++i)
        slip = std::max(slip, std::abs(nn[0] * v.v[1](long(c), i) + nn[1] * v.v[2](long(c), i)));
    }
    curl_err.push_back(curl / scale);
    if (n1 != fine) continue;
    r.le("max |div v|", div, 1e-8);
    r.le("max |v . n| on the wall", slip, 1e-8);
    r.le("relative max |curl v - f|", curl / scale, 1e-6);
  }
  r.le("relative max |curl v - f| at N1 minus at N1 / 2", curl_err[1] - curl_err[0], 0.0);
}

}  // namespace suite

/// Runs criteria 1 to 7 on the configuration. Solver errors are recorded on the criterion.
inline std::vector<Criterion> run_suite(const RunConfig& cfg, unsigned threads) {
  struct Item {
    int id;
    const char* title;
    double limit;
    std::function<void(Criterion&)> run;
    std::string skip = {};
  };
  const bool flat = cfg.epsilon == 0.0;
  const bool tangential = !(cfg.stream.empty() && cfg.potential.empty());
  const std::vector<Item> items{
      {1, "background exactness", 1.0, [&](Criterion& r) { suite::background(cfg, r); }},
      {2, "admissibility margins", 1.0, [&](Criterion& r) { suite::admissibility(cfg, r); }},
      {3, "extension operator", 0.0, [&](Criterion& r) { suite::extension(r); }},
      {4, "linear mixed solver", 60.0, [&](Criterion& r) { suite::mixed(cfg, r); }},
      {5, "nonlinear potential solver", 300.0, [&](Criterion& r) { suite::potential(cfg, threads, r); },
       flat ? "epsilon = 0" : ""},
      {6, "Beltrami solver", 600.0, [&](Criterion& r) { suite::beltrami(cfg, threads, r); },
       flat ? "epsilon = 0" : tangential ? "" : "no tangential entrance data"},
      {7, "div-curl system", 0.0, [&](Criterion& r) { suite::divcurl(cfg, r); }},
  };
  std::vector<Criterion> out;
  for (const auto& it : items) {
    Criterion c;
    c.id = it.id;
    c.title = it.title;
    c.time_limit = it.limit;
    const auto t0 = std::chrono::steady_clock::now();
    c.skipped = it.skip;
    if (!c.skipped.empty()) {
      out.push_back(std::move(c));
      continue;
    }
    try {
      it.run(c);
    } catch (const Error& e) {
      c.error = e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(c));
  }
  return out;
}

/// Criteria without timings, so that reruns compare byte for byte.
inline json suite_json(const std::vector<Criterion>& cs) {
  json arr = json::array();
  bool all = true;
  for (const auto& c : cs) {
    json checks = json::array();
    for (const auto& k : c.checks)
      checks.push_back({{"name", k.name}, {"value", k.value}, {"relation", k.relation}, {"bound", k.bound},
                        {"pass", k.pass}});
    json e = {{"id", c.id}, {"title", c.title}, {"pass", c.pass()}, {"checks", checks}};
    if (!c.error.empty()) e["error"] = c.error;
    if (!c.skipped.empty()) e["skipped"] = c.skipped;
    arr.push_back(e);
    all = all && c.pass();
  }
  return {{"criteria", arr}, {"pass", all}};
}

}  // namespace transonic::cli
