#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "transonic/axial.hpp"
#include "transonic/cutoff.hpp"
#include "transonic/error.hpp"
#include "transonic/jet.hpp"
#include "transonic/quadrature.hpp"

namespace transonic {

/// Polytropic gas p = rho^gamma with entry state (rho0, u0).
struct GasConstants {
  double gamma = 2.0, rho0 = 1.0, u0 = 0.5;
  double B0 = 0.0, m = 0.0;

  double c2(double rho) const { return gamma * std::pow(rho, gamma - 1.0); }
  double enthalpy(double rho) const { return gamma / (gamma - 1.0) * std::pow(rho, gamma - 1.0); }
  /// Density from the Bernoulli relation at enthalpy level q = B0 + Phi - |u|^2 / 2.
  double density_from_enthalpy(double q) const {
    return std::pow((gamma - 1.0) / gamma * q, 1.0 / (gamma - 1.0));
  }
  double sonic_density() const { return std::pow(m * m / gamma, 1.0 / (gamma + 1.0)); }
  double sonic_speed() const { return m / sonic_density(); }
  /// Bernoulli level of the critical state.
  double sonic_level() const {
    double us = sonic_speed();
    return 0.5 * (gamma + 1.0) / (gamma - 1.0) * us * us;
  }
  /// Required integral of the force over [L0, 0].
  double required_integral() const {
    double closed = (gamma + 1.0) / (2.0 * (gamma - 1.0)) * std::pow(gamma, 2.0 / (gamma + 1.0)) *
                    std::pow(m, 2.0 * (gamma - 1.0) / (gamma + 1.0));
    return closed - B0;
  }
};

inline GasConstants make_gas(double gamma, double rho0, double u0) {
  require(gamma > 1.0 && std::isfinite(gamma), ErrorKind::validation, "gamma must exceed 1");
  require(rho0 > 0.0 && u0 > 0.0, ErrorKind::validation, "entry density and speed must be positive");
  GasConstants g;
  g.gamma = gamma;
  g.rho0 = rho0;
  g.u0 = u0;
  g.B0 = 0.5 * u0 * u0 + gamma / (gamma - 1.0) * std::pow(rho0, gamma - 1.0);
  g.m = rho0 * u0;
  require(u0 * u0 < g.c2(rho0), ErrorKind::inadmissible_data, "entry state must be strictly subsonic");
  return g;
}

/// Axial force f(x) = x (alpha + beta w-(x) + theta w+(x)) with w- = exp(1/x) on x < 0 and
/// w+ = exp(-1/x) on x > 0, continued past L1 by its cubic Taylor polynomial.
class ExternalForce {
 public:
  double L0 = -1.0, L1 = 1.0, L2 = 2.0;
  double alpha = 1.0, beta = 0.0, theta = 0.0;

  Jet6 jet(double x) const {
    if (x > L1) {
      Jet6 base = core(L1);
      Jet6 t = Jet6::variable(x - L1);
      Jet6 r = Jet6::constant(base.c[3]);
      for (int k = 2; k >= 0; --k) r = r * t + base.c[std::size_t(k)];
      return r;
    }
    return core(x);
  }
  double f(double x) const { return jet(x).c[0]; }
  double integral(double a, double b) const {
    return gauss_integral([this](double x) { return f(x); }, a, b);
  }
  double Phi(double x) const { return integral(L0, x); }

 private:
  Jet6 core(double x) const {
    Jet6 X = Jet6::variable(x);
    Jet6 g = Jet6::constant(alpha);
    if (x < 0.0 && beta != 0.0) g += beta * exp(1.0 / X);
    if (x > 0.0 && theta != 0.0) g += theta * exp(-1.0 / X);
    return X * g;
  }
};

/// Builds an admissible force on [L0, 2 L1]; the negative-lobe amplitude beta is fixed by Newton
/// so that the integral over [L0, 0] equals the required value.
inline ExternalForce make_admissible_force(const GasConstants& gas, double L0, double L1, double alpha = 1.0,
                                           double theta = 0.0) {
  require(L0 < 0.0 && L1 > 0.0, ErrorKind::validation, "need L0 < 0 < L1");
  require(alpha > 0.0 && theta >= 0.0, ErrorKind::validation, "force template needs alpha > 0, theta >= 0");
  const double target = gas.required_integral();
  require(target < 0.0, ErrorKind::inadmissible_data,
          "required force integral is nonnegative; entry state already critical");
  ExternalForce F;
  F.L0 = L0;
  F.L1 = L1;
  F.L2 = 2.0 * L1;
  F.alpha = alpha;
  F.theta = theta;
  const double J = gauss_integral([](double x) { return x < 0.0 ? x * std::exp(1.0 / x) : 0.0; }, L0, 0.0);
  double beta = 0.0;
  for (int it = 0; it < 20; ++it) {
    F.beta = beta;
    double r = F.integral(L0, 0.0) - target;
    double step = r / J;
    beta -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(beta))) break;
  }
  F.beta = beta;
  require(std::abs(F.integral(L0, 0.0) - target) <= 1e-12, ErrorKind::solver_diverged,
          "force scaling Newton did not converge");
  require(alpha + std::min(0.0, beta) * std::exp(1.0 / L0) > 0.0, ErrorKind::inadmissible_data,
          "force template changes sign inside [L0, 0)");
  const int samples = 4096;
  for (int s = 1; s <= samples; ++s) {
    double x = F.L1 + (F.L2 - F.L1) * double(s) / samples;
    require(F.f(x) > 0.0, ErrorKind::inadmissible_data,
            "cubic continuation of the force is not positive on (L1, L2]");
  }
  require(F.jet(0.0).c[1] > 0.0, ErrorKind::inadmissible_data, "force must cross zero with positive slope");
  return F;
}

/// Sampled background state. Rows of the derivative tables are derivative orders 0..4.
struct BackgroundFlow {
  static constexpr int kOrders = 5;

  GasConstants gas;
  ExternalForce force;
  AxialGrid grid;
  Eigen::MatrixXd u, rho, c2, M2, k11, k1, f;
  Eigen::VectorXd Phi;
  long sonic_index = -1;

  bool extended = false;
  double k0 = 0.0;
  Eigen::MatrixXd a11;  ///< rows: value, first, second derivative
  Eigen::MatrixXd a1;   ///< rows: value, first derivative
  Eigen::MatrixXd zeta1, zeta2;

  std::size_t nodes() const { return grid.nodes(); }
  double x(std::size_t i) const { return grid.x(i); }
};

namespace detail {

inline Jet6 bernoulli_jet(const GasConstants& g, const Jet6& U) {
  const double K = g.gamma / (g.gamma - 1.0) * std::pow(g.m, g.gamma - 1.0);
  return 0.5 * U * U + K * pow(U, 1.0 - g.gamma);
}

/// Speed offset delta = u - u* solving H(delta) = D with D = integral of f from 0.
inline double solve_speed_offset(const GasConstants& g, double D, int branch) {
  const double us = g.sonic_speed(), gm1 = g.gamma - 1.0;
  auto H = [&](double d) {
    return us * d + 0.5 * d * d + us * us / gm1 * std::expm1(-gm1 * std::log1p(d / us));
  };
  auto Hp = [&](double d) { return us + d - us * std::pow(1.0 + d / us, -g.gamma); };
  if (branch == 0 || D <= 0.0) return 0.0;
  double lo, hi;
  if (branch < 0) {
    lo = -0.5 * us;
    while (H(lo) < D) lo = -us + 0.5 * (lo + us);
    hi = 0.0;
  } else {
    lo = 0.0;
    hi = us;
    while (H(hi) < D) hi *= 2.0;
  }
  double d = branch * std::sqrt(2.0 * D / (g.gamma + 1.0));
  if (!(d > lo && d < hi)) d = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double r = H(d) - D;
    if ((r > 0.0) == (branch < 0)) lo = d;
    else hi = d;
    const double dp = Hp(d);
    double next = dp != 0.0 ? d - r / dp : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - d);
    d = next;
    if (step <= 4e-16 * us || hi - lo <= 4e-16 * us) return d;
  }
  throw Error(ErrorKind::solver_diverged, "background speed solve did not converge (D=" + std::to_string(D) + ")");
}

inline void store_jet(Eigen::MatrixXd& table, std::size_t i, const Jet6& J) {
  for (int k = 0; k < BackgroundFlow::kOrders; ++k) table(k, long(i)) = J.derivative(std::size_t(k));
}

}  // namespace detail

/// Background state by per-node Bernoulli solve; Taylor jets supply the derivatives.
inline BackgroundFlow solve_background(const GasConstants& gas, const ExternalForce& force, const AxialGrid& grid) {
  require(std::abs(grid.x0 - force.L0) <= 1e-12 * std::max(1.0, std::abs(force.L0)), ErrorKind::validation,
          "axial grid must start at L0");
  require(grid.x1 <= force.L2 * (1.0 + 1e-12), ErrorKind::validation, "axial grid exceeds the force domain");
  BackgroundFlow bg;
  bg.gas = gas;
  bg.force = force;
  bg.grid = grid;
  const std::size_t np = grid.nodes();
  for (auto* t : {&bg.u, &bg.rho, &bg.c2, &bg.M2, &bg.k11, &bg.k1, &bg.f})
    t->resize(BackgroundFlow::kOrders, long(np));
  bg.Phi.resize(long(np));

  std::size_t i0 = 0;
  for (std::size_t i = 1; i < np; ++i)
    if (std::abs(grid.x(i)) < std::abs(grid.x(i0))) i0 = i;
  std::vector<double> D(np);
  D[i0] = force.integral(0.0, grid.x(i0));
  for (std::size_t i = i0 + 1; i < np; ++i) D[i] = D[i - 1] + force.integral(grid.x(i - 1), grid.x(i));
  for (std::size_t i = i0; i-- > 0;) D[i] = D[i + 1] - force.integral(grid.x(i), grid.x(i + 1));
  bg.Phi[0] = 0.0;
  for (std::size_t i = 1; i < np; ++i) bg.Phi[long(i)] = bg.Phi[long(i - 1)] + force.integral(grid.x(i - 1), grid.x(i));

  const double us = gas.sonic_speed(), gm1 = gas.gamma - 1.0;
  const double K = gas.gamma / gm1 * std::pow(gas.m, gm1);
  for (std::size_t i = 0; i < np; ++i) {
    const double x = grid.x(i);
    const int branch = x < 0.0 ? -1 : (x > 0.0 ? 1 : 0);
    const Jet6 F = force.jet(x);
    Jet6 P;
    for (std::size_t k = 1; k <= 6; ++k) P.c[k] = F.c[k - 1] / double(k);
    Jet6 U = Jet6::constant(us + detail::solve_speed_offset(gas, D[i], branch));
    const double u0 = U.c[0];
    if (branch != 0) {
      const double Gp = u0 - K * gm1 * std::pow(u0, -gas.gamma);
      require(Gp != 0.0, ErrorKind::solver_diverged, "branch ambiguity away from the sonic point");
      for (std::size_t k = 1; k <= 6; ++k) {
        Jet6 R = detail::bernoulli_jet(gas, U);
        U.c[k] = (P.c[k] - R.c[k]) / Gp;
      }
    } else {
      bg.sonic_index = long(i);
      const double Gpp = 1.0 + K * gas.gamma * gm1 * std::pow(u0, -gas.gamma - 1.0);
      require(P.c[2] > 0.0, ErrorKind::solver_diverged, "force slope at the sonic point must be positive");
      U.c[1] = std::sqrt(2.0 * P.c[2] / Gpp);
      for (std::size_t k = 2; k <= 5; ++k) {
        Jet6 R = detail::bernoulli_jet(gas, U);
        U.c[k] = (P.c[k + 1] - R.c[k + 1]) / (Gpp * U.c[1]);
      }
    }
    Jet6 RHO = gas.m / U;
    Jet6 C2 = gas.gamma * pow(RHO, gm1);
    Jet6 MM = U * U / C2;
    Jet6 K11 = 1.0 - MM;
    Jet6 K1 = (F - (gas.gamma + 1.0) * U * U.differentiate()) / C2;
    detail::store_jet(bg.u, i, U);
    detail::store_jet(bg.rho, i, RHO);
    detail::store_jet(bg.c2, i, C2);
    detail::store_jet(bg.M2, i, MM);
    detail::store_jet(bg.k11, i, K11);
    detail::store_jet(bg.k1, i, K1);
    detail::store_jet(bg.f, i, F);
  }
  return bg;
}

/// Blends the background coefficients into elliptic ones near the exit of [L0, 2 L1].
inline BackgroundFlow extend_background(const BackgroundFlow& bg, double k0) {
  require(k0 > 0.0, ErrorKind::validation, "k0 must be positive");
  require(std::abs(bg.grid.x1 - bg.force.L2) <= 1e-12 * bg.force.L2, ErrorKind::validation,
          "extension needs the background sampled up to L2 = 2 L1");
  BackgroundFlow e = bg;
  e.extended = true;
  e.k0 = k0;
  CutoffFamily cut{bg.force.L0, bg.force.L1};
  const std::size_t np = bg.nodes();
  e.a11.resize(3, long(np));
  e.a1.resize(2, long(np));
  e.zeta1.resize(3, long(np));
  e.zeta2.resize(2, long(np));
  for (std::size_t i = 0; i < np; ++i) {
    auto X = Jet<2>::variable(bg.x(i));
    auto z1 = cut.zeta1(X), z2 = cut.zeta2(X);
    Jet<2> K11, K1;
    for (std::size_t k = 0; k <= 2; ++k) {
      double fact = k == 2 ? 2.0 : 1.0;
      K11.c[k] = bg.k11(long(k), long(i)) / fact;
      K1.c[k] = bg.k1(long(k), long(i)) / fact;
    }
    auto A11 = K11 * z1 + (1.0 - z1);
    auto A1 = K1 * z2 - k0 * (1.0 - z2);
    for (std::size_t k = 0; k <= 2; ++k) {
      e.a11(long(k), long(i)) = A11.derivative(k);
      e.zeta1(long(k), long(i)) = z1.derivative(k);
    }
    for (std::size_t k = 0; k <= 1; ++k) {
      e.a1(long(k), long(i)) = A1.derivative(k);
      e.zeta2(long(k), long(i)) = z2.derivative(k);
    }
  }
  return e;
}

struct AdmissibilityReport {
  double damping_margin = 0.0;    ///< kappa*: min over nodes and j of -(2 k1 + (2j-1) k11')
  double multiplier_shift = 0.0;  ///< d0 in d(x) = 6 (x - d0)
  double exit_damping = 0.0;      ///< k0 (extended check only)
  double multiplier_margin = 0.0; ///< min of the multiplier inequality minus 4
  double extended_damping_margin = 0.0;  ///< min of -(2 a1 + (2j-1) a11') - kappa*
  long worst_node = -1;
  int worst_j = -1;
  bool extended = false;
};

namespace detail {

inline double multiplier_lhs(double a1, double a11, double a11p, double x, double d0, int j) {
  double d = 6.0 * (x - d0);
  return (a1 + j * a11p) * d - 0.5 * (a11p * d + 6.0 * a11);
}

inline double ladder_d0(const BackgroundFlow& bg, std::size_t n_end, bool ext, int jmax, double& margin) {
  const double L0 = bg.grid.x0, Lend = bg.x(n_end - 1);
  const double step = (Lend - L0) / 16.0;
  for (int k = 0; k < 64; ++k) {
    double d0 = Lend + step * std::ldexp(1.0, k);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_end; ++i)
      for (int j = 0; j <= jmax; ++j) {
        double a1 = ext ? bg.a1(0, long(i)) : bg.k1(0, long(i));
        double a11 = ext ? bg.a11(0, long(i)) : bg.k11(0, long(i));
        double a11p = ext ? bg.a11(1, long(i)) : bg.k11(1, long(i));
        worst = std::min(worst, multiplier_lhs(a1, a11, a11p, bg.x(i), d0, j));
      }
    if (worst >= 4.0) {
      margin = worst - 4.0;
      return d0;
    }
  }
  throw Error(ErrorKind::admissibility_violation, "no multiplier shift on the ladder satisfies the >= 4 bound");
}

}  // namespace detail

/// Damping constant and multiplier shift on [L0, L1] (nodes with x <= L1), j = 0..3.
inline AdmissibilityReport verify_admissibility(const BackgroundFlow& bg) {
  AdmissibilityReport r;
  const double L1 = bg.force.L1;
  std::size_t n_end = 0;
  while (n_end < bg.nodes() && bg.x(n_end) <= L1 * (1.0 + 1e-12)) ++n_end;
  double kappa = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_end; ++i)
    for (int j = 0; j <= 3; ++j) {
      double v = -(2.0 * bg.k1(0, long(i)) + (2 * j - 1) * bg.k11(1, long(i)));
      if (v < kappa) {
        kappa = v;
        r.worst_node = long(i);
        r.worst_j = j;
      }
    }
  if (!(kappa > 0.0))
    throw Error(ErrorKind::admissibility_violation,
                "damping inequality fails at node " + std::to_string(r.worst_node) + " (x=" +
                    std::to_string(bg.x(std::size_t(r.worst_node))) + ", j=" + std::to_string(r.worst_j) + ")");
  r.damping_margin = kappa;
  r.multiplier_shift = detail::ladder_d0(bg, n_end, false, 3, r.multiplier_margin);
  return r;
}

/// Smallest k0 on a doubling ladder for which the blended coefficients keep the damping bound
/// (j = 0..4) on [L0, L2]; then the multiplier shift for j = 0..3 on the whole interval.
inline AdmissibilityReport verify_extended_admissibility(const BackgroundFlow& bg, BackgroundFlow* extended_out = nullptr) {
  AdmissibilityReport base = verify_admissibility(bg);
  const double kappa = base.damping_margin;
  for (int k = -3; k < 40; ++k) {
    double k0 = std::ldexp(1.0, k);
    BackgroundFlow e = extend_background(bg, k0);
    double worst = std::numeric_limits<double>::infinity();
    long wn = -1;
    int wj = -1;
    for (std::size_t i = 0; i < e.nodes(); ++i)
      for (int j = 0; j <= 4; ++j) {
        double v = -(2.0 * e.a1(0, long(i)) + (2 * j - 1) * e.a11(1, long(i))) - kappa;
        if (v < worst) {
          worst = v;
          wn = long(i);
          wj = j;
        }
      }
    if (worst < 0.0) continue;
    AdmissibilityReport r;
    r.extended = true;
    r.damping_margin = kappa;
    r.exit_damping = k0;
    r.extended_damping_margin = worst;
    r.worst_node = wn;
    r.worst_j = wj;
    r.multiplier_shift = detail::ladder_d0(e, e.nodes(), true, 3, r.multiplier_margin);
    if (extended_out) *extended_out = std::move(e);
    return r;
  }
  throw Error(ErrorKind::admissibility_violation, "no exit damping on the ladder satisfies the extended bound");
}

/// Multiplier inequality minimum for a given shift (used to probe monotonicity in d0).
inline double multiplier_minimum(const BackgroundFlow& bg, double d0, bool ext) {
  std::size_t n_end = bg.nodes();
  if (!ext) {
    n_end = 0;
    while (n_end < bg.nodes() && bg.x(n_end) <= bg.force.L1 * (1.0 + 1e-12)) ++n_end;
  }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_end; ++i)
    for (int j = 0; j <= 3; ++j) {
      double a1 = ext ? bg.a1(0, long(i)) : bg.k1(0, long(i));
      double a11 = ext ? bg.a11(0, long(i)) : bg.k11(0, long(i));
      double a11p = ext ? bg.a11(1, long(i)) : bg.k11(1, long(i));
      worst = std::min(worst, detail::multiplier_lhs(a1, a11, a11p, bg.x(i), d0, j));
    }
  return worst;
}

}  // namespace transonic
