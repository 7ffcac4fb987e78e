#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "transonic/axial.hpp"
#include "transonic/bgflow.hpp"
#include "transonic/cutoff.hpp"
#include "transonic/error.hpp"
#include "transonic/mixed.hpp"
#include "transonic/parallel.hpp"
#include "transonic/xsection.hpp"

namespace transonic {

/// Background, cross-section basis and axial extension shared by the nonlinear solvers.
struct FlowSetup {
  GasConstants gas;
  ExternalForce force;
  AxialGrid grid;  ///< [L0, L2]
  BackgroundFlow bg, ext;
  AdmissibilityReport adm;
  CrossSection cs;
  ScalarEigenBasis basis;
  AxialExtension E;

  std::size_t omega_nodes() const { return E.omega_nodes(); }
  AxialGrid omega() const { return grid.slice(0, E.exit_index()); }
};

/// n_intervals is the axial interval count on [L0, 2 L1].
inline FlowSetup make_flow_setup(const GasConstants& gas, const ExternalForce& force, std::size_t n_intervals,
                                 const CrossSection& cs, std::size_t modes) {
  FlowSetup s;
  s.gas = gas;
  s.force = force;
  s.grid = AxialGrid(force.L0, force.L2, n_intervals);
  s.bg = solve_background(gas, force, s.grid);
  s.adm = verify_extended_admissibility(s.bg, &s.ext);
  s.cs = cs;
  s.basis = neumann_basis(cs, modes);
  s.E = AxialExtension(s.grid, force.L1);
  return s;
}

/// Sum of amplitude * cos(m pi x2 / a) cos(n pi x3 / b) terms on the cross-section.
struct CosineSeries {
  struct Term {
    int m = 0, n = 0;
    double amplitude = 0.0;
  };
  std::vector<Term> terms;

  bool empty() const { return terms.empty(); }
  /// Value or derivative at (x2, x3).
  double eval(const CrossSection& cs, double x2, double x3, Deriv d = Deriv::value) const {
    const double pi = std::numbers::pi;
    const auto o = detail::deriv_orders(d);
    double s = 0.0;
    for (const auto& t : terms)
      s += t.amplitude * detail::trig(true, t.m * pi / cs.a, x2, o[0]) * detail::trig(true, t.n * pi / cs.b, x3, o[1]);
    return s;
  }
};

/// A sin^4(pi x2 / a) sin^4(pi x3 / b) as a cosine series; its gradient and the normal derivative
/// of its gradient vanish on the wall.
inline CosineSeries wall_flat_bump(double A) {
  const std::array<std::pair<int, double>, 3> f{{{0, 3.0 / 8.0}, {2, -0.5}, {4, 1.0 / 8.0}}};
  CosineSeries s;
  for (auto [m, cm] : f)
    for (auto [n, cn] : f) s.terms.push_back({m, n, A * cm * cn});
  return s;
}

/// Force perturbation Phi0 = exp(-((x1 - center) / width)^2) * S(x2, x3).
struct ForcePerturbation {
  CosineSeries shape;
  double center = -0.5, width = 0.5;

  /// Phi0, d1 Phi0, d2 Phi0, d3 Phi0.
  std::array<double, 4> eval(const CrossSection& cs, double x1, double x2, double x3) const {
    if (shape.empty()) return {0.0, 0.0, 0.0, 0.0};
    const double t = (x1 - center) / width, g = std::exp(-t * t), gp = -2.0 * t / width * g;
    const double s = shape.eval(cs, x2, x3);
    return {g * s, gp * s, g * shape.eval(cs, x2, x3, Deriv::d2), g * shape.eval(cs, x2, x3, Deriv::d3)};
  }
};

struct PotentialProblem {
  double epsilon = 1e-3;
  double epsilon_cap = 0.05;
  CosineSeries h0;
  ForcePerturbation phi0;
  double tolerance = 1e-10;
  std::size_t max_iterations = 40;
  SigmaLadder ladder;
  unsigned threads = 1;

  double ball_radius() const { return std::sqrt(epsilon); }
};

/// Checks the entrance datum: gradient and normal derivative of the gradient vanish at wall
/// nodes, and h0 vanishes at the anchor corner x' = 0.
inline double entrance_compatibility(const CosineSeries& h0, const CrossSection& cs) {
  double worst = std::abs(h0.eval(cs, 0.0, 0.0));
  for (std::size_t c : cs.boundary_nodes()) {
    const double x2 = cs.x2(c), x3 = cs.x3(c);
    const auto n = cs.normal(c);
    const double g2 = h0.eval(cs, x2, x3, Deriv::d2), g3 = h0.eval(cs, x2, x3, Deriv::d3);
    const double h22 = h0.eval(cs, x2, x3, Deriv::d22), h23 = h0.eval(cs, x2, x3, Deriv::d23),
                 h33 = h0.eval(cs, x2, x3, Deriv::d33);
    worst = std::max({worst, std::abs(g2), std::abs(g3), std::abs(n[0] * h22 + n[1] * h23),
                      std::abs(n[0] * h23 + n[1] * h33)});
  }
  return worst;
}

/// psi0 = eta0(x1) h0(x') in factored form on the nodes of [L0, L1].
struct BoundaryLift {
  Eigen::MatrixXd eta;  ///< rows: eta0, eta0', eta0''; columns: axial nodes
  Eigen::MatrixXd h;    ///< columns: h0 and its Deriv::d2 .. Deriv::d33 values; rows: cross nodes
  std::size_t support = 0;  ///< axial nodes with nonzero eta0

  double value(std::size_t c, std::size_t i) const { return eta(0, long(i)) * h(long(c), 0); }
  /// d1, d2, d3, d11, d12, d13, d22, d23, d33 of psi0.
  std::array<double, 9> derivatives(std::size_t c, std::size_t i) const {
    const long li = long(i), lc = long(c);
    const double e0 = eta(0, li), e1 = eta(1, li), e2 = eta(2, li);
    return {e1 * h(lc, 0), e0 * h(lc, 1), e0 * h(lc, 2), e2 * h(lc, 0), e1 * h(lc, 1),
            e1 * h(lc, 2), e0 * h(lc, 3), e0 * h(lc, 4), e0 * h(lc, 5)};
  }
};

inline BoundaryLift boundary_lift(const FlowSetup& s, const CosineSeries& h0) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  CutoffFamily cut{s.force.L0, s.force.L1};
  BoundaryLift L;
  L.eta.resize(3, long(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto e = cut.eta0(Jet<2>::variable(s.grid.x(i)));
    for (std::size_t k = 0; k < 3; ++k) L.eta(long(k), long(i)) = e.derivative(k);
    if (e.c[0] != 0.0 || e.c[1] != 0.0 || e.c[2] != 0.0) L.support = i + 1;
  }
  L.h = Eigen::MatrixXd::Zero(long(nc), 6);
  if (!h0.empty())
    for (std::size_t c = 0; c < nc; ++c)
      for (int d = 0; d < kDerivCount; ++d) L.h(long(c), d) = h0.eval(s.cs, s.cs.x2(c), s.cs.x3(c), Deriv(d));
  return L;
}

namespace detail {

/// Background quantities at one axial node.
struct AxialState {
  double gamma, u, up, c2, M2, k1, f, Phi;
};

inline AxialState axial_state(const BackgroundFlow& bg, std::size_t i) {
  const long li = long(i);
  return {bg.gas.gamma, bg.u(0, li), bg.u(1, li), bg.c2(0, li), bg.M2(0, li), bg.k1(0, li), bg.f(0, li), bg.Phi[li]};
}

/// Source of the reduced equation at one point. w is the gradient of psi + eps psi0, phi holds
/// Phi0 and its gradient, l the psi0 derivatives from BoundaryLift.
inline double source_point(const AxialState& a, double eps, const std::array<double, 3>& w,
                           const std::array<double, 4>& phi, const std::array<double, 9>& l) {
  const double g = a.gamma;
  const double f0 =
      -a.up / a.c2 * ((g - 1.0) * eps * phi[0] - 0.5 * (g + 1.0) * w[0] * w[0] - 0.5 * (g - 1.0) * (w[1] * w[1] + w[2] * w[2])) -
      eps / a.c2 * (a.u * phi[1] + phi[1] * w[0] + phi[2] * w[1] + phi[3] * w[2]);
  if (eps == 0.0) return f0;
  const auto k = coefficient_point(g, a.u, a.c2, a.M2, w[0], w[1], w[2], eps * phi[0]);
  const double lift = k[0] * l[3] + k[1] * l[6] + k[2] * l[8] + 2.0 * (k[3] * l[4] + k[4] * l[5] + k[5] * l[7]);
  return f0 - eps * lift - eps * a.k1 * l[0];
}

}  // namespace detail

/// Grid fields of psi + eps psi0 needed by the source and the coefficients.
struct StepFields {
  PerturbationState state;  ///< w = grad(psi + eps psi0), eps Phi0
  Eigen::MatrixXd F;        ///< source on cross nodes x nodes of [L0, L1]
};

/// First axial derivative of mode coefficients given on [L0, L2], restricted to [L0, L1].
inline Eigen::MatrixXd axial_derivative(const FlowSetup& s, const Eigen::MatrixXd& A_ext, int order) {
  return FdOperator(s.grid, order, 4).apply(A_ext).leftCols(long(s.omega_nodes()));
}

/// Assembles the state and the source F at the iterate with coefficients A_ext on [L0, L2].
inline StepFields assemble_step(const FlowSetup& s, const PotentialProblem& p, const BoundaryLift& lift,
                                const Eigen::MatrixXd& A_ext) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  require(A_ext.rows() == long(s.basis.size()) && A_ext.cols() == long(s.grid.nodes()), ErrorKind::dimension,
          "iterate does not match the discretization");
  const double eps = p.epsilon;
  const Eigen::MatrixXd A = A_ext.leftCols(long(n));
  StepFields sf;
  auto& w = sf.state.w;
  w[0] = s.basis.synthesize(axial_derivative(s, A_ext, 1));
  w[1] = s.basis.synthesize(A, Deriv::d2);
  w[2] = s.basis.synthesize(A, Deriv::d3);
  sf.state.eps_phi0 = Eigen::MatrixXd::Zero(long(nc), long(n));
  sf.F.resize(long(nc), long(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = detail::axial_state(s.bg, i);
    const double x1 = s.grid.x(i);
    for (std::size_t c = 0; c < nc; ++c) {
      const long lc = long(c), li = long(i);
      const auto l = lift.derivatives(c, i);
      for (int j = 0; j < 3; ++j) w[j](lc, li) += eps * l[std::size_t(j)];
      const auto phi = p.phi0.eval(s.cs, x1, s.cs.x2(c), s.cs.x3(c));
      sf.state.eps_phi0(lc, li) = eps * phi[0];
      sf.F(lc, li) = detail::source_point(a, eps, {w[0](lc, li), w[1](lc, li), w[2](lc, li)}, phi, l);
    }
  }
  return sf;
}

/// Source F of the reduced equation on the grid of [L0, L1] x cross nodes.
inline Eigen::MatrixXd source_F(const FlowSetup& s, const PotentialProblem& p, const BoundaryLift& lift,
                                const Eigen::MatrixXd& A_ext) {
  return assemble_step(s, p, lift, A_ext).F;
}

/// Max over wall nodes of |(n2 d2 + n3 d3) F(L0, .)|, from one-sided differences of the source
/// evaluated off the grid with step dx.
inline double entrance_source_compatibility(const FlowSetup& s, const PotentialProblem& p, const CosineSeries& h0,
                                            const Eigen::MatrixXd& A_ext, double dx = 1e-5) {
  const Eigen::VectorXd A1 = axial_derivative(s, A_ext, 1).col(0);
  const Eigen::VectorXd A = A_ext.col(0);
  CutoffFamily cut{s.force.L0, s.force.L1};
  const auto e = cut.eta0(Jet<2>::variable(s.force.L0));
  const double e0 = e.derivative(0), e1 = e.derivative(1), e2 = e.derivative(2);
  const auto a = detail::axial_state(s.bg, 0);
  auto F = [&](double x2, double x3) {
    double w1 = 0.0, w2 = 0.0, w3 = 0.0;
    for (std::size_t m = 0; m < s.basis.size(); ++m) {
      w1 += A1[long(m)] * s.basis.eval(m, x2, x3);
      w2 += A[long(m)] * s.basis.eval(m, x2, x3, Deriv::d2);
      w3 += A[long(m)] * s.basis.eval(m, x2, x3, Deriv::d3);
    }
    std::array<double, 6> hv{};
    for (int d = 0; d < kDerivCount; ++d) hv[std::size_t(d)] = h0.eval(s.cs, x2, x3, Deriv(d));
    const std::array<double, 9> l{e1 * hv[0], e0 * hv[1], e0 * hv[2], e2 * hv[0], e1 * hv[1],
                                  e1 * hv[2], e0 * hv[3], e0 * hv[4], e0 * hv[5]};
    const double eps = p.epsilon;
    return detail::source_point(a, eps, {w1 + eps * l[0], w2 + eps * l[1], w3 + eps * l[2]},
                                p.phi0.eval(s.cs, s.force.L0, x2, x3), l);
  };
  double worst = 0.0;
  for (std::size_t c : s.cs.boundary_nodes()) {
    const auto n = s.cs.normal(c);
    const double x2 = s.cs.x2(c), x3 = s.cs.x3(c);
    // inward steps along -n
    auto at = [&](double t) { return F(x2 - t * n[0], x3 - t * n[1]); };
    const double dn = -(-3.0 * at(0.0) + 4.0 * at(dx) - at(2.0 * dx)) / (2.0 * dx);
    worst = std::max(worst, std::abs(dn));
  }
  return worst;
}

/// sqrt of sum over k + l <= order of lambda^l |A^(k)|^2 integrated over [L0, L1]: axial
/// derivatives by differences on [L0, L2], transverse ones spectrally.
inline double sobolev_proxy(const FlowSetup& s, const Eigen::MatrixXd& A_ext, int order) {
  const std::size_t n = s.omega_nodes();
  const Eigen::VectorXd w = s.omega().trapezoid();
  double total = 0.0;
  for (int k = 0; k <= order; ++k) {
    const Eigen::MatrixXd D = k == 0 ? Eigen::MatrixXd(A_ext.leftCols(long(n))) : axial_derivative(s, A_ext, k);
    for (long m = 0; m < D.rows(); ++m) {
      const double lam = s.basis.eigenvalue(std::size_t(m));
      double pw = 0.0, lp = 1.0;
      for (int l = 0; l <= order - k; ++l, lp *= lam) pw += lp;
      total += pw * (D.row(m).array().square().transpose() * w.array()).sum();
    }
  }
  return std::sqrt(total);
}

struct IterationRecord {
  double h1_difference = 0.0;
  double ratio = 0.0;  ///< h1_difference over the previous one (0 for the first step)
  double h4_norm = 0.0;  ///< proxy norm of the new iterate
  double continuation_tolerance = 0.0;
  double linear_relative_residual = 0.0;
};

struct SonicSurface {
  Eigen::VectorXd xi, dxi_dx2, dxi_dx3;  ///< per cross node
  double mach_residual = 0.0;  ///< max |M^2(xi) - 1| on the axial interpolant
  double sup_xi = 0.0;
  double c1_norm = 0.0;  ///< sup |xi| + sup |grad xi|
};

struct PotentialSolution {
  double epsilon = 0.0;
  Eigen::MatrixXd psi;      ///< modes x nodes of [L0, L1]
  Eigen::MatrixXd psi_ext;  ///< modes x nodes of [L0, L2]
  BoundaryLift lift;
  std::vector<IterationRecord> history;
  double ball_radius = 0.0, max_h4 = 0.0;
  double continuation_tolerance = 0.0;

  std::array<Eigen::MatrixXd, 3> velocity;  ///< grad phi, cross nodes x nodes of [L0, L1]
  Eigen::MatrixXd rho, M2;
  double residual_l2 = 0.0, residual_max = 0.0;  ///< full potential equation at interior nodes
  double bernoulli_error = 0.0;
  double wall_residual = 0.0;      ///< max |n . grad phi| on the wall
  double entrance_residual = 0.0;  ///< max of |psi(L0)| and |d_j phi(L0) - eps d_j h0|
  double source_compatibility = 0.0;
  double min_mach_slope = 0.0;  ///< min over grid lines of the M^2 increment per node
  SonicSurface sonic;

  std::size_t iterations() const { return history.size(); }
};

/// Mach number squared, density and velocity of phi = phibar + psi + eps psi0 on [L0, L1].
/// Also fills the Bernoulli, wall and entrance checks.
inline void mach_field(const FlowSetup& s, const PotentialProblem& p, PotentialSolution& sol) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  const double eps = p.epsilon;
  const Eigen::MatrixXd A = sol.psi;
  const Eigen::MatrixXd A1 = axial_derivative(s, sol.psi_ext, 1);
  auto& v = sol.velocity;
  v[0] = s.basis.synthesize(A1);
  v[1] = s.basis.synthesize(A, Deriv::d2);
  v[2] = s.basis.synthesize(A, Deriv::d3);
  sol.rho.resize(long(nc), long(n));
  sol.M2.resize(long(nc), long(n));
  double bern = 0.0, wall = 0.0, entr = sol.psi.col(0).cwiseAbs().maxCoeff();
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = detail::axial_state(s.bg, i);
    for (std::size_t c = 0; c < nc; ++c) {
      const long lc = long(c), li = long(i);
      const auto l = sol.lift.derivatives(c, i);
      v[0](lc, li) += a.u + eps * l[0];
      v[1](lc, li) += eps * l[1];
      v[2](lc, li) += eps * l[2];
      const double q2 = v[0](lc, li) * v[0](lc, li) + v[1](lc, li) * v[1](lc, li) + v[2](lc, li) * v[2](lc, li);
      const double Phi = a.Phi + eps * p.phi0.eval(s.cs, s.grid.x(i), s.cs.x2(c), s.cs.x3(c))[0];
      const double level = s.gas.B0 + Phi - 0.5 * q2;
      if (!(level > 0.0))
        throw Error(ErrorKind::degenerate_coefficient, "density vanishes at axial node " + std::to_string(i));
      const double rho = s.gas.density_from_enthalpy(level);
      sol.rho(lc, li) = rho;
      sol.M2(lc, li) = q2 / s.gas.c2(rho);
      bern = std::max(bern, std::abs(0.5 * q2 + s.gas.enthalpy(rho) - Phi - s.gas.B0));
      if (s.cs.on_boundary(c)) {
        const auto nn = s.cs.normal(c);
        wall = std::max(wall, std::abs(nn[0] * v[1](lc, li) + nn[1] * v[2](lc, li)));
      }
      if (i == 0) {
        entr = std::max(entr, std::abs(v[1](lc, 0) - eps * p.h0.eval(s.cs, s.cs.x2(c), s.cs.x3(c), Deriv::d2)));
        entr = std::max(entr, std::abs(v[2](lc, 0) - eps * p.h0.eval(s.cs, s.cs.x2(c), s.cs.x3(c), Deriv::d3)));
      }
    }
  }
  sol.bernoulli_error = bern;
  sol.wall_residual = wall;
  sol.entrance_residual = entr;
}

/// Residual c^2 lap phi - sum d_i phi d_j phi d_ij phi + grad phi . grad Phi of the full equation
/// at interior axial nodes; returns {discrete L2 over the duct, max}.
inline std::array<double, 2> full_residual(const FlowSetup& s, const PotentialProblem& p,
                                           const PotentialSolution& sol) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  const double eps = p.epsilon;
  const Eigen::MatrixXd A1 = axial_derivative(s, sol.psi_ext, 1), A11 = axial_derivative(s, sol.psi_ext, 2);
  const Eigen::VectorXd wq = s.omega().trapezoid();
  double l2 = 0.0, mx = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const long li = long(i);
    const auto a = detail::axial_state(s.bg, i);
    const Eigen::VectorXd col = sol.psi.col(li), c1 = A1.col(li), c11 = A11.col(li);
    const Eigen::VectorXd h11 = s.basis.synthesize(c11), h12 = s.basis.synthesize(c1, Deriv::d2),
                          h13 = s.basis.synthesize(c1, Deriv::d3), h22 = s.basis.synthesize(col, Deriv::d22),
                          h23 = s.basis.synthesize(col, Deriv::d23), h33 = s.basis.synthesize(col, Deriv::d33);
    for (std::size_t c = 0; c < nc; ++c) {
      const long lc = long(c);
      const auto l = sol.lift.derivatives(c, i);
      const double p1 = sol.velocity[0](lc, li), p2 = sol.velocity[1](lc, li), p3 = sol.velocity[2](lc, li);
      const double f11 = a.up + h11[lc] + eps * l[3], f12 = h12[lc] + eps * l[4], f13 = h13[lc] + eps * l[5];
      const double f22 = h22[lc] + eps * l[6], f23 = h23[lc] + eps * l[7], f33 = h33[lc] + eps * l[8];
      const auto phi = p.phi0.eval(s.cs, s.grid.x(i), s.cs.x2(c), s.cs.x3(c));
      const double c2 = s.gas.c2(sol.rho(lc, li));
      const double r = c2 * (f11 + f22 + f33) -
                       (p1 * p1 * f11 + p2 * p2 * f22 + p3 * p3 * f33 +
                        2.0 * (p1 * p2 * f12 + p1 * p3 * f13 + p2 * p3 * f23)) +
                       p1 * (a.f + eps * phi[1]) + eps * (p2 * phi[2] + p3 * phi[3]);
      l2 += wq[li] * s.cs.weights[lc] * r * r;
      mx = std::max(mx, std::abs(r));
    }
  }
  return {std::sqrt(l2), mx};
}

namespace detail {

/// Cubic through (xs[k], ys[k]), k = 0..3: value and derivative at x.
inline std::array<double, 2> cubic_eval(const std::array<double, 4>& xs, const std::array<double, 4>& ys, double x) {
  std::vector<double> rel(4);
  for (int k = 0; k < 4; ++k) rel[std::size_t(k)] = xs[std::size_t(k)] - x;
  const auto w = fd_weights<double>(0.0, rel, 1);
  double v = 0.0, d = 0.0;
  for (int k = 0; k < 4; ++k) {
    v += w[0][std::size_t(k)] * ys[std::size_t(k)];
    d += w[1][std::size_t(k)] * ys[std::size_t(k)];
  }
  return {v, d};
}

/// Second-order differences along one grid direction with one-sided ends.
inline double grid_slope(const std::vector<double>& x, const std::vector<double>& y, std::size_t i) {
  const std::size_t n = x.size();
  const double h = x[1] - x[0];
  if (i == 0) return (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
  if (i + 1 == n) return (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
  return (y[i + 1] - y[i - 1]) / (2.0 * h);
}

}  // namespace detail

/// Locates M^2 = 1 along every axial grid line: bracket on the nodes, bisection and a Newton
/// polish on the cubic through the four nearest nodes. Requires M^2 strictly increasing in x1.
inline SonicSurface sonic_surface(const FlowSetup& s, const Eigen::MatrixXd& M2, double* min_slope = nullptr) {
  const std::size_t nc = s.cs.nodes(), n = std::size_t(M2.cols());
  require(M2.rows() == long(nc) && n >= 4, ErrorKind::dimension, "Mach field shape mismatch");
  SonicSurface S;
  S.xi.resize(long(nc));
  double slope = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < nc; ++c) {
    const long lc = long(c);
    long k = -1;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double d = M2(lc, long(i + 1)) - M2(lc, long(i));
      slope = std::min(slope, d);
      if (!(d > 0.0))
        throw Error(ErrorKind::degenerate_sonic, "Mach number is not increasing along x1 at cross node " +
                                                     std::to_string(c) + ", axial node " + std::to_string(i));
      if (k < 0 && M2(lc, long(i)) <= 1.0 && M2(lc, long(i + 1)) > 1.0) k = long(i);
    }
    if (k < 0) throw Error(ErrorKind::no_sonic_point, "no sonic crossing at cross node " + std::to_string(c));
    const long s0 = std::clamp<long>(k - 1, 0, long(n) - 4);
    std::array<double, 4> xs, ys;
    for (int q = 0; q < 4; ++q) {
      xs[std::size_t(q)] = s.grid.x(std::size_t(s0 + q));
      ys[std::size_t(q)] = M2(lc, s0 + q) - 1.0;
    }
    double lo = s.grid.x(std::size_t(k)), hi = s.grid.x(std::size_t(k + 1));
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (detail::cubic_eval(xs, ys, mid)[0] > 0.0 ? hi : lo) = mid;
    }
    double x = 0.5 * (lo + hi);
    const auto vd = detail::cubic_eval(xs, ys, x);
    if (vd[1] != 0.0) x -= vd[0] / vd[1];
    S.xi[lc] = x;
    S.mach_residual = std::max(S.mach_residual, std::abs(detail::cubic_eval(xs, ys, x)[0]));
  }
  S.dxi_dx2.resize(long(nc));
  S.dxi_dx3.resize(long(nc));
  const auto& cs = s.cs;
  for (std::size_t j = 0; j < cs.n3; ++j) {
    std::vector<double> y(cs.n2);
    for (std::size_t i = 0; i < cs.n2; ++i) y[i] = S.xi[long(i + cs.n2 * j)];
    for (std::size_t i = 0; i < cs.n2; ++i) S.dxi_dx2[long(i + cs.n2 * j)] = detail::grid_slope(cs.x2s, y, i);
  }
  for (std::size_t i = 0; i < cs.n2; ++i) {
    std::vector<double> y(cs.n3);
    for (std::size_t j = 0; j < cs.n3; ++j) y[j] = S.xi[long(i + cs.n2 * j)];
    for (std::size_t j = 0; j < cs.n3; ++j) S.dxi_dx3[long(i + cs.n2 * j)] = detail::grid_slope(cs.x3s, y, j);
  }
  S.sup_xi = S.xi.cwiseAbs().maxCoeff();
  S.c1_norm = S.sup_xi + std::max(S.dxi_dx2.cwiseAbs().maxCoeff(), S.dxi_dx3.cwiseAbs().maxCoeff());
  if (min_slope) *min_slope = slope;
  return S;
}

/// Sonic surface at eps = 0, where the flow is the background and the surface is x1 = 0 exactly.
/// The Mach checks still run on M2.
inline SonicSurface unperturbed_sonic_surface(const FlowSetup& s, const Eigen::MatrixXd& M2,
                                              double* min_slope = nullptr) {
  SonicSurface S = sonic_surface(s, M2, min_slope);
  S.xi.setZero();
  S.dxi_dx2.setZero();
  S.dxi_dx3.setZero();
  S.sup_xi = S.c1_norm = 0.0;
  return S;
}

/// Iterates psi <- T psi from psi = 0: coefficients and source at psi + eps psi0, then the linear
/// mixed solve. Stops when the H1 difference of successive iterates reaches the tolerance.
inline PotentialSolution fixed_point_solve(const FlowSetup& s, const PotentialProblem& p) {
  require(p.epsilon >= 0.0 && std::isfinite(p.epsilon), ErrorKind::validation, "epsilon must be nonnegative");
  require(p.epsilon <= p.epsilon_cap, ErrorKind::validation, "epsilon exceeds the configured cap");
  require(p.tolerance > 0.0 && p.max_iterations >= 1, ErrorKind::validation, "invalid stopping rule");
  const double compat = entrance_compatibility(p.h0, s.cs);
  require(compat <= 1e-8, ErrorKind::compatibility,
          "entrance datum violates the wall compatibility (residual " + std::to_string(compat) + ")");
  const std::size_t M = s.basis.size(), n = s.omega_nodes();
  PotentialSolution sol;
  sol.epsilon = p.epsilon;
  sol.lift = boundary_lift(s, p.h0);
  sol.ball_radius = p.ball_radius();
  Eigen::MatrixXd A_ext = Eigen::MatrixXd::Zero(long(M), long(s.grid.nodes()));
  auto h1 = [&](const Eigen::MatrixXd& D) { return std::sqrt(detail::axial_h1_squared(D, s.omega(), s.basis)); };
  std::string norms;
  int rising = 0;
  bool converged = false;
  for (std::size_t it = 0; it < p.max_iterations; ++it) {
    StepFields sf = assemble_step(s, p, sol.lift, A_ext);
    if (it == 0) sol.source_compatibility = entrance_source_compatibility(s, p, p.h0, A_ext);
    const bool trivial = p.epsilon == 0.0 && A_ext.cwiseAbs().maxCoeff() == 0.0;
    MixedCoefficients mc = assemble_coefficients(s.bg, s.cs, n, trivial ? PerturbationState{} : sf.state);
    GalerkinSystem gs = build_galerkin(s.ext, mc, s.basis, s.E, p.threads);
    MixedSolution lin = solve_linear_mixed(gs, s.basis, s.E, s.basis.analyze(sf.F), p.ladder);
    IterationRecord rec;
    rec.h1_difference = h1(lin.psi - A_ext.leftCols(long(n)));
    rec.ratio = sol.history.empty() || sol.history.back().h1_difference == 0.0
                    ? 0.0
                    : rec.h1_difference / sol.history.back().h1_difference;
    rec.h4_norm = sobolev_proxy(s, lin.psi_ext, 4);
    rec.continuation_tolerance = lin.continuation_tolerance;
    rec.linear_relative_residual = lin.relative_residual;
    sol.history.push_back(rec);
    sol.max_h4 = std::max(sol.max_h4, rec.h4_norm);
    sol.continuation_tolerance = lin.continuation_tolerance;
    norms += (norms.empty() ? "" : ", ") + std::to_string(rec.h4_norm);
    A_ext = std::move(lin.psi_ext);
    if (rec.h4_norm > sol.ball_radius * (1.0 + 1e-12) + 1e-300)
      throw Error(ErrorKind::divergence, "iterate left the ball of radius " + std::to_string(sol.ball_radius) +
                                             " (H4 proxy norms: " + norms + ")");
    rising = rec.ratio > 1.0 ? rising + 1 : 0;
    if (rising >= 2)
      throw Error(ErrorKind::non_contraction,
                  "contraction ratio above 1 on two consecutive steps (last " + std::to_string(rec.ratio) + ")");
    if (rec.h1_difference <= p.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw Error(ErrorKind::solver_diverged,
                "fixed point did not reach tolerance in " + std::to_string(p.max_iterations) + " iterations");
  sol.psi_ext = A_ext;
  sol.psi = A_ext.leftCols(long(n));
  mach_field(s, p, sol);
  const auto r = full_residual(s, p, sol);
  sol.residual_l2 = r[0];
  sol.residual_max = r[1];
  sol.sonic = p.epsilon == 0.0 ? unperturbed_sonic_surface(s, sol.M2, &sol.min_mach_slope)
                                : sonic_surface(s, sol.M2, &sol.min_mach_slope);
  return sol;
}

}  // namespace transonic
