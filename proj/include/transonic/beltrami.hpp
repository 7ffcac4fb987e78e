#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "transonic/axial.hpp"
#include "transonic/error.hpp"
#include "transonic/mixed.hpp"
#include "transonic/parallel.hpp"
#include "transonic/potential.hpp"
#include "transonic/xsection.hpp"

namespace transonic {

/// Complete trigonometric mode sets of the cross grid, used for the vortical part of the flow.
struct VorticalBases {
  ScalarEigenBasis dirichlet;  ///< q_m, vanishing on the wall
  ScalarEigenBasis neumann;    ///< b_m, zero normal derivative on the wall
  VectorEigenBasis vec;        ///< e_m, zero tangential trace on the wall
  /// d2 e3 - d3 e2 and its transverse derivatives.
  Eigen::MatrixXd curl, curl_d2, curl_d3;

  std::vector<double> dirichlet_eigenvalues() const { return eigenvalues(dirichlet); }
  std::vector<double> neumann_eigenvalues() const { return eigenvalues(neumann); }
  std::vector<double> vector_eigenvalues() const {
    std::vector<double> l(vec.size());
    for (std::size_t k = 0; k < l.size(); ++k) l[k] = vec.eigenvalue(k);
    return l;
  }

 private:
  static std::vector<double> eigenvalues(const ScalarEigenBasis& b) {
    std::vector<double> l(b.size());
    for (std::size_t k = 0; k < l.size(); ++k) l[k] = b.eigenvalue(k);
    return l;
  }
};

/// All modes with 0 <= m <= k2, 0 <= n <= k3; k2 = n2 - 2 and k3 = n3 - 2 when max_index < 0.
inline VorticalBases vortical_bases(const CrossSection& cs, int max_index = -1) {
  const int k2 = max_index < 0 ? int(cs.n2) - 2 : max_index, k3 = max_index < 0 ? int(cs.n3) - 2 : max_index;
  require(k2 >= 1 && k3 >= 1, ErrorKind::validation, "vortical mode index must be positive");
  const double pi = std::numbers::pi;
  std::vector<ModeIndex> dir, neu, vec;
  for (int m = 0; m <= k2; ++m)
    for (int n = 0; n <= k3; ++n) {
      const double l = std::pow(m * pi / cs.a, 2) + std::pow(n * pi / cs.b, 2);
      neu.push_back({m, n, 0, l});
      if (m >= 1 && n >= 1) {
        dir.push_back({m, n, 0, l});
        vec.push_back({m, n, 0, l});
      }
      if (m + n >= 1) vec.push_back({m, n, 1, l});
    }
  VorticalBases vb;
  vb.dirichlet = ScalarEigenBasis(cs, ScalarKind::dirichlet, dir);
  vb.neumann = ScalarEigenBasis(cs, ScalarKind::neumann, neu);
  vb.vec = VectorEigenBasis(cs, vec);
  vb.curl = vb.vec.table(1, Deriv::d2) - vb.vec.table(0, Deriv::d3);
  vb.curl_d2 = vb.vec.table(1, Deriv::d22) - vb.vec.table(0, Deriv::d23);
  vb.curl_d3 = vb.vec.table(1, Deriv::d23) - vb.vec.table(0, Deriv::d33);
  return vb;
}

namespace detail {

/// d2^o2 d3^o3 of a cosine series at (x2, x3).
inline double series_derivative(const CosineSeries& s, const CrossSection& cs, double x2, double x3, int o2, int o3) {
  const double pi = std::numbers::pi;
  double v = 0.0;
  for (const auto& t : s.terms)
    v += t.amplitude * trig(true, t.m * pi / cs.a, x2, o2) * trig(true, t.n * pi / cs.b, x3, o3);
  return v;
}

}  // namespace detail

/// Entrance tangential velocity h = (-d3 s + d2 p, d2 s + d3 p) from a stream series s and a potential
/// series p. Its curl d2 h3 - d3 h2 is the transverse Laplacian of s.
struct TangentialData {
  CosineSeries stream, potential;

  bool empty() const { return stream.empty() && potential.empty(); }

  /// d2^o2 d3^o3 h_i for i = 2 or 3.
  double derivative(const CrossSection& cs, int i, double x2, double x3, int o2 = 0, int o3 = 0) const {
    using detail::series_derivative;
    if (i == 2)
      return -series_derivative(stream, cs, x2, x3, o2, o3 + 1) + series_derivative(potential, cs, x2, x3, o2 + 1, o3);
    return series_derivative(stream, cs, x2, x3, o2 + 1, o3) + series_derivative(potential, cs, x2, x3, o2, o3 + 1);
  }
  double curl(const CrossSection& cs, double x2, double x3) const {
    return derivative(cs, 3, x2, x3, 1, 0) - derivative(cs, 2, x2, x3, 0, 1);
  }
};

/// Max over wall nodes of the wall conditions on h: h_i, n . grad h_i, the curl, and n . grad of d2 h2
/// and d3 h3.
inline double tangential_compatibility(const TangentialData& h, const CrossSection& cs) {
  double worst = 0.0;
  for (std::size_t c : cs.boundary_nodes()) {
    const double x2 = cs.x2(c), x3 = cs.x3(c);
    const auto n = cs.normal(c);
    auto dn = [&](int i, int o2, int o3) {
      return n[0] * h.derivative(cs, i, x2, x3, o2 + 1, o3) + n[1] * h.derivative(cs, i, x2, x3, o2, o3 + 1);
    };
    for (double r : {h.derivative(cs, 2, x2, x3), h.derivative(cs, 3, x2, x3), dn(2, 0, 0), dn(3, 0, 0),
                     h.curl(cs, x2, x3), dn(2, 1, 0), dn(3, 0, 1)})
      worst = std::max(worst, std::abs(r));
  }
  return worst;
}

struct BeltramiProblem {
  double epsilon = 1e-3;
  double epsilon_cap = 0.05;
  TangentialData h;
  ForcePerturbation phi0;
  double tolerance = 1e-10;           ///< successive difference in the weak norm
  std::size_t max_iterations = 40;
  double residual_tolerance = 1e-7;   ///< scale for the residuals of the full system
  double source_tolerance = 1e-8;     ///< divergence and end-circle checks on curl sources
  double antiderivative_tolerance = 1e-2;  ///< relative to max |(g2, g3)|
  double transport_tolerance = 1e-8;  ///< allowed excursion of a characteristic past the wall
  std::size_t rk_stride = 16;         ///< axial nodes per RK4 step of the characteristic tracer
  SigmaLadder ladder;
  unsigned threads = 1;

  double ball_radius() const { return std::sqrt(epsilon); }
};

/// Last axial node with x1 <= L0 / 3.
inline std::size_t subsonic_last_node(const FlowSetup& s) {
  const AxialGrid g = s.omega();
  const double xs = s.force.L0 / 3.0;
  std::size_t last = 0;
  while (last + 1 < g.nodes() && g.x(last + 1) <= xs + 1e-12) ++last;
  return last;
}

namespace detail {

/// Density from the Bernoulli relation at velocity (u1, u2, u3) and potential Phi; throws if the
/// enthalpy level is not positive.
inline double bernoulli_density(const GasConstants& gas, double Phi, double u1, double u2, double u3) {
  const double level = gas.B0 + Phi - 0.5 * (u1 * u1 + u2 * u2 + u3 * u3);
  if (!(level > 0.0)) throw Error(ErrorKind::degenerate_coefficient, "density vanishes");
  return gas.density_from_enthalpy(level);
}

/// Lagrange weights of the cubic through nodes 0..3 at t (in units of the spacing).
inline std::array<double, 4> cubic_weights(double t) {
  return {-(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0, t * (t - 2.0) * (t - 3.0) / 2.0,
          -t * (t - 1.0) * (t - 3.0) / 2.0, t * (t - 1.0) * (t - 2.0) / 6.0};
}

/// First stencil node and weights of the four-point interpolant at x on a uniform grid.
inline std::pair<std::size_t, std::array<double, 4>> cubic_stencil(const std::vector<double>& xs, double x) {
  const std::size_t n = xs.size();
  const double h = xs[1] - xs[0];
  const long cell = long(std::floor((x - xs[0]) / h));
  const std::size_t s0 = std::size_t(std::clamp<long>(cell - 1, 0, long(n) - 4));
  return {s0, cubic_weights((x - xs[s0]) / h)};
}

/// Bicubic interpolation of a cross-grid field at (x2, x3).
inline double bicubic(const CrossSection& cs, const double* f, double x2, double x3) {
  const auto [i0, w2] = cubic_stencil(cs.x2s, x2);
  const auto [j0, w3] = cubic_stencil(cs.x3s, x3);
  double v = 0.0;
  for (std::size_t b = 0; b < 4; ++b) {
    double row = 0.0;
    for (std::size_t a = 0; a < 4; ++a) row += w2[a] * f[(i0 + a) + cs.n2 * (j0 + b)];
    v += w3[b] * row;
  }
  return v;
}

/// Fourth-order difference along x2 (dir 0) or x3 (dir 1) at cross node c, one-sided near the wall.
inline double cross_slope(const CrossSection& cs, const double* f, std::size_t c, int dir) {
  const std::size_t i = c % cs.n2, j = c / cs.n2;
  const std::size_t n = dir == 0 ? cs.n2 : cs.n3, k = dir == 0 ? i : j;
  const double h = dir == 0 ? cs.x2s[1] - cs.x2s[0] : cs.x3s[1] - cs.x3s[0];
  const std::size_t s0 = std::size_t(std::clamp<long>(long(k) - 2, 0, long(n) - 5));
  std::vector<double> rel(5);
  for (std::size_t q = 0; q < 5; ++q) rel[q] = double(long(s0 + q) - long(k));
  const auto w = fd_weights<double>(0.0, rel, 1);
  double d = 0.0;
  for (std::size_t q = 0; q < 5; ++q) {
    const std::size_t node = dir == 0 ? (s0 + q) + cs.n2 * j : i + cs.n2 * (s0 + q);
    d += w[1][q] * f[node];
  }
  return d / h;
}

/// First derivative at the first (end = false) or last node from five one-sided samples.
inline double end_slope(const std::array<double, 5>& y, double h, bool end) {
  static const std::array<double, 5> w{-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25};
  double d = 0.0;
  for (std::size_t q = 0; q < 5; ++q) d += w[q] * y[q];
  return (end ? -d : d) / h;
}

}  // namespace detail

/// Velocity perturbation v and its gradient on cross nodes x axial nodes of [L0, L1].
struct VelocityGrid {
  std::array<Eigen::MatrixXd, 3> v;
  std::array<std::array<Eigen::MatrixXd, 3>, 3> d;  ///< d[i][j] = partial_i v_j
  bool has_gradient = false;

  void add(const VelocityGrid& o) {
    for (int j = 0; j < 3; ++j) v[j] += o.v[j];
    if (has_gradient && o.has_gradient)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) d[i][j] += o.d[i][j];
  }
  double divergence(long c, long i) const { return d[0][0](c, i) + d[1][1](c, i) + d[2][2](c, i); }
  std::array<double, 3> curl(long c, long i) const {
    return {d[1][2](c, i) - d[2][1](c, i), d[2][0](c, i) - d[0][2](c, i), d[0][1](c, i) - d[1][0](c, i)};
  }
};

/// curl u for u = (sum p_m q_m, sum c_m e_m); axial derivatives by fourth-order differences.
inline VelocityGrid curl_velocity(const FlowSetup& s, const VorticalBases& vb, const Eigen::MatrixXd& p,
                                  const Eigen::MatrixXd& c, bool gradient) {
  const AxialGrid g = s.omega();
  FdOperator D1(g, 1, 4);
  const Eigen::MatrixXd p1 = D1.apply(p), c1 = D1.apply(c);
  const auto& Q = vb.dirichlet;
  const auto& E2 = vb.vec.table(0);
  const auto& E3 = vb.vec.table(1);
  VelocityGrid r;
  r.v[0] = vb.curl * c;
  r.v[1] = Q.synthesize(p, Deriv::d3) - E3 * c1;
  r.v[2] = E2 * c1 - Q.synthesize(p, Deriv::d2);
  if (!gradient) return r;
  r.has_gradient = true;
  const Eigen::MatrixXd c2 = FdOperator(g, 2, 4).apply(c);
  r.d[0][0] = vb.curl * c1;
  r.d[1][0] = vb.curl_d2 * c;
  r.d[2][0] = vb.curl_d3 * c;
  r.d[0][1] = Q.synthesize(p1, Deriv::d3) - E3 * c2;
  r.d[1][1] = Q.synthesize(p, Deriv::d23) - vb.vec.table(1, Deriv::d2) * c1;
  r.d[2][1] = Q.synthesize(p, Deriv::d33) - vb.vec.table(1, Deriv::d3) * c1;
  r.d[0][2] = E2 * c2 - Q.synthesize(p1, Deriv::d2);
  r.d[1][2] = vb.vec.table(0, Deriv::d2) * c1 - Q.synthesize(p, Deriv::d22);
  r.d[2][2] = vb.vec.table(0, Deriv::d3) * c1 - Q.synthesize(p, Deriv::d23);
  return r;
}

/// grad chi for chi = sum a_m b_m with a, a' and a'' given on the nodes of [L0, L1].
inline VelocityGrid gradient_velocity(const ScalarEigenBasis& b, const Eigen::MatrixXd& a, const Eigen::MatrixXd& a1,
                                      const Eigen::MatrixXd& a2, bool gradient) {
  VelocityGrid r;
  r.v[0] = b.synthesize(a1);
  r.v[1] = b.synthesize(a, Deriv::d2);
  r.v[2] = b.synthesize(a, Deriv::d3);
  if (!gradient) return r;
  r.has_gradient = true;
  r.d[0][0] = b.synthesize(a2);
  r.d[0][1] = r.d[1][0] = b.synthesize(a1, Deriv::d2);
  r.d[0][2] = r.d[2][0] = b.synthesize(a1, Deriv::d3);
  r.d[1][1] = b.synthesize(a, Deriv::d22);
  r.d[1][2] = r.d[2][1] = b.synthesize(a, Deriv::d23);
  r.d[2][2] = b.synthesize(a, Deriv::d33);
  return r;
}

/// Bounded harmonic axial profile with s(L0) = r and s'(L1) = 0 for eigenvalue lambda; order-th
/// derivative at x. Constant r for lambda = 0.
inline double harmonic_mode(double lambda, double r, double L0, double L1, double x, int order = 0) {
  if (lambda <= 0.0) return order == 0 ? r : 0.0;
  const double k = std::sqrt(lambda);
  const double a = std::exp(-k * (x - L0)), b = std::exp(k * (x + L0 - 2.0 * L1));
  const double sa = (order % 2) ? -1.0 : 1.0;
  return r / (1.0 + std::exp(2.0 * k * (L0 - L1))) * std::pow(k, order) * (sa * a + b);
}

/// Velocity perturbation as v = curl u + grad phi + grad psi: u = (sum p q, sum c e), phi harmonic
/// on the Neumann modes of VorticalBases with closed-form axial derivatives, psi on the Galerkin modes.
struct VelocityField {
  Eigen::MatrixXd p, c;
  std::array<Eigen::MatrixXd, 3> phi;  ///< phi and its first two axial derivatives
  Eigen::MatrixXd psi_ext;             ///< Galerkin modes x nodes of [L0, L2]
};

inline VelocityField zero_velocity(const FlowSetup& s, const VorticalBases& vb) {
  const long n = long(s.omega_nodes());
  VelocityField f;
  f.p = Eigen::MatrixXd::Zero(long(vb.dirichlet.size()), n);
  f.c = Eigen::MatrixXd::Zero(long(vb.vec.size()), n);
  for (auto& a : f.phi) a = Eigen::MatrixXd::Zero(long(vb.neumann.size()), n);
  f.psi_ext = Eigen::MatrixXd::Zero(long(s.basis.size()), long(s.grid.nodes()));
  return f;
}

inline VelocityGrid evaluate_velocity(const FlowSetup& s, const VorticalBases& vb, const VelocityField& f,
                                      bool gradient) {
  VelocityGrid r = curl_velocity(s, vb, f.p, f.c, gradient);
  r.add(gradient_velocity(vb.neumann, f.phi[0], f.phi[1], f.phi[2], gradient));
  const long n = long(s.omega_nodes());
  r.add(gradient_velocity(s.basis, f.psi_ext.leftCols(n), axial_derivative(s, f.psi_ext, 1),
                          axial_derivative(s, f.psi_ext, 2), gradient));
  return r;
}

namespace detail {

/// Order-d derivative on the uniform grid x, fourth-order accurate, one-sided near the ends.
inline Eigen::MatrixXd derivative_matrix(const std::vector<double>& x, int d) {
  const std::size_t n = x.size();
  const double h = x[1] - x[0];
  const std::size_t wc = std::size_t(2 * ((d + 1) / 2) + 3), ws = std::size_t(d + 4);
  require(n >= ws, ErrorKind::dimension, "grid too coarse for the derivative order");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(long(n), long(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t half = wc / 2;
    std::size_t start, width;
    if (i >= half && i + half < n) {
      start = i - half;
      width = wc;
    } else {
      width = ws;
      start = i < half ? 0 : n - width;
    }
    std::vector<double> rel(width);
    for (std::size_t k = 0; k < width; ++k) rel[k] = double(long(start + k) - long(i));
    const auto w = fd_weights<double>(0.0, rel, d);
    for (std::size_t k = 0; k < width; ++k) D(long(i), long(start + k)) = w[std::size_t(d)][k] * std::pow(h, -d);
  }
  return D;
}

}  // namespace detail

/// sqrt of the sum over |alpha| <= order of |d^alpha v_j|^2 integrated over axial nodes [0, last],
/// all derivatives by fourth-order differences on the grid.
inline double grid_sobolev(const FlowSetup& s, const std::array<Eigen::MatrixXd, 3>& v, int order, std::size_t last) {
  const auto& cs = s.cs;
  const AxialGrid g = s.omega();
  const Eigen::VectorXd wa = g.slice(0, last).trapezoid();
  const long n = long(last + 1), n2 = long(cs.n2), n3 = long(cs.n3);
  std::vector<Eigen::MatrixXd> D2(std::size_t(order + 1)), D3(std::size_t(order + 1));
  for (int d = 0; d <= order; ++d) {
    D2[std::size_t(d)] = d == 0 ? Eigen::MatrixXd::Identity(n2, n2) : detail::derivative_matrix(cs.x2s, d);
    D3[std::size_t(d)] = d == 0 ? Eigen::MatrixXd::Identity(n3, n3) : detail::derivative_matrix(cs.x3s, d);
  }
  double total = 0.0;
  for (const auto& comp : v)
    for (int a2 = 0; a2 <= order; ++a2)
      for (int a3 = 0; a2 + a3 <= order; ++a3) {
        Eigen::MatrixXd T(comp.rows(), comp.cols());
        for (long i = 0; i < comp.cols(); ++i) {
          Eigen::Map<const Eigen::MatrixXd> f(comp.col(i).data(), n2, n3);
          Eigen::Map<Eigen::MatrixXd> t(T.col(i).data(), n2, n3);
          t.noalias() = D2[std::size_t(a2)] * f * D3[std::size_t(a3)].transpose();
        }
        for (int a1 = 0; a1 + a2 + a3 <= order; ++a1) {
          const Eigen::MatrixXd U = a1 == 0 ? T : FdOperator(g, a1, 4).apply(T);
          for (long i = 0; i < n; ++i) total += wa[i] * (cs.weights.array() * U.col(i).array().square()).sum();
        }
      }
  return std::sqrt(total);
}

/// Norm proxy of v: H^order on [L0, L1] plus H^(order + 1) on [L0, L0 / 3].
inline double velocity_norm(const FlowSetup& s, const std::array<Eigen::MatrixXd, 3>& v, int order) {
  return grid_sobolev(s, v, order, s.omega_nodes() - 1) + grid_sobolev(s, v, order + 1, subsonic_last_node(s));
}

inline VelocityField difference(const VelocityField& a, const VelocityField& b) {
  VelocityField d;
  d.p = a.p - b.p;
  d.c = a.c - b.c;
  for (int k = 0; k < 3; ++k) d.phi[k] = a.phi[k] - b.phi[k];
  d.psi_ext = a.psi_ext - b.psi_ext;
  return d;
}

/// Entrance value of kappa: eps curl h / (rho (ubar + v1)) with the density of the iterate.
inline Eigen::VectorXd kappa_boundary(const FlowSetup& s, const BeltramiProblem& p,
                                      const std::array<Eigen::VectorXd, 3>& v_entrance) {
  const std::size_t nc = s.cs.nodes();
  const auto a = detail::axial_state(s.bg, 0);
  Eigen::VectorXd k = Eigen::VectorXd::Zero(long(nc));
  for (std::size_t c = 0; c < nc; ++c) {
    const long lc = long(c);
    const double x2 = s.cs.x2(c), x3 = s.cs.x3(c);
    const double u1 = a.u + v_entrance[0][lc];
    if (!(u1 > 0.0)) throw Error(ErrorKind::stagnation, "axial speed vanishes at the entrance");
    const double Phi = a.Phi + p.epsilon * p.phi0.eval(s.cs, s.force.L0, x2, x3)[0];
    const double rho = detail::bernoulli_density(s.gas, Phi, u1, v_entrance[1][lc], v_entrance[2][lc]);
    k[lc] = p.epsilon * p.h.curl(s.cs, x2, x3) / (rho * u1);
  }
  return k;
}

struct TransportDiagnostics {
  double wall_excursion = 0.0;  ///< largest distance of a traced point outside the cross section
  double min_axial_speed = 0.0;
};

/// Solves d1 kappa + (v2 d2 + v3 d3) kappa / (ubar + v1) = 0 by tracing each node back to L0 along
/// dx'/dx1 = (v2, v3) / (ubar + v1) with RK4 (stride axial nodes per step, bicubic velocity) and
/// interpolating kappa0 bicubically at the foot.
inline Eigen::MatrixXd solve_transport(const FlowSetup& s, const std::array<Eigen::MatrixXd, 3>& v,
                                       const Eigen::VectorXd& kappa0, std::size_t stride = 16,
                                       double tolerance = 1e-8, unsigned threads = 1,
                                       TransportDiagnostics* diag = nullptr) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  require(v[0].rows() == long(nc) && v[0].cols() == long(n) && kappa0.size() == long(nc), ErrorKind::dimension,
          "transport fields do not match the grid");
  require(stride >= 1, ErrorKind::validation, "tracer stride must be positive");
  Eigen::MatrixXd V2 = Eigen::MatrixXd::Zero(long(nc), long(n)), V3 = Eigen::MatrixXd::Zero(long(nc), long(n));
  double umin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double ub = s.bg.u(0, long(i));
    for (std::size_t c = 0; c < nc; ++c) {
      const double u1 = ub + v[0](long(c), long(i));
      umin = std::min(umin, u1);
      if (!(u1 > 0.0))
        throw Error(ErrorKind::stagnation, "axial speed vanishes at axial node " + std::to_string(i));
      V2(long(c), long(i)) = v[1](long(c), long(i)) / u1;
      V3(long(c), long(i)) = v[2](long(c), long(i)) / u1;
    }
  }
  const double h = s.grid.h(), a = s.cs.a, b = s.cs.b;
  auto velocity = [&](double t, double x2, double x3) -> std::array<double, 2> {
    const long it = std::lround(t);
    if (std::abs(t - double(it)) < 1e-12) {
      const long o = it * long(nc);
      return {detail::bicubic(s.cs, V2.data() + o, x2, x3), detail::bicubic(s.cs, V3.data() + o, x2, x3)};
    }
    const long s0 = std::clamp<long>(long(std::floor(t)) - 1, 0, long(n) - 4);
    const auto w = detail::cubic_weights(t - double(s0));
    std::array<double, 2> r{0.0, 0.0};
    for (long q = 0; q < 4; ++q) {
      const long o = (s0 + q) * long(nc);
      r[0] += w[std::size_t(q)] * detail::bicubic(s.cs, V2.data() + o, x2, x3);
      r[1] += w[std::size_t(q)] * detail::bicubic(s.cs, V3.data() + o, x2, x3);
    }
    return r;
  };
  Eigen::MatrixXd kappa = Eigen::MatrixXd::Zero(long(nc), long(n));
  std::vector<double> excursion(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t c = 0; c < nc; ++c) {
      double x2 = s.cs.x2(c), x3 = s.cs.x3(c);
      double t = double(i);
      while (t > 0.5) {
        const double K = std::min(double(stride), t), dx = K * h;
        const auto k1 = velocity(t, x2, x3);
        const auto k2 = velocity(t - 0.5 * K, x2 - 0.5 * dx * k1[0], x3 - 0.5 * dx * k1[1]);
        const auto k3 = velocity(t - 0.5 * K, x2 - 0.5 * dx * k2[0], x3 - 0.5 * dx * k2[1]);
        const auto k4 = velocity(t - K, x2 - dx * k3[0], x3 - dx * k3[1]);
        x2 -= dx / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        x3 -= dx / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        t -= K;
        const double out = std::max({-x2, x2 - a, -x3, x3 - b, 0.0});
        excursion[i] = std::max(excursion[i], out);
        if (out > tolerance)
          throw Error(ErrorKind::geometry_violation,
                      "characteristic from axial node " + std::to_string(i) + " leaves the cross section");
        x2 = std::clamp(x2, 0.0, a);
        x3 = std::clamp(x3, 0.0, b);
      }
      kappa(long(c), long(i)) = detail::bicubic(s.cs, kappa0.data(), x2, x3);
    }
  });
  if (diag) {
    diag->wall_excursion = *std::max_element(excursion.begin(), excursion.end());
    diag->min_axial_speed = umin;
  }
  return kappa;
}

/// g = kappa rho (ubar + v1, v2, v3) with rho from the Bernoulli relation at the iterate.
inline std::array<Eigen::MatrixXd, 3> curl_flux(const FlowSetup& s, const BeltramiProblem& p,
                                                const Eigen::MatrixXd& kappa, const std::array<Eigen::MatrixXd, 3>& v) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  std::array<Eigen::MatrixXd, 3> g;
  for (auto& x : g) x.resize(long(nc), long(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = detail::axial_state(s.bg, i);
    for (std::size_t c = 0; c < nc; ++c) {
      const long lc = long(c), li = long(i);
      const double u1 = a.u + v[0](lc, li);
      const double Phi = a.Phi + p.epsilon * p.phi0.eval(s.cs, s.grid.x(i), s.cs.x2(c), s.cs.x3(c))[0];
      const double rho = detail::bernoulli_density(s.gas, Phi, u1, v[1](lc, li), v[2](lc, li));
      const double k = kappa(lc, li) * rho;
      g[0](lc, li) = k * u1;
      g[1](lc, li) = k * v[1](lc, li);
      g[2](lc, li) = k * v[2](lc, li);
    }
  }
  return g;
}

/// Dirichlet-mode loads of div g in weak form: d1 (g1, q_m) - (g2, d2 q_m) - (g3, d3 q_m).
inline Eigen::MatrixXd divergence_loads(const FlowSetup& s, const VorticalBases& vb,
                                        const std::array<Eigen::MatrixXd, 3>& g) {
  const auto& Q = vb.dirichlet;
  const auto& W = s.cs.weights;
  return FdOperator(s.omega(), 1, 4).apply(Q.analyze(g[0])) -
         Q.table(Deriv::d2).transpose() * (W.asDiagonal() * g[1]) -
         Q.table(Deriv::d3).transpose() * (W.asDiagonal() * g[2]);
}

/// Max over wall nodes of the end slices of |d1 div g|, with div g from pointwise differences.
inline double end_circle_divergence_slope(const FlowSetup& s, const std::array<Eigen::MatrixXd, 3>& g) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  const double h = s.grid.h();
  const FdOperator D1(s.omega(), 1, 4);
  double worst = 0.0;
  for (bool end : {false, true}) {
    std::array<Eigen::VectorXd, 5> div;
    for (std::size_t q = 0; q < 5; ++q) {
      const std::size_t i = end ? n - 1 - q : q;
      const Stencil& st = D1.at(i);
      Eigen::VectorXd d = Eigen::VectorXd::Zero(long(nc));
      d.setZero();
      for (std::size_t k = 0; k < st.w.size(); ++k) d += st.w[k] * g[0].col(long(st.start + k));
      for (std::size_t c : s.cs.boundary_nodes())
        d[long(c)] += detail::cross_slope(s.cs, g[1].col(long(i)).data(), c, 0) +
                      detail::cross_slope(s.cs, g[2].col(long(i)).data(), c, 1);
      div[q] = d;
    }
    for (std::size_t c : s.cs.boundary_nodes()) {
      std::array<double, 5> y;
      for (std::size_t q = 0; q < 5; ++q) y[q] = div[q][long(c)];
      worst = std::max(worst, std::abs(detail::end_slope(y, h, end)));
    }
  }
  return worst;
}

struct PiSolution {
  Eigen::MatrixXd coef;   ///< Dirichlet modes x nodes of [L0, L1]
  Eigen::MatrixXd load;   ///< mode loads of the right-hand side
  double compatibility = 0.0;
};

/// Solves Pi'' - alpha_m Pi = load per Dirichlet mode with zero flux at both ends.
inline Eigen::MatrixXd solve_pi_modes(const FlowSetup& s, const VorticalBases& vb, const Eigen::MatrixXd& load,
                                      unsigned threads = 1) {
  return mode_bvp_solve_all(s.omega(), vb.dirichlet_eigenvalues(), load, ModeBc::neumann_neumann, threads);
}

/// Lap Pi = div g in the duct, d1 Pi = 0 at both ends, Pi = 0 on the wall.
inline PiSolution solve_pi(const FlowSetup& s, const VorticalBases& vb, const std::array<Eigen::MatrixXd, 3>& g,
                           double tolerance = 1e-8, unsigned threads = 1) {
  PiSolution r;
  r.compatibility = end_circle_divergence_slope(s, g);
  require(r.compatibility <= tolerance, ErrorKind::compatibility,
          "curl flux divergence has a nonzero axial slope on the end circles (" +
              std::to_string(r.compatibility) + ")");
  r.load = divergence_loads(s, vb, g);
  r.coef = solve_pi_modes(s, vb, r.load, threads);
  return r;
}

/// Grid fields of grad Pi.
inline std::array<Eigen::MatrixXd, 3> pi_gradient(const FlowSetup& s, const VorticalBases& vb,
                                                  const Eigen::MatrixXd& pi) {
  const auto& Q = vb.dirichlet;
  return {Q.synthesize(FdOperator(s.omega(), 1, 4).apply(pi)), Q.synthesize(pi, Deriv::d2),
          Q.synthesize(pi, Deriv::d3)};
}

struct VectorPotential {
  Eigen::MatrixXd p;  ///< u1 on the Dirichlet modes, zero flux at the ends
  Eigen::MatrixXd c;  ///< (u2, u3) on the vector modes, zero at the ends
  double divergence = 0.0;     ///< max |div f| tested against the Dirichlet modes
  double compatibility = 0.0;  ///< max of |d1 f1| and |n2 f3 - n3 f2| on the end circles
};

/// Lap u = -f with u x n = 0 on the wall; for divergence-free f, v = curl u solves curl v = f, div v = 0.
inline VectorPotential vector_potential(const FlowSetup& s, const VorticalBases& vb,
                                        const std::array<Eigen::MatrixXd, 3>& f, double tolerance = 1e-8,
                                        unsigned threads = 1) {
  const std::size_t n = s.omega_nodes();
  require(f[0].cols() == long(n) && f[0].rows() == long(s.cs.nodes()), ErrorKind::dimension,
          "curl source does not match the grid");
  VectorPotential u;
  u.divergence = divergence_loads(s, vb, f).cwiseAbs().maxCoeff();
  const FdOperator D1(s.omega(), 1, 4);
  for (std::size_t i : {std::size_t(0), n - 1}) {
    const Stencil& st = D1.at(i);
    for (std::size_t c : s.cs.boundary_nodes()) {
      double d = 0.0;
      for (std::size_t k = 0; k < st.w.size(); ++k) d += st.w[k] * f[0](long(c), long(st.start + k));
      const auto nn = s.cs.normal(c);
      const double t = nn[0] * f[2](long(c), long(i)) - nn[1] * f[1](long(c), long(i));
      u.compatibility = std::max({u.compatibility, std::abs(d), std::abs(t)});
    }
  }
  if (u.divergence > tolerance)
    throw Error(ErrorKind::invalid_source, "curl source is not divergence free (" + std::to_string(u.divergence) + ")");
  if (u.compatibility > tolerance)
    throw Error(ErrorKind::invalid_source,
                "curl source violates the end-circle conditions (" + std::to_string(u.compatibility) + ")");
  u.p = mode_bvp_solve_all(s.omega(), vb.dirichlet_eigenvalues(), -vb.dirichlet.analyze(f[0]),
                           ModeBc::neumann_neumann, threads);
  u.c = mode_bvp_solve_all(s.omega(), vb.vector_eigenvalues(), -vb.vec.analyze(f[1], f[2]),
                           ModeBc::dirichlet_dirichlet, threads);
  return u;
}

struct DivCurlSolution {
  VectorPotential u;
  Eigen::VectorXd stream;              ///< h on the Neumann modes, zero mean
  std::array<Eigen::MatrixXd, 3> phi;  ///< harmonic part and its first two axial derivatives
  double gradient_mismatch = 0.0;      ///< max |grad h - ((g2, g3) - (curl u)'(L0))|
};

/// div v = 0, curl v = f, v . n = 0 on the wall, v' = (g2, g3) at L0 and v1 = 0 at L1:
/// v = curl u + grad phi with phi harmonic, phi(L0) = h where grad h = g - (curl u)'(L0).
inline DivCurlSolution solve_divcurl(const FlowSetup& s, const VorticalBases& vb,
                                     const std::array<Eigen::MatrixXd, 3>& f, const Eigen::VectorXd& g2,
                                     const Eigen::VectorXd& g3, double source_tolerance = 1e-8,
                                     double tolerance = 1e-2, unsigned threads = 1) {
  DivCurlSolution r;
  r.u = vector_potential(s, vb, f, source_tolerance, threads);
  const std::size_t n = s.omega_nodes();
  const auto& Q = vb.dirichlet;
  const Eigen::VectorXd p0 = r.u.p.col(0);
  const Eigen::VectorXd c1 = FdOperator(s.omega(), 1, 4).apply(r.u.c).col(0);
  const Eigen::VectorXd G2 = g2 - (Q.table(Deriv::d3) * p0 - vb.vec.table(1) * c1);
  const Eigen::VectorXd G3 = g3 - (vb.vec.table(0) * c1 - Q.table(Deriv::d2) * p0);
  const auto& B = vb.neumann;
  const auto& W = s.cs.weights;
  const Eigen::VectorXd proj = B.table(Deriv::d2).transpose() * (W.asDiagonal() * G2) +
                               B.table(Deriv::d3).transpose() * (W.asDiagonal() * G3);
  r.stream = Eigen::VectorXd::Zero(long(B.size()));
  for (std::size_t k = 0; k < B.size(); ++k)
    if (B.eigenvalue(k) > 0.0) r.stream[long(k)] = proj[long(k)] / B.eigenvalue(k);
  r.gradient_mismatch = std::max((B.table(Deriv::d2) * r.stream - G2).cwiseAbs().maxCoeff(),
                                 (B.table(Deriv::d3) * r.stream - G3).cwiseAbs().maxCoeff());
  const double scale = std::max(g2.cwiseAbs().maxCoeff(), g3.cwiseAbs().maxCoeff());
  if (r.gradient_mismatch > tolerance * scale + 1e-14)
    throw Error(ErrorKind::data_inconsistency, "entrance data minus the vortical trace is not a gradient (mismatch " +
                                                   std::to_string(r.gradient_mismatch) + ")");
  const AxialGrid g = s.omega();
  for (int d = 0; d < 3; ++d) {
    r.phi[std::size_t(d)].resize(long(B.size()), long(n));
    for (std::size_t k = 0; k < B.size(); ++k)
      for (std::size_t i = 0; i < n; ++i)
        r.phi[std::size_t(d)](long(k), long(i)) =
            harmonic_mode(B.eigenvalue(k), r.stream[long(k)], g.x0, g.x1, g.x(i), d);
  }
  return r;
}

struct BeltramiIteration {
  double difference = 0.0;  ///< weak-norm proxy of the update
  double ratio = 0.0;
  double strong_norm = 0.0;
  double pi_max = 0.0;
  double continuation_tolerance = 0.0;
  double slip = 0.0, wall_neumann = 0.0, entrance = 0.0;  ///< membership checks of the new iterate
};

struct BeltramiState {
  double epsilon = 0.0;
  VelocityField field;
  VelocityGrid perturbation;                ///< v with gradient
  std::array<Eigen::MatrixXd, 3> velocity;  ///< u = (ubar + v1, v2, v3)
  std::array<Eigen::MatrixXd, 3> vorticity;
  Eigen::MatrixXd kappa, Pi, rho, M2;
  std::vector<BeltramiIteration> history;
  double ball_radius = 0.0, max_strong = 0.0;
  double residual_tolerance = 0.0;
  double continuation_tolerance = 0.0;

  double continuity_l2 = 0.0, continuity_max = 0.0;  ///< div(rho u)
  double curl_l2 = 0.0, curl_max = 0.0;              ///< curl u - kappa rho u
  double transport_l2 = 0.0, transport_max = 0.0;    ///< u . grad kappa
  double divergence_curl = 0.0;                      ///< max |div curl u| of the vortical part
  double bernoulli_error = 0.0;
  double slip = 0.0, wall_neumann = 0.0, entrance_residual = 0.0;
  double kappa_wall = 0.0, kappa_interior = 0.0, pi_wall = 0.0, pi_end_flux = 0.0, pi_max = 0.0;
  double vorticity_max = 0.0;
  double source_compatibility = 0.0, min_mach_slope = 0.0;
  TransportDiagnostics transport;
  SonicSurface sonic;

  std::size_t iterations() const { return history.size(); }
};

namespace detail {

/// Membership checks of v in the solution class: wall slip, n . grad v1 on the wall, entrance trace.
inline std::array<double, 3> membership(const FlowSetup& s, const BeltramiProblem& p, const VelocityGrid& v) {
  double slip = 0.0, neu = 0.0, entr = 0.0;
  const long n = v.v[0].cols();
  for (std::size_t c : s.cs.boundary_nodes()) {
    const auto nn = s.cs.normal(c);
    const long lc = long(c);
    for (long i = 0; i < n; ++i) {
      slip = std::max(slip, std::abs(nn[0] * v.v[1](lc, i) + nn[1] * v.v[2](lc, i)));
      neu = std::max(neu, std::abs(nn[0] * v.d[1][0](lc, i) + nn[1] * v.d[2][0](lc, i)));
    }
  }
  for (std::size_t c = 0; c < s.cs.nodes(); ++c) {
    const double x2 = s.cs.x2(c), x3 = s.cs.x3(c);
    entr = std::max(entr, std::abs(v.v[1](long(c), 0) - p.epsilon * p.h.derivative(s.cs, 2, x2, x3)));
    entr = std::max(entr, std::abs(v.v[2](long(c), 0) - p.epsilon * p.h.derivative(s.cs, 3, x2, x3)));
  }
  return {slip, neu, entr};
}

/// Discrete L2 over the duct and max of a field at interior axial nodes.
inline std::array<double, 2> interior_norms(const FlowSetup& s, const Eigen::MatrixXd& r) {
  const Eigen::VectorXd wq = s.omega().trapezoid();
  double l2 = 0.0, mx = 0.0;
  for (long i = 1; i + 1 < r.cols(); ++i)
    for (long c = 0; c < r.rows(); ++c) {
      l2 += wq[i] * s.cs.weights[c] * r(c, i) * r(c, i);
      mx = std::max(mx, std::abs(r(c, i)));
    }
  return {std::sqrt(l2), mx};
}

}  // namespace detail

/// Vortical steps of one iteration at the iterate v: kappa, Pi, the div-curl part and the load of the
/// potential correction.
struct BeltramiStep {
  Eigen::VectorXd kappa0;
  Eigen::MatrixXd kappa;
  PiSolution pi;
  DivCurlSolution divcurl;
  TransportDiagnostics transport;
};

inline BeltramiStep beltrami_vortical_step(const FlowSetup& s, const VorticalBases& vb, const BeltramiProblem& p,
                                           const VelocityGrid& vhat) {
  BeltramiStep st;
  st.kappa0 = kappa_boundary(s, p, {vhat.v[0].col(0), vhat.v[1].col(0), vhat.v[2].col(0)});
  st.kappa = solve_transport(s, vhat.v, st.kappa0, p.rk_stride, p.transport_tolerance, p.threads, &st.transport);
  auto g = curl_flux(s, p, st.kappa, vhat.v);
  st.pi = solve_pi(s, vb, g, p.source_tolerance, p.threads);
  const auto gp = pi_gradient(s, vb, st.pi.coef);
  for (int j = 0; j < 3; ++j) g[j] -= gp[j];
  const std::size_t nc = s.cs.nodes();
  Eigen::VectorXd h2 = Eigen::VectorXd::Zero(long(nc)), h3 = Eigen::VectorXd::Zero(long(nc));
  for (std::size_t c = 0; c < nc; ++c) {
    h2[long(c)] = p.epsilon * p.h.derivative(s.cs, 2, s.cs.x2(c), s.cs.x3(c));
    h3[long(c)] = p.epsilon * p.h.derivative(s.cs, 3, s.cs.x2(c), s.cs.x3(c));
  }
  st.divcurl = solve_divcurl(s, vb, g, h2, h3, p.source_tolerance, p.antiderivative_tolerance, p.threads);
  return st;
}

/// Load of the potential correction: F(v^) - sum k_ij(v^) d_i w_j - k1 w1 for w = v-dot.
inline Eigen::MatrixXd correction_load(const FlowSetup& s, const BeltramiProblem& p, const VelocityGrid& vhat,
                                       const VelocityGrid& w, PerturbationState* state = nullptr) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  const double eps = p.epsilon;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(long(nc), long(n));
  Eigen::MatrixXd ephi = Eigen::MatrixXd::Zero(long(nc), long(n));
  const std::array<double, 9> none{};
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = detail::axial_state(s.bg, i);
    for (std::size_t c = 0; c < nc; ++c) {
      const long lc = long(c), li = long(i);
      const auto phi = p.phi0.eval(s.cs, s.grid.x(i), s.cs.x2(c), s.cs.x3(c));
      ephi(lc, li) = eps * phi[0];
      const std::array<double, 3> vv{vhat.v[0](lc, li), vhat.v[1](lc, li), vhat.v[2](lc, li)};
      const auto k = detail::coefficient_point(a.gamma, a.u, a.c2, a.M2, vv[0], vv[1], vv[2], eps * phi[0]);
      const auto& d = w.d;
      const double kw = k[0] * d[0][0](lc, li) + k[1] * d[1][1](lc, li) + k[2] * d[2][2](lc, li) +
                        k[3] * (d[0][1](lc, li) + d[1][0](lc, li)) + k[4] * (d[0][2](lc, li) + d[2][0](lc, li)) +
                        k[5] * (d[1][2](lc, li) + d[2][1](lc, li));
      F(lc, li) = detail::source_point(a, eps, vv, phi, none) - kw - a.k1 * w.v[0](lc, li);
    }
  }
  if (state) {
    state->w = vhat.v;
    state->eps_phi0 = ephi;
  }
  return F;
}

/// Final fields and residuals of the full system at the converged iterate.
inline void beltrami_diagnostics(const FlowSetup& s, const VorticalBases& vb, const BeltramiProblem& p,
                                 BeltramiState& st) {
  const std::size_t n = s.omega_nodes(), nc = s.cs.nodes();
  const double eps = p.epsilon;
  st.perturbation = evaluate_velocity(s, vb, st.field, true);
  const VelocityGrid& v = st.perturbation;
  const BeltramiStep step = beltrami_vortical_step(s, vb, p, v);
  st.kappa = step.kappa;
  st.transport = step.transport;
  st.source_compatibility = step.pi.compatibility;
  st.Pi = vb.dirichlet.synthesize(step.pi.coef);
  st.pi_max = st.Pi.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd pi1 = FdOperator(s.omega(), 1, 4).apply(step.pi.coef);
  st.pi_end_flux = std::max(vb.dirichlet.synthesize(Eigen::VectorXd(pi1.col(0))).cwiseAbs().maxCoeff(),
                            vb.dirichlet.synthesize(Eigen::VectorXd(pi1.col(long(n) - 1))).cwiseAbs().maxCoeff());
  const VelocityGrid vt = curl_velocity(s, vb, st.field.p, st.field.c, true);
  st.divergence_curl = 0.0;
  for (long i = 0; i < long(n); ++i)
    for (long c = 0; c < long(nc); ++c) st.divergence_curl = std::max(st.divergence_curl, std::abs(vt.divergence(c, i)));

  const Eigen::MatrixXd k1 = FdOperator(s.omega(), 1, 4).apply(st.kappa);
  const Eigen::MatrixXd kc = vb.neumann.analyze(st.kappa);
  const Eigen::MatrixXd k2 = vb.neumann.synthesize(kc, Deriv::d2), k3 = vb.neumann.synthesize(kc, Deriv::d3);
  Eigen::MatrixXd cont = Eigen::MatrixXd::Zero(long(nc), long(n));
  Eigen::MatrixXd curl = cont, tran = cont;
  for (auto& x : st.velocity) x.resize(long(nc), long(n));
  for (auto& x : st.vorticity) x.resize(long(nc), long(n));
  st.rho.resize(long(nc), long(n));
  st.M2.resize(long(nc), long(n));
  double bern = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = detail::axial_state(s.bg, i);
    for (std::size_t c = 0; c < nc; ++c) {
      const long lc = long(c), li = long(i);
      const auto phi = p.phi0.eval(s.cs, s.grid.x(i), s.cs.x2(c), s.cs.x3(c));
      const double Phi = a.Phi + eps * phi[0];
      const std::array<double, 3> u{a.u + v.v[0](lc, li), v.v[1](lc, li), v.v[2](lc, li)};
      const std::array<double, 3> dPhi{a.f + eps * phi[1], eps * phi[2], eps * phi[3]};
      const double rho = detail::bernoulli_density(s.gas, Phi, u[0], u[1], u[2]);
      const double c2 = s.gas.c2(rho), q2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
      for (int j = 0; j < 3; ++j) st.velocity[j](lc, li) = u[std::size_t(j)];
      st.rho(lc, li) = rho;
      st.M2(lc, li) = q2 / c2;
      bern = std::max(bern, std::abs(0.5 * q2 + s.gas.enthalpy(rho) - Phi - s.gas.B0));
      double div = v.divergence(lc, li) + a.up, quad = 0.0, work = 0.0;
      for (int ii = 0; ii < 3; ++ii) {
        work += u[std::size_t(ii)] * dPhi[std::size_t(ii)];
        for (int j = 0; j < 3; ++j) {
          const double dij = v.d[ii][j](lc, li) + (ii == 0 && j == 0 ? a.up : 0.0);
          quad += u[std::size_t(ii)] * u[std::size_t(j)] * dij;
        }
      }
      cont(lc, li) = rho / c2 * (c2 * div - quad + work);
      const auto w = v.curl(lc, li);
      double r2 = 0.0;
      for (int j = 0; j < 3; ++j) {
        st.vorticity[j](lc, li) = w[std::size_t(j)];
        const double r = w[std::size_t(j)] - st.kappa(lc, li) * rho * u[std::size_t(j)];
        r2 += r * r;
      }
      curl(lc, li) = std::sqrt(r2);
      tran(lc, li) = u[0] * k1(lc, li) + u[1] * k2(lc, li) + u[2] * k3(lc, li);
    }
  }
  st.bernoulli_error = bern;
  const auto rc = detail::interior_norms(s, cont), rw = detail::interior_norms(s, curl),
             rt = detail::interior_norms(s, tran);
  st.continuity_l2 = rc[0];
  st.continuity_max = rc[1];
  st.curl_l2 = rw[0];
  st.curl_max = rw[1];
  st.transport_l2 = rt[0];
  st.transport_max = rt[1];
  const auto m = detail::membership(s, p, v);
  st.slip = m[0];
  st.wall_neumann = m[1];
  st.entrance_residual = m[2];
  st.kappa_wall = st.pi_wall = 0.0;
  for (std::size_t c : s.cs.boundary_nodes()) {
    st.kappa_wall = std::max(st.kappa_wall, std::max(st.kappa.row(long(c)).cwiseAbs().maxCoeff(),
                                                     k1.row(long(c)).cwiseAbs().maxCoeff()));
    st.pi_wall = std::max(st.pi_wall, st.Pi.row(long(c)).cwiseAbs().maxCoeff());
  }
  st.kappa_interior = st.kappa.cwiseAbs().maxCoeff();
  st.vorticity_max = 0.0;
  for (const auto& w : st.vorticity) st.vorticity_max = std::max(st.vorticity_max, w.cwiseAbs().maxCoeff());
  st.sonic = eps == 0.0 ? unperturbed_sonic_surface(s, st.M2, &st.min_mach_slope)
                        : sonic_surface(s, st.M2, &st.min_mach_slope);
}

/// Iterates kappa transport, Pi, the div-curl split and the mixed potential correction from v = 0;
/// stops when the weak-norm proxy of the update reaches the tolerance.
inline BeltramiState beltrami_fixed_point(const FlowSetup& s, const VorticalBases& vb, const BeltramiProblem& p) {
  require(p.epsilon >= 0.0 && std::isfinite(p.epsilon), ErrorKind::validation, "epsilon must be nonnegative");
  require(p.epsilon <= p.epsilon_cap, ErrorKind::validation, "epsilon exceeds the configured cap");
  require(p.tolerance > 0.0 && p.max_iterations >= 1 && p.residual_tolerance > 0.0, ErrorKind::validation,
          "invalid stopping rule");
  const double compat = tangential_compatibility(p.h, s.cs);
  require(compat <= 1e-8, ErrorKind::compatibility,
          "entrance tangential data violate the wall conditions (residual " + std::to_string(compat) + ")");
  const std::size_t n = s.omega_nodes();
  BeltramiState st;
  st.epsilon = p.epsilon;
  st.ball_radius = p.ball_radius();
  st.residual_tolerance = p.residual_tolerance;
  VelocityField vf = zero_velocity(s, vb);
  VelocityGrid vhat = evaluate_velocity(s, vb, vf, false);
  std::string norms;
  int rising = 0;
  bool converged = false;
  for (std::size_t it = 0; it < p.max_iterations; ++it) {
    const BeltramiStep step = beltrami_vortical_step(s, vb, p, vhat);
    VelocityField next;
    next.p = step.divcurl.u.p;
    next.c = step.divcurl.u.c;
    next.phi = step.divcurl.phi;
    VelocityGrid vdot = curl_velocity(s, vb, next.p, next.c, true);
    vdot.add(gradient_velocity(vb.neumann, next.phi[0], next.phi[1], next.phi[2], true));
    PerturbationState state;
    const Eigen::MatrixXd F = correction_load(s, p, vhat, vdot, &state);
    const bool trivial = p.epsilon == 0.0 && it == 0;
    MixedCoefficients mc = assemble_coefficients(s.bg, s.cs, n, trivial ? PerturbationState{} : state);
    GalerkinSystem gs = build_galerkin(s.ext, mc, s.basis, s.E, p.threads);
    MixedSolution lin = solve_linear_mixed(gs, s.basis, s.E, s.basis.analyze(F), p.ladder);
    next.psi_ext = std::move(lin.psi_ext);

    BeltramiIteration rec;
    rec.difference = velocity_norm(s, evaluate_velocity(s, vb, difference(next, vf), false).v, 2);
    rec.ratio = st.history.empty() || st.history.back().difference == 0.0
                    ? 0.0
                    : rec.difference / st.history.back().difference;
    VelocityGrid vnew = evaluate_velocity(s, vb, next, true);
    rec.strong_norm = velocity_norm(s, vnew.v, 3);
    rec.pi_max = step.pi.coef.cwiseAbs().maxCoeff();
    rec.continuation_tolerance = lin.continuation_tolerance;
    vf = std::move(next);
    const auto m = detail::membership(s, p, vnew);
    rec.slip = m[0];
    rec.wall_neumann = m[1];
    rec.entrance = m[2];
    st.history.push_back(rec);
    st.max_strong = std::max(st.max_strong, rec.strong_norm);
    st.continuation_tolerance = lin.continuation_tolerance;
    norms += (norms.empty() ? "" : ", ") + std::to_string(rec.strong_norm);
    if (rec.strong_norm > st.ball_radius * (1.0 + 1e-12) + 1e-300)
      throw Error(ErrorKind::divergence, "iterate left the ball of radius " + std::to_string(st.ball_radius) +
                                             " (strong norms: " + norms + ")");
    for (long i = 0; i < vnew.v[0].cols(); ++i)
      if ((vnew.v[0].col(i).array() + s.bg.u(0, i)).minCoeff() <= 0.0)
        throw Error(ErrorKind::stagnation, "axial speed of the iterate vanishes at axial node " + std::to_string(i));
    rising = rec.ratio > 1.0 ? rising + 1 : 0;
    if (rising >= 2)
      throw Error(ErrorKind::non_contraction,
                  "contraction ratio above 1 on two consecutive steps (last " + std::to_string(rec.ratio) + ")");
    vhat = std::move(vnew);
    if (rec.difference <= p.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw Error(ErrorKind::solver_diverged,
                "fixed point did not reach tolerance in " + std::to_string(p.max_iterations) + " iterations");
  st.field = std::move(vf);
  beltrami_diagnostics(s, vb, p, st);
  return st;
}

}  // namespace transonic
