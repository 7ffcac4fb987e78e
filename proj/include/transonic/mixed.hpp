#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "transonic/axial.hpp"
#include "transonic/banded.hpp"
#include "transonic/bgflow.hpp"
#include "transonic/error.hpp"
#include "transonic/parallel.hpp"
#include "transonic/xsection.hpp"

namespace transonic {

struct Rational {
  std::int64_t p = 0, q = 1;

  Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1) : p(num), q(den) { normalize(); }
  void normalize() {
    if (q < 0) p = -p, q = -q;
    std::int64_t g = std::gcd(p < 0 ? -p : p, q);
    if (g > 1) p /= g, q /= g;
  }
  double value() const { return double(p) / double(q); }
  friend Rational operator+(Rational a, Rational b) { return {a.p * b.q + b.p * a.q, a.q * b.q}; }
  friend Rational operator-(Rational a, Rational b) { return {a.p * b.q - b.p * a.q, a.q * b.q}; }
  friend Rational operator*(Rational a, Rational b) { return {a.p * b.p, a.q * b.q}; }
  friend Rational operator/(Rational a, Rational b) { return {a.p * b.q, a.q * b.p}; }
  friend bool operator==(Rational a, Rational b) { return a.p == b.p && a.q == b.q; }
};

/// Weights c_j with sum_j (-1/j)^k c_j = 1 for k = 0..3, solved in exact arithmetic.
inline std::array<Rational, 4> extension_coefficients_exact() {
  std::array<std::array<Rational, 5>, 4> m;
  for (int k = 0; k < 4; ++k) {
    for (int j = 1; j <= 4; ++j) {
      Rational t(1);
      for (int e = 0; e < k; ++e) t = t * Rational(-1, j);
      m[k][j - 1] = t;
    }
    m[k][4] = Rational(1);
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    while (m[piv][col].p == 0) ++piv;
    std::swap(m[piv], m[col]);
    for (int r = 0; r < 4; ++r) {
      if (r == col || m[r][col].p == 0) continue;
      Rational f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] = m[r][c] - f * m[col][c];
    }
  }
  std::array<Rational, 4> c;
  for (int j = 0; j < 4; ++j) c[j] = m[j][4] / m[j][j];
  return c;
}

inline std::array<double, 4> extension_coefficients() {
  auto e = extension_coefficients_exact();
  return {e[0].value(), e[1].value(), e[2].value(), e[3].value()};
}

/// Reflection extension of a function given on (-inf, L1] past L1.
template <class F>
auto extend_function(F f, double L1) {
  return [f, L1](auto x) -> decltype(f(x)) {
    if (x <= L1) return f(x);
    static const auto c = extension_coefficients();
    decltype(f(x)) s = c[0] * f(L1 + (L1 - x));
    for (int j = 2; j <= 4; ++j) s += c[j - 1] * f(L1 + (L1 - x) / double(j));
    return s;
  };
}

/// Reflection extension for grid data on [L0, L1] onto the grid of [L0, L2].
/// Reflected points off the grid are evaluated by 8-point Lagrange interpolation.
class AxialExtension {
 public:
  AxialExtension() = default;
  AxialExtension(const AxialGrid& g2, double L1) : grid_(g2) {
    long i1 = g2.find(L1);
    require(i1 >= 7, ErrorKind::grid_incompatibility, "L1 must be a grid node with at least 8 nodes before it");
    i1_ = std::size_t(i1);
    const auto c = extension_coefficients();
    rows_.resize(g2.nodes() - i1_ - 1);
    for (std::size_t k = i1_ + 1; k < g2.nodes(); ++k) {
      auto& row = rows_[k - i1_ - 1];
      const double t = double(k - i1_);
      for (int j = 1; j <= 4; ++j) {
        double r = double(i1_) - t / double(j);
        require(r >= -1e-9, ErrorKind::grid_incompatibility, "reflected point falls before L0");
        long ri = std::lround(r);
        if (std::abs(r - double(ri)) < 1e-9) {
          row.emplace_back(std::size_t(ri), c[j - 1]);
          continue;
        }
        long s = std::clamp<long>(long(std::floor(r)) - 3, 0, long(i1_) - 7);
        std::vector<double> xs(8);
        for (int q = 0; q < 8; ++q) xs[q] = double(s + q) - r;
        auto w = fd_weights<double>(0.0, xs, 0)[0];
        for (int q = 0; q < 8; ++q) row.emplace_back(std::size_t(s + q), c[j - 1] * w[q]);
      }
    }
  }

  std::size_t exit_index() const { return i1_; }
  std::size_t omega_nodes() const { return i1_ + 1; }
  const AxialGrid& grid() const { return grid_; }
  static double bound() {
    double s = 0.0;
    for (double v : extension_coefficients()) s += std::abs(v);
    return std::max(1.0, s);
  }

  /// Columns are axial nodes of [L0, L1]; result has the columns of [L0, L2].
  Eigen::MatrixXd apply(const Eigen::MatrixXd& f) const {
    require(std::size_t(f.cols()) == omega_nodes(), ErrorKind::dimension, "field is not sampled on [L0, L1]");
    Eigen::MatrixXd r(f.rows(), long(grid_.nodes()));
    r.leftCols(long(omega_nodes())) = f;
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      auto col = r.col(long(omega_nodes() + k));
      col.setZero();
      for (const auto& [idx, w] : rows_[k]) col += w * f.col(long(idx));
    }
    return r;
  }

 private:
  AxialGrid grid_;
  std::size_t i1_ = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
};

/// Velocity perturbation w = (w1, w2, w3) sampled on the cross grid (rows) at axial nodes (columns),
/// and optional force perturbation eps * Phi0 on the same layout.
struct PerturbationState {
  std::array<Eigen::MatrixXd, 3> w;
  Eigen::MatrixXd eps_phi0;
  bool empty() const { return w[0].size() == 0 && eps_phi0.size() == 0; }
};

struct MixedCoefficients {
  std::size_t axial_nodes = 0;
  bool background_only = true;
  Eigen::MatrixXd k11, k22, k33, k12, k13, k23;  ///< cross nodes x axial nodes
  Eigen::VectorXd k1;                            ///< lower-order coefficient along the axis
  Eigen::VectorXd k11_bar;
  double ellipticity_margin = 0.5;  ///< min eigenvalue of the transverse block minus 1/2
  double wall_residual = 0.0;       ///< max |n2 k12 + n3 k13| on the wall
  double k11_deviation = 0.0;       ///< max |k11 - background k11|
};

namespace detail {

/// k11, k22, k33, k12, k13, k23 at one point for background (u, c2, M2), velocity perturbation w
/// and force perturbation ph = eps Phi0.
inline std::array<double, 6> coefficient_point(double g, double u, double c2, double M2, double w1, double w2,
                                               double w3, double ph) {
  const double ww = w1 * w1 + w2 * w2 + w3 * w3;
  const double iso = 1.0 + (g - 1.0) / c2 * (ph - u * w1 - 0.5 * ww);
  return {1.0 - M2 + ((g - 1.0) * ph - (g + 1.0) * u * w1 - w1 * w1 - 0.5 * (g - 1.0) * ww) / c2,
          iso - w2 * w2 / c2,
          iso - w3 * w3 / c2,
          -(u + w1) * w2 / c2,
          -(u + w1) * w3 / c2,
          -w2 * w3 / c2};
}

}  // namespace detail

/// Coefficients of the linearized potential operator at a perturbation state on the first
/// `n_axial` nodes of bg. An empty state gives the background operator.
inline MixedCoefficients assemble_coefficients(const BackgroundFlow& bg, const CrossSection& cs, std::size_t n_axial,
                                               const PerturbationState& st = {},
                                               double max_state = std::numeric_limits<double>::infinity()) {
  require(n_axial <= bg.nodes(), ErrorKind::dimension, "more axial nodes than the background provides");
  MixedCoefficients mc;
  mc.axial_nodes = n_axial;
  mc.k1 = bg.k1.row(0).head(long(n_axial)).transpose();
  mc.k11_bar = bg.k11.row(0).head(long(n_axial)).transpose();
  const long nc = long(cs.nodes()), na = long(n_axial);
  const bool has_w = st.w[0].size() != 0, has_phi = st.eps_phi0.size() != 0;
  for (int i = 0; i < 3 && has_w; ++i)
    require(st.w[i].rows() == nc && st.w[i].cols() == na, ErrorKind::dimension, "state field has the wrong shape");
  if (has_phi)
    require(st.eps_phi0.rows() == nc && st.eps_phi0.cols() == na, ErrorKind::dimension,
            "force perturbation has the wrong shape");
  mc.background_only = !has_w && !has_phi;
  if (has_w) {
    double sup = 0.0;
    for (int i = 0; i < 3; ++i) sup = std::max(sup, st.w[i].cwiseAbs().maxCoeff());
    require(sup <= max_state, ErrorKind::state_too_large, "perturbation state exceeds the admissible sup-norm");
  }
  const double g = bg.gas.gamma;
  for (auto* t : {&mc.k11, &mc.k22, &mc.k33, &mc.k12, &mc.k13, &mc.k23}) t->resize(nc, na);
  double lam_min = std::numeric_limits<double>::infinity(), wall = 0.0, dev = 0.0;
  for (long i = 0; i < na; ++i) {
    const double u = bg.u(0, i), c2 = bg.c2(0, i), M2 = bg.M2(0, i);
    for (long c = 0; c < nc; ++c) {
      double w1 = has_w ? st.w[0](c, i) : 0.0, w2 = has_w ? st.w[1](c, i) : 0.0, w3 = has_w ? st.w[2](c, i) : 0.0;
      double ph = has_phi ? st.eps_phi0(c, i) : 0.0;
      const auto [k11, k22, k33, k12, k13, k23] = detail::coefficient_point(g, u, c2, M2, w1, w2, w3, ph);
      mc.k11(c, i) = k11;
      mc.k22(c, i) = k22;
      mc.k33(c, i) = k33;
      mc.k12(c, i) = k12;
      mc.k13(c, i) = k13;
      mc.k23(c, i) = k23;
      double half = 0.5 * (k22 - k33);
      lam_min = std::min(lam_min, 0.5 * (k22 + k33) - std::sqrt(half * half + k23 * k23));
      dev = std::max(dev, std::abs(k11 - (1.0 - M2)));
      if (cs.on_boundary(std::size_t(c))) {
        auto n = cs.normal(std::size_t(c));
        wall = std::max(wall, std::abs(n[0] * k12 + n[1] * k13));
      }
    }
  }
  mc.ellipticity_margin = lam_min - 0.5;
  mc.wall_residual = wall;
  mc.k11_deviation = dev;
  require(mc.ellipticity_margin >= 0.0, ErrorKind::state_too_large,
          "transverse coefficient block lost half-ellipticity (min eigenvalue " + std::to_string(lam_min) + ")");
  return mc;
}

/// Mode-coupled coefficient matrices of the regularized operator on [L0, L2].
/// Column p of a, b, c holds the M x M matrix at node p in column-major order.
struct GalerkinSystem {
  std::size_t M = 0;
  AxialGrid grid;
  Eigen::MatrixXd a, b, c;
  Eigen::VectorXd a11_bar;

  Eigen::Map<const Eigen::MatrixXd> at(const Eigen::MatrixXd& t, std::size_t p) const {
    return Eigen::Map<const Eigen::MatrixXd>(t.col(long(p)).data(), long(M), long(M));
  }
};

/// Projects the coefficients on the Neumann basis, extends them past L1 and adds the blended background.
inline GalerkinSystem build_galerkin(const BackgroundFlow& ext, const MixedCoefficients& mc,
                                     const ScalarEigenBasis& basis, const AxialExtension& E, unsigned threads = 1) {
  require(ext.extended, ErrorKind::validation, "Galerkin system needs the extended background");
  require(basis.kind() == ScalarKind::neumann, ErrorKind::validation, "Galerkin system uses the Neumann basis");
  require(mc.axial_nodes == E.omega_nodes(), ErrorKind::dimension, "coefficients do not cover [L0, L1]");
  require(ext.nodes() == E.grid().nodes(), ErrorKind::dimension, "extension grid differs from background grid");
  const std::size_t M = basis.size(), n2 = ext.nodes(), n1 = E.omega_nodes();
  const long MM = long(M * M);
  GalerkinSystem gs;
  gs.M = M;
  gs.grid = ext.grid;
  gs.a11_bar = ext.a11.row(0).transpose();
  gs.a = Eigen::MatrixXd::Zero(MM, long(n2));
  gs.b = Eigen::MatrixXd::Zero(MM, long(n2));
  gs.c = Eigen::MatrixXd::Zero(MM, long(n2));
  if (!mc.background_only) {
    Eigen::MatrixXd pa(MM, long(n1)), pb(MM, long(n1)), pc(MM, long(n1));
    const auto& B = basis.table();
    const auto& W = basis.section().weights;
    parallel_for(n1, threads, [&](std::size_t i) {
      const long li = long(i);
      auto proj = [&](const Eigen::VectorXd& k, Deriv d) -> Eigen::MatrixXd {
        return B.transpose() * (W.cwiseProduct(k)).asDiagonal() * basis.table(d);
      };
      Eigen::VectorXd dk11 = mc.k11.col(li).array() - mc.k11_bar[li];
      Eigen::MatrixXd A = proj(dk11, Deriv::value);
      Eigen::MatrixXd Bm = 2.0 * (proj(mc.k12.col(li), Deriv::d2) + proj(mc.k13.col(li), Deriv::d3));
      Eigen::VectorXd dk22 = mc.k22.col(li).array() - 1.0, dk33 = mc.k33.col(li).array() - 1.0;
      Eigen::MatrixXd C = proj(dk22, Deriv::d22) + 2.0 * proj(mc.k23.col(li), Deriv::d23) + proj(dk33, Deriv::d33);
      pa.col(li) = Eigen::Map<Eigen::VectorXd>(A.data(), MM);
      pb.col(li) = Eigen::Map<Eigen::VectorXd>(Bm.data(), MM);
      pc.col(li) = Eigen::Map<Eigen::VectorXd>(C.data(), MM);
    });
    gs.a = E.apply(pa);
    gs.b = E.apply(pb);
    gs.c = E.apply(pc);
  }
  for (std::size_t p = 0; p < n2; ++p)
    for (std::size_t m = 0; m < M; ++m) {
      long d = long(m * M + m);
      gs.a(d, long(p)) += ext.a11(0, long(p));
      gs.b(d, long(p)) += ext.a1(0, long(p));
      gs.c(d, long(p)) -= basis.eigenvalue(m);
    }
  return gs;
}

namespace detail {

/// Weight making the two-point scheme sigma (B1 - B0) / h + a (t B0 + (1 - t) B1) = 0 exact for
/// B = exp(-a x / sigma); q = a h / sigma.
inline double fitted_weight(double q) {
  if (std::abs(q) < 1e-4) return 0.5 - q / 12.0;
  if (q > 700.0) return 1.0 / q;
  if (q < -700.0) return 1.0 + 1.0 / q;
  return 1.0 / q - 1.0 / std::expm1(q);
}

}  // namespace detail

/// Solves sigma A''' + a A'' + b A' + c A = G on [L0, L2] with A(L0) = A''(L0) = 0 and A'(L2) = 0.
/// Box scheme on half cells: the third-order term is the difference of centered second
/// differences at the cell ends, and the remaining terms are averaged between the ends with an
/// exponentially fitted weight from the background a11. Second order where the regularization
/// layer is resolved and free of parasitic modes where it is not, including at the sonic point.
inline Eigen::MatrixXd galerkin_solve(const GalerkinSystem& gs, const Eigen::MatrixXd& G, double sigma) {
  require(sigma > 0.0, ErrorKind::validation, "regularization parameter must be positive");
  const std::size_t M = gs.M, n2 = gs.grid.nodes();
  require(G.rows() == long(M) && G.cols() == long(n2), ErrorKind::dimension, "load does not match Galerkin system");
  const std::size_t n = (n2 + 1) * M;
  const double h = gs.grid.h();
  BandedMatrix A(n, 3 * M, 3 * M);
  std::vector<double> rhs(n, 0.0);
  auto idx = [M](long node, std::size_t mode) { return std::size_t(node + 1) * M + mode; };
  const long e = long(n2) - 1;
  for (std::size_t m = 0; m < M; ++m) {
    A.add(idx(-1, m), idx(-1, m), 1.0);
    A.add(idx(-1, m), idx(0, m), -2.0);
    A.add(idx(-1, m), idx(1, m), 1.0);
    A.add(idx(0, m), idx(0, m), 1.0);
    A.add(idx(e, m), idx(e, m), 1.5);
    A.add(idx(e, m), idx(e - 1, m), -2.0);
    A.add(idx(e, m), idx(e - 2, m), 0.5);
  }
  const double s = sigma / h;
  for (long k = 0; k + 2 < long(n2); ++k) {
    const double abar = 0.5 * (gs.a11_bar[k] + gs.a11_bar[k + 1]);
    const double t = detail::fitted_weight(abar * h / sigma);
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t row = idx(k + 1, m);
      A.add(row, idx(k - 1, m), -s);
      A.add(row, idx(k, m), 3.0 * s);
      A.add(row, idx(k + 1, m), -3.0 * s);
      A.add(row, idx(k + 2, m), s);
      for (long p : {k, k + 1}) {
        const double wt = p == k ? t : 1.0 - t;
        auto a = gs.at(gs.a, std::size_t(p)), b = gs.at(gs.b, std::size_t(p)), c = gs.at(gs.c, std::size_t(p));
        for (std::size_t j = 0; j < M; ++j) {
          const double am = a(long(m), long(j)), bm = 0.5 * h * b(long(m), long(j)), cm = h * h * c(long(m), long(j));
          A.add(row, idx(p - 1, j), wt * (am - bm));
          A.add(row, idx(p, j), wt * (-2.0 * am + cm));
          A.add(row, idx(p + 1, j), wt * (am + bm));
        }
        rhs[row] += wt * h * h * G(long(m), p);
      }
    }
  }
  try {
    A.factorize();
  } catch (const Error&) {
    throw Error(ErrorKind::singular_system, "regularized Galerkin system singular (sigma=" + std::to_string(sigma) +
                                                ", modes=" + std::to_string(M) + ")");
  }
  A.solve(rhs);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(long(M), long(n2));
  for (std::size_t p = 0; p < n2; ++p)
    for (std::size_t m = 0; m < M; ++m) out(long(m), long(p)) = rhs[idx(long(p), m)];
  return out;
}

struct SigmaLadder {
  double start = 1e-2;
  double stop = 1e-5;
  double factor = 0.5;

  std::vector<double> values() const {
    require(start > 0.0 && stop > 0.0 && stop < start && factor > 0.0 && factor < 1.0, ErrorKind::validation,
            "invalid regularization ladder");
    std::vector<double> v;
    for (double s = start; s >= stop * (1.0 - 1e-12); s *= factor) v.push_back(s);
    require(v.size() >= 3, ErrorKind::validation, "regularization ladder needs at least three values");
    return v;
  }
};

struct MixedSolution {
  Eigen::MatrixXd psi;       ///< modes x nodes of [L0, L1]
  Eigen::MatrixXd psi_ext;   ///< modes x nodes of [L0, L2]
  std::vector<double> sigmas;
  std::vector<double> differences;    ///< L2 norm of consecutive ladder differences
  std::vector<double> energy_ratios;  ///< (sigma |A''|^2 + |A|_{H1}^2) / |G|^2 per ladder value
  double continuation_tolerance = 0.0;
  double residual = 0.0;           ///< discrete L2 residual of the unregularized equation on [L0, L1]
  double relative_residual = 0.0;
  double entrance_residual = 0.0;  ///< max |A(L0)|
};

namespace detail {

inline double axial_l2(const Eigen::MatrixXd& A, const AxialGrid& g) {
  Eigen::VectorXd w = g.trapezoid();
  return std::sqrt((A.array().square().colwise().sum().transpose() * w.array()).sum());
}

inline double axial_h1_squared(const Eigen::MatrixXd& A, const AxialGrid& g, const ScalarEigenBasis& basis) {
  FdOperator d1(g, 1, 4);
  Eigen::MatrixXd Ap = d1.apply(A);
  Eigen::VectorXd w = g.trapezoid();
  double s = 0.0;
  for (long p = 0; p < A.cols(); ++p)
    for (long m = 0; m < A.rows(); ++m)
      s += w[p] * ((1.0 + basis.eigenvalue(std::size_t(m))) * A(m, p) * A(m, p) + Ap(m, p) * Ap(m, p));
  return s;
}

}  // namespace detail

/// Residual of the unregularized second-order discretization at interior nodes 1..last.
inline Eigen::MatrixXd galerkin_residual(const GalerkinSystem& gs, const Eigen::MatrixXd& A, const Eigen::MatrixXd& G,
                                         std::size_t last) {
  const double h = gs.grid.h();
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(long(gs.M), long(last + 1));
  for (std::size_t p = 1; p <= last && p + 1 < gs.grid.nodes(); ++p) {
    const long lp = long(p);
    Eigen::VectorXd d2 = (A.col(lp - 1) - 2.0 * A.col(lp) + A.col(lp + 1)) / (h * h);
    Eigen::VectorXd d1 = (A.col(lp + 1) - A.col(lp - 1)) / (2.0 * h);
    r.col(lp) = gs.at(gs.a, p) * d2 + gs.at(gs.b, p) * d1 + gs.at(gs.c, p) * A.col(lp) - G.col(lp);
  }
  return r;
}

/// Extends the load, runs the regularization ladder, extrapolates to sigma = 0 and restricts to [L0, L1].
inline MixedSolution solve_linear_mixed(const GalerkinSystem& gs, const ScalarEigenBasis& basis,
                                        const AxialExtension& E, const Eigen::MatrixXd& F_modes,
                                        const SigmaLadder& ladder = {}) {
  require(F_modes.rows() == long(gs.M) && F_modes.cols() == long(E.omega_nodes()), ErrorKind::dimension,
          "source modes must cover [L0, L1]");
  const Eigen::MatrixXd G = E.apply(F_modes);
  MixedSolution sol;
  sol.sigmas = ladder.values();
  const std::size_t n1 = E.omega_nodes();
  if (G.cwiseAbs().maxCoeff() == 0.0) {
    sol.psi = Eigen::MatrixXd::Zero(long(gs.M), long(n1));
    sol.psi_ext = Eigen::MatrixXd::Zero(long(gs.M), long(gs.grid.nodes()));
    sol.differences.assign(sol.sigmas.size() - 1, 0.0);
    sol.energy_ratios.assign(sol.sigmas.size(), 0.0);
    return sol;
  }
  const double g2 = std::pow(detail::axial_l2(G, gs.grid), 2);
  FdOperator d2op(gs.grid, 2, 4);
  Eigen::VectorXd w = gs.grid.trapezoid();
  Eigen::MatrixXd prev, last;
  double prev_sigma = 0.0, last_sigma = 0.0, scale = 0.0;
  for (double s : sol.sigmas) {
    Eigen::MatrixXd A = galerkin_solve(gs, G, s);
    Eigen::MatrixXd App = d2op.apply(A);
    double a2 = (App.array().square().colwise().sum().transpose() * w.array()).sum();
    sol.energy_ratios.push_back((s * a2 + detail::axial_h1_squared(A, gs.grid, basis)) / g2);
    scale = std::max(scale, detail::axial_l2(A, gs.grid));
    if (last.size() != 0) sol.differences.push_back(detail::axial_l2(A - last, gs.grid));
    prev = std::move(last);
    prev_sigma = last_sigma;
    last = std::move(A);
    last_sigma = s;
  }
  for (std::size_t k = 1; k < sol.differences.size(); ++k) {
    const double floor = 1e-13 * scale;
    if (sol.differences[k] >= sol.differences[k - 1] && sol.differences[k - 1] > floor)
      throw Error(ErrorKind::continuation_failure,
                  "regularization ladder differences stopped decreasing at sigma=" + std::to_string(sol.sigmas[k + 1]));
  }
  const double r = prev_sigma / last_sigma;
  sol.psi_ext = (r * last - prev) / (r - 1.0);
  sol.psi = sol.psi_ext.leftCols(long(n1));
  sol.continuation_tolerance = sol.differences.back();
  Eigen::MatrixXd res = galerkin_residual(gs, sol.psi_ext, G, n1 - 1);
  sol.residual = detail::axial_l2(res, E.grid().slice(0, n1 - 1));
  sol.relative_residual = sol.residual / std::sqrt(g2);
  sol.entrance_residual = sol.psi.col(0).cwiseAbs().maxCoeff();
  return sol;
}

/// Terms of the integrated multiplier identity for the background operator
///   int d psi_1 L psi = axial + transverse + entry + exit,  d(x) = 6 (x - d0).
struct EnergyReport {
  double multiplier_work = 0.0;
  double axial_interior = 0.0;
  double transverse_interior = 0.0;
  double entry_boundary = 0.0;
  double exit_boundary = 0.0;
  double balance = 0.0;            ///< relative mismatch of the two sides
  double coercivity = 0.0;         ///< min over nodes of the interior weights
  double energy_constant = 0.0;    ///< boundary and H1 energy over |F|^2
};

/// Evaluates the identity on [L0, L1] using fourth-order differences and Simpson quadrature.
inline EnergyReport energy_diagnostics(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& F_modes,
                                       const BackgroundFlow& bg, const ScalarEigenBasis& basis, double d0) {
  const long M = psi.rows(), n = psi.cols();
  require(M == long(basis.size()) && n <= long(bg.nodes()) && n >= 9, ErrorKind::dimension,
          "energy diagnostics shape mismatch");
  const AxialGrid g = bg.grid.slice(0, std::size_t(n - 1));
  FdOperator d1(g, 1, 4), d2(g, 2, 4);
  const Eigen::MatrixXd P1 = d1.apply(psi), P2 = d2.apply(psi);
  Eigen::VectorXd q(n);
  const double h = g.h();
  if ((n - 1) % 2 == 0) {
    for (long i = 0; i < n; ++i) q[i] = (i == 0 || i == n - 1) ? h / 3.0 : (i % 2 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
  } else {
    q = g.trapezoid();
  }
  EnergyReport r;
  r.coercivity = 3.0;
  double h1 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double x = g.x(std::size_t(i)), d = 6.0 * (x - d0);
    const double k11 = bg.k11(0, i), k11p = bg.k11(1, i), k1 = bg.k1(0, i);
    const double wax = d * k1 - 0.5 * (6.0 * k11 + d * k11p);
    r.coercivity = std::min(r.coercivity, wax);
    for (long m = 0; m < M; ++m) {
      const double lam = basis.eigenvalue(std::size_t(m)), A = psi(m, i), A1 = P1(m, i), A2 = P2(m, i);
      r.multiplier_work += q[i] * d * A1 * (k11 * A2 + k1 * A1 - lam * A);
      r.axial_interior += q[i] * wax * A1 * A1;
      r.transverse_interior += q[i] * 3.0 * lam * A * A;
      h1 += q[i] * ((1.0 + lam) * A * A + A1 * A1);
    }
  }
  const double dL = 6.0 * (g.x0 - d0), dR = 6.0 * (g.x1 - d0);
  double entry_energy = 0.0, exit_energy = 0.0;
  for (long m = 0; m < M; ++m) {
    const double lam = basis.eigenvalue(std::size_t(m));
    const double A0 = psi(m, 0), A0p = P1(m, 0), A1 = psi(m, n - 1), A1p = P1(m, n - 1);
    r.entry_boundary += -0.5 * dL * bg.k11(0, 0) * A0p * A0p + 0.5 * dL * lam * A0 * A0;
    r.exit_boundary += 0.5 * dR * bg.k11(0, n - 1) * A1p * A1p - 0.5 * dR * lam * A1 * A1;
    entry_energy += A0p * A0p;
    exit_energy += A1p * A1p + lam * A1 * A1;
  }
  const double rhs = r.axial_interior + r.transverse_interior + r.entry_boundary + r.exit_boundary;
  const double mag = std::max({std::abs(r.multiplier_work), std::abs(r.axial_interior),
                               std::abs(r.transverse_interior), std::abs(r.entry_boundary),
                               std::abs(r.exit_boundary)});
  r.balance = mag > 0.0 ? std::abs(r.multiplier_work - rhs) / mag : 0.0;
  double f2 = 0.0;
  if (F_modes.size() != 0) {
    require(F_modes.rows() == M && F_modes.cols() == n, ErrorKind::dimension, "source modes shape mismatch");
    for (long i = 0; i < n; ++i) f2 += q[i] * F_modes.col(i).squaredNorm();
  }
  const double energy = entry_energy + exit_energy + h1;
  r.energy_constant = f2 > 0.0 ? energy / f2 : 0.0;
  return r;
}

}  // namespace transonic
