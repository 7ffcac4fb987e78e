#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "transonic/banded.hpp"
#include "transonic/parallel.hpp"
#include "transonic/error.hpp"

namespace transonic {

/// Uniform grid x_i = x0 + i h, i = 0..n.
struct AxialGrid {
  double x0 = 0.0, x1 = 1.0;
  std::size_t n = 1;

  AxialGrid() = default;
  AxialGrid(double a, double b, std::size_t intervals) : x0(a), x1(b), n(intervals) {
    require(b > a, ErrorKind::invalid_geometry, "axial interval must have positive length");
    require(intervals >= 4, ErrorKind::dimension, "axial grid needs at least 4 intervals");
  }

  std::size_t nodes() const { return n + 1; }
  double h() const { return (x1 - x0) / double(n); }
  double x(std::size_t i) const {
    double v = x0 + (x1 - x0) * (double(i) / double(n));
    return std::abs(v) < 1e-12 * (x1 - x0) ? 0.0 : v;
  }
  /// Index of a node located at xv, or -1.
  long find(double xv, double tol = 1e-9) const {
    double r = (xv - x0) / h();
    long i = std::lround(r);
    if (i < 0 || i > long(n) || std::abs(r - double(i)) > tol) return -1;
    return i;
  }
  /// Composite trapezoid weights.
  Eigen::VectorXd trapezoid() const {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(nodes(), h());
    w[0] *= 0.5;
    w[n] *= 0.5;
    return w;
  }
  /// Sub-grid on nodes [i0, i1].
  AxialGrid slice(std::size_t i0, std::size_t i1) const { return AxialGrid(x(i0), x(i1), i1 - i0); }
};

/// Finite-difference weights for derivatives 0..m at z from nodes xs (Fornberg).
template <class T>
std::vector<std::vector<T>> fd_weights(T z, const std::vector<T>& xs, int m) {
  const int n = int(xs.size()) - 1;
  std::vector<std::vector<T>> c(m + 1, std::vector<T>(n + 1, T(0)));
  T c1 = 1, c4 = xs[0] - z;
  c[0][0] = 1;
  for (int i = 1; i <= n; ++i) {
    int mn = std::min(i, m);
    T c2 = 1, c5 = c4;
    c4 = xs[i] - z;
    for (int j = 0; j < i; ++j) {
      T c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (T(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - T(k) * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

/// Per-node stencil of an axial finite-difference operator.
struct Stencil {
  std::size_t start = 0;
  std::vector<double> w;
};

/// Finite-difference derivative of order `deriv` with formal accuracy `acc` on a uniform grid:
/// centered where it fits, one-sided windows near the ends.
class FdOperator {
 public:
  FdOperator() = default;
  FdOperator(const AxialGrid& g, int deriv, int acc) : deriv_(deriv) {
    const std::size_t np = g.nodes();
    const std::size_t wc = std::size_t(2 * ((deriv + 1) / 2) + acc - 1);
    const std::size_t ws = std::size_t(deriv + acc);
    require(np >= ws && np >= wc, ErrorKind::dimension, "axial grid too coarse for stencil");
    const double h = g.h();
    st_.resize(np);
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t half = wc / 2, start, width;
      if (i >= half && i + half < np) {
        start = i - half;
        width = wc;
      } else {
        width = ws;
        start = (i < half) ? 0 : np - width;
      }
      std::vector<double> xs(width);
      for (std::size_t k = 0; k < width; ++k) xs[k] = double(long(start + k) - long(i));
      auto c = fd_weights<double>(0.0, xs, deriv);
      st_[i].start = start;
      st_[i].w = c[deriv];
      double scale = std::pow(h, -deriv);
      for (auto& v : st_[i].w) v *= scale;
    }
  }

  int derivative_order() const { return deriv_; }
  const Stencil& at(std::size_t i) const { return st_[i]; }
  std::size_t size() const { return st_.size(); }

  /// Applies along columns (column index = axial node).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& a) const {
    require(std::size_t(a.cols()) == st_.size(), ErrorKind::dimension, "axial size mismatch");
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < st_.size(); ++i)
      for (std::size_t k = 0; k < st_[i].w.size(); ++k) r.col(i) += st_[i].w[k] * a.col(st_[i].start + k);
    return r;
  }
  Eigen::VectorXd apply(const Eigen::VectorXd& a) const {
    Eigen::MatrixXd m = a.transpose();
    return apply(m).transpose();
  }

 private:
  int deriv_ = 1;
  std::vector<Stencil> st_;
};

enum class ModeBc { dirichlet_dirichlet, dirichlet_neumann, neumann_neumann };

/// Solves (k a')' - lambda a = g with fourth-order differences.
/// Boundary values are a or a' at the ends depending on bc.
inline Eigen::VectorXd mode_bvp_solve(const AxialGrid& grid, const Eigen::VectorXd& k, double lambda,
                                      const Eigen::VectorXd& g, ModeBc bc, double left = 0.0,
                                      double right = 0.0) {
  const std::size_t np = grid.nodes();
  require(std::size_t(k.size()) == np && std::size_t(g.size()) == np, ErrorKind::dimension,
          "mode BVP coefficient size mismatch");
  require(lambda >= 0.0, ErrorKind::validation, "mode eigenvalue must be nonnegative");
  require(!(bc == ModeBc::neumann_neumann && lambda == 0.0), ErrorKind::degenerate_coefficient,
          "pure Neumann mode problem with zero eigenvalue is singular");
  for (std::size_t i = 0; i < np; ++i)
    require(k[i] > 0.0, ErrorKind::degenerate_coefficient, "mode BVP coefficient not positive");
  FdOperator d1(grid, 1, 4), d2(grid, 2, 4);
  Eigen::VectorXd kp = d1.apply(k);
  BandedMatrix A(np, 6, 6);
  std::vector<double> rhs(np);
  auto put = [&](std::size_t row, const Stencil& s, double coef) {
    for (std::size_t q = 0; q < s.w.size(); ++q) A.add(row, s.start + q, coef * s.w[q]);
  };
  for (std::size_t i = 1; i + 1 < np; ++i) {
    put(i, d2.at(i), k[i]);
    put(i, d1.at(i), kp[i]);
    A.add(i, i, -lambda);
    rhs[i] = g[i];
  }
  if (bc == ModeBc::neumann_neumann) put(0, d1.at(0), 1.0);
  else A.add(0, 0, 1.0);
  rhs[0] = left;
  if (bc == ModeBc::dirichlet_dirichlet) A.add(np - 1, np - 1, 1.0);
  else put(np - 1, d1.at(np - 1), 1.0);
  rhs[np - 1] = right;
  try {
    A.factorize();
  } catch (const Error&) {
    throw Error(ErrorKind::degenerate_coefficient, "mode BVP matrix singular (lambda=" + std::to_string(lambda) + ")");
  }
  A.solve(rhs);
  return Eigen::Map<Eigen::VectorXd>(rhs.data(), long(np));
}

/// Row m of the result solves a'' - lambdas[m] a = loads.row(m) with homogeneous end conditions.
inline Eigen::MatrixXd mode_bvp_solve_all(const AxialGrid& grid, const std::vector<double>& lambdas,
                                          const Eigen::MatrixXd& loads, ModeBc bc, unsigned threads = 1) {
  const std::size_t np = grid.nodes();
  require(loads.rows() == long(lambdas.size()) && loads.cols() == long(np), ErrorKind::dimension,
          "mode loads do not match the axial grid");
  FdOperator d1(grid, 1, 4), d2(grid, 2, 4);
  Eigen::MatrixXd out(loads.rows(), loads.cols());
  parallel_for(lambdas.size(), threads, [&](std::size_t m) {
    const double lambda = lambdas[m];
    require(lambda >= 0.0, ErrorKind::validation, "mode eigenvalue must be nonnegative");
    require(!(bc == ModeBc::neumann_neumann && lambda == 0.0), ErrorKind::degenerate_coefficient,
            "pure Neumann mode problem with zero eigenvalue is singular");
    BandedMatrix A(np, 6, 6);
    std::vector<double> rhs(np, 0.0);
    auto put = [&](std::size_t row, const Stencil& s) {
      for (std::size_t q = 0; q < s.w.size(); ++q) A.add(row, s.start + q, s.w[q]);
    };
    for (std::size_t i = 1; i + 1 < np; ++i) {
      put(i, d2.at(i));
      A.add(i, i, -lambda);
      rhs[i] = loads(long(m), long(i));
    }
    if (bc == ModeBc::neumann_neumann) put(0, d1.at(0));
    else A.add(0, 0, 1.0);
    if (bc == ModeBc::dirichlet_dirichlet) A.add(np - 1, np - 1, 1.0);
    else put(np - 1, d1.at(np - 1));
    A.factorize();
    A.solve(rhs);
    out.row(long(m)) = Eigen::Map<Eigen::RowVectorXd>(rhs.data(), long(np));
  });
  return out;
}

inline Eigen::VectorXd mode_bvp_solve(const AxialGrid& grid, double lambda, const Eigen::VectorXd& g, ModeBc bc,
                                      double left = 0.0, double right = 0.0) {
  return mode_bvp_solve(grid, Eigen::VectorXd::Ones(long(grid.nodes())), lambda, g, bc, left, right);
}

}  // namespace transonic
