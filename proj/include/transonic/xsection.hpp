#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "transonic/error.hpp"

namespace transonic {

/// Rectangle [0,a] x [0,b] with a tensor trapezoid grid (endpoints included).
/// Node index c = i + n2 * j with x2 = x2s[i], x3 = x3s[j].
struct CrossSection {
  double a = 1.0, b = 1.0;
  std::size_t n2 = 0, n3 = 0;
  std::vector<double> x2s, x3s;
  Eigen::VectorXd weights;

  std::size_t nodes() const { return n2 * n3; }
  double x2(std::size_t c) const { return x2s[c % n2]; }
  double x3(std::size_t c) const { return x3s[c / n2]; }
  double area() const { return a * b; }
  bool on_boundary(std::size_t c) const {
    std::size_t i = c % n2, j = c / n2;
    return i == 0 || j == 0 || i + 1 == n2 || j + 1 == n3;
  }
  /// Outward unit normal at a boundary node; corners use the diagonal.
  std::array<double, 2> normal(std::size_t c) const {
    std::size_t i = c % n2, j = c / n2;
    double nx = (i == 0) ? -1.0 : (i + 1 == n2 ? 1.0 : 0.0);
    double ny = (j == 0) ? -1.0 : (j + 1 == n3 ? 1.0 : 0.0);
    double s = std::hypot(nx, ny);
    if (s == 0.0) return {0.0, 0.0};
    return {nx / s, ny / s};
  }
  std::vector<std::size_t> boundary_nodes() const {
    std::vector<std::size_t> r;
    for (std::size_t c = 0; c < nodes(); ++c)
      if (on_boundary(c)) r.push_back(c);
    return r;
  }
};

inline CrossSection build_rectangle(double a, double b, std::size_t n2, std::size_t n3) {
  require(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b), ErrorKind::invalid_geometry,
          "rectangle sides must be positive");
  require(n2 >= 4 && n3 >= 4, ErrorKind::dimension, "cross-section grid needs at least 4 nodes per side");
  CrossSection cs;
  cs.a = a;
  cs.b = b;
  cs.n2 = n2;
  cs.n3 = n3;
  cs.x2s.resize(n2);
  cs.x3s.resize(n3);
  for (std::size_t i = 0; i < n2; ++i) cs.x2s[i] = a * double(i) / double(n2 - 1);
  for (std::size_t j = 0; j < n3; ++j) cs.x3s[j] = b * double(j) / double(n3 - 1);
  const double h2 = a / double(n2 - 1), h3 = b / double(n3 - 1);
  cs.weights.resize(long(n2 * n3));
  for (std::size_t j = 0; j < n3; ++j)
    for (std::size_t i = 0; i < n2; ++i) {
      double w2 = (i == 0 || i + 1 == n2) ? 0.5 * h2 : h2;
      double w3 = (j == 0 || j + 1 == n3) ? 0.5 * h3 : h3;
      cs.weights[long(i + n2 * j)] = w2 * w3;
    }
  return cs;
}

/// Derivative selector for basis evaluation.
enum class Deriv { value = 0, d2 = 1, d3 = 2, d22 = 3, d23 = 4, d33 = 5 };
inline constexpr int kDerivCount = 6;

namespace detail {

/// d-th derivative of cos(k x) or sin(k x).
inline double trig(bool cosine, double k, double x, int d) {
  double c = std::cos(k * x), s = std::sin(k * x);
  double v;
  switch (d & 3) {
    case 0: v = cosine ? c : s; break;
    case 1: v = cosine ? -s : c; break;
    case 2: v = cosine ? -c : -s; break;
    default: v = cosine ? s : -c; break;
  }
  return v * std::pow(k, d);
}

inline std::array<int, 2> deriv_orders(Deriv d) {
  switch (d) {
    case Deriv::value: return {0, 0};
    case Deriv::d2: return {1, 0};
    case Deriv::d3: return {0, 1};
    case Deriv::d22: return {2, 0};
    case Deriv::d23: return {1, 1};
    case Deriv::d33: return {0, 2};
  }
  return {0, 0};
}

inline bool eig_less(double l1, double l2) {
  double tol = 1e-12 * std::max({1.0, std::abs(l1), std::abs(l2)});
  return l1 < l2 - tol;
}

}  // namespace detail

struct ModeIndex {
  int m = 0, n = 0;
  int family = 0;  // vector basis: 0 gradient type, 1 curl type
  double eigenvalue = 0.0;
};

enum class ScalarKind { neumann, dirichlet };

/// Eigenfunctions of the cross-section Laplacian (-Delta b = lambda b), tabulated on the grid.
class ScalarEigenBasis {
 public:
  ScalarEigenBasis() = default;
  ScalarEigenBasis(const CrossSection& cs, ScalarKind kind, std::vector<ModeIndex> modes)
      : cs_(cs), kind_(kind), modes_(std::move(modes)) {
    for (const auto& md : modes_)
      require(md.m <= int(cs.n2) - 2 && md.n <= int(cs.n3) - 2, ErrorKind::dimension,
              "cross-section grid too coarse for retained modes");
    const long nc = long(cs.nodes()), M = long(modes_.size());
    for (int d = 0; d < kDerivCount; ++d) tab_[d].resize(nc, M);
    for (long k = 0; k < M; ++k)
      for (long c = 0; c < nc; ++c)
        for (int d = 0; d < kDerivCount; ++d)
          tab_[d](c, k) = eval(std::size_t(k), cs.x2(std::size_t(c)), cs.x3(std::size_t(c)), Deriv(d));
  }

  ScalarKind kind() const { return kind_; }
  std::size_t size() const { return modes_.size(); }
  const CrossSection& section() const { return cs_; }
  const ModeIndex& mode(std::size_t k) const { return modes_[k]; }
  double eigenvalue(std::size_t k) const { return modes_[k].eigenvalue; }
  const Eigen::MatrixXd& table(Deriv d = Deriv::value) const { return tab_[int(d)]; }

  /// Index of mode (m, n), or -1.
  long find(int m, int n) const {
    for (std::size_t k = 0; k < modes_.size(); ++k)
      if (modes_[k].m == m && modes_[k].n == n) return long(k);
    return -1;
  }

  double norm_factor(std::size_t k) const {
    const auto& md = modes_[k];
    if (kind_ == ScalarKind::dirichlet) return 2.0 / std::sqrt(cs_.a * cs_.b);
    double f2 = md.m == 0 ? 1.0 : 2.0, f3 = md.n == 0 ? 1.0 : 2.0;
    return std::sqrt(f2 / cs_.a) * std::sqrt(f3 / cs_.b);
  }

  /// Mode k or its derivative at an arbitrary point.
  double eval(std::size_t k, double x2, double x3, Deriv d = Deriv::value) const {
    const auto& md = modes_[k];
    auto o = detail::deriv_orders(d);
    const double pi = std::numbers::pi;
    bool cosine = kind_ == ScalarKind::neumann;
    return norm_factor(k) * detail::trig(cosine, md.m * pi / cs_.a, x2, o[0]) *
           detail::trig(cosine, md.n * pi / cs_.b, x3, o[1]);
  }

  /// Grid values (nodes x axial) to coefficients (modes x axial) by quadrature.
  Eigen::MatrixXd analyze(const Eigen::MatrixXd& field) const {
    require(field.rows() == long(cs_.nodes()), ErrorKind::dimension, "field does not match cross-section grid");
    return tab_[0].transpose() * (cs_.weights.asDiagonal() * field);
  }
  Eigen::MatrixXd synthesize(const Eigen::MatrixXd& coef, Deriv d = Deriv::value) const {
    require(coef.rows() == long(size()), ErrorKind::dimension, "coefficient count does not match basis");
    return tab_[int(d)] * coef;
  }

 private:
  CrossSection cs_;
  ScalarKind kind_ = ScalarKind::neumann;
  std::vector<ModeIndex> modes_;
  std::array<Eigen::MatrixXd, kDerivCount> tab_;
};

namespace detail {

inline std::vector<ModeIndex> enumerate_scalar(const CrossSection& cs, ScalarKind kind, std::size_t count,
                                               double cutoff) {
  const double pi = std::numbers::pi;
  int lo = kind == ScalarKind::neumann ? 0 : 1;
  std::vector<ModeIndex> all;
  int K = int(std::max<std::size_t>(count, 1)) + 2;
  if (cutoff > 0.0) K = int(std::ceil(std::sqrt(cutoff) * std::max(cs.a, cs.b) / pi)) + 2;
  for (int m = lo; m <= K; ++m)
    for (int n = lo; n <= K; ++n) {
      double l = std::pow(m * pi / cs.a, 2) + std::pow(n * pi / cs.b, 2);
      all.push_back({m, n, 0, l});
    }
  std::sort(all.begin(), all.end(), [](const ModeIndex& p, const ModeIndex& q) {
    if (eig_less(p.eigenvalue, q.eigenvalue)) return true;
    if (eig_less(q.eigenvalue, p.eigenvalue)) return false;
    if (p.m != q.m) return p.m < q.m;
    return p.n < q.n;
  });
  std::vector<ModeIndex> out;
  for (const auto& md : all) {
    if (cutoff > 0.0) {
      if (md.eigenvalue <= cutoff * (1.0 + 1e-12)) out.push_back(md);
    } else if (out.size() < count) {
      out.push_back(md);
    }
  }
  return out;
}

}  // namespace detail

inline ScalarEigenBasis neumann_basis(const CrossSection& cs, std::size_t M) {
  require(M >= 1, ErrorKind::validation, "mode count must be positive");
  return ScalarEigenBasis(cs, ScalarKind::neumann, detail::enumerate_scalar(cs, ScalarKind::neumann, M, 0.0));
}

inline ScalarEigenBasis dirichlet_basis(const CrossSection& cs, std::size_t M) {
  require(M >= 1, ErrorKind::validation, "mode count must be positive");
  return ScalarEigenBasis(cs, ScalarKind::dirichlet, detail::enumerate_scalar(cs, ScalarKind::dirichlet, M, 0.0));
}

/// All modes with eigenvalue <= cutoff.
inline ScalarEigenBasis scalar_basis_below(const CrossSection& cs, ScalarKind kind, double cutoff) {
  require(cutoff > 0.0, ErrorKind::validation, "eigenvalue cutoff must be positive");
  return ScalarEigenBasis(cs, kind, detail::enumerate_scalar(cs, kind, 0, cutoff));
}

/// Vector fields e = (e2, e3) with e2 ~ cos sin, e3 ~ sin cos: tangential trace and divergence
/// vanish on the boundary. Family 0 is grad q / sqrt(beta) for the Dirichlet mode q.
class VectorEigenBasis {
 public:
  VectorEigenBasis() = default;
  VectorEigenBasis(const CrossSection& cs, std::vector<ModeIndex> modes) : cs_(cs), modes_(std::move(modes)) {
    for (const auto& md : modes_)
      require(md.m <= int(cs.n2) - 2 && md.n <= int(cs.n3) - 2, ErrorKind::dimension,
              "cross-section grid too coarse for retained modes");
    const long nc = long(cs.nodes()), M = long(modes_.size());
    for (int comp = 0; comp < 2; ++comp)
      for (int d = 0; d < kDerivCount; ++d) tab_[comp][d].resize(nc, M);
    for (long k = 0; k < M; ++k)
      for (long c = 0; c < nc; ++c)
        for (int comp = 0; comp < 2; ++comp)
          for (int d = 0; d < kDerivCount; ++d)
            tab_[comp][d](c, k) = eval(std::size_t(k), comp, cs.x2(std::size_t(c)), cs.x3(std::size_t(c)), Deriv(d));
  }

  std::size_t size() const { return modes_.size(); }
  const CrossSection& section() const { return cs_; }
  const ModeIndex& mode(std::size_t k) const { return modes_[k]; }
  double eigenvalue(std::size_t k) const { return modes_[k].eigenvalue; }
  /// comp 0 -> e2, comp 1 -> e3.
  const Eigen::MatrixXd& table(int comp, Deriv d = Deriv::value) const { return tab_[comp][int(d)]; }

  long find(int m, int n, int family) const {
    for (std::size_t k = 0; k < modes_.size(); ++k)
      if (modes_[k].m == m && modes_[k].n == n && modes_[k].family == family) return long(k);
    return -1;
  }

  std::array<double, 2> amplitudes(std::size_t k) const {
    const auto& md = modes_[k];
    const double pi = std::numbers::pi;
    double p = md.m * pi / cs_.a, q = md.n * pi / cs_.b, s = std::sqrt(md.eigenvalue);
    double N = (md.m >= 1 && md.n >= 1) ? 2.0 / std::sqrt(cs_.a * cs_.b) : std::sqrt(2.0 / (cs_.a * cs_.b));
    if (md.family == 0) return {N * p / s, N * q / s};
    return {N * q / s, -N * p / s};
  }

  double eval(std::size_t k, int comp, double x2, double x3, Deriv d = Deriv::value) const {
    const auto& md = modes_[k];
    auto o = detail::deriv_orders(d);
    const double pi = std::numbers::pi;
    auto A = amplitudes(k);
    double k2 = md.m * pi / cs_.a, k3 = md.n * pi / cs_.b;
    if (comp == 0) return A[0] * detail::trig(true, k2, x2, o[0]) * detail::trig(false, k3, x3, o[1]);
    return A[1] * detail::trig(false, k2, x2, o[0]) * detail::trig(true, k3, x3, o[1]);
  }

  Eigen::MatrixXd analyze(const Eigen::MatrixXd& f2, const Eigen::MatrixXd& f3) const {
    require(f2.rows() == long(cs_.nodes()) && f3.rows() == long(cs_.nodes()) && f2.cols() == f3.cols(),
            ErrorKind::dimension, "vector field does not match cross-section grid");
    return tab_[0][0].transpose() * (cs_.weights.asDiagonal() * f2) +
           tab_[1][0].transpose() * (cs_.weights.asDiagonal() * f3);
  }
  Eigen::MatrixXd synthesize(const Eigen::MatrixXd& coef, int comp, Deriv d = Deriv::value) const {
    require(coef.rows() == long(size()), ErrorKind::dimension, "coefficient count does not match basis");
    return tab_[comp][int(d)] * coef;
  }

 private:
  CrossSection cs_;
  std::vector<ModeIndex> modes_;
  std::array<std::array<Eigen::MatrixXd, kDerivCount>, 2> tab_;
};

namespace detail {

inline std::vector<ModeIndex> enumerate_vector(const CrossSection& cs, std::size_t count, double cutoff) {
  const double pi = std::numbers::pi;
  std::vector<ModeIndex> all;
  int K = int(std::max<std::size_t>(count, 1)) + 2;
  if (cutoff > 0.0) K = int(std::ceil(std::sqrt(cutoff) * std::max(cs.a, cs.b) / pi)) + 2;
  for (int m = 0; m <= K; ++m)
    for (int n = 0; n <= K; ++n) {
      if (m == 0 && n == 0) continue;
      double l = std::pow(m * pi / cs.a, 2) + std::pow(n * pi / cs.b, 2);
      if (m >= 1 && n >= 1) all.push_back({m, n, 0, l});
      all.push_back({m, n, 1, l});
    }
  std::sort(all.begin(), all.end(), [](const ModeIndex& p, const ModeIndex& q) {
    if (eig_less(p.eigenvalue, q.eigenvalue)) return true;
    if (eig_less(q.eigenvalue, p.eigenvalue)) return false;
    if (p.m != q.m) return p.m < q.m;
    if (p.n != q.n) return p.n < q.n;
    return p.family < q.family;
  });
  std::vector<ModeIndex> out;
  for (const auto& md : all) {
    if (cutoff > 0.0) {
      if (md.eigenvalue <= cutoff * (1.0 + 1e-12)) out.push_back(md);
    } else if (out.size() < count) {
      out.push_back(md);
    }
  }
  return out;
}

}  // namespace detail

inline VectorEigenBasis vector_basis(const CrossSection& cs, std::size_t M) {
  require(M >= 1, ErrorKind::validation, "mode count must be positive");
  return VectorEigenBasis(cs, detail::enumerate_vector(cs, M, 0.0));
}

inline VectorEigenBasis vector_basis_below(const CrossSection& cs, double cutoff) {
  require(cutoff > 0.0, ErrorKind::validation, "eigenvalue cutoff must be positive");
  return VectorEigenBasis(cs, detail::enumerate_vector(cs, 0, cutoff));
}

/// Mode coefficients A_m(x1) on the axial grid; rows are modes, columns axial nodes.
struct SpectralField {
  Eigen::MatrixXd coef;
};

}  // namespace transonic
