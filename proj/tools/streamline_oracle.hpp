#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "transonic/beltrami.hpp"

namespace oracle {

using namespace transonic;

/// Point evaluation of a VelocityField from its mode coefficients, with the sine and cosine factors
/// rebuilt here from the mode indices, and cubic interpolation in x1 between nodes. Used to trace
/// streamlines independently of the grid interpolation inside the solver.
class PointVelocity {
 public:
  PointVelocity(const FlowSetup& s, const VorticalBases& vb, const VelocityField& f) : s_(s), vb_(vb) {
    const AxialGrid g = s.omega();
    const long n = long(s.omega_nodes());
    p_ = f.p;
    c1_ = FdOperator(g, 1, 4).apply(f.c);
    c_ = f.c;
    phi_ = f.phi[0];
    phi1_ = f.phi[1];
    psi_ = f.psi_ext.leftCols(n);
    psi1_ = axial_derivative(s, f.psi_ext, 1);
  }

  /// (ubar + v1, v2, v3) at (x1, x2, x3).
  std::array<double, 3> operator()(double x1, double x2, double x3) const {
    Trig t2(x2, s_.cs.a), t3(x3, s_.cs.b);
    const AxialGrid g = s_.omega();
    const double r = (x1 - g.x0) / g.h();
    const long n = long(s_.omega_nodes());
    const long s0 = std::clamp<long>(long(std::floor(r)) - 1, 0, n - 4);
    const double t = r - double(s0);
    const std::array<double, 4> w{-(t - 1) * (t - 2) * (t - 3) / 6, t * (t - 2) * (t - 3) / 2,
                                  -t * (t - 1) * (t - 3) / 2, t * (t - 1) * (t - 2) / 6};
    std::array<double, 3> v{0.0, 0.0, 0.0};
    double ub = 0.0;
    for (long q = 0; q < 4; ++q) {
      const auto a = at(s0 + q, t2, t3);
      for (int j = 0; j < 3; ++j) v[std::size_t(j)] += w[std::size_t(q)] * a[std::size_t(j)];
      ub += w[std::size_t(q)] * s_.bg.u(0, s0 + q);
    }
    v[0] += ub;
    return v;
  }

  /// Forward RK4 from (L0, x2, x3) to L1 with the given number of steps; returns the end point.
  std::array<double, 2> trace(double x2, double x3, std::size_t steps) const {
    const AxialGrid g = s_.omega();
    const double dx = (g.x1 - g.x0) / double(steps);
    auto rhs = [&](double x1, double y2, double y3) {
      const auto u = (*this)(x1, y2, y3);
      return std::array<double, 2>{u[1] / u[0], u[2] / u[0]};
    };
    double x1 = g.x0;
    for (std::size_t k = 0; k < steps; ++k) {
      const auto k1 = rhs(x1, x2, x3);
      const auto k2 = rhs(x1 + 0.5 * dx, x2 + 0.5 * dx * k1[0], x3 + 0.5 * dx * k1[1]);
      const auto k3 = rhs(x1 + 0.5 * dx, x2 + 0.5 * dx * k2[0], x3 + 0.5 * dx * k2[1]);
      const auto k4 = rhs(x1 + dx, x2 + dx * k3[0], x3 + dx * k3[1]);
      x2 += dx / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      x3 += dx / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
      x1 += dx;
    }
    return {x2, x3};
  }

 private:
  /// cos(k pi x / L), sin(k pi x / L) and the wavenumbers for k up to 64.
  struct Trig {
    std::array<double, 65> c, s, k;
    Trig(double x, double L) {
      for (int m = 0; m <= 64; ++m) {
        k[std::size_t(m)] = m * std::numbers::pi / L;
        c[std::size_t(m)] = std::cos(k[std::size_t(m)] * x);
        s[std::size_t(m)] = std::sin(k[std::size_t(m)] * x);
      }
    }
  };

  std::array<double, 3> at(long i, const Trig& t2, const Trig& t3) const {
    const double a = s_.cs.a, b = s_.cs.b;
    std::array<double, 3> v{0.0, 0.0, 0.0};
    const auto& Q = vb_.dirichlet;
    for (std::size_t k = 0; k < Q.size(); ++k) {
      const auto md = Q.mode(k);
      const double N = 2.0 / std::sqrt(a * b);
      const std::size_t m = std::size_t(md.m), n = std::size_t(md.n);
      const double d2 = N * t2.k[m] * t2.c[m] * t3.s[n], d3 = N * t2.s[m] * t3.k[n] * t3.c[n];
      v[1] += p_(long(k), i) * d3;
      v[2] -= p_(long(k), i) * d2;
    }
    const auto& E = vb_.vec;
    for (std::size_t k = 0; k < E.size(); ++k) {
      const auto md = E.mode(k);
      const auto A = E.amplitudes(k);
      const std::size_t m = std::size_t(md.m), n = std::size_t(md.n);
      const double e2 = A[0] * t2.c[m] * t3.s[n], e3 = A[1] * t2.s[m] * t3.c[n];
      const double curl = A[1] * t2.k[m] * t2.c[m] * t3.c[n] - A[0] * t2.c[m] * t3.k[n] * t3.c[n];
      v[0] += c_(long(k), i) * curl;
      v[1] -= c1_(long(k), i) * e3;
      v[2] += c1_(long(k), i) * e2;
    }
    add_gradient(vb_.neumann, phi_, phi1_, i, t2, t3, v);
    add_gradient(s_.basis, psi_, psi1_, i, t2, t3, v);
    return v;
  }

  void add_gradient(const ScalarEigenBasis& B, const Eigen::MatrixXd& a0, const Eigen::MatrixXd& a1, long i,
                    const Trig& t2, const Trig& t3, std::array<double, 3>& v) const {
    const double a = s_.cs.a, b = s_.cs.b;
    for (std::size_t k = 0; k < B.size(); ++k) {
      const auto md = B.mode(k);
      const std::size_t m = std::size_t(md.m), n = std::size_t(md.n);
      const double N = std::sqrt((m ? 2.0 : 1.0) / a) * std::sqrt((n ? 2.0 : 1.0) / b);
      v[0] += a1(long(k), i) * N * t2.c[m] * t3.c[n];
      v[1] -= a0(long(k), i) * N * t2.k[m] * t2.s[m] * t3.c[n];
      v[2] -= a0(long(k), i) * N * t2.c[m] * t3.k[n] * t3.s[n];
    }
  }

  const FlowSetup& s_;
  const VorticalBases& vb_;
  Eigen::MatrixXd p_, c_, c1_, phi_, phi1_, psi_, psi1_;
};

/// Cosine-series value at (x2, x3) of a field given on the cross grid, from its Neumann coefficients.
inline double neumann_point(const ScalarEigenBasis& B, const Eigen::VectorXd& coef, double x2, double x3) {
  double v = 0.0;
  for (std::size_t k = 0; k < B.size(); ++k) v += coef[long(k)] * B.eval(k, x2, x3);
  return v;
}

}  // namespace oracle
