#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>
#include <numbers>

#include "transonic/potential.hpp"

using namespace transonic;

namespace {

const double pi = std::numbers::pi;

const FlowSetup& setup(std::size_t n, std::size_t modes) {
  static std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<FlowSetup>> cache;
  auto& p = cache[{n, modes}];
  if (!p) {
    auto gas = make_gas(2.0, 1.0, 0.5);
    auto force = make_admissible_force(gas, -1.0, 1.0);
    p = std::make_unique<FlowSetup>(make_flow_setup(gas, force, n, build_rectangle(1.0, 1.0, 33, 33), modes));
  }
  return *p;
}

PotentialProblem forced_problem(double eps) {
  PotentialProblem p;
  p.epsilon = eps;
  p.phi0.shape.terms = {{0, 0, 0.1}, {1, 0, 0.1}};
  return p;
}

const PotentialSolution& solved(double eps) {
  static std::map<double, std::unique_ptr<PotentialSolution>> cache;
  auto& p = cache[eps];
  if (!p) p = std::make_unique<PotentialSolution>(fixed_point_solve(setup(840, 16), forced_problem(eps)));
  return *p;
}

// Iterate q(x1) b_k(x') with q = amp (x1 - L0)^2, so fourth-order differences are exact.
Eigen::MatrixXd quadratic_iterate(const FlowSetup& s, std::size_t k, double amp) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(long(s.basis.size()), long(s.grid.nodes()));
  for (std::size_t i = 0; i < s.grid.nodes(); ++i) {
    double t = s.grid.x(i) - s.grid.x0;
    A(long(k), long(i)) = amp * t * t;
  }
  return A;
}

double grid_norm(const FlowSetup& s, const Eigen::MatrixXd& F) {
  Eigen::VectorXd w = s.omega().trapezoid();
  double r = 0.0;
  for (long i = 0; i < F.cols(); ++i) r += w[i] * (s.cs.weights.array() * F.col(i).array().square()).sum();
  return std::sqrt(r);
}

}  // namespace

TEST(BoundaryLift, SupportAndEntranceTrace) {
  const auto& s = setup(840, 16);
  auto h0 = wall_flat_bump(1.0);
  auto L = boundary_lift(s, h0);
  for (std::size_t i = 0; i < s.omega_nodes(); ++i) {
    if (s.grid.x(i) < 0.9 * s.force.L0) continue;
    for (std::size_t c = 0; c < s.cs.nodes(); c += 37) {
      EXPECT_EQ(L.value(c, i), 0.0);
      for (double d : L.derivatives(c, i)) EXPECT_EQ(d, 0.0);
    }
  }
  EXPECT_LT(s.grid.x(L.support - 1), 0.9 * s.force.L0);
  for (std::size_t c = 0; c < s.cs.nodes(); ++c) {
    double x2 = s.cs.x2(c), x3 = s.cs.x3(c);
    double bump = std::pow(std::sin(pi * x2), 4) * std::pow(std::sin(pi * x3), 4);
    EXPECT_NEAR(L.value(c, 0), bump, 1e-14);
    auto d = L.derivatives(c, 0);
    EXPECT_NEAR(d[1], 4 * pi * std::pow(std::sin(pi * x2), 3) * std::cos(pi * x2) * std::pow(std::sin(pi * x3), 4),
                1e-12);
    EXPECT_EQ(d[0], 0.0);
  }
}

TEST(BoundaryLift, EntranceDataCompatibility) {
  const auto& cs = setup(840, 16).cs;
  EXPECT_LE(entrance_compatibility(wall_flat_bump(1.0), cs), 1e-8);
  CosineSeries wavy;
  wavy.terms = {{0, 0, 1.0}, {1, 0, -1.0}};  // vanishes at the anchor, but not wall-flat
  EXPECT_GT(entrance_compatibility(wavy, cs), 1.0);
  CosineSeries offset;
  offset.terms = {{0, 0, 1.0}};  // wall-flat, nonzero at the anchor
  EXPECT_NEAR(entrance_compatibility(offset, cs), 1.0, 1e-15);

  PotentialProblem p = forced_problem(1e-3);
  p.h0 = wavy;
  try {
    fixed_point_solve(setup(840, 16), p);
    FAIL() << "incompatible entrance datum accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::compatibility);
  }
}

TEST(Source, VanishesWithoutPerturbation) {
  const auto& s = setup(840, 16);
  PotentialProblem p = forced_problem(0.0);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(long(s.basis.size()), long(s.grid.nodes()));
  Eigen::MatrixXd F = source_F(s, p, boundary_lift(s, p.h0), zero);
  EXPECT_EQ(F.cwiseAbs().maxCoeff(), 0.0);
}

// Reduced operator minus source equals the full equation divided by the background sound speed,
// with the full equation evaluated from analytic derivatives of phi.
TEST(Source, MatchesFullEquationPointwise) {
  const auto& s = setup(840, 16);
  PotentialProblem p = forced_problem(2e-3);
  p.h0 = wall_flat_bump(0.3);
  const auto lift = boundary_lift(s, p.h0);
  const std::size_t k = std::size_t(s.basis.find(1, 1));
  const double amp = 0.02;
  Eigen::MatrixXd A = quadratic_iterate(s, k, amp);
  Eigen::MatrixXd F = source_F(s, p, lift, A);
  const double g = s.gas.gamma, eps = p.epsilon;
  CutoffFamily cut{s.force.L0, s.force.L1};
  double worst = 0.0, scale = 0.0;
  for (std::size_t i : {std::size_t(3), std::size_t(20), std::size_t(40), std::size_t(300), std::size_t(550)})
    for (std::size_t c : {std::size_t(0), std::size_t(40), std::size_t(500), std::size_t(777)}) {
      const long li = long(i);
      const double x1 = s.grid.x(i), x2 = s.cs.x2(c), x3 = s.cs.x3(c), t = x1 - s.grid.x0;
      auto b = [&](Deriv d) { return s.basis.eval(k, x2, x3, d); };
      auto hv = [&](Deriv d) { return p.h0.eval(s.cs, x2, x3, d); };
      auto e = cut.eta0(Jet<2>::variable(x1));
      const double e0 = e.derivative(0), e1 = e.derivative(1), e2 = e.derivative(2);
      // psi1 = q b + eps eta0 h0
      const double q = amp * t * t, q1 = 2 * amp * t, q2 = 2 * amp;
      const double d1 = q1 * b(Deriv::value) + eps * e1 * hv(Deriv::value);
      const double d2 = q * b(Deriv::d2) + eps * e0 * hv(Deriv::d2);
      const double d3 = q * b(Deriv::d3) + eps * e0 * hv(Deriv::d3);
      const double d11 = q2 * b(Deriv::value) + eps * e2 * hv(Deriv::value);
      const double d12 = q1 * b(Deriv::d2) + eps * e1 * hv(Deriv::d2);
      const double d13 = q1 * b(Deriv::d3) + eps * e1 * hv(Deriv::d3);
      const double d22 = q * b(Deriv::d22) + eps * e0 * hv(Deriv::d22);
      const double d23 = q * b(Deriv::d23) + eps * e0 * hv(Deriv::d23);
      const double d33 = q * b(Deriv::d33) + eps * e0 * hv(Deriv::d33);
      const double u = s.bg.u(0, li), up = s.bg.u(1, li), cb2 = s.bg.c2(0, li), fb = s.bg.f(0, li);
      const double t0 = (x1 + 0.5) / 0.5, gauss = std::exp(-t0 * t0);
      const double S = 0.1 + 0.1 * std::cos(pi * x2);
      const double P0 = gauss * S, P1 = -2 * t0 / 0.5 * gauss * S, P2 = -0.1 * pi * std::sin(pi * x2) * gauss;
      const double v1 = u + d1, v2 = d2, v3 = d3;
      const double Phi = s.bg.Phi[li] + eps * P0;
      const double c2 = (g - 1.0) * (s.gas.B0 + Phi - 0.5 * (v1 * v1 + v2 * v2 + v3 * v3));
      const double f11 = up + d11;
      const double R = c2 * (f11 + d22 + d33) -
                       (v1 * v1 * f11 + v2 * v2 * d22 + v3 * v3 * d33 + 2 * (v1 * v2 * d12 + v1 * v3 * d13 + v2 * v3 * d23)) +
                       v1 * (fb + eps * P1) + v2 * eps * P2;
      // Operator of the reduced equation applied to psi = q b with coefficients at grad psi1.
      const double k11 = 1 - u * u / cb2 + ((g - 1) * eps * P0 - (g + 1) * u * d1 - d1 * d1 -
                                            0.5 * (g - 1) * (d1 * d1 + d2 * d2 + d3 * d3)) / cb2;
      const double iso = 1 + (g - 1) / cb2 * (eps * P0 - u * d1 - 0.5 * (d1 * d1 + d2 * d2 + d3 * d3));
      const double k22 = iso - d2 * d2 / cb2, k33 = iso - d3 * d3 / cb2;
      const double k12 = -(u + d1) * d2 / cb2, k13 = -(u + d1) * d3 / cb2, k23 = -d2 * d3 / cb2;
      const double Lpsi = k11 * q2 * b(Deriv::value) + k22 * q * b(Deriv::d22) + k33 * q * b(Deriv::d33) +
                          2 * (k12 * q1 * b(Deriv::d2) + k13 * q1 * b(Deriv::d3) + k23 * q * b(Deriv::d23)) +
                          s.bg.k1(0, li) * q1 * b(Deriv::value);
      worst = std::max(worst, std::abs((Lpsi - F(long(c), li)) - R / cb2));
      scale = std::max(scale, std::abs(F(long(c), li)));
    }
  EXPECT_GT(scale, 1e-5);
  EXPECT_LE(worst, 1e-12);
}

TEST(Source, QuadraticSmallness) {
  const auto& s = setup(840, 16);
  const std::size_t k = std::size_t(s.basis.find(1, 0));
  PotentialProblem p0 = forced_problem(0.0);
  const auto lift = boundary_lift(s, p0.h0);
  // eps = 0: F is quadratic in the iterate.
  double r1 = grid_norm(s, source_F(s, p0, lift, quadratic_iterate(s, k, 1e-3))) / 1e-6;
  double r2 = grid_norm(s, source_F(s, p0, lift, quadratic_iterate(s, k, 5e-4))) / 2.5e-7;
  EXPECT_GT(r1, 0.0);
  EXPECT_NEAR(r2 / r1, 1.0, 1e-9);
  // zero iterate: F is linear in eps.
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(long(s.basis.size()), long(s.grid.nodes()));
  double e1 = grid_norm(s, source_F(s, forced_problem(1e-3), lift, zero)) / 1e-3;
  double e2 = grid_norm(s, source_F(s, forced_problem(5e-4), lift, zero)) / 5e-4;
  EXPECT_NEAR(e2 / e1, 1.0, 1e-9);
}

// Directional difference quotient of F at (eps, delta v) shrinks in proportion to eps + delta.
TEST(Source, LipschitzFactorShrinksWithBall) {
  const auto& s = setup(840, 16);
  const std::size_t k = std::size_t(s.basis.find(1, 0)), j = std::size_t(s.basis.find(0, 1));
  auto quotient = [&](double scale) {
    PotentialProblem p = forced_problem(1e-3 * scale);
    const auto lift = boundary_lift(s, p.h0);
    Eigen::MatrixXd base = quadratic_iterate(s, k, 2e-3 * scale);
    Eigen::MatrixXd dir = quadratic_iterate(s, j, 1.0);
    const double t = 1e-7;
    Eigen::MatrixXd dF = (source_F(s, p, lift, base + t * dir) - source_F(s, p, lift, base - t * dir)) / (2 * t);
    return grid_norm(s, dF) / grid_norm(s, Eigen::MatrixXd(s.basis.synthesize(dir.leftCols(long(s.omega_nodes())))));
  };
  double big = quotient(1.0), small = quotient(0.5);
  EXPECT_GT(big, 0.0);
  EXPECT_NEAR(small / big, 0.5, 0.05);
}

TEST(Source, EntranceWallCompatibility) {
  const auto& s = setup(840, 16);
  PotentialProblem p = forced_problem(1e-3);
  p.h0 = wall_flat_bump(0.5);
  Eigen::MatrixXd A = quadratic_iterate(s, std::size_t(s.basis.find(2, 1)), 1e-3);
  EXPECT_LE(entrance_source_compatibility(s, p, p.h0, A), 1e-8);
}

TEST(Sobolev, ProxyMatchesClosedForm) {
  const auto& s = setup(840, 16);
  const std::size_t k = std::size_t(s.basis.find(1, 1));
  const double lam = s.basis.eigenvalue(k);
  Eigen::MatrixXd A = quadratic_iterate(s, k, 1.0);
  // q = t^2 on t in [0, 2]: |q|^2 = 32/5, |q'|^2 = 32/3, |q''|^2 = 8.
  auto expect = [&](int order) {
    double v = 0.0;
    const double ints[3] = {32.0 / 5.0, 32.0 / 3.0, 8.0};
    for (int a = 0; a <= std::min(order, 2); ++a)
      for (int l = 0; l <= order - a; ++l) v += std::pow(lam, l) * ints[a];
    return std::sqrt(v);
  };
  for (int order : {1, 4}) EXPECT_NEAR(sobolev_proxy(s, A, order) / expect(order), 1.0, 1e-5);
}

TEST(SonicSurface, RecoversSyntheticSurface) {
  const auto& s = setup(840, 16);
  const std::size_t nc = s.cs.nodes(), n = s.omega_nodes();
  auto xi = [](double x2, double x3) { return 0.01 * x2 * x2 - 0.02 * x3 + 0.003; };
  Eigen::MatrixXd M2 = Eigen::MatrixXd::Zero(long(nc), long(n));
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      double x = s.grid.x(i);
      M2(long(c), long(i)) = 1.0 + (x - xi(s.cs.x2(c), s.cs.x3(c))) * (2.0 + 0.1 * x);
    }
  auto S = sonic_surface(s, M2);
  for (std::size_t c = 0; c < nc; ++c) {
    EXPECT_NEAR(S.xi[long(c)], xi(s.cs.x2(c), s.cs.x3(c)), 1e-13);
    EXPECT_NEAR(S.dxi_dx2[long(c)], 0.02 * s.cs.x2(c), 1e-12);
    EXPECT_NEAR(S.dxi_dx3[long(c)], -0.02, 1e-12);
  }
  EXPECT_LE(S.mach_residual, 1e-14);
}

TEST(SonicSurface, ErrorKinds) {
  const auto& s = setup(840, 16);
  const std::size_t nc = s.cs.nodes(), n = s.omega_nodes();
  Eigen::MatrixXd sub = Eigen::MatrixXd::Constant(long(nc), long(n), 0.5);
  for (std::size_t i = 0; i < n; ++i) sub.col(long(i)).array() += 1e-4 * double(i);
  try {
    sonic_surface(s, sub);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_sonic_point);
  }
  Eigen::MatrixXd flat = sub;
  flat.col(10) = flat.col(9);
  try {
    sonic_surface(s, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_sonic);
  }
}

TEST(FixedPoint, ZeroAmplitudeGivesBackground) {
  const auto& s = setup(840, 16);
  const auto sol = fixed_point_solve(s, forced_problem(0.0));
  EXPECT_EQ(sol.iterations(), 1u);
  EXPECT_EQ(sol.psi.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(sol.sonic.sup_xi, 0.0);
  EXPECT_EQ(sol.sonic.xi.cwiseAbs().maxCoeff(), 0.0);
  const long i0 = s.grid.find(0.0);
  ASSERT_GE(i0, 0);
  EXPECT_NEAR(sol.M2.col(i0).maxCoeff(), 1.0, 1e-12);
  EXPECT_NEAR(sol.M2.col(i0).minCoeff(), 1.0, 1e-12);
}

TEST(FixedPoint, ContractsAndSolvesFullEquation) {
  const auto& s = setup(840, 16);
  const auto& sol = solved(1e-3);
  ASSERT_GE(sol.iterations(), 2u);
  for (std::size_t k = 1; k < sol.history.size(); ++k) EXPECT_LE(sol.history[k].ratio, 0.5);
  EXPECT_LE(sol.history.back().h1_difference, 1e-10);
  EXPECT_LE(sol.max_h4, std::sqrt(1e-3));
  EXPECT_LE(sol.residual_l2, 1e-6);
  EXPECT_LE(sol.residual_max, 1e-6);
  EXPECT_LE(sol.residual_l2, 10.0 * sol.continuation_tolerance);
  EXPECT_LE(sol.bernoulli_error, 1e-9);
  EXPECT_LE(sol.wall_residual, 1e-8);
  EXPECT_LE(sol.entrance_residual, 1e-12);
  EXPECT_LE(sol.source_compatibility, 1e-8);
  EXPECT_GT(sol.rho.minCoeff(), 0.0);
  EXPECT_GT(sol.min_mach_slope, 0.0);
  EXPECT_LE(sol.sonic.mach_residual, 1e-8);
  EXPECT_GT(sol.sonic.sup_xi, 0.0);
  EXPECT_LE(sol.sonic.c1_norm, 1.0);
  EXPECT_EQ(sol.psi.cols(), long(s.omega_nodes()));
}

TEST(FixedPoint, ResponseScalesLinearly) {
  const auto& s = setup(840, 16);
  const auto& a = solved(1e-3);
  const auto& b = solved(5e-4);
  double ra = detail::axial_l2(a.psi, s.omega()), rb = detail::axial_l2(b.psi, s.omega());
  EXPECT_NEAR(ra / rb, 2.0, 0.4);
  EXPECT_NEAR(a.sonic.sup_xi / b.sonic.sup_xi, 2.0, 0.5);
}

TEST(FixedPoint, SmallEntranceDatumStaysInBall) {
  const auto& s = setup(840, 31);
  PotentialProblem p = forced_problem(1e-3);
  p.h0 = wall_flat_bump(1e-6);
  const auto sol = fixed_point_solve(s, p);
  EXPECT_LE(sol.max_h4, std::sqrt(1e-3));
  EXPECT_LE(sol.entrance_residual, 1e-12);
  EXPECT_LE(sol.residual_l2, 1e-6);
}

TEST(FixedPoint, ErrorKinds) {
  const auto& s = setup(840, 16);
  PotentialProblem big = forced_problem(1e-3);
  big.h0 = wall_flat_bump(1e-3);
  try {
    fixed_point_solve(s, big);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
    EXPECT_NE(std::string(e.what()).find("H4 proxy"), std::string::npos);
  }
  PotentialProblem capped = forced_problem(0.1);
  try {
    fixed_point_solve(s, capped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
}
