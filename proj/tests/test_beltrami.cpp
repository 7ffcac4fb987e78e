#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <random>

#include "streamline_oracle.hpp"
#include "transonic/beltrami.hpp"

using namespace transonic;

namespace {

const double pi = std::numbers::pi;

const FlowSetup& setup(std::size_t n, std::size_t modes = 31) {
  static std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<FlowSetup>> cache;
  auto& p = cache[{n, modes}];
  if (!p) {
    auto gas = make_gas(2.0, 1.0, 0.5);
    auto force = make_admissible_force(gas, -1.0, 1.0);
    p = std::make_unique<FlowSetup>(make_flow_setup(gas, force, n, build_rectangle(1.0, 1.0, 33, 33), modes));
  }
  return *p;
}

const VorticalBases& bases() {
  static const VorticalBases vb = vortical_bases(setup(420).cs);
  return vb;
}

BeltramiProblem curl_problem(double eps, double A = 5e-4) {
  BeltramiProblem p;
  p.epsilon = eps;
  p.h.stream = wall_flat_bump(A);
  p.phi0.shape.terms = {{0, 0, 0.1}, {2, 0, 0.1}};
  return p;
}

const BeltramiState& solved(double eps) {
  static std::map<double, std::unique_ptr<BeltramiState>> cache;
  auto& p = cache[eps];
  if (!p) p = std::make_unique<BeltramiState>(beltrami_fixed_point(setup(420), bases(), curl_problem(eps)));
  return *p;
}

// Laplacian of A sin^4(pi x2) sin^4(pi x3) on the unit square.
double bump_laplacian(double A, double x2, double x3) {
  auto f = [](double x) { return std::pow(std::sin(pi * x), 4); };
  auto f2 = [](double x) {
    const double s = std::sin(pi * x), c = std::cos(pi * x);
    return 4.0 * pi * pi * s * s * (3.0 * c * c - s * s);
  };
  return A * (f2(x2) * f(x3) + f(x2) * f2(x3));
}

std::array<Eigen::MatrixXd, 3> zero_grid(const FlowSetup& s) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(long(s.cs.nodes()), long(s.omega_nodes()));
  return {z, z, z};
}

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(TangentialData, CurlOfStreamIsLaplacian) {
  const auto& cs = setup(420).cs;
  TangentialData h;
  h.stream = wall_flat_bump(0.3);
  for (double x2 : {0.1, 0.37, 0.5, 0.81})
    for (double x3 : {0.05, 0.42, 0.77})
      EXPECT_NEAR(h.curl(cs, x2, x3), bump_laplacian(0.3, x2, x3), 1e-12);
  EXPECT_LT(tangential_compatibility(h, cs), 1e-12);
  h.stream.terms.push_back({1, 0, 1e-3});
  EXPECT_GT(tangential_compatibility(h, cs), 1e-4);
}

TEST(Kappa, EntranceValues) {
  const auto& s = setup(420);
  const long nc = long(s.cs.nodes());
  const std::array<Eigen::VectorXd, 3> zero{Eigen::VectorXd::Zero(nc), Eigen::VectorXd::Zero(nc),
                                            Eigen::VectorXd::Zero(nc)};
  BeltramiProblem p;
  EXPECT_EQ(kappa_boundary(s, p, zero).cwiseAbs().maxCoeff(), 0.0);
  p.h.potential = wall_flat_bump(0.01);
  EXPECT_LT(kappa_boundary(s, p, zero).cwiseAbs().maxCoeff(), 1e-18);

  // At v = 0 without a force perturbation the entrance state is the background: rho0 u0 = 0.5.
  p.h = {};
  p.h.stream = wall_flat_bump(0.01);
  const Eigen::VectorXd k = kappa_boundary(s, p, zero);
  for (long c = 0; c < nc; ++c)
    EXPECT_NEAR(k[c], p.epsilon * bump_laplacian(0.01, s.cs.x2(std::size_t(c)), s.cs.x3(std::size_t(c))) / 0.5,
                1e-15);

  auto back = zero;
  back[0].setConstant(-1.0);
  expect_error(ErrorKind::stagnation, [&] { kappa_boundary(s, p, back); });
}

TEST(Transport, AxialFlowCarriesEntranceValues) {
  const auto& s = setup(420);
  auto v = zero_grid(s);
  for (long i = 0; i < v[0].cols(); ++i) v[0].col(i).setConstant(0.05 * std::sin(pi * s.grid.x(std::size_t(i))));
  Eigen::VectorXd k0(long(s.cs.nodes()));
  for (std::size_t c = 0; c < s.cs.nodes(); ++c) k0[long(c)] = std::cos(pi * s.cs.x2(c)) * std::cos(2 * pi * s.cs.x3(c));
  const Eigen::MatrixXd k = solve_transport(s, v, k0);
  for (long i = 0; i < k.cols(); ++i) EXPECT_EQ((k.col(i) - k0).cwiseAbs().maxCoeff(), 0.0) << i;
}

namespace {

// Max over 50 nodes of the exit slice of |kappa - kappa0(foot)|, with the foot found by a backward RK4
// on the analytic field (2000 steps) and kappa0 evaluated in closed form.
double streamline_defect(std::size_t n_cross) {
  auto gas = make_gas(2.0, 1.0, 0.5);
  auto force = make_admissible_force(gas, -1.0, 1.0);
  const FlowSetup s = make_flow_setup(gas, force, 420, build_rectangle(1.0, 1.0, n_cross, n_cross), 4);
  auto vel = [&](double x1, double x2, double x3) {
    const double w = 1.0 + 0.5 * std::sin(pi * x1);
    return std::array<double, 3>{0.02 * std::cos(pi * x2) * std::cos(pi * x3),
                                 0.01 * w * std::sin(2 * pi * x2) * std::cos(pi * x3),
                                 0.01 * w * std::cos(pi * x2) * std::sin(2 * pi * x3)};
  };
  auto v = zero_grid(s);
  for (std::size_t i = 0; i < s.omega_nodes(); ++i)
    for (std::size_t c = 0; c < s.cs.nodes(); ++c) {
      const auto u = vel(s.grid.x(i), s.cs.x2(c), s.cs.x3(c));
      for (int j = 0; j < 3; ++j) v[std::size_t(j)](long(c), long(i)) = u[std::size_t(j)];
    }
  auto kap0 = [](double x2, double x3) { return std::cos(pi * x2) * std::cos(2 * pi * x3) + 0.5 * std::cos(pi * x3); };
  Eigen::VectorXd k0(long(s.cs.nodes()));
  for (std::size_t c = 0; c < s.cs.nodes(); ++c) k0[long(c)] = kap0(s.cs.x2(c), s.cs.x3(c));
  TransportDiagnostics diag;
  const Eigen::MatrixXd k = solve_transport(s, v, k0, 16, 1e-8, 1, &diag);
  EXPECT_EQ(diag.wall_excursion, 0.0);

  std::vector<double> xs(s.bg.grid.nodes());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = s.bg.grid.x(i);
  auto rhs = [&](double x1, double x2, double x3) {
    const auto [s0, w] = detail::cubic_stencil(xs, x1);
    double ub = 0.0;
    for (std::size_t q = 0; q < 4; ++q) ub += w[q] * s.bg.u(0, long(s0 + q));
    const auto u = vel(x1, x2, x3);
    return std::array<double, 2>{u[1] / (ub + u[0]), u[2] / (ub + u[0])};
  };
  const AxialGrid g = s.omega();
  const int steps = 2000;
  const double dx = -(g.x1 - g.x0) / steps;
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, s.cs.nodes() - 1);
  double worst = 0.0;
  for (int line = 0; line < 50; ++line) {
    const std::size_t c = pick(rng);
    double x1 = g.x1, x2 = s.cs.x2(c), x3 = s.cs.x3(c);
    for (int t = 0; t < steps; ++t) {
      const auto k1 = rhs(x1, x2, x3);
      const auto k2 = rhs(x1 + dx / 2, x2 + dx / 2 * k1[0], x3 + dx / 2 * k1[1]);
      const auto k3 = rhs(x1 + dx / 2, x2 + dx / 2 * k2[0], x3 + dx / 2 * k2[1]);
      const auto k4 = rhs(x1 + dx, x2 + dx * k3[0], x3 + dx * k3[1]);
      x2 += dx / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      x3 += dx / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
      x1 += dx;
    }
    worst = std::max(worst, std::abs(k(long(c), k.cols() - 1) - kap0(x2, x3)));
  }
  return worst;
}

}  // namespace

TEST(Transport, ConstantAlongIndependentStreamlines) {
  const double coarse = streamline_defect(33), fine = streamline_defect(65);
  EXPECT_LT(coarse, 1e-4);
  EXPECT_LT(fine, 1e-5);
  EXPECT_GE(std::log2(coarse / fine), 3.0);
}

TEST(Transport, ExitingCharacteristicIsGeometryViolation) {
  const auto& s = setup(420);
  auto v = zero_grid(s);
  v[1].setConstant(0.3);
  const Eigen::VectorXd k0 = Eigen::VectorXd::Ones(long(s.cs.nodes()));
  expect_error(ErrorKind::geometry_violation, [&] { solve_transport(s, v, k0); });
}

// Pi* = cos(pi (x1 - L0) / L) q_11 solves Lap Pi = -(pi^2 / L^2 + alpha_11) Pi* with zero end flux.
TEST(Pi, ManufacturedModeConverges) {
  std::vector<double> err;
  for (std::size_t n : {105, 210, 420}) {
    const auto& s = setup(n, 4);
    const auto& vb = bases();
    const AxialGrid g = s.omega();
    const double L = g.x1 - g.x0, w = pi / L;
    const long k = vb.dirichlet.find(1, 1);
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(long(vb.dirichlet.size()), long(g.nodes()));
    for (std::size_t i = 0; i < g.nodes(); ++i) load(k, long(i)) = -(w * w + vb.dirichlet.eigenvalue(std::size_t(k))) * std::cos(w * (g.x(i) - g.x0));
    const Eigen::MatrixXd c = solve_pi_modes(s, vb, load);
    double e = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) e = std::max(e, std::abs(c(k, long(i)) - std::cos(w * (g.x(i) - g.x0))));
    EXPECT_LT(c.norm() - c.row(k).norm(), 1e-14);
    const Eigen::MatrixXd c1 = FdOperator(g, 1, 4).apply(c);
    EXPECT_LT(std::abs(c1(k, 0)), 1e-8);
    EXPECT_LT(std::abs(c1(k, long(g.nodes()) - 1)), 1e-8);
    err.push_back(e);
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 2.0);
  EXPECT_GE(std::log2(err[1] / err[2]), 2.0);
  EXPECT_LT(err[2], 1e-8);
}

TEST(Pi, ZeroFluxGivesZero) {
  const auto& s = setup(420);
  const PiSolution r = solve_pi(s, bases(), zero_grid(s));
  EXPECT_EQ(r.coef.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pi, EndCircleSlopeIsCompatibilityError) {
  const auto& s = setup(420);
  auto g = zero_grid(s);
  for (std::size_t i = 0; i < s.omega_nodes(); ++i)
    for (std::size_t c = 0; c < s.cs.nodes(); ++c) g[1](long(c), long(i)) = (s.grid.x(i) - s.grid.x0) * s.cs.x2(c);
  expect_error(ErrorKind::compatibility, [&] { solve_pi(s, bases(), g); });
}

TEST(VectorPotential, ModeProblemMatchesClosedForm) {
  // p'' - p = x with p'(-1) = p'(1) = 0: p = sinh(x) / cosh(1) - x.
  const AxialGrid g(-1.0, 1.0, 560);
  Eigen::MatrixXd load(1, long(g.nodes()));
  for (std::size_t i = 0; i < g.nodes(); ++i) load(0, long(i)) = g.x(i);
  const Eigen::MatrixXd p = mode_bvp_solve_all(g, {1.0}, load, ModeBc::neumann_neumann);
  for (std::size_t i = 0; i < g.nodes(); ++i)
    EXPECT_NEAR(p(0, long(i)), std::sinh(g.x(i)) / std::cosh(1.0) - g.x(i), 1e-10);
}

namespace {

// u* = (q_11, sin(pi (x1 - L0) / L) e_j) with e_j the curl-type vector mode (1, 1); f = -Lap u*.
struct Manufactured {
  long kq, ke;
  double alpha, beta, w;
  std::array<Eigen::MatrixXd, 3> f;
};

Manufactured manufactured(const FlowSetup& s, const VorticalBases& vb) {
  Manufactured m;
  m.kq = vb.dirichlet.find(1, 1);
  m.ke = vb.vec.find(1, 1, 1);
  m.alpha = vb.dirichlet.eigenvalue(std::size_t(m.kq));
  m.beta = vb.vec.eigenvalue(std::size_t(m.ke));
  const AxialGrid g = s.omega();
  m.w = pi / (g.x1 - g.x0);
  m.f = zero_grid(s);
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    const double sn = std::sin(m.w * (g.x(i) - g.x0));
    m.f[0].col(long(i)) = m.alpha * vb.dirichlet.table().col(m.kq);
    m.f[1].col(long(i)) = (m.beta + m.w * m.w) * sn * vb.vec.table(0).col(m.ke);
    m.f[2].col(long(i)) = (m.beta + m.w * m.w) * sn * vb.vec.table(1).col(m.ke);
  }
  return m;
}

}  // namespace

TEST(VectorPotential, ZeroSourceGivesZero) {
  const auto& s = setup(420);
  const auto u = vector_potential(s, bases(), zero_grid(s));
  EXPECT_EQ(u.p.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(u.c.cwiseAbs().maxCoeff(), 0.0);
}

TEST(VectorPotential, RecoversManufacturedPotential) {
  const auto& s = setup(420);
  const auto& vb = bases();
  const auto m = manufactured(s, vb);
  const auto u = vector_potential(s, vb, m.f);
  const AxialGrid g = s.omega();
  double ep = 0.0, ec = 0.0;
  for (std::size_t i = 0; i < g.nodes(); ++i) {
    ep = std::max(ep, std::abs(u.p(m.kq, long(i)) - 1.0));
    ec = std::max(ec, std::abs(u.c(m.ke, long(i)) - std::sin(m.w * (g.x(i) - g.x0))));
  }
  EXPECT_LT(ep, 1e-10);
  EXPECT_LT(ec, 1e-8);

  const VelocityGrid v = curl_velocity(s, vb, u.p, u.c, true);
  double div = 0.0, curl = 0.0, scale = 0.0;
  for (long i = 2; i + 2 < long(g.nodes()); ++i)
    for (long c = 0; c < long(s.cs.nodes()); ++c) {
      div = std::max(div, std::abs(v.divergence(c, i)));
      const auto w = v.curl(c, i);
      for (int j = 0; j < 3; ++j) {
        curl = std::max(curl, std::abs(w[std::size_t(j)] - m.f[std::size_t(j)](c, i)));
        scale = std::max(scale, std::abs(m.f[std::size_t(j)](c, i)));
      }
    }
  EXPECT_LT(div, 1e-9);
  EXPECT_LT(curl, 1e-6 * scale);
}

TEST(VectorPotential, DivergentSourceIsInvalid) {
  const auto& s = setup(420);
  const auto& vb = bases();
  auto f = zero_grid(s);
  for (std::size_t i = 0; i < s.omega_nodes(); ++i)
    f[0].col(long(i)) = (s.grid.x(i) - s.grid.x0) * vb.dirichlet.table().col(vb.dirichlet.find(1, 1));
  expect_error(ErrorKind::invalid_source, [&] { vector_potential(s, vb, f); });
}

TEST(DivCurl, HarmonicModeClosedForm) {
  EXPECT_NEAR(harmonic_mode(1.0, 1.0, -1.0, 1.0, -1.0), 1.0, 1e-12);
  EXPECT_NEAR(harmonic_mode(1.0, 1.0, -1.0, 1.0, 1.0, 1), 0.0, 1e-12);
  // cosh(x - 1) / cosh(2) solves s'' = s with s(-1) = 1, s'(1) = 0.
  for (double x : {-1.0, -0.3, 0.4, 1.0}) {
    EXPECT_NEAR(harmonic_mode(1.0, 1.0, -1.0, 1.0, x), std::cosh(x - 1.0) / std::cosh(2.0), 1e-14);
    EXPECT_NEAR(harmonic_mode(4.0, 1.0, -1.0, 1.0, x, 2), 4.0 * harmonic_mode(4.0, 1.0, -1.0, 1.0, x), 1e-12);
  }
  EXPECT_EQ(harmonic_mode(0.0, 0.7, -1.0, 1.0, 0.3), 0.7);
}

TEST(DivCurl, SolvesManufacturedProblem) {
  const auto& s = setup(420);
  const auto& vb = bases();
  const auto m = manufactured(s, vb);
  const auto& B = vb.neumann;
  const long kb = B.find(1, 2);
  // g = (curl u*)'(L0) + 1e-3 grad b_12, where (curl u*)'(L0) = (d3 q - w e3, w e2 - d2 q).
  const Eigen::VectorXd g2 = vb.dirichlet.table(Deriv::d3).col(m.kq) - m.w * vb.vec.table(1).col(m.ke) +
                             1e-3 * B.table(Deriv::d2).col(kb);
  const Eigen::VectorXd g3 = m.w * vb.vec.table(0).col(m.ke) - vb.dirichlet.table(Deriv::d2).col(m.kq) +
                             1e-3 * B.table(Deriv::d3).col(kb);
  const DivCurlSolution r = solve_divcurl(s, vb, m.f, g2, g3);
  EXPECT_LT((r.stream - 1e-3 * Eigen::VectorXd::Unit(r.stream.size(), kb)).cwiseAbs().maxCoeff(), 1e-8);

  VelocityField f = zero_velocity(s, vb);
  f.p = r.u.p;
  f.c = r.u.c;
  f.phi = r.phi;
  const VelocityGrid v = evaluate_velocity(s, vb, f, true);
  const long n = long(s.omega_nodes());
  double div = 0.0, slip = 0.0, trace = 0.0, exit = 0.0;
  for (long i = 0; i < n; ++i)
    for (long c = 0; c < long(s.cs.nodes()); ++c) div = std::max(div, std::abs(v.divergence(c, i)));
  for (std::size_t c : s.cs.boundary_nodes()) {
    const auto nn = s.cs.normal(c);
    for (long i = 0; i < n; ++i)
      slip = std::max(slip, std::abs(nn[0] * v.v[1](long(c), i) + nn[1] * v.v[2](long(c), i)));
  }
  for (long c = 0; c < long(s.cs.nodes()); ++c) {
    trace = std::max({trace, std::abs(v.v[1](c, 0) - g2[c]), std::abs(v.v[2](c, 0) - g3[c])});
    exit = std::max(exit, std::abs(v.v[0](c, n - 1)));
  }
  EXPECT_LT(div, 1e-8);
  EXPECT_LT(slip, 1e-8);
  EXPECT_LT(trace, 1e-8);
  EXPECT_LT(exit, 1e-8);
}

TEST(DivCurl, RotationalEntranceDataIsInconsistent) {
  const auto& s = setup(420);
  const auto& cs = s.cs;
  const CosineSeries b = wall_flat_bump(1.0);
  Eigen::VectorXd g2(long(cs.nodes())), g3(long(cs.nodes()));
  for (std::size_t c = 0; c < cs.nodes(); ++c) {
    g2[long(c)] = -b.eval(cs, cs.x2(c), cs.x3(c), Deriv::d3);
    g3[long(c)] = b.eval(cs, cs.x2(c), cs.x3(c), Deriv::d2);
  }
  expect_error(ErrorKind::data_inconsistency, [&] { solve_divcurl(s, bases(), zero_grid(s), g2, g3); });
}

TEST(BeltramiFixedPoint, WithoutVorticityMatchesPotentialSolver) {
  const auto& s = setup(420);
  BeltramiProblem bp = curl_problem(1e-3);
  bp.h = {};
  const BeltramiState b = beltrami_fixed_point(s, bases(), bp);
  PotentialProblem pp;
  pp.epsilon = bp.epsilon;
  pp.phi0 = bp.phi0;
  const PotentialSolution ps = fixed_point_solve(s, pp);
  EXPECT_EQ(b.kappa.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(b.pi_max, 0.0);
  EXPECT_EQ(b.vorticity_max, 0.0);
  double d = 0.0;
  for (int j = 0; j < 3; ++j) d = std::max(d, (b.velocity[j] - ps.velocity[j]).cwiseAbs().maxCoeff());
  EXPECT_LT(d, 1e-10);
  EXPECT_LT((b.M2 - ps.M2).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BeltramiFixedPoint, ContractsAndSolvesFullSystem) {
  const BeltramiState& st = solved(1e-3);
  ASSERT_GE(st.iterations(), 2u);
  for (std::size_t k = 1; k < st.history.size(); ++k) EXPECT_LE(st.history[k].ratio, 0.5) << k;
  EXPECT_LE(st.max_strong, st.ball_radius);
  const double bar = 10.0 * st.residual_tolerance;
  EXPECT_LT(st.continuity_l2, bar);
  EXPECT_LT(st.curl_l2, bar);
  EXPECT_LT(st.transport_l2, bar);
  EXPECT_LT(st.divergence_curl, 1e-9);
  EXPECT_LT(st.bernoulli_error, 1e-12);
  EXPECT_LT(st.slip, 1e-8);
  EXPECT_LT(st.wall_neumann, 1e-8);
  EXPECT_LT(st.entrance_residual, 1e-8);
  EXPECT_LT(st.kappa_wall, 1e-12);
  EXPECT_LT(st.pi_wall, 1e-8);
  EXPECT_LT(st.pi_end_flux, 1e-8);
  EXPECT_LT(st.source_compatibility, 1e-8);
  EXPECT_GT(st.vorticity_max, 1e-6);
  EXPECT_GT(st.kappa_interior, 1e-6);
  EXPECT_EQ(st.transport.wall_excursion, 0.0);
  EXPECT_GT(st.min_mach_slope, 0.0);
}

TEST(BeltramiFixedPoint, KappaConstantAlongTracedStreamlines) {
  const auto& s = setup(420);
  const auto& vb = bases();
  const BeltramiState& st = solved(1e-3);
  const oracle::PointVelocity u(s, vb, st.field);
  const Eigen::VectorXd k0 = vb.neumann.analyze(st.kappa.col(0));
  const Eigen::VectorXd k1 = vb.neumann.analyze(st.kappa.col(st.kappa.cols() - 1));
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  double worst = 0.0;
  for (int line = 0; line < 10; ++line) {
    const double x2 = U(rng), x3 = U(rng);
    const auto end = u.trace(x2, x3, 105);
    worst = std::max(worst, std::abs(oracle::neumann_point(vb.neumann, k1, end[0], end[1]) -
                                     oracle::neumann_point(vb.neumann, k0, x2, x3)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(BeltramiFixedPoint, SonicShiftScalesLinearly) {
  const double a = solved(1e-3).sonic.sup_xi, b = solved(5e-4).sonic.sup_xi;
  ASSERT_GT(b, 0.0);
  EXPECT_NEAR(a / b, 2.0, 0.5);
}

TEST(BeltramiFixedPoint, ZeroAmplitudeGivesBackground) {
  const BeltramiState st = beltrami_fixed_point(setup(420), bases(), curl_problem(0.0));
  EXPECT_EQ(st.iterations(), 1u);
  EXPECT_EQ(st.sonic.sup_xi, 0.0);
  EXPECT_LE(st.sonic.mach_residual, 1e-8);
  EXPECT_EQ(st.vorticity_max, 0.0);
  for (int j = 1; j < 3; ++j) EXPECT_EQ(st.velocity[j].cwiseAbs().maxCoeff(), 0.0);
}

TEST(BeltramiFixedPoint, ErrorKinds) {
  const auto& s = setup(420);
  const auto& vb = bases();
  expect_error(ErrorKind::validation, [&] { beltrami_fixed_point(s, vb, curl_problem(0.1)); });
  BeltramiProblem p = curl_problem(1e-3);
  p.h.stream.terms.push_back({1, 0, 1e-3});
  expect_error(ErrorKind::compatibility, [&] { beltrami_fixed_point(s, vb, p); });
  expect_error(ErrorKind::divergence, [&] { beltrami_fixed_point(s, vb, curl_problem(1e-3, 0.05)); });
}
