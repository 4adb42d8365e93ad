#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "moc3d/error.hpp"
#include "moc3d/sched.hpp"
#include "moc3d/solver.hpp"
#include "support/oracles.hpp"

using namespace moc3d;

namespace {

constexpr double kPi = std::numbers::pi;

std::string kinf_yaml(double nu_sigma_f) {
  return R"(
materials:
  mix: {sigma_t: [0.2], nu_sigma_f: [)" + std::to_string(nu_sigma_f) + R"(], chi: [1.0]}
cells:
  box: {materials: mix}
lattice: {pitch: 10.0, layout: [[box]]}
axial: {planes: [0.0, 10.0]}
boundary: {default: reflective}
)";
}

SolveResult solve(const oracle::Problem& p, SweepMode mode, SolverOptions so,
                  std::size_t budget = 0) {
  auto ctx = p.ctx();
  PlanOptions po;
  po.mode = mode;
  po.memory_budget = budget;
  auto plan = build_plan(ctx, po);
  TransportSolver solver(ctx, plan, so);
  return solver.solve_eigenvalue();
}

long double exact_psi(long double psi, long double q, long double sigma, long double s) {
  long double e = std::exp(-sigma * s);
  return psi * e + q / sigma * (1.0L - e);
}

}  // namespace

TEST(Attenuation, ZeroLengthIsIdentity) {
  auto r = attenuate_segment(0.7, 0.3, 1.5, 0.0);
  EXPECT_EQ(r.psi_out, 0.7);
  EXPECT_EQ(r.delta_psi, 0.0);
}

TEST(Attenuation, EquilibriumIsFixedPoint) {
  auto r = attenuate_segment(0.25, 0.5, 2.0, 3.0);
  EXPECT_NEAR(r.psi_out, 0.25, 1e-15);
  EXPECT_NEAR(r.delta_psi, 0.0, 1e-15);
}

TEST(Attenuation, PureDecay) {
  auto r = attenuate_segment(1.0, 0.0, 2.0, 0.5);
  EXPECT_NEAR(r.psi_out, 0.3678794412, 1e-10);
  EXPECT_EQ(r.delta_psi, 1.0 - r.psi_out);
}

TEST(Attenuation, DeltaIsExactDifference) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int k = 0; k < 1000; ++k) {
    double psi = u(rng), q = u(rng), sig = u(rng), s = u(rng);
    auto r = attenuate_segment(psi, q, sig, s);
    EXPECT_EQ(r.delta_psi, psi - r.psi_out);
    EXPECT_GE(r.psi_out, 0.0);
    EXPECT_NEAR(r.psi_out, static_cast<double>(exact_psi(psi, q, sig, s)), 1e-14);
  }
}

TEST(Attenuation, BranchesAgreeAtSwitchPoint) {
  const double psi = 0.8, q = 0.3, sigma = 1.0;
  for (double tau : {1e-8 * (1.0 - 1e-6), 1e-8, 1e-8 * (1.0 + 1e-6), 1e-10, 1e-7}) {
    auto r = attenuate_segment(psi, q, sigma, tau);
    EXPECT_NEAR(r.psi_out, static_cast<double>(exact_psi(psi, q, sigma, tau)), 1e-12);
  }
  auto below = attenuate_segment(psi, q, sigma, std::nextafter(1e-8, 0.0));
  auto above = attenuate_segment(psi, q, sigma, 1e-8);
  EXPECT_NEAR(below.psi_out, above.psi_out, 1e-12);
}

TEST(ExpTable, ErrorWithinBound) {
  ExpTable table;
  double worst = 0.0;
  for (int k = 0; k <= 400000; ++k) {
    double x = 25.0 * k / 400000.0;
    worst = std::max(worst, std::abs(table(x) + std::expm1(-x)));
  }
  EXPECT_LE(worst, ExpTable::kMaxError);
}

TEST(FixedSum, OrderIndependent) {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(5000);
  for (auto& x : v) x = d(rng) * (rng() % 2 ? 1.0 : -1.0);
  auto sum = [&] {
    FixedSum::Raw r = 0;
    for (double x : v) r += FixedSum::to_raw(x);
    return FixedSum::to_double(r);
  };
  double first = sum();
  for (int t = 0; t < 5; ++t) {
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(sum(), first);
  }
  EXPECT_EQ(FixedSum::to_double(FixedSum::to_raw(0.75)), 0.75);
  EXPECT_EQ(FixedSum::to_double(FixedSum::to_raw(-3.0e6)), -3.0e6);
}

TEST(Source, WorkedValues) {
  auto g = oracle::make_geometry(R"(
materials:
  f: {sigma_t: [1.0], nu_sigma_f: [0.3], chi: [1.0]}
  s: {sigma_t: [1.0], sigma_s: [[0.5]]}
cells:
  a: {materials: f}
  b: {materials: s}
lattice: {pitch: 1.0, layout: [[a, b]]}
axial: {planes: [0.0, 1.0]}
)");
  std::vector<double> zero(2, 0.0);
  auto q0 = compute_source(g, zero, 1.0);
  EXPECT_EQ(q0[0], 0.0);
  EXPECT_EQ(q0[1], 0.0);

  int fis = g.fsr_at(g.find_radial_region(0.5, 0.5), 0.5);
  int sca = g.fsr_at(g.find_radial_region(1.5, 0.5), 0.5);
  std::vector<double> f(2);
  f[static_cast<std::size_t>(fis)] = 1.0;
  f[static_cast<std::size_t>(sca)] = 2.0;
  auto q = compute_source(g, f, 1.0);
  EXPECT_NEAR(q[static_cast<std::size_t>(fis)], 0.3 / (4.0 * kPi), 1e-15);
  EXPECT_NEAR(q[static_cast<std::size_t>(sca)], 1.0 / (4.0 * kPi), 1e-15);
  EXPECT_THROW(compute_source(g, f, 0.0), EigenvalueError);
  EXPECT_THROW(compute_source(g, f, -1.0), EigenvalueError);
}

TEST(Eigenvalue, UpdateFixedPoint) {
  EXPECT_EQ(TransportSolver::update_keff(1.234, 5.0, 5.0), 1.234);
  EXPECT_THROW(TransportSolver::update_keff(1.0, 5.0, 0.0), EigenvalueError);
}

TEST(Eigenvalue, InfiniteMedium) {
  for (auto [azim, spacing, polar, axial] :
       {std::tuple{4, 2.0, 1, 2.0}, std::tuple{8, 0.5, 2, 1.0}, std::tuple{16, 0.3, 3, 0.5}}) {
    auto p = oracle::make_problem(kinf_yaml(0.3), azim, spacing, polar, axial);
    auto r = solve(*p, SweepMode::Otf, {});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.k_eff, 1.5, 1e-5);
    EXPECT_LE(r.iterations, 50);
    double lo = *std::min_element(r.scalar_flux.begin(), r.scalar_flux.end());
    double hi = *std::max_element(r.scalar_flux.begin(), r.scalar_flux.end());
    EXPECT_LE(hi - lo, 1e-9 * hi);
  }
}

TEST(Eigenvalue, FlatFluxAcrossRegionsInInfiniteMedium) {
  // Same material in a lattice of pins: flux stays spatially flat.
  auto p = oracle::make_problem(R"(
materials:
  m: {sigma_t: [0.5], sigma_s: [[0.3]], nu_sigma_f: [0.25], chi: [1.0]}
cells:
  pin: {radii: [0.4], materials: [m, m]}
lattice: {pitch: 1.0, layout: [[pin, pin], [pin, pin]]}
axial: {planes: [0.0, 0.7, 2.0]}
boundary: {default: reflective}
)", 8, 0.1, 2, 0.2);
  SolverOptions so;
  so.tol_k = 1e-10;
  so.tol_src = 1e-10;
  auto r = solve(*p, SweepMode::Otf, so);
  EXPECT_NEAR(r.k_eff, 0.25 / 0.2, 1e-9);
  double hi = *std::max_element(r.scalar_flux.begin(), r.scalar_flux.end());
  for (double v : r.scalar_flux) EXPECT_NEAR(v, hi, 1e-9 * hi);
}

TEST(Eigenvalue, DoublingProductionDoublesK) {
  auto a = oracle::make_problem(oracle::pin_cell_yaml(), 8, 0.2, 2, 0.4);
  std::string doubled = oracle::pin_cell_yaml();
  doubled.replace(doubled.find("[0.0067, 0.1241]"), 16, "[0.0134, 0.2482]");
  auto b = oracle::make_problem(doubled, 8, 0.2, 2, 0.4);
  SolverOptions so;
  so.tol_k = 1e-9;
  so.tol_src = 1e-8;
  so.max_iterations = 5000;
  auto ka = solve(*a, SweepMode::Otf, so).k_eff;
  auto kb = solve(*b, SweepMode::Otf, so).k_eff;
  EXPECT_NEAR(kb, 2.0 * ka, 1e-6);
}

TEST(Eigenvalue, NeutronBalanceOnVacuumLattice) {
  auto p = oracle::make_problem(oracle::pin_lattice_yaml(2, "vacuum"), 8, 0.15, 2, 0.3);
  SolverOptions so;
  so.tol_k = 1e-8;
  so.tol_src = 1e-7;
  auto r = solve(*p, SweepMode::Otf, so);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(std::abs(r.balance.relative_residual()), 1e-4);
  EXPECT_GT(r.balance.leakage, 0.0);
  for (double v : r.scalar_flux) EXPECT_GE(v, 0.0);
}

TEST(Eigenvalue, ModesAgree) {
  auto p = oracle::make_problem(oracle::pin_lattice_yaml(2, "vacuum"), 8, 0.2, 2, 0.4);
  SolverOptions so;
  auto otf = solve(*p, SweepMode::Otf, so);
  auto exp = solve(*p, SweepMode::Exp, so);
  std::size_t total = 0;
  auto ctx = p->ctx();
  for (const auto& tid : pack_track_indices(p->stacks)) total += estimate_track_memory(ctx, tid);
  auto hyb = solve(*p, SweepMode::Hybrid, so, total / 2);
  EXPECT_EQ(otf.iterations, exp.iterations);
  EXPECT_EQ(otf.iterations, hyb.iterations);
  EXPECT_NEAR(otf.k_eff, exp.k_eff, 1e-10);
  EXPECT_NEAR(otf.k_eff, hyb.k_eff, 1e-10);
  EXPECT_GT(hyb.preload_bytes, 0u);
  EXPECT_LE(static_cast<double>(hyb.preload_bytes), 0.8 * static_cast<double>(total / 2));
}

TEST(Eigenvalue, DeterministicAcrossWorkerCounts) {
  auto p = oracle::make_problem(oracle::pin_cell_yaml(), 8, 0.15, 2, 0.3);
  std::vector<SolveResult> runs;
  for (int w : {1, 4, 16}) {
    SolverOptions so;
    so.num_workers = w;
    runs.push_back(solve(*p, SweepMode::Otf, so));
  }
  for (const auto& r : runs) {
    EXPECT_EQ(r.k_eff, runs[0].k_eff);
    EXPECT_EQ(r.iterations, runs[0].iterations);
    EXPECT_EQ(r.scalar_flux, runs[0].scalar_flux);
  }
}

TEST(Eigenvalue, FastModeCloseToDeterministic) {
  auto p = oracle::make_problem(oracle::pin_cell_yaml(), 8, 0.15, 2, 0.3);
  SolverOptions det;
  SolverOptions fast;
  fast.deterministic = false;
  fast.num_workers = 4;
  EXPECT_NEAR(solve(*p, SweepMode::Otf, det).k_eff, solve(*p, SweepMode::Otf, fast).k_eff, 1e-8);
}

TEST(Eigenvalue, ExpTableCloseToIntrinsic) {
  auto p = oracle::make_problem(oracle::pin_cell_yaml(), 8, 0.15, 2, 0.3);
  SolverOptions so;
  so.tol_k = 1e-9;
  so.tol_src = 1e-8;
  so.max_iterations = 5000;
  SolverOptions tab = so;
  tab.exp_table = true;
  EXPECT_NEAR(solve(*p, SweepMode::Otf, so).k_eff, solve(*p, SweepMode::Otf, tab).k_eff, 1e-6);
}

TEST(Eigenvalue, RefinementConverges) {
  SolverOptions so;
  so.tol_k = 1e-8;
  so.tol_src = 1e-7;
  so.max_iterations = 5000;
  std::vector<double> k;
  for (int level = 0; level < 3; ++level) {
    double f = std::pow(2.0, -level);
    auto p = oracle::make_problem(oracle::pin_lattice_yaml(2, "vacuum"), 8 << level, 0.2 * f,
                                  2 + level, 0.4 * f);
    k.push_back(solve(*p, SweepMode::Otf, so).k_eff);
  }
  EXPECT_LT(std::abs(k[2] - k[1]), 1e-3);
  EXPECT_LT(std::abs(k[2] - k[1]), std::abs(k[1] - k[0]));
}

TEST(Eigenvalue, NoConvergenceIsReported) {
  auto p = oracle::make_problem(oracle::pin_cell_yaml(), 8, 0.3, 2, 0.5);
  SolverOptions so;
  so.max_iterations = 1;
  auto r = solve(*p, SweepMode::Otf, so);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.history.size(), 1u);
}

TEST(FixedSource, ZeroSourceVacuumGivesZeroFlux) {
  auto p = oracle::make_problem(oracle::pin_cell_yaml("vacuum"), 8, 0.3, 2, 0.5);
  auto ctx = p->ctx();
  auto plan = build_plan(ctx, {});
  TransportSolver solver(ctx, plan, {});
  auto r = solver.solve_fixed_source();
  for (double v : r.scalar_flux) EXPECT_EQ(v, 0.0);
}

TEST(FixedSource, AbsorberMatchesExponentialIntegral) {
  const double a = 1.0, sigma = 1.0, psi0 = 1.0;
  auto p = oracle::make_problem(R"(
materials:
  absorber: {sigma_t: [1.0]}
cells:
  box: {materials: absorber}
lattice: {widths: [1.0], heights: [1.0], layout: [[box]]}
axial: {planes: [0.0, 1.0]}
boundary: {default: reflective, x_min: vacuum, x_max: vacuum}
)", 32, 0.02, 3, 0.05);
  auto ctx = p->ctx();
  auto plan = build_plan(ctx, {});
  SolverOptions so;
  so.tol_src = 1e-12;
  std::array<std::vector<double>, kNumFaces> bc{};
  bc[static_cast<std::size_t>(Face::XMin)] = {psi0};
  so.boundary_source = bc;
  TransportSolver solver(ctx, plan, so);
  auto r = solver.solve_fixed_source();
  ASSERT_EQ(r.scalar_flux.size(), 1u);
  double expected = 2.0 * kPi * psi0 / (sigma * a) * (0.5 - oracle::expint_n(3, sigma * a));
  EXPECT_NEAR(r.scalar_flux[0], expected, 0.01 * expected);
}

TEST(Sweep, NonFiniteSourceIsReported) {
  auto p = oracle::make_problem(oracle::pin_cell_yaml(), 8, 0.3, 2, 0.5);
  auto ctx = p->ctx();
  auto plan = build_plan(ctx, {});
  TransportSolver solver(ctx, plan, {});
  std::vector<double> source(static_cast<std::size_t>(p->geom.num_fsrs() * 2), 0.1);
  source[3] = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> flux;
  EXPECT_THROW(solver.sweep(source, flux), NumericalError);
}

TEST(Sweep, TrackVolumesSumToDomain) {
  auto p = oracle::make_problem(oracle::pin_lattice_yaml(2, "vacuum"), 8, 0.1, 2, 0.2);
  auto ctx = p->ctx();
  auto plan = build_plan(ctx, {});
  TransportSolver solver(ctx, plan, {});
  double total = 0.0;
  for (double v : solver.volumes()) total += v;
  EXPECT_NEAR(total, p->geom.domain_volume(), 1e-9 * p->geom.domain_volume());
}
