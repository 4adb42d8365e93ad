#ifndef MOC3D_SOLVER_HPP
#define MOC3D_SOLVER_HPP

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "moc3d/sched.hpp"
#include "moc3d/trace3d.hpp"

namespace moc3d {

struct AttenuationResult {
  double psi_out;
  double delta_psi;
};

// Flat-source attenuation across one segment. Below sigma_t * s = 1e-8 a
// second-order expansion replaces the exponential.
AttenuationResult attenuate_segment(double psi_in, double q, double sigma_t,
                                    double length);

// 1 - exp(-x) by linear interpolation on a uniform grid, falling back to the
// intrinsic beyond the tabulated range.
class ExpTable {
 public:
  static constexpr double kMaxError = 1e-7;
  ExpTable();
  double operator()(double x) const;
  double spacing() const { return h_; }

 private:
  double h_;
  double inv_h_;
  double x_max_;
  std::vector<double> values_;
};

// Exact order-independent accumulator: values are rounded to multiples of
// 2^-72 and summed as 128-bit integers.
class FixedSum {
 public:
  static constexpr int kFractionBits = 72;
  using Raw = __int128;
  static Raw to_raw(double x);
  static double to_double(Raw r);
};

struct SolverOptions {
  double tol_k = 1e-5;
  double tol_src = 1e-5;
  int max_iterations = 1000;
  bool deterministic = true;
  int num_workers = 1;
  bool exp_table = false;
  // Incoming angular flux on vacuum faces, per face and group. Absent means
  // zero.
  std::optional<std::array<std::vector<double>, kNumFaces>> boundary_source;
};

struct BalanceTally {
  double production = 0.0;  // sum V nu_sigma_f phi
  double absorption = 0.0;
  double leakage = 0.0;
  double k_eff = 1.0;
  // production / k - (absorption + leakage), relative to production / k
  double relative_residual() const;
};

struct IterationRecord {
  int iteration = 0;
  double k_eff = 0.0;
  double delta_k = 0.0;
  double source_change = 0.0;
};

struct SolveResult {
  double k_eff = 1.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> scalar_flux;  // [fsr * G + g]
  std::vector<double> volumes;      // track-based, per FSR
  std::vector<IterationRecord> history;
  BalanceTally balance;
  double sweep_seconds = 0.0;
  double preload_seconds = 0.0;
  std::size_t preload_bytes = 0;
  std::vector<std::size_t> worker_segments;
};

// Per-FSR reduced source Q[j * G + g] from scalar flux and eigenvalue.
std::vector<double> compute_source(const ExtrudedGeometry& geom,
                                   std::span<const double> scalar_flux, double k);

// Transport problem bound to a fixed tracking and plan.
class TransportSolver {
 public:
  TransportSolver(const TraceContext& ctx, WorkPlan plan, SolverOptions options);

  const std::vector<double>& volumes() const { return volumes_; }
  const WorkPlan& plan() const { return plan_; }
  const ExplicitStore& store() const { return store_; }

  // One transport sweep with the given reduced source. Updates the scalar
  // flux and the boundary angular fluxes; returns the vacuum leakage.
  double sweep(std::span<const double> source, std::vector<double>& scalar_flux);

  // New eigenvalue from old and new fission production.
  static double update_keff(double k_old, double production_old, double production_new);

  double production(std::span<const double> scalar_flux) const;

  SolveResult solve_eigenvalue();
  // Fixed-source solve (no fission) with optional volumetric source
  // Q_ext[j * G + g] per steradian. Iterates until the RMS relative flux change
  // drops below tol_src.
  SolveResult solve_fixed_source(std::span<const double> external_source = {});

 private:
  struct Tally;
  void compute_volumes();
  void scale_boundary(double factor);

  const TraceContext& ctx_;
  WorkPlan plan_;
  SolverOptions opts_;
  int groups_;
  ExplicitStore store_;
  ExpTable table_;
  std::vector<double> sigma_t_;  // [fsr * G + g]
  std::vector<double> volumes_;
  std::vector<double> psi_in_;   // incoming flux per (track, dir, group)
  std::vector<double> psi_next_;
  std::vector<char> fed_;        // incoming slot written by a partner track
  std::vector<std::size_t> worker_segments_;
  double preload_seconds_ = 0.0;
  double sweep_seconds_ = 0.0;
};

}  // namespace moc3d

#endif
