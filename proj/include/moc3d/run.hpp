#ifndef MOC3D_RUN_HPP
#define MOC3D_RUN_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "moc3d/sched.hpp"
#include "moc3d/solver.hpp"

namespace moc3d {

struct RunConfig {
  std::string geometry_path;
  int num_azim = 16;
  double azim_spacing = 0.1;
  int num_polar = 3;
  double axial_spacing = 0.5;
  SweepMode mode = SweepMode::Otf;
  std::size_t memory_budget_bytes = 0;  // 0: not set
  double budget_fraction = 0.8;
  std::size_t chunk_size = 4096;
  int num_workers = 1;
  bool deterministic = true;
  double tol_k = 1e-5;
  double tol_src = 1e-5;
  int max_iterations = 1000;
  std::string output_dir = "output";
  bool load_balance = true;
  bool exp_table = false;

  bool operator==(const RunConfig&) const = default;
};

// Paths in the file are resolved against the directory of `path`.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& yaml_text, const std::string& base_dir = ".");
void validate_config(const RunConfig& config);
// Every field, with doubles printed to round-trip exactly.
void write_config(const RunConfig& config, std::ostream& os);

// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& contents);

struct RunReport {
  SolveResult result;
  int num_fsrs = 0;
  std::size_t num_tracks2d = 0;
  unsigned long long num_tracks3d = 0;
  std::size_t num_segments3d = 0;
  std::vector<std::pair<std::string, double>> timings;
};

// Full pipeline: geometry, tracking, plan, eigenvalue solve and reports in
// config.output_dir. Does not throw on non-convergence; check
// report.result.converged.
RunReport run(const RunConfig& config, bool dump_tracks = false);

// Geometry and tracking only, with optional debug dumps.
RunReport trace_only(const RunConfig& config, bool dump_tracks);

}  // namespace moc3d

#endif
