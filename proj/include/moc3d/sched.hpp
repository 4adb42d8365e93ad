#ifndef MOC3D_SCHED_HPP
#define MOC3D_SCHED_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "moc3d/trace3d.hpp"

namespace moc3d {

enum class SweepMode { Otf, Exp, Hybrid };

const char* to_string(SweepMode mode);
SweepMode parse_sweep_mode(const std::string& text);

struct WorkPlan {
  std::vector<TrackIndex3D> order;
  std::vector<std::size_t> segment_counts;  // parallel to `order`
  std::size_t chunk_size = 4096;
  SweepMode mode = SweepMode::Otf;
  std::vector<TrackIndex3D> preload_set;
  std::size_t memory_budget = 0;
  double budget_fraction = 0.8;
};

// All 3D tracks in the order of the nested (2D track, polar, stack index)
// loops.
std::vector<TrackIndex3D> pack_track_indices(const StackSet& stacks);

std::size_t estimate_track_memory(const TraceContext& ctx, const TrackIndex3D& tid);

struct Partition {
  std::vector<std::size_t> preload;  // positions into the input
  std::vector<std::size_t> otf;
};

// Sorts by estimate (descending, stable) and preloads the longest prefix whose
// cumulative estimate stays within fraction * budget.
Partition partition_exp_otf(std::span<const std::size_t> estimates,
                            std::size_t budget, double fraction);

// Descending sort by count (stable), then every odd chunk reversed. Returns
// the permutation as positions into the input.
std::vector<std::size_t> serpentine_permutation(std::span<const std::size_t> counts,
                                                std::size_t chunk_size);

std::vector<TrackIndex3D> serpentine_order(std::span<const TrackIndex3D> tids,
                                           std::span<const std::size_t> counts,
                                           std::size_t chunk_size);

// Total cost assigned to each worker by the grid-stride walk over `counts`.
std::vector<std::size_t> worker_loads(std::span<const std::size_t> counts,
                                      int num_workers);

struct PlanOptions {
  SweepMode mode = SweepMode::Otf;
  std::size_t chunk_size = 4096;
  std::size_t memory_budget = 0;
  double budget_fraction = 0.8;
  bool load_balance = true;
};

// Packs, estimates, partitions and orders all 3D tracks. In hybrid mode the
// preloaded tracks come first in the order.
WorkPlan build_plan(const TraceContext& ctx, const PlanOptions& options);

// Runs kernel(position, worker) for every plan position on `num_workers`
// threads; worker w handles positions w, w + W, w + 2W, ... Failures are
// rethrown as ExecutionError naming the track triple.
void execute(std::span<const TrackIndex3D> order,
             const std::function<void(std::size_t, int)>& kernel, int num_workers);

}  // namespace moc3d

#endif
