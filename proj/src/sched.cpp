#include "moc3d/sched.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "moc3d/error.hpp"

namespace moc3d {

const char* to_string(SweepMode mode) {
  switch (mode) {
    case SweepMode::Otf: return "otf";
    case SweepMode::Exp: return "exp";
    case SweepMode::Hybrid: return "hybrid";
  }
  return "?";
}

SweepMode parse_sweep_mode(const std::string& text) {
  if (text == "otf") return SweepMode::Otf;
  if (text == "exp") return SweepMode::Exp;
  if (text == "hybrid") return SweepMode::Hybrid;
  throw ConfigError("mode must be one of otf, exp, hybrid (got '" + text + "')");
}

std::vector<TrackIndex3D> pack_track_indices(const StackSet& stacks) {
  std::vector<TrackIndex3D> out;
  out.reserve(stacks.num_tracks());
  for (int t = 0; t < stacks.num_tracks2d(); ++t) {
    for (int n = 0; n < stacks.num_polar(); ++n) {
      int count = stacks.stack(t, n).count;
      for (int i = 0; i < count; ++i) out.push_back({t, n, i});
    }
  }
  return out;
}

std::size_t estimate_track_memory(const TraceContext& ctx, const TrackIndex3D& tid) {
  return count_segments(ctx, tid) * ExplicitStore::kRecordBytes;
}

namespace {

std::vector<std::size_t> descending(std::span<const std::size_t> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return idx;
}

}  // namespace

Partition partition_exp_otf(std::span<const std::size_t> estimates,
                            std::size_t budget, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ExecutionError("budget fraction must lie in (0, 1]");
  }
  const double limit = fraction * static_cast<double>(budget);
  Partition part;
  auto idx = descending(estimates);
  std::size_t k = 0;
  double total = 0.0;
  for (; k < idx.size(); ++k) {
    double next = total + static_cast<double>(estimates[idx[k]]);
    if (next > limit) break;
    total = next;
    part.preload.push_back(idx[k]);
  }
  for (; k < idx.size(); ++k) part.otf.push_back(idx[k]);
  return part;
}

std::vector<std::size_t> serpentine_permutation(std::span<const std::size_t> counts,
                                                std::size_t chunk_size) {
  if (chunk_size == 0) throw ExecutionError("chunk size must be positive");
  auto idx = descending(counts);
  for (std::size_t start = 0, chunk = 0; start < idx.size(); start += chunk_size, ++chunk) {
    if (chunk % 2 == 1) {
      auto end = std::min(start + chunk_size, idx.size());
      std::reverse(idx.begin() + static_cast<std::ptrdiff_t>(start),
                   idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return idx;
}

std::vector<TrackIndex3D> serpentine_order(std::span<const TrackIndex3D> tids,
                                           std::span<const std::size_t> counts,
                                           std::size_t chunk_size) {
  std::vector<TrackIndex3D> out;
  out.reserve(tids.size());
  for (auto k : serpentine_permutation(counts, chunk_size)) out.push_back(tids[k]);
  return out;
}

std::vector<std::size_t> worker_loads(std::span<const std::size_t> counts,
                                      int num_workers) {
  if (num_workers < 1) throw ExecutionError("need at least one worker");
  std::vector<std::size_t> loads(static_cast<std::size_t>(num_workers), 0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    loads[k % loads.size()] += counts[k];
  }
  return loads;
}

WorkPlan build_plan(const TraceContext& ctx, const PlanOptions& options) {
  WorkPlan plan;
  plan.mode = options.mode;
  plan.chunk_size = options.chunk_size;
  plan.memory_budget = options.memory_budget;
  plan.budget_fraction = options.budget_fraction;

  auto packed = pack_track_indices(ctx.stacks);
  std::vector<std::size_t> counts(packed.size());
  for (std::size_t k = 0; k < packed.size(); ++k) counts[k] = count_segments(ctx, packed[k]);

  auto arrange = [&](std::vector<std::size_t> positions) {
    if (options.load_balance) {
      std::vector<std::size_t> sub(positions.size());
      for (std::size_t k = 0; k < positions.size(); ++k) sub[k] = counts[positions[k]];
      auto perm = serpentine_permutation(sub, options.chunk_size);
      std::vector<std::size_t> out(positions.size());
      for (std::size_t k = 0; k < perm.size(); ++k) out[k] = positions[perm[k]];
      return out;
    }
    std::sort(positions.begin(), positions.end());
    return positions;
  };
  auto append = [&](const std::vector<std::size_t>& positions) {
    for (auto p : positions) {
      plan.order.push_back(packed[p]);
      plan.segment_counts.push_back(counts[p]);
    }
  };

  std::vector<std::size_t> all(packed.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  switch (options.mode) {
    case SweepMode::Otf:
      append(arrange(all));
      break;
    case SweepMode::Exp:
      plan.preload_set = packed;
      append(arrange(all));
      break;
    case SweepMode::Hybrid: {
      std::vector<std::size_t> bytes(counts.size());
      for (std::size_t k = 0; k < counts.size(); ++k) {
        bytes[k] = counts[k] * ExplicitStore::kRecordBytes;
      }
      auto part = partition_exp_otf(bytes, options.memory_budget, options.budget_fraction);
      std::vector<std::size_t> pre = part.preload;
      std::sort(pre.begin(), pre.end());
      for (auto p : pre) plan.preload_set.push_back(packed[p]);
      append(arrange(part.preload));
      append(arrange(part.otf));
      break;
    }
  }
  return plan;
}

void execute(std::span<const TrackIndex3D> order,
             const std::function<void(std::size_t, int)>& kernel, int num_workers) {
  if (num_workers < 1) throw ExecutionError("need at least one worker");
  const std::size_t n = order.size();
  const auto stride = static_cast<std::size_t>(num_workers);
  std::mutex mutex;
  std::exception_ptr first_error;
  std::size_t failed_at = n;

  auto body = [&](int w) {
    for (std::size_t pos = static_cast<std::size_t>(w); pos < n; pos += stride) {
      try {
        kernel(pos, w);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!first_error || pos < failed_at) {
          first_error = std::current_exception();
          failed_at = pos;
        }
        return;
      }
    }
  };

  if (num_workers == 1) {
    body(0);
  } else {
    std::vector<std::jthread> workers;
    workers.reserve(stride);
    for (int w = 0; w < num_workers; ++w) workers.emplace_back(body, w);
  }
  if (first_error) {
    const auto& t = order[failed_at];
    std::ostringstream os;
    os << "worker failed on track (" << t.track2d << ", " << t.polar << ", "
       << t.stack_index << "): ";
    try {
      std::rethrow_exception(first_error);
    } catch (const std::exception& e) {
      os << e.what();
    } catch (...) {
      os << "unknown error";
    }
    throw ExecutionError(os.str());
  }
}

}  // namespace moc3d
