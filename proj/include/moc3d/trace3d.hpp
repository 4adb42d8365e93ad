#ifndef MOC3D_TRACE3D_HPP
#define MOC3D_TRACE3D_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "moc3d/flat_stacks.hpp"
#include "moc3d/geometry.hpp"
#include "moc3d/quadrature.hpp"
#include "moc3d/trace2d.hpp"

namespace moc3d {

using TrackId = std::uint64_t;

// Identifies one 3D track: its 2D projection, polar angle, and position
// within the z-stack.
struct TrackIndex3D {
  int track2d = 0;
  int polar = 0;
  int stack_index = 0;
  auto operator<=>(const TrackIndex3D&) const = default;
};

// Parallel 3D tracks sharing one 2D projection and polar angle. Member i
// sits at height z_i(s) = z0_bottom + i * delta_z + s * cot_theta.
struct ZStack {
  int track2d = 0;
  int polar = 0;
  double z0_bottom = 0.0;
  double delta_z = 0.0;
  double cot_theta = 0.0;
  double sin_theta = 1.0;
  int count = 0;
};

struct Segment3D {
  int fsr = 0;
  double length = 0.0;
  bool operator==(const Segment3D&) const = default;
};

inline double z_of(const ZStack& stack, int i, double s) {
  return stack.z0_bottom + i * stack.delta_z + s * stack.cot_theta;
}

// Inclusive index range; first > last means empty.
struct IndexRange {
  long first = 0;
  long last = -1;
  bool empty() const { return first > last; }
  bool contains(long i) const { return i >= first && i <= last; }
};

// Tracks of the stack that meet the FSR column [z_min, z_max] over the 2D
// segment [s_start, s_end], touching included; clamped to [0, count - 1].
IndexRange intersecting_range(const ZStack& stack, double z_min, double z_max,
                              double s_start, double s_end);
// Tracks that stay inside [z_min, z_max] across the whole 2D segment. Not
// clamped: first > last marks the steep regime where tracks cross the FSR
// axially without covering its full 2D length.
IndexRange full_crossing_range(const ZStack& stack, double z_min, double z_max,
                               double s_start, double s_end);

// Link from one 3D track traversal to the next.
struct TrackLink3D {
  TrackId track = 0;
  Direction dir = Direction::Forward;
  Face face = Face::None;
  bool terminal = true;
};

// All z-stacks of the problem, the corrected 3D quadrature, the packed global
// numbering of 3D tracks (Alg. order: 2D track, polar, stack index) and the
// boundary link table.
class StackSet {
 public:
  // Per-stack scalars stored in the flattened table, in record order.
  enum Field : std::size_t { kZ0 = 0, kDeltaZ, kCot, kCount, kNumFields };

  const PolarQuadrature& base_polar() const { return polar_; }
  const Quadrature3D& quadrature() const { return quadrature_; }
  int num_polar() const { return polar_.num_angles(); }
  int num_tracks2d() const { return static_cast<int>(flat_.num_blocks()); }
  TrackId num_tracks() const { return stack_offsets_.back(); }
  const FlattenedStacks<double>& flat() const { return flat_; }

  ZStack stack(int track2d, int polar) const;
  TrackId first_track(int track2d, int polar) const {
    return stack_offsets_[static_cast<std::size_t>(track2d * num_polar() + polar)];
  }
  TrackId global_id(const TrackIndex3D& t) const {
    return first_track(t.track2d, t.polar) + static_cast<TrackId>(t.stack_index);
  }
  TrackIndex3D index_of(TrackId id) const;

  int azim_of(int track2d) const { return azim_[static_cast<std::size_t>(track2d)]; }
  // Quadrature weight per travel direction and transverse area of every
  // track in stack (track2d, polar).
  double weight(int track2d, int polar) const {
    return quadrature_.weight[quadrature_.index(azim_of(track2d), polar)];
  }
  double area(int track2d, int polar) const {
    return quadrature_.area[quadrature_.index(azim_of(track2d), polar)];
  }

  const TrackLink3D& link(TrackId id, Direction d) const {
    return links_[2 * id + static_cast<std::size_t>(d)];
  }
  // Face through which a traversal enters the domain.
  Face entry_face(TrackId id, Direction d) const {
    return entry_faces_[2 * id + static_cast<std::size_t>(d)];
  }
  bool entry_terminal(TrackId id, Direction d) const {
    return entry_terminal_[2 * id + static_cast<std::size_t>(d)] != 0;
  }

 private:
  friend StackSet build_stacks(const TrackSet2D&, const PolarQuadrature&,
                               double, const ExtrudedGeometry&);
  PolarQuadrature polar_;
  Quadrature3D quadrature_;
  FlattenedStacks<double> flat_{kNumFields};
  std::vector<int> azim_;              // per 2D track
  std::vector<double> sin_theta_;      // per stack
  std::vector<TrackId> stack_offsets_;  // size T * P + 1
  std::vector<TrackLink3D> links_;
  std::vector<Face> entry_faces_;
  std::vector<std::uint8_t> entry_terminal_;
};

// Builds z-stacks over every 2D track and polar angle. Polar angles and axial
// spacings are corrected per azimuthal angle so that tracks reconnect exactly
// under reflection at every face.
StackSet build_stacks(const TrackSet2D& tracks, const PolarQuadrature& polar,
                      double axial_spacing, const ExtrudedGeometry& geom);

// Everything needed to trace a 3D track on the fly.
struct TraceContext {
  const ExtrudedGeometry& geom;
  const TrackSet2D& tracks;
  const StackSet& stacks;
};

// 3D chord length of a track between its domain entry and exit.
double chord_length(const TraceContext& ctx, const TrackIndex3D& tid);

namespace detail {

constexpr double kMinSegment = 1e-12;

// Length of member i inside slab [z_lo, z_hi] over the 2D segment [s0, s1],
// given precomputed index ranges. Returns 0 when the track misses the slab.
double slab_length(const ZStack& stack, long i, double s0, double s1,
                   double z_lo, double z_hi, const IndexRange& hit,
                   const IndexRange& full);

// Shared per-(segment, slab) routine used by both per-track and per-stack
// tracing so that the two produce bit-identical output.
template <class Emit>
void trace_member(const ZStack& stack, const ExtrudedGeometry& geom,
                  std::span<const Segment2D> segments, long i, Emit&& emit) {
  const double z_base = stack.z0_bottom + static_cast<double>(i) * stack.delta_z;
  const double c = stack.cot_theta;
  const auto& box = geom.bounds();
  for (const auto& seg : segments) {
    double za = z_base + c * seg.s_start;
    double zb = z_base + c * seg.s_end;
    double zlo = std::min(za, zb);
    double zhi = std::max(za, zb);
    if (zhi < box.z_min || zlo > box.z_max) continue;
    const auto& mesh = geom.mesh_of(seg.region);
    const int nslab = mesh.num_slabs();
    if (c == 0.0) {
      int slab = mesh.slab_at(za);
      emit(geom.fsr_id(seg.region, slab), seg.length() / stack.sin_theta);
      continue;
    }
    int lo = mesh.slab_at(std::clamp(zlo, box.z_min, box.z_max)) - 1;
    int hi = mesh.slab_at(std::clamp(zhi, box.z_min, box.z_max)) + 1;
    lo = std::max(lo, 0);
    hi = std::min(hi, nslab - 1);
    const bool up = c > 0.0;
    for (int k = 0; k <= hi - lo; ++k) {
      int slab = up ? lo + k : hi - k;
      double z0 = mesh.z_min(slab);
      double z1 = mesh.z_max(slab);
      auto hit = intersecting_range(stack, z0, z1, seg.s_start, seg.s_end);
      if (!hit.contains(i)) continue;
      auto full = full_crossing_range(stack, z0, z1, seg.s_start, seg.s_end);
      double len = slab_length(stack, i, seg.s_start, seg.s_end, z0, z1, hit, full);
      if (len > kMinSegment) emit(geom.fsr_id(seg.region, slab), len);
    }
  }
}

}  // namespace detail

// Visits the 3D segments of one track in the direction of travel.
template <class Visitor>
void visit_segments_otf(const TraceContext& ctx, const TrackIndex3D& tid,
                        Visitor&& visit) {
  ZStack stack = ctx.stacks.stack(tid.track2d, tid.polar);
  detail::trace_member(stack, ctx.geom, ctx.tracks.segments(tid.track2d),
                       tid.stack_index, visit);
}

// Per-track on-the-fly tracing.
std::vector<Segment3D> trace_segments_otf(const TraceContext& ctx,
                                          const TrackIndex3D& tid);

// Traces a whole z-stack at once, computing the index ranges once per
// (2D segment, slab) pair. Result[i] equals trace_segments_otf for member i.
std::vector<std::vector<Segment3D>> trace_stack(const TraceContext& ctx,
                                                int track2d, int polar);

std::size_t count_segments(const TraceContext& ctx, const TrackIndex3D& tid);

// Explicitly stored segments for a subset of tracks (FSR ids and lengths in
// parallel arrays, so one record is exactly 12 bytes).
class ExplicitStore {
 public:
  static constexpr std::size_t kRecordBytes = sizeof(std::uint32_t) + sizeof(double);

  std::size_t num_tracks() const { return tracks_.size(); }
  std::size_t num_segments() const { return fsr_.size(); }
  std::size_t bytes() const { return num_segments() * kRecordBytes; }
  bool contains(TrackId id) const;
  // Slot of a global track id or -1.
  long slot(TrackId id) const;
  TrackId track(std::size_t slot) const { return tracks_[slot]; }

  std::span<const std::uint32_t> fsrs(std::size_t slot) const {
    return {fsr_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }
  std::span<const double> lengths(std::size_t slot) const {
    return {length_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }
  std::vector<Segment3D> segments(std::size_t slot) const;

 private:
  friend ExplicitStore generate_explicit_segments(const TraceContext&,
                                                  std::span<const TrackIndex3D>,
                                                  std::size_t);
  std::vector<TrackId> tracks_;
  std::vector<long> slot_of_;  // dense over global ids, -1 when absent
  std::vector<std::uint32_t> fsr_;
  std::vector<double> length_;
  std::vector<std::size_t> offsets_{0};
};

// Traces and stores the given tracks. Throws CapacityError when the store
// would exceed `budget_bytes`.
ExplicitStore generate_explicit_segments(const TraceContext& ctx,
                                         std::span<const TrackIndex3D> tids,
                                         std::size_t budget_bytes = SIZE_MAX);

// Debug dump: track2d, n, i, seq, fsr, length for every 3D track.
void write_segments_csv(const TraceContext& ctx, std::ostream& os);

}  // namespace moc3d

#endif
