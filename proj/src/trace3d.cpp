#include "moc3d/trace3d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "moc3d/error.hpp"

namespace moc3d {

namespace {

constexpr double kSnap = 1e-12;

double snap(double x) {
  double r = std::round(x);
  return std::abs(x - r) <= kSnap ? r : x;
}

long ceil_snapped(double x) { return static_cast<long>(std::ceil(snap(x))); }
long floor_snapped(double x) { return static_cast<long>(std::floor(snap(x))); }

std::string triple(const TrackIndex3D& t) {
  std::ostringstream os;
  os << "(" << t.track2d << ", " << t.polar << ", " << t.stack_index << ")";
  return os.str();
}

}  // namespace

IndexRange intersecting_range(const ZStack& stack, double z_min, double z_max,
                              double s_start, double s_end) {
  double za = stack.z0_bottom + s_start * stack.cot_theta;
  double zb = stack.z0_bottom + s_end * stack.cot_theta;
  IndexRange r;
  r.first = ceil_snapped((z_min - std::max(za, zb)) / stack.delta_z);
  r.last = floor_snapped((z_max - std::min(za, zb)) / stack.delta_z);
  r.first = std::max(r.first, 0L);
  r.last = std::min(r.last, static_cast<long>(stack.count) - 1);
  return r;
}

IndexRange full_crossing_range(const ZStack& stack, double z_min, double z_max,
                               double s_start, double s_end) {
  double za = stack.z0_bottom + s_start * stack.cot_theta;
  double zb = stack.z0_bottom + s_end * stack.cot_theta;
  IndexRange r;
  r.first = ceil_snapped((z_min - std::min(za, zb)) / stack.delta_z);
  r.last = floor_snapped((z_max - std::max(za, zb)) / stack.delta_z);
  return r;
}

namespace detail {

double slab_length(const ZStack& stack, long i, double s0, double s1,
                   double z_lo, double z_hi, const IndexRange& hit,
                   const IndexRange& full) {
  if (!hit.contains(i)) return 0.0;
  if (full.contains(i)) return (s1 - s0) / stack.sin_theta;
  const double c = stack.cot_theta;
  if (i < full.first && i > full.last) {
    // enters through one axial plane and leaves through the other
    return (z_hi - z_lo) / (std::abs(c) * stack.sin_theta);
  }
  // partial: clip the track to the slab in s
  const double a = stack.z0_bottom + static_cast<double>(i) * stack.delta_z;
  double sa = (z_lo - a) / c;
  double sb = (z_hi - a) / c;
  if (sa > sb) std::swap(sa, sb);
  double lo = std::max(s0, sa);
  double hi = std::min(s1, sb);
  return hi > lo ? (hi - lo) / stack.sin_theta : 0.0;
}

}  // namespace detail

//==============================================================================
// Stack construction
//==============================================================================

namespace {

struct Loops {
  std::vector<int> loop_of;     // per state 2t + dir
  std::vector<double> l0;       // per state
  std::vector<double> length;   // per loop
  std::vector<int> first_state; // per loop
};

int state_of(int track, Direction d) { return 2 * track + static_cast<int>(d); }

// Closed chains of 2D traversals under geometric reflection.
Loops find_loops(const TrackSet2D& tracks) {
  const int num_states = 2 * tracks.num_tracks();
  Loops loops;
  loops.loop_of.assign(static_cast<std::size_t>(num_states), -1);
  loops.l0.assign(static_cast<std::size_t>(num_states), 0.0);
  for (int start = 0; start < num_states; ++start) {
    if (loops.loop_of[static_cast<std::size_t>(start)] >= 0) continue;
    const int id = static_cast<int>(loops.length.size());
    double acc = 0.0;
    int state = start;
    int steps = 0;
    do {
      auto si = static_cast<std::size_t>(state);
      if (loops.loop_of[si] >= 0) {
        throw BuildError("2D track links do not form closed cycles");
      }
      loops.loop_of[si] = id;
      loops.l0[si] = acc;
      const auto& t = tracks.track(state / 2);
      acc += t.length;
      const auto& link = t.link(static_cast<Direction>(state % 2));
      state = state_of(link.track, link.dir);
      if (++steps > num_states) {
        throw BuildError("2D track links do not form closed cycles");
      }
    } while (state != start);
    loops.length.push_back(acc);
    loops.first_state.push_back(start);
  }
  return loops;
}

}  // namespace

ZStack StackSet::stack(int track2d, int polar) const {
  auto t = static_cast<std::size_t>(track2d);
  auto n = static_cast<std::size_t>(polar);
  ZStack s;
  s.track2d = track2d;
  s.polar = polar;
  s.z0_bottom = flat_(t, n, kZ0);
  s.delta_z = flat_(t, n, kDeltaZ);
  s.cot_theta = flat_(t, n, kCot);
  s.count = static_cast<int>(flat_(t, n, kCount));
  s.sin_theta = sin_theta_[t * static_cast<std::size_t>(num_polar()) + n];
  return s;
}

TrackIndex3D StackSet::index_of(TrackId id) const {
  if (id >= num_tracks()) throw BoundsError("3D track id out of range");
  auto it = std::upper_bound(stack_offsets_.begin(), stack_offsets_.end(), id);
  auto block = static_cast<int>(it - stack_offsets_.begin()) - 1;
  TrackIndex3D t;
  t.track2d = block / num_polar();
  t.polar = block % num_polar();
  t.stack_index = static_cast<int>(id - stack_offsets_[static_cast<std::size_t>(block)]);
  return t;
}

StackSet build_stacks(const TrackSet2D& tracks, const PolarQuadrature& polar,
                      double axial_spacing, const ExtrudedGeometry& geom) {
  if (!(axial_spacing > 0.0)) throw BuildError("axial spacing must be positive");
  if (tracks.num_tracks() == 0 || geom.num_fsrs() == 0) {
    throw BuildError("cannot build z-stacks for an empty geometry");
  }
  if (polar.num_angles() != 2 * polar.num_polar || polar.num_polar < 1) {
    throw BuildError("polar quadrature must hold 2N angles");
  }
  const auto& box = geom.bounds();
  const double z_bot = box.z_min;
  const double z_top = box.z_max;
  const double height = box.height();
  if (!(height > 0.0)) throw BuildError("geometry has zero height");

  const auto& azim = tracks.quadrature();
  const int num_azim = azim.num_angles();
  const int num_polar = polar.num_angles();
  const int half_polar = polar.num_polar;

  StackSet set;
  set.polar_ = polar;
  for (const auto& t : tracks.tracks()) set.azim_.push_back(t.azim);

  Loops loops = find_loops(tracks);

  // All loops of one azimuthal pair share the same length.
  std::vector<double> pair_length(static_cast<std::size_t>(num_azim), -1.0);
  for (std::size_t l = 0; l < loops.length.size(); ++l) {
    int m = tracks.track(loops.first_state[l] / 2).azim;
    int key = std::min(m, azim.complement(m));
    double& ref = pair_length[static_cast<std::size_t>(key)];
    if (ref < 0.0) {
      ref = loops.length[l];
    } else if (std::abs(ref - loops.length[l]) > 1e-9 * ref) {
      std::ostringstream os;
      os << "reflective cycles of azimuthal angle " << m
         << " have unequal lengths " << ref << " and " << loops.length[l];
      throw BuildError(os.str());
    }
  }

  // Corrected polar angles and axial spacings per (m, n).
  auto& q = set.quadrature_;
  q.num_azim_angles = num_azim;
  q.num_polar_angles = num_polar;
  const auto total = static_cast<std::size_t>(num_azim * num_polar);
  q.theta.assign(total, 0.0);
  q.weight.assign(total, 0.0);
  q.delta_z.assign(total, 0.0);
  q.area.assign(total, 0.0);
  std::vector<double> cot(total, 0.0);
  for (int m = 0; m < num_azim; ++m) {
    int key = std::min(m, azim.complement(m));
    double lc = pair_length[static_cast<std::size_t>(key)];
    for (int n = 0; n < half_polar; ++n) {
      double theta0 = polar.theta[static_cast<std::size_t>(n)];
      double target = axial_spacing / std::sin(theta0);
      int nz = std::max(1, static_cast<int>(std::ceil(height / target - 1e-12)));
      double dz = height / nz;
      double c0 = std::cos(theta0) / std::sin(theta0);
      double c = 0.0;
      if (c0 > 1e-14 && lc > 0.0) {
        double p = std::max(1.0, std::round(c0 * lc / dz));
        c = p * dz / lc;
      }
      double theta = std::atan2(1.0, c);
      int nc = polar.complement(n);
      auto up = q.index(m, n);
      auto down = q.index(m, nc);
      q.theta[up] = theta;
      q.theta[down] = std::numbers::pi - theta;
      cot[up] = c;
      cot[down] = -c;
      for (auto idx : {up, down}) {
        q.delta_z[idx] = dz;
        q.area[idx] = azim.spacing[static_cast<std::size_t>(m)] * dz * std::sin(theta);
      }
      q.weight[up] = azim.weight[static_cast<std::size_t>(m)] *
                     polar.weight[static_cast<std::size_t>(n)];
      q.weight[down] = azim.weight[static_cast<std::size_t>(m)] *
                       polar.weight[static_cast<std::size_t>(nc)];
    }
  }

  // Axial offsets of each loop's upward ray family, chosen so that the
  // downward family of a loop reversed equals the upward family of the
  // reverse loop.
  const std::size_t num_loops = loops.length.size();
  std::vector<double> beta(num_loops * static_cast<std::size_t>(half_polar), 0.0);
  std::vector<char> done(num_loops, 0);
  auto span_c = [&](int state) {
    auto t = static_cast<std::size_t>(state / 2);
    return loops.l0[static_cast<std::size_t>(state)] +
           loops.l0[static_cast<std::size_t>(state ^ 1)] + tracks.tracks()[t].length;
  };
  for (std::size_t l = 0; l < num_loops; ++l) {
    if (done[l]) continue;
    int s0 = loops.first_state[l];
    int m = tracks.track(s0 / 2).azim;
    auto rev = static_cast<std::size_t>(loops.loop_of[static_cast<std::size_t>(s0 ^ 1)]);
    double cc = span_c(s0);
    for (int n = 0; n < half_polar; ++n) {
      auto idx = q.index(m, n);
      double c = cot[idx];
      double dz = q.delta_z[idx];
      auto b = [&](std::size_t loop) -> double& {
        return beta[loop * static_cast<std::size_t>(half_polar) + static_cast<std::size_t>(n)];
      };
      if (rev == l) {
        b(l) = z_bot - 0.5 * c * cc;
      } else {
        b(l) = z_bot + 0.5 * dz;
        b(rev) = 2.0 * z_bot - b(l) - c * cc;
      }
    }
    done[l] = 1;
    done[rev] = 1;
  }

  // Stack table in Alg. order (2D track, polar).
  const double eps = 1e-9 * std::max(1.0, height);
  const auto np = static_cast<std::size_t>(num_polar);
  set.stack_offsets_.assign(1, 0);
  set.sin_theta_.reserve(static_cast<std::size_t>(tracks.num_tracks()) * np);
  for (const auto& t : tracks.tracks()) {
    set.flat_.begin_block();
    for (int n = 0; n < num_polar; ++n) {
      auto idx = q.index(t.azim, n);
      const double c = cot[idx];
      const double dz = q.delta_z[idx];
      const bool up = polar.upward(n);
      const int nu = up ? n : polar.complement(n);
      double offset;
      if (up) {
        int st = state_of(t.id, Direction::Forward);
        auto loop = static_cast<std::size_t>(loops.loop_of[static_cast<std::size_t>(st)]);
        offset = beta[loop * static_cast<std::size_t>(half_polar) + static_cast<std::size_t>(nu)] +
                 c * loops.l0[static_cast<std::size_t>(st)];
      } else {
        int st = state_of(t.id, Direction::Backward);
        auto loop = static_cast<std::size_t>(loops.loop_of[static_cast<std::size_t>(st)]);
        offset = beta[loop * static_cast<std::size_t>(half_polar) + static_cast<std::size_t>(nu)] -
                 c * (loops.l0[static_cast<std::size_t>(st)] + t.length);
      }
      // Members: lattice values whose line meets the open box interior.
      const double rise = c * t.length;
      const double lower = z_bot - std::max(0.0, rise) + eps;
      const double upper = z_top - std::min(0.0, rise) - eps;
      double k0 = std::floor((lower - offset) / dz) + 1.0;
      double z0 = offset + k0 * dz;
      while (z0 - dz > lower) {
        k0 -= 1.0;
        z0 = offset + k0 * dz;
      }
      while (!(z0 > lower)) {
        k0 += 1.0;
        z0 = offset + k0 * dz;
      }
      long count = 0;
      if (z0 < upper) count = static_cast<long>(std::ceil((upper - z0) / dz));
      while (count > 0 && !(z0 + static_cast<double>(count - 1) * dz < upper)) --count;
      while (z0 + static_cast<double>(count) * dz < upper) ++count;
      std::array<double, StackSet::kNumFields> rec{z0, dz, c, static_cast<double>(count)};
      set.flat_.push_record(rec);
      set.sin_theta_.push_back(std::sin(q.theta[idx]));
      set.stack_offsets_.push_back(set.stack_offsets_.back() + static_cast<TrackId>(count));
    }
  }

  // 3D links.
  const TrackId num3d = set.num_tracks();
  set.links_.assign(2 * num3d, TrackLink3D{});
  set.entry_faces_.assign(2 * num3d, Face::None);
  set.entry_terminal_.assign(2 * num3d, 0);
  auto vacuum = [&](Face f) { return geom.boundary(f) == BoundaryCondition::Vacuum; };

  auto find_member = [&](int t, int n, double s, double z) -> TrackId {
    ZStack st = set.stack(t, n);
    double x = (z - st.cot_theta * s - st.z0_bottom) / st.delta_z;
    long j = std::lround(x);
    double resid = st.z0_bottom + static_cast<double>(j) * st.delta_z + st.cot_theta * s - z;
    if (j < 0 || j >= st.count || std::abs(resid) > 1e-6 * st.delta_z) {
      std::ostringstream os;
      os << "no 3D track continues stack (" << t << ", " << n << ") at s = " << s
         << ", z = " << z;
      throw TracingError(os.str());
    }
    return set.first_track(t, n) + static_cast<TrackId>(j);
  };

  for (const auto& t : tracks.tracks()) {
    for (int n = 0; n < num_polar; ++n) {
      ZStack st = set.stack(t.id, n);
      const double c = st.cot_theta;
      for (int i = 0; i < st.count; ++i) {
        const TrackId id = set.first_track(t.id, n) + static_cast<TrackId>(i);
        const double a = st.z0_bottom + i * st.delta_z;
        for (Direction d : {Direction::Forward, Direction::Backward}) {
          const bool fwd = d == Direction::Forward;
          const double v = fwd ? c : -c;  // dz per unit 2D travel
          const std::size_t slot = 2 * id + static_cast<std::size_t>(d);

          // exit
          double s_end = fwd ? t.length : 0.0;
          double z_end = a + c * s_end;
          bool radial = true;
          bool axial = false;
          double z_face = 0.0;
          Face zf = Face::None;
          if (v > 0.0) {
            z_face = z_top;
            zf = Face::ZMax;
            axial = z_end >= z_top - eps;
            radial = z_end <= z_top + eps;
          } else if (v < 0.0) {
            z_face = z_bot;
            zf = Face::ZMin;
            axial = z_end <= z_bot + eps;
            radial = z_end >= z_bot - eps;
          }
          TrackLink3D link;
          if (radial) {
            const auto& l2 = t.link(d);
            const auto& tn = tracks.track(l2.track);
            int nn = (l2.dir == d) ? n : polar.complement(n);
            if (axial) nn = polar.complement(nn);
            double s_in = l2.dir == Direction::Forward ? 0.0 : tn.length;
            double z_in = axial ? z_face : z_end;
            link.track = find_member(l2.track, nn, s_in, z_in);
            link.dir = l2.dir;
            link.face = l2.face;
            link.terminal = vacuum(l2.face) || (axial && vacuum(zf));
            if (axial && vacuum(zf) && !vacuum(l2.face)) link.face = zf;
          } else {
            double s_hit = (z_face - a) / c;
            link.track = find_member(t.id, polar.complement(n), s_hit, z_face);
            link.dir = d;
            link.face = zf;
            link.terminal = vacuum(zf);
          }
          set.links_[slot] = link;

          // entry
          double s_beg = fwd ? 0.0 : t.length;
          double z_beg = a + c * s_beg;
          Face entry = fwd ? t.start_face : t.end_face;
          if (v > 0.0 && z_beg < z_bot - eps) entry = Face::ZMin;
          if (v < 0.0 && z_beg > z_top + eps) entry = Face::ZMax;
          set.entry_faces_[slot] = entry;
          bool term = vacuum(entry);
          if (v > 0.0 && std::abs(z_beg - z_bot) <= eps) term = term || vacuum(Face::ZMin);
          if (v < 0.0 && std::abs(z_beg - z_top) <= eps) term = term || vacuum(Face::ZMax);
          set.entry_terminal_[slot] = term ? 1 : 0;
        }
      }
    }
  }
  return set;
}

//==============================================================================
// Tracing
//==============================================================================

double chord_length(const TraceContext& ctx, const TrackIndex3D& tid) {
  ZStack st = ctx.stacks.stack(tid.track2d, tid.polar);
  const auto& box = ctx.geom.bounds();
  const double len2d = ctx.tracks.track(tid.track2d).length;
  const double c = st.cot_theta;
  const double a = st.z0_bottom + tid.stack_index * st.delta_z;
  double s0 = 0.0;
  double s1 = len2d;
  if (c != 0.0) {
    double sa = (box.z_min - a) / c;
    double sb = (box.z_max - a) / c;
    if (sa > sb) std::swap(sa, sb);
    s0 = std::max(s0, sa);
    s1 = std::min(s1, sb);
  }
  return s1 > s0 ? (s1 - s0) / st.sin_theta : 0.0;
}

std::vector<Segment3D> trace_segments_otf(const TraceContext& ctx,
                                          const TrackIndex3D& tid) {
  ZStack st = ctx.stacks.stack(tid.track2d, tid.polar);
  if (tid.stack_index < 0 || tid.stack_index >= st.count) {
    throw TracingError("track triple " + triple(tid) + " is outside its stack");
  }
  std::vector<Segment3D> out;
  visit_segments_otf(ctx, tid, [&](int fsr, double len) { out.push_back({fsr, len}); });
  if (out.empty()) {
    throw TracingError("track triple " + triple(tid) + " produced no segments");
  }
  return out;
}

std::vector<std::vector<Segment3D>> trace_stack(const TraceContext& ctx,
                                                int track2d, int polar) {
  ZStack st = ctx.stacks.stack(track2d, polar);
  std::vector<std::vector<Segment3D>> out(static_cast<std::size_t>(st.count));
  const auto& box = ctx.geom.bounds();
  const double c = st.cot_theta;
  for (const auto& seg : ctx.tracks.segments(track2d)) {
    const auto& mesh = ctx.geom.mesh_of(seg.region);
    if (c == 0.0) {
      for (int i = 0; i < st.count; ++i) {
        double z = st.z0_bottom + static_cast<double>(i) * st.delta_z;
        out[static_cast<std::size_t>(i)].push_back(
            {ctx.geom.fsr_id(seg.region, mesh.slab_at(z)), seg.length() / st.sin_theta});
      }
      continue;
    }
    const double za = st.z0_bottom + c * seg.s_start;
    const double zb = st.z0_bottom + c * seg.s_end;
    const double zlo = std::min(za, zb);
    const double zhi = std::max(za, zb) + static_cast<double>(st.count - 1) * st.delta_z;
    if (zhi < box.z_min || zlo > box.z_max) continue;
    int lo = std::max(mesh.slab_at(std::clamp(zlo, box.z_min, box.z_max)) - 1, 0);
    int hi = std::min(mesh.slab_at(std::clamp(zhi, box.z_min, box.z_max)) + 1,
                      mesh.num_slabs() - 1);
    const bool up = c > 0.0;
    for (int k = 0; k <= hi - lo; ++k) {
      int slab = up ? lo + k : hi - k;
      double z0 = mesh.z_min(slab);
      double z1 = mesh.z_max(slab);
      auto hit = intersecting_range(st, z0, z1, seg.s_start, seg.s_end);
      if (hit.empty()) continue;
      auto full = full_crossing_range(st, z0, z1, seg.s_start, seg.s_end);
      const int fsr = ctx.geom.fsr_id(seg.region, slab);
      for (long i = hit.first; i <= hit.last; ++i) {
        double len = detail::slab_length(st, i, seg.s_start, seg.s_end, z0, z1, hit, full);
        if (len > detail::kMinSegment) out[static_cast<std::size_t>(i)].push_back({fsr, len});
      }
    }
  }
  return out;
}

std::size_t count_segments(const TraceContext& ctx, const TrackIndex3D& tid) {
  std::size_t n = 0;
  visit_segments_otf(ctx, tid, [&](int, double) { ++n; });
  return n;
}

//==============================================================================
// Explicit store
//==============================================================================

bool ExplicitStore::contains(TrackId id) const { return slot(id) >= 0; }

long ExplicitStore::slot(TrackId id) const {
  return id < slot_of_.size() ? slot_of_[id] : -1;
}

std::vector<Segment3D> ExplicitStore::segments(std::size_t slot) const {
  std::vector<Segment3D> out;
  auto f = fsrs(slot);
  auto l = lengths(slot);
  for (std::size_t k = 0; k < f.size(); ++k) out.push_back({static_cast<int>(f[k]), l[k]});
  return out;
}

ExplicitStore generate_explicit_segments(const TraceContext& ctx,
                                         std::span<const TrackIndex3D> tids,
                                         std::size_t budget_bytes) {
  ExplicitStore store;
  store.slot_of_.assign(tids.empty() ? 0 : ctx.stacks.num_tracks(), -1);
  for (const auto& tid : tids) {
    TrackId id = ctx.stacks.global_id(tid);
    if (store.slot_of_[id] >= 0) continue;
    std::size_t before = store.fsr_.size();
    visit_segments_otf(ctx, tid, [&](int fsr, double len) {
      store.fsr_.push_back(static_cast<std::uint32_t>(fsr));
      store.length_.push_back(len);
    });
    if (store.fsr_.size() * ExplicitStore::kRecordBytes > budget_bytes) {
      std::ostringstream os;
      os << "explicit segment store exceeds its budget of " << budget_bytes
         << " bytes at track " << triple(tid);
      throw CapacityError(os.str());
    }
    if (store.fsr_.size() == before) {
      throw TracingError("track triple " + triple(tid) + " produced no segments");
    }
    store.slot_of_[id] = static_cast<long>(store.tracks_.size());
    store.tracks_.push_back(id);
    store.offsets_.push_back(store.fsr_.size());
  }
  return store;
}

void write_segments_csv(const TraceContext& ctx, std::ostream& os) {
  os << "track2d,n,i,seq,fsr,length\n";
  auto old = os.precision(17);
  for (int t = 0; t < ctx.stacks.num_tracks2d(); ++t) {
    for (int n = 0; n < ctx.stacks.num_polar(); ++n) {
      ZStack st = ctx.stacks.stack(t, n);
      for (int i = 0; i < st.count; ++i) {
        int seq = 0;
        visit_segments_otf(ctx, {t, n, i}, [&](int fsr, double len) {
          os << t << ',' << n << ',' << i << ',' << seq++ << ',' << fsr << ',' << len
             << '\n';
        });
      }
    }
  }
  os.precision(old);
}

}  // namespace moc3d
