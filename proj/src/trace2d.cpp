#include "moc3d/trace2d.hpp"

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

constexpr double kMinStep = 1e-10;

// Distance along (ux, uy) from (x, y) to the bounding rectangle and the face
// that is hit.
std::pair<double, Face> exit_box(const BoundingBox& box, double x, double y,
                                 double ux, double uy) {
  double best = std::numeric_limits<double>::infinity();
  Face face = Face::None;
  auto consider = [&](double t, Face f) {
    if (t < best) {
      best = t;
      face = f;
    }
  };
  if (ux > 0.0) consider((box.x_max - x) / ux, Face::XMax);
  if (ux < 0.0) consider((box.x_min - x) / ux, Face::XMin);
  if (uy > 0.0) consider((box.y_max - y) / uy, Face::YMax);
  if (uy < 0.0) consider((box.y_min - y) / uy, Face::YMin);
  return {best, face};
}

struct FaceEntry {
  double coord;
  int track;
  Direction dir;
  double ux, uy;
};

double face_coord(Face face, double x, double y) {
  return (face == Face::XMin || face == Face::XMax) ? y : x;
}

}  // namespace

TrackSet2D generate_tracks_2d(const ExtrudedGeometry& geom, int num_azim,
                              double target_spacing) {
  if (num_azim < 4 || num_azim % 4 != 0) {
    throw ParameterError("num_azim must be a positive multiple of 4");
  }
  if (!(target_spacing > 0.0)) {
    throw ParameterError("track spacing must be positive");
  }
  const auto& box = geom.bounds();
  const double width = box.width();
  const double height = box.depth();
  if (target_spacing > std::max(width, height)) {
    throw ParameterError("track spacing is larger than the domain");
  }

  TrackSet2D set;
  auto& q = set.quadrature_;
  q.num_azim = num_azim;
  const int quarter = num_azim / 4;
  const int half = num_azim / 2;
  q.phi.assign(static_cast<std::size_t>(half), 0.0);
  q.weight.assign(static_cast<std::size_t>(half), 0.0);
  q.spacing.assign(static_cast<std::size_t>(half), 0.0);
  q.num_x.assign(static_cast<std::size_t>(half), 0);
  q.num_y.assign(static_cast<std::size_t>(half), 0);

  const double pi = std::numbers::pi;
  for (int m = 0; m < quarter; ++m) {
    double phi = 2.0 * pi / num_azim * (m + 0.5);
    int nx = static_cast<int>(std::floor(width / target_spacing * std::sin(phi))) + 1;
    int ny = static_cast<int>(std::floor(height / target_spacing * std::cos(phi))) + 1;
    double phi_eff = std::atan((height * nx) / (width * ny));
    double dx = width / nx;
    auto mc = static_cast<std::size_t>(half - 1 - m);
    auto mi = static_cast<std::size_t>(m);
    q.phi[mi] = phi_eff;
    q.phi[mc] = pi - phi_eff;
    q.spacing[mi] = q.spacing[mc] = dx * std::sin(phi_eff);
    q.num_x[mi] = q.num_x[mc] = nx;
    q.num_y[mi] = q.num_y[mc] = ny;
  }
  for (int m = 0; m < quarter; ++m) {
    auto mi = static_cast<std::size_t>(m);
    double lo = m == 0 ? 0.0 : 0.5 * (q.phi[mi - 1] + q.phi[mi]);
    double hi = m == quarter - 1 ? 0.5 * pi : 0.5 * (q.phi[mi] + q.phi[mi + 1]);
    q.weight[mi] = hi - lo;
    q.weight[static_cast<std::size_t>(half - 1 - m)] = hi - lo;
  }

  // Track start points. Angles below pi/2 start on y_min and x_min; their
  // complements are the mirror images and start on y_min and x_max.
  for (int m = 0; m < half; ++m) {
    auto mi = static_cast<std::size_t>(m);
    const int nx = q.num_x[mi];
    const int ny = q.num_y[mi];
    const double dx = width / nx;
    const double dy = height / ny;
    const double ux = std::cos(q.phi[mi]);
    const double uy = std::sin(q.phi[mi]);
    const bool rightward = m < quarter;
    auto add = [&](double x, double y, Face face) {
      Track2D t;
      t.id = static_cast<int>(set.tracks_.size());
      t.azim = m;
      t.x0 = x;
      t.y0 = y;
      t.ux = ux;
      t.uy = uy;
      t.start_face = face;
      auto [len, end] = exit_box(box, x, y, ux, uy);
      t.length = len;
      t.x1 = x + len * ux;
      t.y1 = y + len * uy;
      t.end_face = end;
      set.tracks_.push_back(t);
    };
    for (int i = 0; i < nx; ++i) {
      double x = rightward ? box.x_max - dx * (i + 0.5) : box.x_min + dx * (i + 0.5);
      add(x, box.y_min, Face::YMin);
    }
    for (int j = 0; j < ny; ++j) {
      double y = box.y_min + dy * (j + 0.5);
      add(rightward ? box.x_min : box.x_max, y, rightward ? Face::XMin : Face::XMax);
    }
  }

  // Reflective partners: a traversal leaving face F continues as the
  // traversal that starts at the same point of F with the mirrored direction.
  std::array<std::vector<FaceEntry>, 4> entries;
  for (const auto& t : set.tracks_) {
    entries[static_cast<std::size_t>(t.start_face)].push_back(
        {face_coord(t.start_face, t.x0, t.y0), t.id, Direction::Forward, t.ux, t.uy});
    entries[static_cast<std::size_t>(t.end_face)].push_back(
        {face_coord(t.end_face, t.x1, t.y1), t.id, Direction::Backward, -t.ux, -t.uy});
  }
  for (auto& list : entries) {
    std::sort(list.begin(), list.end(),
              [](const FaceEntry& a, const FaceEntry& b) { return a.coord < b.coord; });
  }
  const double tol = 1e-8 * std::max(width, height);
  auto find_partner = [&](Face face, double coord, double ux, double uy) {
    const auto& list = entries[static_cast<std::size_t>(face)];
    auto it = std::lower_bound(list.begin(), list.end(), coord - tol,
                               [](const FaceEntry& e, double v) { return e.coord < v; });
    for (; it != list.end() && it->coord <= coord + tol; ++it) {
      if (std::abs(it->ux - ux) < 1e-9 && std::abs(it->uy - uy) < 1e-9) {
        return std::pair{it->track, it->dir};
      }
    }
    std::ostringstream os;
    os << "no reflective partner on face " << to_string(face) << " at " << coord;
    throw TracingError(os.str());
  };
  auto make_link = [&](Face face, double x, double y, double ux, double uy) {
    double rx = (face == Face::XMin || face == Face::XMax) ? -ux : ux;
    double ry = (face == Face::YMin || face == Face::YMax) ? -uy : uy;
    auto [track, dir] = find_partner(face, face_coord(face, x, y), rx, ry);
    TrackLink link;
    link.track = track;
    link.dir = dir;
    link.face = face;
    link.terminal = geom.boundary(face) == BoundaryCondition::Vacuum;
    return link;
  };
  for (auto& t : set.tracks_) {
    t.fwd_link = make_link(t.end_face, t.x1, t.y1, t.ux, t.uy);
    t.bwd_link = make_link(t.start_face, t.x0, t.y0, -t.ux, -t.uy);
  }
  return set;
}

std::vector<Segment2D> segment_track_2d(const Track2D& track,
                                        const ExtrudedGeometry& geom) {
  std::vector<Segment2D> segments;
  const double length = track.length;
  double s = 0.0;
  int stalled = 0;
  std::size_t steps = 0;
  while (length - s > kMinStep) {
    double x = track.x0 + s * track.ux;
    double y = track.y0 + s * track.uy;
    int region = geom.find_radial_region(x, y, track.ux, track.uy);
    double d = geom.distance_to_boundary(region, x, y, track.ux, track.uy);
    if (!(d > kMinStep)) {
      if (++stalled > 1000) {
        std::ostringstream os;
        os << "segmentation stalled on track " << track.id << " at s = " << s;
        throw TracingError(os.str());
      }
      d = kMinStep;
    } else {
      stalled = 0;
    }
    double next = std::min(s + d, length);
    if (!segments.empty() && segments.back().region == region) {
      segments.back().s_end = next;
    } else {
      segments.push_back({region, s, next});
    }
    s = next;
    if (++steps > 100'000'000) {
      throw TracingError("segmentation did not terminate on track " +
                         std::to_string(track.id));
    }
  }
  if (segments.empty()) {
    throw TracingError("track " + std::to_string(track.id) + " has zero length");
  }
  segments.back().s_end = length;
  return segments;
}

void TrackSet2D::segment(const ExtrudedGeometry& geom) {
  segments_.clear();
  offsets_.assign(1, 0);
  for (const auto& t : tracks_) {
    auto segs = segment_track_2d(t, geom);
    segments_.insert(segments_.end(), segs.begin(), segs.end());
    offsets_.push_back(segments_.size());
  }
}

void TrackSet2D::write_csv(std::ostream& os) const {
  os << "track,m,s_start,s_end,region\n";
  auto old = os.precision(17);
  for (const auto& t : tracks_) {
    for (const auto& seg : segments(t.id)) {
      os << t.id << ',' << t.azim << ',' << seg.s_start << ',' << seg.s_end << ','
         << seg.region << '\n';
    }
  }
  os.precision(old);
}

}  // namespace moc3d
