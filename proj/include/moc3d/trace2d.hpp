#ifndef MOC3D_TRACE2D_HPP
#define MOC3D_TRACE2D_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "moc3d/geometry.hpp"
#include "moc3d/quadrature.hpp"

namespace moc3d {

enum class Direction : std::uint8_t { Forward = 0, Backward = 1 };

inline Direction reverse(Direction d) {
  return d == Direction::Forward ? Direction::Backward : Direction::Forward;
}

// Where a traversal continues after leaving the domain. The link is always
// the geometric reflection partner; `terminal` marks a vacuum face.
struct TrackLink {
  int track = -1;
  Direction dir = Direction::Forward;
  Face face = Face::None;
  bool terminal = true;
};

struct Track2D {
  int id = 0;
  int azim = 0;
  double x0 = 0.0, y0 = 0.0;
  double x1 = 0.0, y1 = 0.0;
  double length = 0.0;
  double ux = 0.0, uy = 0.0;  // unit direction of a forward sweep
  Face start_face = Face::None;
  Face end_face = Face::None;
  TrackLink fwd_link;  // continuation of a forward sweep past (x1, y1)
  TrackLink bwd_link;  // continuation of a backward sweep past (x0, y0)

  const TrackLink& link(Direction d) const {
    return d == Direction::Forward ? fwd_link : bwd_link;
  }
};

struct Segment2D {
  int region = 0;
  double s_start = 0.0;
  double s_end = 0.0;
  double length() const { return s_end - s_start; }
};

// Cyclic 2D tracks plus their radial segmentation.
class TrackSet2D {
 public:
  const AzimuthalQuadrature& quadrature() const { return quadrature_; }
  const std::vector<Track2D>& tracks() const { return tracks_; }
  const Track2D& track(int id) const { return tracks_[static_cast<std::size_t>(id)]; }
  int num_tracks() const { return static_cast<int>(tracks_.size()); }

  std::span<const Segment2D> segments(int track) const {
    auto t = static_cast<std::size_t>(track);
    return {segments_.data() + offsets_[t], offsets_[t + 1] - offsets_[t]};
  }
  std::size_t num_segments() const { return segments_.size(); }

  // Segments every track against the geometry.
  void segment(const ExtrudedGeometry& geom);
  bool segmented() const { return offsets_.size() == tracks_.size() + 1; }

  // Debug dump: track id, m, s_start, s_end, region id.
  void write_csv(std::ostream& os) const;

 private:
  friend TrackSet2D generate_tracks_2d(const ExtrudedGeometry& geom,
                                       int num_azim, double target_spacing);
  AzimuthalQuadrature quadrature_;
  std::vector<Track2D> tracks_;
  std::vector<Segment2D> segments_;
  std::vector<std::size_t> offsets_;
};

// Lays out cyclic tracks: angles are adjusted so that each family tiles the
// rectangle exactly and reflections land on other track endpoints.
TrackSet2D generate_tracks_2d(const ExtrudedGeometry& geom, int num_azim,
                              double target_spacing);

std::vector<Segment2D> segment_track_2d(const Track2D& track,
                                        const ExtrudedGeometry& geom);

}  // namespace moc3d

#endif
