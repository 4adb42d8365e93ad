#ifndef MOC3D_QUADRATURE_HPP
#define MOC3D_QUADRATURE_HPP

#include <vector>

namespace moc3d {

// Azimuthal angles of the cyclic track layout. Only the M/2 angles in (0, pi)
// are stored; each track is swept in both directions. Angle m and
// complement(m) = M/2 - 1 - m satisfy phi' = pi - phi.
struct AzimuthalQuadrature {
  int num_azim = 0;            // M, counted over 2 pi
  std::vector<double> phi;     // corrected angles, ascending
  std::vector<double> weight;  // angular width in radians; sums to pi
  std::vector<double> spacing; // effective perpendicular track spacing (cm)
  std::vector<int> num_x;      // tracks entering through the y_min face
  std::vector<int> num_y;      // tracks entering through a side face

  int num_angles() const { return static_cast<int>(phi.size()); }
  int complement(int m) const { return num_angles() - 1 - m; }
};

// Polar angles over the full range (0, pi), sorted ascending. The first N
// angles point upward (cos theta > 0); complement(n) = 2N - 1 - n mirrors
// about pi/2. Weights integrate sin(theta) and sum to 2.
struct PolarQuadrature {
  int num_polar = 0;  // N per hemisphere
  std::vector<double> theta;
  std::vector<double> weight;

  int num_angles() const { return static_cast<int>(theta.size()); }
  int complement(int n) const { return num_angles() - 1 - n; }
  bool upward(int n) const { return n < num_polar; }

  static PolarQuadrature gauss_legendre(int num_polar);
  // Builds a symmetric set from upper-hemisphere angles (theta <= pi/2) and
  // weights; the weights are scaled so the full set sums to 2.
  static PolarQuadrature from_upper(std::vector<double> theta_upper,
                                    std::vector<double> weight_upper);
};

// Product quadrature actually used by the sweep. Polar angles are corrected
// per azimuthal angle so that 3D tracks close under reflection, which makes
// theta depend on m. weight(m, n) is per travel direction; summing it over
// all stored (m, n) and both travel directions gives 4 pi.
struct Quadrature3D {
  int num_azim_angles = 0;
  int num_polar_angles = 0;
  std::vector<double> theta;    // [m * P + n]
  std::vector<double> weight;   // [m * P + n]
  std::vector<double> delta_z;  // axial ray spacing [m * P + n]
  std::vector<double> area;     // transverse area per 3D track [m * P + n]

  std::size_t index(int m, int n) const {
    return static_cast<std::size_t>(m * num_polar_angles + n);
  }
  double total_weight() const;
};

}  // namespace moc3d

#endif
