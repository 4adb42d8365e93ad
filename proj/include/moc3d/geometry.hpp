#ifndef MOC3D_GEOMETRY_HPP
#define MOC3D_GEOMETRY_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace moc3d {

enum class BoundaryCondition : std::uint8_t { Vacuum, Reflective };

enum class Face : std::uint8_t { XMin, XMax, YMin, YMax, ZMin, ZMax, None };
inline constexpr int kNumFaces = 6;

const char* to_string(Face face);
const char* to_string(BoundaryCondition bc);

// Multigroup macroscopic cross sections of one material. Scattering is stored
// row-major as sigma_s[from * G + to].
struct MaterialXS {
  std::string name;
  std::vector<double> sigma_t;
  std::vector<double> sigma_s;
  std::vector<double> nu_sigma_f;
  std::vector<double> chi;

  int num_groups() const { return static_cast<int>(sigma_t.size()); }
  double scatter(int from, int to) const {
    return sigma_s[static_cast<std::size_t>(from * num_groups() + to)];
  }
  bool fissile() const;

  // Checks shape and sign invariants and throws GeometryError on a hard
  // violation. Soft violations (absorption < 0 after transport correction,
  // slightly unnormalized chi) are returned as warnings; chi is renormalized.
  std::vector<std::string> validate();
};

// Strictly increasing list of axial planes; slab s is [planes[s], planes[s+1])
// with the top slab closed above.
class AxialMesh {
 public:
  AxialMesh() = default;
  explicit AxialMesh(std::vector<double> planes);

  int num_slabs() const { return static_cast<int>(planes_.size()) - 1; }
  double bottom() const { return planes_.front(); }
  double top() const { return planes_.back(); }
  double z_min(int slab) const { return planes_[static_cast<std::size_t>(slab)]; }
  double z_max(int slab) const { return planes_[static_cast<std::size_t>(slab) + 1]; }
  std::span<const double> planes() const { return planes_; }

  // Slab containing z under the half-open convention. Throws DomainError
  // outside [bottom, top].
  int slab_at(double z) const;

 private:
  std::vector<double> planes_;
};

//------------------------------------------------------------------------------
// Parsed (not yet validated) geometry description.
//------------------------------------------------------------------------------

struct CellSpec {
  std::string name;
  std::vector<double> radii;
  // One entry per ring (innermost first, moderator last). Each entry holds
  // either a single material for every slab or one material per slab.
  std::vector<std::vector<std::string>> materials;
  std::optional<std::vector<double>> axial_planes;
};

struct AxialOverride {
  double z_lo = 0.0;
  double z_hi = 0.0;
  std::map<std::string, std::string> replace;
};

struct GeometrySpec {
  std::vector<MaterialXS> materials;
  std::vector<CellSpec> cells;
  // Named sub-layouts that the core layout may reference.
  std::map<std::string, std::vector<std::vector<std::string>>> assemblies;
  // Rows listed top (max y) to bottom, entries left to right.
  std::vector<std::vector<std::string>> layout;
  // Either a uniform pitch or explicit column widths / row heights
  // (row heights listed bottom to top).
  std::optional<std::array<double, 2>> pitch;
  std::vector<double> column_widths;
  std::vector<double> row_heights;
  std::array<double, 2> origin{0.0, 0.0};
  std::vector<double> axial_planes;
  std::vector<AxialOverride> overrides;
  std::array<BoundaryCondition, kNumFaces> boundary{
      BoundaryCondition::Vacuum, BoundaryCondition::Vacuum,
      BoundaryCondition::Vacuum, BoundaryCondition::Vacuum,
      BoundaryCondition::Vacuum, BoundaryCondition::Vacuum};
};

// Reads the YAML geometry format described in docs/geometry_format.md.
GeometrySpec load_geometry_spec(const std::string& path);
GeometrySpec parse_geometry_spec(const std::string& yaml_text);

//------------------------------------------------------------------------------
// Validated, immutable geometry.
//------------------------------------------------------------------------------

struct PinType {
  std::string name;
  std::vector<double> radii;
  int mesh = 0;
  // material index per [ring][slab of `mesh`]
  std::vector<std::vector<int>> materials;
  int num_rings() const { return static_cast<int>(radii.size()) + 1; }
};

struct RadialRegion {
  int cell_x = 0;
  int cell_y = 0;
  int ring = 0;
  int pin = 0;
};

struct BoundingBox {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double z_min = 0.0, z_max = 0.0;
  double width() const { return x_max - x_min; }
  double depth() const { return y_max - y_min; }
  double height() const { return z_max - z_min; }
};

class ExtrudedGeometry {
 public:
  // Tie-break distance used for point location on region boundaries.
  static constexpr double kNudge = 1e-10;

  int num_groups() const { return num_groups_; }
  int num_radial_regions() const { return static_cast<int>(regions_.size()); }
  int num_fsrs() const { return num_fsrs_; }
  int num_cells_x() const { return static_cast<int>(x_planes_.size()) - 1; }
  int num_cells_y() const { return static_cast<int>(y_planes_.size()) - 1; }
  const BoundingBox& bounds() const { return bounds_; }
  BoundaryCondition boundary(Face face) const {
    return boundary_[static_cast<std::size_t>(face)];
  }
  const std::vector<MaterialXS>& materials() const { return materials_; }
  const std::vector<AxialMesh>& meshes() const { return meshes_; }
  const std::vector<PinType>& pins() const { return pins_; }
  const RadialRegion& region(int id) const {
    return regions_[static_cast<std::size_t>(id)];
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Axial mesh of the extruded column above a radial region.
  const AxialMesh& mesh_of(int region) const;
  int fsr_id(int region, int slab) const {
    return fsr_base_[static_cast<std::size_t>(region)] + slab;
  }
  int region_of_fsr(int fsr) const {
    return fsr_region_[static_cast<std::size_t>(fsr)];
  }
  int slab_of_fsr(int fsr) const { return fsr - fsr_base_[static_cast<std::size_t>(region_of_fsr(fsr))]; }
  int material_of(int fsr) const;

  // Radial region containing (x, y). Points on a boundary resolve to the
  // region on the +kNudge side along (ux, uy). Throws DomainError outside.
  int find_radial_region(double x, double y, double ux = 1.0,
                         double uy = 0.0) const;

  // Per-cell containment predicate: does `region` contain the point?
  bool region_contains(int region, double x, double y) const;

  int fsr_at(int region, double z) const;

  double region_area(int region) const;
  double analytic_volume(int fsr) const;
  double domain_volume() const {
    return bounds_.width() * bounds_.depth() * bounds_.height();
  }

  // Distance from (x, y) along the unit direction (ux, uy) to the first
  // boundary of `region`. Returns +inf when no boundary lies ahead.
  double distance_to_boundary(int region, double x, double y, double ux,
                              double uy) const;

  std::array<double, 2> cell_center(int cell_x, int cell_y) const;
  std::span<const double> x_planes() const { return x_planes_; }
  std::span<const double> y_planes() const { return y_planes_; }

 private:
  friend ExtrudedGeometry build_geometry(const GeometrySpec& spec);

  int cell_index(int cx, int cy) const { return cy * num_cells_x() + cx; }

  int num_groups_ = 0;
  int num_fsrs_ = 0;
  BoundingBox bounds_;
  std::array<BoundaryCondition, kNumFaces> boundary_{};
  std::vector<double> x_planes_;
  std::vector<double> y_planes_;
  std::vector<int> cell_pin_;          // pin type per lattice cell
  std::vector<int> cell_region_base_;  // first radial region of each cell
  std::vector<MaterialXS> materials_;
  std::vector<AxialMesh> meshes_;
  std::vector<PinType> pins_;
  std::vector<RadialRegion> regions_;
  std::vector<int> fsr_base_;
  std::vector<int> fsr_region_;
  std::vector<std::string> warnings_;
};

ExtrudedGeometry build_geometry(const GeometrySpec& spec);

}  // namespace moc3d

#endif
