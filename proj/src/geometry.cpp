#include "moc3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "moc3d/error.hpp"

namespace moc3d {

const char* to_string(Face face) {
  switch (face) {
    case Face::XMin: return "x_min";
    case Face::XMax: return "x_max";
    case Face::YMin: return "y_min";
    case Face::YMax: return "y_max";
    case Face::ZMin: return "z_min";
    case Face::ZMax: return "z_max";
    case Face::None: break;
  }
  return "none";
}

const char* to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Vacuum ? "vacuum" : "reflective";
}

//==============================================================================
// MaterialXS
//==============================================================================

bool MaterialXS::fissile() const {
  return std::any_of(nu_sigma_f.begin(), nu_sigma_f.end(),
                     [](double v) { return v > 0.0; });
}

std::vector<std::string> MaterialXS::validate() {
  std::vector<std::string> warnings;
  const auto groups = sigma_t.size();
  if (groups == 0) {
    throw GeometryError("material '" + name + "' has no energy groups");
  }
  if (nu_sigma_f.empty()) nu_sigma_f.assign(groups, 0.0);
  if (chi.empty()) chi.assign(groups, 0.0);
  if (nu_sigma_f.size() != groups || chi.size() != groups ||
      sigma_s.size() != groups * groups) {
    throw GeometryError("material '" + name +
                        "' has inconsistent group dimensions");
  }
  auto check_nonnegative = [&](const std::vector<double>& v, const char* what) {
    for (double x : v) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw GeometryError("material '" + name + "': " + what +
                            " must be finite and nonnegative");
      }
    }
  };
  check_nonnegative(sigma_t, "sigma_t");
  check_nonnegative(sigma_s, "sigma_s");
  check_nonnegative(nu_sigma_f, "nu_sigma_f");
  check_nonnegative(chi, "chi");

  for (std::size_t g = 0; g < groups; ++g) {
    if (sigma_t[g] <= 0.0) {
      throw GeometryError("material '" + name +
                          "': void regions (sigma_t = 0) are not supported");
    }
    double out = 0.0;
    for (std::size_t h = 0; h < groups; ++h) out += sigma_s[g * groups + h];
    if (sigma_t[g] < out - 1e-12) {
      std::ostringstream os;
      os << "material '" << name << "' group " << g
         << ": sigma_t < scattering row sum (negative absorption)";
      warnings.push_back(os.str());
    }
  }

  double chi_sum = 0.0;
  for (double c : chi) chi_sum += c;
  if (fissile()) {
    if (std::abs(chi_sum - 1.0) > 1e-3) {
      throw GeometryError("material '" + name + "': chi does not sum to 1");
    }
    if (std::abs(chi_sum - 1.0) > 1e-9) {
      std::ostringstream os;
      os.precision(12);
      os << "material '" << name << "': chi sums to " << chi_sum
         << ", renormalized";
      warnings.push_back(os.str());
      for (double& c : chi) c /= chi_sum;
    }
  } else if (chi_sum != 0.0) {
    warnings.push_back("material '" + name +
                       "': chi given for a non-fissile material, ignored");
    std::fill(chi.begin(), chi.end(), 0.0);
  }
  return warnings;
}

//==============================================================================
// AxialMesh
//==============================================================================

AxialMesh::AxialMesh(std::vector<double> planes) : planes_(std::move(planes)) {
  if (planes_.size() < 2) {
    throw MeshError("axial mesh needs at least two planes");
  }
  for (std::size_t i = 1; i < planes_.size(); ++i) {
    if (!(planes_[i] > planes_[i - 1])) {
      std::ostringstream os;
      os << "axial planes must be strictly increasing (plane " << i << ")";
      throw MeshError(os.str());
    }
  }
}

int AxialMesh::slab_at(double z) const {
  if (!(z >= bottom() && z <= top())) {
    std::ostringstream os;
    os << "z = " << z << " outside axial extent [" << bottom() << ", " << top()
       << "]";
    throw DomainError(os.str());
  }
  auto it = std::upper_bound(planes_.begin(), planes_.end(), z);
  auto slab = static_cast<int>(it - planes_.begin()) - 1;
  return std::min(slab, num_slabs() - 1);
}

//==============================================================================
// ExtrudedGeometry
//==============================================================================

const AxialMesh& ExtrudedGeometry::mesh_of(int region) const {
  return meshes_[static_cast<std::size_t>(pins_[static_cast<std::size_t>(
                                              regions_[static_cast<std::size_t>(region)].pin)]
                                              .mesh)];
}

int ExtrudedGeometry::material_of(int fsr) const {
  const auto& reg = regions_[static_cast<std::size_t>(region_of_fsr(fsr))];
  const auto& pin = pins_[static_cast<std::size_t>(reg.pin)];
  return pin.materials[static_cast<std::size_t>(reg.ring)]
                      [static_cast<std::size_t>(slab_of_fsr(fsr))];
}

std::array<double, 2> ExtrudedGeometry::cell_center(int cx, int cy) const {
  return {0.5 * (x_planes_[static_cast<std::size_t>(cx)] +
                 x_planes_[static_cast<std::size_t>(cx) + 1]),
          0.5 * (y_planes_[static_cast<std::size_t>(cy)] +
                 y_planes_[static_cast<std::size_t>(cy) + 1])};
}

int ExtrudedGeometry::find_radial_region(double x, double y, double ux,
                                         double uy) const {
  constexpr double tol = 1e-9;
  double px = x + kNudge * ux;
  double py = y + kNudge * uy;
  if (!(px >= bounds_.x_min - tol && px <= bounds_.x_max + tol &&
        py >= bounds_.y_min - tol && py <= bounds_.y_max + tol)) {
    std::ostringstream os;
    os << "point (" << x << ", " << y << ") outside the radial domain";
    throw DomainError(os.str());
  }
  px = std::clamp(px, bounds_.x_min, bounds_.x_max);
  py = std::clamp(py, bounds_.y_min, bounds_.y_max);

  auto locate = [](const std::vector<double>& planes, double v) {
    auto it = std::upper_bound(planes.begin(), planes.end(), v);
    auto i = static_cast<int>(it - planes.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(planes.size()) - 2);
  };
  int cx = locate(x_planes_, px);
  int cy = locate(y_planes_, py);
  int cell = cell_index(cx, cy);
  const auto& pin = pins_[static_cast<std::size_t>(cell_pin_[static_cast<std::size_t>(cell)])];
  auto center = cell_center(cx, cy);
  double dx = px - center[0];
  double dy = py - center[1];
  double d2 = dx * dx + dy * dy;
  int ring = 0;
  while (ring < static_cast<int>(pin.radii.size()) &&
         !(d2 < pin.radii[static_cast<std::size_t>(ring)] *
                    pin.radii[static_cast<std::size_t>(ring)])) {
    ++ring;
  }
  return cell_region_base_[static_cast<std::size_t>(cell)] + ring;
}

bool ExtrudedGeometry::region_contains(int region, double x, double y) const {
  const auto& reg = regions_[static_cast<std::size_t>(region)];
  const auto cx = static_cast<std::size_t>(reg.cell_x);
  const auto cy = static_cast<std::size_t>(reg.cell_y);
  if (x < x_planes_[cx] || x > x_planes_[cx + 1] || y < y_planes_[cy] ||
      y > y_planes_[cy + 1]) {
    return false;
  }
  const auto& pin = pins_[static_cast<std::size_t>(reg.pin)];
  auto center = cell_center(reg.cell_x, reg.cell_y);
  double r = std::hypot(x - center[0], y - center[1]);
  double inner = reg.ring == 0 ? 0.0 : pin.radii[static_cast<std::size_t>(reg.ring) - 1];
  double outer = reg.ring < static_cast<int>(pin.radii.size())
                     ? pin.radii[static_cast<std::size_t>(reg.ring)]
                     : std::numeric_limits<double>::infinity();
  return r >= inner && r <= outer;
}

int ExtrudedGeometry::fsr_at(int region, double z) const {
  return fsr_id(region, mesh_of(region).slab_at(z));
}

double ExtrudedGeometry::region_area(int region) const {
  const auto& reg = regions_[static_cast<std::size_t>(region)];
  const auto& pin = pins_[static_cast<std::size_t>(reg.pin)];
  const auto ring = static_cast<std::size_t>(reg.ring);
  const double pi = std::numbers::pi;
  if (ring < pin.radii.size()) {
    double outer = pin.radii[ring];
    double inner = ring == 0 ? 0.0 : pin.radii[ring - 1];
    return pi * (outer * outer - inner * inner);
  }
  const auto cx = static_cast<std::size_t>(reg.cell_x);
  const auto cy = static_cast<std::size_t>(reg.cell_y);
  double w = x_planes_[cx + 1] - x_planes_[cx];
  double h = y_planes_[cy + 1] - y_planes_[cy];
  double r = pin.radii.empty() ? 0.0 : pin.radii.back();
  double area = w * h - pi * r * r;
  if (area < 0.0) {
    throw CapabilityError("ring extends outside its cell; no analytic area");
  }
  return area;
}

double ExtrudedGeometry::analytic_volume(int fsr) const {
  if (fsr < 0 || fsr >= num_fsrs_) {
    throw DomainError("FSR id out of range");
  }
  int region = region_of_fsr(fsr);
  int slab = slab_of_fsr(fsr);
  const auto& mesh = mesh_of(region);
  return region_area(region) * (mesh.z_max(slab) - mesh.z_min(slab));
}

double ExtrudedGeometry::distance_to_boundary(int region, double x, double y,
                                              double ux, double uy) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto& reg = regions_[static_cast<std::size_t>(region)];
  const auto cx = static_cast<std::size_t>(reg.cell_x);
  const auto cy = static_cast<std::size_t>(reg.cell_y);

  double best = inf;
  if (ux > 0.0) best = std::min(best, (x_planes_[cx + 1] - x) / ux);
  if (ux < 0.0) best = std::min(best, (x_planes_[cx] - x) / ux);
  if (uy > 0.0) best = std::min(best, (y_planes_[cy + 1] - y) / uy);
  if (uy < 0.0) best = std::min(best, (y_planes_[cy] - y) / uy);

  const auto& pin = pins_[static_cast<std::size_t>(reg.pin)];
  if (pin.radii.empty()) return best;
  auto center = cell_center(reg.cell_x, reg.cell_y);
  double dx = x - center[0];
  double dy = y - center[1];
  double b = dx * ux + dy * uy;
  double c0 = dx * dx + dy * dy;
  const auto ring = static_cast<std::size_t>(reg.ring);

  if (ring < pin.radii.size()) {
    // leave through the outer circle: larger root
    double r = pin.radii[ring];
    double disc = b * b - (c0 - r * r);
    if (disc > 0.0) {
      double t = -b + std::sqrt(disc);
      if (t > 0.0) best = std::min(best, t);
    }
  }
  if (ring > 0) {
    // hit the inner circle: smaller root, only when ahead
    double r = pin.radii[ring - 1];
    double disc = b * b - (c0 - r * r);
    if (disc > 0.0) {
      double t = -b - std::sqrt(disc);
      if (t > 0.0) best = std::min(best, t);
    }
  }
  return best;
}

//==============================================================================
// build_geometry
//==============================================================================

namespace {

using Layout = std::vector<std::vector<std::string>>;

// Expands assembly references into a flat grid of cell names, rows listed
// from the top.
Layout expand_layout(const GeometrySpec& spec) {
  if (spec.layout.empty() || spec.layout.front().empty()) {
    throw GeometryError("lattice layout is empty");
  }
  for (const auto& row : spec.layout) {
    if (row.size() != spec.layout.front().size()) {
      throw GeometryError("lattice layout rows have different lengths");
    }
  }
  bool any_assembly = false;
  for (const auto& row : spec.layout) {
    for (const auto& name : row) {
      if (spec.assemblies.count(name)) any_assembly = true;
    }
  }
  if (!any_assembly) return spec.layout;

  std::size_t block_rows = 0;
  std::size_t block_cols = 0;
  for (const auto& [name, block] : spec.assemblies) {
    if (block.empty() || block.front().empty()) {
      throw GeometryError("assembly '" + name + "' is empty");
    }
    for (const auto& row : block) {
      if (row.size() != block.front().size()) {
        throw GeometryError("assembly '" + name + "' rows differ in length");
      }
    }
    if (block_rows == 0) {
      block_rows = block.size();
      block_cols = block.front().size();
    } else if (block.size() != block_rows || block.front().size() != block_cols) {
      throw GeometryError("all assemblies must share the same dimensions");
    }
  }

  Layout out;
  for (const auto& core_row : spec.layout) {
    for (std::size_t r = 0; r < block_rows; ++r) {
      std::vector<std::string> row;
      for (const auto& name : core_row) {
        auto it = spec.assemblies.find(name);
        if (it == spec.assemblies.end()) {
          throw ReferenceError("layout mixes assemblies with unknown assembly '" +
                               name + "'");
        }
        const auto& block_row = it->second[r];
        row.insert(row.end(), block_row.begin(), block_row.end());
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<double> cumulative_planes(double origin,
                                      const std::vector<double>& widths,
                                      const char* what) {
  std::vector<double> planes{origin};
  for (double w : widths) {
    if (!(w > 0.0)) {
      throw GeometryError(std::string(what) + " must be positive");
    }
    planes.push_back(planes.back() + w);
  }
  return planes;
}

}  // namespace

ExtrudedGeometry build_geometry(const GeometrySpec& spec) {
  ExtrudedGeometry geom;

  // Materials
  std::unordered_map<std::string, int> material_index;
  for (auto mat : spec.materials) {
    auto warnings = mat.validate();
    geom.warnings_.insert(geom.warnings_.end(), warnings.begin(), warnings.end());
    if (geom.num_groups_ == 0) geom.num_groups_ = mat.num_groups();
    if (mat.num_groups() != geom.num_groups_) {
      throw GeometryError("material '" + mat.name +
                          "' has a different number of groups");
    }
    if (!material_index.emplace(mat.name, static_cast<int>(geom.materials_.size()))
             .second) {
      throw GeometryError("duplicate material '" + mat.name + "'");
    }
    geom.materials_.push_back(std::move(mat));
  }
  if (geom.materials_.empty()) throw GeometryError("no materials defined");

  auto resolve = [&](const std::string& name) {
    auto it = material_index.find(name);
    if (it == material_index.end()) {
      throw ReferenceError("unknown material '" + name + "'");
    }
    return it->second;
  };
  for (const auto& ov : spec.overrides) {
    if (!(ov.z_hi > ov.z_lo)) {
      throw MeshError("axial override range must have z_hi > z_lo");
    }
    for (const auto& [from, to] : ov.replace) {
      resolve(from);
      resolve(to);
    }
  }

  // Axial meshes: index 0 is the global mesh
  geom.meshes_.emplace_back(spec.axial_planes);
  const auto& global = geom.meshes_.front();

  // Lattice grid
  Layout layout = expand_layout(spec);
  const std::size_t ny = layout.size();
  const std::size_t nx = layout.front().size();
  std::vector<double> widths = spec.column_widths;
  std::vector<double> heights = spec.row_heights;
  if (spec.pitch) {
    if (!widths.empty() || !heights.empty()) {
      throw GeometryError("give either a uniform pitch or explicit widths, not both");
    }
    widths.assign(nx, (*spec.pitch)[0]);
    heights.assign(ny, (*spec.pitch)[1]);
  }
  if (widths.size() != nx || heights.size() != ny) {
    throw GeometryError("lattice widths/heights do not match the layout");
  }
  geom.x_planes_ = cumulative_planes(spec.origin[0], widths, "column widths");
  geom.y_planes_ = cumulative_planes(spec.origin[1], heights, "row heights");
  geom.bounds_ = {geom.x_planes_.front(), geom.x_planes_.back(),
                  geom.y_planes_.front(), geom.y_planes_.back(),
                  global.bottom(),        global.top()};
  geom.boundary_ = spec.boundary;

  // Pin types
  std::unordered_map<std::string, int> pin_index;
  for (const auto& cell : spec.cells) {
    PinType pin;
    pin.name = cell.name;
    pin.radii = cell.radii;
    for (std::size_t i = 0; i < pin.radii.size(); ++i) {
      if (!(pin.radii[i] > 0.0) || (i > 0 && !(pin.radii[i] > pin.radii[i - 1]))) {
        throw GeometryError("cell '" + cell.name +
                            "': radii must be positive and strictly increasing");
      }
    }
    if (cell.axial_planes) {
      AxialMesh mesh(*cell.axial_planes);
      if (std::abs(mesh.bottom() - global.bottom()) > 1e-12 ||
          std::abs(mesh.top() - global.top()) > 1e-12) {
        throw MeshError("cell '" + cell.name +
                        "': local axial mesh must span the global extent");
      }
      pin.mesh = static_cast<int>(geom.meshes_.size());
      geom.meshes_.push_back(std::move(mesh));
    }
    const auto& mesh = geom.meshes_[static_cast<std::size_t>(pin.mesh)];
    const auto slabs = static_cast<std::size_t>(mesh.num_slabs());
    if (cell.materials.size() != pin.radii.size() + 1) {
      throw GeometryError("cell '" + cell.name + "' needs " +
                          std::to_string(pin.radii.size() + 1) + " ring materials");
    }
    for (const auto& ring : cell.materials) {
      if (ring.size() != 1 && ring.size() != slabs) {
        throw GeometryError("cell '" + cell.name +
                            "': per-slab material list length must equal the "
                            "number of axial slabs");
      }
      std::vector<int> per_slab;
      for (std::size_t s = 0; s < slabs; ++s) {
        std::string name = ring.size() == 1 ? ring.front() : ring[s];
        double mid = 0.5 * (mesh.z_min(static_cast<int>(s)) + mesh.z_max(static_cast<int>(s)));
        for (const auto& ov : spec.overrides) {
          if (mid >= ov.z_lo && mid <= ov.z_hi) {
            auto it = ov.replace.find(name);
            if (it != ov.replace.end()) name = it->second;
          }
        }
        per_slab.push_back(resolve(name));
      }
      pin.materials.push_back(std::move(per_slab));
    }
    if (!pin_index.emplace(cell.name, static_cast<int>(geom.pins_.size())).second) {
      throw GeometryError("duplicate cell '" + cell.name + "'");
    }
    geom.pins_.push_back(std::move(pin));
  }

  // Cells and radial regions; layout rows are listed from the top
  geom.cell_pin_.assign(nx * ny, 0);
  geom.cell_region_base_.assign(nx * ny, 0);
  for (std::size_t cy = 0; cy < ny; ++cy) {
    const auto& row = layout[ny - 1 - cy];
    for (std::size_t cx = 0; cx < nx; ++cx) {
      auto it = pin_index.find(row[cx]);
      if (it == pin_index.end()) {
        throw ReferenceError("unknown cell '" + row[cx] + "' in lattice layout");
      }
      const auto& pin = geom.pins_[static_cast<std::size_t>(it->second)];
      double half = 0.5 * std::min(widths[cx], heights[cy]);
      if (!pin.radii.empty() && pin.radii.back() > half + 1e-12) {
        std::ostringstream os;
        os << "overlapping radial cells: cell '" << pin.name << "' at (" << cx
           << ", " << cy << ") has radius " << pin.radii.back()
           << " beyond its half-pitch " << half;
        throw GeometryError(os.str());
      }
      auto cell = static_cast<std::size_t>(geom.cell_index(static_cast<int>(cx),
                                                          static_cast<int>(cy)));
      geom.cell_pin_[cell] = it->second;
      geom.cell_region_base_[cell] = static_cast<int>(geom.regions_.size());
      for (int ring = 0; ring < pin.num_rings(); ++ring) {
        geom.regions_.push_back({static_cast<int>(cx), static_cast<int>(cy), ring,
                                 it->second});
      }
    }
  }

  // FSR index: regions in order, slabs within each region
  for (std::size_t r = 0; r < geom.regions_.size(); ++r) {
    geom.fsr_base_.push_back(geom.num_fsrs_);
    int slabs = geom.mesh_of(static_cast<int>(r)).num_slabs();
    for (int s = 0; s < slabs; ++s) geom.fsr_region_.push_back(static_cast<int>(r));
    geom.num_fsrs_ += slabs;
  }
  return geom;
}

}  // namespace moc3d
