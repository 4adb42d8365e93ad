#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "moc3d/error.hpp"
#include "moc3d/geometry.hpp"

namespace moc3d {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
  std::ostringstream os;
  os << "geometry input";
  if (node.IsDefined() && node.Mark().line >= 0) {
    os << " line " << node.Mark().line + 1;
  }
  os << ": " << what;
  throw GeometryError(os.str());
}

std::vector<double> read_vector(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) fail(node, "'" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& item : node) out.push_back(item.as<double>());
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string word; is >> word;) out.push_back(word);
  return out;
}

// A layout row is either a YAML list of names or a whitespace separated string.
std::vector<std::vector<std::string>> read_layout(const YAML::Node& node,
                                                  const std::string& key) {
  if (!node.IsSequence()) fail(node, "'" + key + "' must be a list of rows");
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : node) {
    if (row.IsScalar()) {
      rows.push_back(split_words(row.as<std::string>()));
    } else if (row.IsSequence()) {
      std::vector<std::string> names;
      for (const auto& item : row) names.push_back(item.as<std::string>());
      rows.push_back(std::move(names));
    } else {
      fail(row, "layout row must be a list or a string");
    }
  }
  return rows;
}

MaterialXS read_material(const std::string& name, const YAML::Node& node) {
  if (!node.IsMap()) fail(node, "material '" + name + "' must be a mapping");
  MaterialXS mat;
  mat.name = name;
  if (!node["sigma_t"]) fail(node, "material '" + name + "' lacks sigma_t");
  mat.sigma_t = read_vector(node["sigma_t"], "sigma_t");
  const auto groups = mat.sigma_t.size();
  if (auto s = node["sigma_s"]) {
    if (!s.IsSequence() || s.size() != groups) {
      fail(s, "sigma_s of '" + name + "' must have one row per group");
    }
    for (const auto& row : s) {
      auto values = read_vector(row, "sigma_s");
      if (values.size() != groups) {
        fail(row, "sigma_s row of '" + name + "' has the wrong length");
      }
      mat.sigma_s.insert(mat.sigma_s.end(), values.begin(), values.end());
    }
  } else {
    mat.sigma_s.assign(groups * groups, 0.0);
  }
  if (auto f = node["nu_sigma_f"]) mat.nu_sigma_f = read_vector(f, "nu_sigma_f");
  if (auto c = node["chi"]) mat.chi = read_vector(c, "chi");
  return mat;
}

BoundaryCondition read_bc(const YAML::Node& node) {
  auto text = node.as<std::string>();
  if (text == "vacuum") return BoundaryCondition::Vacuum;
  if (text == "reflective") return BoundaryCondition::Reflective;
  fail(node, "boundary condition must be 'vacuum' or 'reflective', got '" + text + "'");
}

GeometrySpec parse_node(const YAML::Node& root) {
  if (!root.IsMap()) fail(root, "top level must be a mapping");
  GeometrySpec spec;

  auto materials = root["materials"];
  if (!materials || !materials.IsMap()) fail(root, "missing 'materials' section");
  for (const auto& entry : materials) {
    spec.materials.push_back(
        read_material(entry.first.as<std::string>(), entry.second));
  }

  auto cells = root["cells"];
  if (!cells || !cells.IsMap()) fail(root, "missing 'cells' section");
  for (const auto& entry : cells) {
    CellSpec cell;
    cell.name = entry.first.as<std::string>();
    const auto& body = entry.second;
    if (auto radii = body["radii"]) cell.radii = read_vector(radii, "radii");
    auto mats = body["materials"];
    if (!mats) fail(body, "cell '" + cell.name + "' lacks materials");
    if (mats.IsScalar()) {
      cell.materials.push_back({mats.as<std::string>()});
    } else {
      for (const auto& ring : mats) {
        if (ring.IsScalar()) {
          cell.materials.push_back({ring.as<std::string>()});
        } else {
          std::vector<std::string> per_slab;
          for (const auto& m : ring) per_slab.push_back(m.as<std::string>());
          cell.materials.push_back(std::move(per_slab));
        }
      }
    }
    if (auto planes = body["axial_planes"]) {
      cell.axial_planes = read_vector(planes, "axial_planes");
    }
    spec.cells.push_back(std::move(cell));
  }

  if (auto assemblies = root["assemblies"]) {
    for (const auto& entry : assemblies) {
      auto name = entry.first.as<std::string>();
      spec.assemblies[name] = read_layout(entry.second, name);
    }
  }

  auto lattice = root["lattice"];
  if (!lattice) fail(root, "missing 'lattice' section");
  spec.layout = read_layout(lattice["layout"], "layout");
  if (auto pitch = lattice["pitch"]) {
    if (pitch.IsScalar()) {
      double p = pitch.as<double>();
      spec.pitch = std::array<double, 2>{p, p};
    } else {
      auto v = read_vector(pitch, "pitch");
      if (v.size() != 2) fail(pitch, "pitch must be a number or [px, py]");
      spec.pitch = std::array<double, 2>{v[0], v[1]};
    }
  }
  if (auto w = lattice["widths"]) spec.column_widths = read_vector(w, "widths");
  if (auto h = lattice["heights"]) spec.row_heights = read_vector(h, "heights");
  if (auto o = lattice["origin"]) {
    auto v = read_vector(o, "origin");
    if (v.size() != 2) fail(o, "origin must be [x, y]");
    spec.origin = {v[0], v[1]};
  }

  auto axial = root["axial"];
  if (!axial || !axial["planes"]) fail(root, "missing 'axial.planes'");
  spec.axial_planes = read_vector(axial["planes"], "planes");
  if (auto overrides = axial["overrides"]) {
    for (const auto& item : overrides) {
      AxialOverride ov;
      auto range = read_vector(item["z_range"], "z_range");
      if (range.size() != 2) fail(item, "z_range must be [z_lo, z_hi]");
      ov.z_lo = range[0];
      ov.z_hi = range[1];
      for (const auto& r : item["replace"]) {
        ov.replace[r.first.as<std::string>()] = r.second.as<std::string>();
      }
      spec.overrides.push_back(std::move(ov));
    }
  }

  if (auto boundary = root["boundary"]) {
    if (auto all = boundary["default"]) spec.boundary.fill(read_bc(all));
    static const char* names[kNumFaces] = {"x_min", "x_max", "y_min",
                                           "y_max", "z_min", "z_max"};
    for (int f = 0; f < kNumFaces; ++f) {
      if (auto node = boundary[names[f]]) {
        spec.boundary[static_cast<std::size_t>(f)] = read_bc(node);
      }
    }
  }
  return spec;
}

}  // namespace

GeometrySpec parse_geometry_spec(const std::string& yaml_text) {
  try {
    return parse_node(YAML::Load(yaml_text));
  } catch (const YAML::Exception& e) {
    throw GeometryError(std::string("geometry input: ") + e.what());
  }
}

GeometrySpec load_geometry_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open geometry file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_geometry_spec(buffer.str());
}

}  // namespace moc3d
