#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <tuple>

namespace oracle {

moc3d::ExtrudedGeometry make_geometry(const std::string& yaml) {
  return moc3d::build_geometry(moc3d::parse_geometry_spec(yaml));
}

std::unique_ptr<Problem> make_problem(const std::string& geometry_yaml, int num_azim,
                                      double azim_spacing, int num_polar,
                                      double axial_spacing) {
  auto p = std::make_unique<Problem>();
  p->geom = make_geometry(geometry_yaml);
  p->tracks = moc3d::generate_tracks_2d(p->geom, num_azim, azim_spacing);
  p->tracks.segment(p->geom);
  p->stacks = moc3d::build_stacks(p->tracks, moc3d::PolarQuadrature::gauss_legendre(num_polar),
                                  axial_spacing, p->geom);
  return p;
}

namespace {

const char* kTwoGroup = R"(
materials:
  fuel:
    sigma_t: [0.2263, 1.0119]
    sigma_s: [[0.2006, 0.0161], [0.0, 0.9355]]
    nu_sigma_f: [0.0067, 0.1241]
    chi: [1.0, 0.0]
  water:
    sigma_t: [0.2252, 1.0291]
    sigma_s: [[0.1901, 0.0349], [0.0, 1.0041]]
cells:
  pin:
    radii: [0.54]
    materials: [fuel, water]
)";

}  // namespace

std::string pin_cell_yaml(const std::string& boundary) {
  return std::string(kTwoGroup) + R"(
lattice:
  pitch: 1.26
  layout: [[pin]]
axial:
  planes: [0.0, 0.5, 1.2, 2.0]
boundary:
  default: )" + boundary + "\n";
}

std::string pin_lattice_yaml(int n, const std::string& boundary) {
  std::string layout;
  for (int r = 0; r < n; ++r) {
    layout += "    - [";
    for (int c = 0; c < n; ++c) layout += c ? ", pin" : "pin";
    layout += "]\n";
  }
  return std::string(kTwoGroup) + "lattice:\n  pitch: 1.26\n  layout:\n" + layout +
         "axial:\n  planes: [0.0, 1.0, 2.5, 4.0]\nboundary:\n  default: " + boundary + "\n";
}

std::string deck_path(const std::string& name) {
  return std::string(MOC3D_DECKS_DIR) + "/" + name;
}

//------------------------------------------------------------------------------

namespace {

struct Ray {
  double x0, y0, ux, uy, length;
  double z_base, cot, sin_theta;
  double x(double s) const { return x0 + s * ux; }
  double y(double s) const { return y0 + s * uy; }
  double z(double s) const { return z_base + s * cot; }
};

Ray make_ray(const moc3d::TraceContext& ctx, const moc3d::TrackIndex3D& tid) {
  const auto& t = ctx.tracks.track(tid.track2d);
  auto st = ctx.stacks.stack(tid.track2d, tid.polar);
  return {t.x0, t.y0, t.ux, t.uy, t.length,
          st.z0_bottom + tid.stack_index * st.delta_z, st.cot_theta, st.sin_theta};
}

// Portion [s_lo, s_hi] of the 2D track over which the ray is inside the box.
std::pair<double, double> clip(const Ray& r, const moc3d::BoundingBox& box) {
  double lo = 0.0, hi = r.length;
  if (r.cot != 0.0) {
    double a = (box.z_min - r.z_base) / r.cot;
    double b = (box.z_max - r.z_base) / r.cot;
    lo = std::max(lo, std::min(a, b));
    hi = std::min(hi, std::max(a, b));
  } else if (r.z_base < box.z_min || r.z_base > box.z_max) {
    hi = lo;
  }
  return {lo, hi};
}

int locate(const moc3d::ExtrudedGeometry& geom, double x, double y) {
  int found = -1;
  for (int r = 0; r < geom.num_radial_regions(); ++r) {
    if (geom.region_contains(r, x, y)) {
      if (found >= 0) throw std::logic_error("two regions claim one point");
      found = r;
    }
  }
  if (found < 0) throw std::logic_error("no region claims the point");
  return found;
}

}  // namespace

std::vector<moc3d::Segment3D> brute_force_trace(const moc3d::TraceContext& ctx,
                                                const moc3d::TrackIndex3D& tid) {
  const auto& geom = ctx.geom;
  Ray r = make_ray(ctx, tid);
  auto [s_lo, s_hi] = clip(r, geom.bounds());
  if (!(s_hi > s_lo)) return {};

  std::vector<double> events{s_lo, s_hi};
  auto add = [&](double s) {
    if (s > s_lo && s < s_hi) events.push_back(s);
  };
  if (r.ux != 0.0) for (double xp : geom.x_planes()) add((xp - r.x0) / r.ux);
  if (r.uy != 0.0) for (double yp : geom.y_planes()) add((yp - r.y0) / r.uy);

  std::set<std::tuple<int, int, int>> cells;
  for (int id = 0; id < geom.num_radial_regions(); ++id) {
    const auto& reg = geom.region(id);
    cells.insert({reg.cell_x, reg.cell_y, reg.pin});
  }
  for (auto [cx, cy, pin] : cells) {
    auto c = geom.cell_center(cx, cy);
    double dx = r.x0 - c[0], dy = r.y0 - c[1];
    double b = dx * r.ux + dy * r.uy;
    for (double rad : geom.pins()[static_cast<std::size_t>(pin)].radii) {
      double disc = b * b - (dx * dx + dy * dy - rad * rad);
      if (disc <= 0.0) continue;
      double root = std::sqrt(disc);
      add(-b - root);
      add(-b + root);
    }
  }
  if (r.cot != 0.0) {
    for (const auto& mesh : geom.meshes()) {
      for (double zp : mesh.planes()) add((zp - r.z_base) / r.cot);
    }
  }
  std::sort(events.begin(), events.end());

  std::vector<moc3d::Segment3D> out;
  for (std::size_t k = 0; k + 1 < events.size(); ++k) {
    double a = events[k], b = events[k + 1];
    if (b - a <= 0.0) continue;
    double m = 0.5 * (a + b);
    int region = locate(geom, r.x(m), r.y(m));
    int fsr = geom.fsr_at(region, r.z(m));
    double len = (b - a) / r.sin_theta;
    if (!out.empty() && out.back().fsr == fsr) {
      out.back().length += len;
    } else {
      out.push_back({fsr, len});
    }
  }
  std::erase_if(out, [](const moc3d::Segment3D& s) { return s.length <= 1e-12; });
  return out;
}

double brute_force_chord(const moc3d::TraceContext& ctx, const moc3d::TrackIndex3D& tid) {
  Ray r = make_ray(ctx, tid);
  auto [lo, hi] = clip(r, ctx.geom.bounds());
  return std::max(0.0, hi - lo) / r.sin_theta;
}

WalkedRanges walk_stack(const moc3d::ZStack& stack, double z_min, double z_max,
                        double s0, double s1, double tie_fraction) {
  WalkedRanges out;
  const double tie = tie_fraction * stack.delta_z;
  for (long i = 0; i < stack.count; ++i) {
    double za = moc3d::z_of(stack, static_cast<int>(i), s0);
    double zb = moc3d::z_of(stack, static_cast<int>(i), s1);
    double lo = std::min(za, zb), hi = std::max(za, zb);
    if (hi >= z_min - tie && lo <= z_max + tie) out.intersecting.push_back(i);
    if (lo >= z_min - tie && hi <= z_max + tie) out.full.push_back(i);
  }
  return out;
}

//------------------------------------------------------------------------------

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = z;
    w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

double sn_slab_keff(const std::vector<SlabRegion>& regions, int num_angles, double dx,
                    double tol) {
  std::vector<double> st, ss, nf;
  for (const auto& r : regions) {
    int cells = static_cast<int>(std::lround(r.width / dx));
    for (int c = 0; c < cells; ++c) {
      st.push_back(r.sigma_t);
      ss.push_back(r.sigma_s);
      nf.push_back(r.nu_sigma_f);
    }
  }
  const std::size_t n = st.size();
  std::vector<double> mu, wt;
  gauss_legendre(num_angles, mu, wt);

  std::vector<double> phi(n, 1.0), next(n);
  double k = 1.0;
  auto production = [&](const std::vector<double>& f) {
    double p = 0.0;
    for (std::size_t i = 0; i < n; ++i) p += nf[i] * f[i];
    return p;
  };
  for (int outer = 0; outer < 100000; ++outer) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int m = 0; m < num_angles; ++m) {
      double a = std::abs(mu[static_cast<std::size_t>(m)]);
      double w = wt[static_cast<std::size_t>(m)];
      double psi = 0.0;
      for (std::size_t step = 0; step < n; ++step) {
        std::size_t i = mu[static_cast<std::size_t>(m)] > 0 ? step : n - 1 - step;
        double q = 0.5 * (ss[i] * phi[i] + nf[i] * phi[i] / k);
        double tau = st[i] * dx / a;
        double qs = q / st[i];
        double out = qs + (psi - qs) * std::exp(-tau);
        next[i] += w * (qs + (psi - out) / tau);
        psi = out;
      }
    }
    double k_new = k * production(next) / production(phi);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      change = std::max(change, std::abs(next[i] - phi[i]) / std::max(next[i], 1e-300));
    }
    phi.swap(next);
    bool done = std::abs(k_new - k) < tol && change < 1e3 * tol;
    k = k_new;
    if (done) break;
  }
  return k;
}

double expint_n(int n, double x) {
  // Substituting mu = t^2 keeps the integrand smooth near 0.
  const int steps = 200000;
  double h = 1.0 / steps;
  double sum = 0.0;
  auto f = [&](double t) {
    if (t == 0.0) return 0.0;
    double mu = t * t;
    return 2.0 * t * std::pow(mu, n - 2) * std::exp(-x / mu);
  };
  for (int i = 0; i <= steps; ++i) {
    double c = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += c * f(i * h);
  }
  return sum * h / 3.0;
}

double monte_carlo_outside_circle(double w, double h, double r, int samples,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-0.5 * w, 0.5 * w), uy(-0.5 * h, 0.5 * h);
  int outside = 0;
  for (int i = 0; i < samples; ++i) {
    double x = ux(rng), y = uy(rng);
    if (x * x + y * y > r * r) ++outside;
  }
  return static_cast<double>(outside) / samples;
}

std::vector<std::size_t> power_law_counts(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::size_t> out(n);
  for (auto& c : out) {
    // inverse CDF of the Pareto law with tail index 1
    double x = 1.0 / (1.0 - u(rng));
    c = static_cast<std::size_t>(std::min(x, static_cast<double>(cap)));
  }
  return out;
}

std::size_t worker_spread(const std::vector<std::size_t>& counts, int num_workers) {
  std::vector<std::size_t> load(static_cast<std::size_t>(num_workers), 0);
  for (std::size_t k = 0; k < counts.size(); ++k) load[k % load.size()] += counts[k];
  auto [lo, hi] = std::minmax_element(load.begin(), load.end());
  return *hi - *lo;
}

}  // namespace oracle
