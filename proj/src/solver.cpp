#include "moc3d/solver.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "moc3d/error.hpp"

namespace moc3d {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;
constexpr double kSmallTau = 1e-8;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

AttenuationResult attenuate_segment(double psi_in, double q, double sigma_t,
                                    double length) {
  const double tau = sigma_t * length;
  double delta;
  if (tau < kSmallTau) {
    delta = (psi_in * tau - q * length) * (1.0 - 0.5 * tau);
  } else {
    delta = (psi_in - q / sigma_t) * -std::expm1(-tau);
  }
  const double psi_out = psi_in - delta;
  return {psi_out, psi_in - psi_out};
}

//------------------------------------------------------------------------------

ExpTable::ExpTable() : h_(8.9e-4), inv_h_(1.0 / 8.9e-4), x_max_(20.0) {
  auto n = static_cast<std::size_t>(std::ceil(x_max_ / h_)) + 2;
  values_.resize(n);
  for (std::size_t i = 0; i < n; ++i) values_[i] = -std::expm1(-h_ * static_cast<double>(i));
}

double ExpTable::operator()(double x) const {
  if (!(x < x_max_)) return -std::expm1(-x);
  double u = x * inv_h_;
  auto i = static_cast<std::size_t>(u);
  double f = u - static_cast<double>(i);
  return values_[i] + f * (values_[i + 1] - values_[i]);
}

//------------------------------------------------------------------------------

FixedSum::Raw FixedSum::to_raw(double x) {
  constexpr double kScale = 0x1p72;
  static_assert(kFractionBits == 72);
  double y = x * kScale;
  if (std::abs(y) < 9.0e18) return static_cast<Raw>(std::llrint(y));
  if (!(std::abs(y) < 1.0e38)) {
    throw NumericalError("value outside the deterministic accumulator range");
  }
  // |y| >= 2^63 is already an integer in double precision.
  double hi = std::floor(std::ldexp(y, -64));
  double lo = y - std::ldexp(hi, 64);
  Raw r = static_cast<Raw>(static_cast<long long>(hi));
  r *= static_cast<Raw>(1) << 64;
  r += static_cast<Raw>(static_cast<unsigned long long>(lo));
  return r;
}

double FixedSum::to_double(Raw r) {
  return static_cast<double>(r) * 0x1p-72;
}

//------------------------------------------------------------------------------

double BalanceTally::relative_residual() const {
  double gain = production / k_eff;
  return (gain - (absorption + leakage)) / gain;
}

namespace {

void source_into(const ExtrudedGeometry& geom, std::span<const double> flux,
                 double fission_scale, std::span<const double> external,
                 std::vector<double>& q) {
  const int groups = geom.num_groups();
  const auto g_count = static_cast<std::size_t>(groups);
  q.assign(flux.size(), 0.0);
  for (int j = 0; j < geom.num_fsrs(); ++j) {
    const auto& mat = geom.materials()[static_cast<std::size_t>(geom.material_of(j))];
    const double* phi = flux.data() + static_cast<std::size_t>(j) * g_count;
    double* out = q.data() + static_cast<std::size_t>(j) * g_count;
    double fission = 0.0;
    if (fission_scale != 0.0) {
      for (int g = 0; g < groups; ++g) fission += mat.nu_sigma_f[static_cast<std::size_t>(g)] * phi[g];
    }
    for (int g = 0; g < groups; ++g) {
      double s = fission_scale * mat.chi[static_cast<std::size_t>(g)] * fission;
      for (int gp = 0; gp < groups; ++gp) s += mat.scatter(gp, g) * phi[gp];
      out[g] = s / kFourPi;
      if (!external.empty()) out[g] += external[static_cast<std::size_t>(j) * g_count + static_cast<std::size_t>(g)];
    }
  }
}

}  // namespace

std::vector<double> compute_source(const ExtrudedGeometry& geom,
                                   std::span<const double> scalar_flux, double k) {
  if (!(k > 0.0)) throw EigenvalueError("eigenvalue must be positive");
  if (scalar_flux.size() != static_cast<std::size_t>(geom.num_fsrs() * geom.num_groups())) {
    throw NumericalError("scalar flux has the wrong size");
  }
  std::vector<double> q;
  source_into(geom, scalar_flux, 1.0 / k, {}, q);
  return q;
}

//------------------------------------------------------------------------------

struct TransportSolver::Tally {
  bool deterministic;
  std::size_t size;
  int groups;
  std::vector<std::vector<FixedSum::Raw>> fixed;  // per worker
  std::vector<double> shared;
  std::vector<std::vector<double>> leak;          // per worker, per group
  std::vector<std::vector<FixedSum::Raw>> leak_fixed;

  Tally(bool det, std::size_t n, int g, int workers)
      : deterministic(det), size(n), groups(g) {
    auto w = static_cast<std::size_t>(workers);
    auto ng = static_cast<std::size_t>(g);
    if (det) {
      fixed.assign(w, std::vector<FixedSum::Raw>(n, 0));
      leak_fixed.assign(w, std::vector<FixedSum::Raw>(ng, 0));
    } else {
      shared.assign(n, 0.0);
      leak.assign(w, std::vector<double>(ng, 0.0));
    }
  }

  void add(int worker, std::size_t index, double value) {
    if (deterministic) {
      fixed[static_cast<std::size_t>(worker)][index] += FixedSum::to_raw(value);
    } else {
      std::atomic_ref<double>(shared[index]).fetch_add(value, std::memory_order_relaxed);
    }
  }
  void add_leak(int worker, int g, double value) {
    if (deterministic) {
      leak_fixed[static_cast<std::size_t>(worker)][static_cast<std::size_t>(g)] +=
          FixedSum::to_raw(value);
    } else {
      leak[static_cast<std::size_t>(worker)][static_cast<std::size_t>(g)] += value;
    }
  }
  std::vector<double> totals() const {
    if (!deterministic) return shared;
    std::vector<double> out(size);
    for (std::size_t k = 0; k < size; ++k) {
      FixedSum::Raw r = 0;
      for (const auto& w : fixed) r += w[k];
      out[k] = FixedSum::to_double(r);
    }
    return out;
  }
  double leakage() const {
    double total = 0.0;
    if (deterministic) {
      FixedSum::Raw r = 0;
      for (const auto& w : leak_fixed) for (auto v : w) r += v;
      return FixedSum::to_double(r);
    }
    for (const auto& w : leak) for (double v : w) total += v;
    return total;
  }
};

TransportSolver::TransportSolver(const TraceContext& ctx, WorkPlan plan,
                                 SolverOptions options)
    : ctx_(ctx), plan_(std::move(plan)), opts_(std::move(options)),
      groups_(ctx.geom.num_groups()) {
  if (opts_.num_workers < 1) throw ExecutionError("need at least one worker");
  const auto& geom = ctx_.geom;
  const auto g = static_cast<std::size_t>(groups_);
  sigma_t_.resize(static_cast<std::size_t>(geom.num_fsrs()) * g);
  for (int j = 0; j < geom.num_fsrs(); ++j) {
    const auto& mat = geom.materials()[static_cast<std::size_t>(geom.material_of(j))];
    for (std::size_t k = 0; k < g; ++k) sigma_t_[static_cast<std::size_t>(j) * g + k] = mat.sigma_t[k];
  }

  if (!plan_.preload_set.empty()) {
    auto start = Clock::now();
    std::size_t budget = std::numeric_limits<std::size_t>::max();
    if (plan_.mode == SweepMode::Hybrid || plan_.memory_budget > 0) budget = plan_.memory_budget;
    store_ = generate_explicit_segments(ctx_, plan_.preload_set, budget);
    preload_seconds_ = seconds_since(start);
  }
  worker_segments_ = worker_loads(plan_.segment_counts, opts_.num_workers);
  compute_volumes();

  // Incoming flux slots fed by a reflective partner; the rest hold the fixed
  // boundary source.
  const TrackId n3d = ctx_.stacks.num_tracks();
  std::vector<char> fed(2 * n3d, 0);
  for (TrackId id = 0; id < n3d; ++id) {
    for (Direction d : {Direction::Forward, Direction::Backward}) {
      const auto& link = ctx_.stacks.link(id, d);
      if (!link.terminal) fed[2 * link.track + static_cast<std::size_t>(link.dir)] = 1;
    }
  }
  psi_in_.assign(2 * n3d * g, 0.0);
  for (std::size_t slot = 0; slot < 2 * n3d; ++slot) {
    if (fed[slot]) {
      for (std::size_t k = 0; k < g; ++k) psi_in_[slot * g + k] = 1.0 / kFourPi;
    } else if (opts_.boundary_source) {
      Face face = ctx_.stacks.entry_face(slot / 2, static_cast<Direction>(slot % 2));
      const auto& src = (*opts_.boundary_source)[static_cast<std::size_t>(face)];
      for (std::size_t k = 0; k < g && k < src.size(); ++k) psi_in_[slot * g + k] = src[k];
    }
  }
  fed_ = std::move(fed);
  psi_next_ = psi_in_;
}

void TransportSolver::compute_volumes() {
  const auto& geom = ctx_.geom;
  const auto nf = static_cast<std::size_t>(geom.num_fsrs());
  Tally tally(opts_.deterministic, nf, 1, opts_.num_workers);
  std::vector<std::vector<Segment3D>> buffers(static_cast<std::size_t>(opts_.num_workers));
  auto kernel = [&](std::size_t pos, int w) {
    const auto& tid = plan_.order[pos];
    const double wa = 2.0 * ctx_.stacks.weight(tid.track2d, tid.polar) *
                      ctx_.stacks.area(tid.track2d, tid.polar) / kFourPi;
    auto& buf = buffers[static_cast<std::size_t>(w)];
    buf.clear();
    visit_segments_otf(ctx_, tid, [&](int fsr, double len) { buf.push_back({fsr, len}); });
    for (const auto& s : buf) tally.add(w, static_cast<std::size_t>(s.fsr), wa * s.length);
  };
  execute(plan_.order, kernel, opts_.num_workers);
  volumes_ = tally.totals();
}

void TransportSolver::scale_boundary(double factor) {
  const auto g = static_cast<std::size_t>(groups_);
  for (std::size_t slot = 0; slot < fed_.size(); ++slot) {
    if (!fed_[slot]) continue;
    for (std::size_t k = 0; k < g; ++k) psi_in_[slot * g + k] *= factor;
  }
}

double TransportSolver::sweep(std::span<const double> source,
                              std::vector<double>& scalar_flux) {
  const auto start = Clock::now();
  const auto& geom = ctx_.geom;
  const auto& stacks = ctx_.stacks;
  const int G = groups_;
  const auto g = static_cast<std::size_t>(G);
  const std::size_t n = sigma_t_.size();
  if (source.size() != n) throw NumericalError("source has the wrong size");

  std::vector<double> qos(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(source[k])) {
      std::ostringstream os;
      os << "non-finite source in FSR " << k / g << ", group " << k % g;
      throw NumericalError(os.str());
    }
    qos[k] = source[k] / sigma_t_[k];
  }

  Tally tally(opts_.deterministic, n, G, opts_.num_workers);
  struct Buffers {
    std::vector<std::uint32_t> fsr;
    std::vector<double> len;
    std::vector<double> psi;
  };
  std::vector<Buffers> buffers(static_cast<std::size_t>(opts_.num_workers));
  for (auto& b : buffers) b.psi.resize(g);
  const bool use_table = opts_.exp_table;

  auto kernel = [&](std::size_t pos, int w) {
    const auto& tid = plan_.order[pos];
    const TrackId id = stacks.global_id(tid);
    const double wa = stacks.weight(tid.track2d, tid.polar) * stacks.area(tid.track2d, tid.polar);
    auto& buf = buffers[static_cast<std::size_t>(w)];
    std::span<const std::uint32_t> fsrs;
    std::span<const double> lens;
    long slot = store_.slot(id);
    if (slot >= 0) {
      fsrs = store_.fsrs(static_cast<std::size_t>(slot));
      lens = store_.lengths(static_cast<std::size_t>(slot));
    } else {
      buf.fsr.clear();
      buf.len.clear();
      visit_segments_otf(ctx_, tid, [&](int fsr, double len) {
        buf.fsr.push_back(static_cast<std::uint32_t>(fsr));
        buf.len.push_back(len);
      });
      fsrs = buf.fsr;
      lens = buf.len;
    }
    const std::size_t ns = fsrs.size();
    for (Direction d : {Direction::Forward, Direction::Backward}) {
      double* psi = buf.psi.data();
      const std::size_t in = (2 * id + static_cast<std::size_t>(d)) * g;
      for (std::size_t k = 0; k < g; ++k) psi[k] = psi_in_[in + k];
      for (std::size_t step = 0; step < ns; ++step) {
        std::size_t s = d == Direction::Forward ? step : ns - 1 - step;
        const std::size_t base = static_cast<std::size_t>(fsrs[s]) * g;
        const double len = lens[s];
        for (std::size_t k = 0; k < g; ++k) {
          const double tau = sigma_t_[base + k] * len;
          double f;
          if (tau < kSmallTau) {
            f = tau * (1.0 - 0.5 * tau);
          } else {
            f = use_table ? table_(tau) : -std::expm1(-tau);
          }
          const double delta = (psi[k] - qos[base + k]) * f;
          psi[k] -= delta;
          tally.add(w, base + k, wa * delta);
        }
      }
      const auto& link = stacks.link(id, d);
      if (link.terminal) {
        for (int k = 0; k < G; ++k) tally.add_leak(w, k, wa * psi[k]);
      } else {
        const std::size_t out = (2 * link.track + static_cast<std::size_t>(link.dir)) * g;
        for (std::size_t k = 0; k < g; ++k) psi_next_[out + k] = psi[k];
      }
    }
  };
  execute(plan_.order, kernel, opts_.num_workers);

  auto totals = tally.totals();
  scalar_flux.resize(n);
  double flux_max = 0.0;
  for (int j = 0; j < geom.num_fsrs(); ++j) {
    const double v = volumes_[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < g; ++k) {
      const std::size_t idx = static_cast<std::size_t>(j) * g + k;
      double phi = kFourPi * qos[idx];
      if (v > 0.0) phi += totals[idx] / (sigma_t_[idx] * v);
      if (!std::isfinite(phi)) {
        std::ostringstream os;
        os << "non-finite scalar flux in FSR " << j << ", group " << k;
        throw NumericalError(os.str());
      }
      scalar_flux[idx] = phi;
      flux_max = std::max(flux_max, std::abs(phi));
    }
  }
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (scalar_flux[idx] < -1e-8 * flux_max) {
      std::ostringstream os;
      os << "negative scalar flux " << scalar_flux[idx] << " in FSR " << idx / g
         << ", group " << idx % g;
      throw NumericalError(os.str());
    }
  }
  // Slots with a fixed boundary source are never written, so both buffers
  // keep it.
  std::swap(psi_in_, psi_next_);
  sweep_seconds_ += seconds_since(start);
  return tally.leakage();
}

double TransportSolver::update_keff(double k_old, double production_old,
                                    double production_new) {
  if (!(production_old > 0.0) || !(production_new > 0.0) ||
      !std::isfinite(production_new)) {
    throw EigenvalueError("fission production vanished in a fissile problem");
  }
  double k = k_old * production_new / production_old;
  if (!(k > 0.0) || !std::isfinite(k)) throw EigenvalueError("eigenvalue update failed");
  return k;
}

double TransportSolver::production(std::span<const double> scalar_flux) const {
  const auto& geom = ctx_.geom;
  const auto g = static_cast<std::size_t>(groups_);
  double total = 0.0;
  for (int j = 0; j < geom.num_fsrs(); ++j) {
    const auto& mat = geom.materials()[static_cast<std::size_t>(geom.material_of(j))];
    if (!mat.fissile()) continue;
    double f = 0.0;
    for (std::size_t k = 0; k < g; ++k) {
      f += mat.nu_sigma_f[k] * scalar_flux[static_cast<std::size_t>(j) * g + k];
    }
    total += volumes_[static_cast<std::size_t>(j)] * f;
  }
  return total;
}

namespace {

std::vector<double> fission_density(const ExtrudedGeometry& geom,
                                    std::span<const double> flux) {
  const auto g = static_cast<std::size_t>(geom.num_groups());
  std::vector<double> out(static_cast<std::size_t>(geom.num_fsrs()), 0.0);
  for (int j = 0; j < geom.num_fsrs(); ++j) {
    const auto& mat = geom.materials()[static_cast<std::size_t>(geom.material_of(j))];
    if (!mat.fissile()) continue;
    double f = 0.0;
    for (std::size_t k = 0; k < g; ++k) f += mat.nu_sigma_f[k] * flux[static_cast<std::size_t>(j) * g + k];
    out[static_cast<std::size_t>(j)] = f;
  }
  return out;
}

double rms_relative_change(std::span<const double> now, std::span<const double> before) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < now.size(); ++k) {
    if (before[k] > 0.0) {
      double r = (now[k] - before[k]) / before[k];
      sum += r * r;
      ++count;
    }
  }
  return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

}  // namespace

SolveResult TransportSolver::solve_eigenvalue() {
  const auto& geom = ctx_.geom;
  const auto g = static_cast<std::size_t>(groups_);
  const std::size_t n = sigma_t_.size();
  const double target = static_cast<double>(geom.num_fsrs());
  sweep_seconds_ = 0.0;

  SolveResult result;
  std::vector<double> flux(n, 1.0);
  double produced = production(flux);
  if (!(produced > 0.0)) {
    throw EigenvalueError("eigenvalue problem has no fission production");
  }
  double scale = target / produced;
  for (auto& v : flux) v *= scale;
  scale_boundary(scale);
  produced = production(flux);
  auto fission_old = fission_density(geom, flux);

  double k = 1.0;
  std::vector<double> source;
  for (int it = 1; it <= opts_.max_iterations; ++it) {
    source_into(geom, flux, 1.0 / k, {}, source);
    double leak = sweep(source, flux);
    double produced_new = production(flux);
    double k_new = update_keff(k, produced, produced_new);
    scale = target / produced_new;
    for (auto& v : flux) v *= scale;
    scale_boundary(scale);
    leak *= scale;
    produced = production(flux);

    auto fission_new = fission_density(geom, flux);
    IterationRecord rec;
    rec.iteration = it;
    rec.k_eff = k_new;
    rec.delta_k = k_new - k;
    rec.source_change = rms_relative_change(fission_new, fission_old);
    result.history.push_back(rec);
    fission_old = std::move(fission_new);
    k = k_new;
    result.iterations = it;

    // balance at the current state
    double absorption = 0.0;
    for (int j = 0; j < geom.num_fsrs(); ++j) {
      const auto& mat = geom.materials()[static_cast<std::size_t>(geom.material_of(j))];
      double a = 0.0;
      for (std::size_t k1 = 0; k1 < g; ++k1) {
        double removal = mat.sigma_t[k1];
        for (std::size_t k2 = 0; k2 < g; ++k2) removal -= mat.sigma_s[k1 * g + k2];
        a += removal * flux[static_cast<std::size_t>(j) * g + k1];
      }
      absorption += volumes_[static_cast<std::size_t>(j)] * a;
    }
    result.balance = {produced, absorption, leak, k};

    if (std::abs(rec.delta_k) < opts_.tol_k && rec.source_change < opts_.tol_src) {
      result.converged = true;
      break;
    }
  }
  result.k_eff = k;
  result.scalar_flux = std::move(flux);
  result.volumes = volumes_;
  result.sweep_seconds = sweep_seconds_;
  result.preload_seconds = preload_seconds_;
  result.preload_bytes = store_.bytes();
  result.worker_segments = worker_segments_;
  return result;
}

SolveResult TransportSolver::solve_fixed_source(std::span<const double> external_source) {
  const auto& geom = ctx_.geom;
  const std::size_t n = sigma_t_.size();
  if (!external_source.empty() && external_source.size() != n) {
    throw NumericalError("external source has the wrong size");
  }
  sweep_seconds_ = 0.0;
  SolveResult result;
  std::vector<double> flux(n, 0.0);
  std::vector<double> source;
  double leak = 0.0;
  for (int it = 1; it <= opts_.max_iterations; ++it) {
    source_into(geom, flux, 0.0, external_source, source);
    std::vector<double> old = flux;
    leak = sweep(source, flux);
    IterationRecord rec;
    rec.iteration = it;
    rec.source_change = rms_relative_change(flux, old);
    result.history.push_back(rec);
    result.iterations = it;
    if (it > 1 && rec.source_change < opts_.tol_src) {
      result.converged = true;
      break;
    }
  }
  result.balance.leakage = leak;
  result.k_eff = 0.0;
  result.scalar_flux = std::move(flux);
  result.volumes = volumes_;
  result.sweep_seconds = sweep_seconds_;
  result.worker_segments = worker_segments_;
  return result;
}

}  // namespace moc3d
