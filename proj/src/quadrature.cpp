#include "moc3d/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "moc3d/error.hpp"

namespace moc3d {

PolarQuadrature PolarQuadrature::gauss_legendre(int num_polar) {
  if (num_polar < 1) throw ParameterError("num_polar must be >= 1");
  // Gauss-Legendre on mu = cos(theta) in [-1, 1] with 2N points.
  const int n = 2 * num_polar;
  std::vector<double> mu(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    mu[static_cast<std::size_t>(i)] = x;  // descending in i
    w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  PolarQuadrature q;
  q.num_polar = num_polar;
  for (int i = 0; i < n; ++i) {
    q.theta.push_back(std::acos(mu[static_cast<std::size_t>(i)]));
    q.weight.push_back(w[static_cast<std::size_t>(i)]);
  }
  // enforce exact mirror symmetry
  for (int i = 0; i < num_polar; ++i) {
    auto lo = static_cast<std::size_t>(i);
    auto hi = static_cast<std::size_t>(n - 1 - i);
    double wsym = 0.5 * (q.weight[lo] + q.weight[hi]);
    q.weight[lo] = q.weight[hi] = wsym;
    q.theta[hi] = std::numbers::pi - q.theta[lo];
  }
  return q;
}

PolarQuadrature PolarQuadrature::from_upper(std::vector<double> theta_upper,
                                            std::vector<double> weight_upper) {
  if (theta_upper.empty() || theta_upper.size() != weight_upper.size()) {
    throw ParameterError("polar quadrature needs matching angles and weights");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < theta_upper.size(); ++i) {
    double t = theta_upper[i];
    if (!(t > 0.0 && t <= 0.5 * std::numbers::pi) || !(weight_upper[i] > 0.0)) {
      throw ParameterError("upper polar angles must lie in (0, pi/2]");
    }
    if (i > 0 && !(t > theta_upper[i - 1])) {
      throw ParameterError("upper polar angles must be strictly increasing");
    }
    sum += weight_upper[i];
  }
  PolarQuadrature q;
  q.num_polar = static_cast<int>(theta_upper.size());
  q.theta = theta_upper;
  for (double w : weight_upper) q.weight.push_back(w / sum);
  for (std::size_t i = theta_upper.size(); i-- > 0;) {
    q.theta.push_back(std::numbers::pi - theta_upper[i]);
    q.weight.push_back(weight_upper[i] / sum);
  }
  return q;
}

double Quadrature3D::total_weight() const {
  double sum = 0.0;
  for (double w : weight) sum += w;
  return 2.0 * sum;
}

}  // namespace moc3d
