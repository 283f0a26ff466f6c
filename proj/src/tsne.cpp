#include "cvkit/tsne.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace cvkit::tsne {

namespace {

constexpr int kSearchSteps = 50;
constexpr double kSigmaLo = 1e-20;
constexpr double kSigmaHi = 1e20;
constexpr double kPerplexityTol = 1e-4;

// Row i of the conditional matrix for a given sigma; returns the entropy in bits.
double conditional_row(const RMatrix& d2, Eigen::Index i, double sigma, double* row) {
  const Eigen::Index n = d2.rows();
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i) dmin = std::min(dmin, d2(i, j));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    row[j] = j == i ? 0.0 : std::exp(-(d2(i, j) - dmin) * inv);
    sum += row[j];
  }
  double entropy = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    row[j] /= sum;
    if (row[j] > 0.0) entropy -= row[j] * std::log2(row[j]);
  }
  return entropy;
}

}  // namespace

void TsneConfig::validate(std::size_t points) const {
  if (points < 5) throw std::invalid_argument("t-SNE needs at least 5 points");
  if (!(perplexity > 1.0)) throw std::invalid_argument("perplexity must exceed 1");
  if (!(perplexity < (static_cast<double>(points) - 1.0) / 3.0))
    throw std::invalid_argument("perplexity must be below (N-1)/3, got " + std::to_string(perplexity));
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!point_keys.empty() && point_keys.size() != points)
    throw std::invalid_argument("point_keys must match the point count");
}

RMatrix squared_distances(const RMatrix& data) {
  const RVector norms = data.rowwise().squaredNorm();
  RMatrix d2 = (-2.0 * data * data.transpose()).eval();
  d2.colwise() += norms;
  d2.rowwise() += norms.transpose();
  d2 = d2.cwiseMax(kDistanceFloor);
  d2.diagonal().setZero();
  return d2;
}

RMatrix conditional_affinities(const RMatrix& data, double perplexity) {
  const Eigen::Index n = data.rows();
  if (n < 3) throw std::invalid_argument("affinities need at least 3 points");
  if (!(perplexity > 1.0)) throw std::invalid_argument("perplexity must exceed 1");
  const RMatrix d2 = squared_distances(data);
  if (!d2.allFinite()) throw std::invalid_argument("non-finite pairwise distances");
  const double target = std::log2(perplexity);
  // Row-major storage so each row is contiguous for the per-row search.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cond(n, n);

#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    double* row = cond.row(i).data();
    double lo = std::log(kSigmaLo), hi = std::log(kSigmaHi);
    for (int step = 0; step < kSearchSteps; ++step) {
      const double mid = 0.5 * (lo + hi);
      const double h = conditional_row(d2, i, std::exp(mid), row);
      if (std::abs(h - target) < kPerplexityTol * 1e-3) break;
      // Entropy grows with sigma.
      if (h > target) hi = mid; else lo = mid;
    }
    conditional_row(d2, i, std::exp(0.5 * (lo + hi)), row);
  }
  return cond;
}

RMatrix calibrate_affinities(const RMatrix& data, double perplexity) {
  const RMatrix cond = conditional_affinities(data, perplexity);
  return (cond + cond.transpose()) / (2.0 * static_cast<double>(data.rows()));
}

RMatrix student_t_affinities(const RMatrix& points) {
  RMatrix num = (1.0 + squared_distances(points).array()).inverse().matrix();
  num.diagonal().setZero();
  return num / num.sum();
}

double kl_divergence(const RMatrix& p, const RMatrix& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i == j) continue;
      const double pij = std::max(p(i, j), kKlFloor);
      kl += pij * std::log(pij / std::max(q(i, j), kKlFloor));
    }
  return kl;
}

RMatrix kl_gradient(const RMatrix& p, const RMatrix& points) {
  const Eigen::Index n = points.rows();
  RMatrix num = (1.0 + squared_distances(points).array()).inverse().matrix();
  num.diagonal().setZero();
  const double z = num.sum();
  RMatrix grad(n, points.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(points.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double coeff = (p(i, j) - num(i, j) / z) * num(i, j);
      g += coeff * (points.row(i) - points.row(j));
    }
    grad.row(i) = 4.0 * g;
  }
  return grad;
}

Embedding embed(const RMatrix& data, const TsneConfig& config) {
  config.validate(static_cast<std::size_t>(data.rows()));
  return embed_affinities(calibrate_affinities(data, config.perplexity), config);
}

Embedding embed_affinities(const RMatrix& p, const TsneConfig& config) {
  const Eigen::Index n = p.rows();
  config.validate(static_cast<std::size_t>(n));
  RMatrix y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto key = config.point_keys.empty() ? static_cast<std::uint64_t>(i) : config.point_keys[i];
    Rng rng = make_rng(config.seed, key);
    std::normal_distribution<double> normal(0.0, 1e-2);  // variance 1e-4
    y(i, 0) = normal(rng);
    y(i, 1) = normal(rng);
  }

  Embedding result;
  result.initial_kl = kl_divergence(p, student_t_affinities(y));
  if (!std::isfinite(result.initial_kl)) throw std::runtime_error("t-SNE: non-finite KL divergence");

  RMatrix update = RMatrix::Zero(n, 2);
  RMatrix gains = RMatrix::Ones(n, 2);
  const RMatrix exaggerated = p * config.exaggeration;
  for (int it = 0; it < config.iterations; ++it) {
    const bool early = it < config.exaggeration_iterations;
    const double momentum = it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    const RMatrix grad = kl_gradient(early ? exaggerated : p, y);
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      double& g = gains.data()[k];
      const bool same_sign = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
      g = same_sign ? g * 0.8 : g + 0.2;
      g = std::max(g, 0.01);
    }
    update = momentum * update - config.learning_rate * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();
  }
  result.final_kl = kl_divergence(p, student_t_affinities(y));
  if (!std::isfinite(result.final_kl) || !y.allFinite())
    throw std::runtime_error("t-SNE: optimisation diverged");
  result.points = std::move(y);
  return result;
}

double silhouette_score(const RMatrix& data, std::span<const int> labels) {
  const Eigen::Index n = data.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw std::invalid_argument("label count mismatch");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw std::invalid_argument("silhouette needs at least two clusters");
  const RMatrix dist = squared_distances(data).cwiseSqrt();
  std::vector<double> score(n, 0.0);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    std::map<int, double> sum;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sum[labels[j]] += dist(i, j);
    const int own = labels[i];
    if (sizes.at(own) < 2) continue;
    const double a = sum[own] / static_cast<double>(sizes.at(own) - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, count] : sizes)
      if (label != own) b = std::min(b, sum[label] / static_cast<double>(count));
    const double denom = std::max(a, b);
    score[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  double total = 0.0;
  for (double s : score) total += s;
  return total / static_cast<double>(n);
}

namespace reference {

RMatrix kl_gradient(const RMatrix& p, const RMatrix& points) {
  const RMatrix q = student_t_affinities(points);
  const Eigen::Index n = points.rows();
  RMatrix grad = RMatrix::Zero(n, points.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Eigen::RowVectorXd diff = points.row(i) - points.row(j);
      grad.row(i) += 4.0 * (p(i, j) - q(i, j)) * diff / (1.0 + diff.squaredNorm());
    }
  return grad;
}

}  // namespace reference

}  // namespace cvkit::tsne
