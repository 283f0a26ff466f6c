#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cvkit/common.hpp"

// Exact (O(N^2)) t-SNE. Rows of the data matrix are points.
namespace cvkit::tsne {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 1;
  // Per-point keys for the initial positions; row indices when empty. A
  // point keeps its start position under row permutations if its key moves
  // with it.
  std::vector<std::uint64_t> point_keys;

  void validate(std::size_t points) const;
};

struct Embedding {
  RMatrix points;  // N x 2
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

inline constexpr double kDistanceFloor = 1e-12;
inline constexpr double kKlFloor = 1e-12;

RMatrix squared_distances(const RMatrix& data);

// p_{j|i} with sigma_i tuned so that 2^H(p_{.|i}) matches the perplexity.
RMatrix conditional_affinities(const RMatrix& data, double perplexity);

// (p_{j|i} + p_{i|j}) / (2N); sums to one.
RMatrix calibrate_affinities(const RMatrix& data, double perplexity);

// Student-t affinities q_ij of an embedding; zero diagonal, sums to one.
RMatrix student_t_affinities(const RMatrix& points);

double kl_divergence(const RMatrix& p, const RMatrix& q);

// dC/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2)
RMatrix kl_gradient(const RMatrix& p, const RMatrix& points);

Embedding embed(const RMatrix& data, const TsneConfig& config);
Embedding embed_affinities(const RMatrix& p, const TsneConfig& config);

// Mean silhouette (Euclidean) of a labelling; points in singleton clusters
// score zero.
double silhouette_score(const RMatrix& data, std::span<const int> labels);

namespace reference {

RMatrix kl_gradient(const RMatrix& p, const RMatrix& points);

}  // namespace reference

}  // namespace cvkit::tsne
