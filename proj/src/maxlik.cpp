#include "cvkit/maxlik.hpp"

#include <cmath>
#include <stdexcept>

namespace cvkit::maxlik {

using homodyne::Channel;
using homodyne::kBins;
using homodyne::kChannels;
using homodyne::Quadrature;
using homodyne::QuadGrid;

namespace {

CMatrix reshuffle(const CMatrix& rho, int d) {
  CMatrix r(d * d, d * d);
  for (int n1 = 0; n1 < d; ++n1)
    for (int m1 = 0; m1 < d; ++m1)
      for (int n2 = 0; n2 < d; ++n2)
        for (int m2 = 0; m2 < d; ++m2) r(n1 * d + m1, n2 * d + m2) = rho(n1 * d + n2, m1 * d + m2);
  return r;
}

CMatrix unshuffle(const CMatrix& r, int d) {
  CMatrix rho(d * d, d * d);
  for (int n1 = 0; n1 < d; ++n1)
    for (int m1 = 0; m1 < d; ++m1)
      for (int n2 = 0; n2 < d; ++n2)
        for (int m2 = 0; m2 < d; ++m2) rho(n1 * d + n2, m1 * d + m2) = r(n1 * d + m1, n2 * d + m2);
  return rho;
}

std::vector<CMatrix> single_mode_effects(int d, Quadrature q) {
  constexpr int L = QuadGrid::lattice;
  const double weight = QuadGrid::bin_width / L;
  std::vector<CMatrix> effects;
  effects.reserve(kBins);
  for (int b = 0; b < kBins; ++b) {
    std::vector<double> points(L);
    for (int s = 0; s < L; ++s) points[s] = QuadGrid::lattice_point(b, s);
    const CMatrix psi = homodyne::wavefunction_table(points, d, q);  // psi(s, n) = <v_s|n>
    // |v><v| has (n, m) element <n|v><v|m> = conj(psi_n) psi_m.
    effects.push_back(weight * psi.adjoint() * psi);
  }
  return effects;
}

// Row b, column n*d+m holds E(b)(m, n).
CMatrix flatten_transposed(const std::vector<CMatrix>& effects, int d) {
  CMatrix flat(static_cast<Eigen::Index>(effects.size()), d * d);
  for (std::size_t b = 0; b < effects.size(); ++b)
    for (int n = 0; n < d; ++n)
      for (int m = 0; m < d; ++m) flat(b, n * d + m) = effects[b](m, n);
  return flat;
}

CMatrix normalized(const CMatrix& rho) {
  CMatrix out = 0.5 * (rho + rho.adjoint());
  out /= out.trace().real();
  return out;
}

}  // namespace

BinPovm::BinPovm(fock::FockCutoff cutoff) : cutoff_(cutoff) {
  const int d = cutoff.local_dim();
  x_ = single_mode_effects(d, Quadrature::X);
  p_ = single_mode_effects(d, Quadrature::P);
  x_flat_ = flatten_transposed(x_, d);
  p_flat_ = flatten_transposed(p_, d);
}

CMatrix BinPovm::effect(Channel channel, int b1, int b2) const {
  const CMatrix& e1 = single_mode(homodyne::quadrature_of(channel, 0), b1);
  const CMatrix& e2 = single_mode(homodyne::quadrature_of(channel, 1), b2);
  const int d = cutoff_.local_dim();
  CMatrix out(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out.block(i * d, j * d, d, d) = e1(i, j) * e2;
  return out;
}

RMatrix BinPovm::probabilities(const CMatrix& rho, Channel channel) const {
  const int d = cutoff_.local_dim();
  const CMatrix& g1 = flat(homodyne::quadrature_of(channel, 0));
  const CMatrix& g2 = flat(homodyne::quadrature_of(channel, 1));
  return (g1 * reshuffle(rho, d) * g2.transpose()).real();
}

CMatrix BinPovm::weighted_sum(const RMatrix& weights, Channel channel) const {
  const int d = cutoff_.local_dim();
  // E(b)(n, m) = conj(E(b)(m, n)), so the untransposed flattening is conj(flat).
  const CMatrix h1 = flat(homodyne::quadrature_of(channel, 0)).conjugate();
  const CMatrix h2 = flat(homodyne::quadrature_of(channel, 1)).conjugate();
  const CMatrix shuffled = h1.transpose() * weights.cast<cplx>() * h2;
  return unshuffle(shuffled, d);
}

CMatrix BinPovm::channel_total(Channel channel) const {
  return weighted_sum(RMatrix::Ones(kBins, kBins), channel);
}

BinPovm build_bin_povm(fock::FockCutoff cutoff) { return BinPovm(cutoff); }

FrequencyTable frequencies(const homodyne::HomodyneSampleSet& samples) {
  FrequencyTable table;
  for (int c = 0; c < kChannels; ++c) {
    table.freq[c] = RMatrix::Zero(kBins, kBins);
    for (const homodyne::Outcome& o : samples.channels[c]) {
      const int i = homodyne::bin_index(o.v1);
      const int j = homodyne::bin_index(o.v2);
      if (i < 0 || j < 0) continue;
      table.freq[c](i, j) += 1.0;
      ++table.in_window;
    }
  }
  if (table.in_window == 0)
    throw std::invalid_argument("maxlik: no homodyne outcome inside the binning window");
  for (auto& f : table.freq) f /= static_cast<double>(table.in_window);
  return table;
}

double log_likelihood(const BinPovm& povm, const FrequencyTable& table, const CMatrix& rho) {
  double ll = 0.0;
  for (int c = 0; c < kChannels; ++c) {
    const RMatrix p = povm.probabilities(rho, homodyne::kAllChannels[c]);
    for (int i = 0; i < kBins; ++i)
      for (int j = 0; j < kBins; ++j) {
        const double f = table.freq[c](i, j);
        if (f > 0.0) ll += f * std::log(std::max(p(i, j), kProbabilityFloor));
      }
  }
  return ll;
}

CMatrix r_operator(const BinPovm& povm, const FrequencyTable& table, const CMatrix& rho) {
  std::array<CMatrix, kChannels> parts;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kChannels; ++c) {
    const Channel channel = homodyne::kAllChannels[c];
    const RMatrix p = povm.probabilities(rho, channel);
    RMatrix w = RMatrix::Zero(kBins, kBins);
    for (int i = 0; i < kBins; ++i)
      for (int j = 0; j < kBins; ++j) {
        const double f = table.freq[c](i, j);
        if (f > 0.0) w(i, j) = f / std::max(p(i, j), kProbabilityFloor);
      }
    parts[c] = povm.weighted_sum(w, channel);
  }
  CMatrix r = parts[0];
  for (int c = 1; c < kChannels; ++c) r += parts[c];
  return r;
}

Reconstruction reconstruct(const BinPovm& povm, const FrequencyTable& table, int iterations) {
  if (iterations < 0) throw std::invalid_argument("iteration count must be non-negative");
  const int n = povm.cutoff().joint_dim();
  CMatrix rho = CMatrix::Identity(n, n) / static_cast<double>(n);
  std::vector<double> history{log_likelihood(povm, table, rho)};
  for (int it = 0; it < iterations; ++it) {
    const CMatrix r = r_operator(povm, table, rho);
    rho = normalized(r * rho * r);
    history.push_back(log_likelihood(povm, table, rho));
  }
  return {fock::TwoModeState(povm.cutoff(), rho), std::move(history)};
}

Reconstruction reconstruct(const homodyne::HomodyneSampleSet& samples, fock::FockCutoff cutoff,
                           int iterations) {
  for (const auto& ch : samples.channels)
    if (ch.empty()) throw std::invalid_argument("maxlik: every channel needs samples");
  return reconstruct(BinPovm(cutoff), frequencies(samples), iterations);
}

witness::LabelVector label_reconstruction(const homodyne::HomodyneSampleSet& samples,
                                          fock::FockCutoff cutoff) {
  return witness::label_state(reconstruct(samples, cutoff).state).labels;
}

namespace reference {

CMatrix r_operator(const BinPovm& povm, const FrequencyTable& table, const CMatrix& rho) {
  const int n = povm.cutoff().joint_dim();
  CMatrix r = CMatrix::Zero(n, n);
  for (int c = 0; c < kChannels; ++c)
    for (int i = 0; i < kBins; ++i)
      for (int j = 0; j < kBins; ++j) {
        const double f = table.freq[c](i, j);
        if (f <= 0.0) continue;
        const CMatrix effect = povm.effect(homodyne::kAllChannels[c], i, j);
        const double p = std::max((rho * effect).trace().real(), kProbabilityFloor);
        r += (f / p) * effect;
      }
  return r;
}

}  // namespace reference

}  // namespace cvkit::maxlik
