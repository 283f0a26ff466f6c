#pragma once

#include <array>
#include <vector>

#include "cvkit/fock.hpp"
#include "cvkit/homodyne.hpp"
#include "cvkit/witness.hpp"

namespace cvkit::maxlik {

inline constexpr int kDefaultIterations = 20;
inline constexpr double kProbabilityFloor = 1e-12;

// Binned quadrature effects. Because the 5x5 lattice of each bin is a tensor
// grid, every joint effect factorizes:
//   Pi(channel, b1, b2) = E_{q1}(b1) (x) E_{q2}(b2),
//   E_q(b) = sum_s (bin_width / 5) |v_s><v_s|   (q-quadrature eigenstates).
class BinPovm {
 public:
  explicit BinPovm(fock::FockCutoff cutoff);

  fock::FockCutoff cutoff() const { return cutoff_; }
  const CMatrix& single_mode(homodyne::Quadrature q, int bin) const {
    return q == homodyne::Quadrature::X ? x_[bin] : p_[bin];
  }
  // Full d^2 x d^2 effect; used by tests and the serial reference.
  CMatrix effect(homodyne::Channel channel, int b1, int b2) const;

  // Tr(rho Pi) for every bin of a channel (rows b1, columns b2).
  RMatrix probabilities(const CMatrix& rho, homodyne::Channel channel) const;

  // sum_{b1,b2} w(b1,b2) Pi(channel,b1,b2).
  CMatrix weighted_sum(const RMatrix& weights, homodyne::Channel channel) const;

  // sum over all bins of a channel; approximately coverage * identity.
  CMatrix channel_total(homodyne::Channel channel) const;

 private:
  fock::FockCutoff cutoff_;
  std::vector<CMatrix> x_;
  std::vector<CMatrix> p_;
  // Row b holds E(b) transposed and flattened: column n*d+m is E(b)(m, n).
  CMatrix x_flat_;
  CMatrix p_flat_;
  const CMatrix& flat(homodyne::Quadrature q) const {
    return q == homodyne::Quadrature::X ? x_flat_ : p_flat_;
  }
};

BinPovm build_bin_povm(fock::FockCutoff cutoff);

// Relative frequencies over all 4 x 24 x 24 bins (sum to one overall).
struct FrequencyTable {
  std::array<RMatrix, homodyne::kChannels> freq;
  std::size_t in_window = 0;
};

FrequencyTable frequencies(const homodyne::HomodyneSampleSet& samples);

double log_likelihood(const BinPovm& povm, const FrequencyTable& table, const CMatrix& rho);

// sum_j (f_j / p_j) Pi_j over bins with f_j > 0.
CMatrix r_operator(const BinPovm& povm, const FrequencyTable& table, const CMatrix& rho);

struct Reconstruction {
  fock::TwoModeState state;
  std::vector<double> log_likelihood;  // initial state, then one entry per iteration
};

// rho <- N[R rho R] starting from the maximally mixed state.
Reconstruction reconstruct(const BinPovm& povm, const FrequencyTable& table,
                           int iterations = kDefaultIterations);
Reconstruction reconstruct(const homodyne::HomodyneSampleSet& samples, fock::FockCutoff cutoff,
                           int iterations = kDefaultIterations);

witness::LabelVector label_reconstruction(const homodyne::HomodyneSampleSet& samples,
                                          fock::FockCutoff cutoff);

namespace reference {

// Explicit sum over full d^2 x d^2 effects.
CMatrix r_operator(const BinPovm& povm, const FrequencyTable& table, const CMatrix& rho);

}  // namespace reference

}  // namespace cvkit::maxlik
