#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cvkit/fock.hpp"

namespace cvkit::homodyne {

enum class Quadrature { X, P };

// Channel order of a correlation pattern.
enum class Channel : int { X1X2 = 0, X1P2 = 1, P1X2 = 2, P1P2 = 3 };
inline constexpr int kChannels = 4;
inline constexpr std::array<Channel, kChannels> kAllChannels{
    Channel::X1X2, Channel::X1P2, Channel::P1X2, Channel::P1P2};

Quadrature quadrature_of(Channel channel, int mode);

struct QuadGrid {
  static constexpr double lo = -6.0;
  static constexpr double hi = 6.0;
  static constexpr int bins = 24;
  static constexpr double bin_width = (hi - lo) / bins;
  static constexpr int lattice = 5;  // evaluation points per bin and axis
  static constexpr double sample_lo = -8.0;
  static constexpr double sample_hi = 8.0;
  static constexpr int sample_cells = 320;
  static constexpr double sample_cell_width = (sample_hi - sample_lo) / sample_cells;

  // Coordinate of lattice point `s` inside bin `b`.
  static constexpr double lattice_point(int b, int s) {
    return lo + bin_width * b + bin_width * (s + 0.5) / lattice;
  }
  static std::vector<double> lattice_axis();
  static std::vector<double> sample_axis();  // cell centres
};

inline constexpr int kBins = QuadGrid::bins;
inline constexpr int kPatternSize = kChannels * kBins * kBins;

// 4 x 24 x 24 non-negative entries, channel-major; within a channel the first
// index bins the mode-1 outcome and the second the mode-2 outcome. Each
// channel sums to one.
class CorrelationPattern {
 public:
  CorrelationPattern() : values_(kPatternSize, 0.0) {}

  double& at(int channel, int i, int j) { return values_[offset(channel, i, j)]; }
  double at(int channel, int i, int j) const { return values_[offset(channel, i, j)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> channel(int c) const {
    return std::span<const double>(values_).subspan(c * kBins * kBins, kBins * kBins);
  }

  // Divides every channel by its sum; throws if a channel is empty.
  void normalize();

  static constexpr int offset(int channel, int i, int j) {
    return (channel * kBins + i) * kBins + j;
  }

 private:
  std::vector<double> values_;
};

// Total-variation distance of one channel.
double total_variation(const CorrelationPattern& a, const CorrelationPattern& b, int channel);

// <v|n> for the x (X) or p (P) quadrature eigenstate.
cplx quad_wavefunction(int n, double value, Quadrature basis);

// Rows are `values`, columns photon numbers 0..d-1.
CMatrix wavefunction_table(std::span<const double> values, int d, Quadrature basis);

// Joint density at (v1, v2) by the direct Fock double sum.
double joint_pdf(const fock::TwoModeState& state, Channel channel, double v1, double v2);

// Density on the tensor grid v1 x v2 (rows v1); same quantity as joint_pdf,
// computed as Phi1 R Phi2^T with R the reshuffled density matrix.
RMatrix joint_pdf_grid(const fock::TwoModeState& state, Channel channel,
                       std::span<const double> v1, std::span<const double> v2);

// Median of the 5x5 lattice in every bin, then per-channel normalization.
CorrelationPattern pattern_from_pdf(const fock::TwoModeState& state);

// Probability mass per pattern bin: the N -> infinity histogram limit.
CorrelationPattern pattern_bin_integrals(const fock::TwoModeState& state);

struct Outcome {
  double v1;
  double v2;
};

struct HomodyneSampleSet {
  std::array<std::vector<Outcome>, kChannels> channels;

  std::size_t size(int channel) const { return channels[channel].size(); }
};

std::vector<Outcome> sample_quadratures(const fock::TwoModeState& state, Channel channel,
                                        std::size_t n, std::uint64_t seed);

// All four channels, each with seed derive_seed(seed, channel).
HomodyneSampleSet sample_homodyne(const fock::TwoModeState& state, std::size_t n,
                                  std::uint64_t seed);

// Histogram over the pattern window; outcomes outside [-6,6) are dropped.
CorrelationPattern pattern_from_samples(const HomodyneSampleSet& samples);

// Bin index of an outcome, or -1 when outside the pattern window.
int bin_index(double v);

// Relabelings of a pattern that follow from local symmetries of the state:
// per mode a signed permutation of the reported (x, p) pair, both modes with
// the same determinant (quarter-turn phase rotations, optionally composed
// with complex conjugation of the whole state), times the mode swap. Each
// maps the pattern of rho exactly to the pattern of a state with identical
// PPT spectrum and QFI witness values.
inline constexpr int kSymmetryCount = 64;

struct ModeSymmetry {
  std::array<int, 2> source;  // reported quadrature q reads old quadrature source[q]
  std::array<int, 2> sign;    // ... with this sign
};

struct PatternSymmetry {
  ModeSymmetry mode1;
  ModeSymmetry mode2;
  bool swap_modes = false;

  static PatternSymmetry element(int index);  // index in [0, kSymmetryCount)
  bool preserves_orientation() const;         // both modes det +1
};

// out.values()[k] = in.values()[map[k]]
const std::vector<int>& symmetry_index_map(int index);
CorrelationPattern apply_symmetry(const CorrelationPattern& pattern, int index);

// Serial implementations kept as oracles for the parallel kernels.
namespace reference {

CorrelationPattern pattern_from_pdf(const fock::TwoModeState& state);

}  // namespace reference

}  // namespace cvkit::homodyne
