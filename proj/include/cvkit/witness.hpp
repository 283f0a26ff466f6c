#pragma once

#include <cstdint>
#include <vector>

#include "cvkit/fock.hpp"

namespace cvkit::witness {

inline constexpr double kPptCutoff = 1e-3;
inline constexpr double kQfiCutoff = 1e-8;
// Spectral floor: eigenvalue pairs with lambda_i + lambda_j below it are
// dropped from the Fisher sum.
inline constexpr double kSpectralFloor = 1e-10;

// Local generators per mode: (x, p) for order 1, plus x^2, p^2, (xp+px)/2 for
// order 2.
struct GeneratorSet {
  int order = 1;
  std::vector<CMatrix> per_mode;

  static GeneratorSet of_order(int order, fock::FockCutoff cutoff);
  int size() const { return static_cast<int>(per_mode.size()); }
};

struct WitnessValues {
  double ppt_min = 0.0;  // -lambda_min of the partial transpose
  double qfi1 = 0.0;
  double qfi2 = 0.0;
};

struct LabelVector {
  std::uint8_t e_ppt = 0;
  std::uint8_t e_qfi1 = 0;
  std::uint8_t e_qfi2 = 0;

  std::uint8_t operator[](int i) const { return i == 0 ? e_ppt : i == 1 ? e_qfi1 : e_qfi2; }
  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

double ppt_witness(const fock::TwoModeState& state);

// F and Gamma over the 2k generators (mode-1 block first). Gamma is the
// per-mode symmetrized covariance with zero cross-mode blocks.
struct QfiForms {
  RMatrix fisher;
  RMatrix gamma;
};

QfiForms qfi_quadratic_forms(const fock::TwoModeState& state, const GeneratorSet& gens);
QfiForms qfi_quadratic_forms(const fock::TwoModeState& state, const fock::Spectrum& spectrum,
                             const GeneratorSet& gens);

// Top eigenvalue of F - 4 Gamma: max over unit coefficient vectors of
// F_Q(rho, A1 + A2) - 4 (Var A1 + Var A2).
double qfi_witness(const QfiForms& forms);
double qfi_witness(const fock::TwoModeState& state, const GeneratorSet& gens);

LabelVector labels_from_values(const WitnessValues& values);

struct Labelled {
  WitnessValues values;
  LabelVector labels;
};

Labelled label_state(const fock::TwoModeState& state);

}  // namespace cvkit::witness
