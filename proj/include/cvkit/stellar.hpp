#pragma once

#include <cstdint>
#include <optional>

#include "cvkit/fock.hpp"

// Random states of bounded stellar rank: a finite core superposition pushed
// through a random two-mode Gaussian circuit and a loss channel.
namespace cvkit::stellar {

inline constexpr int kMaxRank = 2;

// Core amplitudes psi_{n1 n2} with n1 + n2 <= rank, stored on a
// (kMaxRank+1)^2 grid; entries outside the simplex are zero.
struct CoreState {
  int rank = 0;
  Eigen::Matrix<cplx, kMaxRank + 1, kMaxRank + 1> coeffs =
      Eigen::Matrix<cplx, kMaxRank + 1, kMaxRank + 1>::Zero();

  cplx coeff(int n1, int n2) const { return coeffs(n1, n2); }
  // Vector on the given cutoff.
  CVector embed(fock::FockCutoff cutoff) const;
};

struct GenerationRanges {
  double r_max = 1.15;      // squeezing magnitude bound (~10 dB)
  double alpha_max = 1.0;   // displacement magnitude bound
  double eta_max = 0.5;     // per-mode loss fraction bound
  double bs_prob = 0.5;     // inclusion probability of each beamsplitter
  double bs_max = kPi / 2;  // beamsplitter coupling magnitude bound

  void validate() const;
};

inline constexpr double kMaxLeakage = 1e-3;
inline constexpr int kMaxAttempts = 100;

CoreState random_core_state(int rank, Rng& rng);
CoreState random_core_state(int rank, std::uint64_t seed);

int stellar_rank_of_core(const CoreState& core);

struct GeneratedState {
  fock::TwoModeState state;
  fock::GaussianCircuit circuit;
  CoreState core;
  int attempts = 1;
};

struct SynthesisOptions {
  std::optional<int> force_rank;
};

// Cutoff used while the Gaussian circuit runs; leakage beyond the target
// cutoff is measured here before truncating.
fock::FockCutoff working_cutoff(fock::FockCutoff target);

// Pure state G|C> on `target`; `leakage` receives the weight lost by
// truncating from the working cutoff.
CVector circuit_output(const CoreState& core, const fock::GaussianCircuit& circuit,
                       fock::FockCutoff target, double& leakage);

GeneratedState synthesize_random_state(const GenerationRanges& ranges,
                                       fock::FockCutoff cutoff, std::uint64_t seed,
                                       const SynthesisOptions& options = {});

// Squeezing in dB: r = |dB| ln10 / 20, negative dB squeezes the conjugate
// quadrature (signed r).
double db_to_squeezing(double db);

// (cos g a1 + sin g a2) S1 S2 |00>, then symmetric loss eta on both modes.
fock::TwoModeState photon_subtracted_state(double r1_db, double r2_db, double omega1,
                                           double omega2, double gamma, double eta,
                                           fock::FockCutoff cutoff);

}  // namespace cvkit::stellar
