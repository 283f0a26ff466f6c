#include "cvkit/stellar.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cvkit::stellar {

using fock::FockCutoff;
using fock::GaussianCircuit;
using fock::TwoModeState;

namespace {

// Weight the top shell must carry for the stellar degree to be unambiguous.
constexpr double kMinShellWeight = 1e-4;

double shell_weight(const CoreState& core, int shell) {
  double w = 0.0;
  for (int n1 = 0; n1 <= shell; ++n1) w += std::norm(core.coeffs(n1, shell - n1));
  return w;
}

cplx polar(double magnitude, double phase) { return std::polar(magnitude, phase); }

}  // namespace

CVector CoreState::embed(FockCutoff cutoff) const {
  if (cutoff.n_max() < rank) throw std::invalid_argument("cutoff below core rank");
  CVector v = CVector::Zero(cutoff.joint_dim());
  for (int n1 = 0; n1 <= rank; ++n1)
    for (int n2 = 0; n1 + n2 <= rank; ++n2) v(cutoff.index(n1, n2)) = coeffs(n1, n2);
  return v;
}

void GenerationRanges::validate() const {
  if (r_max < 0 || alpha_max < 0 || eta_max < 0 || bs_max < 0)
    throw std::invalid_argument("generation bounds must be non-negative");
  if (eta_max > 1) throw std::invalid_argument("eta_max must be <= 1");
  if (bs_prob < 0 || bs_prob > 1) throw std::invalid_argument("bs_prob must lie in [0,1]");
}

CoreState random_core_state(int rank, Rng& rng) {
  if (rank < 0 || rank > kMaxRank)
    throw std::invalid_argument("core rank must be 0, 1 or 2, got " + std::to_string(rank));
  CoreState core;
  core.rank = rank;
  if (rank == 0) {
    core.coeffs(0, 0) = 1.0;
    return core;
  }
  // Complex standard normal: real and imaginary parts with variance 1/2.
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  for (;;) {
    core.coeffs.setZero();
    for (int shell = 0; shell <= rank; ++shell)
      for (int n1 = 0; n1 <= shell; ++n1) {
        const double re = normal(rng);
        const double im = normal(rng);
        core.coeffs(n1, shell - n1) = cplx(re, im);
      }
    const double norm = std::sqrt(core.coeffs.squaredNorm());
    core.coeffs /= norm;
    if (shell_weight(core, rank) >= kMinShellWeight) return core;
  }
}

CoreState random_core_state(int rank, std::uint64_t seed) {
  Rng rng(seed);
  return random_core_state(rank, rng);
}

int stellar_rank_of_core(const CoreState& core) {
  int rank = 0;
  for (int n1 = 0; n1 <= kMaxRank; ++n1)
    for (int n2 = 0; n2 <= kMaxRank; ++n2)
      if (std::abs(core.coeffs(n1, n2)) > 1e-10) rank = std::max(rank, n1 + n2);
  return rank;
}

FockCutoff working_cutoff(FockCutoff target) {
  return FockCutoff(std::max(3 * target.local_dim() - 1, target.n_max() + 20));
}

CVector circuit_output(const CoreState& core, const GaussianCircuit& circuit,
                       FockCutoff target, double& leakage) {
  const FockCutoff work = working_cutoff(target);
  GaussianCircuit lossless = circuit;
  lossless.loss = {0.0, 0.0};
  const CVector out = fock::apply_gaussian(lossless, work, core.embed(work));
  return fock::truncate_vector(out, work, target, leakage);
}

GeneratedState synthesize_random_state(const GenerationRanges& ranges, FockCutoff cutoff,
                                       std::uint64_t seed, const SynthesisOptions& options) {
  ranges.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> rank_dist(0, kMaxRank);
  const double two_pi = 2.0 * kPi;

  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    const int rank = options.force_rank ? *options.force_rank : rank_dist(rng);
    CoreState core = random_core_state(rank, rng);

    GaussianCircuit circuit;
    // Fixed draw order keeps (seed -> circuit) stable even when a beamsplitter
    // is omitted.
    const bool use_in = unit(rng) < ranges.bs_prob;
    const cplx bs_in = polar(ranges.bs_max * unit(rng), two_pi * unit(rng));
    const bool use_out = unit(rng) < ranges.bs_prob;
    const cplx bs_out = polar(ranges.bs_max * unit(rng), two_pi * unit(rng));
    if (use_in) circuit.bs_in = bs_in;
    if (use_out) circuit.bs_out = bs_out;
    for (int mode = 0; mode < 2; ++mode) {
      circuit.squeeze[mode] = polar(ranges.r_max * unit(rng), two_pi * unit(rng));
      circuit.displace[mode] = polar(ranges.alpha_max * unit(rng), two_pi * unit(rng));
    }
    for (int mode = 0; mode < 2; ++mode) circuit.loss[mode] = ranges.eta_max * unit(rng);

    double leakage = 0.0;
    const CVector psi = circuit_output(core, circuit, cutoff, leakage);
    if (leakage > kMaxLeakage) continue;

    TwoModeState pure = TwoModeState::from_pure(cutoff, psi, leakage);
    TwoModeState state = fock::apply_loss(pure, circuit.loss[0], circuit.loss[1]);
    return GeneratedState{std::move(state), circuit, core, attempt};
  }
  throw std::runtime_error("synthesize_random_state: trace leakage above " +
                           std::to_string(kMaxLeakage) + " after " +
                           std::to_string(kMaxAttempts) + " attempts");
}

double db_to_squeezing(double db) { return db * std::log(10.0) / 20.0; }

TwoModeState photon_subtracted_state(double r1_db, double r2_db, double omega1,
                                     double omega2, double gamma, double eta,
                                     FockCutoff cutoff) {
  if (gamma < 0.0 || gamma > kPi / 2 + 1e-12)
    throw std::invalid_argument("gamma must lie in [0, pi/2]");
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must lie in [0,1]");
  const double r1 = db_to_squeezing(r1_db);
  const double r2 = db_to_squeezing(r2_db);
  const cplx c10 = std::cos(gamma) * std::sinh(r1) * std::polar(1.0, omega1);
  const cplx c01 = std::sin(gamma) * std::sinh(r2) * std::polar(1.0, omega2);
  if (std::abs(c10) < 1e-14 && std::abs(c01) < 1e-14)
    throw std::invalid_argument("photon-subtracted state undefined: no squeezing in the subtracted mode");

  CoreState core;
  core.rank = 1;
  core.coeffs(1, 0) = c10;
  core.coeffs(0, 1) = c01;
  core.coeffs /= std::sqrt(core.coeffs.squaredNorm());

  GaussianCircuit circuit;
  circuit.squeeze = {cplx(r1, 0.0) * std::polar(1.0, omega1),
                     cplx(r2, 0.0) * std::polar(1.0, omega2)};
  double leakage = 0.0;
  const CVector psi = circuit_output(core, circuit, cutoff, leakage);
  return fock::apply_loss(TwoModeState::from_pure(cutoff, psi, leakage), eta, eta);
}

}  // namespace cvkit::stellar
