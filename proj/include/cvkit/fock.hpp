#pragma once

#include <array>
#include <optional>

#include "cvkit/common.hpp"

// Truncated two-mode Fock space. Basis ordering is |n1, n2> -> n1 * d + n2,
// with d = n_max + 1 the local dimension. Quadratures follow x = a + a^dag,
// p = i (a^dag - a), so the vacuum variance is 1.
namespace cvkit::fock {

class FockCutoff {
 public:
  explicit FockCutoff(int n_max);

  int n_max() const { return n_max_; }
  int local_dim() const { return n_max_ + 1; }
  int joint_dim() const { return (n_max_ + 1) * (n_max_ + 1); }
  int index(int n1, int n2) const { return n1 * local_dim() + n2; }

  friend bool operator==(FockCutoff, FockCutoff) = default;

 private:
  int n_max_;
};

inline constexpr int kDefaultNMax = 9;

enum class OperatorKind { Annihilation, Creation, X, P, X2, P2, SymXP };

struct ModeOperators {
  CMatrix a;
  CMatrix a_dag;
  CMatrix x;
  CMatrix p;
  CMatrix x2;
  CMatrix p2;
  CMatrix sym_xp;  // (xp + px) / 2

  const CMatrix& get(OperatorKind kind) const;
};

// x^2, p^2 and (xp+px)/2 carry exact matrix elements (no boundary artefact);
// a, x, p are the plain truncations.
ModeOperators build_mode_operators(FockCutoff cutoff);

class TwoModeState {
 public:
  // Validates Hermiticity (asymmetry <= 1e-8), then symmetrizes and
  // renormalizes the trace to one.
  TwoModeState(FockCutoff cutoff, CMatrix rho, double trace_leakage = 0.0);

  static TwoModeState vacuum(FockCutoff cutoff);
  static TwoModeState fock(FockCutoff cutoff, int n1, int n2);
  static TwoModeState from_pure(FockCutoff cutoff, const CVector& psi,
                                double trace_leakage = 0.0);

  const CMatrix& rho() const { return rho_; }
  FockCutoff cutoff() const { return cutoff_; }
  double trace_leakage() const { return trace_leakage_; }

  cplx element(int n1, int n2, int m1, int m2) const {
    return rho_(cutoff_.index(n1, n2), cutoff_.index(m1, m2));
  }

  // Reduced single-mode states.
  CMatrix reduced(int mode) const;
  double purity() const;

 private:
  FockCutoff cutoff_;
  CMatrix rho_;
  double trace_leakage_;
};

struct GaussianCircuit {
  std::optional<cplx> bs_in;   // V(phi), applied first
  std::array<cplx, 2> squeeze{};   // xi_i = r_i e^{i w_i}
  std::array<cplx, 2> displace{};  // alpha_i
  std::optional<cplx> bs_out;  // U(varphi), applied last
  std::array<double, 2> loss{};    // loss fraction per mode

  void validate() const;
};

// exp(alpha a^dag - alpha^* a) at local dimension d.
CMatrix displacement(cplx alpha, int d);
// exp((xi^* a^2 - xi a^dag^2) / 2) at local dimension d.
CMatrix squeezing(cplx xi, int d);
// exp(c a1^dag a2 - c^* a1 a2^dag) on the d^2 joint space. The generator
// conserves n1 + n2, so it is exponentiated one photon-number sector at a time.
CMatrix beamsplitter(cplx coupling, int d);

// U(varphi) (S1 D1 (x) S2 D2) V(phi); absent beamsplitters act as identity.
CMatrix gaussian_unitary(const GaussianCircuit& circuit, FockCutoff cutoff);

// Same circuit applied to a state vector without forming the d^2 x d^2
// product; used by the generator at an enlarged working cutoff.
CVector apply_gaussian(const GaussianCircuit& circuit, FockCutoff cutoff,
                       const CVector& psi);

// Keep the n1, n2 <= target block of a vector living on a larger cutoff.
// Returns the discarded weight through `leakage`.
CVector truncate_vector(const CVector& psi, FockCutoff from, FockCutoff to,
                        double& leakage);

// Amplitude damping with loss fraction eta (transmission 1 - eta) per mode.
TwoModeState apply_loss(const TwoModeState& state, double eta1, double eta2);

struct Spectrum {
  RVector values;   // ascending
  CMatrix vectors;  // columns
};

Spectrum spectral(const CMatrix& hermitian);
Spectrum spectral(const TwoModeState& state);

// rho_{n1 n2; m1 m2} -> rho_{m1 n2; n1 m2} (mode 1) or rho_{n1 m2; m1 n2} (mode 2).
CMatrix partial_transpose(const CMatrix& rho, FockCutoff cutoff, int mode);
CMatrix partial_transpose(const TwoModeState& state, int mode);

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const TwoModeState& rho, const TwoModeState& sigma);
// Tr sqrt(sqrt(rho) sigma sqrt(rho)), the square root of the above.
double root_fidelity(const TwoModeState& rho, const TwoModeState& sigma);

// Single-mode operator embedded on mode 0 or 1 of the joint space.
CMatrix embed(const CMatrix& op, int mode);

double expectation(const CMatrix& rho, const CMatrix& op);

}  // namespace cvkit::fock
