#pragma once

#include <random>

#include "cvkit/fock.hpp"

namespace cvkit::testing {

inline CVector random_vector(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = {normal(rng), normal(rng)};
  return v.normalized();
}

inline CMatrix random_hermitian(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = {normal(rng), normal(rng)};
  return 0.5 * (m + m.adjoint());
}

// Mixed state of the given rank with amplitudes concentrated on low photon
// numbers (weights fall off as e^{-(n1+n2)/2}).
inline fock::TwoModeState random_state(fock::FockCutoff cut, int rank, Rng& rng) {
  const int n = cut.joint_dim();
  CMatrix rho = CMatrix::Zero(n, n);
  std::uniform_real_distribution<double> uni(0.1, 1.0);
  for (int r = 0; r < rank; ++r) {
    CVector v = random_vector(n, rng);
    for (int n1 = 0; n1 < cut.local_dim(); ++n1)
      for (int n2 = 0; n2 < cut.local_dim(); ++n2) v(cut.index(n1, n2)) *= std::exp(-0.5 * (n1 + n2));
    rho += uni(rng) * v.normalized() * v.normalized().adjoint();
  }
  return fock::TwoModeState(cut, rho);
}

inline CMatrix random_local_state(int d, Rng& rng) {
  CMatrix m = CMatrix::Zero(d, d);
  for (int r = 0; r < 2; ++r) {
    CVector v = random_vector(d, rng);
    for (int n = 0; n < d; ++n) v(n) *= std::exp(-0.6 * n);
    m += v * v.adjoint();
  }
  return m / m.trace().real();
}

inline fock::TwoModeState product_state(fock::FockCutoff cut, const CMatrix& r1, const CMatrix& r2) {
  const int d = cut.local_dim();
  CMatrix rho(cut.joint_dim(), cut.joint_dim());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) rho.block(i * d, j * d, d, d) = r1(i, j) * r2;
  return fock::TwoModeState(cut, rho);
}

// Two-mode squeezed vacuum sum_n (-tanh r)^n |n,n> / cosh r, truncated and
// renormalized.
inline fock::TwoModeState two_mode_squeezed(fock::FockCutoff cut, double r) {
  CVector psi = CVector::Zero(cut.joint_dim());
  for (int n = 0; n <= cut.n_max(); ++n) psi(cut.index(n, n)) = std::pow(-std::tanh(r), n) / std::cosh(r);
  return fock::TwoModeState::from_pure(cut, psi);
}

inline double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace cvkit::testing
