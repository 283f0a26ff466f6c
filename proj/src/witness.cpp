#include "cvkit/witness.hpp"

#include <stdexcept>

namespace cvkit::witness {

using fock::TwoModeState;

GeneratorSet GeneratorSet::of_order(int order, fock::FockCutoff cutoff) {
  if (order != 1 && order != 2) throw std::invalid_argument("generator order must be 1 or 2");
  const fock::ModeOperators ops = fock::build_mode_operators(cutoff);
  GeneratorSet set;
  set.order = order;
  set.per_mode = {ops.x, ops.p};
  if (order == 2) {
    set.per_mode.push_back(ops.x2);
    set.per_mode.push_back(ops.p2);
    set.per_mode.push_back(ops.sym_xp);
  }
  return set;
}

double ppt_witness(const TwoModeState& state) {
  const CMatrix pt = fock::partial_transpose(state, 2);
  return -fock::spectral(pt).values(0);
}

QfiForms qfi_quadratic_forms(const TwoModeState& state, const GeneratorSet& gens) {
  return qfi_quadratic_forms(state, fock::spectral(state), gens);
}

QfiForms qfi_quadratic_forms(const TwoModeState& state, const fock::Spectrum& spectrum,
                             const GeneratorSet& gens) {
  const int k = gens.size();
  const int total = 2 * k;
  const Eigen::Index dim = spectrum.values.size();

  // Weights 2 (l_i - l_j)^2 / (l_i + l_j) over eigenpairs above the floor.
  RMatrix weight = RMatrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double s = spectrum.values(i) + spectrum.values(j);
      if (s > kSpectralFloor) {
        const double diff = spectrum.values(i) - spectrum.values(j);
        weight(i, j) = 2.0 * diff * diff / s;
      }
    }

  // Generators in the eigenbasis of rho.
  std::vector<CMatrix> rotated;
  rotated.reserve(total);
  for (int mode = 0; mode < 2; ++mode)
    for (const CMatrix& h : gens.per_mode)
      rotated.push_back(spectrum.vectors.adjoint() * fock::embed(h, mode) * spectrum.vectors);

  QfiForms forms{RMatrix::Zero(total, total), RMatrix::Zero(total, total)};
  for (int a = 0; a < total; ++a)
    for (int b = a; b < total; ++b) {
      // Re(<i|Ha|j><j|Hb|i>) = Re(Ha(i,j) * Hb(j,i))
      const double f =
          (weight.array() * (rotated[a].array() * rotated[b].transpose().array()).real()).sum();
      forms.fisher(a, b) = f;
      forms.fisher(b, a) = f;
    }

  for (int mode = 0; mode < 2; ++mode) {
    const CMatrix reduced = state.reduced(mode);
    std::vector<double> mean(k);
    for (int a = 0; a < k; ++a) mean[a] = fock::expectation(reduced, gens.per_mode[a]);
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        const CMatrix anti = gens.per_mode[a] * gens.per_mode[b] + gens.per_mode[b] * gens.per_mode[a];
        const double g = 0.5 * fock::expectation(reduced, anti) - mean[a] * mean[b];
        forms.gamma(mode * k + a, mode * k + b) = g;
        forms.gamma(mode * k + b, mode * k + a) = g;
      }
  }
  return forms;
}

double qfi_witness(const QfiForms& forms) {
  const RMatrix m = forms.fisher - 4.0 * forms.gamma;
  Eigen::SelfAdjointEigenSolver<RMatrix> solver(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

double qfi_witness(const TwoModeState& state, const GeneratorSet& gens) {
  return qfi_witness(qfi_quadratic_forms(state, gens));
}

LabelVector labels_from_values(const WitnessValues& values) {
  LabelVector labels;
  labels.e_ppt = values.ppt_min > kPptCutoff ? 1 : 0;
  labels.e_qfi1 = values.qfi1 > kQfiCutoff ? 1 : 0;
  labels.e_qfi2 = values.qfi2 > kQfiCutoff ? 1 : 0;
  return labels;
}

Labelled label_state(const TwoModeState& state) {
  const fock::Spectrum spectrum = fock::spectral(state);
  const fock::FockCutoff cut = state.cutoff();
  WitnessValues values;
  values.ppt_min = ppt_witness(state);
  values.qfi1 = qfi_witness(qfi_quadratic_forms(state, spectrum, GeneratorSet::of_order(1, cut)));
  values.qfi2 = qfi_witness(qfi_quadratic_forms(state, spectrum, GeneratorSet::of_order(2, cut)));
  return {values, labels_from_values(values)};
}

}  // namespace cvkit::witness
