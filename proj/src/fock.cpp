#include "cvkit/fock.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace cvkit::fock {

namespace {

CMatrix annihilation(int d) {
  CMatrix a = CMatrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

CMatrix kron(const CMatrix& A, const CMatrix& B) {
  const Eigen::Index ra = A.rows(), ca = A.cols(), rb = B.rows(), cb = B.cols();
  CMatrix out(ra * rb, ca * cb);
  for (Eigen::Index i = 0; i < ra; ++i)
    for (Eigen::Index j = 0; j < ca; ++j)
      out.block(i * rb, j * cb, rb, cb) = A(i, j) * B;
  return out;
}

double max_asymmetry(const CMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

double binomial(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0));
}

// Kraus amplitudes K_k[n-k, n] for loss fraction eta.
RMatrix loss_amplitudes(double eta, int d) {
  RMatrix amp = RMatrix::Zero(d, d);  // amp(k, n)
  const double t = 1.0 - eta;
  for (int n = 0; n < d; ++n)
    for (int k = 0; k <= n; ++k)
      amp(k, n) = std::sqrt(binomial(n, k) * std::pow(t, n - k) * std::pow(eta, k));
  return amp;
}

void check_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("loss fraction must lie in [0,1], got " +
                                std::to_string(eta));
}

}  // namespace

FockCutoff::FockCutoff(int n_max) : n_max_(n_max) {
  if (n_max < 2)
    throw std::invalid_argument("Fock cutoff n_max must be >= 2, got " +
                                std::to_string(n_max));
}

const CMatrix& ModeOperators::get(OperatorKind kind) const {
  switch (kind) {
    case OperatorKind::Annihilation: return a;
    case OperatorKind::Creation: return a_dag;
    case OperatorKind::X: return x;
    case OperatorKind::P: return p;
    case OperatorKind::X2: return x2;
    case OperatorKind::P2: return p2;
    case OperatorKind::SymXP: return sym_xp;
  }
  throw std::logic_error("unknown operator kind");
}

ModeOperators build_mode_operators(FockCutoff cutoff) {
  const int d = cutoff.local_dim();
  // Quadratic operators need two extra levels to have exact elements on the
  // d x d block.
  const int big = d + 2;
  const CMatrix a = annihilation(big);
  const CMatrix ad = a.adjoint();
  const cplx I(0.0, 1.0);
  const CMatrix x = a + ad;
  const CMatrix p = I * (ad - a);

  ModeOperators ops;
  ops.a = a.topLeftCorner(d, d);
  ops.a_dag = ad.topLeftCorner(d, d);
  ops.x = x.topLeftCorner(d, d);
  ops.p = p.topLeftCorner(d, d);
  ops.x2 = (x * x).topLeftCorner(d, d);
  ops.p2 = (p * p).topLeftCorner(d, d);
  ops.sym_xp = (0.5 * (x * p + p * x)).topLeftCorner(d, d);
  return ops;
}

TwoModeState::TwoModeState(FockCutoff cutoff, CMatrix rho, double trace_leakage)
    : cutoff_(cutoff), rho_(std::move(rho)), trace_leakage_(trace_leakage) {
  const int n = cutoff_.joint_dim();
  if (rho_.rows() != n || rho_.cols() != n)
    throw std::invalid_argument("density matrix dimension does not match cutoff");
  if (!rho_.allFinite()) throw std::invalid_argument("density matrix has non-finite entries");
  if (max_asymmetry(rho_) > 1e-8)
    throw std::invalid_argument("density matrix is not Hermitian");
  rho_ = 0.5 * (rho_ + rho_.adjoint()).eval();
  const double tr = rho_.trace().real();
  if (!(tr > 0.0)) throw std::invalid_argument("density matrix has non-positive trace");
  rho_ /= tr;
  if (trace_leakage_ < 0.0) trace_leakage_ = 0.0;
}

TwoModeState TwoModeState::vacuum(FockCutoff cutoff) { return fock(cutoff, 0, 0); }

TwoModeState TwoModeState::fock(FockCutoff cutoff, int n1, int n2) {
  if (n1 < 0 || n2 < 0 || n1 > cutoff.n_max() || n2 > cutoff.n_max())
    throw std::invalid_argument("Fock occupation outside cutoff");
  CMatrix rho = CMatrix::Zero(cutoff.joint_dim(), cutoff.joint_dim());
  rho(cutoff.index(n1, n2), cutoff.index(n1, n2)) = 1.0;
  return TwoModeState(cutoff, std::move(rho));
}

TwoModeState TwoModeState::from_pure(FockCutoff cutoff, const CVector& psi,
                                     double trace_leakage) {
  if (psi.size() != cutoff.joint_dim())
    throw std::invalid_argument("state vector dimension does not match cutoff");
  const double norm = psi.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("zero state vector");
  const CVector v = psi / norm;
  return TwoModeState(cutoff, v * v.adjoint(), trace_leakage);
}

CMatrix TwoModeState::reduced(int mode) const {
  const int d = cutoff_.local_dim();
  CMatrix out = CMatrix::Zero(d, d);
  for (int n = 0; n < d; ++n)
    for (int m = 0; m < d; ++m)
      for (int k = 0; k < d; ++k)
        out(n, m) += mode == 0 ? rho_(cutoff_.index(n, k), cutoff_.index(m, k))
                               : rho_(cutoff_.index(k, n), cutoff_.index(k, m));
  return out;
}

double TwoModeState::purity() const { return (rho_ * rho_).trace().real(); }

void GaussianCircuit::validate() const {
  for (double eta : loss) check_eta(eta);
  auto finite = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
  for (const auto& z : squeeze)
    if (!finite(z)) throw std::invalid_argument("non-finite squeezing parameter");
  for (const auto& z : displace)
    if (!finite(z)) throw std::invalid_argument("non-finite displacement");
  if ((bs_in && !finite(*bs_in)) || (bs_out && !finite(*bs_out)))
    throw std::invalid_argument("non-finite beamsplitter coupling");
}

CMatrix displacement(cplx alpha, int d) {
  const CMatrix a = annihilation(d);
  const CMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  return gen.exp();
}

CMatrix squeezing(cplx xi, int d) {
  const CMatrix a = annihilation(d);
  const CMatrix a2 = a * a;
  const CMatrix gen = 0.5 * (std::conj(xi) * a2 - xi * a2.adjoint());
  return gen.exp();
}

CMatrix beamsplitter(cplx coupling, int d) {
  const int dim = d * d;
  CMatrix out = CMatrix::Zero(dim, dim);
  for (int total = 0; total <= 2 * (d - 1); ++total) {
    const int lo = std::max(0, total - (d - 1));
    const int hi = std::min(total, d - 1);
    const int size = hi - lo + 1;
    CMatrix gen = CMatrix::Zero(size, size);
    for (int n1 = lo; n1 <= hi; ++n1) {
      const int n2 = total - n1;
      const int col = n1 - lo;
      // c a1^dag a2 |n1,n2> -> sqrt((n1+1) n2) |n1+1, n2-1>
      if (n1 + 1 <= hi && n2 >= 1)
        gen(col + 1, col) += coupling * std::sqrt((n1 + 1.0) * n2);
      // -c^* a1 a2^dag |n1,n2> -> -sqrt(n1 (n2+1)) |n1-1, n2+1>
      if (n1 - 1 >= lo && n1 >= 1)
        gen(col - 1, col) -= std::conj(coupling) * std::sqrt(n1 * (n2 + 1.0));
    }
    const CMatrix block = gen.exp();
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        out((lo + i) * d + (total - lo - i), (lo + j) * d + (total - lo - j)) = block(i, j);
  }
  return out;
}

CMatrix gaussian_unitary(const GaussianCircuit& circuit, FockCutoff cutoff) {
  circuit.validate();
  const int d = cutoff.local_dim();
  const CMatrix local1 = squeezing(circuit.squeeze[0], d) * displacement(circuit.displace[0], d);
  const CMatrix local2 = squeezing(circuit.squeeze[1], d) * displacement(circuit.displace[1], d);
  CMatrix u = kron(local1, local2);
  if (circuit.bs_in) u = u * beamsplitter(*circuit.bs_in, d);
  if (circuit.bs_out) u = beamsplitter(*circuit.bs_out, d) * u;
  return u;
}

CVector apply_gaussian(const GaussianCircuit& circuit, FockCutoff cutoff,
                       const CVector& psi) {
  circuit.validate();
  const int d = cutoff.local_dim();
  if (psi.size() != cutoff.joint_dim())
    throw std::invalid_argument("state vector dimension does not match cutoff");
  CVector v = psi;
  if (circuit.bs_in) v = beamsplitter(*circuit.bs_in, d) * v;
  const CMatrix local1 = squeezing(circuit.squeeze[0], d) * displacement(circuit.displace[0], d);
  const CMatrix local2 = squeezing(circuit.squeeze[1], d) * displacement(circuit.displace[1], d);
  // Row-major reshape: v[n1 * d + n2] = M(n1, n2), so (A (x) B) v = A M B^T.
  using RowMajorC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<RowMajorC> m(v.data(), d, d);
  const RowMajorC transformed = local1 * m * local2.transpose();
  m = transformed;
  if (circuit.bs_out) v = beamsplitter(*circuit.bs_out, d) * v;
  return v;
}

CVector truncate_vector(const CVector& psi, FockCutoff from, FockCutoff to,
                        double& leakage) {
  if (to.n_max() > from.n_max())
    throw std::invalid_argument("truncation target larger than source cutoff");
  CVector out(to.joint_dim());
  double kept = 0.0;
  for (int n1 = 0; n1 <= to.n_max(); ++n1)
    for (int n2 = 0; n2 <= to.n_max(); ++n2) {
      const cplx c = psi(from.index(n1, n2));
      out(to.index(n1, n2)) = c;
      kept += std::norm(c);
    }
  leakage = std::max(0.0, psi.squaredNorm() - kept);
  return out;
}

TwoModeState apply_loss(const TwoModeState& state, double eta1, double eta2) {
  check_eta(eta1);
  check_eta(eta2);
  const FockCutoff cut = state.cutoff();
  const int d = cut.local_dim();
  CMatrix rho = state.rho();

  auto damp = [&](const CMatrix& in, double eta, int mode) {
    if (eta == 0.0) return in;
    const RMatrix amp = loss_amplitudes(eta, d);
    CMatrix out = CMatrix::Zero(in.rows(), in.cols());
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int k = 0; a + k < d && b + k < d; ++k) {
          const double w = amp(k, a + k) * amp(k, b + k);
          if (w == 0.0) continue;
          for (int s = 0; s < d; ++s)
            for (int t = 0; t < d; ++t) {
              if (mode == 0)
                out(cut.index(a, s), cut.index(b, t)) +=
                    w * in(cut.index(a + k, s), cut.index(b + k, t));
              else
                out(cut.index(s, a), cut.index(t, b)) +=
                    w * in(cut.index(s, a + k), cut.index(t, b + k));
            }
        }
    return out;
  };

  rho = damp(rho, eta1, 0);
  rho = damp(rho, eta2, 1);
  return TwoModeState(cut, std::move(rho), state.trace_leakage());
}

Spectrum spectral(const CMatrix& hermitian) {
  if (hermitian.rows() != hermitian.cols())
    throw std::invalid_argument("spectral: matrix is not square");
  if (max_asymmetry(hermitian) > 1e-8)
    throw std::invalid_argument("spectral: matrix is not Hermitian");
  const CMatrix sym = 0.5 * (hermitian + hermitian.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("spectral: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Spectrum spectral(const TwoModeState& state) { return spectral(state.rho()); }

CMatrix partial_transpose(const CMatrix& rho, FockCutoff cutoff, int mode) {
  if (mode != 1 && mode != 2) throw std::invalid_argument("mode must be 1 or 2");
  const int d = cutoff.local_dim();
  CMatrix out(rho.rows(), rho.cols());
  for (int n1 = 0; n1 < d; ++n1)
    for (int n2 = 0; n2 < d; ++n2)
      for (int m1 = 0; m1 < d; ++m1)
        for (int m2 = 0; m2 < d; ++m2) {
          const int row = cutoff.index(n1, n2), col = cutoff.index(m1, m2);
          out(row, col) = mode == 1 ? rho(cutoff.index(m1, n2), cutoff.index(n1, m2))
                                    : rho(cutoff.index(n1, m2), cutoff.index(m1, n2));
        }
  return out;
}

CMatrix partial_transpose(const TwoModeState& state, int mode) {
  return partial_transpose(state.rho(), state.cutoff(), mode);
}

namespace {

CMatrix psd_sqrt(const CMatrix& rho) {
  const Spectrum s = spectral(rho);
  const double floor = 1e-14 * std::max(1.0, s.values.cwiseAbs().maxCoeff());
  RVector root(s.values.size());
  for (Eigen::Index i = 0; i < root.size(); ++i)
    root(i) = s.values(i) > floor ? std::sqrt(s.values(i)) : 0.0;
  return s.vectors * root.asDiagonal() * s.vectors.adjoint();
}

}  // namespace

double root_fidelity(const TwoModeState& rho, const TwoModeState& sigma) {
  if (!(rho.cutoff() == sigma.cutoff()))
    throw std::invalid_argument("fidelity: cutoff mismatch");
  // || sqrt(rho) sqrt(sigma) ||_1 through singular values, accurate to machine
  // precision even for rank-deficient inputs.
  const CMatrix prod = psd_sqrt(rho.rho()) * psd_sqrt(sigma.rho());
  Eigen::JacobiSVD<CMatrix> svd(prod);
  return std::clamp(svd.singularValues().sum(), 0.0, 1.0);
}

double fidelity(const TwoModeState& rho, const TwoModeState& sigma) {
  const double root = root_fidelity(rho, sigma);
  return root * root;
}

CMatrix embed(const CMatrix& op, int mode) {
  const CMatrix id = CMatrix::Identity(op.rows(), op.cols());
  return mode == 0 ? kron(op, id) : kron(id, op);
}

double expectation(const CMatrix& rho, const CMatrix& op) {
  return (rho * op).trace().real();
}

}  // namespace cvkit::fock
