#include "cvkit/homodyne.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cvkit::homodyne {

using fock::TwoModeState;

namespace {

constexpr double kNegativeClamp = -1e-8;

double checked_density(double value) {
  if (value < kNegativeClamp)
    throw std::runtime_error("joint quadrature density negative (" + std::to_string(value) +
                             "): density matrix is not positive");
  return std::max(value, 0.0);
}

cplx basis_phase(int n, Quadrature basis) {
  if (basis == Quadrature::X) return 1.0;
  static constexpr std::array<cplx, 4> powers{cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
  return powers[n % 4];
}

// Normalized Hermite functions h_n(v) = H(n, v/sqrt2) e^{-v^2/4} / ((2pi)^{1/4} sqrt(2^n n!)),
// filled for n = 0..d-1 by the three-term recurrence.
void hermite_functions(double v, int d, double* out) {
  const double y = v / std::sqrt(2.0);
  out[0] = std::exp(-0.25 * v * v) / std::pow(2.0 * kPi, 0.25);
  if (d > 1) out[1] = std::sqrt(2.0) * y * out[0];
  for (int n = 1; n + 1 < d; ++n)
    out[n + 1] = std::sqrt(2.0 / (n + 1)) * y * out[n] - std::sqrt(double(n) / (n + 1)) * out[n - 1];
}

// R[(n1,m1),(n2,m2)] = rho[(n1,n2),(m1,m2)]
CMatrix reshuffle(const TwoModeState& state) {
  const fock::FockCutoff cut = state.cutoff();
  const int d = cut.local_dim();
  CMatrix r(d * d, d * d);
  for (int n1 = 0; n1 < d; ++n1)
    for (int m1 = 0; m1 < d; ++m1)
      for (int n2 = 0; n2 < d; ++n2)
        for (int m2 = 0; m2 < d; ++m2)
          r(n1 * d + m1, n2 * d + m2) = state.element(n1, n2, m1, m2);
  return r;
}

// Rows: values; columns (n, m) -> psi_n(v) psi_m(v)^*.
CMatrix outer_table(std::span<const double> values, int d, Quadrature basis) {
  const CMatrix psi = wavefunction_table(values, d, basis);
  CMatrix out(static_cast<Eigen::Index>(values.size()), d * d);
  for (Eigen::Index v = 0; v < psi.rows(); ++v)
    for (int n = 0; n < d; ++n)
      for (int m = 0; m < d; ++m) out(v, n * d + m) = psi(v, n) * std::conj(psi(v, m));
  return out;
}

double median_of(std::array<double, QuadGrid::lattice * QuadGrid::lattice>& values) {
  auto mid = values.begin() + values.size() / 2;
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace

Quadrature quadrature_of(Channel channel, int mode) {
  switch (channel) {
    case Channel::X1X2: return Quadrature::X;
    case Channel::X1P2: return mode == 0 ? Quadrature::X : Quadrature::P;
    case Channel::P1X2: return mode == 0 ? Quadrature::P : Quadrature::X;
    case Channel::P1P2: return Quadrature::P;
  }
  throw std::logic_error("unknown channel");
}

std::vector<double> QuadGrid::lattice_axis() {
  std::vector<double> axis;
  axis.reserve(bins * lattice);
  for (int b = 0; b < bins; ++b)
    for (int s = 0; s < lattice; ++s) axis.push_back(lattice_point(b, s));
  return axis;
}

std::vector<double> QuadGrid::sample_axis() {
  std::vector<double> axis(sample_cells);
  for (int i = 0; i < sample_cells; ++i) axis[i] = sample_lo + sample_cell_width * (i + 0.5);
  return axis;
}

void CorrelationPattern::normalize() {
  for (int c = 0; c < kChannels; ++c) {
    auto first = values_.begin() + c * kBins * kBins;
    auto last = first + kBins * kBins;
    const double sum = std::accumulate(first, last, 0.0);
    if (!(sum > 0.0)) throw std::runtime_error("cannot normalize an empty pattern channel");
    std::for_each(first, last, [sum](double& v) { v /= sum; });
  }
}

double total_variation(const CorrelationPattern& a, const CorrelationPattern& b, int channel) {
  const auto x = a.channel(channel);
  const auto y = b.channel(channel);
  double tv = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) tv += std::abs(x[i] - y[i]);
  return 0.5 * tv;
}

cplx quad_wavefunction(int n, double value, Quadrature basis) {
  if (n < 0) throw std::invalid_argument("photon number must be non-negative");
  std::vector<double> h(n + 1);
  hermite_functions(value, n + 1, h.data());
  return basis_phase(n, basis) * h[n];
}

CMatrix wavefunction_table(std::span<const double> values, int d, Quadrature basis) {
  CMatrix table(static_cast<Eigen::Index>(values.size()), d);
  std::vector<double> h(d);
  for (std::size_t v = 0; v < values.size(); ++v) {
    hermite_functions(values[v], d, h.data());
    for (int n = 0; n < d; ++n) table(v, n) = basis_phase(n, basis) * h[n];
  }
  return table;
}

double joint_pdf(const TwoModeState& state, Channel channel, double v1, double v2) {
  const fock::FockCutoff cut = state.cutoff();
  const int d = cut.local_dim();
  CVector w1(d), w2(d);
  for (int n = 0; n < d; ++n) {
    w1(n) = quad_wavefunction(n, v1, quadrature_of(channel, 0));
    w2(n) = quad_wavefunction(n, v2, quadrature_of(channel, 1));
  }
  cplx sum = 0.0;
  for (int n1 = 0; n1 < d; ++n1)
    for (int n2 = 0; n2 < d; ++n2)
      for (int m1 = 0; m1 < d; ++m1)
        for (int m2 = 0; m2 < d; ++m2)
          sum += state.element(n1, n2, m1, m2) * w1(n1) * w2(n2) * std::conj(w1(m1)) *
                 std::conj(w2(m2));
  return checked_density(sum.real());
}

RMatrix joint_pdf_grid(const TwoModeState& state, Channel channel, std::span<const double> v1,
                       std::span<const double> v2) {
  const int d = state.cutoff().local_dim();
  const CMatrix left = outer_table(v1, d, quadrature_of(channel, 0));
  const CMatrix right = outer_table(v2, d, quadrature_of(channel, 1));
  const CMatrix grid = left * reshuffle(state) * right.transpose();
  RMatrix out = grid.real();
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = checked_density(out.data()[i]);
  return out;
}

CorrelationPattern pattern_from_pdf(const TwoModeState& state) {
  constexpr int L = QuadGrid::lattice;
  const std::vector<double> axis = QuadGrid::lattice_axis();
  std::array<RMatrix, kChannels> grids;
  std::exception_ptr error;

#pragma omp parallel for schedule(static)
  for (int c = 0; c < kChannels; ++c) {
    try {
      grids[c] = joint_pdf_grid(state, kAllChannels[c], axis, axis);
    } catch (...) {
#pragma omp critical
      error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  CorrelationPattern pattern;
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < kChannels; ++c)
    for (int i = 0; i < kBins; ++i)
      for (int j = 0; j < kBins; ++j) {
        std::array<double, L * L> cell;
        for (int s = 0; s < L; ++s)
          for (int t = 0; t < L; ++t) cell[s * L + t] = grids[c](i * L + s, j * L + t);
        pattern.at(c, i, j) = median_of(cell);
      }
  pattern.normalize();
  return pattern;
}

CorrelationPattern pattern_bin_integrals(const TwoModeState& state) {
  const std::vector<double> axis = QuadGrid::sample_axis();
  constexpr int per_bin = static_cast<int>(QuadGrid::bin_width / QuadGrid::sample_cell_width + 0.5);
  constexpr int first =
      static_cast<int>((QuadGrid::lo - QuadGrid::sample_lo) / QuadGrid::sample_cell_width + 0.5);
  CorrelationPattern pattern;
  for (int c = 0; c < kChannels; ++c) {
    const RMatrix grid = joint_pdf_grid(state, kAllChannels[c], axis, axis);
    for (int i = 0; i < kBins; ++i)
      for (int j = 0; j < kBins; ++j)
        pattern.at(c, i, j) = grid.block(first + i * per_bin, first + j * per_bin, per_bin, per_bin).sum();
  }
  pattern.normalize();
  return pattern;
}

std::vector<Outcome> sample_quadratures(const TwoModeState& state, Channel channel, std::size_t n,
                                        std::uint64_t seed) {
  if (n == 0) return {};
  const std::vector<double> axis = QuadGrid::sample_axis();
  const RMatrix grid = joint_pdf_grid(state, channel, axis, axis);
  constexpr int cells = QuadGrid::sample_cells;

  // Row-major cumulative mass over (cell1, cell2).
  std::vector<double> cdf(static_cast<std::size_t>(cells) * cells);
  double running = 0.0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j) {
      running += grid(i, j);
      cdf[static_cast<std::size_t>(i) * cells + j] = running;
    }
  if (!(running > 0.0)) throw std::runtime_error("sample_quadratures: density vanishes on the sampling lattice");

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Outcome> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = unit(rng) * running;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    const auto idx = static_cast<std::size_t>(it - cdf.begin());
    const int i = static_cast<int>(idx / cells);
    const int j = static_cast<int>(idx % cells);
    const double v1 = QuadGrid::sample_lo + QuadGrid::sample_cell_width * (i + unit(rng));
    const double v2 = QuadGrid::sample_lo + QuadGrid::sample_cell_width * (j + unit(rng));
    out.push_back({v1, v2});
  }
  return out;
}

HomodyneSampleSet sample_homodyne(const TwoModeState& state, std::size_t n, std::uint64_t seed) {
  HomodyneSampleSet set;
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kChannels; ++c) {
    try {
      set.channels[c] = sample_quadratures(state, kAllChannels[c], n, derive_seed(seed, c));
    } catch (...) {
#pragma omp critical
      error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return set;
}

int bin_index(double v) {
  if (!(v >= QuadGrid::lo && v < QuadGrid::hi)) return -1;
  const int b = static_cast<int>(std::floor((v - QuadGrid::lo) / QuadGrid::bin_width));
  return std::clamp(b, 0, kBins - 1);
}

CorrelationPattern pattern_from_samples(const HomodyneSampleSet& samples) {
  CorrelationPattern pattern;
  for (int c = 0; c < kChannels; ++c) {
    if (samples.channels[c].empty())
      throw std::invalid_argument("pattern_from_samples: channel without samples");
    for (const Outcome& o : samples.channels[c]) {
      const int i = bin_index(o.v1);
      const int j = bin_index(o.v2);
      if (i >= 0 && j >= 0) pattern.at(c, i, j) += 1.0;
    }
    const auto ch = pattern.channel(c);
    if (std::accumulate(ch.begin(), ch.end(), 0.0) == 0.0)
      throw std::invalid_argument("pattern_from_samples: no outcome inside the pattern window");
  }
  pattern.normalize();
  return pattern;
}

namespace {

int mode_det(const ModeSymmetry& m) {
  const int perm = m.source[0] == 0 ? 1 : -1;
  return perm * m.sign[0] * m.sign[1];
}

std::vector<ModeSymmetry> mode_elements(int det) {
  std::vector<ModeSymmetry> out;
  for (const std::array<int, 2>& src : {std::array<int, 2>{0, 1}, std::array<int, 2>{1, 0}})
    for (int s0 : {1, -1})
      for (int s1 : {1, -1}) {
        const ModeSymmetry m{src, {s0, s1}};
        if (mode_det(m) == det) out.push_back(m);
      }
  return out;
}

std::vector<int> build_index_map(const PatternSymmetry& g) {
  auto flip = [](int b, int sign) { return sign > 0 ? b : kBins - 1 - b; };
  std::vector<int> map(kPatternSize);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < kBins; ++i)
        for (int j = 0; j < kBins; ++j) {
          // Output channel (a, b) at (i, j); undo the swap first.
          int qa = a, qb = b, ii = i, jj = j;
          if (g.swap_modes) std::swap(qa, qb), std::swap(ii, jj);
          const int src = 2 * g.mode1.source[qa] + g.mode2.source[qb];
          map[CorrelationPattern::offset(2 * a + b, i, j)] =
              CorrelationPattern::offset(src, flip(ii, g.mode1.sign[qa]), flip(jj, g.mode2.sign[qb]));
        }
  return map;
}

}  // namespace

PatternSymmetry PatternSymmetry::element(int index) {
  if (index < 0 || index >= kSymmetryCount) throw std::out_of_range("symmetry index out of range");
  const auto elems = mode_elements(index & 16 ? -1 : 1);
  PatternSymmetry g;
  g.mode1 = elems[(index >> 2) & 3];
  g.mode2 = elems[index & 3];
  g.swap_modes = (index & 32) != 0;
  return g;
}

bool PatternSymmetry::preserves_orientation() const {
  return mode_det(mode1) == 1 && mode_det(mode2) == 1;
}

const std::vector<int>& symmetry_index_map(int index) {
  static const std::vector<std::vector<int>> maps = [] {
    std::vector<std::vector<int>> all;
    for (int g = 0; g < kSymmetryCount; ++g) all.push_back(build_index_map(PatternSymmetry::element(g)));
    return all;
  }();
  if (index < 0 || index >= kSymmetryCount) throw std::out_of_range("symmetry index out of range");
  return maps[index];
}

CorrelationPattern apply_symmetry(const CorrelationPattern& pattern, int index) {
  const std::vector<int>& map = symmetry_index_map(index);
  CorrelationPattern out;
  const auto in = pattern.values();
  auto dst = out.values();
  for (int k = 0; k < kPatternSize; ++k) dst[k] = in[map[k]];
  return out;
}

namespace reference {

CorrelationPattern pattern_from_pdf(const TwoModeState& state) {
  constexpr int L = QuadGrid::lattice;
  CorrelationPattern pattern;
  for (int c = 0; c < kChannels; ++c)
    for (int i = 0; i < kBins; ++i)
      for (int j = 0; j < kBins; ++j) {
        std::array<double, L * L> cell;
        for (int s = 0; s < L; ++s)
          for (int t = 0; t < L; ++t)
            cell[s * L + t] = joint_pdf(state, kAllChannels[c], QuadGrid::lattice_point(i, s),
                                        QuadGrid::lattice_point(j, t));
        pattern.at(c, i, j) = median_of(cell);
      }
  pattern.normalize();
  return pattern;
}

}  // namespace reference

}  // namespace cvkit::homodyne
