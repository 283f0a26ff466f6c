#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cvkit/homodyne.hpp"
#include "cvkit/stellar.hpp"
#include "cvkit/witness.hpp"
#include "support.hpp"

using namespace cvkit;
using namespace cvkit::stellar;
using fock::FockCutoff;
using fock::GaussianCircuit;
using fock::TwoModeState;

namespace {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

// Heisenberg action on (x1, p1, x2, p2) with x = a + a^dag, p = i(a^dag - a).
Eigen::Matrix2d squeeze_map(cplx xi) {
  const double r = std::abs(xi), th = std::arg(xi);
  Eigen::Matrix2d refl;
  refl << std::cos(th), std::sin(th), std::sin(th), -std::cos(th);
  return std::cosh(r) * Eigen::Matrix2d::Identity() - std::sinh(r) * refl;
}

Mat4 beamsplitter_map(cplx c) {
  const double t = std::abs(c), ph = std::arg(c);
  const double ct = std::cos(t), st = std::sin(t), cp = std::cos(ph), sp = std::sin(ph);
  Mat4 m;
  m << ct, 0, st * cp, -st * sp,
       0, ct, st * sp, st * cp,
       -st * cp, -st * sp, ct, 0,
       st * sp, -st * cp, 0, ct;
  return m;
}

struct GaussianMoments {
  Vec4 mean;
  Mat4 cov;
};

// Moments of G|00> for G = U_out (S1 D1 (x) S2 D2) U_in.
GaussianMoments gaussian_moments(const GaussianCircuit& c) {
  Mat4 s = Mat4::Zero();
  s.topLeftCorner<2, 2>() = squeeze_map(c.squeeze[0]);
  s.bottomRightCorner<2, 2>() = squeeze_map(c.squeeze[1]);
  const Mat4 in = c.bs_in ? beamsplitter_map(*c.bs_in) : Mat4::Identity();
  const Mat4 out = c.bs_out ? beamsplitter_map(*c.bs_out) : Mat4::Identity();
  const Vec4 d(2 * c.displace[0].real(), 2 * c.displace[0].imag(), 2 * c.displace[1].real(),
               2 * c.displace[1].imag());
  const Mat4 m = out * s * in;
  return {out * s * d, m * m.transpose()};
}

// Pattern of the Gaussian with the same lattice and median rule as the
// library. P outcomes follow the i^n basis convention, which reports -p.
homodyne::CorrelationPattern gaussian_pattern(const GaussianMoments& g) {
  homodyne::CorrelationPattern pat;
  const int L = homodyne::QuadGrid::lattice;
  for (int c = 0; c < 4; ++c) {
    const int q1 = c / 2, q2 = c % 2;  // 0 = X, 1 = P
    const int idx[2] = {q1, 2 + q2};
    const double sign[2] = {q1 ? -1.0 : 1.0, q2 ? -1.0 : 1.0};
    Eigen::Matrix2d cov;
    Eigen::Vector2d mu;
    for (int a = 0; a < 2; ++a) {
      mu(a) = sign[a] * g.mean(idx[a]);
      for (int b = 0; b < 2; ++b) cov(a, b) = sign[a] * sign[b] * g.cov(idx[a], idx[b]);
    }
    const Eigen::Matrix2d inv = cov.inverse();
    const double norm = 1.0 / (2 * kPi * std::sqrt(cov.determinant()));
    for (int i = 0; i < homodyne::kBins; ++i)
      for (int j = 0; j < homodyne::kBins; ++j) {
        std::vector<double> cell;
        for (int s = 0; s < L; ++s)
          for (int t = 0; t < L; ++t) {
            const Eigen::Vector2d v(homodyne::QuadGrid::lattice_point(i, s), homodyne::QuadGrid::lattice_point(j, t));
            const Eigen::Vector2d dv = v - mu;
            cell.push_back(norm * std::exp(-0.5 * dv.dot(inv * dv)));
          }
        std::nth_element(cell.begin(), cell.begin() + cell.size() / 2, cell.end());
        pat.at(c, i, j) = cell[cell.size() / 2];
      }
  }
  pat.normalize();
  return pat;
}

}  // namespace

TEST_CASE("random core states") {
  Rng rng(1);
  CHECK_THROWS_AS(random_core_state(3, rng), std::invalid_argument);
  CHECK_THROWS_AS(random_core_state(-1, rng), std::invalid_argument);

  const CoreState vac = random_core_state(0, rng);
  CHECK(vac.coeff(0, 0) == cplx(1.0, 0.0));
  CHECK(vac.coeffs.squaredNorm() == 1.0);

  const CoreState one = random_core_state(1, rng);
  CHECK(one.coeffs.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
  int nonzero = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (one.coeffs(a, b) != cplx(0.0)) {
        ++nonzero;
        CHECK(a + b <= 1);
      }
  CHECK(nonzero == 3);

  for (int k = 0; k < 200; ++k) {
    const int rank = k % 3;
    const CoreState c = random_core_state(rank, rng);
    CHECK(stellar_rank_of_core(c) == rank);
    CHECK(std::abs(c.coeffs.squaredNorm() - 1.0) < 1e-12);
  }
}

TEST_CASE("stellar rank of literal cores") {
  CoreState c;
  c.coeffs(0, 0) = 1.0;
  CHECK(stellar_rank_of_core(c) == 0);
  c.coeffs.setZero();
  c.coeffs(1, 0) = 1.0;
  CHECK(stellar_rank_of_core(c) == 1);
  c.coeffs.setZero();
  c.coeffs(0, 0) = c.coeffs(2, 0) = 1.0 / std::sqrt(2.0);
  CHECK(stellar_rank_of_core(c) == 2);
}

TEST_CASE("range validation") {
  GenerationRanges r;
  CHECK_NOTHROW(r.validate());
  r.bs_prob = 1.5;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = {};
  r.r_max = -0.1;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = {};
  r.eta_max = 1.2;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("synthesis") {
  const FockCutoff cut(fock::kDefaultNMax);

  SUBCASE("zero ranges and rank 0 give the vacuum") {
    GenerationRanges zero{0.0, 0.0, 0.0, 0.0, 0.0};
    const auto g = synthesize_random_state(zero, cut, 3, {.force_rank = 0});
    CHECK(testing::max_abs(g.state.rho() - TwoModeState::vacuum(cut).rho()) < 1e-14);
    CHECK(witness::label_state(g.state).labels.e_ppt == 0);
  }
  SUBCASE("determinism") {
    const auto a = synthesize_random_state({}, cut, 77);
    const auto b = synthesize_random_state({}, cut, 77);
    CHECK(a.core.coeffs == b.core.coeffs);
    CHECK(a.circuit.squeeze == b.circuit.squeeze);
    CHECK(a.circuit.displace == b.circuit.displace);
    CHECK(a.circuit.loss == b.circuit.loss);
    CHECK(a.circuit.bs_in == b.circuit.bs_in);
    CHECK(a.circuit.bs_out == b.circuit.bs_out);
    CHECK(a.state.rho() == b.state.rho());
  }
  SUBCASE("draws respect the ranges and state invariants") {
    const GenerationRanges r;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto g = synthesize_random_state(r, cut, seed);
      for (int m = 0; m < 2; ++m) {
        CHECK(std::abs(g.circuit.squeeze[m]) <= r.r_max);
        CHECK(std::abs(g.circuit.displace[m]) <= r.alpha_max);
        CHECK(g.circuit.loss[m] >= 0.0);
        CHECK(g.circuit.loss[m] <= r.eta_max);
      }
      CHECK(g.state.trace_leakage() <= kMaxLeakage);
      CHECK(g.attempts >= 1);
      CHECK(std::abs(g.state.rho().trace().real() - 1.0) < 1e-10);
      CHECK(fock::spectral(g.state).values(0) > -1e-9);
      CHECK(stellar_rank_of_core(g.core) == g.core.rank);
    }
  }
  SUBCASE("lossless draws are pure") {
    GenerationRanges r;
    r.eta_max = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
      CHECK(synthesize_random_state(r, cut, seed).state.purity() == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("beamsplitter inclusion follows bs_prob") {
    GenerationRanges never;
    never.bs_prob = 0.0;
    GenerationRanges always;
    always.bs_prob = 1.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto a = synthesize_random_state(never, cut, seed);
      CHECK(!a.circuit.bs_in.has_value());
      CHECK(!a.circuit.bs_out.has_value());
      const auto b = synthesize_random_state(always, cut, seed);
      CHECK(b.circuit.bs_in.has_value());
      CHECK(b.circuit.bs_out.has_value());
    }
  }
  SUBCASE("impossible leakage budget exhausts the retry cap") {
    GenerationRanges far{0.0, 40.0, 0.0, 0.0, 0.0};
    // Displacements this large leave almost no weight below n = 2.
    CHECK_THROWS_AS(synthesize_random_state(far, FockCutoff(2), 5, {.force_rank = 2}), std::runtime_error);
  }
}

TEST_CASE("rank-0 cores give the analytic Gaussian pattern") {
  // Moderate parameters at a large cutoff, so truncation error is far below
  // the comparison tolerance.
  GenerationRanges r;
  r.r_max = 0.4;
  r.alpha_max = 0.6;
  r.eta_max = 0.0;
  r.bs_prob = 0.5;
  const FockCutoff draw_cut(fock::kDefaultNMax);
  const FockCutoff work(40), eval(26);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto g = synthesize_random_state(r, draw_cut, seed, {.force_rank = 0});
    CVector vac = CVector::Zero(work.joint_dim());
    vac(0) = 1.0;
    double leak = 0.0;
    const CVector psi = fock::truncate_vector(fock::apply_gaussian(g.circuit, work, vac), work, eval, leak);
    CHECK(leak < 1e-12);
    const auto state = TwoModeState::from_pure(eval, psi);
    const auto lib = homodyne::pattern_from_pdf(state);
    const auto ref = gaussian_pattern(gaussian_moments(g.circuit));
    double worst = 0.0;
    for (int k = 0; k < homodyne::kPatternSize; ++k) worst = std::max(worst, std::abs(lib.values()[k] - ref.values()[k]));
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("decibel conversion") {
  CHECK(db_to_squeezing(3.0) == doctest::Approx(0.345387763949107));
  CHECK(db_to_squeezing(-3.0) == doctest::Approx(-0.345387763949107));
  CHECK(db_to_squeezing(0.0) == 0.0);
}

TEST_CASE("photon-subtracted family") {
  const FockCutoff cut(fock::kDefaultNMax);
  CHECK_THROWS_AS(photon_subtracted_state(0, 0, 0, 0, kPi / 4, 0, cut), std::invalid_argument);
  CHECK_THROWS_AS(photon_subtracted_state(2, -3, 0, 0, 2.0, 0, cut), std::invalid_argument);
  CHECK_THROWS_AS(photon_subtracted_state(2, -3, 0, 0, kPi / 4, 1.2, cut), std::invalid_argument);

  SUBCASE("gamma = 0 is S1 S2 |10>") {
    const auto s = photon_subtracted_state(2.0, -3.0, 0, 0, 0.0, 0.0, cut);
    GaussianCircuit c;
    c.squeeze = {cplx(db_to_squeezing(2.0)), cplx(db_to_squeezing(-3.0))};
    const FockCutoff work(40);
    CVector in = CVector::Zero(work.joint_dim());
    in(work.index(1, 0)) = 1.0;
    double leak = 0.0;
    const CVector psi = fock::truncate_vector(fock::apply_gaussian(c, work, in), work, cut, leak);
    const auto ref = TwoModeState::from_pure(cut, psi);
    CHECK(fock::fidelity(s, ref) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(s.purity() == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("lossless reference state is entangled by every witness") {
    const auto s = photon_subtracted_state(2.0, -3.0, 0, 0, kPi / 4, 0.0, cut);
    const auto l = witness::label_state(s);
    CHECK(l.values.ppt_min > 0.0);
    CHECK(l.values.qfi1 > 0.0);
    CHECK(l.values.qfi2 > 0.0);
  }
}
