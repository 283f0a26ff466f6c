#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cvkit/mlp.hpp"
#include "cvkit/stellar.hpp"
#include "support.hpp"

using namespace cvkit;
using namespace cvkit::mlp;
using homodyne::CorrelationPattern;
using witness::LabelVector;

namespace {

CorrelationPattern state_pattern(std::uint64_t seed) {
  const auto g = stellar::synthesize_random_state({}, fock::FockCutoff(fock::kDefaultNMax), seed);
  return homodyne::pattern_from_pdf(g.state);
}

// Two well separated bumps; the class decides which quadrant holds the mass.
CorrelationPattern blob(int cls, Rng& rng) {
  std::normal_distribution<double> jitter(0.0, 0.3);
  CorrelationPattern p;
  const double ci = cls ? 16.0 : 7.0;
  for (int c = 0; c < homodyne::kChannels; ++c)
    for (int i = 0; i < homodyne::kBins; ++i)
      for (int j = 0; j < homodyne::kBins; ++j) {
        const double di = i - ci - jitter(rng), dj = j - 12.0;
        p.at(c, i, j) = std::exp(-(di * di + dj * dj) / 8.0) + 1e-3;
      }
  p.normalize();
  return p;
}

double param(MlpModel& m, int layer, bool bias, Eigen::Index i, Eigen::Index j, double delta) {
  double& v = bias ? m.layers[layer].bias(i) : m.layers[layer].weight(i, j);
  v += delta;
  return v;
}

}  // namespace

TEST_CASE("initialization") {
  const MlpModel a = init_model(7), b = init_model(7), c = init_model(8);
  for (int l = 0; l < kLayers; ++l) {
    CHECK(a.layers[l].weight.rows() == kLayerDims[l + 1]);
    CHECK(a.layers[l].weight.cols() == kLayerDims[l]);
    CHECK(a.layers[l].weight == b.layers[l].weight);
    CHECK(a.layers[l].weight != c.layers[l].weight);
    CHECK(a.layers[l].bias.isZero(0.0));
    CHECK(a.adam.m_weight[l].isZero(0.0));
    CHECK(a.adam.v_bias[l].isZero(0.0));
    const RMatrix& w = a.layers[l].weight;
    const double var = w.squaredNorm() / static_cast<double>(w.size()) - std::pow(w.mean(), 2);
    const double expected = 2.0 / kLayerDims[l];
    // Sample variance of n normal draws has relative spread sqrt(2/n).
    CHECK(std::abs(var / expected - 1.0) < 5.0 * std::sqrt(2.0 / static_cast<double>(w.size())) + 1e-12);
  }
  CHECK(a.adam.step == 0);
  CHECK(a.all_finite());
  CHECK(kLayerDims == std::array<int, 5>{2304, 1024, 128, 64, 3});
}

TEST_CASE("forward pass") {
  const CorrelationPattern p = state_pattern(3);
  const auto zero = forward(zero_model(), p, false, nullptr);
  for (int k = 0; k < 3; ++k) CHECK(zero.probs(k) == 0.5);

  const MlpModel m = init_model(1);
  const auto a = forward(m, p, false, nullptr);
  const auto b = forward(m, p, false, nullptr);
  CHECK(a.probs == b.probs);
  CHECK(a.features == b.features);
  CHECK(a.features.size() == kFeatureDim);
  CHECK(a.features.minCoeff() >= 0.0);
  for (int k = 0; k < 3; ++k) CHECK((a.probs(k) > 0.0 && a.probs(k) < 1.0));

  Rng rng(5);
  const auto no_drop = forward(m, p, true, &rng, 0.0);
  CHECK(no_drop.probs == a.probs);
  const auto dropped = forward(m, p, true, &rng, 0.5);
  CHECK(dropped.probs != a.probs);
  CHECK_THROWS_AS(forward(m, p, true, nullptr, 0.2), std::invalid_argument);

  const RVector flat = flatten(p);
  CHECK(flat.size() == homodyne::kPatternSize);
  CHECK(flat(100) == p.values()[100]);

  std::vector<CorrelationPattern> pats{p, state_pattern(4), state_pattern(5)};
  std::vector<LabelVector> labs(3);
  const auto batch = forward_batch(m, make_batch(pats, labs).inputs);
  for (int s = 0; s < 3; ++s) {
    const auto single = forward(m, pats[s], false, nullptr);
    CHECK((batch.probs.col(s) - single.probs).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((batch.features.col(s) - single.features).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("input standardization") {
  std::vector<CorrelationPattern> pats;
  for (int s = 0; s < 6; ++s) pats.push_back(state_pattern(derive_seed(60, s)));
  const std::vector<LabelVector> labs(pats.size());
  const RMatrix x = make_batch(pats, labs).inputs;
  const InputNormalizer n = fit_normalizer(x);

  // Direct moments over every relabeled copy of every column.
  RMatrix all(homodyne::kPatternSize, x.cols() * homodyne::kSymmetryCount);
  for (int g = 0; g < homodyne::kSymmetryCount; ++g)
    all.middleCols(g * x.cols(), x.cols()) = x(homodyne::symmetry_index_map(g), Eigen::all);
  const RVector mean = all.rowwise().mean();
  const RVector sd = ((all.colwise() - mean).cwiseAbs2().rowwise().mean()).cwiseSqrt();
  CHECK((n.mean - mean).cwiseAbs().maxCoeff() < 1e-15);
  const RVector gain = (kInputGain / (sd.array() + kInputStdFloor)).matrix();
  CHECK(((n.gain - gain).array() / gain.array()).abs().maxCoeff() < 1e-9);
  CHECK(n.gain.maxCoeff() <= kInputGain / kInputStdFloor);

  for (int g : {5, 33, 63}) {
    const auto& map = homodyne::symmetry_index_map(g);
    CHECK((RVector(n.mean(map)) - n.mean).cwiseAbs().maxCoeff() < 1e-16);
    CHECK(((RVector(n.gain(map)) - n.gain).array() / n.gain.array()).abs().maxCoeff() < 1e-12);
  }

  MlpModel m = init_model(6);
  MlpModel plain = m;
  m.input = n;
  const RMatrix z = ((x.colwise() - n.mean).array().colwise() * n.gain.array()).matrix();
  CHECK((forward_batch(m, x).probs - forward_batch(plain, z).probs).cwiseAbs().maxCoeff() < 1e-14);

  TrainConfig cfg;
  cfg.epochs = 1;
  const auto on = train(init_model(1), pats, labs, cfg);
  RMatrix train_cols(homodyne::kPatternSize, static_cast<Eigen::Index>(on.train_indices.size()));
  for (std::size_t k = 0; k < on.train_indices.size(); ++k)
    train_cols.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(on.train_indices[k]));
  CHECK(on.best_model.input.mean == fit_normalizer(train_cols).mean);
  CHECK(on.final_model.input.gain == fit_normalizer(train_cols).gain);
  cfg.standardize = false;
  const auto off = train(init_model(1), pats, labs, cfg);
  CHECK(off.final_model.input.mean == InputNormalizer::identity().mean);
  CHECK(off.final_model.input.gain == InputNormalizer::identity().gain);

  CHECK_THROWS_AS(fit_normalizer(RMatrix::Zero(5, 2)), std::invalid_argument);
  CHECK_THROWS_AS(fit_normalizer(RMatrix::Zero(homodyne::kPatternSize, 0)), std::invalid_argument);
  CHECK_THROWS_AS(forward_batch(m, RMatrix::Zero(5, 1)), std::invalid_argument);
}

TEST_CASE("binary cross-entropy") {
  CHECK(bce_loss({1.0, 0.0, 1.0}, {1, 0, 1}) <= 1.2e-7);
  CHECK(bce_loss({0.5, 0.5, 0.5}, {1, 0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss({0.5, 0.5, 0.5}, {0, 0, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Clipping keeps a confidently wrong answer finite.
  CHECK(bce_loss({0.0, 1.0, 0.0}, {1, 0, 1}) == doctest::Approx(-std::log(kProbClip)).epsilon(1e-9));
  RMatrix probs(3, 2), targets(3, 2);
  probs << 0.2, 0.9, 0.6, 0.4, 0.7, 0.1;
  targets << 0, 1, 1, 0, 1, 1;
  const double expected = (bce_loss({0.2, 0.6, 0.7}, {0, 1, 1}) + bce_loss({0.9, 0.4, 0.1}, {1, 0, 1})) / 2;
  CHECK(batch_loss(probs, targets) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("backpropagation matches central differences") {
  // Inputs enter at order one so every layer carries gradients well above
  // the rounding floor of a 1e-6 difference step.
  std::vector<CorrelationPattern> pats;
  std::vector<LabelVector> labs;
  for (int s = 0; s < 10; ++s) {
    pats.push_back(state_pattern(derive_seed(40, s)));
    labs.push_back({std::uint8_t(s % 2), std::uint8_t(s % 3 == 0), std::uint8_t(s % 5 < 3)});
  }
  Batch batch = make_batch(pats, labs);
  batch.inputs *= static_cast<double>(homodyne::kBins * homodyne::kBins);

  MlpModel model = init_model(11);
  for (int l = 0; l < kLayers; ++l) {
    Rng brng(90 + l);
    std::normal_distribution<double> normal(0.0, 0.05);
    for (Eigen::Index i = 0; i < model.layers[l].bias.size(); ++i) model.layers[l].bias(i) = normal(brng);
  }
  Gradients grads;
  loss_and_gradients(model, batch, 0.0, nullptr, grads);

  const double h = 1e-6;
  Rng rng(2);
  int checked = 0, small = 0;
  double worst = 0.0;
  for (int l = 0; l < kLayers; ++l) {
    std::uniform_int_distribution<Eigen::Index> row(0, kLayerDims[l + 1] - 1), col(0, kLayerDims[l] - 1);
    int here = 0;
    // Rounding in a 1e-6 central difference of a loss near 0.7 is about
    // 1e-9, so relative errors of 1e-5 are resolvable only for gradients
    // above 1e-4. Smaller ones are held to an absolute bound instead.
    for (int tries = 0; here < 30 && tries < 50000; ++tries) {
      const bool bias = tries % 4 == 0;
      const Eigen::Index i = row(rng), j = bias ? 0 : col(rng);
      const double analytic = bias ? grads.bias[l](i) : grads.weight[l](i, j);
      const bool resolvable = std::abs(analytic) >= 1e-4;
      if (!resolvable && small >= 40 * (l + 1)) continue;
      Gradients unused;
      param(model, l, bias, i, j, h);
      const double up = loss_and_gradients(model, batch, 0.0, nullptr, unused);
      param(model, l, bias, i, j, -2 * h);
      const double down = loss_and_gradients(model, batch, 0.0, nullptr, unused);
      param(model, l, bias, i, j, h);
      const double numeric = (up - down) / (2 * h);
      if (!resolvable) {
        CHECK(std::abs(analytic - numeric) < 1e-8);
        ++small;
        continue;
      }
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
      worst = std::max(worst, rel);
      CHECK_MESSAGE(rel < 1e-5, "layer " << l << " bias " << bias << " g " << analytic << " fd " << numeric);
      ++here;
    }
    CHECK(here == 30);
    checked += here;
  }
  CHECK(checked >= 100);
  MESSAGE("worst relative error " << worst << " over " << checked << " parameters, " << small << " more below 1e-4");
}

TEST_CASE("Adam") {
  TrainConfig cfg;
  MlpModel m = init_model(4);
  const MlpModel before = m;
  Gradients zero;
  for (int l = 0; l < kLayers; ++l) {
    zero.weight[l] = RMatrix::Zero(kLayerDims[l + 1], kLayerDims[l]);
    zero.bias[l] = RVector::Zero(kLayerDims[l + 1]);
  }
  adam_update(m, zero, cfg);
  CHECK(m.adam.step == 1);
  for (int l = 0; l < kLayers; ++l) {
    CHECK(m.layers[l].weight == before.layers[l].weight);
    CHECK(m.layers[l].bias == before.layers[l].bias);
  }

  // First bias-corrected step moves every parameter with a non-zero gradient
  // by exactly lr * sign(g) (up to epsilon).
  Gradients g = zero;
  g.bias[3](0) = 3e-2;
  g.weight[2](5, 7) = -4.0;
  MlpModel fresh = init_model(4);
  adam_update(fresh, g, cfg);
  CHECK(fresh.layers[3].bias(0) == doctest::Approx(-cfg.learning_rate).epsilon(1e-6));
  CHECK(fresh.layers[2].weight(5, 7) - before.layers[2].weight(5, 7) == doctest::Approx(cfg.learning_rate).epsilon(1e-6));
}

TEST_CASE("full-batch trajectories do not depend on sample order") {
  std::vector<CorrelationPattern> pats;
  std::vector<LabelVector> labs;
  for (int s = 0; s < 12; ++s) {
    pats.push_back(state_pattern(derive_seed(70, s)));
    labs.push_back({std::uint8_t(s % 2), 0, std::uint8_t(s % 3 == 1)});
  }
  const Batch a = make_batch(pats, labs);
  std::vector<Eigen::Index> perm{5, 2, 11, 0, 7, 9, 1, 3, 10, 6, 4, 8};
  const Batch b{a.inputs(Eigen::all, perm), a.targets(Eigen::all, perm)};
  TrainConfig cfg;
  cfg.dropout = 0.0;
  MlpModel ma = init_model(9), mb = init_model(9);
  Rng ra(1), rb(2);
  for (int step = 0; step < 5; ++step) {
    const double la = train_step(ma, a, cfg, ra);
    const double lb = train_step(mb, b, cfg, rb);
    CHECK(la == doctest::Approx(lb).epsilon(1e-12));
  }
  for (int l = 0; l < kLayers; ++l)
    CHECK((ma.layers[l].weight - mb.layers[l].weight).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("training") {
  SUBCASE("separable blobs are learned") {
    Rng rng(31);
    std::vector<CorrelationPattern> pats;
    std::vector<LabelVector> labs;
    for (int s = 0; s < 120; ++s) {
      const int cls = s % 2;
      pats.push_back(blob(cls, rng));
      labs.push_back({std::uint8_t(cls), std::uint8_t(cls), std::uint8_t(1 - cls)});
    }
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 3;
    const auto res = train(init_model(2), pats, labs, cfg);
    CHECK(res.history.size() == 50);
    bool perfect = false;
    for (const auto& rec : res.history)
      perfect = perfect || (rec.val_accuracy[0] == 1.0 && rec.val_accuracy[1] == 1.0 && rec.val_accuracy[2] == 1.0);
    CHECK(perfect);
    CHECK(res.train_indices.size() == 84);
    CHECK(res.val_indices.size() == 36);
  }
  SUBCASE("generated states: loss decreases and the run is reproducible") {
    std::vector<CorrelationPattern> pats;
    std::vector<LabelVector> labs;
    for (int s = 0; s < 200; ++s) {
      const auto g = stellar::synthesize_random_state({}, fock::FockCutoff(fock::kDefaultNMax), derive_seed(55, s));
      pats.push_back(homodyne::pattern_from_pdf(g.state));
      labs.push_back(witness::label_state(g.state).labels);
    }
    TrainConfig cfg;
    cfg.epochs = 200;
    int calls = 0;
    const auto res = train(init_model(1), pats, labs, cfg, [&](const EpochRecord& r) { CHECK(r.epoch == ++calls); });
    CHECK(calls == 200);
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
    double best = res.history.front().val_loss;
    for (const auto& r : res.history) best = std::min(best, r.val_loss);
    CHECK(res.history[res.best_epoch - 1].val_loss == best);
    CHECK(res.final_model.adam.step == 200 * 3);

    cfg.epochs = 3;
    const auto x = train(init_model(1), pats, labs, cfg);
    const auto y = train(init_model(1), pats, labs, cfg);
    CHECK(x.final_model.layers[0].weight == y.final_model.layers[0].weight);
    CHECK(x.history.back().val_loss == y.history.back().val_loss);
  }
  SUBCASE("configuration errors") {
    TrainConfig cfg;
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.train_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    std::vector<CorrelationPattern> one(1);
    std::vector<LabelVector> lab(1);
    CHECK_THROWS_AS(train(zero_model(), one, lab, TrainConfig{}), std::invalid_argument);
  }
}

TEST_CASE("prediction and accuracy") {
  const auto labels = threshold({0.49, 0.5, 0.51});
  CHECK(labels == LabelVector{0, 1, 1});
  const Eigen::Vector3d s = signed_scores({0.5, 1.0, 0.25});
  CHECK(s(0) == 0.0);
  CHECK(s(1) == 1.0);
  CHECK(s(2) == -0.5);

  std::vector<LabelVector> truth{{1, 0, 1}, {0, 0, 1}, {1, 1, 1}, {0, 0, 0}};
  CHECK(accuracy(truth, truth) == std::array<double, 3>{1.0, 1.0, 1.0});
  std::vector<LabelVector> zeros(4);
  CHECK(accuracy(zeros, truth) == std::array<double, 3>{0.5, 0.75, 0.25});
  CHECK_THROWS_AS(accuracy(std::span<const LabelVector>{}, std::span<const LabelVector>{}), std::invalid_argument);

  // The zero model outputs 0.5 everywhere, which the inclusive rule labels 1.
  std::vector<CorrelationPattern> pats(4, state_pattern(1));
  const auto acc = evaluate_accuracy(zero_model(), pats, truth);
  CHECK(acc == std::array<double, 3>{0.5, 0.25, 0.75});
  const auto p = predict_labels(init_model(3), pats[0]);
  CHECK(p.labels == threshold(p.probs));

  SUBCASE("symmetrized inference") {
    const MlpModel m = init_model(8);
    const CorrelationPattern base = state_pattern(2);
    const Eigen::Vector3d ref = predict_labels(m, base).probs;
    // A single forward pass is not invariant, the group average is.
    double plain_spread = 0.0;
    for (int g : {1, 17, 42, 63}) {
      const CorrelationPattern moved = homodyne::apply_symmetry(base, g);
      CHECK((predict_labels(m, moved).probs - ref).cwiseAbs().maxCoeff() < 1e-12);
      plain_spread = std::max(plain_spread, (forward(m, moved, false, nullptr).probs -
                                             forward(m, base, false, nullptr).probs).cwiseAbs().maxCoeff());
    }
    CHECK(plain_spread > 1e-6);
    Eigen::Vector3d manual = Eigen::Vector3d::Zero();
    for (int g = 0; g < homodyne::kSymmetryCount; ++g)
      manual += forward(m, homodyne::apply_symmetry(base, g), false, nullptr).probs;
    CHECK((manual / homodyne::kSymmetryCount - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(symmetrized_probs(m, RMatrix::Zero(5, 1)), std::invalid_argument);
  }
}

TEST_CASE("checkpoints") {
  MlpModel m = init_model(21);
  m.layers[2].bias(3) = -0.125;
  m.input.mean.setConstant(1.0 / 576);
  m.input.gain(7) = 3.5;
  std::stringstream ss;
  save_checkpoint(m, ss);
  const std::string bytes = ss.str();
  std::size_t params = 0;
  for (int l = 0; l < kLayers; ++l) params += std::size_t(kLayerDims[l]) * kLayerDims[l + 1] + kLayerDims[l + 1];
  CHECK(bytes.size() == 5 + 4 + 8 * kLayers + 8 * params + 16 * std::size_t(kLayerDims[0]));
  CHECK(bytes.substr(0, 5) == "CVNN2");

  std::stringstream in(bytes);
  const MlpModel back = load_checkpoint(in);
  CHECK(back.input.mean == m.input.mean);
  CHECK(back.input.gain == m.input.gain);
  for (int l = 0; l < kLayers; ++l) {
    CHECK(back.layers[l].weight == m.layers[l].weight);
    CHECK(back.layers[l].bias == m.layers[l].bias);
  }
  std::stringstream again;
  save_checkpoint(back, again);
  CHECK(again.str() == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream s1(bad);
  CHECK_THROWS(load_checkpoint(s1));
  bad = bytes;
  bad[9] = 7;  // first layer input dimension
  std::stringstream s2(bad);
  CHECK_THROWS(load_checkpoint(s2));
  std::stringstream s3(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(load_checkpoint(s3));
  std::stringstream s5(bytes + "x");
  CHECK_THROWS(load_checkpoint(s5));
  m.layers[1].weight(0, 0) = std::nan("");
  std::stringstream s4;
  save_checkpoint(m, s4);
  CHECK_THROWS(load_checkpoint(s4));
}
