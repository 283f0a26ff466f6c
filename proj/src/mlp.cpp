#include "cvkit/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cvkit/binary_io.hpp"

namespace cvkit::mlp {

namespace {

constexpr std::string_view kCheckpointMagic = "CVNN2";
constexpr int kHidden = kLayers - 1;

struct ForwardCache {
  std::array<RMatrix, kLayers> input;  // input to layer l (post-dropout activations)
  std::array<RMatrix, kHidden> pre;    // hidden pre-activations
  std::array<RMatrix, kHidden> mask;   // inverted-dropout multipliers, empty when off
  RMatrix features;                    // post-ReLU of the last hidden layer, pre-dropout
  RMatrix probs;
};

RMatrix affine(const Layer& layer, const RMatrix& x) {
  RMatrix z = layer.weight * x;
  z.colwise() += layer.bias;
  return z;
}

RMatrix sigmoid(const RMatrix& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

ForwardCache run_forward(const MlpModel& model, const RMatrix& inputs, double dropout, Rng* rng) {
  if (inputs.rows() != model.input.mean.size()) throw std::invalid_argument("input rows must equal the pattern size");
  ForwardCache cache;
  cache.input[0] = ((inputs.colwise() - model.input.mean).array().colwise() * model.input.gain.array()).matrix();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int l = 0; l < kHidden; ++l) {
    cache.pre[l] = affine(model.layers[l], cache.input[l]);
    RMatrix act = cache.pre[l].cwiseMax(0.0);
    if (l == kHidden - 1) cache.features = act;
    if (dropout > 0.0) {
      if (rng == nullptr) throw std::invalid_argument("dropout requires a random generator");
      const double keep = 1.0 - dropout;
      cache.mask[l].resize(act.rows(), act.cols());
      for (Eigen::Index i = 0; i < act.size(); ++i)
        cache.mask[l].data()[i] = unit(*rng) < dropout ? 0.0 : 1.0 / keep;
      act = act.cwiseProduct(cache.mask[l]);
    }
    cache.input[l + 1] = std::move(act);
  }
  cache.probs = sigmoid(affine(model.layers[kLayers - 1], cache.input[kLayers - 1]));
  if (!cache.probs.allFinite()) throw std::runtime_error("non-finite network activations (divergence)");
  return cache;
}

double bce_term(double p, double y) {
  const double q = std::clamp(p, kProbClip, 1.0 - kProbClip);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

Batch gather(const RMatrix& inputs, const RMatrix& targets, std::span<const std::size_t> cols) {
  std::vector<Eigen::Index> idx(cols.begin(), cols.end());
  return {inputs(Eigen::all, idx), targets(Eigen::all, idx)};
}

}  // namespace

InputNormalizer InputNormalizer::identity() {
  return {RVector::Zero(kLayerDims[0]), RVector::Ones(kLayerDims[0])};
}

bool MlpModel::all_finite() const {
  if (!input.mean.allFinite() || !input.gain.allFinite()) return false;
  return std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

namespace {

MlpModel shaped_model() {
  MlpModel model;
  for (int l = 0; l < kLayers; ++l) {
    model.layers[l].weight = RMatrix::Zero(kLayerDims[l + 1], kLayerDims[l]);
    model.layers[l].bias = RVector::Zero(kLayerDims[l + 1]);
    model.adam.m_weight[l] = RMatrix::Zero(kLayerDims[l + 1], kLayerDims[l]);
    model.adam.v_weight[l] = RMatrix::Zero(kLayerDims[l + 1], kLayerDims[l]);
    model.adam.m_bias[l] = RVector::Zero(kLayerDims[l + 1]);
    model.adam.v_bias[l] = RVector::Zero(kLayerDims[l + 1]);
  }
  return model;
}

}  // namespace

MlpModel init_model(std::uint64_t seed) {
  MlpModel model = shaped_model();
  for (int l = 0; l < kLayers; ++l) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(l));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / kLayerDims[l]));
    RMatrix& w = model.layers[l].weight;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = normal(rng);
  }
  return model;
}

MlpModel zero_model() { return shaped_model(); }

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0,1)");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie in (0,1)");
}

RVector flatten(const homodyne::CorrelationPattern& pattern) {
  const auto v = pattern.values();
  return Eigen::Map<const RVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

InputNormalizer fit_normalizer(const RMatrix& inputs) {
  if (inputs.rows() != homodyne::kPatternSize || inputs.cols() == 0)
    throw std::invalid_argument("fit_normalizer needs a non-empty 2304-row input matrix");
  const RVector m1 = inputs.rowwise().mean();
  const RVector m2 = inputs.cwiseAbs2().rowwise().mean();
  // A relabeled column reads x(map(k)), so pooling averages the moments
  // along each orbit.
  RVector p1 = RVector::Zero(m1.size()), p2 = RVector::Zero(m1.size());
  for (int g = 0; g < homodyne::kSymmetryCount; ++g) {
    const auto& map = homodyne::symmetry_index_map(g);
    p1 += m1(map);
    p2 += m2(map);
  }
  p1 /= homodyne::kSymmetryCount;
  p2 /= homodyne::kSymmetryCount;
  const RVector sd = (p2 - p1.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  return {p1, (kInputGain / (sd.array() + kInputStdFloor)).matrix()};
}

Batch make_batch(std::span<const homodyne::CorrelationPattern> patterns,
                 std::span<const witness::LabelVector> labels) {
  if (patterns.size() != labels.size()) throw std::invalid_argument("pattern/label count mismatch");
  const auto n = static_cast<Eigen::Index>(patterns.size());
  Batch batch{RMatrix(kLayerDims[0], n), RMatrix(kOutputs, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    batch.inputs.col(i) = flatten(patterns[i]);
    for (int k = 0; k < kOutputs; ++k) batch.targets(k, i) = labels[i][k];
  }
  return batch;
}

ForwardResult forward(const MlpModel& model, const homodyne::CorrelationPattern& pattern,
                      bool train_mode, Rng* rng, double dropout) {
  const double rate = train_mode ? dropout : 0.0;
  const ForwardCache cache = run_forward(model, flatten(pattern), rate, rng);
  return {cache.probs.col(0), cache.features.col(0)};
}

BatchOutput forward_batch(const MlpModel& model, const RMatrix& inputs) {
  ForwardCache cache = run_forward(model, inputs, 0.0, nullptr);
  return {std::move(cache.probs), std::move(cache.features)};
}

double bce_loss(const Eigen::Vector3d& probs, const witness::LabelVector& labels) {
  double sum = 0.0;
  for (int k = 0; k < kOutputs; ++k) sum += bce_term(probs(k), labels[k]);
  return sum / kOutputs;
}

double batch_loss(const RMatrix& probs, const RMatrix& targets) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j)
    for (int k = 0; k < kOutputs; ++k) sum += bce_term(probs(k, j), targets(k, j));
  return sum / (kOutputs * static_cast<double>(probs.cols()));
}

double loss_and_gradients(const MlpModel& model, const Batch& batch, double dropout, Rng* rng,
                          Gradients& grads) {
  const ForwardCache cache = run_forward(model, batch.inputs, dropout, rng);
  const double loss = batch_loss(cache.probs, batch.targets);
  const double scale = 1.0 / (kOutputs * static_cast<double>(batch.inputs.cols()));

  // d loss / d logits for sigmoid + BCE.
  RMatrix delta = (cache.probs - batch.targets) * scale;
  for (int l = kLayers - 1; l >= 0; --l) {
    grads.weight[l] = delta * cache.input[l].transpose();
    grads.bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    RMatrix back = model.layers[l].weight.transpose() * delta;
    const int h = l - 1;
    if (cache.mask[h].size() > 0) back = back.cwiseProduct(cache.mask[h]);
    delta = back.cwiseProduct((cache.pre[h].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

void adam_update(MlpModel& model, const Gradients& grads, const TrainConfig& config) {
  AdamState& s = model.adam;
  ++s.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(s.step));
  const double lr = config.learning_rate;
  const double b1 = config.beta1, b2 = config.beta2, eps = config.adam_eps;

  auto step = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (int l = 0; l < kLayers; ++l) {
    step(model.layers[l].weight, s.m_weight[l], s.v_weight[l], grads.weight[l]);
    step(model.layers[l].bias, s.m_bias[l], s.v_bias[l], grads.bias[l]);
  }
}

double train_step(MlpModel& model, const Batch& batch, const TrainConfig& config, Rng& rng) {
  Gradients grads;
  const double loss = loss_and_gradients(model, batch, config.dropout, &rng, grads);
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "training diverged: loss=" << loss << " at Adam step " << model.adam.step;
    throw std::runtime_error(msg.str());
  }
  adam_update(model, grads, config);
  return loss;
}

int augmentation_symmetry(std::uint64_t seed, int epoch, std::size_t index) {
  const std::uint64_t epoch_seed = derive_seed(derive_seed(seed, 3), static_cast<std::uint64_t>(epoch));
  return static_cast<int>(derive_seed(epoch_seed, index) % homodyne::kSymmetryCount);
}

TrainResult train(MlpModel model, std::span<const homodyne::CorrelationPattern> patterns,
                  std::span<const witness::LabelVector> labels, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (patterns.size() != labels.size()) throw std::invalid_argument("pattern/label count mismatch");
  if (patterns.size() < 2) throw std::invalid_argument("need at least two examples to split");

  TrainResult result;
  std::vector<std::size_t> order(patterns.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = make_rng(config.seed, 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * patterns.size()));
  n_train = std::clamp<std::size_t>(n_train, 1, patterns.size() - 1);
  result.train_indices.assign(order.begin(), order.begin() + n_train);
  result.val_indices.assign(order.begin() + n_train, order.end());

  const Batch all = make_batch(patterns, labels);
  const Batch train_set = gather(all.inputs, all.targets, result.train_indices);
  const Batch val_set = gather(all.inputs, all.targets, result.val_indices);
  if (config.standardize) model.input = fit_normalizer(train_set.inputs);

  Rng shuffle_rng = make_rng(config.seed, 1);
  Rng dropout_rng = make_rng(config.seed, 2);
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), 0);
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> cols(perm.data() + start, stop - start);
      Batch batch = gather(train_set.inputs, train_set.targets, cols);
      if (config.augment) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
          // Keyed by dataset index, so the draw does not depend on batch order.
          const int g = augmentation_symmetry(config.seed, epoch, result.train_indices[cols[k]]);
          const auto& map = homodyne::symmetry_index_map(g);
          batch.inputs.col(static_cast<Eigen::Index>(k)) = train_set.inputs(map, static_cast<Eigen::Index>(cols[k]));
        }
      }
      loss_sum += train_step(model, batch, config, dropout_rng) * static_cast<double>(cols.size());
      seen += cols.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    const BatchOutput out = forward_batch(model, val_set.inputs);
    rec.val_loss = batch_loss(out.probs, val_set.targets);
    for (int k = 0; k < kOutputs; ++k) {
      std::size_t hits = 0;
      for (Eigen::Index j = 0; j < out.probs.cols(); ++j)
        hits += (out.probs(k, j) >= kDecisionThreshold ? 1.0 : 0.0) == val_set.targets(k, j);
      rec.val_accuracy[k] = static_cast<double>(hits) / static_cast<double>(out.probs.cols());
    }
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_model = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.final_model = std::move(model);
  return result;
}

witness::LabelVector threshold(const Eigen::Vector3d& probs) {
  witness::LabelVector labels;
  labels.e_ppt = probs(0) >= kDecisionThreshold;
  labels.e_qfi1 = probs(1) >= kDecisionThreshold;
  labels.e_qfi2 = probs(2) >= kDecisionThreshold;
  return labels;
}

RMatrix symmetrized_probs(const MlpModel& model, const RMatrix& inputs) {
  if (inputs.rows() != homodyne::kPatternSize) throw std::invalid_argument("input rows must equal the pattern size");
  RMatrix sum = RMatrix::Zero(kOutputs, inputs.cols());
  for (int g = 0; g < homodyne::kSymmetryCount; ++g)
    sum += forward_batch(model, inputs(homodyne::symmetry_index_map(g), Eigen::all)).probs;
  return sum / static_cast<double>(homodyne::kSymmetryCount);
}

Prediction predict_labels(const MlpModel& model, const homodyne::CorrelationPattern& pattern) {
  const Eigen::Vector3d probs = symmetrized_probs(model, flatten(pattern));
  return {probs, threshold(probs)};
}

Eigen::Vector3d signed_scores(const Eigen::Vector3d& probs) {
  return (2.0 * probs.array() - 1.0).matrix();
}

std::array<double, kOutputs> accuracy(std::span<const witness::LabelVector> predicted,
                                      std::span<const witness::LabelVector> truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw std::invalid_argument("accuracy needs equally sized, non-empty label sets");
  std::array<double, kOutputs> acc{};
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (int k = 0; k < kOutputs; ++k) acc[k] += predicted[i][k] == truth[i][k];
  for (double& a : acc) a /= static_cast<double>(truth.size());
  return acc;
}

std::array<double, kOutputs> evaluate_accuracy(const MlpModel& model,
                                               std::span<const homodyne::CorrelationPattern> patterns,
                                               std::span<const witness::LabelVector> labels) {
  if (patterns.empty()) throw std::invalid_argument("evaluate_accuracy: empty test set");
  const Batch batch = make_batch(patterns, labels);
  const RMatrix probs = symmetrized_probs(model, batch.inputs);
  std::vector<witness::LabelVector> predicted(patterns.size());
  for (std::size_t i = 0; i < predicted.size(); ++i)
    predicted[i] = threshold(probs.col(static_cast<Eigen::Index>(i)));
  return accuracy(predicted, labels);
}

void save_checkpoint(const MlpModel& model, std::ostream& os) {
  io::write_magic(os, kCheckpointMagic);
  io::write_le<std::uint32_t>(os, kLayers);
  for (const Layer& layer : model.layers) {
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(layer.weight.cols()));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(layer.weight.rows()));
  }
  for (const Layer& layer : model.layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) io::write_le<double>(os, layer.weight(i, j));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) io::write_le<double>(os, layer.bias(i));
  }
  for (Eigen::Index i = 0; i < model.input.mean.size(); ++i) io::write_le<double>(os, model.input.mean(i));
  for (Eigen::Index i = 0; i < model.input.gain.size(); ++i) io::write_le<double>(os, model.input.gain(i));
  if (!os) throw std::runtime_error("failed to write checkpoint");
}

MlpModel load_checkpoint(std::istream& is) {
  io::expect_magic(is, kCheckpointMagic);
  const auto count = io::read_le<std::uint32_t>(is);
  if (count != kLayers) throw std::runtime_error("checkpoint has unexpected layer count");
  for (int l = 0; l < kLayers; ++l) {
    const auto in = io::read_le<std::uint32_t>(is);
    const auto out = io::read_le<std::uint32_t>(is);
    if (static_cast<int>(in) != kLayerDims[l] || static_cast<int>(out) != kLayerDims[l + 1])
      throw std::runtime_error("checkpoint layer dimensions do not match 2304-1024-128-64-3");
  }
  MlpModel model = shaped_model();
  for (Layer& layer : model.layers) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = io::read_le<double>(is);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = io::read_le<double>(is);
  }
  for (Eigen::Index i = 0; i < model.input.mean.size(); ++i) model.input.mean(i) = io::read_le<double>(is);
  for (Eigen::Index i = 0; i < model.input.gain.size(); ++i) model.input.gain(i) = io::read_le<double>(is);
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes after checkpoint");
  if (!model.all_finite()) throw std::runtime_error("checkpoint contains non-finite parameters");
  return model;
}

void save_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(model, os);
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace cvkit::mlp
