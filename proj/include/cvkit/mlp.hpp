#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cvkit/homodyne.hpp"
#include "cvkit/witness.hpp"

// Fully connected entanglement classifier 2304-1024-128-64-3 with ReLU hidden
// layers, inverted dropout, sigmoid outputs and binary cross-entropy.
namespace cvkit::mlp {

inline constexpr int kLayers = 4;
inline constexpr std::array<int, kLayers + 1> kLayerDims{homodyne::kPatternSize, 1024, 128, 64, 3};
inline constexpr int kOutputs = 3;
inline constexpr int kFeatureDim = 64;
// Standardized input x' = (x - mean) * kInputGain / (std + kInputStdFloor).
// Bin stds sit mostly below the floor, so this is close to a centered gain
// of 10 that damps only the most variable bins. A floor of 1e-3 trained to
// lower accuracy and less separated features.
inline constexpr double kInputGain = 0.1;
inline constexpr double kInputStdFloor = 1e-2;
inline constexpr double kProbClip = 1e-7;
inline constexpr double kDecisionThreshold = 0.5;
inline constexpr double kDefaultDropout = 0.2;

struct Layer {
  RMatrix weight;  // out x in
  RVector bias;
};

struct AdamState {
  std::array<RMatrix, kLayers> m_weight, v_weight;
  std::array<RVector, kLayers> m_bias, v_bias;
  std::int64_t step = 0;
};

// Per-input affine map applied before the first layer.
struct InputNormalizer {
  RVector mean;
  RVector gain;

  static InputNormalizer identity();
};

struct MlpModel {
  InputNormalizer input = InputNormalizer::identity();
  std::array<Layer, kLayers> layers;
  AdamState adam;

  bool all_finite() const;
};

// He-normal weights (std sqrt(2/fan_in)), zero biases, zero Adam moments,
// identity input map.
MlpModel init_model(std::uint64_t seed);
// Every parameter zero; outputs are exactly 0.5.
MlpModel zero_model();

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = kDefaultDropout;
  double train_fraction = 0.7;
  // Present each training pattern under a random symmetry relabeling
  // (homodyne::apply_symmetry) every epoch; labels are invariant under all
  // of them.
  bool augment = true;
  // Replace the model's input map by fit_normalizer on the training split.
  bool standardize = true;
  std::uint64_t seed = 1;

  void validate() const;
};

// Columns are samples: inputs 2304 x B (raw pattern values), targets 3 x B.
struct Batch {
  RMatrix inputs;
  RMatrix targets;
};

RVector flatten(const homodyne::CorrelationPattern& pattern);
// Mean and std of each input over the columns and all their symmetry
// relabelings. The result commutes with every relabeling.
InputNormalizer fit_normalizer(const RMatrix& inputs);
Batch make_batch(std::span<const homodyne::CorrelationPattern> patterns,
                 std::span<const witness::LabelVector> labels);

struct ForwardResult {
  Eigen::Vector3d probs;
  RVector features;  // post-ReLU activations of the 64-unit layer
};

// train_mode enables dropout at `dropout` drawn from `rng`; otherwise rng may
// be null.
ForwardResult forward(const MlpModel& model, const homodyne::CorrelationPattern& pattern,
                      bool train_mode, Rng* rng, double dropout = kDefaultDropout);

// Batched inference: probabilities (3 x B) and features (64 x B).
struct BatchOutput {
  RMatrix probs;
  RMatrix features;
};
BatchOutput forward_batch(const MlpModel& model, const RMatrix& inputs);
// Probabilities averaged over all homodyne::kSymmetryCount relabelings of
// each input column. Exactly invariant under apply_symmetry, up to rounding.
RMatrix symmetrized_probs(const MlpModel& model, const RMatrix& inputs);

double bce_loss(const Eigen::Vector3d& probs, const witness::LabelVector& labels);
// Mean BCE over the batch columns.
double batch_loss(const RMatrix& probs, const RMatrix& targets);

struct Gradients {
  std::array<RMatrix, kLayers> weight;
  std::array<RVector, kLayers> bias;
};

// Loss of the batch and its gradient; dropout active when dropout > 0.
double loss_and_gradients(const MlpModel& model, const Batch& batch, double dropout, Rng* rng,
                          Gradients& grads);

void adam_update(MlpModel& model, const Gradients& grads, const TrainConfig& config);

// One minibatch step; returns the batch loss.
double train_step(MlpModel& model, const Batch& batch, const TrainConfig& config, Rng& rng);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::array<double, kOutputs> val_accuracy{};
};

struct TrainResult {
  MlpModel final_model;
  MlpModel best_model;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

// Symmetry used for dataset example `index` in `epoch` when augmenting.
int augmentation_symmetry(std::uint64_t seed, int epoch, std::size_t index);

// Shuffled 70/30 split with config.seed, minibatch Adam, best-validation
// checkpoint alongside the final model. `on_epoch` may be empty.
TrainResult train(MlpModel model, std::span<const homodyne::CorrelationPattern> patterns,
                  std::span<const witness::LabelVector> labels, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct Prediction {
  Eigen::Vector3d probs;
  witness::LabelVector labels;
};

witness::LabelVector threshold(const Eigen::Vector3d& probs);
// Both use symmetrized_probs. Training validation does not (64x the cost).
Prediction predict_labels(const MlpModel& model, const homodyne::CorrelationPattern& pattern);
// 2p - 1 in [-1, 1]; positive means the entangled class.
Eigen::Vector3d signed_scores(const Eigen::Vector3d& probs);

std::array<double, kOutputs> accuracy(std::span<const witness::LabelVector> predicted,
                                      std::span<const witness::LabelVector> truth);
std::array<double, kOutputs> evaluate_accuracy(const MlpModel& model,
                                               std::span<const homodyne::CorrelationPattern> patterns,
                                               std::span<const witness::LabelVector> labels);

// Checkpoint: "CVNN2", u32 layer count, per layer u32 (in, out), then per
// layer the row-major f64 weights followed by the f64 biases, then the input
// mean and gain as 2304 f64 each; little-endian.
void save_checkpoint(const MlpModel& model, std::ostream& os);
MlpModel load_checkpoint(std::istream& is);
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace cvkit::mlp
