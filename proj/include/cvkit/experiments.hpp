#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cvkit/dataset.hpp"
#include "cvkit/maxlik.hpp"
#include "cvkit/mlp.hpp"
#include "cvkit/tsne.hpp"

namespace cvkit::pipeline {

// ---- evaluation on unseen states ----

inline constexpr std::uint64_t kTestStream = 0x7e57;

struct EvaluateConfig {
  std::uint64_t test_seed = 20231;
  std::size_t n_states = 500;
  std::vector<std::size_t> shots{10, 100, 1000, 10000, 100000};
  bool with_maxlik = false;
  int maxlik_iterations = maxlik::kDefaultIterations;
  stellar::GenerationRanges ranges;
  int n_max = fock::kDefaultNMax;

  void validate() const;
};

struct AccuracyRow {
  std::size_t shots = 0;  // 0 for the theoretical (N = infinity) pattern
  std::array<double, 3> nn{};
  std::optional<std::array<double, 3>> maxlik;
  std::optional<double> maxlik_fidelity;  // mean over states, diagnostic
};

struct EvaluationReport {
  std::array<double, 3> class_balance{};
  std::vector<AccuracyRow> rows;  // one per entry of shots, then the theoretical row
};

// Per state i: seed derive_seed(derive_seed(test_seed, kTestStream), i)
// drives synthesis and derive_seed(that, k + 1) the k-th sampling run. The
// extra stream keeps test states apart from a dataset generated with the
// same seed. The NN only sees patterns.
EvaluationReport evaluate(const mlp::MlpModel& model, const EvaluateConfig& config);
stellar::GeneratedState test_state(const EvaluateConfig& config, std::size_t index);

// Columns: n, nn_ppt, nn_qfi1, nn_qfi2 [, ml_ppt, ml_qfi1, ml_qfi2, ml_fidelity]
void write_evaluation_csv(const EvaluationReport& report, std::ostream& os);

// Sampled pattern used at test time. A channel without any in-window outcome
// carries no information and is filled uniformly.
homodyne::CorrelationPattern test_pattern(const homodyne::HomodyneSampleSet& samples);

// ---- loss robustness of the photon-subtracted family ----

struct LossSweepConfig {
  double r1_db = 2.0;
  double r2_db = -3.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
  double gamma = kPi / 4.0;
  std::vector<double> etas = default_eta_grid();
  std::size_t shots = 100000;
  std::uint64_t seed = 1;
  int n_max = fock::kDefaultNMax;

  static std::vector<double> default_eta_grid();  // 0, 0.025, ..., 1
};

struct LossSweepPoint {
  double eta = 0.0;
  witness::WitnessValues witness;
  std::optional<Eigen::Vector3d> nn_theory;   // signed scores 2p - 1
  std::optional<Eigen::Vector3d> nn_sampled;
};

// The model is optional; without it only the witness curves are computed.
std::vector<LossSweepPoint> loss_sweep(const mlp::MlpModel* model, const LossSweepConfig& config);

// Columns: eta, ppt_min, qfi1, qfi2 [, nn_theory_ppt, nn_theory_qfi1,
// nn_theory_qfi2, nn_sampled_ppt, nn_sampled_qfi1, nn_sampled_qfi2]
void write_loss_sweep_csv(const std::vector<LossSweepPoint>& points, std::ostream& os);

// Linear interpolation of the first positive-to-non-positive transition of
// values over the grid; nullopt if the sign never changes.
std::optional<double> zero_crossing(const std::vector<double>& grid, const std::vector<double>& values);

// ---- embedding ----

enum class EmbedSource { Raw, Features };

struct EmbedResult {
  tsne::Embedding embedding;
  std::vector<witness::LabelVector> labels;
};

// Rows: normalized patterns (Raw) or 64-dim last-hidden-layer activations.
RMatrix embed_inputs(const Dataset& dataset, EmbedSource source, const mlp::MlpModel* model);
EmbedResult embed_dataset(const Dataset& dataset, EmbedSource source, const mlp::MlpModel* model,
                          const tsne::TsneConfig& config);

// Columns: x, y, e_ppt, e_qfi1, e_qfi2
void write_embedding_csv(const EmbedResult& result, std::ostream& os);

// ---- training history ----

// Columns: epoch, train_loss, val_loss, val_acc_ppt, val_acc_qfi1, val_acc_qfi2
void write_history_csv(const std::vector<mlp::EpochRecord>& history, std::ostream& os);

}  // namespace cvkit::pipeline
