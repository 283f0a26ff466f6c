#include "cvkit/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <stdexcept>

namespace cvkit::pipeline {

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) throw std::runtime_error("non-finite value in report");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Runs body(i) for i in [0, n) across the worker pool, rethrowing the first
// exception on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void EvaluateConfig::validate() const {
  if (n_states == 0) throw std::invalid_argument("evaluation needs at least one state");
  for (std::size_t n : shots)
    if (n == 0) throw std::invalid_argument("shot counts must be positive");
  if (maxlik_iterations < 1) throw std::invalid_argument("MaxLik iterations must be positive");
  ranges.validate();
}

homodyne::CorrelationPattern test_pattern(const homodyne::HomodyneSampleSet& samples) {
  homodyne::CorrelationPattern pattern;
  for (int c = 0; c < homodyne::kChannels; ++c) {
    std::size_t kept = 0;
    for (const auto& o : samples.channels[c]) {
      const int i = homodyne::bin_index(o.v1);
      const int j = homodyne::bin_index(o.v2);
      if (i < 0 || j < 0) continue;
      pattern.at(c, i, j) += 1.0;
      ++kept;
    }
    for (int i = 0; i < homodyne::kBins; ++i)
      for (int j = 0; j < homodyne::kBins; ++j)
        pattern.at(c, i, j) = kept > 0 ? pattern.at(c, i, j) / static_cast<double>(kept)
                                       : 1.0 / (homodyne::kBins * homodyne::kBins);
  }
  return pattern;
}

namespace {

std::uint64_t test_state_seed(const EvaluateConfig& config, std::size_t index) {
  return derive_seed(derive_seed(config.test_seed, kTestStream), index);
}

}  // namespace

stellar::GeneratedState test_state(const EvaluateConfig& config, std::size_t index) {
  return stellar::synthesize_random_state(config.ranges, fock::FockCutoff(config.n_max), test_state_seed(config, index));
}

EvaluationReport evaluate(const mlp::MlpModel& model, const EvaluateConfig& config) {
  config.validate();
  const fock::FockCutoff cutoff(config.n_max);
  const std::size_t runs = config.shots.size();
  const std::size_t columns = runs + 1;  // last column: theoretical pattern

  struct StateOutcome {
    witness::LabelVector truth;
    std::vector<witness::LabelVector> nn;
    std::vector<witness::LabelVector> ml;
    std::vector<double> fidelity;
  };
  std::vector<StateOutcome> outcomes(config.n_states);
  std::optional<maxlik::BinPovm> povm;
  if (config.with_maxlik) povm.emplace(cutoff);

  parallel_for(config.n_states, [&](std::size_t s) {
    const std::uint64_t state_seed = test_state_seed(config, s);
    const auto gen = stellar::synthesize_random_state(config.ranges, cutoff, state_seed);
    StateOutcome& out = outcomes[s];
    out.truth = witness::label_state(gen.state).labels;
    out.nn.resize(columns);
    for (std::size_t k = 0; k < runs; ++k) {
      const auto samples = homodyne::sample_homodyne(gen.state, config.shots[k], derive_seed(state_seed, k + 1));
      out.nn[k] = mlp::predict_labels(model, test_pattern(samples)).labels;
      if (povm) {
        const auto rec = maxlik::reconstruct(*povm, maxlik::frequencies(samples), config.maxlik_iterations);
        out.ml.push_back(witness::label_state(rec.state).labels);
        out.fidelity.push_back(fock::fidelity(gen.state, rec.state));
      }
    }
    out.nn[runs] = mlp::predict_labels(model, homodyne::pattern_from_pdf(gen.state)).labels;
  });

  EvaluationReport report;
  std::vector<witness::LabelVector> truth;
  truth.reserve(outcomes.size());
  for (const auto& o : outcomes) truth.push_back(o.truth);
  for (const auto& t : truth)
    for (int k = 0; k < 3; ++k) report.class_balance[k] += t[k];
  for (double& b : report.class_balance) b /= static_cast<double>(truth.size());

  for (std::size_t col = 0; col < columns; ++col) {
    AccuracyRow row;
    row.shots = col < runs ? config.shots[col] : 0;
    std::vector<witness::LabelVector> nn;
    nn.reserve(outcomes.size());
    for (const auto& o : outcomes) nn.push_back(o.nn[col]);
    row.nn = mlp::accuracy(nn, truth);
    if (povm && col < runs) {
      std::vector<witness::LabelVector> ml;
      double fid = 0.0;
      for (const auto& o : outcomes) {
        ml.push_back(o.ml[col]);
        fid += o.fidelity[col];
      }
      row.maxlik = mlp::accuracy(ml, truth);
      row.maxlik_fidelity = fid / static_cast<double>(outcomes.size());
    }
    report.rows.push_back(row);
  }
  return report;
}

void write_evaluation_csv(const EvaluationReport& report, std::ostream& os) {
  const bool ml = !report.rows.empty() && report.rows.front().maxlik.has_value();
  os << "n,nn_ppt,nn_qfi1,nn_qfi2";
  if (ml) os << ",ml_ppt,ml_qfi1,ml_qfi2,ml_fidelity";
  os << '\n';
  for (const auto& row : report.rows) {
    os << (row.shots == 0 ? std::string("inf") : std::to_string(row.shots));
    for (double a : row.nn) os << ',' << num(a);
    if (ml) {
      if (row.maxlik) {
        for (double a : *row.maxlik) os << ',' << num(a);
        os << ',' << num(*row.maxlik_fidelity);
      } else {
        os << ",,,,";
      }
    }
    os << '\n';
  }
}

std::vector<double> LossSweepConfig::default_eta_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 40; ++k) grid.push_back(0.025 * k);
  return grid;
}

std::vector<LossSweepPoint> loss_sweep(const mlp::MlpModel* model, const LossSweepConfig& config) {
  if (config.etas.empty()) throw std::invalid_argument("loss sweep needs at least one eta");
  if (config.shots == 0) throw std::invalid_argument("shot count must be positive");
  const fock::FockCutoff cutoff(config.n_max);
  std::vector<LossSweepPoint> points(config.etas.size());
  parallel_for(points.size(), [&](std::size_t k) {
    const double eta = config.etas[k];
    const auto state = stellar::photon_subtracted_state(config.r1_db, config.r2_db, config.omega1,
                                                        config.omega2, config.gamma, eta, cutoff);
    LossSweepPoint& pt = points[k];
    pt.eta = eta;
    pt.witness = witness::label_state(state).values;
    if (model) {
      pt.nn_theory = mlp::signed_scores(mlp::predict_labels(*model, homodyne::pattern_from_pdf(state)).probs);
      const auto samples = homodyne::sample_homodyne(state, config.shots, derive_seed(config.seed, k));
      pt.nn_sampled = mlp::signed_scores(mlp::predict_labels(*model, test_pattern(samples)).probs);
    }
  });
  return points;
}

void write_loss_sweep_csv(const std::vector<LossSweepPoint>& points, std::ostream& os) {
  const bool nn = !points.empty() && points.front().nn_theory.has_value();
  os << "eta,ppt_min,qfi1,qfi2";
  if (nn) os << ",nn_theory_ppt,nn_theory_qfi1,nn_theory_qfi2,nn_sampled_ppt,nn_sampled_qfi1,nn_sampled_qfi2";
  os << '\n';
  for (const auto& pt : points) {
    os << num(pt.eta) << ',' << num(pt.witness.ppt_min) << ',' << num(pt.witness.qfi1) << ','
       << num(pt.witness.qfi2);
    if (nn) {
      for (int i = 0; i < 3; ++i) os << ',' << num((*pt.nn_theory)(i));
      for (int i = 0; i < 3; ++i) os << ',' << num((*pt.nn_sampled)(i));
    }
    os << '\n';
  }
}

std::optional<double> zero_crossing(const std::vector<double>& grid, const std::vector<double>& values) {
  if (grid.size() != values.size()) throw std::invalid_argument("grid and values differ in length");
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double a = values[k], b = values[k + 1];
    if (a > 0.0 && b <= 0.0) return grid[k] + (grid[k + 1] - grid[k]) * a / (a - b);
  }
  return std::nullopt;
}

RMatrix embed_inputs(const Dataset& dataset, EmbedSource source, const mlp::MlpModel* model) {
  const auto n = static_cast<Eigen::Index>(dataset.records.size());
  if (source == EmbedSource::Raw) {
    RMatrix data(n, homodyne::kPatternSize);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto values = dataset.records[i].pattern.values();
      data.row(i) = Eigen::Map<const RVector>(values.data(), homodyne::kPatternSize).transpose();
    }
    return data;
  }
  if (!model) throw std::invalid_argument("feature embedding needs a trained model");
  RMatrix inputs(homodyne::kPatternSize, n);
  for (Eigen::Index i = 0; i < n; ++i) inputs.col(i) = mlp::flatten(dataset.records[i].pattern);
  return mlp::forward_batch(*model, inputs).features.transpose();
}

EmbedResult embed_dataset(const Dataset& dataset, EmbedSource source, const mlp::MlpModel* model,
                          const tsne::TsneConfig& config) {
  EmbedResult result;
  result.embedding = tsne::embed(embed_inputs(dataset, source, model), config);
  result.labels = dataset.labels();
  return result;
}

void write_embedding_csv(const EmbedResult& result, std::ostream& os) {
  os << "x,y,e_ppt,e_qfi1,e_qfi2\n";
  const RMatrix& y = result.embedding.points;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const auto& l = result.labels[static_cast<std::size_t>(i)];
    os << num(y(i, 0)) << ',' << num(y(i, 1)) << ',' << int(l.e_ppt) << ',' << int(l.e_qfi1) << ','
       << int(l.e_qfi2) << '\n';
  }
}

void write_history_csv(const std::vector<mlp::EpochRecord>& history, std::ostream& os) {
  os << "epoch,train_loss,val_loss,val_acc_ppt,val_acc_qfi1,val_acc_qfi2\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_loss);
    for (double a : r.val_accuracy) os << ',' << num(a);
    os << '\n';
  }
}

}  // namespace cvkit::pipeline
