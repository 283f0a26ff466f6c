#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "cvkit/config_file.hpp"
#include "cvkit/experiments.hpp"

using namespace cvkit;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--config", c.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, out_help)->required();
}

ConfigFile load_config(const Common& c) {
  return c.config_path.empty() ? ConfigFile{} : ConfigFile::load(c.config_path);
}

void reject_unused(const ConfigFile& cfg) {
  const auto keys = cfg.unused();
  if (keys.empty()) return;
  std::string msg = "unknown config keys:";
  for (const auto& k : keys) msg += " " + k;
  throw std::invalid_argument(msg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

stellar::GenerationRanges read_ranges(const ConfigFile& cfg) {
  stellar::GenerationRanges r;
  r.r_max = cfg.get_double("r_max", r.r_max);
  r.alpha_max = cfg.get_double("alpha_max", r.alpha_max);
  r.eta_max = cfg.get_double("eta_max", r.eta_max);
  r.bs_prob = cfg.get_double("bs_prob", r.bs_prob);
  r.bs_max = cfg.get_double("bs_max", r.bs_max);
  r.validate();
  return r;
}

void print_balance(const char* what, const std::array<double, 3>& b) {
  std::printf("%s class balance (fraction entangled): ppt %.4f  qfi1 %.4f  qfi2 %.4f\n", what, b[0], b[1], b[2]);
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();
  CLI::App app{"Entanglement detection from homodyne correlation patterns"};
  app.require_subcommand(1);

  // generate
  Common gen_c;
  std::optional<std::size_t> gen_count;
  std::optional<int> gen_nmax;
  auto* gen = app.add_subcommand("generate", "synthesize random states into a dataset file");
  add_common(gen, gen_c, "dataset file");
  gen->add_option("--count", gen_count, "number of states");
  gen->add_option("--n-max", gen_nmax, "Fock cutoff per mode");

  // train
  Common train_c;
  std::string train_data, train_history, train_final;
  std::optional<int> train_epochs;
  auto* train = app.add_subcommand("train", "train the classifier on a dataset");
  add_common(train, train_c, "checkpoint of the best-validation model");
  train->add_option("--data", train_data, "dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--history", train_history, "history CSV (default: <out>.history.csv)");
  train->add_option("--final", train_final, "also save the final-epoch model here");
  train->add_option("--epochs", train_epochs, "training epochs");

  // evaluate
  Common eval_c;
  std::string eval_model;
  std::optional<std::size_t> eval_states;
  std::vector<std::size_t> eval_shots;
  bool eval_maxlik = false;
  auto* eval = app.add_subcommand("evaluate", "accuracy versus shot number on unseen states");
  add_common(eval, eval_c, "accuracy CSV");
  eval->add_option("--model", eval_model, "checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--states", eval_states, "number of unseen test states");
  eval->add_option("--shots", eval_shots, "shot counts per channel")->delimiter(',');
  eval->add_flag("--maxlik", eval_maxlik, "also reconstruct with MaxLik and label the estimate");

  // loss-sweep
  Common sweep_c;
  std::string sweep_model;
  std::optional<std::size_t> sweep_shots;
  auto* sweep = app.add_subcommand("loss-sweep", "witness and network scores of the photon-subtracted state versus loss");
  add_common(sweep, sweep_c, "sweep CSV");
  sweep->add_option("--model", sweep_model, "checkpoint (omit for witness curves only)")->check(CLI::ExistingFile);
  sweep->add_option("--shots", sweep_shots, "shots per channel for the sampled pattern");

  // embed
  Common embed_c;
  std::string embed_model, embed_data, embed_which = "features";
  std::optional<std::size_t> embed_limit;
  auto* emb = app.add_subcommand("embed", "t-SNE of raw patterns or hidden features");
  add_common(emb, embed_c, "embedding CSV");
  emb->add_option("--data", embed_data, "dataset file")->required()->check(CLI::ExistingFile);
  emb->add_option("--model", embed_model, "checkpoint (required for features)")->check(CLI::ExistingFile);
  emb->add_option("--which", embed_which, "raw or features")->check(CLI::IsMember({"raw", "features"}));
  emb->add_option("--limit", embed_limit, "use only the first records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const ConfigFile cfg = load_config(gen_c);
      pipeline::GenerateConfig gc;
      gc.count = gen_count.value_or(static_cast<std::size_t>(cfg.get_int("count", static_cast<std::int64_t>(gc.count))));
      gc.n_max = gen_nmax.value_or(static_cast<int>(cfg.get_int("n_max", gc.n_max)));
      gc.ranges = read_ranges(cfg);
      gc.seed = gen_c.seed;
      reject_unused(cfg);
      const auto ds = pipeline::generate_dataset(gc);
      pipeline::write_dataset(ds, gen_c.out);
      std::printf("wrote %zu records to %s\n", ds.records.size(), gen_c.out.c_str());
      print_balance("dataset", ds.class_balance());
    } else if (train->parsed()) {
      const ConfigFile cfg = load_config(train_c);
      mlp::TrainConfig tc;
      tc.epochs = train_epochs.value_or(static_cast<int>(cfg.get_int("epochs", tc.epochs)));
      tc.batch_size = static_cast<int>(cfg.get_int("batch_size", tc.batch_size));
      tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
      tc.beta1 = cfg.get_double("beta1", tc.beta1);
      tc.beta2 = cfg.get_double("beta2", tc.beta2);
      tc.adam_eps = cfg.get_double("adam_eps", tc.adam_eps);
      tc.dropout = cfg.get_double("dropout", tc.dropout);
      tc.train_fraction = cfg.get_double("train_fraction", tc.train_fraction);
      tc.augment = cfg.get_bool("augment", tc.augment);
      tc.standardize = cfg.get_bool("standardize", tc.standardize);
      tc.seed = train_c.seed;
      reject_unused(cfg);
      tc.validate();
      const auto ds = pipeline::read_dataset(train_data);
      const auto patterns = ds.patterns();
      const auto labels = ds.labels();
      const auto result = mlp::train(mlp::init_model(derive_seed(train_c.seed, 100)), patterns, labels, tc,
                                     [](const mlp::EpochRecord& r) {
                                       std::printf("epoch %4d  train %.5f  val %.5f  acc %.3f %.3f %.3f\n", r.epoch,
                                                   r.train_loss, r.val_loss, r.val_accuracy[0], r.val_accuracy[1],
                                                   r.val_accuracy[2]);
                                       std::fflush(stdout);
                                     });
      mlp::save_checkpoint(result.best_model, train_c.out);
      if (!train_final.empty()) mlp::save_checkpoint(result.final_model, train_final);
      auto hist = open_out(train_history.empty() ? train_c.out + ".history.csv" : train_history);
      pipeline::write_history_csv(result.history, hist);
      std::printf("best epoch %d\n", result.best_epoch);
    } else if (eval->parsed()) {
      const ConfigFile cfg = load_config(eval_c);
      pipeline::EvaluateConfig ec;
      ec.test_seed = eval_c.seed;
      ec.n_states = eval_states.value_or(static_cast<std::size_t>(cfg.get_int("states", static_cast<std::int64_t>(ec.n_states))));
      ec.shots = eval_shots.empty() ? cfg.get_sizes("shots", ec.shots) : eval_shots;
      ec.with_maxlik = eval_maxlik || cfg.get_bool("maxlik", false);
      ec.maxlik_iterations = static_cast<int>(cfg.get_int("maxlik_iterations", ec.maxlik_iterations));
      ec.n_max = static_cast<int>(cfg.get_int("n_max", ec.n_max));
      ec.ranges = read_ranges(cfg);
      reject_unused(cfg);
      const auto model = mlp::load_checkpoint(eval_model);
      const auto report = pipeline::evaluate(model, ec);
      auto os = open_out(eval_c.out);
      pipeline::write_evaluation_csv(report, os);
      print_balance("test set", report.class_balance);
      pipeline::write_evaluation_csv(report, std::cout);
    } else if (sweep->parsed()) {
      const ConfigFile cfg = load_config(sweep_c);
      pipeline::LossSweepConfig lc;
      lc.r1_db = cfg.get_double("r1_db", lc.r1_db);
      lc.r2_db = cfg.get_double("r2_db", lc.r2_db);
      lc.omega1 = cfg.get_double("omega1", lc.omega1);
      lc.omega2 = cfg.get_double("omega2", lc.omega2);
      lc.gamma = cfg.get_double("gamma", lc.gamma);
      lc.etas = cfg.get_doubles("etas", lc.etas);
      lc.shots = sweep_shots.value_or(static_cast<std::size_t>(cfg.get_int("shots", static_cast<std::int64_t>(lc.shots))));
      lc.n_max = static_cast<int>(cfg.get_int("n_max", lc.n_max));
      lc.seed = sweep_c.seed;
      reject_unused(cfg);
      std::optional<mlp::MlpModel> model;
      if (!sweep_model.empty()) model = mlp::load_checkpoint(sweep_model);
      const auto points = pipeline::loss_sweep(model ? &*model : nullptr, lc);
      auto os = open_out(sweep_c.out);
      pipeline::write_loss_sweep_csv(points, os);
      std::vector<double> grid, q1, q2, ppt;
      for (const auto& p : points) {
        grid.push_back(p.eta);
        ppt.push_back(p.witness.ppt_min);
        q1.push_back(p.witness.qfi1);
        q2.push_back(p.witness.qfi2);
      }
      const auto report = [&](const char* name, const std::vector<double>& v) {
        const auto eta = pipeline::zero_crossing(grid, v);
        if (eta) std::printf("%s witness crosses zero at eta = %.4f\n", name, *eta);
        else std::printf("%s witness does not cross zero on the grid\n", name);
      };
      report("ppt", ppt);
      report("qfi1", q1);
      report("qfi2", q2);
    } else if (emb->parsed()) {
      const ConfigFile cfg = load_config(embed_c);
      tsne::TsneConfig tc;
      tc.perplexity = cfg.get_double("perplexity", tc.perplexity);
      tc.iterations = static_cast<int>(cfg.get_int("iterations", tc.iterations));
      tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
      tc.seed = embed_c.seed;
      const std::size_t limit = embed_limit.value_or(static_cast<std::size_t>(cfg.get_int("limit", 0)));
      reject_unused(cfg);
      auto ds = pipeline::read_dataset(embed_data);
      if (limit > 0 && limit < ds.records.size()) ds.records.resize(limit);
      const auto source = embed_which == "raw" ? pipeline::EmbedSource::Raw : pipeline::EmbedSource::Features;
      std::optional<mlp::MlpModel> model;
      if (!embed_model.empty()) model = mlp::load_checkpoint(embed_model);
      const auto result = pipeline::embed_dataset(ds, source, model ? &*model : nullptr, tc);
      auto os = open_out(embed_c.out);
      pipeline::write_embedding_csv(result, os);
      std::printf("t-SNE KL %.5f -> %.5f over %zu points\n", result.embedding.initial_kl, result.embedding.final_kl,
                  ds.records.size());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
