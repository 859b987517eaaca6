// seqae: command-line front end for the sequence autoencoder toolkit.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "seqae/downstream.hpp"
#include "seqae/experiment.hpp"
#include "seqae/features.hpp"
#include "seqae/io.hpp"
#include "seqae/simulation.hpp"
#include "seqae/training.hpp"

using namespace seqae;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string cell = "gru";
  int latent = 10;
  int epochs = 100;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool model_flags) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  if (model_flags) {
    cmd->add_option("--cell", c.cell, "Recurrent cell: gru or lstm")
        ->check(CLI::IsMember({"gru", "lstm"}, CLI::ignore_case))
        ->capture_default_str();
    cmd->add_option("--k", c.latent, "Latent dimension K")->capture_default_str();
    cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  }
}

/// Hash of the options that determine a command's output.
Provenance provenance_of(const std::string& command, const json& options, std::uint64_t seed) {
  json j = options;
  j["command"] = command;
  return {fnv1a_hex(j.dump()), seed};
}

SequenceData load_data(const std::string& path, const std::string& vocab_path,
                       const std::optional<ActionVocabulary>& fixed = std::nullopt) {
  LoadOptions opts;
  if (fixed) {
    opts.vocabulary = *fixed;
    opts.fixed_vocabulary = true;
  } else if (!vocab_path.empty()) {
    opts.vocabulary = load_vocabulary(vocab_path);
  }
  return load_sequences(path, opts);
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text_file(out, text);
}

std::string fmt(double v) { return format_double(v); }

std::vector<CellKind> parse_cells(const std::vector<std::string>& names) {
  std::vector<CellKind> cells;
  for (const auto& n : names) cells.push_back(parse_cell_kind(n));
  return cells;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence autoencoder features for action sequences"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "seqae 1.0");

  // simulate ---------------------------------------------------------------
  Common sim;
  std::string sim_scenario = "I";
  int sim_n = 500, sim_actions = 26;
  bool sim_paired = false;
  auto* simulate = app.add_subcommand("simulate", "Generate a labeled two-group Markov dataset");
  add_common(simulate, sim, false);
  simulate->add_option("--scenario", sim_scenario, "I (two chains) or II (interior reversal)")
      ->capture_default_str();
  simulate->add_option("--n", sim_n, "Number of sequences (even)")->capture_default_str();
  simulate->add_option("--actions", sim_actions, "Vocabulary size N (2..26)")->capture_default_str();
  simulate->add_flag("--paired-reversal", sim_paired,
                     "Scenario II: reverse copies of group 1 instead of fresh draws");
  simulate->add_option("--out", sim.out, "Output directory")->required();

  // cv ---------------------------------------------------------------------
  Common cv;
  std::string cv_data, cv_vocab;
  std::vector<int> cv_candidates{10, 20, 30, 40, 50};
  int cv_folds = 5;
  double cv_step = 1e-3, cv_valfrac = 0.1;
  unsigned cv_threads = 1;
  auto* cvcmd = app.add_subcommand("cv", "Choose K by k-fold held-out reconstruction loss");
  add_common(cvcmd, cv, true);
  cvcmd->add_option("--data", cv_data, "Sequences (JSON lines)")->required();
  cvcmd->add_option("--vocab", cv_vocab, "Extra vocabulary labels, one per line");
  cvcmd->add_option("--candidates", cv_candidates, "K candidates")->delimiter(',')->capture_default_str();
  cvcmd->add_option("--folds", cv_folds, "Number of folds")->capture_default_str();
  cvcmd->add_option("--step-size", cv_step, "Adam step size")->capture_default_str();
  cvcmd->add_option("--validation-fraction", cv_valfrac, "Early-stopping split")->capture_default_str();
  cvcmd->add_option("--threads", cv_threads, "Worker threads")->capture_default_str();
  cvcmd->add_option("--out", cv.out, "CSV report (default stdout)");

  // train ------------------------------------------------------------------
  Common tr;
  std::string tr_data, tr_vocab, tr_log;
  double tr_step = 1e-3, tr_valfrac = 0.1;
  bool tr_plain = false, tr_sgd = false;
  auto* train = app.add_subcommand("train", "Fit the autoencoder");
  add_common(train, tr, true);
  train->add_option("--data", tr_data, "Sequences (JSON lines)")->required();
  train->add_option("--vocab", tr_vocab, "Extra vocabulary labels, one per line");
  train->add_option("--step-size", tr_step, "Step size")->capture_default_str();
  train->add_option("--validation-fraction", tr_valfrac, "Early-stopping split")->capture_default_str();
  train->add_flag("--plain", tr_plain, "Fixed epoch budget on all data, no validation split");
  train->add_flag("--sgd", tr_sgd, "Plain stochastic gradient instead of Adam");
  train->add_option("--log", tr_log, "Per-epoch loss CSV");
  train->add_option("--out", tr.out, "Model file")->required();

  // features ---------------------------------------------------------------
  Common fe;
  std::string fe_model, fe_data, fe_pca_out, fe_pca_in, fe_raw;
  auto* features = app.add_subcommand("features", "Export principal features of each sequence");
  add_common(features, fe, false);
  features->add_option("--model", fe_model, "Model file")->required();
  features->add_option("--data", fe_data, "Sequences (JSON lines)")->required();
  features->add_option("--pca", fe_pca_in, "Apply this PCA sidecar instead of fitting one");
  features->add_option("--pca-out", fe_pca_out, "Write the PCA sidecar here");
  features->add_option("--raw-out", fe_raw, "Also write the raw encoder outputs");
  features->add_option("--out", fe.out, "Principal features CSV")->required();

  // evaluate ---------------------------------------------------------------
  Common ev;
  std::string ev_data, ev_features, ev_response, ev_link = "logit", ev_scenario = "I";
  double ev_train = 0.8, ev_lambda = 1e-2, ev_threshold = 0.05;
  int ev_top = 0;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Reconstruction and group accuracy, or a GLM on features with --response");
  add_common(evaluate, ev, false);
  evaluate->add_option("--data", ev_data, "Labeled sequences (JSON lines)");
  evaluate->add_option("--features", ev_features, "Principal features CSV")->required();
  evaluate->add_option("--response", ev_response, "CSV `id,y`: fit a GLM of y on the features");
  evaluate->add_option("--link", ev_link, "GLM link: logit or identity")
      ->check(CLI::IsMember({"logit", "identity"}))
      ->capture_default_str();
  evaluate->add_option("--top", ev_top, "Use only the first P features (0 = all)")->capture_default_str();
  evaluate->add_option("--scenario", ev_scenario, "Scenario label for the report")->capture_default_str();
  evaluate->add_option("--train-fraction", ev_train, "Training split")->capture_default_str();
  evaluate->add_option("--lambda", ev_lambda, "Ridge penalty")->capture_default_str();
  evaluate->add_option("--threshold", ev_threshold, "Derived-variable frequency threshold")
      ->capture_default_str();
  evaluate->add_option("--out", ev.out, "JSON report (default stdout)");

  // experiment -------------------------------------------------------------
  Common ex;
  ExperimentSpec spec;
  std::string ex_scenario = "I";
  std::vector<std::string> ex_cells{"lstm", "gru"};
  auto* experiment = app.add_subcommand("experiment", "Full simulate-train-evaluate grid cell");
  add_common(experiment, ex, false);
  experiment->add_option("--scenario", ex_scenario, "I or II")->capture_default_str();
  experiment->add_option("--n", spec.n, "Sequences per dataset")->capture_default_str();
  experiment->add_option("--replications", spec.replications, "Datasets")->capture_default_str();
  experiment->add_option("--cells", ex_cells, "Cell kinds")->delimiter(',')->capture_default_str();
  experiment->add_option("--candidates", spec.latent_candidates, "K candidates")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--folds", spec.folds, "CV folds")->capture_default_str();
  experiment->add_option("--actions", spec.actions, "Vocabulary size")->capture_default_str();
  experiment->add_flag("--paired-reversal", spec.paired_reversal, "Scenario II pairing");
  experiment->add_option("--epochs", spec.epochs, "Final training epochs")->capture_default_str();
  experiment->add_option("--cv-epochs", spec.cv_epochs, "Epochs per CV fit (0 = --epochs)")
      ->capture_default_str();
  experiment->add_option("--step-size", spec.step_size, "Adam step size")->capture_default_str();
  experiment->add_option("--validation-fraction", spec.validation_fraction, "Early-stopping split")
      ->capture_default_str();
  experiment->add_option("--train-fraction", spec.train_fraction, "Evaluation split")
      ->capture_default_str();
  experiment->add_option("--lambda", spec.lambda, "Ridge penalty")->capture_default_str();
  experiment->add_option("--threshold", spec.threshold, "Derived-variable threshold")
      ->capture_default_str();
  experiment->add_option("--threads", spec.threads, "Worker threads")->capture_default_str();
  experiment->add_option("--out", ex.out, "Report directory")->required();

  // chisq ------------------------------------------------------------------
  std::vector<double> chi_cells;
  auto* chisq = app.add_subcommand("chisq", "Pearson chi-square test of a 2x2 table");
  chisq->add_option("counts", chi_cells, "a b c d (row-major)")->required()->expected(4);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*simulate) {
      ExperimentSpec s;
      s.scenario = parse_scenario(sim_scenario);
      s.n = sim_n;
      s.actions = sim_actions;
      s.seed = sim.seed;
      s.paired_reversal = sim_paired;
      require(s.n >= 2 && s.n % 2 == 0, ErrorKind::InvalidConfig, "n must be even and >= 2");
      require(s.actions >= 2 && s.actions <= 26, ErrorKind::InvalidConfig, "actions must be in 2..26");
      const auto chains = experiment_chains(s);
      const auto ds = experiment_dataset(s, chains, 1);
      const auto prov = provenance_of(
          "simulate",
          {{"scenario", sim_scenario}, {"n", sim_n}, {"actions", sim_actions}, {"paired", sim_paired}},
          sim.seed);
      export_dataset(sim.out, ds, chains, prov);
      std::string vocab;
      for (const auto& l : ds.vocab.labels()) vocab += l + "\n";
      write_text_file((fs::path(sim.out) / "vocabulary.txt").string(), vocab);
      std::cerr << "wrote " << ds.sequences.size() << " sequences to " << sim.out << " ("
                << ds.truncated_draws << " truncated draws redrawn)\n";
    } else if (*cvcmd) {
      const auto data = load_data(cv_data, cv_vocab);
      TrainConfig cfg;
      cfg.cell = parse_cell_kind(cv.cell);
      cfg.epochs = cv.epochs;
      cfg.seed = cv.seed;
      cfg.step_size = cv_step;
      cfg.validation_fraction = cv_valfrac;
      const auto res =
          cross_validate_latent(data.sequences, data.vocab, cv_candidates, cv_folds, cfg, cv_threads);
      const auto prov = provenance_of("cv",
                                      {{"data", read_text_file(cv_data)},
                                       {"cell", cv.cell},
                                       {"epochs", cv.epochs},
                                       {"candidates", cv_candidates},
                                       {"folds", cv_folds},
                                       {"step", cv_step},
                                       {"valfrac", cv_valfrac}},
                                      cv.seed);
      std::ostringstream out;
      out << "# spec_hash=" << prov.spec_hash << ",seed=" << prov.seed << ",chosen_k="
          << res.chosen_latent << '\n';
      out << "k,mean_loss";
      for (int f = 0; f < cv_folds; ++f) out << ",fold" << (f + 1);
      out << '\n';
      for (std::size_t c = 0; c < res.candidates.size(); ++c) {
        out << res.candidates[c] << ',' << fmt(res.mean_loss[c]);
        for (double l : res.fold_loss[c]) out << ',' << fmt(l);
        out << '\n';
      }
      emit(cv.out, out.str());
      std::cerr << "chosen K = " << res.chosen_latent << '\n';
    } else if (*train) {
      const auto data = load_data(tr_data, tr_vocab);
      TrainConfig cfg;
      cfg.cell = parse_cell_kind(tr.cell);
      cfg.latent = tr.latent;
      cfg.epochs = tr.epochs;
      cfg.seed = tr.seed;
      cfg.step_size = tr_step;
      cfg.validation_fraction = tr_valfrac;
      cfg.optimizer = tr_sgd ? OptimizerKind::Sgd : OptimizerKind::Adam;
      const auto res = tr_plain ? train_plain(data.sequences, data.vocab, cfg)
                                : train_early_stopping(data.sequences, data.vocab, cfg);
      const auto prov = provenance_of("train",
                                      {{"data", read_text_file(tr_data)},
                                       {"vocabulary", data.vocab.labels()},
                                       {"cell", tr.cell},
                                       {"k", tr.latent},
                                       {"epochs", tr.epochs},
                                       {"step", tr_step},
                                       {"valfrac", tr_valfrac},
                                       {"plain", tr_plain},
                                       {"sgd", tr_sgd}},
                                      tr.seed);
      save_model(tr.out, res.params, data.vocab, prov);
      if (!tr_log.empty()) {
        std::ostringstream log;
        write_training_log(log, res.report);
        write_text_file(tr_log, log.str());
      }
      std::cerr << "best epoch " << res.report.best_epoch << ", validation loss "
                << fmt(res.report.best_validation_loss) << '\n';
    } else if (*features) {
      const auto model = load_model(fe_model);
      const auto data = load_data(fe_data, "", model.vocab);
      FeatureMatrix fm;
      Provenance prov = model.provenance;
      if (fe_pca_in.empty()) {
        fm = extract_features(model.params, data.sequences);
      } else {
        fm = extract_features(model.params, data.sequences, load_pca_sidecar(fe_pca_in));
      }
      prov = provenance_of("features",
                           {{"model", model.provenance.spec_hash},
                            {"data", read_text_file(fe_data)},
                            {"pca", fe_pca_in.empty() ? std::string() : read_text_file(fe_pca_in)}},
                           model.provenance.seed);
      std::ostringstream out;
      write_features_csv(out, fm.ids, fm.principal, "pf", prov);
      write_text_file(fe.out, out.str());
      if (!fe_raw.empty()) {
        std::ostringstream raw;
        write_features_csv(raw, fm.ids, fm.raw, "theta", prov);
        write_text_file(fe_raw, raw.str());
      }
      if (!fe_pca_out.empty()) {
        std::ostringstream side;
        write_pca_sidecar(side, fm.pca, prov);
        write_text_file(fe_pca_out, side.str());
      }
    } else if (*evaluate) {
      const auto table = load_features_csv(ev_features);
      MatrixXd X = table.values;
      if (ev_top > 0) {
        require(ev_top <= X.cols(), ErrorKind::InvalidConfig, "--top exceeds the feature count");
        X = X.leftCols(ev_top).eval();
      }
      json report;
      if (!ev_response.empty()) {
        const auto resp = load_features_csv(ev_response);
        require(resp.values.cols() == 1, ErrorKind::Format, "response CSV needs exactly one value column");
        std::unordered_map<std::string, double> y_of;
        for (std::size_t i = 0; i < resp.ids.size(); ++i)
          y_of[resp.ids[i]] = resp.values(static_cast<Eigen::Index>(i), 0);
        const auto n = static_cast<Eigen::Index>(table.ids.size());
        VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          auto it = y_of.find(table.ids[static_cast<std::size_t>(i)]);
          require(it != y_of.end(), ErrorKind::InvalidInput,
                  "no response for '" + table.ids[static_cast<std::size_t>(i)] + "'");
          y(i) = it->second;
        }
        const auto n_train = static_cast<Eigen::Index>(std::llround(ev_train * static_cast<double>(n)));
        require(n_train >= 1 && n_train < n, ErrorKind::InvalidConfig, "train fraction leaves an empty split");
        Rng rng(ev.seed);
        const auto perm = rng.permutation(static_cast<std::size_t>(n));
        MatrixXd Xp(n, X.cols());
        VectorXd yp(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          Xp.row(i) = X.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
          yp(i) = y(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
        }
        const Link link = ev_link == "logit" ? Link::Logit : Link::Identity;
        const auto scaler = Standardizer::fit(Xp.topRows(n_train));
        const MatrixXd Xtr = scaler.apply(Xp.topRows(n_train));
        const MatrixXd Xte = scaler.apply(Xp.bottomRows(n - n_train));
        const VectorXd ytr = yp.head(n_train), yte = yp.tail(n - n_train);
        const auto model = fit_glm(link, Xtr, ytr, ev_lambda);
        std::vector<double> coef(model.coefficients.data(),
                                 model.coefficients.data() + model.coefficients.size());
        report = {{"link", ev_link},
                  {"lambda", ev_lambda},
                  {"train_size", n_train},
                  {"test_size", n - n_train},
                  {"coefficients", coef},
                  {"train_aic", aic(model, Xtr, ytr)},
                  {"test_metric", link == Link::Logit ? "accuracy" : "osr2"},
                  {"test_value", evaluate_prediction(model, Xte, yte)}};
      } else {
        require(!ev_data.empty(), ErrorKind::InvalidConfig, "evaluate needs --data or --response");
        const auto data = load_data(ev_data, "");
        const auto ds = labeled_dataset(data, parse_scenario(ev_scenario), ev.seed);
        FeatureMatrix fm;
        fm.ids = table.ids;
        fm.principal = X;
        fm.raw = X;
        ScenarioOptions opts;
        opts.train_fraction = ev_train;
        opts.lambda = ev_lambda;
        opts.threshold = ev_threshold;
        opts.seed = ev.seed;
        const auto rep = scenario_evaluation(ds, fm, opts);
        json vars = json::array();
        for (std::size_t v = 0; v < rep.variables.size(); ++v)
          vars.push_back({{"variable", rep.variables[v].name(ds.vocab)}, {"accuracy", rep.variable_accuracy[v]}});
        std::unordered_map<std::string, int> label_of;
        for (std::size_t i = 0; i < ds.sequences.size(); ++i) label_of[ds.sequences[i].id] = ds.labels[i];
        std::vector<int> labels;
        for (const auto& id : table.ids) {
          auto it = label_of.find(id);
          require(it != label_of.end(), ErrorKind::InvalidInput, "no label for '" + id + "'");
          labels.push_back(it->second);
        }
        const auto split = best_threshold_split(X, labels);
        report = {{"scenario", ev_scenario},
                  {"train_size", rep.train_size},
                  {"test_size", rep.test_size},
                  {"reconstruction_accuracy", rep.reconstruction_accuracy},
                  {"group_accuracy", rep.group_accuracy},
                  {"variables", vars},
                  {"best_single_feature",
                   {{"column", split.column + 1}, {"threshold", split.threshold}, {"accuracy", split.accuracy}}}};
      }
      if (table.provenance)
        report["provenance"] = {{"features_spec_hash", table.provenance->spec_hash},
                                {"seed", ev.seed}};
      else
        report["provenance"] = {{"seed", ev.seed}};
      emit(ev.out, report.dump(2) + "\n");
    } else if (*experiment) {
      spec.scenario = parse_scenario(ex_scenario);
      spec.cells = parse_cells(ex_cells);
      spec.seed = ex.seed;
      spec.output_dir = ex.out;
      const auto res = run_experiment(spec);
      std::cout << summary_csv(res, spec);
    } else if (*chisq) {
      const auto r = chi_square_independence({{{chi_cells[0], chi_cells[1]}, {chi_cells[2], chi_cells[3]}}});
      std::cout << json{{"statistic", r.statistic}, {"p_value", r.p_value}, {"dof", r.degrees_of_freedom}}.dump()
                << '\n';
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
