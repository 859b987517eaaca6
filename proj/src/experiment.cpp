#include "seqae/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "seqae/features.hpp"
#include "seqae/io.hpp"
#include "seqae/parallel.hpp"

namespace seqae {

namespace {

constexpr std::uint64_t kChainStream = 100;
constexpr std::uint64_t kDatasetStream = 200;
constexpr std::uint64_t kTrainStream = 300;
constexpr std::uint64_t kCvStream = 400;
constexpr std::uint64_t kEvalStream = 500;

std::uint64_t cell_tag(CellKind c) { return c == CellKind::Gru ? 1 : 2; }

}  // namespace

Scenario parse_scenario(const std::string& s) {
  if (s == "I" || s == "1" || s == "i") return Scenario::I;
  if (s == "II" || s == "2" || s == "ii") return Scenario::II;
  fail(ErrorKind::InvalidInput, "unknown scenario '" + s + "' (expected I or II)");
}

void ExperimentSpec::validate() const {
  require(n >= 2 && n % 2 == 0, ErrorKind::InvalidConfig, "n must be even and >= 2");
  require(replications >= 1, ErrorKind::InvalidConfig, "replications must be >= 1");
  require(!cells.empty(), ErrorKind::InvalidConfig, "no cell kinds requested");
  require(!latent_candidates.empty(), ErrorKind::InvalidConfig, "no K candidates");
  for (int k : latent_candidates) require(k >= 1, ErrorKind::InvalidConfig, "K must be >= 1");
  require(latent_candidates.size() == 1 || folds >= 2, ErrorKind::InvalidConfig,
          "cross-validation needs at least two folds");
  require(actions >= 2 && actions <= 26, ErrorKind::InvalidConfig, "actions must be in 2..26");
  require(epochs >= 1 && cv_epochs >= 0, ErrorKind::InvalidConfig, "invalid epoch budget");
  require(step_size > 0.0, ErrorKind::InvalidConfig, "step size must be positive");
  require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorKind::InvalidConfig,
          "validation fraction must lie in (0, 1)");
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::InvalidConfig,
          "train fraction must lie in (0, 1)");
  require(lambda >= 0.0, ErrorKind::InvalidConfig, "penalty must be >= 0");
}

std::string ExperimentSpec::canonical_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (auto c : cells) cells_json.push_back(std::string(seqae::to_string(c)));
  nlohmann::json j = {{"scenario", seqae::to_string(scenario)},
                      {"n", n},
                      {"replications", replications},
                      {"cells", cells_json},
                      {"latent_candidates", latent_candidates},
                      {"folds", folds},
                      {"seed", seed},
                      {"actions", actions},
                      {"paired_reversal", paired_reversal},
                      {"epochs", epochs},
                      {"cv_epochs", cv_epochs},
                      {"step_size", step_size},
                      {"validation_fraction", validation_fraction},
                      {"train_fraction", train_fraction},
                      {"lambda", lambda},
                      {"threshold", threshold}};
  return j.dump();
}

std::string ExperimentSpec::hash() const { return fnv1a_hex(canonical_json()); }

std::vector<MarkovChain> experiment_chains(const ExperimentSpec& spec) {
  const auto vocab = ActionVocabulary::letters(spec.actions);
  std::vector<MarkovChain> chains;
  for (std::uint64_t c = 1; c <= 2; ++c) {
    Rng rng(derive_seed(spec.seed, {kChainStream, c}));
    chains.push_back(sample_transition_matrix(vocab, rng));
  }
  return chains;
}

LabeledDataset experiment_dataset(const ExperimentSpec& spec, const std::vector<MarkovChain>& chains,
                                  int replication) {
  DatasetOptions opts;
  opts.paired_reversal = spec.paired_reversal;
  return make_dataset(spec.scenario, spec.n, chains,
                      derive_seed(spec.seed, {kDatasetStream, static_cast<std::uint64_t>(replication)}),
                      opts);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult result;
  result.spec_hash = spec.hash();
  result.chains = experiment_chains(spec);

  const std::size_t n_cells = spec.cells.size();
  const std::size_t jobs = static_cast<std::size_t>(spec.replications) * n_cells;
  result.rows.resize(jobs);

  parallel_for(jobs, spec.threads, [&](std::size_t job) {
    const int rep = static_cast<int>(job / n_cells) + 1;
    const CellKind cell = spec.cells[job % n_cells];
    ReplicationRow& row = result.rows[job];
    row.scenario = spec.scenario;
    row.n = spec.n;
    row.cell = cell;
    row.replication = rep;
    const auto r = static_cast<std::uint64_t>(rep);
    try {
      const auto ds = experiment_dataset(spec, result.chains, rep);

      TrainConfig cfg;
      cfg.cell = cell;
      cfg.step_size = spec.step_size;
      cfg.validation_fraction = spec.validation_fraction;
      cfg.epochs = spec.epochs;

      int latent = spec.latent_candidates.front();
      if (spec.latent_candidates.size() > 1) {
        TrainConfig cv = cfg;
        cv.epochs = spec.cv_epochs > 0 ? spec.cv_epochs : spec.epochs;
        cv.seed = derive_seed(spec.seed, {kCvStream, r, cell_tag(cell)});
        latent = cross_validate_latent(ds.sequences, ds.vocab, spec.latent_candidates, spec.folds, cv)
                     .chosen_latent;
      }
      cfg.latent = latent;
      cfg.seed = derive_seed(spec.seed, {kTrainStream, r, cell_tag(cell)});
      const auto fit = train_early_stopping(ds.sequences, ds.vocab, cfg);
      const auto features = extract_features(fit.params, ds.sequences);

      ScenarioOptions eval;
      eval.train_fraction = spec.train_fraction;
      eval.lambda = spec.lambda;
      eval.threshold = spec.threshold;
      eval.seed = derive_seed(spec.seed, {kEvalStream, r});
      const auto report = scenario_evaluation(ds, features, eval);

      row.latent = latent;
      row.best_epoch = fit.report.best_epoch;
      row.reconstruction_accuracy = report.reconstruction_accuracy;
      row.group_accuracy = report.group_accuracy;
    } catch (const Error& e) {
      row.status = std::string(to_string(e.kind())) + ": " + e.what();
    } catch (const std::exception& e) {
      row.status = std::string("internal: ") + e.what();
    }
  });

  for (std::size_t c = 0; c < n_cells; ++c) {
    SummaryRow s;
    s.scenario = spec.scenario;
    s.n = spec.n;
    s.cell = spec.cells[c];
    s.requested = spec.replications;
    std::vector<double> rec, grp;
    for (const auto& row : result.rows)
      if (row.cell == s.cell && row.status == "ok") {
        rec.push_back(row.reconstruction_accuracy);
        grp.push_back(row.group_accuracy);
      }
    s.completed = static_cast<int>(rec.size());
    auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
      mean = sd = std::nan("");
      if (v.empty()) return;
      double sum = 0.0;
      for (double x : v) sum += x;
      mean = sum / static_cast<double>(v.size());
      if (v.size() < 2) return;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    };
    mean_sd(rec, s.reconstruction_mean, s.reconstruction_sd);
    mean_sd(grp, s.group_mean, s.group_sd);
    result.summary.push_back(s);
  }

  if (!spec.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(spec.output_dir);
    write_text_file((dir / "replications.csv").string(), replication_csv(result, spec));
    write_text_file((dir / "summary.csv").string(), summary_csv(result, spec));
    nlohmann::json manifest = nlohmann::json::parse(spec.canonical_json());
    manifest["spec_hash"] = result.spec_hash;
    nlohmann::json mats = nlohmann::json::array();
    for (const auto& c : result.chains) {
      nlohmann::json data = nlohmann::json::array();
      for (Eigen::Index i = 0; i < c.transitions.rows(); ++i)
        for (Eigen::Index j = 0; j < c.transitions.cols(); ++j) data.push_back(c.transitions(i, j));
      mats.push_back({{"rows", c.transitions.rows()}, {"cols", c.transitions.cols()}, {"data", data}});
    }
    manifest["transition_matrices"] = mats;
    write_text_file((dir / "experiment.json").string(), manifest.dump(2) + "\n");
  }
  return result;
}

namespace {

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::string mean_sd_cell(double mean, double sd, int decimals) {
  if (std::isnan(mean)) return "NA";
  return fixed(mean, decimals) + " (" + fixed(sd, std::max(decimals, 3)) + ")";
}

std::string replication_csv(const ExperimentResult& result, const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "scenario,n,cell,replication,latent,reconstruction_accuracy,group_accuracy,best_epoch,"
         "status,spec_hash,seed\n";
  for (const auto& r : result.rows) {
    const bool ok = r.status == "ok";
    out << to_string(r.scenario) << ',' << r.n << ',' << to_string(r.cell) << ',' << r.replication
        << ',' << (ok ? std::to_string(r.latent) : "NA") << ','
        << (ok ? fixed(r.reconstruction_accuracy, 6) : "NA") << ','
        << (ok ? fixed(r.group_accuracy, 6) : "NA") << ','
        << (ok ? std::to_string(r.best_epoch) : "NA") << ',' << csv_quote(r.status) << ','
        << result.spec_hash << ',' << spec.seed << '\n';
  }
  return out.str();
}

std::string summary_csv(const ExperimentResult& result, const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "scenario,n,cell,completed,requested,reconstruction_mean,reconstruction_sd,group_mean,"
         "group_sd,reconstruction_table,group_table,spec_hash,seed\n";
  for (const auto& s : result.summary) {
    out << to_string(s.scenario) << ',' << s.n << ',' << to_string(s.cell) << ',' << s.completed
        << ',' << s.requested << ',' << fixed(s.reconstruction_mean, 6) << ','
        << fixed(s.reconstruction_sd, 6) << ',' << fixed(s.group_mean, 6) << ','
        << fixed(s.group_sd, 6) << ',' << csv_quote(mean_sd_cell(s.reconstruction_mean, s.reconstruction_sd, 2))
        << ',' << csv_quote(mean_sd_cell(s.group_mean, s.group_sd, 2)) << ',' << result.spec_hash
        << ',' << spec.seed << '\n';
  }
  return out.str();
}

}  // namespace seqae
