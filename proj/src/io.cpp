#include "seqae/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace seqae {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << content;
  require(static_cast<bool>(out), ErrorKind::Io, "write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

SequenceData read_sequences(std::istream& in, const LoadOptions& options) {
  require(!options.fixed_vocabulary || options.vocabulary.has_value(), ErrorKind::InvalidConfig,
          "a fixed vocabulary must be supplied");
  struct Record {
    std::string id;
    int label = 0;
    std::vector<std::string> actions;
  };
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    const std::string where = "line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Format, where + ": " + e.what());
    }
    require(j.is_object(), ErrorKind::Format, where + ": expected a JSON object");
    Record r;
    if (j.contains("id")) {
      require(j["id"].is_string(), ErrorKind::Format, where + ": id must be a string");
      r.id = j["id"].get<std::string>();
    } else {
      r.id = "line" + std::to_string(line_no);
    }
    if (j.contains("label") && !j["label"].is_null()) {
      require(j["label"].is_number_integer(), ErrorKind::Format, where + ": label must be an integer");
      r.label = j["label"].get<int>();
    }
    require(j.contains("actions") && j["actions"].is_array() && !j["actions"].empty(),
            ErrorKind::Format, where + ": 'actions' must be a non-empty array");
    for (const auto& a : j["actions"]) {
      require(a.is_string() && !a.get<std::string>().empty(), ErrorKind::Format,
              where + ": actions must be non-empty strings");
      r.actions.push_back(a.get<std::string>());
    }
    records.push_back(std::move(r));
  }
  require(!records.empty(), ErrorKind::InsufficientData, "no sequences in input");

  SequenceData out;
  if (options.fixed_vocabulary) {
    out.vocab = *options.vocabulary;
  } else {
    std::set<std::string> labels;
    if (options.vocabulary)
      labels.insert(options.vocabulary->labels().begin(), options.vocabulary->labels().end());
    for (const auto& r : records) labels.insert(r.actions.begin(), r.actions.end());
    out.vocab = ActionVocabulary(std::vector<std::string>(labels.begin(), labels.end()));
  }
  for (const auto& r : records) {
    ActionSequence s{r.id, {}};
    for (const auto& a : r.actions) {
      require(out.vocab.contains(a), ErrorKind::VocabularyMismatch,
              "sequence '" + r.id + "': action '" + a + "' is not in the vocabulary");
      s.steps.push_back(out.vocab.index(a));
    }
    out.sequences.push_back(std::move(s));
    out.labels.push_back(r.label);
  }
  return out;
}

SequenceData load_sequences(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  return read_sequences(in, options);
}

void write_sequences(std::ostream& out, const ActionVocabulary& vocab,
                     const std::vector<ActionSequence>& seqs, const std::vector<int>& labels) {
  require(labels.empty() || labels.size() == seqs.size(), ErrorKind::InvalidInput,
          "labels must match sequences");
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    json j = json::object();
    j["id"] = seqs[i].id;
    if (!labels.empty()) j["label"] = labels[i];
    json actions = json::array();
    for (int a : seqs[i].steps) actions.push_back(vocab.label(a));
    j["actions"] = std::move(actions);
    out << j.dump() << '\n';
  }
}

ActionVocabulary load_vocabulary(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return ActionVocabulary(std::move(labels));
}

namespace {

json matrix_json(const MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

MatrixXd matrix_from_json(const json& j, const std::string& what) {
  require(j.is_object() && j.contains("rows") && j.contains("cols") && j.contains("data"),
          ErrorKind::Format, what + ": expected {rows, cols, data}");
  const auto rows = j["rows"].get<Eigen::Index>();
  const auto cols = j["cols"].get<Eigen::Index>();
  const auto& data = j["data"];
  require(rows >= 0 && cols >= 0 && data.is_array() &&
              data.size() == static_cast<std::size_t>(rows * cols),
          ErrorKind::Format, what + ": data length does not match shape");
  MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
  return m;
}

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
  require(j.is_array(), ErrorKind::Format, what + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json provenance_json(const Provenance& p) { return {{"spec_hash", p.spec_hash}, {"seed", p.seed}}; }

Provenance provenance_from_json(const json& j) {
  Provenance p;
  if (j.is_object()) {
    p.spec_hash = j.value("spec_hash", std::string{});
    p.seed = j.value("seed", std::uint64_t{0});
  }
  return p;
}

json rnn_json(const RnnParams<double>& p) {
  json gates = json::array();
  for (const auto& g : p.gates)
    gates.push_back({{"bias", vector_json(g.bias)},
                     {"input_weights", matrix_json(g.input_weights)},
                     {"recurrent_weights", matrix_json(g.recurrent_weights)}});
  return gates;
}

RnnParams<double> rnn_from_json(const json& j, CellKind kind, int latent, const std::string& what) {
  auto p = RnnParams<double>::zeros(kind, latent);
  require(j.is_array() && j.size() == p.gates.size(), ErrorKind::Format,
          what + ": wrong number of gates for the cell kind");
  for (std::size_t i = 0; i < p.gates.size(); ++i) {
    auto& g = p.gates[i];
    g.bias = vector_from_json(j[i].at("bias"), what + ".bias");
    g.input_weights = matrix_from_json(j[i].at("input_weights"), what + ".input_weights");
    g.recurrent_weights = matrix_from_json(j[i].at("recurrent_weights"), what + ".recurrent_weights");
    require(g.bias.size() == latent && g.input_weights.rows() == latent &&
                g.input_weights.cols() == latent && g.recurrent_weights.rows() == latent &&
                g.recurrent_weights.cols() == latent,
            ErrorKind::Format, what + ": gate shapes do not match K");
  }
  return p;
}

}  // namespace

void export_dataset(const std::string& dir, const LabeledDataset& ds,
                    const std::vector<MarkovChain>& chains, const Provenance& provenance) {
  std::ostringstream lines;
  write_sequences(lines, ds.vocab, ds.sequences, ds.labels);
  write_text_file((fs::path(dir) / "dataset.jsonl").string(), lines.str());

  json manifest = {{"format", "seqae-dataset"},
                   {"version", 1},
                   {"scenario", ds.scenario == Scenario::I ? "I" : "II"},
                   {"n", ds.sequences.size()},
                   {"seed", ds.seed},
                   {"truncated_draws", ds.truncated_draws},
                   {"vocabulary", ds.vocab.labels()},
                   {"provenance", provenance_json(provenance)}};
  json mats = json::array();
  for (const auto& c : chains) mats.push_back(matrix_json(c.transitions));
  manifest["transition_matrices"] = std::move(mats);
  write_text_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

LabeledDataset labeled_dataset(const SequenceData& data, Scenario scenario, std::uint64_t seed) {
  LabeledDataset ds;
  ds.scenario = scenario;
  ds.seed = seed;
  ds.vocab = data.vocab;
  ds.sequences = data.sequences;
  ds.labels = data.labels;
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    require(ds.labels[i] == 1 || ds.labels[i] == 2, ErrorKind::Format,
            "sequence '" + ds.sequences[i].id + "' needs a group label of 1 or 2");
  return ds;
}

// ---------------------------------------------------------------------------

void write_model(std::ostream& out, const AutoencoderParams<double>& p, const ActionVocabulary& vocab,
                 const Provenance& provenance) {
  require(vocab.size() == p.actions, ErrorKind::InvalidInput, "vocabulary does not match model");
  json j = {{"format", "seqae-model"},
            {"version", kModelFormatVersion},
            {"cell", std::string(to_string(p.kind))},
            {"actions", p.actions},
            {"latent", p.latent},
            {"vocabulary", vocab.labels()},
            {"provenance", provenance_json(provenance)},
            {"embedding", matrix_json(p.embedding)},
            {"encoder", rnn_json(p.encoder)},
            {"decoder", rnn_json(p.decoder)},
            {"mlm_bias", vector_json(p.mlm_bias)},
            {"mlm_weights", matrix_json(p.mlm_weights)}};
  out << j.dump() << '\n';
}

void save_model(const std::string& path, const AutoencoderParams<double>& params,
                const ActionVocabulary& vocab, const Provenance& provenance) {
  std::ostringstream ss;
  write_model(ss, params, vocab, provenance);
  write_text_file(path, ss.str());
}

LoadedModel read_model(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, std::string("model file: ") + e.what());
  }
  require(j.is_object() && j.value("format", std::string{}) == "seqae-model", ErrorKind::Format,
          "not a seqae model file");
  const int version = j.value("version", 0);
  require(version == kModelFormatVersion, ErrorKind::Format,
          "unsupported model format version " + std::to_string(version));
  try {
    LoadedModel m;
    const CellKind kind = parse_cell_kind(j.at("cell").get<std::string>());
    const int n = j.at("actions").get<int>();
    const int k = j.at("latent").get<int>();
    m.vocab = ActionVocabulary(j.at("vocabulary").get<std::vector<std::string>>());
    require(m.vocab.size() == n, ErrorKind::Format, "vocabulary size does not match N");
    m.provenance = provenance_from_json(j.value("provenance", json::object()));
    m.params = AutoencoderParams<double>::zeros(kind, n, k);
    m.params.embedding = matrix_from_json(j.at("embedding"), "embedding");
    m.params.encoder = rnn_from_json(j.at("encoder"), kind, k, "encoder");
    m.params.decoder = rnn_from_json(j.at("decoder"), kind, k, "decoder");
    m.params.mlm_bias = vector_from_json(j.at("mlm_bias"), "mlm_bias");
    m.params.mlm_weights = matrix_from_json(j.at("mlm_weights"), "mlm_weights");
    require(m.params.embedding.rows() == n && m.params.embedding.cols() == k &&
                m.params.mlm_bias.size() == n - 1 && m.params.mlm_weights.rows() == n - 1 &&
                m.params.mlm_weights.cols() == k,
            ErrorKind::Format, "parameter shapes do not match N and K");
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("model file: ") + e.what());
  }
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  return read_model(in);
}

// ---------------------------------------------------------------------------

void write_features_csv(std::ostream& out, const std::vector<std::string>& ids,
                        const MatrixXd& values, const std::string& prefix,
                        const std::optional<Provenance>& provenance) {
  require(ids.size() == static_cast<std::size_t>(values.rows()), ErrorKind::InvalidInput,
          "feature ids and rows differ");
  if (provenance)
    out << "# spec_hash=" << provenance->spec_hash << ",seed=" << provenance->seed << '\n';
  out << "id";
  for (Eigen::Index k = 0; k < values.cols(); ++k) out << ',' << prefix << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i].find_first_of(",\"\n") == std::string::npos, ErrorKind::InvalidInput,
            "sequence id '" + ids[i] + "' cannot be written to CSV");
    out << ids[i];
    for (Eigen::Index k = 0; k < values.cols(); ++k)
      out << ',' << format_double(values(static_cast<Eigen::Index>(i), k));
    out << '\n';
  }
}

FeatureTable read_features_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format, "features CSV is empty");
  FeatureTable t;
  std::size_t line_no = 1;
  if (line.rfind("# ", 0) == 0) {
    Provenance p;
    const auto h = line.find("spec_hash=");
    const auto sd = line.find(",seed=");
    require(h != std::string::npos && sd != std::string::npos && sd > h, ErrorKind::Format,
            "features CSV: malformed provenance line");
    p.spec_hash = line.substr(h + 10, sd - h - 10);
    const std::string seed = line.substr(sd + 6);
    const auto res = std::from_chars(seed.data(), seed.data() + seed.size(), p.seed);
    require(res.ec == std::errc{}, ErrorKind::Format, "features CSV: bad seed");
    t.provenance = p;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Format,
            "features CSV has no header");
    ++line_no;
  }
  const auto cols = std::count(line.begin(), line.end(), ',');
  require(line.rfind("id,", 0) == 0 && cols >= 1, ErrorKind::Format,
          "features CSV header must start with 'id,'");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(static_cast<long>(cells.size()) == cols + 1, ErrorKind::Format,
            "features CSV line " + std::to_string(line_no) + ": wrong number of fields");
    t.ids.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double v = 0.0;
      const auto res = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      require(res.ec == std::errc{} && res.ptr == cells[c].data() + cells[c].size(),
              ErrorKind::Format,
              "features CSV line " + std::to_string(line_no) + ": bad number '" + cells[c] + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (long c = 0; c < cols; ++c)
      t.values(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  return t;
}

FeatureTable load_features_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  return read_features_csv(in);
}

void write_pca_sidecar(std::ostream& out, const PcaTransform& pca, const Provenance& provenance) {
  json j = {{"format", "seqae-pca"},
            {"version", 1},
            {"provenance", provenance_json(provenance)},
            {"mean", vector_json(pca.mean)},
            {"components", matrix_json(pca.components)},
            {"variances", vector_json(pca.variances)}};
  out << j.dump(2) << '\n';
}

PcaTransform read_pca_sidecar(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Format, std::string("PCA sidecar: ") + e.what());
  }
  require(j.is_object() && j.value("format", std::string{}) == "seqae-pca", ErrorKind::Format,
          "not a seqae PCA sidecar");
  try {
    PcaTransform t;
    t.mean = vector_from_json(j.at("mean"), "mean");
    t.components = matrix_from_json(j.at("components"), "components");
    t.variances = vector_from_json(j.at("variances"), "variances");
    require(t.components.rows() == t.mean.size() && t.components.cols() == t.variances.size(),
            ErrorKind::Format, "PCA sidecar shapes disagree");
    return t;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("PCA sidecar: ") + e.what());
  }
}

PcaTransform load_pca_sidecar(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path + "'");
  return read_pca_sidecar(in);
}

}  // namespace seqae
