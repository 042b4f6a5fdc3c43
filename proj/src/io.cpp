#include "recon/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "recon/errors.hpp"

namespace recon::io {

namespace {

using nlohmann::json;

json open_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file for reading: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void dump_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  out << j.dump(2) << "\n";
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<long>(arr.size()));
  for (long i = 0; i < v.size(); ++i) {
    v(i) = arr[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const long n = static_cast<long>(rows.size());
  if (n == 0) return Eigen::MatrixXd(0, 0);
  const long d = static_cast<long>(rows[0].size());
  Eigen::MatrixXd m(n, d);
  for (long i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<long>(row.size()) != d) {
      throw ConfigError("ragged matrix rows in JSON input");
    }
    for (long c = 0; c < d; ++c) {
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

double json_double(const json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void save_dataset_csv(const std::string& path,
                      const network::LabeledDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  out << "y";
  for (long c = 0; c < data.x.cols(); ++c) out << ",x" << c;
  out << "\n";
  for (long i = 0; i < data.size(); ++i) {
    out << data.y(i);
    for (long c = 0; c < data.x.cols(); ++c) {
      out << "," << format_double(data.x(i, c));
    }
    out << "\n";
  }
}

network::LabeledDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("empty dataset file: " + path);
  }
  long cols = -1;  // header column count, y included
  {
    std::stringstream header(line);
    std::string cell;
    cols = 0;
    while (std::getline(header, cell, ',')) ++cols;
    if (cols < 2) throw ConfigError("dataset header needs y plus features");
  }
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric cell at " + path + ":" +
                          std::to_string(lineno));
      }
    }
    if (static_cast<long>(row.size()) != cols) {
      throw ConfigError("row width mismatch at " + path + ":" +
                        std::to_string(lineno));
    }
    rows.push_back(std::move(row));
  }
  network::LabeledDataset data;
  data.y.resize(static_cast<long>(rows.size()));
  data.x.resize(static_cast<long>(rows.size()), cols - 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.y(static_cast<long>(i)) = static_cast<int>(rows[i][0]);
    for (long c = 0; c + 1 < cols; ++c) {
      data.x(static_cast<long>(i), c) = rows[i][static_cast<std::size_t>(c) + 1];
    }
  }
  return data;
}

void save_model_json(const std::string& path,
                     const network::ModelParams& model) {
  json j;
  j["activation_coeffs"] = model.activation.coeffs;
  j["a"] = vector_to_json(model.a);
  j["w"] = matrix_to_json(model.w);
  dump_json(path, j);
}

network::ModelParams load_model_json(const std::string& path) {
  const json j = open_json(path);
  network::ModelParams model;
  model.activation.coeffs = j.at("activation_coeffs").get<std::vector<double>>();
  model.a = vector_from_json(j.at("a"));
  model.w = matrix_from_json(j.at("w"));
  network::validate_model(model);
  return model;
}

void save_candidates_json(const std::string& path,
                          const objective::CandidateSet& set) {
  json j;
  j["target"] = vector_to_json(set.target);
  j["next_id"] = set.next_id;
  json cands = json::array();
  for (const auto& cand : set.candidates) {
    json c;
    c["id"] = cand.id;
    c["parent"] = cand.parent;
    c["depth"] = cand.depth;
    c["label"] = cand.label;
    c["lambda"] = cand.lambda;
    c["x"] = vector_to_json(cand.x);
    cands.push_back(std::move(c));
  }
  j["candidates"] = std::move(cands);
  dump_json(path, j);
}

objective::CandidateSet load_candidates_json(const std::string& path) {
  const json j = open_json(path);
  objective::CandidateSet set;
  set.target = vector_from_json(j.at("target"));
  set.next_id = j.at("next_id").get<long>();
  for (const auto& c : j.at("candidates")) {
    objective::Candidate cand;
    cand.id = c.at("id").get<long>();
    cand.parent = c.at("parent").get<long>();
    cand.depth = c.at("depth").get<int>();
    cand.label = c.at("label").get<int>();
    cand.lambda = c.at("lambda").get<double>();
    cand.x = vector_from_json(c.at("x"));
    set.candidates.push_back(std::move(cand));
  }
  return set;
}

void save_identify_report_json(const std::string& path,
                               const identify::IdentifyReport& report) {
  json j;
  j["rank"] = report.rank;
  j["feature_count"] = report.feature_count;
  j["gram_rank"] = report.gram_rank;
  j["subspace_dim"] = report.subspace_dim;
  j["interpolation_residual"] = report.interpolation_residual;
  j["pencil_eigen_gap"] = report.pencil_eigen_gap;
  j["probe_retries"] = report.probe_retries;
  json comps = json::array();
  for (const auto& comp : report.components) {
    json c;
    c["coefficient"] = comp.coefficient;
    c["direction"] = vector_to_json(comp.direction);
    comps.push_back(std::move(c));
  }
  j["components"] = std::move(comps);
  dump_json(path, j);
}

void save_match_report_json(const std::string& path,
                            const harness::MatchReport& report) {
  json j;
  j["optimal"] = report.optimal;
  j["mean_l2"] = report.mean_l2;
  j["median_l2"] = report.median_l2;
  j["mean_cosine"] = report.mean_cosine;
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    json e;
    e["recovered"] = p.recovered;
    e["truth"] = p.truth;
    e["l2"] = p.l2;
    e["cosine"] = p.cosine;
    pairs.push_back(std::move(e));
  }
  j["pairs"] = std::move(pairs);
  dump_json(path, j);
}

void save_kkt_certificate_json(const std::string& path,
                               const network::KktCertificate& cert) {
  json j;
  j["multipliers"] = vector_to_json(cert.multipliers);
  j["active_set"] = cert.active_set;
  j["stationarity_residual"] = cert.stationarity_residual;
  j["margin_violation"] = cert.margin_violation;
  j["slackness_violation"] = cert.slackness_violation;
  j["margin_min"] = cert.margin_min;
  j["rescale"] = cert.rescale;
  dump_json(path, j);
}

void save_runlog_jsonl(const std::string& path, const RunLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  for (const auto& rec : log.iters) {
    json j;
    j["type"] = "iter";
    j["iter"] = rec.iter;
    j["loss"] = rec.loss;
    j["grad_norm"] = rec.grad_norm;
    j["step"] = rec.step;
    if (!std::isnan(rec.metric)) j["metric"] = rec.metric;
    out << j.dump() << "\n";
  }
  for (const auto& ev : log.splits) {
    json j;
    j["type"] = "split";
    j["iteration"] = ev.iteration;
    j["candidate"] = ev.candidate;
    j["lambda_min"] = ev.lambda_min;
    j["eta"] = ev.eta;
    j["loss_before"] = ev.loss_before;
    j["loss_after"] = ev.loss_after;
    j["offspring_a"] = ev.offspring_a;
    j["offspring_b"] = ev.offspring_b;
    j["met_margin"] = ev.met_margin;
    out << j.dump() << "\n";
  }
  json j;
  j["type"] = "certificate";
  j["termination"] = log.termination;
  j["total_iterations"] = log.total_iterations;
  j["grad_norm"] = log.certificate.grad_norm;
  j["min_lambda_min"] = log.certificate.min_lambda_min;
  j["eps"] = log.certificate.eps;
  j["eps_h"] = log.certificate.eps_h;
  j["trigger"] = log.certificate.trigger;
  j["satisfied"] = log.certificate.satisfied;
  out << j.dump() << "\n";
}

RunLog load_runlog_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file for reading: " + path);
  RunLog log;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw ConfigError("malformed JSON line at " + path + ":" +
                        std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "iter") {
      IterRecord rec;
      rec.iter = j.at("iter").get<long>();
      rec.loss = j.at("loss").get<double>();
      rec.grad_norm = j.at("grad_norm").get<double>();
      rec.step = j.at("step").get<double>();
      if (j.contains("metric")) rec.metric = json_double(j["metric"]);
      log.iters.push_back(rec);
    } else if (type == "split") {
      SplitEventRecord ev;
      ev.iteration = j.at("iteration").get<long>();
      ev.candidate = j.at("candidate").get<long>();
      ev.lambda_min = j.at("lambda_min").get<double>();
      ev.eta = j.at("eta").get<double>();
      ev.loss_before = j.at("loss_before").get<double>();
      ev.loss_after = j.at("loss_after").get<double>();
      ev.offspring_a = j.at("offspring_a").get<long>();
      ev.offspring_b = j.at("offspring_b").get<long>();
      ev.met_margin = j.at("met_margin").get<bool>();
      log.splits.push_back(ev);
    } else if (type == "certificate") {
      log.termination = j.at("termination").get<std::string>();
      log.total_iterations = j.at("total_iterations").get<long>();
      log.certificate.grad_norm = json_double(j.at("grad_norm"));
      log.certificate.min_lambda_min = json_double(j.at("min_lambda_min"));
      log.certificate.eps = j.at("eps").get<double>();
      log.certificate.eps_h = j.at("eps_h").get<double>();
      log.certificate.trigger = j.at("trigger").get<double>();
      log.certificate.satisfied = j.at("satisfied").get<bool>();
    } else {
      throw ConfigError("unknown record type '" + type + "' at " + path +
                        ":" + std::to_string(lineno));
    }
  }
  return log;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for reading: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace recon::io
