#include "recon/cli.hpp"

#include <atomic>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "recon/errors.hpp"
#include "recon/harness.hpp"
#include "recon/identify.hpp"
#include "recon/io.hpp"
#include "recon/network.hpp"
#include "recon/objective.hpp"
#include "recon/splitter.hpp"

namespace recon {
namespace {

using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

// Configuration error that knows which CLI flag was at fault; surfaces the
// flag in the machine-readable error JSON.
struct FieldError : ConfigError {
  std::string field;
  FieldError(std::string field_, const std::string& what_)
      : ConfigError(what_), field(std::move(field_)) {}
};

void require_file(const std::string& flag, const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw FieldError(flag, "file not found: " + path);
  }
}

std::string iso_timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// config.json is a deterministic echo of the parsed options (identical runs
// produce identical bytes); wall-clock state lives only in meta.json.
void write_run_files(const std::string& dir, const std::string& command,
                     json config) {
  config["command"] = command;
  config["version"] = kVersion;
  io::write_text_file(dir + "/config.json", config.dump(2) + "\n");
  json meta;
  meta["timestamp_utc"] = iso_timestamp_utc();
  io::write_text_file(dir + "/meta.json", meta.dump(2) + "\n");
}

json error_json(const std::string& kind, const std::string& what,
                const std::string& field = "") {
  json j;
  j["error"] = kind;
  j["what"] = what;
  if (!field.empty()) j["field"] = field;
  return j;
}

void emit_error(const std::string& out_dir, const json& err) {
  std::cerr << err.dump() << "\n";
  try {
    std::filesystem::create_directories(out_dir);
    io::write_text_file(out_dir + "/error.json", err.dump(2) + "\n");
  } catch (...) {
    // stderr already carries the error; the file is best-effort.
  }
}

network::ModelParams random_model(long m, long d, int alpha,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  network::ModelParams params;
  params.activation = network::ActivationPoly::power(alpha);
  params.a.resize(m);
  params.w.resize(m, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (long j = 0; j < m; ++j) {
    params.a(j) = gauss(rng) * scale;
    for (long c = 0; c < d; ++c) params.w(j, c) = gauss(rng) * scale;
  }
  return params;
}

// ---- subcommand option structs ----

struct GenDataOpts {
  long n = 0, d = 0;
  std::uint64_t seed = 0;
  bool unit_norm = true;
  bool independent = false;
  bool orthonormal = false;
  std::string out_dir = ".";
};

struct SynthesizeOpts {
  std::string data;
  long width = 0;
  int alpha = 3;
  std::uint64_t seed = 0;
  std::vector<double> multipliers;
  std::string out_dir = ".";
};

struct TrainOpts {
  std::string data;
  long width = 0;
  int alpha = 3;
  std::uint64_t seed = 0;
  network::TrainConfig config;
  std::string out_dir = ".";
};

struct CertifyOptsCli {
  std::string data;
  std::string model;
  network::CertifyOpts opts;
  std::string out_dir = ".";
};

struct IdentifyOptsCli {
  std::string model;
  std::string truth;
  identify::IdentifyOpts opts;
  std::string out_dir = ".";
};

struct ReconstructOpts {
  std::string model;
  std::string map = "kkt-binary";
  std::string init;
  std::string truth;
  long k = 4;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  int parallel = 1;
  bool no_split = false;
  splitter::SplitConfig config;
  std::string out_dir = ".";
};

struct EvaluateOpts {
  std::string candidates;
  std::string identify_report;
  std::string truth;
  double threshold = 0.9;
  std::string out_dir = ".";
};

struct DemoOpts {
  int alpha = 2;
  long d = 4;
  long width = 8;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct ReportOpts {
  std::vector<std::string> runlogs;
  std::string out_dir = ".";
};

// ---- subcommand bodies ----

json split_config_echo(const splitter::SplitConfig& c) {
  json j;
  j["eps"] = c.eps;
  j["eps_h"] = c.eps_h;
  j["lambda_star"] = c.lambda_star;
  j["eta_max"] = c.eta_max;
  j["eta_g"] = c.eta_g;
  j["split_period"] = c.split_period;
  j["cap_fraction"] = c.cap_fraction;
  j["max_candidates"] = c.max_candidates;
  j["lanczos_iters"] = c.lanczos_iters;
  j["max_iters"] = c.max_iters;
  j["rho_hint"] = c.rho_hint;
  j["l_hint"] = c.l_hint;
  j["refit_period"] = c.refit_period;
  j["refit_nonneg"] = c.refit_nonneg;
  j["one_split_per_scan"] = c.one_split_per_scan;
  j["enable_splitting"] = c.enable_splitting;
  j["log_period"] = c.log_period;
  j["seed"] = c.seed;
  return j;
}

void run_gen_data(const GenDataOpts& o) {
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  json config;
  config["n"] = o.n;
  config["d"] = o.d;
  config["seed"] = o.seed;
  config["unit_norm"] = o.unit_norm;
  config["independent"] = o.independent;
  config["orthonormal"] = o.orthonormal;
  write_run_files(dir, "gen-data", config);
  const auto data =
      harness::gen_synthetic(o.n, o.d, o.seed, o.unit_norm, o.independent,
                             o.orthonormal);
  io::save_dataset_csv(dir + "/dataset.csv", data);
  std::cout << "wrote " << dir << "/dataset.csv (n=" << data.size()
            << ", d=" << data.dim() << ")\n";
}

void run_synthesize(const SynthesizeOpts& o) {
  require_file("--data", o.data);
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  const auto data = io::load_dataset_csv(o.data);
  Eigen::VectorXd lambda;
  if (o.multipliers.empty()) {
    lambda = Eigen::VectorXd::Ones(data.size());
  } else {
    if (static_cast<long>(o.multipliers.size()) != data.size()) {
      throw FieldError("--multipliers",
                       "expected " + std::to_string(data.size()) +
                           " values, got " +
                           std::to_string(o.multipliers.size()));
    }
    lambda = Eigen::Map<const Eigen::VectorXd>(
        o.multipliers.data(), static_cast<long>(o.multipliers.size()));
  }
  json config;
  config["data"] = o.data;
  config["width"] = o.width;
  config["alpha"] = o.alpha;
  config["seed"] = o.seed;
  config["multipliers"] = o.multipliers;
  write_run_files(dir, "synthesize", config);

  const auto model =
      network::kkt_synthesize(data, lambda, o.width, o.alpha, o.seed);
  io::save_model_json(dir + "/model.json", model);
  const auto cert = network::kkt_certify(model, data);
  io::save_kkt_certificate_json(dir + "/certificate.json", cert);
  std::cout << "wrote " << dir << "/model.json (stationarity residual "
            << cert.stationarity_residual << ")\n";
}

void run_train(const TrainOpts& o) {
  require_file("--data", o.data);
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  const auto data = io::load_dataset_csv(o.data);
  json config;
  config["data"] = o.data;
  config["width"] = o.width;
  config["alpha"] = o.alpha;
  config["seed"] = o.seed;
  config["step"] = o.config.step;
  config["max_iters"] = o.config.max_iters;
  config["margin_period"] = o.config.margin_period;
  config["margin_rtol"] = o.config.margin_rtol;
  config["log_period"] = o.config.log_period;
  write_run_files(dir, "train", config);

  const auto init = random_model(o.width, data.dim(), o.alpha, o.seed);
  const auto result = network::train_to_margin(data, init, o.config);
  io::save_model_json(dir + "/model.json", result.params);
  io::save_runlog_jsonl(dir + "/trainlog.jsonl", result.log);
  std::cout << "wrote " << dir << "/model.json (termination "
            << result.log.termination << ", " << result.log.total_iterations
            << " iterations)\n";
}

void run_certify(const CertifyOptsCli& o) {
  require_file("--data", o.data);
  require_file("--model", o.model);
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  const auto data = io::load_dataset_csv(o.data);
  const auto model = io::load_model_json(o.model);
  json config;
  config["data"] = o.data;
  config["model"] = o.model;
  config["margin_tol"] = o.opts.margin_tol;
  config["support_tol"] = o.opts.support_tol;
  config["require_feasible"] = o.opts.require_feasible;
  write_run_files(dir, "certify", config);

  const auto cert = network::kkt_certify(model, data, o.opts);
  io::save_kkt_certificate_json(dir + "/certificate.json", cert);
  std::cout << "stationarity residual " << cert.stationarity_residual
            << ", active set size " << cert.active_set.size() << "\n";
}

void run_identify(const IdentifyOptsCli& o) {
  require_file("--model", o.model);
  if (!o.truth.empty()) require_file("--truth", o.truth);
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  const auto model = io::load_model_json(o.model);
  json config;
  config["model"] = o.model;
  config["truth"] = o.truth;
  config["seed"] = o.opts.seed;
  config["a_tol"] = o.opts.a_tol;
  config["w_tol"] = o.opts.w_tol;
  config["span_tol"] = o.opts.span_tol;
  config["interp_rank_tol"] = o.opts.interp_rank_tol;
  config["expected_rank"] = o.opts.jennrich.expected_rank;
  write_run_files(dir, "identify", config);

  const auto report = identify::recover_from_params(model, o.opts);
  io::save_identify_report_json(dir + "/identify.json", report);
  std::cout << "recovered " << report.rank << " components (interpolation "
            << "residual " << report.interpolation_residual << ")\n";
  if (!o.truth.empty()) {
    const auto truth = io::load_dataset_csv(o.truth);
    const auto match = harness::match_components(report.components, truth);
    io::save_match_report_json(dir + "/match.json", match);
    std::cout << "match: mean L2 " << match.mean_l2 << ", mean cosine "
              << match.mean_cosine << "\n";
  }
}

void reconstruct_one(const ReconstructOpts& o, std::uint64_t seed,
                     const std::string& dir) {
  const auto model = io::load_model_json(o.model);
  objective::ReconMap map = (o.map == "ntk")
                                ? objective::make_ntk(model)
                                : objective::make_kkt_binary(model);

  objective::CandidateSet set;
  if (!o.init.empty()) {
    set = io::load_candidates_json(o.init);
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const long d = objective::map_input_dim(map);
    set.target = model.flatten();
    for (long i = 0; i < o.k; ++i) {
      Eigen::VectorXd x(d);
      for (long c = 0; c < d; ++c) x(c) = gauss(rng);
      x.normalize();
      set.add(x, 1.0, (i % 2 == 0) ? 1 : -1);
    }
  }
  if (set.target.size() == 0) set.target = model.flatten();

  splitter::SplitConfig config = o.config;
  config.enable_splitting = !o.no_split;
  config.seed = seed;
  objective::LossWeights weights;
  auto result = splitter::run(std::move(set), map, weights, config);

  io::save_candidates_json(dir + "/candidates_final.json", result.state);
  io::save_runlog_jsonl(dir + "/runlog.jsonl", result.log);
  if (!o.truth.empty()) {
    const auto truth = io::load_dataset_csv(o.truth);
    const auto match = harness::match_components(result.state, truth);
    io::save_match_report_json(dir + "/match.json", match);
  }
  const double final_loss =
      objective::loss(result.state, map, weights);
  std::ostringstream line;
  line << "seed " << seed << ": termination " << result.log.termination
       << ", final loss " << final_loss << ", " << result.log.splits.size()
       << " splits, certificate "
       << (result.log.certificate.satisfied ? "satisfied" : "not satisfied")
       << "\n";
  std::cout << line.str();
}

// Runs one body per seed, at most `parallel` at a time. Workers never share
// state; errors are serialized per seed and the worst exit code wins.
int run_over_seeds(const std::vector<std::uint64_t>& seeds, int parallel,
                   const std::string& base_dir,
                   const std::function<void(std::uint64_t, const std::string&)>&
                       body) {
  std::atomic<int> worst{0};
  std::mutex io_mutex;
  std::size_t next = 0;
  while (next < seeds.size()) {
    const std::size_t batch =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(parallel, 1)),
                              seeds.size() - next);
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < batch; ++t) {
      const std::uint64_t seed = seeds[next + t];
      pool.emplace_back([&, seed]() {
        const std::string dir = base_dir + "/seed-" + std::to_string(seed);
        std::filesystem::create_directories(dir);
        try {
          body(seed, dir);
        } catch (const ConfigError& e) {
          std::lock_guard<std::mutex> lock(io_mutex);
          emit_error(dir, error_json("ConfigError", e.what()));
          int cur = worst.load();
          while (cur < 1 && !worst.compare_exchange_weak(cur, 1)) {
          }
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(io_mutex);
          emit_error(dir, error_json("NumericalFailure", e.what()));
          worst.store(2);
        }
      });
    }
    for (auto& th : pool) th.join();
    next += batch;
  }
  return worst.load();
}

int run_reconstruct(const ReconstructOpts& o) {
  require_file("--model", o.model);
  if (!o.init.empty()) require_file("--init", o.init);
  if (!o.truth.empty()) require_file("--truth", o.truth);
  if (o.map != "kkt-binary" && o.map != "ntk") {
    throw FieldError("--map", "expected kkt-binary or ntk, got " + o.map);
  }
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  json config = split_config_echo(o.config);
  config["model"] = o.model;
  config["map"] = o.map;
  config["init"] = o.init;
  config["truth"] = o.truth;
  config["k"] = o.k;
  config["seed"] = o.seed;
  config["seeds"] = o.seeds;
  config["parallel"] = o.parallel;
  config["no_split"] = o.no_split;
  write_run_files(dir, "reconstruct", config);

  if (o.seeds.empty()) {
    reconstruct_one(o, o.seed, dir);
    return 0;
  }
  return run_over_seeds(o.seeds, o.parallel, dir,
                        [&o](std::uint64_t seed, const std::string& sub) {
                          reconstruct_one(o, seed, sub);
                        });
}

void run_evaluate(const EvaluateOpts& o) {
  if (o.candidates.empty() == o.identify_report.empty()) {
    throw FieldError("--candidates",
                     "exactly one of --candidates / --identify is required");
  }
  require_file("--truth", o.truth);
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  json config;
  config["candidates"] = o.candidates;
  config["identify"] = o.identify_report;
  config["truth"] = o.truth;
  config["threshold"] = o.threshold;
  write_run_files(dir, "evaluate", config);

  const auto truth = io::load_dataset_csv(o.truth);
  harness::MatchReport match;
  if (!o.candidates.empty()) {
    require_file("--candidates", o.candidates);
    match = harness::match_components(io::load_candidates_json(o.candidates),
                                      truth);
  } else {
    require_file("--identify", o.identify_report);
    // Reuse the identify output format: only the components are needed.
    const json j = json::parse(io::read_text_file(o.identify_report));
    std::vector<tensors::Component> comps;
    for (const auto& c : j.at("components")) {
      tensors::Component comp;
      comp.coefficient = c.at("coefficient").get<double>();
      const auto& arr = c.at("direction");
      comp.direction.resize(static_cast<long>(arr.size()));
      for (long i = 0; i < comp.direction.size(); ++i) {
        comp.direction(i) = arr[static_cast<std::size_t>(i)].get<double>();
      }
      comps.push_back(std::move(comp));
    }
    match = harness::match_components(comps, truth);
  }
  io::save_match_report_json(dir + "/match.json", match);
  std::cout << "mean L2 " << match.mean_l2 << ", mean cosine "
            << match.mean_cosine << ", fraction cosine >= " << o.threshold
            << ": " << match.fraction_cosine_above(o.threshold) << "\n";
}

// Two datasets that the degree-alpha stationarity map cannot distinguish:
// for alpha = 1 any pair with equal weighted sums, for alpha = 2 any pair
// with equal weighted second-moment matrices. Emits both datasets and the
// map-difference norm at a random model.
void run_demo(const DemoOpts& o) {
  if (o.alpha != 1 && o.alpha != 2) {
    throw FieldError("--alpha", "demo supports alpha 1 or 2");
  }
  if (o.d < 2) throw FieldError("--d", "demo needs d >= 2");
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  json config;
  config["alpha"] = o.alpha;
  config["d"] = o.d;
  config["width"] = o.width;
  config["seed"] = o.seed;
  write_run_files(dir, "demo-nonidentifiable", config);

  network::LabeledDataset first, second;
  Eigen::VectorXd lambda1, lambda2;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  if (o.alpha == 1) {
    // Same weighted sum: {e1, e2} vs their normalized midpoint with weight
    // sqrt(2).
    first.x = Eigen::MatrixXd::Zero(2, o.d);
    first.x(0, 0) = 1.0;
    first.x(1, 1) = 1.0;
    first.y = Eigen::VectorXi::Ones(2);
    lambda1 = Eigen::VectorXd::Ones(2);
    second.x = Eigen::MatrixXd::Zero(1, o.d);
    second.x(0, 0) = inv_sqrt2;
    second.x(0, 1) = inv_sqrt2;
    second.y = Eigen::VectorXi::Ones(1);
    lambda2 = Eigen::VectorXd::Constant(1, std::sqrt(2.0));
  } else {
    // Same weighted moment matrix: {e1, e2} vs the pair rotated by 45
    // degrees, equal weights.
    first.x = Eigen::MatrixXd::Zero(2, o.d);
    first.x(0, 0) = 1.0;
    first.x(1, 1) = 1.0;
    first.y = Eigen::VectorXi::Ones(2);
    lambda1 = Eigen::VectorXd::Ones(2);
    second.x = Eigen::MatrixXd::Zero(2, o.d);
    second.x(0, 0) = inv_sqrt2;
    second.x(0, 1) = inv_sqrt2;
    second.x(1, 0) = inv_sqrt2;
    second.x(1, 1) = -inv_sqrt2;
    second.y = Eigen::VectorXi::Ones(2);
    lambda2 = Eigen::VectorXd::Ones(2);
  }

  const auto model = random_model(o.width, o.d, o.alpha, o.seed);
  const auto stationarity_map = [&model](const network::LabeledDataset& data,
                                         const Eigen::VectorXd& lambda) {
    Eigen::VectorXd sum =
        Eigen::VectorXd::Zero(model.flatten().size());
    for (long i = 0; i < data.size(); ++i) {
      sum += lambda(i) * data.y(i) *
             network::grad_theta(model, data.x.row(i).transpose());
    }
    return sum;
  };
  const Eigen::VectorXd g1 = stationarity_map(first, lambda1);
  const Eigen::VectorXd g2 = stationarity_map(second, lambda2);
  const double diff = (g1 - g2).norm();
  const double scale = std::max(1.0, g1.norm());

  io::save_dataset_csv(dir + "/dataset_a.csv", first);
  io::save_dataset_csv(dir + "/dataset_b.csv", second);
  json out;
  out["alpha"] = o.alpha;
  out["residual_difference"] = diff;
  out["relative_difference"] = diff / scale;
  out["indistinguishable"] = (diff <= 1e-10 * scale);
  io::write_text_file(dir + "/demo.json", out.dump(2) + "\n");
  std::cout << "alpha=" << o.alpha << " residual difference " << diff
            << " (distinct datasets, identical stationarity map)\n";
}

void run_report(const ReportOpts& o) {
  for (const auto& path : o.runlogs) require_file("runlogs", path);
  const std::string dir = harness::resolve_out_dir(o.out_dir);
  json config;
  config["runlogs"] = o.runlogs;
  write_run_files(dir, "report", config);

  std::ostringstream csv;
  csv << "file,termination,total_iterations,final_loss,final_grad_norm,"
         "splits,certificate_satisfied,min_lambda_min\n";
  for (const auto& path : o.runlogs) {
    const RunLog log = io::load_runlog_jsonl(path);
    const double final_loss =
        log.iters.empty() ? std::nan("") : log.iters.back().loss;
    csv << path << "," << log.termination << "," << log.total_iterations
        << "," << io::format_double(final_loss) << ","
        << io::format_double(log.certificate.grad_norm) << ","
        << log.splits.size() << ","
        << (log.certificate.satisfied ? 1 : 0) << ","
        << io::format_double(log.certificate.min_lambda_min) << "\n";
  }
  io::write_text_file(dir + "/report.csv", csv.str());
  std::cout << "wrote " << dir << "/report.csv (" << o.runlogs.size()
            << " runs)\n";
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{
      "recon: sample reconstruction from stationary two-layer polynomial "
      "networks, and a curvature-aware splitting optimizer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto gen = std::make_shared<GenDataOpts>();
  auto* gen_cmd = app.add_subcommand(
      "gen-data", "Generate a synthetic labeled dataset (rows on the sphere)");
  gen_cmd->add_option("--n", gen->n, "number of samples")->required();
  gen_cmd->add_option("--d", gen->d, "ambient dimension")->required();
  gen_cmd->add_option("--seed", gen->seed, "RNG seed")->required();
  gen_cmd->add_flag("--unit-norm,!--no-unit-norm", gen->unit_norm,
                    "normalize rows to the unit sphere (default on)");
  gen_cmd->add_flag("--independent", gen->independent,
                    "redraw until rows are linearly independent (needs n<=d)");
  gen_cmd->add_flag("--orthonormal", gen->orthonormal,
                    "mutually orthogonal unit rows (needs n<=d); the geometry "
                    "under which identification recovers every sample");
  gen_cmd->add_option("--out-dir", gen->out_dir, "output directory");

  auto synth = std::make_shared<SynthesizeOpts>();
  auto* synth_cmd = app.add_subcommand(
      "synthesize",
      "Construct width-m params exactly stationary for a dataset");
  synth_cmd->add_option("--data", synth->data, "dataset CSV")->required();
  synth_cmd->add_option("--width", synth->width, "network width m")
      ->required();
  synth_cmd->add_option("--alpha", synth->alpha, "activation degree (>=3)");
  synth_cmd->add_option("--seed", synth->seed, "RNG seed")->required();
  synth_cmd->add_option("--multipliers", synth->multipliers,
                        "per-sample multipliers (default all ones)");
  synth_cmd->add_option("--out-dir", synth->out_dir, "output directory");

  auto train = std::make_shared<TrainOpts>();
  auto* train_cmd = app.add_subcommand(
      "train", "Gradient-descend the exponential loss to margin stability");
  train_cmd->add_option("--data", train->data, "dataset CSV")->required();
  train_cmd->add_option("--width", train->width, "network width m")
      ->required();
  train_cmd->add_option("--alpha", train->alpha, "activation degree");
  train_cmd->add_option("--seed", train->seed, "init seed")->required();
  train_cmd->add_option("--step", train->config.step, "base step size");
  train_cmd->add_option("--max-iters", train->config.max_iters,
                        "iteration budget");
  train_cmd->add_option("--margin-period", train->config.margin_period,
                        "margin check cadence");
  train_cmd->add_option("--margin-rtol", train->config.margin_rtol,
                        "relative margin stabilization tolerance");
  train_cmd->add_option("--log-period", train->config.log_period,
                        "log cadence");
  train_cmd->add_option("--out-dir", train->out_dir, "output directory");

  auto certify = std::make_shared<CertifyOptsCli>();
  auto* certify_cmd = app.add_subcommand(
      "certify", "Recover nonnegative multipliers certifying stationarity");
  certify_cmd->add_option("--data", certify->data, "dataset CSV")->required();
  certify_cmd->add_option("--model", certify->model, "model JSON")
      ->required();
  certify_cmd->add_option("--margin-tol", certify->opts.margin_tol,
                          "active margin band width");
  certify_cmd->add_option("--support-tol", certify->opts.support_tol,
                          "multiplier support cutoff");
  certify_cmd->add_flag("--require-feasible", certify->opts.require_feasible,
                        "fail when the minimum margin is not positive");
  certify_cmd->add_option("--out-dir", certify->out_dir, "output directory");

  auto ident = std::make_shared<IdentifyOptsCli>();
  auto* ident_cmd = app.add_subcommand(
      "identify",
      "Recover sample directions from stationary params (interpolation + "
      "simultaneous diagonalization)");
  ident_cmd->add_option("--model", ident->model, "model JSON")->required();
  ident_cmd->add_option("--truth", ident->truth,
                        "dataset CSV to match against (optional)");
  ident_cmd->add_option("--seed", ident->opts.seed, "probe seed");
  ident_cmd->add_option("--a-tol", ident->opts.a_tol,
                        "output-weight support cutoff");
  ident_cmd->add_option("--w-tol", ident->opts.w_tol,
                        "input-weight support cutoff");
  ident_cmd->add_option("--span-tol", ident->opts.span_tol,
                        "weight-span rank cutoff");
  ident_cmd->add_option("--interp-rank-tol", ident->opts.interp_rank_tol,
                        "interpolation rank cutoff");
  ident_cmd->add_option("--expected-rank",
                        ident->opts.jennrich.expected_rank,
                        "known component count (-1 = auto)");
  ident_cmd->add_option("--out-dir", ident->out_dir, "output directory");

  auto rec = std::make_shared<ReconstructOpts>();
  auto* rec_cmd = app.add_subcommand(
      "reconstruct",
      "Fit candidate samples to a stationary checkpoint with the splitting "
      "optimizer");
  rec_cmd->add_option("--model", rec->model, "model JSON (map + target)")
      ->required();
  rec_cmd->add_option("--map", rec->map, "kkt-binary | ntk");
  rec_cmd->add_option("--init", rec->init, "initial candidates JSON");
  rec_cmd->add_option("--truth", rec->truth,
                      "dataset CSV to match against (optional)");
  rec_cmd->add_option("--k", rec->k, "random init candidate count");
  rec_cmd->add_option("--seed", rec->seed, "run seed")->required();
  rec_cmd->add_option("--seeds", rec->seeds,
                      "run once per seed (into seed-<s>/ subdirs)");
  rec_cmd->add_option("--parallel", rec->parallel,
                      "concurrent seeds when --seeds is given");
  rec_cmd->add_flag("--no-split", rec->no_split,
                    "pure descent baseline (splitting disabled)");
  rec_cmd->add_option("--eps", rec->config.eps, "first-order tolerance");
  rec_cmd->add_option("--eps-h", rec->config.eps_h,
                      "curvature threshold (0 derives sqrt(rho*eps))");
  rec_cmd->add_option("--lambda-star", rec->config.lambda_star,
                      "splitting trigger (< 0)");
  rec_cmd->add_option("--eta-max", rec->config.eta_max,
                      "largest split displacement");
  rec_cmd->add_option("--eta-g", rec->config.eta_g,
                      "descent step (0 = estimate)");
  rec_cmd->add_option("--split-period", rec->config.split_period,
                      "iterations between curvature scans");
  rec_cmd->add_option("--cap-fraction", rec->config.cap_fraction,
                      "max fraction of candidates split per scan");
  rec_cmd->add_option("--max-candidates", rec->config.max_candidates,
                      "candidate cap");
  rec_cmd->add_option("--lanczos-iters", rec->config.lanczos_iters,
                      "curvature scan iterations");
  rec_cmd->add_option("--max-iters", rec->config.max_iters,
                      "total iteration budget");
  rec_cmd->add_option("--rho-hint", rec->config.rho_hint,
                      "Hessian-Lipschitz hint");
  rec_cmd->add_option("--l-hint", rec->config.l_hint,
                      "smoothness hint (0 = estimate)");
  rec_cmd->add_option("--refit-period", rec->config.refit_period,
                      "multiplier refit cadence (0 = off)");
  rec_cmd->add_flag("--refit-nonneg", rec->config.refit_nonneg,
                    "constrain refits to lambda >= 0");
  rec_cmd->add_flag("--one-split-per-scan", rec->config.one_split_per_scan,
                    "split only the worst candidate per scan");
  rec_cmd->add_option("--log-period", rec->config.log_period, "log cadence");
  rec_cmd->add_option("--out-dir", rec->out_dir, "output directory");

  auto eval = std::make_shared<EvaluateOpts>();
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Match recovered candidates/components against a dataset");
  eval_cmd->add_option("--candidates", eval->candidates,
                       "candidates JSON (from reconstruct)");
  eval_cmd->add_option("--identify", eval->identify_report,
                       "identify report JSON");
  eval_cmd->add_option("--truth", eval->truth, "reference dataset CSV")
      ->required();
  eval_cmd->add_option("--threshold", eval->threshold,
                       "cosine threshold for the reported fraction");
  eval_cmd->add_option("--out-dir", eval->out_dir, "output directory");

  auto demo = std::make_shared<DemoOpts>();
  auto* demo_cmd = app.add_subcommand(
      "demo-nonidentifiable",
      "Distinct datasets indistinguishable to degree-1/2 stationarity maps");
  demo_cmd->add_option("--alpha", demo->alpha, "activation degree (1 or 2)")
      ->required();
  demo_cmd->add_option("--d", demo->d, "ambient dimension");
  demo_cmd->add_option("--width", demo->width, "probe model width");
  demo_cmd->add_option("--seed", demo->seed, "probe model seed");
  demo_cmd->add_option("--out-dir", demo->out_dir, "output directory");

  auto report = std::make_shared<ReportOpts>();
  auto* report_cmd = app.add_subcommand(
      "report", "Aggregate run logs into a tidy CSV");
  report_cmd->add_option("runlogs", report->runlogs, "runlog.jsonl paths")
      ->required();
  report_cmd->add_option("--out-dir", report->out_dir, "output directory");

  std::string out_dir_for_errors = ".";
  int exit_code = 0;
  gen_cmd->callback([&] {
    out_dir_for_errors = gen->out_dir;
    run_gen_data(*gen);
  });
  synth_cmd->callback([&] {
    out_dir_for_errors = synth->out_dir;
    run_synthesize(*synth);
  });
  train_cmd->callback([&] {
    out_dir_for_errors = train->out_dir;
    run_train(*train);
  });
  certify_cmd->callback([&] {
    out_dir_for_errors = certify->out_dir;
    run_certify(*certify);
  });
  ident_cmd->callback([&] {
    out_dir_for_errors = ident->out_dir;
    run_identify(*ident);
  });
  rec_cmd->callback([&] {
    out_dir_for_errors = rec->out_dir;
    exit_code = run_reconstruct(*rec);
  });
  eval_cmd->callback([&] {
    out_dir_for_errors = eval->out_dir;
    run_evaluate(*eval);
  });
  demo_cmd->callback([&] {
    out_dir_for_errors = demo->out_dir;
    run_demo(*demo);
  });
  report_cmd->callback([&] {
    out_dir_for_errors = report->out_dir;
    run_report(*report);
  });

  try {
    app.parse(argc, argv);
    return exit_code;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;  // --help / --version
    emit_error(harness::resolve_out_dir(out_dir_for_errors),
               error_json("ConfigError", e.what()));
    return 1;
  } catch (const FieldError& e) {
    emit_error(harness::resolve_out_dir(out_dir_for_errors),
               error_json("ConfigError", e.what(), e.field));
    return 1;
  } catch (const ConfigError& e) {
    emit_error(harness::resolve_out_dir(out_dir_for_errors),
               error_json("ConfigError", e.what()));
    return 1;
  } catch (const Error& e) {
    emit_error(harness::resolve_out_dir(out_dir_for_errors),
               error_json("NumericalFailure", e.what()));
    return 2;
  } catch (const std::exception& e) {
    emit_error(harness::resolve_out_dir(out_dir_for_errors),
               error_json("InternalError", e.what()));
    return 2;
  }
}

}  // namespace recon
