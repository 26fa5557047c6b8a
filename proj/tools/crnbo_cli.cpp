#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "crnbo/errors.hpp"
#include "crnbo/harness.hpp"
#include "crnbo/rng.hpp"

namespace {

using namespace crnbo;

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open " + path);
  return nlohmann::json::parse(f);
}

std::vector<double> parse_csv_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw InvalidInput("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

int cmd_run(const std::string& config_path, const std::string& output_dir) {
  ExperimentConfig cfg = ExperimentConfig::from_json(read_json(config_path));
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult result = run_experiment(cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_outputs(cfg, result, seconds, started);

  std::cout << std::left << std::setw(12) << "policy" << std::setw(28) << "benchmark" << std::setw(18) << "metric"
            << "mean +- 2se\n";
  for (const SummaryRow& r : result.summary) {
    std::ostringstream cell;
    cell << std::setprecision(6) << r.mean << " +- " << 2.0 * r.std_error << (r.best_equivalent ? "  *" : "");
    std::cout << std::setw(12) << r.policy << std::setw(28) << r.benchmark << std::setw(18) << r.metric << cell.str()
              << '\n';
  }
  std::cout << "(* = not significantly different from the best)\n"
            << "outputs written to " << cfg.output_dir << " in " << std::setprecision(4) << seconds << " s\n";
  for (const RunRecord& rec : result.records) {
    if (!rec.complete) std::cerr << "run failed: " << rec.policy << " on " << rec.benchmark << ": " << rec.error << '\n';
  }
  return result.any_failed ? 1 : 0;
}

int cmd_eval(const std::string& name, const std::string& config_path, const std::string& x_text, Seed seed) {
  const nlohmann::json cfg = config_path.empty() ? nlohmann::json::object() : read_json(config_path);
  const auto sim = make_simulator(name, cfg);
  const std::vector<double> xs = parse_csv_numbers(x_text);
  const Point x = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  std::cout << std::setprecision(17) << sim->evaluate(x, seed) << '\n';
  return 0;
}

// Reads rows "x1,...,xd,seed,y"; a first line starting with a letter is a header.
Dataset read_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open " + path);
  std::string line;
  std::optional<Dataset> data;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line_no == 1 && std::isalpha(static_cast<unsigned char>(line[first]))) continue;
    if (line.back() == '\r') line.pop_back();
    const std::vector<double> v = parse_csv_numbers(line);
    if (v.size() < 3) throw InvalidInput("line " + std::to_string(line_no) + ": need x..., seed, y");
    const int d = static_cast<int>(v.size()) - 2;
    if (!data) data.emplace(d);
    const Point x = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
    data->add(x, static_cast<Seed>(v[static_cast<std::size_t>(d)]), v.back());
  }
  if (!data || data->empty()) throw InvalidInput(path + " holds no observations");
  return *data;
}

int cmd_fit(const std::string& path, bool offset, bool bias, std::uint64_t seed) {
  const Dataset data = read_dataset(path);
  Eigen::VectorXd lo = data.x(0), hi = data.x(0);
  for (const Point& x : data.points()) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  hi = hi.cwiseMax((lo.array() + 1e-9).matrix());
  const Domain domain = Domain::box(lo, hi);
  std::mt19937_64 rng = make_engine({seed});
  const FitResult fit = fit_hyperparameters(data, domain, ModelFlags{offset, bias}, FitOptions{}, rng);
  std::cout << "observations: " << data.size() << ", seeds: " << data.observed_seeds().size() << '\n';
  if (fit.defaults_used) std::cout << "too few observations to fit; defaults reported\n";
  std::cout << std::setprecision(8) << "log marginal likelihood: " << fit.log_ml << '\n';
  for (std::size_t i = 0; i < fit.stage_log_ml.size(); ++i)
    std::cout << "  stage " << i + 1 << ": " << fit.stage_log_ml[i] << '\n';
  std::cout << to_json(fit.hp).dump(2) << '\n' << "rho: " << fit.hp.rho() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimisation with common random numbers"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", output_dir, "Override the config's output directory");

  app.add_subcommand("list-benchmarks", "List registered benchmarks");

  std::string bench, x_text, sim_config;
  std::int64_t seed = 1;
  auto* eval = app.add_subcommand("eval", "Evaluate one objective call");
  eval->add_option("--benchmark", bench, "Benchmark name")->required();
  eval->add_option("--x", x_text, "Comma-separated solution")->required();
  eval->add_option("--seed", seed, "Seed label (>= 1)")->required();
  eval->add_option("--config", sim_config, "Simulator config (JSON)")->check(CLI::ExistingFile);

  std::string data_path;
  bool no_offset = false, no_bias = false;
  std::uint64_t fit_seed = 1;
  auto* fit = app.add_subcommand("fit", "Fit hyperparameters to a CSV of x1..xd,seed,y rows");
  fit->add_option("--data", data_path, "Data file")->required()->check(CLI::ExistingFile);
  fit->add_flag("--no-offset", no_offset, "Hold the offset variance at zero");
  fit->add_flag("--no-bias", no_bias, "Hold the bias variance at zero");
  fit->add_option("--rng-seed", fit_seed, "Seed for the random search");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, output_dir);
    if (app.got_subcommand("list-benchmarks")) {
      for (const std::string& n : simulator_names()) std::cout << n << '\n';
      return 0;
    }
    if (*eval) return cmd_eval(bench, sim_config, x_text, seed);
    if (*fit) return cmd_fit(data_path, !no_offset, !no_bias, fit_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
