#include "crnbo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "crnbo/errors.hpp"
#include "crnbo/rng.hpp"

namespace crnbo {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

DiscretizationMode discretization_from(const std::string& s) {
  if (s == "lhc-perturb") return DiscretizationMode::LhcPerturb;
  if (s == "full-domain") return DiscretizationMode::FullDomain;
  if (s == "past-points") return DiscretizationMode::PastPoints;
  throw InvalidInput("unknown discretization '" + s + "'");
}

std::string discretization_name(DiscretizationMode m) {
  switch (m) {
    case DiscretizationMode::FullDomain:
      return "full-domain";
    case DiscretizationMode::PastPoints:
      return "past-points";
    default:
      return "lhc-perturb";
  }
}

// Per-replication simulator configuration: a new master seed for every replication.
nlohmann::json replication_config(const nlohmann::json& base, std::uint64_t master_seed, int rep) {
  nlohmann::json j = base;
  const std::uint64_t own = base.contains("master_seed") ? base.at("master_seed").get<std::uint64_t>() : 0;
  j["master_seed"] = hash_key({master_seed, own, static_cast<std::uint64_t>(rep)}) >> 1;
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  read_opt(j, "benchmark", c.benchmark);
  if (j.contains("simulator")) c.simulator = j.at("simulator");
  read_opt(j, "policies", c.policies);
  read_opt(j, "macroreps", c.macroreps);
  read_opt(j, "rho_sweep", c.rho_sweep);
  read_opt(j, "output_dir", c.output_dir);
  read_opt(j, "master_seed", c.master_seed);
  read_opt(j, "heldout_seeds", c.heldout_seeds);
  read_opt(j, "workers", c.workers);
  LoopOptions& l = c.loop;
  read_opt(j, "budget", l.budget);
  read_opt(j, "n_init", l.n_init);
  read_opt(j, "init_seeds", l.init_seeds);
  read_opt(j, "known_hyperparams", l.known_hyperparams);
  read_opt(j, "audit_dominance", l.audit_dominance);
  if (j.contains("discretization")) l.discretization = discretization_from(j.at("discretization").get<std::string>());
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    read_opt(f, "screen", l.fit.screen);
    read_opt(f, "starts", l.fit.starts);
    read_opt(f, "ascent_steps", l.fit.ascent_steps);
    read_opt(f, "nelder_mead_evals", l.fit.nelder_mead_evals);
    read_opt(f, "joint_steps", l.fit.joint_steps);
    read_opt(f, "warm_steps", l.fit.warm_steps);
    read_opt(f, "full_until", l.fit.full_until);
    read_opt(f, "full_every", l.fit.full_every);
    read_opt(f, "min_points", l.fit.min_points);
  }
  if (j.contains("acquisition")) {
    const auto& a = j.at("acquisition");
    read_opt(a, "screen", l.acquisition.screen);
    read_opt(a, "starts", l.acquisition.starts);
    read_opt(a, "ascent_steps", l.acquisition.ascent_steps);
    read_opt(a, "finetune_steps", l.acquisition.finetune_steps);
    read_opt(a, "exhaustive_limit", l.acquisition.exhaustive_limit);
  }
  if (j.contains("recommendation")) {
    const auto& r = j.at("recommendation");
    read_opt(r, "screen", l.recommendation.screen);
    read_opt(r, "starts", l.recommendation.starts);
    read_opt(r, "ascent_steps", l.recommendation.ascent_steps);
    read_opt(r, "exhaustive_limit", l.recommendation.exhaustive_limit);
  }
  c.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  const LoopOptions& l = loop;
  return nlohmann::json{
      {"benchmark", benchmark},
      {"simulator", simulator},
      {"policies", policies},
      {"macroreps", macroreps},
      {"rho_sweep", rho_sweep},
      {"output_dir", output_dir},
      {"master_seed", master_seed},
      {"heldout_seeds", heldout_seeds},
      {"budget", l.budget},
      {"n_init", l.n_init},
      {"init_seeds", l.init_seeds},
      {"known_hyperparams", l.known_hyperparams},
      {"audit_dominance", l.audit_dominance},
      {"discretization", discretization_name(l.discretization)},
      {"fit",
       {{"screen", l.fit.screen},
        {"starts", l.fit.starts},
        {"ascent_steps", l.fit.ascent_steps},
        {"nelder_mead_evals", l.fit.nelder_mead_evals},
        {"joint_steps", l.fit.joint_steps},
        {"warm_steps", l.fit.warm_steps},
        {"full_until", l.fit.full_until},
        {"full_every", l.fit.full_every},
        {"min_points", l.fit.min_points}}},
      {"acquisition",
       {{"screen", l.acquisition.screen},
        {"starts", l.acquisition.starts},
        {"ascent_steps", l.acquisition.ascent_steps},
        {"finetune_steps", l.acquisition.finetune_steps},
        {"exhaustive_limit", l.acquisition.exhaustive_limit}}},
      {"recommendation",
       {{"screen", l.recommendation.screen},
        {"starts", l.recommendation.starts},
        {"ascent_steps", l.recommendation.ascent_steps},
        {"exhaustive_limit", l.recommendation.exhaustive_limit}}}};
}

void ExperimentConfig::validate() const {
  if (loop.budget <= 0 || loop.n_init <= 0 || loop.budget <= loop.n_init)
    throw InvalidInput("config: budget must exceed n_init and both must be positive");
  if (macroreps <= 0) throw InvalidInput("config: macroreps must be positive");
  if (policies.empty()) throw InvalidInput("config: no policies");
  for (const std::string& p : policies) PolicyVariant::from_name(p);
  for (double r : rho_sweep) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("config: rho values must lie in [0, 1]");
  }
  if (!rho_sweep.empty() && benchmark != "synthetic-gp") throw InvalidInput("config: rho_sweep needs synthetic-gp");
  if (heldout_seeds < 0) throw InvalidInput("config: heldout_seeds must be non-negative");
  const auto names = simulator_names();
  if (std::find(names.begin(), names.end(), benchmark) == names.end())
    throw InvalidInput("config: unknown benchmark '" + benchmark + "'");
}

std::vector<double> opportunity_cost(const Simulator& sim, const RunRecord& record) {
  const auto best = sim.truth_max();
  if (!best) throw InvalidInput("opportunity_cost: benchmark has no known truth");
  std::vector<double> out;
  out.reserve(record.iterations.size());
  for (const IterationRecord& it : record.iterations) out.push_back(std::max(0.0, *best - *sim.truth(it.recommendation)));
  return out;
}

std::vector<double> seed_reuse(const RunRecord& record) {
  std::vector<double> out;
  out.reserve(record.iterations.size());
  int evaluated = 0;
  int reused = 0;
  for (const IterationRecord& it : record.iterations) {
    if (it.evaluated) {
      ++evaluated;
      if (it.reused_seed) ++reused;
    }
    out.push_back(evaluated > 0 ? static_cast<double>(reused) / evaluated : 0.0);
  }
  return out;
}

HeldOutEstimate heldout_value(const Simulator& sim, const Point& x, int test_seed_count) {
  if (test_seed_count < 1) throw InvalidInput("heldout_value: need at least one test seed");
  sim.domain().check(x, "heldout_value x");
  std::vector<double> ys(static_cast<std::size_t>(test_seed_count));
  for (int i = 0; i < test_seed_count; ++i) ys[static_cast<std::size_t>(i)] = sim.evaluate(x, kHeldOutSeedBase + i);
  const MeanStderr m = mean_stderr(ys);
  return HeldOutEstimate{m.mean, m.std_error, test_seed_count > 1, test_seed_count};
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

void mark_best_equivalent(std::vector<SummaryRow>& rows, bool higher_is_better) {
  std::map<std::pair<std::string, std::string>, std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto key = std::make_pair(rows[i].benchmark, rows[i].metric);
    const auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, i);
      continue;
    }
    const double cur = rows[it->second].mean;
    if (higher_is_better ? rows[i].mean > cur : rows[i].mean < cur) it->second = i;
  }
  for (SummaryRow& r : rows) {
    const SummaryRow& b = rows[best.at(std::make_pair(r.benchmark, r.metric))];
    const double lo = r.mean - 2.0 * r.std_error;
    const double hi = r.mean + 2.0 * r.std_error;
    r.best_equivalent = lo <= b.mean + 2.0 * b.std_error && b.mean - 2.0 * b.std_error <= hi;
  }
}

std::vector<std::pair<std::string, nlohmann::json>> benchmark_variants(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, nlohmann::json>> out;
  if (cfg.rho_sweep.empty()) {
    out.emplace_back(cfg.benchmark, cfg.simulator);
    return out;
  }
  for (double rho : cfg.rho_sweep) {
    nlohmann::json j = cfg.simulator;
    j["rho"] = rho;
    out.emplace_back(cfg.benchmark + "[rho=" + fmt(rho) + "]", std::move(j));
  }
  return out;
}

int resolve_workers(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv(kWorkersEnv)) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto variants = benchmark_variants(cfg);
  const std::size_t n_pol = cfg.policies.size();
  const auto n_rep = static_cast<std::size_t>(cfg.macroreps);

  struct Job {
    std::size_t variant, policy, rep;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t p = 0; p < n_pol; ++p) {
      for (std::size_t r = 0; r < n_rep; ++r) jobs.push_back({v, p, r});
    }
  }

  struct JobOutput {
    RunRecord record;
    std::vector<double> opportunity;
    std::vector<double> reuse;
    std::optional<HeldOutEstimate> heldout;
  };
  std::vector<JobOutput> outputs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      JobOutput& out = outputs[k];
      const int rep = static_cast<int>(job.rep);
      try {
        const auto sim = make_simulator(cfg.benchmark, replication_config(variants[job.variant].second, cfg.master_seed, rep));
        const PolicyVariant policy = PolicyVariant::from_name(cfg.policies[job.policy]);
        // Policies in the same replication share every random stream.
        const std::uint64_t run_key = hash_key({cfg.master_seed, static_cast<std::uint64_t>(job.variant),
                                                static_cast<std::uint64_t>(rep)});
        out.record = run(policy, *sim, cfg.loop, run_key);
        out.reuse = seed_reuse(out.record);
        if (sim->truth_max()) out.opportunity = opportunity_cost(*sim, out.record);
        if (out.record.complete && cfg.heldout_seeds > 0)
          out.heldout = heldout_value(*sim, out.record.final_recommendation, cfg.heldout_seeds);
      } catch (const std::exception& e) {
        out.record.policy = cfg.policies[job.policy];
        out.record.benchmark = cfg.benchmark;
        out.record.complete = false;
        out.record.error = e.what();
      }
    }
  };
  const int workers = std::min<int>(resolve_workers(cfg.workers), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    result.records.push_back(outputs[k].record);
    result.labels.push_back(variants[jobs[k].variant].first);
    result.final_cost.push_back(outputs[k].opportunity.empty() ? std::nullopt
                                                               : std::optional<double>(outputs[k].opportunity.back()));
    result.heldout.push_back(outputs[k].heldout);
    if (!outputs[k].record.complete) result.any_failed = true;
  }

  // Aggregate per (variant, policy) over replications, entry by entry.
  std::vector<SummaryRow> cost_rows, heldout_rows;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const std::string& label = variants[v].first;
    for (std::size_t p = 0; p < n_pol; ++p) {
      const std::string& policy = cfg.policies[p];
      std::vector<const JobOutput*> group;
      for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (jobs[k].variant == v && jobs[k].policy == p && outputs[k].record.complete) group.push_back(&outputs[k]);
      }
      if (group.empty()) continue;
      const std::size_t len = group.front()->record.iterations.size();
      auto series = [&](const char* metric, auto getter) {
        for (std::size_t i = 0; i < len; ++i) {
          std::vector<double> vals;
          for (const JobOutput* o : group) vals.push_back(getter(*o, i));
          const MeanStderr m = mean_stderr(vals);
          result.curves.push_back(
              CurvePoint{group.front()->record.iterations[i].n, metric, m.mean, m.std_error, policy, label});
        }
      };
      const bool has_truth = !group.front()->opportunity.empty();
      if (has_truth) series("opportunity_cost", [](const JobOutput& o, std::size_t i) { return o.opportunity[i]; });
      series("seed_reuse", [](const JobOutput& o, std::size_t i) { return o.reuse[i]; });
      series("recommendation_mean",
             [](const JobOutput& o, std::size_t i) { return o.record.iterations[i].recommendation_mean; });

      if (has_truth) {
        std::vector<double> finals;
        for (const JobOutput* o : group) finals.push_back(o->opportunity.back());
        const MeanStderr m = mean_stderr(finals);
        cost_rows.push_back(SummaryRow{policy, label, "opportunity_cost", m.mean, m.std_error, false});
      }
      if (group.front()->heldout) {
        std::vector<double> finals;
        for (const JobOutput* o : group) finals.push_back(o->heldout->mean);
        const MeanStderr m = mean_stderr(finals);
        result.curves.push_back(CurvePoint{cfg.loop.budget, "heldout_value", m.mean, m.std_error, policy, label});
        heldout_rows.push_back(SummaryRow{policy, label, "heldout_value", m.mean, m.std_error, false});
      }
    }
  }
  mark_best_equivalent(cost_rows, false);
  mark_best_equivalent(heldout_rows, true);
  result.summary = cost_rows;
  result.summary.insert(result.summary.end(), heldout_rows.begin(), heldout_rows.end());
  return result;
}

std::string curves_csv(const std::vector<CurvePoint>& curves) {
  std::ostringstream os;
  os << kCurveHeader << '\n';
  for (const CurvePoint& c : curves) {
    os << c.iteration << ',' << c.metric << ',' << fmt(c.mean) << ',' << fmt(c.std_error) << ',' << c.policy << ','
       << c.benchmark << '\n';
  }
  return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "policy,benchmark,metric,mean,two_stderr,best_equivalent\n";
  for (const SummaryRow& r : rows) {
    os << r.policy << ',' << r.benchmark << ',' << r.metric << ',' << fmt(r.mean) << ',' << fmt(2.0 * r.std_error) << ','
       << (r.best_equivalent ? "yes" : "no") << '\n';
  }
  return os.str();
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result, double wall_seconds,
                   const std::string& started_at) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  auto write_file = [&](const char* name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + (dir / name).string());
    f << text;
  };
  std::ostringstream runs;
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    nlohmann::json j = to_json(result.records[i]);
    j["benchmark_label"] = result.labels[i];
    runs << j.dump() << '\n';
  }
  write_file("runs.jsonl", runs.str());
  write_file("curves.csv", curves_csv(result.curves));
  write_file("summary.csv", summary_csv(result.summary));

  const std::string cfg_text = cfg.to_json().dump();
  nlohmann::json meta{{"config_hash", config_hash(cfg_text)},
                      {"version", kVersion},
                      {"started_at", started_at},
                      {"wall_seconds", wall_seconds},
                      {"workers", resolve_workers(cfg.workers)},
                      {"failed_runs", result.any_failed},
                      {"config", cfg.to_json()}};
  write_file("metadata.json", meta.dump(2) + "\n");
}

}  // namespace crnbo
