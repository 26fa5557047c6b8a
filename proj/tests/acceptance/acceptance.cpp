// Acceptance checks, one PASS/FAIL line per criterion.
//
// Usage: crnbo_acceptance [core|synthetic|ato|ais|determinism|all]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crnbo/acquisition.hpp"
#include "crnbo/envelope.hpp"
#include "crnbo/harness.hpp"
#include "crnbo/hyperfit.hpp"

using namespace crnbo;

namespace {

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Point random_point(std::mt19937_64& rng, int d) {
  Point x(d);
  for (int k = 0; k < d; ++k) x[k] = uniform(rng, 0.0, 1.0);
  return x;
}

CrnHyperparams random_hp(std::mt19937_64& rng, int d) {
  CrnHyperparams hp;
  hp.lengthscales.resize(d);
  for (int k = 0; k < d; ++k) hp.lengthscales[k] = uniform(rng, 0.2, 0.8);
  hp.target_variance = uniform(rng, 0.5, 2.0);
  hp.offset_variance = uniform(rng, 0.05, 0.5);
  hp.bias_variance = uniform(rng, 0.05, 0.5);
  hp.white_variance = uniform(rng, 0.05, 0.5);
  hp.prior_mean = uniform(rng, -1.0, 1.0);
  return hp;
}

Dataset random_data(std::mt19937_64& rng, int d, int n, int seeds) {
  Dataset data(d);
  for (int i = 0; i < n; ++i) {
    const Seed s = 1 + static_cast<Seed>(rng() % static_cast<std::uint64_t>(seeds));
    data.add(random_point(rng, d), s, uniform(rng, -2.0, 2.0));
  }
  return data;
}

std::vector<Point> random_set(std::mt19937_64& rng, int d, int m) {
  std::vector<Point> out;
  for (int i = 0; i < m; ++i) out.push_back(random_point(rng, d));
  return out;
}

double se_kernel(const Point& a, const Point& b, const Eigen::VectorXd& l) {
  return std::exp(-0.5 * (a - b).cwiseQuotient(l).squaredNorm());
}

// ------------------------------------------------------------------ core

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const int n = 5 + static_cast<int>(rng() % 26);
    const Dataset data = random_data(rng, d, n, 1 + static_cast<int>(rng() % 5));
    const CrnHyperparams hp = random_hp(rng, d);
    const Posterior p = Posterior::fit(data, hp);

    // Target GP observed through correlated noise: y_i = theta-bar(x_i) + e_i,
    // Cov(e_i, e_j) = [s_i == s_j](eta2 + sb2 SE + sw2 [x_i == x_j]), plus the nugget.
    Eigen::MatrixXd kt(n, n), noise(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double se = se_kernel(data.x(i), data.x(j), hp.lengthscales);
        kt(i, j) = hp.target_variance * se;
        noise(i, j) = 0.0;
        if (data.seed(i) == data.seed(j)) {
          noise(i, j) = hp.offset_variance + hp.bias_variance * se + (data.x(i) == data.x(j) ? hp.white_variance : 0.0);
        }
      }
    }
    noise.diagonal().array() += p.jitter();
    const Eigen::LLT<Eigen::MatrixXd> llt(kt + noise);
    const Eigen::VectorXd alpha = llt.solve((data.outputs().array() - hp.prior_mean).matrix());
    const std::vector<Point> probes = random_set(rng, d, 10);
    for (const Point& x : probes) {
      Eigen::VectorXd kx(n);
      for (int i = 0; i < n; ++i) kx[i] = hp.target_variance * se_kernel(x, data.x(i), hp.lengthscales);
      worst = std::max(worst, std::abs(hp.prior_mean + kx.dot(alpha) - p.target_mean(x)));
      for (const Point& y : probes) {
        Eigen::VectorXd ky(n);
        for (int i = 0; i < n; ++i) ky[i] = hp.target_variance * se_kernel(y, data.x(i), hp.lengthscales);
        const double oracle = hp.target_variance * se_kernel(x, y, hp.lengthscales) - kx.dot(llt.solve(ky));
        worst = std::max(worst, std::abs(oracle - p.target_cov(x, y)));
      }
    }
  }
  const double t = seconds_since(t0);
  report("1", worst <= 1e-8 && t < 10.0,
         "target posterior vs correlated-noise GP, max abs error " + num(worst) + " over 50 instances in " + num(t) + " s");
}

void criterion_2() {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const Dataset data = random_data(rng, d, 5 + static_cast<int>(rng() % 26), 1 + static_cast<int>(rng() % 5));
    const Posterior p = Posterior::fit(data, random_hp(rng, d));
    const Seed fresh = data.max_seed() + 1;
    // Fresh observation seeds are exchangeable, and so are the two reserved
    // target labels. All of them share the same mean.
    const std::vector<std::vector<Seed>> classes = {{fresh, fresh + 1, fresh + 1000}, {kTargetSeed, kTargetSeedAlt}};
    for (int q = 0; q < 10; ++q) {
      const Point x = random_point(rng, d);
      const Point y = random_point(rng, d);
      for (const auto& cls : classes) {
        for (Seed s : cls) {
          const Seed r = cls.front();
          worst = std::max(worst, std::abs(p.mean(x, s) - p.mean(x, fresh)));
          worst = std::max(worst, std::abs(p.variance(x, s) - p.variance(x, r)));
          worst = std::max(worst, std::abs(p.cov(x, s, y, s) - p.cov(x, r, y, r)));
          for (std::size_t i = 0; i < data.size(); ++i)
            worst = std::max(worst, std::abs(p.cov(data.x(i), data.seed(i), x, s) - p.cov(data.x(i), data.seed(i), x, r)));
        }
      }
      worst = std::max(worst, std::abs(p.cov(x, fresh, y, fresh + 1) - p.target_cov(x, y)));
    }
  }
  report("2", worst <= 1e-10, "unobserved-seed predictions agree, max difference " + num(worst));
}

void criterion_3() {
  std::mt19937_64 rng(103);
  double most_negative = 0.0, largest_at_obs = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3;
    const Dataset data = random_data(rng, d, 5 + static_cast<int>(rng() % 26), 1 + static_cast<int>(rng() % 5));
    const Posterior p = Posterior::fit(data, random_hp(rng, d));
    const Domain box = Domain::box(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d));
    std::mt19937_64 arng(trial);
    const DiscretizationSet a = build_discretization(p, box, arng);
    const KgEvaluator eval(p, a.points);
    const Seed fresh = eval.fresh_seed();
    for (int q = 0; q < 100; ++q) {
      const Point x = random_point(rng, d);
      const Seed s = 1 + static_cast<Seed>(rng() % static_cast<std::uint64_t>(fresh));
      most_negative = std::min(most_negative, eval.kg(x, s));
    }
    for (std::size_t i = 0; i < data.size(); ++i)
      largest_at_obs = std::max(largest_at_obs, std::abs(eval.kg(data.x(i), data.seed(i))));
  }
  report("3", most_negative >= -1e-9 && largest_at_obs == 0.0,
         "KG minimum over probes " + num(most_negative) + ", largest |KG| at observed pairs " + num(largest_at_obs));
}

void criterion_4() {
  std::mt19937_64 rng(104);
  std::normal_distribution<double> normal;
  double worst_z = 0.0;
  for (int e = 0; e < 100; ++e) {
    const int m = 1 + static_cast<int>(rng() % 50);
    std::vector<double> a(m), b(m);
    for (int i = 0; i < m; ++i) {
      a[i] = uniform(rng, -1.0, 1.0);
      b[i] = uniform(rng, -1.0, 1.0);
    }
    const double exact = expected_max_affine(a, b).expected_max;
    const int draws = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < draws; ++k) {
      const double z = normal(rng);
      double best = a[0] + b[0] * z;
      for (int i = 1; i < m; ++i) best = std::max(best, a[i] + b[i] * z);
      sum += best;
      sum2 += best * best;
    }
    const double mean = sum / draws;
    const double se = std::sqrt(std::max(0.0, sum2 / draws - mean * mean) / draws);
    worst_z = std::max(worst_z, se > 0 ? std::abs(mean - exact) / se : (mean == exact ? 0.0 : 1e9));
  }
  const double abs_z = expected_max_affine(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, -1.0}).expected_max;
  const double constants = expected_max_affine(std::vector<double>{0.3, 1.7, -2.0}, std::vector<double>{0.0, 0.0, 0.0}).expected_max;
  const double single = expected_max_affine(std::vector<double>{0.42}, std::vector<double>{3.0}).expected_max;
  const bool examples = std::abs(abs_z - std::sqrt(2.0 / std::numbers::pi)) <= 1e-3 && constants == 1.7 && single == 0.42;
  report("4", worst_z <= 4.0 && examples,
         "envelope vs 1e6-draw Monte Carlo, worst deviation " + num(worst_z) + " se; worked examples " +
             (examples ? "exact" : "off"));
}

void criterion_5() {
  std::mt19937_64 rng(105);
  double worst_kg = 0.0;
  int kg_cases = 0;
  while (kg_cases < 20) {
    const int d = 1 + kg_cases % 3;
    const Dataset data = random_data(rng, d, 8 + static_cast<int>(rng() % 15), 3);
    const Posterior p = Posterior::fit(data, random_hp(rng, d));
    const DiscretizationSet a{random_set(rng, d, 15), 0};
    const Point x = random_point(rng, d);
    const Seed s = 1 + static_cast<Seed>(rng() % 4);
    const Eigen::VectorXd g = kg_crn_gradient(p, x, s, a);
    if (g.norm() < 1e-6) continue;
    Eigen::VectorXd fd(d);
    const double h = 1e-6;
    for (int k = 0; k < d; ++k) {
      Point hi = x, lo = x;
      hi[k] += h;
      lo[k] -= h;
      fd[k] = (kg_crn(p, hi, s, a) - kg_crn(p, lo, s, a)) / (2 * h);
    }
    worst_kg = std::max(worst_kg, (g - fd).norm() / fd.norm());
    ++kg_cases;
  }
  double worst_ml = 0.0;
  for (int c = 0; c < 20; ++c) {
    const int d = 1 + c % 3;
    const Dataset data = random_data(rng, d, 8 + static_cast<int>(rng() % 15), 3);
    const CrnHyperparams hp = random_hp(rng, d);
    Eigen::VectorXd g;
    log_marginal_likelihood(data, hp, &g);
    const Eigen::VectorXd theta = log_parameters(hp);
    Eigen::VectorXd fd(theta.size());
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Eigen::VectorXd hi = theta, lo = theta;
      hi[k] += h;
      lo[k] -= h;
      fd[k] = (log_marginal_likelihood(data, from_log_parameters(hi, hp.prior_mean)).log_ml -
               log_marginal_likelihood(data, from_log_parameters(lo, hp.prior_mean)).log_ml) /
              (2 * h);
    }
    worst_ml = std::max(worst_ml, (g - fd).norm() / fd.norm());
  }
  report("5", worst_kg <= 1e-3 && worst_ml <= 1e-4,
         "relative gradient error: KG " + num(worst_kg) + ", log marginal likelihood " + num(worst_ml));
}

CrnHyperparams spheric_hp(double lengthscale, double offset, double white) {
  CrnHyperparams hp;
  hp.lengthscales = Eigen::VectorXd::Constant(1, lengthscale);
  hp.target_variance = 1.0;
  hp.offset_variance = offset;
  hp.white_variance = white;
  return hp;
}

Point lattice_point(int i) { return Point::Constant(1, static_cast<double>(i)); }

void criterion_6() {
  std::mt19937_64 rng(106);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Dataset data(1);
    std::vector<Point> xs;
    for (int i = 1; i <= 10; ++i) {
      xs.push_back(lattice_point(i));
      data.add(xs.back(), 1, uniform(rng, -1.0, 1.0));
    }
    const CrnHyperparams hp = with_empirical_mean(spheric_hp(uniform(rng, 0.5, 3.0), uniform(rng, 0.1, 1.0), 0.0), data);
    const Posterior p = Posterior::fit(data, hp);
    const KgEvaluator eval(p, xs);
    for (const Point& x : xs)
      for (Seed s : {1, 2, 3}) worst = std::max(worst, eval.kg(x, s));
  }
  report("6", worst < 1e-8, "fully sampled seed under rho = 1, max KG over X x {1,2,3} is " + num(worst));
}

void criterion_7() {
  std::mt19937_64 rng(107);
  const Domain dom = Domain::lattice(Eigen::VectorXd::Constant(1, 1), Eigen::VectorXd::Constant(1, 30));
  int decided = 0, seed_one = 0, no_value = 0;
  double worst = 0.0;
  for (int trial = 0; decided < 20 && trial < 200; ++trial) {
    Dataset data(1);
    std::vector<Point> past;
    std::vector<int> idx(30);
    for (int i = 0; i < 30; ++i) idx[i] = i + 1;
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n = 4 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      past.push_back(lattice_point(idx[i]));
      data.add(past.back(), 1, uniform(rng, -1.0, 1.0));
    }
    const CrnHyperparams hp = with_empirical_mean(spheric_hp(uniform(rng, 2.0, 6.0), uniform(rng, 0.1, 1.0), 0.0), data);
    const Posterior p = Posterior::fit(data, hp);
    const KgEvaluator eval(p, past);
    std::mt19937_64 orng(trial);
    const AcquisitionChoice c = optimize_kg_crn(eval, AcquisitionSpace::over(dom, data), AcquisitionOptions{}, orng);
    // When nothing has value the loop falls back to a random point, so no
    // seed decision is being made.
    if (c.no_improvement) {
      ++no_value;
    } else {
      ++decided;
      if (c.seed == 1) ++seed_one;
    }

    // Every target line over the past points moves with the same slope, so
    // KG reduces to an expected improvement of x over the incumbent.
    double best = -1e300;
    Point incumbent;
    for (const Point& a : past) {
      if (p.target_mean(a) > best) {
        best = p.target_mean(a);
        incumbent = a;
      }
    }
    for (const Point& x : dom.enumerate()) {
      const double common = sigma_tilde(p, incumbent, x, 1).value_or(0.0);
      const double own = sigma_tilde(p, x, x, 1).value_or(0.0);
      const double delta = p.target_mean(x) - best;
      const double sigma = std::abs(own - common);
      double ei = std::max(delta, 0.0);
      if (sigma > 0.0) ei = delta * normal_cdf(delta / sigma) + sigma * normal_pdf(delta / sigma);
      worst = std::max(worst, std::abs(eval.kg(x, 1) - (ei - std::max(delta, 0.0))));
    }
  }
  report("7", decided == 20 && seed_one == 20 && worst <= 1e-8,
         "past-point discretisation at rho = 1 chose seed 1 in " + std::to_string(seed_one) + "/" +
             std::to_string(decided) + " instances (" + std::to_string(no_value) +
             " skipped with no value anywhere); KG vs expected-improvement form, max error " + num(worst));
}

int argmax_over(const Posterior& p, Seed s, const std::vector<int>& grid) {
  int best = grid.front();
  double best_v = -1e300;
  for (int i : grid) {
    const double v = p.mean(lattice_point(i), s);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

void criterion_8() {
  std::mt19937_64 rng(108);
  int agree_spheric = 0, agree_white = 0;
  for (int pass = 0; pass < 2; ++pass) {
    const bool white = pass == 1;
    for (int trial = 0; trial < 20; ++trial) {
      Dataset data(1);
      while (data.size() < 15) {
        const Point x = lattice_point(1 + static_cast<int>(rng() % 100));
        const Seed s = 1 + static_cast<Seed>(rng() % 4);
        if (!data.find(x, s)) data.add(x, s, uniform(rng, -1.0, 1.0));
      }
      const CrnHyperparams hp =
          with_empirical_mean(spheric_hp(uniform(rng, 3.0, 15.0), uniform(rng, 0.1, 1.0), white ? uniform(rng, 0.05, 0.5) : 0.0), data);
      const Posterior p = Posterior::fit(data, hp);
      // White noise only moves the mean at points observed on that seed, so
      // those singletons are left out of the comparison.
      std::vector<int> grid;
      for (int i = 1; i <= 100; ++i) {
        bool observed = false;
        for (Seed s = 1; s <= 4; ++s) observed = observed || data.find(lattice_point(i), s).has_value();
        if (!white || !observed) grid.push_back(i);
      }
      const int target = argmax_over(p, kTargetSeed, grid);
      bool same = true;
      for (Seed s = 1; s <= 6; ++s) same = same && argmax_over(p, s, grid) == target;
      if (same) ++(white ? agree_white : agree_spheric);
    }
  }
  report("8", agree_spheric == 20 && agree_white == 20,
         "argmax of the seed posterior mean matches the target: " + std::to_string(agree_spheric) +
             "/20 at rho = 1, " + std::to_string(agree_white) + "/20 with white noise");
}

// ------------------------------------------------------------------ experiments

struct Group {
  std::vector<double> values;
  MeanStderr stats() const { return mean_stderr(values); }
};

// Per (benchmark label, policy): final opportunity costs, held-out values, final reuse.
struct Collected {
  std::map<std::pair<std::string, std::string>, Group> cost, heldout, reuse;
  std::map<std::pair<std::string, std::string>, std::vector<double>> reuse_limit;
  int dominance_checked = 0;
  int dominance_violations = 0;
  int failed = 0;
};

void collect(const ExperimentResult& r, Collected& c) {
  for (std::size_t k = 0; k < r.records.size(); ++k) {
    const RunRecord& rec = r.records[k];
    if (!rec.complete) {
      ++c.failed;
      continue;
    }
    const auto key = std::make_pair(r.labels[k], rec.policy);
    if (r.final_cost[k]) c.cost[key].values.push_back(*r.final_cost[k]);
    if (r.heldout[k]) c.heldout[key].values.push_back(r.heldout[k]->mean);
    c.reuse[key].values.push_back(seed_reuse(rec).back());
    int evaluated = 0;
    for (const IterationRecord& it : rec.iterations) {
      if (!it.evaluated) continue;
      ++evaluated;
      if (it.full_value) {
        ++c.dominance_checked;
        if (*it.full_value < it.fresh_value - 1e-12) ++c.dominance_violations;
      }
    }
    c.reuse_limit[key].push_back(0.5 + 1.0 / (2.0 * evaluated));
  }
}

bool overlap(const MeanStderr& a, const MeanStderr& b) {
  return a.mean - 2 * a.std_error <= b.mean + 2 * b.std_error && b.mean - 2 * b.std_error <= a.mean + 2 * a.std_error;
}

std::string interval(const MeanStderr& m) { return num(m.mean) + " +- " + num(2 * m.std_error); }

// One-sided sign test p-value for `wins` successes out of `trials`.
double sign_test(int wins, int trials) {
  double p = 0.0;
  for (int k = wins; k <= trials; ++k) p += std::exp(std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) - trials * std::log(2.0));
  return p;
}

std::string rho_label(double rho) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "synthetic-gp[rho=%.17g]", rho);
  return buf;
}

void synthetic_group() {
  Collected c;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig main_cfg = ExperimentConfig::from_json(nlohmann::json{
      {"benchmark", "synthetic-gp"},
      {"policies", {"KG", "KG-PW", "KG-CRN"}},
      {"budget", 50},
      {"n_init", 5},
      {"init_seeds", 5},
      {"macroreps", 20},
      {"rho_sweep", {0.0, 1.0}},
      {"known_hyperparams", true},
      {"discretization", "full-domain"},
      {"audit_dominance", true},
      {"heldout_seeds", 0},
      {"master_seed", 2024}});
  const ExperimentResult main_run = run_experiment(main_cfg);
  const double main_seconds = seconds_since(t0);
  collect(main_run, c);

  // Criterion 9: paired comparison per replication (policies share the truth and streams).
  std::vector<double> kg1, crn1;
  for (std::size_t k = 0; k < main_run.records.size(); ++k) {
    if (main_run.labels[k] != rho_label(1.0) || !main_run.final_cost[k]) continue;
    if (main_run.records[k].policy == "KG") kg1.push_back(*main_run.final_cost[k]);
    if (main_run.records[k].policy == "KG-CRN") crn1.push_back(*main_run.final_cost[k]);
  }
  int wins = 0, losses = 0;
  for (std::size_t i = 0; i < std::min(kg1.size(), crn1.size()); ++i) {
    if (crn1[i] < kg1[i]) ++wins;
    if (crn1[i] > kg1[i]) ++losses;
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.empty() ? 0.0 : (v[(v.size() - 1) / 2] + v[v.size() / 2]) / 2;
  };
  const double p = sign_test(wins, wins + losses);
  const MeanStderr kg0 = c.cost[{rho_label(0.0), "KG"}].stats();
  const MeanStderr crn0 = c.cost[{rho_label(0.0), "KG-CRN"}].stats();
  const bool ok9 = kg1.size() == 20 && crn1.size() == 20 && median(crn1) < median(kg1) && p < 0.05 && overlap(kg0, crn0) &&
                   main_seconds < 600.0;
  report("9", ok9,
         "rho = 1 median cost KG-CRN " + num(median(crn1)) + " vs KG " + num(median(kg1)) + ", sign test " +
             std::to_string(wins) + "-" + std::to_string(losses) + " p = " + num(p) + "; rho = 0 KG " + interval(kg0) +
             " vs KG-CRN " + interval(crn0) + "; " + num(main_seconds) + " s");

  // Criterion 10.
  double kg_reuse = 0.0, pw_excess = -1.0;
  for (const auto& [key, g] : c.reuse) {
    if (key.second == "KG")
      for (double v : g.values) kg_reuse = std::max(kg_reuse, v);
    if (key.second == "KG-PW") {
      const auto& lim = c.reuse_limit[key];
      for (std::size_t i = 0; i < g.values.size(); ++i) pw_excess = std::max(pw_excess, g.values[i] - lim[i]);
    }
  }
  const MeanStderr crn_reuse = c.reuse[{rho_label(1.0), "KG-CRN"}].stats();
  report("10", kg_reuse == 0.0 && pw_excess <= 0.0 && crn_reuse.mean >= 0.9,
         "reuse: KG max " + num(kg_reuse) + ", KG-PW max excess over bound " + num(pw_excess) + ", KG-CRN at rho = 1 mean " +
             num(crn_reuse.mean));

  // Criterion 11: bias functions alone, no offsets.
  const ExperimentConfig bias_cfg = ExperimentConfig::from_json(nlohmann::json{
      {"benchmark", "synthetic-gp"},
      {"simulator", {{"difference_mode", "bias-only"}}},
      {"policies", {"KG", "KG-CRN"}},
      {"budget", 50},
      {"n_init", 5},
      {"init_seeds", 5},
      {"macroreps", 20},
      {"rho_sweep", {0.0, 0.5, 1.0}},
      {"known_hyperparams", true},
      {"discretization", "full-domain"},
      {"audit_dominance", true},
      {"heldout_seeds", 0},
      {"master_seed", 2025}});
  const ExperimentResult bias_run = run_experiment(bias_cfg);
  Collected b;
  collect(bias_run, b);
  collect(bias_run, c);
  bool all_overlap = true;
  std::string detail;
  for (double rho : bias_cfg.rho_sweep) {
    const MeanStderr kg = b.cost[{rho_label(rho), "KG"}].stats();
    const MeanStderr crn = b.cost[{rho_label(rho), "KG-CRN"}].stats();
    all_overlap = all_overlap && overlap(kg, crn);
    detail += " rho=" + num(rho) + ": KG " + interval(kg) + ", KG-CRN " + interval(crn) + ";";
  }
  report("11", all_overlap && b.failed == 0, "bias-only sweep, intervals overlap at every rho:" + detail);

  report("12", c.dominance_violations == 0 && c.dominance_checked > 0 && c.failed == 0,
         std::to_string(c.dominance_checked) + " logged iterations audited, " + std::to_string(c.dominance_violations) +
             " with full-seed value below fresh-seed value");
}

nlohmann::json desk_loop(const std::string& benchmark, const std::vector<std::string>& policies, std::uint64_t seed) {
  return nlohmann::json{{"benchmark", benchmark},
                        {"policies", policies},
                        {"budget", 150},
                        {"n_init", 20},
                        {"init_seeds", 5},
                        {"macroreps", 10},
                        {"heldout_seeds", 2000},
                        {"master_seed", seed},
                        {"fit",
                         {{"screen", 200},
                          {"starts", 3},
                          {"ascent_steps", 30},
                          {"nelder_mead_evals", 60},
                          {"joint_steps", 30},
                          {"warm_steps", 8},
                          {"full_until", 40},
                          {"full_every", 25}}},
                        {"acquisition", {{"screen", 200}, {"starts", 3}, {"ascent_steps", 20}, {"finetune_steps", 10}}},
                        {"recommendation", {{"screen", 300}, {"starts", 3}, {"ascent_steps", 30}}}};
}

void ato_group() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(ExperimentConfig::from_json(desk_loop("ato", {"KG", "KG-CRN"}, 7)));
  const double t = seconds_since(t0);
  Collected c;
  collect(r, c);
  const MeanStderr kg = c.heldout[{"ato", "KG"}].stats();
  const MeanStderr crn = c.heldout[{"ato", "KG-CRN"}].stats();
  const double pooled = std::sqrt(kg.std_error * kg.std_error + crn.std_error * crn.std_error);
  report("13a", c.failed == 0 && crn.mean >= kg.mean - 2 * pooled && t < 1800.0,
         "ATO held-out profit KG-CRN " + interval(crn) + " vs KG " + interval(kg) + ", " + num(t) + " s");
}

void ais_group() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(ExperimentConfig::from_json(desk_loop("ais", {"KG-CRN-CS", "KG-PW-bias", "KG-CRN"}, 8)));
  const double t = seconds_since(t0);
  Collected c;
  collect(r, c);
  const MeanStderr cs = c.heldout[{"ais", "KG-CRN-CS"}].stats();
  const MeanStderr pwb = c.heldout[{"ais", "KG-PW-bias"}].stats();
  const MeanStderr crn = c.heldout[{"ais", "KG-CRN"}].stats();
  auto beats_or_overlaps = [&](const MeanStderr& m) { return m.mean >= cs.mean || overlap(m, cs); };
  report("13b", c.failed == 0 && beats_or_overlaps(crn) && beats_or_overlaps(pwb) && t < 1800.0,
         "AIS held-out objective KG-CRN " + interval(crn) + ", KG-PW-bias " + interval(pwb) + ", KG-CRN-CS " +
             interval(cs) + ", " + num(t) + " s");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void determinism_group() {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "crnbo_acceptance_determinism";
  fs::remove_all(base);
  bool same = true;
  std::string detail;
  for (const std::string bench : {"synthetic-gp", "ato", "ais"}) {
    nlohmann::json j = desk_loop(bench, {"KG", "KG-PW-bias", "KG-CRN"}, 99);
    j["budget"] = 28;
    j["macroreps"] = 2;
    j["heldout_seeds"] = 50;
    if (bench == "synthetic-gp") j["rho_sweep"] = {0.3, 0.9};
    std::vector<std::string> files[2];
    for (int pass = 0; pass < 2; ++pass) {
      ExperimentConfig cfg = ExperimentConfig::from_json(j);
      cfg.output_dir = (base / bench / std::to_string(pass)).string();
      cfg.workers = pass == 0 ? 1 : 3;
      const ExperimentResult r = run_experiment(cfg);
      write_outputs(cfg, r, 0.0, "");
      for (const char* f : {"curves.csv", "summary.csv", "runs.jsonl"}) files[pass].push_back(slurp(fs::path(cfg.output_dir) / f));
    }
    const bool equal = files[0] == files[1] && !files[0][0].empty();
    same = same && equal;
    detail += " " + bench + (equal ? " identical" : " DIFFERENT") + ";";
  }
  fs::remove_all(base);
  report("14", same, "re-runs with 1 and 3 workers reproduce metric CSVs byte for byte:" + detail);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string group = argc > 1 ? argv[1] : "all";
  const std::map<std::string, std::function<void()>> groups = {
      {"core",
       [] {
         criterion_1();
         criterion_2();
         criterion_3();
         criterion_4();
         criterion_5();
         criterion_6();
         criterion_7();
         criterion_8();
       }},
      {"synthetic", synthetic_group},
      {"ato", ato_group},
      {"ais", ais_group},
      {"determinism", determinism_group}};
  try {
    if (group == "all") {
      for (const char* g : {"core", "synthetic", "ato", "ais", "determinism"}) groups.at(g)();
    } else if (auto it = groups.find(group); it != groups.end()) {
      it->second();
    } else {
      std::cerr << "unknown group '" << group << "'\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL group " << group << ": " << e.what() << std::endl;
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
