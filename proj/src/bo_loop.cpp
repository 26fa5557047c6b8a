#include "crnbo/bo_loop.hpp"

#include <chrono>
#include <map>
#include <set>

#include "crnbo/errors.hpp"
#include "crnbo/rng.hpp"

namespace crnbo {

namespace {

enum Purpose : std::uint64_t {
  kInitPurpose = 1,
  kFitPurpose = 2,
  kDiscretizationPurpose = 3,
  kAcquisitionPurpose = 4,
  kRecommendPurpose = 5,
  kFallbackPurpose = 6,
};

// Random draws tried before a fallback gives up on reusing a seed.
constexpr int kFallbackDraws = 64;

std::mt19937_64 engine_for(std::uint64_t run_key, std::uint64_t n, Purpose purpose) {
  return make_engine({run_key, n, purpose});
}

std::vector<Point> distinct_points(const std::vector<Point>& xs) {
  std::set<std::vector<double>> seen;
  std::vector<Point> out;
  for (const Point& x : xs) {
    if (seen.insert(std::vector<double>(x.data(), x.data() + x.size())).second) out.push_back(x);
  }
  return out;
}

nlohmann::json point_json(const Point& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

}  // namespace

PolicyVariant PolicyVariant::from_name(const std::string& name) {
  if (name == "KG") return {name, {false, false}, false, false};
  if (name == "KG-PW") return {name, {true, false}, false, true};
  if (name == "KG-PW-bias") return {name, {true, true}, false, true};
  if (name == "KG-CRN-CS") return {name, {true, false}, true, false};
  if (name == "KG-CRN") return {name, {true, true}, true, false};
  throw InvalidInput("unknown policy '" + name + "'");
}

std::vector<std::string> PolicyVariant::names() { return {"KG", "KG-PW", "KG-PW-bias", "KG-CRN-CS", "KG-CRN"}; }

Dataset initialize(const Simulator& sim, int n_init, int init_seeds, std::mt19937_64& rng) {
  if (n_init < 1 || init_seeds < 1) throw InvalidInput("initialize: n_init and init_seeds must be positive");
  const Domain& domain = sim.domain();
  Dataset data(domain.dim());
  const std::vector<Point> xs = latin_hypercube(domain, n_init, rng);
  for (int i = 0; i < n_init; ++i) {
    const Seed s = 1 + i % init_seeds;
    const Point& x = xs[static_cast<std::size_t>(i)];
    // Lattice rounding can collide; a repeated pair moves to the next free seed.
    Seed use = s;
    while (data.find(x, use)) use += init_seeds;
    data.add(x, use, sim.evaluate(x, use));
  }
  return data;
}

RunRecord run(const PolicyVariant& policy, const Simulator& sim, const LoopOptions& opts, std::uint64_t run_key) {
  if (opts.budget <= opts.n_init) throw InvalidInput("run: budget must exceed n_init");
  const Domain& domain = sim.domain();
  const std::optional<CrnHyperparams> known = sim.known_hyperparams();
  if (opts.known_hyperparams && !known) throw InvalidInput("run: benchmark has no known hyperparameters");
  if (opts.discretization == DiscretizationMode::FullDomain && !domain.integer)
    throw InvalidInput("run: full-domain discretisation needs a finite lattice");

  RunRecord rec;
  rec.policy = policy.name;
  rec.benchmark = sim.name();
  rec.run_key = run_key;
  rec.n_init = opts.n_init;
  rec.budget = opts.budget;

  std::mt19937_64 init_rng = engine_for(run_key, 0, kInitPurpose);
  Dataset data = initialize(sim, opts.n_init, opts.init_seeds, init_rng);
  for (std::size_t i = 0; i < data.size(); ++i) {
    rec.init_x.push_back(data.x(i));
    rec.init_seeds.push_back(data.seed(i));
    rec.init_y.push_back(data.y(i));
  }

  std::optional<CrnHyperparams> previous;
  auto fit_model = [&](const Dataset& d, double* log_ml) {
    const auto n = static_cast<std::uint64_t>(d.size());
    if (opts.known_hyperparams) {
      CrnHyperparams hp = with_empirical_mean(apply_model_flags(*known, policy.model, true), d);
      *log_ml = log_marginal_likelihood(d, hp).log_ml;
      return hp;
    }
    std::mt19937_64 rng = engine_for(run_key, n, kFitPurpose);
    const FitPlan plan = previous ? refit_schedule(static_cast<int>(n), opts.fit) : FitPlan::Full;
    const FitResult fit = fit_hyperparameters(d, domain, policy.model, opts.fit, rng, plan, previous ? &*previous : nullptr);
    previous = fit.hp;
    *log_ml = fit.log_ml;
    return fit.hp;
  };
  auto recommendation_of = [&](const Posterior& post, std::uint64_t n, IterationRecord& it) {
    std::mt19937_64 rng = engine_for(run_key, n, kRecommendPurpose);
    it.recommendation = recommend(post, domain, opts.recommendation, rng);
    it.recommendation_mean = post.target_mean(it.recommendation);
  };

  try {
    while (static_cast<int>(data.size()) < opts.budget) {
      const auto started = std::chrono::steady_clock::now();
      const auto n = static_cast<std::uint64_t>(data.size());
      IterationRecord base;
      base.n = static_cast<int>(n);
      base.hp = fit_model(data, &base.log_ml);
      const Posterior post = Posterior::fit(data, base.hp);
      recommendation_of(post, n, base);

      std::vector<Point> set;
      if (opts.discretization == DiscretizationMode::FullDomain) {
        set = domain.enumerate();
      } else if (opts.discretization == DiscretizationMode::PastPoints) {
        set = distinct_points(data.points());
      } else {
        std::mt19937_64 rng = engine_for(run_key, n, kDiscretizationPurpose);
        set = build_discretization(post, domain, rng, static_cast<int>(n)).points;
      }
      const KgEvaluator eval(post, std::move(set));
      const AcquisitionSpace full_space = AcquisitionSpace::over(domain, data);
      const AcquisitionSpace space = policy.allow_old_seeds ? full_space : full_space.fresh_only();
      std::mt19937_64 acq_rng = engine_for(run_key, n, kAcquisitionPurpose);

      std::vector<IterationRecord> entries;
      if (policy.allow_pairs) {
        const bool room = opts.budget - static_cast<int>(n) >= 2;
        const PairwiseDecision dec = select_pw_mode(eval, space, opts.acquisition, acq_rng, room);
        IterationRecord first = base;
        first.x = dec.first;
        first.seed = dec.seed;
        first.pair = dec.pair;
        first.acquisition_value = dec.pair ? dec.pair_value : dec.single_value;
        first.fresh_value = first.acquisition_value;
        first.fallback = negligible_value(post, first.acquisition_value);
        entries.push_back(first);
        if (dec.pair) {
          IterationRecord second = first;
          second.x = dec.second;
          second.n = static_cast<int>(n) + 1;
          entries.push_back(second);
        }
      } else {
        std::mt19937_64 audit_rng = acq_rng;
        const AcquisitionChoice choice = optimize_kg_crn(eval, space, opts.acquisition, acq_rng);
        IterationRecord it = base;
        it.x = choice.x;
        it.seed = choice.seed;
        it.acquisition_value = choice.value;
        it.fresh_value = choice.fresh_value;
        it.fallback = choice.no_improvement;
        if (policy.allow_old_seeds) {
          it.full_value = choice.value;
        } else if (opts.audit_dominance) {
          it.full_value = optimize_kg_crn(eval, full_space, opts.acquisition, audit_rng).value;
        }
        entries.push_back(it);
      }

      if (entries.front().fallback) {
        // Nothing is expected to improve: sample a random point. Policies that
        // may reuse seeds stay on their most observed seed; the others, or a
        // seed with no unobserved point left, take a fresh one.
        std::mt19937_64 rng = engine_for(run_key, n, kFallbackPurpose);
        IterationRecord& it = entries.front();
        it.seed = full_space.fresh_seed;
        it.x = latin_hypercube(domain, 1, rng).front();
        if (policy.allow_old_seeds) {
          std::map<Seed, int> counts;
          for (Seed s : data.seeds()) ++counts[s];
          Seed busiest = full_space.fresh_seed;
          int most = 0;
          for (const auto& [s, c] : counts) {
            if (c > most) {
              most = c;
              busiest = s;
            }
          }
          for (int attempt = 0; attempt < kFallbackDraws; ++attempt) {
            const Point x = latin_hypercube(domain, 1, rng).front();
            if (!data.find(x, busiest)) {
              it.x = x;
              it.seed = busiest;
              break;
            }
          }
        }
        entries.resize(1);
        it.pair = false;
      }

      for (std::size_t k = 0; k < entries.size(); ++k) {
        IterationRecord& it = entries[k];
        if (k > 0) {
          // The second point of a pair: same hyperparameters, one more observation.
          const Posterior next = Posterior::fit(data, it.hp);
          recommendation_of(next, static_cast<std::uint64_t>(data.size()), it);
        }
        it.reused_seed = data.seed_observed(it.seed);
        it.y = sim.evaluate(it.x, it.seed);
        it.evaluated = true;
        data.add(it.x, it.seed, it.y);
      }
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      for (IterationRecord& it : entries) {
        it.wall_seconds = seconds / static_cast<double>(entries.size());
        rec.iterations.push_back(std::move(it));
      }
    }

    IterationRecord last;
    last.n = static_cast<int>(data.size());
    last.hp = fit_model(data, &last.log_ml);
    const Posterior post = Posterior::fit(data, last.hp);
    recommendation_of(post, data.size(), last);
    rec.final_recommendation = last.recommendation;
    rec.iterations.push_back(std::move(last));
  } catch (const std::exception& e) {
    rec.complete = false;
    rec.error = e.what();
  }
  return rec;
}

nlohmann::json to_json(const CrnHyperparams& hp) {
  return nlohmann::json{{"lengthscales", point_json(hp.lengthscales)},
                        {"target_variance", hp.target_variance},
                        {"offset_variance", hp.offset_variance},
                        {"bias_variance", hp.bias_variance},
                        {"white_variance", hp.white_variance},
                        {"prior_mean", hp.prior_mean}};
}

nlohmann::json to_json(const RunRecord& record, bool include_timing) {
  nlohmann::json j;
  j["policy"] = record.policy;
  j["benchmark"] = record.benchmark;
  j["run_key"] = record.run_key;
  j["n_init"] = record.n_init;
  j["budget"] = record.budget;
  j["complete"] = record.complete;
  if (!record.complete) j["error"] = record.error;
  nlohmann::json init = nlohmann::json::array();
  for (std::size_t i = 0; i < record.init_x.size(); ++i) {
    init.push_back({{"x", point_json(record.init_x[i])}, {"seed", record.init_seeds[i]}, {"y", record.init_y[i]}});
  }
  j["init"] = std::move(init);
  nlohmann::json its = nlohmann::json::array();
  for (const IterationRecord& it : record.iterations) {
    nlohmann::json e{{"n", it.n},
                     {"evaluated", it.evaluated},
                     {"recommendation", point_json(it.recommendation)},
                     {"recommendation_mean", it.recommendation_mean},
                     {"hyperparameters", to_json(it.hp)},
                     {"log_ml", it.log_ml}};
    if (it.evaluated) {
      e["x"] = point_json(it.x);
      e["seed"] = it.seed;
      e["y"] = it.y;
      e["reused_seed"] = it.reused_seed;
      e["pair"] = it.pair;
      e["fallback"] = it.fallback;
      e["acquisition_value"] = it.acquisition_value;
      e["fresh_value"] = it.fresh_value;
      if (it.full_value) e["full_value"] = *it.full_value;
    }
    if (include_timing) e["wall_seconds"] = it.wall_seconds;
    its.push_back(std::move(e));
  }
  j["iterations"] = std::move(its);
  j["final_recommendation"] = point_json(record.final_recommendation);
  return j;
}

}  // namespace crnbo
