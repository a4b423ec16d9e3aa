#include "itl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itl/data.hpp"
#include "itl/kernels.hpp"
#include "itl/posterior.hpp"
#include "itl/serialization.hpp"

namespace itl {

std::string to_string(Method method) {
    switch (method) {
    case Method::Posterior: return "posterior";
    case Method::Mle: return "mle";
    case Method::Constrained: return "constrained";
    }
    return "unknown";
}

Method parse_method(const std::string& text) {
    if (text == "posterior") return Method::Posterior;
    if (text == "mle") return Method::Mle;
    if (text == "constrained") return Method::Constrained;
    throw ContractViolation("unknown method '" + text + "' (expected posterior, mle or constrained)");
}

namespace {

/// Running average of greedy one-hot policies and optimal Q-tables.
class MeanPolicyAccumulator {
public:
    MeanPolicyAccumulator(std::size_t n_states, std::size_t n_actions)
        : counts_(n_states * n_actions, 0), q_sum_(n_states, n_actions) {}

    void add(const TabularMdp& mdp) {
        const PlanResult plan = value_iteration(mdp);
        const auto actions = greedy_actions(plan.q);
        for (StateIndex s = 0; s < actions.size(); ++s) ++counts_[s * q_sum_.n_actions() + actions[s]];
        for (StateIndex s = 0; s < q_sum_.n_states(); ++s)
            for (ActionIndex a = 0; a < q_sum_.n_actions(); ++a) q_sum_(s, a) += plan.q(s, a);
        ++n_;
    }

    MeanPolicy finish() const {
        require(n_ > 0, "mean_policy needs at least one sample");
        const double n = static_cast<double>(n_);
        std::vector<double> probs(counts_.size());
        for (std::size_t i = 0; i < counts_.size(); ++i) probs[i] = static_cast<double>(counts_[i]) / n;
        QTable q(q_sum_.n_states(), q_sum_.n_actions());
        for (StateIndex s = 0; s < q.n_states(); ++s)
            for (ActionIndex a = 0; a < q.n_actions(); ++a) q(s, a) = q_sum_(s, a) / n;
        return MeanPolicy{Policy(q.n_states(), q.n_actions(), std::move(probs)), std::move(q)};
    }

private:
    std::vector<long> counts_;
    QTable q_sum_;
    long n_ = 0;
};

} // namespace

MeanPolicy mean_policy(std::span<const TransitionTensor> samples, const RewardTable& rewards,
                       double discount, StateIndex terminal) {
    require(!samples.empty(), "mean_policy needs at least one sample");
    MeanPolicyAccumulator acc(rewards.n_states(), rewards.n_actions());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        try {
            acc.add(TabularMdp(samples[i], rewards, discount, terminal));
        } catch (const Error& e) {
            throw Error("planning on sample " + std::to_string(i) + " failed: " + e.what());
        }
    }
    return acc.finish();
}

TrueEnvOracle::TrueEnvOracle(TabularMdp mdp)
    : mdp_(std::move(mdp)), plan_(value_iteration(mdp_)), best_(greedy_actions(plan_.q)) {}

Policy TrueEnvOracle::expert(double epsilon) const {
    return build_expert_policy(epsilon_ball(plan_.q, epsilon));
}

double q_star_metric(const TrueEnvOracle& oracle, const Policy& pi_hat) {
    const auto& mdp = oracle.mdp();
    require(pi_hat.n_states() == mdp.n_states() && pi_hat.n_actions() == mdp.n_actions(),
            "policy shape does not match MDP");
    const QTable& q = oracle.q_star();
    double total = 0.0;
    for (StateIndex s = 0; s < mdp.n_states(); ++s) {
        if (s == mdp.terminal()) continue;
        double expected = 0.0;
        for (ActionIndex a = 0; a < mdp.n_actions(); ++a) expected += pi_hat(s, a) * q(s, a);
        total += q(s, oracle.best_actions()[s]) - expected;
    }
    return total;
}

double q_star_metric(const TabularMdp& true_mdp, const Policy& pi_hat) {
    return q_star_metric(TrueEnvOracle(true_mdp), pi_hat);
}

std::vector<ActionIndex> chosen_actions(const Policy& pi_hat) {
    std::vector<ActionIndex> out(pi_hat.n_states());
    for (StateIndex s = 0; s < pi_hat.n_states(); ++s) {
        const auto row = pi_hat.row(s);
        out[s] = static_cast<ActionIndex>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

AccuracyMetrics accuracy_metrics(const TrueEnvOracle& oracle, const Policy& expert,
                                 const Policy& pi_hat, double epsilon) {
    const auto& mdp = oracle.mdp();
    require(expert.n_states() == mdp.n_states() && pi_hat.n_states() == mdp.n_states() &&
                expert.n_actions() == mdp.n_actions() && pi_hat.n_actions() == mdp.n_actions(),
            "policy shape does not match MDP");
    const auto chosen = chosen_actions(pi_hat);
    const auto& best = oracle.best_actions();
    const EpsilonBallMap balls = epsilon_ball(oracle.q_star(), epsilon);

    int det_total = 0, det_hit = 0, stoch_total = 0, stoch_hit = 0, mistakes = 0, mistakes_in_ball = 0;
    for (StateIndex s = 0; s < mdp.n_states(); ++s) {
        if (s == mdp.terminal()) continue;
        const auto support = expert.support(s);
        if (support.size() == 1) {
            ++det_total;
            det_hit += chosen[s] == support.front();
        } else {
            ++stoch_total;
            stoch_hit += chosen[s] == best[s];
        }
        if (chosen[s] != best[s]) {
            ++mistakes;
            const auto& ball = balls.balls[s];
            mistakes_in_ball += std::find(ball.begin(), ball.end(), chosen[s]) != ball.end();
        }
    }
    auto pct = [](int hit, int total) -> std::optional<double> {
        if (total == 0) return std::nullopt;
        return 100.0 * hit / total;
    };
    return AccuracyMetrics{pct(det_hit, det_total), pct(stoch_hit, stoch_total),
                           pct(mistakes_in_ball, mistakes)};
}

TabularMdp resolve_env(const EnvSource& source) {
    if (source.path) return load_mdp(*source.path);
    if (source.targets.empty()) return generate_env(source.spec);
    return find_env_with_structure(source.spec, source.targets, source.max_tries).mdp;
}

void ExperimentConfig::validate() const {
    require(!epsilons.empty(), "config: epsilons must not be empty");
    require(!episode_counts.empty(), "config: episode_counts must not be empty");
    require(!methods.empty(), "config: method list must not be empty");
    for (double e : epsilons) require(e >= 0.0, "config: epsilons must be non-negative");
    for (int k : episode_counts) require(k >= 1, "config: episode counts must be positive");
    require(n_datasets >= 1, "config: n_datasets must be positive");
    require(n_posterior_samples >= 1, "config: n_posterior_samples must be positive");
    require(horizon >= 1, "config: horizon must be positive");
    require(max_flagged_fraction >= 0.0, "config: max_flagged_fraction must be non-negative");
    require(sampler.limits.max_row_draws >= 1 && sampler.limits.max_outer_rounds >= 1,
            "config: sampler limits must be positive");
}

MetricSummary summarize(std::span<const double> values) {
    MetricSummary out;
    double sum = 0.0;
    for (double v : values)
        if (std::isfinite(v)) {
            sum += v;
            ++out.count;
        }
    if (out.count == 0) return out;
    const double mean = sum / out.count;
    double sq = 0.0;
    for (double v : values)
        if (std::isfinite(v)) sq += (v - mean) * (v - mean);
    out.mean = mean;
    out.std = std::sqrt(sq / out.count);
    return out;
}

std::vector<double> MethodReport::q_star_values() const {
    std::vector<double> out;
    for (const auto& d : datasets)
        if (!d.flagged) out.push_back(d.q_star_metric);
    return out;
}

int MethodReport::flagged() const {
    return static_cast<int>(std::count_if(datasets.begin(), datasets.end(),
                                          [](const DatasetResult& d) { return d.flagged; }));
}

const MethodReport& CellReport::method(const std::string& name) const {
    for (const auto& m : methods)
        if (m.name == name) return m;
    throw ContractViolation("no method '" + name + "' in cell");
}

bool MetricsReport::flagged_overflow(double max_fraction) const {
    return total_datasets > 0 &&
           static_cast<double>(flagged_datasets) > max_fraction * static_cast<double>(total_datasets);
}

const CellReport& MetricsReport::cell(double epsilon, int episodes) const {
    for (const auto& c : cells)
        if (c.epsilon == epsilon && c.episodes == episodes) return c;
    throw ContractViolation("no cell for epsilon " + std::to_string(epsilon) + ", K " +
                            std::to_string(episodes));
}

std::uint64_t dataset_seed(std::uint64_t master_seed, std::size_t index) {
    return derive_seed(master_seed, index);
}

namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

struct CellSetup {
    double epsilon;
    int episodes;
    Policy expert;
};

DatasetResult score(const TrueEnvOracle& oracle, const Policy& expert, const Policy& pi_hat,
                    double epsilon) {
    DatasetResult r;
    r.accuracy = accuracy_metrics(oracle, expert, pi_hat, epsilon);
    r.q_star_metric = q_star_metric(oracle, pi_hat);
    return r;
}

DatasetResult run_method(Method method, const ExperimentConfig& config, const TrueEnvOracle& oracle,
                         const CellSetup& cell, const DirichletPosterior& post, std::uint64_t seed) {
    const TabularMdp& mdp = oracle.mdp();
    switch (method) {
    case Method::Mle: {
        const PlanResult plan = value_iteration(mdp.with_transitions(posterior_mean(post)));
        return score(oracle, cell.expert, plan.greedy, cell.epsilon);
    }
    case Method::Posterior: {
        Rng rng(derive_seed(seed, 0));
        MeanPolicyAccumulator acc(mdp.n_states(), mdp.n_actions());
        for (int n = 0; n < config.n_posterior_samples; ++n)
            acc.add(mdp.with_transitions(sample_full(post, rng)));
        return score(oracle, cell.expert, acc.finish().policy, cell.epsilon);
    }
    case Method::Constrained: {
        Rng rng(derive_seed(seed, 1));
        try {
            const ConstraintContext ctx = build_context(post, cell.expert, mdp.rewards(), mdp.discount(),
                                                        cell.epsilon, config.anchor, rng);
            const ItlSampleSet set =
                sample_constrained(post, ctx, config.n_posterior_samples, config.sampler, rng);
            const MeanPolicy mean = mean_policy(set.samples, mdp.rewards(), mdp.discount(), mdp.terminal());
            return score(oracle, cell.expert, mean.policy, cell.epsilon);
        } catch (const Error& e) {
            DatasetResult r;
            r.flagged = true;
            r.error = e.what();
            r.q_star_metric = kUndefined;
            return r;
        }
    }
    }
    throw ContractViolation("unhandled method");
}

MetricSummary summarize_optional(const std::vector<DatasetResult>& rows,
                                 std::optional<double> AccuracyMetrics::*field) {
    std::vector<double> values;
    for (const auto& r : rows)
        if (!r.flagged) values.push_back((r.accuracy.*field).value_or(kUndefined));
    return summarize(values);
}

void finalize(MethodReport& report) {
    report.deterministic = summarize_optional(report.datasets, &AccuracyMetrics::deterministic);
    report.stochastic = summarize_optional(report.datasets, &AccuracyMetrics::stochastic);
    report.ball_membership = summarize_optional(report.datasets, &AccuracyMetrics::ball_membership);
    const auto q = report.q_star_values();
    report.q_star_metric = summarize(q);
}

} // namespace

MetricsReport run_experiment(const ExperimentConfig& config, const TabularMdp& true_mdp, int jobs) {
    config.validate();
    const TrueEnvOracle oracle(true_mdp);

    std::vector<CellSetup> cells;
    MetricsReport report;
    report.env_hash = env_hash(true_mdp);
    for (double eps : config.epsilons) {
        Policy expert = oracle.expert(eps);
        int stochastic = 0;
        for (const auto& [s, kind] : classify_states(expert, true_mdp.terminal()))
            stochastic += kind == StateKind::Stochastic;
        for (int k : config.episode_counts) {
            cells.push_back(CellSetup{eps, k, expert});
            CellReport cell;
            cell.epsilon = eps;
            cell.episodes = k;
            cell.stochastic_states = stochastic;
            for (Method m : config.methods) cell.methods.push_back(MethodReport{to_string(m), {}, {}, {}, {}, {}});
            cell.methods.push_back(MethodReport{"expert", {}, {}, {}, {}, {}});
            for (auto& m : cell.methods) m.datasets.resize(static_cast<std::size_t>(config.n_datasets));
            report.cells.push_back(std::move(cell));
        }
    }

    const std::size_t n_datasets = static_cast<std::size_t>(config.n_datasets);
    const std::size_t total = cells.size() * n_datasets;
    kernels::for_each_index(total, jobs, [&](std::size_t item) {
        const std::size_t c = item / n_datasets;
        const std::size_t i = item % n_datasets;
        const CellSetup& cell = cells[c];
        const std::uint64_t seed = dataset_seed(config.master_seed, item);
        const TrajectoryBatch batch = rollout_batch(true_mdp, cell.expert, cell.episodes, config.horizon, seed);
        const DirichletPosterior post = fit_posterior(batch);
        CellReport& out = report.cells[c];
        for (std::size_t m = 0; m < config.methods.size(); ++m)
            out.methods[m].datasets[i] = run_method(config.methods[m], config, oracle, cell, post, seed);
        out.methods.back().datasets[i] = score(oracle, cell.expert, cell.expert, cell.epsilon);
    });

    for (auto& cell : report.cells) {
        for (auto& m : cell.methods) finalize(m);
    }
    for (std::size_t i = 0; i < total; ++i) {
        const auto& cell = report.cells[i / n_datasets];
        const bool flagged = std::any_of(cell.methods.begin(), cell.methods.end(), [&](const MethodReport& m) {
            return m.datasets[i % n_datasets].flagged;
        });
        report.flagged_datasets += flagged;
    }
    report.total_datasets = static_cast<int>(total);
    return report;
}

MetricsReport run_experiment(const ExperimentConfig& config, int jobs) {
    config.validate();
    return run_experiment(config, resolve_env(config.env), jobs);
}

} // namespace itl
