#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itl/env_gen.hpp"
#include "itl/itl_sampler.hpp"
#include "itl/mdp.hpp"

namespace itl {

enum class Method {
    Posterior,   ///< plan on unconstrained posterior draws
    Mle,         ///< plan on the posterior mean
    Constrained, ///< plan on expert-constrained posterior draws
};

std::string to_string(Method method);
Method parse_method(const std::string& text);

struct MeanPolicy {
    Policy policy;
    QTable q;
};

/// Plans on every sample and averages the greedy one-hot policies and the
/// optimal Q-tables.
MeanPolicy mean_policy(std::span<const TransitionTensor> samples, const RewardTable& rewards,
                       double discount, StateIndex terminal);

/// The true environment together with its optimal plan, computed once.
class TrueEnvOracle {
public:
    explicit TrueEnvOracle(TabularMdp mdp);

    const TabularMdp& mdp() const noexcept { return mdp_; }
    const QTable& q_star() const noexcept { return plan_.q; }
    const std::vector<ActionIndex>& best_actions() const noexcept { return best_; }

    /// Expert uniform over the true ε-balls (built from Q*).
    Policy expert(double epsilon) const;

private:
    TabularMdp mdp_;
    PlanResult plan_;
    std::vector<ActionIndex> best_;
};

/// Σ_s (max_a Q*(s,a) - Σ_a π̂(a|s) Q*(s,a)) over decision states.
double q_star_metric(const TrueEnvOracle& oracle, const Policy& pi_hat);
double q_star_metric(const TabularMdp& true_mdp, const Policy& pi_hat);

/// Percentages; empty when the denominator is zero.
struct AccuracyMetrics {
    std::optional<double> deterministic;
    std::optional<double> stochastic;
    std::optional<double> ball_membership;
};

/// The chosen action at s is the lowest-index argmax of π̂(·|s).
AccuracyMetrics accuracy_metrics(const TrueEnvOracle& oracle, const Policy& expert,
                                 const Policy& pi_hat, double epsilon);

/// Lowest-index argmax of every row.
std::vector<ActionIndex> chosen_actions(const Policy& pi_hat);

/// Either a path to an MDP document or a generator spec plus structure targets.
struct EnvSource {
    std::optional<std::string> path;
    EnvSpec spec;
    std::map<double, int> targets;
    int max_tries = 1000;
};

TabularMdp resolve_env(const EnvSource& source);

struct ExperimentConfig {
    EnvSource env;
    std::vector<double> epsilons{0.0, 3.0, 4.0};
    std::vector<int> episode_counts{15, 300};
    int n_datasets = 1000;
    int n_posterior_samples = 1000;
    int horizon = 20;
    std::uint64_t master_seed = 0;
    std::vector<Method> methods{Method::Posterior, Method::Mle, Method::Constrained};
    AnchorMode anchor = AnchorMode::Mle;
    SamplerOptions sampler;
    /// The run fails when more than this fraction of datasets is flagged.
    double max_flagged_fraction = 0.01;

    /// Throws ContractViolation on empty lists or non-positive counts.
    void validate() const;
};

struct MetricSummary {
    std::optional<double> mean;
    std::optional<double> std; ///< population standard deviation
    int count = 0;
};

/// Mean and population std of the finite entries of `values`.
MetricSummary summarize(std::span<const double> values);

struct DatasetResult {
    AccuracyMetrics accuracy;
    double q_star_metric = 0.0;
    bool flagged = false;
    std::string error;
};

struct MethodReport {
    std::string name; ///< "posterior", "mle", "constrained" or "expert"
    std::vector<DatasetResult> datasets;
    MetricSummary deterministic;
    MetricSummary stochastic;
    MetricSummary ball_membership;
    MetricSummary q_star_metric;

    /// Q*-metric of every non-flagged dataset, in dataset order.
    std::vector<double> q_star_values() const;
    int flagged() const;
};

struct CellReport {
    double epsilon = 0.0;
    int episodes = 0;
    int stochastic_states = 0;
    std::vector<MethodReport> methods;

    const MethodReport& method(const std::string& name) const;
};

struct MetricsReport {
    std::vector<CellReport> cells;
    std::string env_hash;
    int flagged_datasets = 0;
    int total_datasets = 0;

    bool flagged_overflow(double max_fraction) const;
    const CellReport& cell(double epsilon, int episodes) const;
};

/// Seed of dataset `index` (counted across all cells in config order).
std::uint64_t dataset_seed(std::uint64_t master_seed, std::size_t index);

/// Runs every (ε, K) cell over n_datasets datasets. Datasets are processed
/// on up to `jobs` OpenMP threads; results do not depend on `jobs`.
MetricsReport run_experiment(const ExperimentConfig& config, const TabularMdp& true_mdp, int jobs = 1);

MetricsReport run_experiment(const ExperimentConfig& config, int jobs = 1);

} // namespace itl
