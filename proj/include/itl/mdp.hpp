#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "itl/errors.hpp"

namespace itl {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// Dense (state, action) table of reals. The tag keeps rewards, Q-values and
/// policy probabilities from being mixed up at call sites.
template <class Tag>
class StateActionTable {
public:
    StateActionTable() = default;
    StateActionTable(std::size_t n_states, std::size_t n_actions, double fill = 0.0)
        : n_states_(n_states), n_actions_(n_actions), data_(n_states * n_actions, fill) {}
    StateActionTable(std::size_t n_states, std::size_t n_actions, std::vector<double> data)
        : n_states_(n_states), n_actions_(n_actions), data_(std::move(data)) {
        require(data_.size() == n_states_ * n_actions_, "table data size does not match shape");
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    double operator()(StateIndex s, ActionIndex a) const { return data_[s * n_actions_ + a]; }
    double& operator()(StateIndex s, ActionIndex a) { return data_[s * n_actions_ + a]; }

    std::span<const double> row(StateIndex s) const {
        return {data_.data() + s * n_actions_, n_actions_};
    }
    std::span<double> row(StateIndex s) { return {data_.data() + s * n_actions_, n_actions_}; }

    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const StateActionTable&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<double> data_;
};

struct RewardTag {};
struct QTag {};
using RewardTable = StateActionTable<RewardTag>;
using QTable = StateActionTable<QTag>;

/// Transition probabilities indexed (s, a, s'), stored row-major.
class TransitionTensor {
public:
    TransitionTensor() = default;
    TransitionTensor(std::size_t n_states, std::size_t n_actions)
        : n_states_(n_states), n_actions_(n_actions), data_(n_states * n_actions * n_states, 0.0) {}
    TransitionTensor(std::size_t n_states, std::size_t n_actions, std::vector<double> data);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    double operator()(StateIndex s, ActionIndex a, StateIndex next) const {
        return data_[(s * n_actions_ + a) * n_states_ + next];
    }
    double& operator()(StateIndex s, ActionIndex a, StateIndex next) {
        return data_[(s * n_actions_ + a) * n_states_ + next];
    }

    std::span<const double> row(StateIndex s, ActionIndex a) const {
        return {data_.data() + (s * n_actions_ + a) * n_states_, n_states_};
    }
    std::span<double> row(StateIndex s, ActionIndex a) {
        return {data_.data() + (s * n_actions_ + a) * n_states_, n_states_};
    }

    const std::vector<double>& data() const noexcept { return data_; }

    bool operator==(const TransitionTensor&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<double> data_;
};

/// Tolerance for row sums of transition rows and policy rows.
inline constexpr double kRowSumTolerance = 1e-12;

/// Throws ContractViolation unless every (s, a) row is a probability vector.
void validate_stochastic(const TransitionTensor& transitions);

/// A finite MDP with one absorbing, zero-reward terminal state. The
/// constructor checks every invariant, so a TabularMdp is always valid.
class TabularMdp {
public:
    TabularMdp(TransitionTensor transitions, RewardTable rewards, double discount,
               StateIndex terminal);

    std::size_t n_states() const noexcept { return transitions_.n_states(); }
    std::size_t n_actions() const noexcept { return transitions_.n_actions(); }
    double discount() const noexcept { return discount_; }
    StateIndex terminal() const noexcept { return terminal_; }
    const TransitionTensor& transitions() const noexcept { return transitions_; }
    const RewardTable& rewards() const noexcept { return rewards_; }

    /// Same rewards, discount and terminal; different dynamics.
    TabularMdp with_transitions(TransitionTensor transitions) const;

    bool operator==(const TabularMdp&) const = default;

private:
    TransitionTensor transitions_;
    RewardTable rewards_;
    double discount_;
    StateIndex terminal_;
};

/// Row-stochastic state -> action distribution.
class Policy {
public:
    Policy() = default;
    Policy(std::size_t n_states, std::size_t n_actions, std::vector<double> probs);

    /// One-hot policy taking `actions[s]` in state s.
    static Policy deterministic(std::size_t n_actions, std::span<const ActionIndex> actions);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double operator()(StateIndex s, ActionIndex a) const { return probs_[s * n_actions_ + a]; }
    std::span<const double> row(StateIndex s) const {
        return {probs_.data() + s * n_actions_, n_actions_};
    }
    const std::vector<double>& data() const noexcept { return probs_; }

    /// Actions with positive probability in state s.
    std::vector<ActionIndex> support(StateIndex s) const;

    bool operator==(const Policy&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<double> probs_;
};

struct ValueTable {
    std::vector<double> values;

    double operator[](StateIndex s) const { return values[s]; }
    double& operator[](StateIndex s) { return values[s]; }
    std::size_t size() const noexcept { return values.size(); }
};

/// ε-ball per state: the actions whose Q-value is within ε of the row max.
struct EpsilonBallMap {
    std::vector<std::vector<ActionIndex>> balls;
    double epsilon = 0.0;
    std::size_t n_actions = 0;
};

enum class StateKind { Deterministic, Stochastic };

/// Slack added to ε when testing ball membership.
inline constexpr double kBallSlack = 1e-9;

/// Probability threshold above which an action counts as supported.
inline constexpr double kSupportThreshold = 1e-12;

/// T_π(s, s') = Σ_a π(a|s) T(s, a, s'), returned as a dense row-major n×n matrix.
std::vector<double> policy_transition_matrix(const TransitionTensor& transitions,
                                             const Policy& policy);

/// R_π(s) = Σ_a π(a|s) R(s, a).
std::vector<double> policy_rewards(const RewardTable& rewards, const Policy& policy);

/// Solves (I - γ T_π) V = R_π with an LU factorisation.
ValueTable evaluate_policy_closed_form(const TabularMdp& mdp, const Policy& policy);

/// Lower-level form of the above for a precomputed T_π / R_π pair.
ValueTable solve_policy_values(std::span<const double> t_pi, std::span<const double> r_pi,
                               double discount);

/// q(s,a) = R(s,a) + γ Σ_{s'} T(s,a,s') v(s').
QTable q_from_v(const TabularMdp& mdp, const ValueTable& v);

struct ValueIterationOptions {
    double tol = 1e-10;
    long max_iters = 100000;
    /// Run the Bellman backup through the OpenMP kernel.
    bool parallel = false;
};

struct PlanResult {
    ValueTable v;
    QTable q;
    Policy greedy;
    double residual = 0.0;
    long iterations = 0;
};

/// Optimal values and a greedy deterministic policy (ties -> lowest action).
/// Throws ConvergenceError if the sup-norm Bellman residual stays above tol.
PlanResult value_iteration(const TabularMdp& mdp, const ValueIterationOptions& options = {});

/// Lowest-index argmax of each row.
std::vector<ActionIndex> greedy_actions(const QTable& q);

EpsilonBallMap epsilon_ball(const QTable& q, double epsilon);

/// Uniform over each ball.
Policy build_expert_policy(const EpsilonBallMap& balls);

/// Deterministic iff exactly one action has positive probability. The
/// terminal state is omitted from the result.
std::map<StateIndex, StateKind> classify_states(const Policy& policy, StateIndex terminal);

} // namespace itl
