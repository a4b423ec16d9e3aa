#include "itl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "itl/kernels.hpp"

namespace itl {

namespace {

std::string at(StateIndex s, ActionIndex a) {
    return "(" + std::to_string(s) + ", " + std::to_string(a) + ")";
}

void validate_distribution(std::span<const double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        if (!std::isfinite(p) || p < 0.0) throw ContractViolation(what + " has a negative or non-finite entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
        throw ContractViolation(what + " sums to " + std::to_string(sum) + ", not 1");
}

} // namespace

TransitionTensor::TransitionTensor(std::size_t n_states, std::size_t n_actions,
                                   std::vector<double> data)
    : n_states_(n_states), n_actions_(n_actions), data_(std::move(data)) {
    require(data_.size() == n_states_ * n_actions_ * n_states_,
            "transition data size does not match shape");
}

void validate_stochastic(const TransitionTensor& transitions) {
    for (StateIndex s = 0; s < transitions.n_states(); ++s)
        for (ActionIndex a = 0; a < transitions.n_actions(); ++a)
            validate_distribution(transitions.row(s, a), "transition row " + at(s, a));
}

TabularMdp::TabularMdp(TransitionTensor transitions, RewardTable rewards, double discount,
                       StateIndex terminal)
    : transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      discount_(discount),
      terminal_(terminal) {
    require(transitions_.n_states() > 0 && transitions_.n_actions() > 0, "empty MDP");
    require(rewards_.n_states() == transitions_.n_states() &&
                rewards_.n_actions() == transitions_.n_actions(),
            "reward table shape does not match transitions");
    require(discount_ > 0.0 && discount_ < 1.0, "discount must lie in (0, 1)");
    require(terminal_ < transitions_.n_states(), "terminal index out of range");
    validate_stochastic(transitions_);
    for (StateIndex s = 0; s < n_states(); ++s)
        for (ActionIndex a = 0; a < n_actions(); ++a)
            require(std::isfinite(rewards_(s, a)), "non-finite reward at " + at(s, a));
    for (ActionIndex a = 0; a < n_actions(); ++a) {
        require(transitions_(terminal_, a, terminal_) == 1.0, "terminal state is not absorbing");
        require(rewards_(terminal_, a) == 0.0, "terminal state has non-zero reward");
    }
}

TabularMdp TabularMdp::with_transitions(TransitionTensor transitions) const {
    return TabularMdp(std::move(transitions), rewards_, discount_, terminal_);
}

Policy::Policy(std::size_t n_states, std::size_t n_actions, std::vector<double> probs)
    : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
    require(probs_.size() == n_states_ * n_actions_, "policy data size does not match shape");
    for (StateIndex s = 0; s < n_states_; ++s)
        validate_distribution(row(s), "policy row " + std::to_string(s));
}

Policy Policy::deterministic(std::size_t n_actions, std::span<const ActionIndex> actions) {
    std::vector<double> probs(actions.size() * n_actions, 0.0);
    for (StateIndex s = 0; s < actions.size(); ++s) {
        require(actions[s] < n_actions, "action index out of range");
        probs[s * n_actions + actions[s]] = 1.0;
    }
    return Policy(actions.size(), n_actions, std::move(probs));
}

std::vector<ActionIndex> Policy::support(StateIndex s) const {
    std::vector<ActionIndex> out;
    for (ActionIndex a = 0; a < n_actions_; ++a)
        if ((*this)(s, a) > kSupportThreshold) out.push_back(a);
    return out;
}

std::vector<double> policy_transition_matrix(const TransitionTensor& transitions,
                                             const Policy& policy) {
    const std::size_t n = transitions.n_states();
    require(policy.n_states() == n && policy.n_actions() == transitions.n_actions(),
            "policy shape does not match MDP");
    std::vector<double> t_pi(n * n, 0.0);
    for (StateIndex s = 0; s < n; ++s) {
        for (ActionIndex a = 0; a < transitions.n_actions(); ++a) {
            const double w = policy(s, a);
            if (w == 0.0) continue;
            const auto row = transitions.row(s, a);
            for (StateIndex next = 0; next < n; ++next) t_pi[s * n + next] += w * row[next];
        }
    }
    return t_pi;
}

std::vector<double> policy_rewards(const RewardTable& rewards, const Policy& policy) {
    require(policy.n_states() == rewards.n_states() && policy.n_actions() == rewards.n_actions(),
            "policy shape does not match MDP");
    std::vector<double> r_pi(rewards.n_states(), 0.0);
    for (StateIndex s = 0; s < rewards.n_states(); ++s)
        for (ActionIndex a = 0; a < rewards.n_actions(); ++a) r_pi[s] += policy(s, a) * rewards(s, a);
    return r_pi;
}

ValueTable solve_policy_values(std::span<const double> t_pi, std::span<const double> r_pi,
                               double discount) {
    const auto n = static_cast<Eigen::Index>(r_pi.size());
    require(t_pi.size() == r_pi.size() * r_pi.size(), "T_pi must be n x n");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> t(t_pi.data(), n, n);
    Eigen::Map<const Eigen::VectorXd> r(r_pi.data(), n);
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - discount * t;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd v = lu.solve(r);
    // one refinement step keeps the residual well under 1e-10 for |V| ~ 1e3
    const Eigen::VectorXd residual = r - system * v;
    v += lu.solve(residual);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(v[i])) throw Error("closed-form policy evaluation produced non-finite values");
    return ValueTable{std::vector<double>(v.data(), v.data() + n)};
}

ValueTable evaluate_policy_closed_form(const TabularMdp& mdp, const Policy& policy) {
    const auto t_pi = policy_transition_matrix(mdp.transitions(), policy);
    const auto r_pi = policy_rewards(mdp.rewards(), policy);
    return solve_policy_values(t_pi, r_pi, mdp.discount());
}

QTable q_from_v(const TabularMdp& mdp, const ValueTable& v) {
    require(v.size() == mdp.n_states(), "value table size does not match MDP");
    QTable q(mdp.n_states(), mdp.n_actions());
    kernels::bellman_backup_serial(mdp, v.values, q);
    return q;
}

std::vector<ActionIndex> greedy_actions(const QTable& q) {
    std::vector<ActionIndex> actions(q.n_states(), 0);
    for (StateIndex s = 0; s < q.n_states(); ++s) {
        const auto row = q.row(s);
        actions[s] = static_cast<ActionIndex>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return actions;
}

namespace {

double bellman_residual(const QTable& q, std::span<const double> v, std::vector<double>* next) {
    double residual = 0.0;
    for (StateIndex s = 0; s < q.n_states(); ++s) {
        const auto row = q.row(s);
        const double best = *std::max_element(row.begin(), row.end());
        residual = std::max(residual, std::abs(best - v[s]));
        if (next) (*next)[s] = best;
    }
    return residual;
}

} // namespace

PlanResult value_iteration(const TabularMdp& mdp, const ValueIterationOptions& options) {
    require(options.tol > 0.0, "value iteration tolerance must be positive");
    const std::size_t n = mdp.n_states();
    std::vector<double> v(n, 0.0);
    std::vector<double> next(n, 0.0);
    QTable q(n, mdp.n_actions());
    const auto backup = options.parallel ? kernels::bellman_backup_parallel
                                         : kernels::bellman_backup_serial;

    double residual = 0.0;
    long iter = 0;
    for (;;) {
        backup(mdp, v, q);
        residual = bellman_residual(q, v, &next);
        if (residual <= options.tol) break;
        if (iter >= options.max_iters)
            throw ConvergenceError("value iteration did not converge in " +
                                       std::to_string(options.max_iters) + " iterations (residual " +
                                       std::to_string(residual) + ")",
                                   residual);
        v.swap(next);
        ++iter;
    }

    // Polish: evaluate the greedy policy exactly. Keep it only when it is at
    // least as good a fixed point as the iterate.
    Policy greedy = Policy::deterministic(mdp.n_actions(), greedy_actions(q));
    ValueTable exact = evaluate_policy_closed_form(mdp, greedy);
    QTable q_exact(n, mdp.n_actions());
    backup(mdp, exact.values, q_exact);
    const double exact_residual = bellman_residual(q_exact, exact.values, nullptr);
    if (exact_residual <= residual) {
        Policy polished = Policy::deterministic(mdp.n_actions(), greedy_actions(q_exact));
        return PlanResult{std::move(exact), std::move(q_exact), std::move(polished), exact_residual, iter};
    }
    return PlanResult{ValueTable{v}, std::move(q), std::move(greedy), residual, iter};
}

EpsilonBallMap epsilon_ball(const QTable& q, double epsilon) {
    require(epsilon >= 0.0, "epsilon must be non-negative");
    EpsilonBallMap out;
    out.epsilon = epsilon;
    out.n_actions = q.n_actions();
    out.balls.resize(q.n_states());
    for (StateIndex s = 0; s < q.n_states(); ++s) {
        const auto row = q.row(s);
        const double best = *std::max_element(row.begin(), row.end());
        for (ActionIndex a = 0; a < q.n_actions(); ++a)
            if (best - row[a] <= epsilon + kBallSlack) out.balls[s].push_back(a);
    }
    return out;
}

Policy build_expert_policy(const EpsilonBallMap& balls) {
    const std::size_t n_actions = balls.n_actions;
    require(!balls.balls.empty(), "empty ball map");
    std::vector<double> probs(balls.balls.size() * n_actions, 0.0);
    for (StateIndex s = 0; s < balls.balls.size(); ++s) {
        const auto& ball = balls.balls[s];
        require(!ball.empty(), "every epsilon-ball must be non-empty");
        const double w = 1.0 / static_cast<double>(ball.size());
        for (ActionIndex a : ball) {
            require(a < n_actions, "ball action out of range");
            probs[s * n_actions + a] = w;
        }
    }
    return Policy(balls.balls.size(), n_actions, std::move(probs));
}

std::map<StateIndex, StateKind> classify_states(const Policy& policy, StateIndex terminal) {
    std::map<StateIndex, StateKind> out;
    for (StateIndex s = 0; s < policy.n_states(); ++s) {
        if (s == terminal) continue;
        out[s] = policy.support(s).size() == 1 ? StateKind::Deterministic : StateKind::Stochastic;
    }
    return out;
}

} // namespace itl
