#include "itl/env_gen.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "itl/random.hpp"

namespace itl {

void EnvSpec::validate() const {
    require(n_decision_states >= 2, "need at least 2 decision states");
    require(n_actions >= 2, "need at least 2 actions");
    require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
    require(skew_mix >= 0.0 && skew_mix <= 1.0, "skew_mix must be a probability");
    require(skew_concentration > 0.0 && flat_concentration > 0.0,
            "Dirichlet concentrations must be positive");
    require(reward_low < effective_reward_high(), "reward_low must be below reward_high");
}

TabularMdp generate_env(const EnvSpec& spec) {
    spec.validate();
    const std::size_t n_states = spec.n_decision_states + 1;
    const StateIndex terminal = spec.n_decision_states;
    const std::size_t n_actions = spec.n_actions;
    Rng rng(spec.seed);

    TransitionTensor transitions(n_states, n_actions);
    std::bernoulli_distribution skewed(spec.skew_mix);
    const std::vector<double> skew_alpha(n_states, spec.skew_concentration);
    const std::vector<double> flat_alpha(n_states, spec.flat_concentration);
    for (StateIndex s = 0; s < spec.n_decision_states; ++s) {
        for (ActionIndex a = 0; a < n_actions; ++a) {
            const auto& alpha = skewed(rng) ? skew_alpha : flat_alpha;
            sample_dirichlet(alpha, rng, transitions.row(s, a));
        }
    }
    for (ActionIndex a = 0; a < n_actions; ++a) transitions(terminal, a, terminal) = 1.0;

    RewardTable rewards(n_states, n_actions);
    std::uniform_real_distribution<double> reward(spec.reward_low, spec.effective_reward_high());
    if (spec.reward_dependence == RewardDependence::StateAction) {
        for (StateIndex s = 0; s < spec.n_decision_states; ++s)
            for (ActionIndex a = 0; a < n_actions; ++a) rewards(s, a) = reward(rng);
    } else {
        std::vector<double> per_action(n_actions);
        for (double& r : per_action) r = reward(rng);
        for (StateIndex s = 0; s < spec.n_decision_states; ++s)
            for (ActionIndex a = 0; a < n_actions; ++a) rewards(s, a) = per_action[a];
    }
    return TabularMdp(std::move(transitions), std::move(rewards), spec.discount, terminal);
}

EnvDescription describe_env(const TabularMdp& mdp, const std::vector<double>& epsilons) {
    require(!epsilons.empty(), "describe_env needs at least one epsilon");
    const PlanResult plan = value_iteration(mdp);
    EnvDescription out;
    const auto& q = plan.q.data();
    out.q_star_range = {*std::min_element(q.begin(), q.end()), *std::max_element(q.begin(), q.end())};
    for (double eps : epsilons) {
        require(eps >= 0.0, "epsilon must be non-negative");
        const EpsilonBallMap balls = epsilon_ball(plan.q, eps);
        int stochastic = 0;
        for (StateIndex s = 0; s < mdp.n_states(); ++s)
            if (s != mdp.terminal() && balls.balls[s].size() > 1) ++stochastic;
        out.epsilon_to_stochastic_count[eps] = stochastic;
    }
    return out;
}

StructureSearchResult find_env_with_structure(const EnvSpec& spec,
                                              const std::map<double, int>& targets,
                                              int max_tries) {
    require(max_tries >= 1, "max_tries must be at least 1");
    require(!targets.empty(), "no structure targets given");
    std::vector<double> epsilons;
    for (const auto& [eps, count] : targets) epsilons.push_back(eps);

    std::uint64_t best_seed = spec.seed;
    std::map<double, int> best_counts;
    long best_distance = std::numeric_limits<long>::max();
    EnvSpec trial = spec;
    for (int t = 0; t < max_tries; ++t) {
        trial.seed = spec.seed + static_cast<std::uint64_t>(t);
        TabularMdp mdp = generate_env(trial);
        const EnvDescription desc = describe_env(mdp, epsilons);
        long distance = 0;
        for (const auto& [eps, count] : targets)
            distance += std::labs(static_cast<long>(desc.epsilon_to_stochastic_count.at(eps)) - count);
        if (distance == 0) return StructureSearchResult{std::move(mdp), trial.seed, t + 1};
        if (distance < best_distance) {
            best_distance = distance;
            best_seed = trial.seed;
            best_counts = desc.epsilon_to_stochastic_count;
        }
    }
    std::ostringstream msg;
    msg << "no environment matched the structure targets in " << max_tries
        << " tries; closest was seed " << best_seed << " with counts {";
    bool first = true;
    for (const auto& [eps, count] : best_counts) {
        msg << (first ? "" : ", ") << eps << ": " << count;
        first = false;
    }
    msg << "}";
    throw StructureSearchError(msg.str(), best_seed, best_counts);
}

TabularMdp reference_env() {
    EnvSpec spec;
    spec.seed = kReferenceEnvSeed;
    return generate_env(spec);
}

} // namespace itl
