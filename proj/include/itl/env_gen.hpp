#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "itl/mdp.hpp"

namespace itl {

enum class RewardDependence {
    StateAction, ///< one independent draw per (s, a)
    ActionOnly,  ///< one draw per action, shared by all decision states
};

/// Parameters of the random environment family. Decision states are
/// 0..n_decision_states-1; the terminal state is index n_decision_states.
struct EnvSpec {
    std::size_t n_decision_states = 15;
    std::size_t n_actions = 6;
    double discount = 0.95;
    /// Probability that a transition row is drawn from the skewed Dirichlet.
    double skew_mix = 0.5;
    double skew_concentration = 0.3;
    double flat_concentration = 20.0;
    double reward_low = 0.0;
    /// Defaults to n_decision_states when unset.
    std::optional<double> reward_high;
    RewardDependence reward_dependence = RewardDependence::StateAction;
    std::uint64_t seed = 0;

    double effective_reward_high() const {
        return reward_high.value_or(static_cast<double>(n_decision_states));
    }
    void validate() const;
};

/// Seed of the shipped reference instance (15 + 1 states, 6 actions,
/// γ = 0.95): zero / three / six stochastic-policy states at ε = 0 / 3 / 4.
inline constexpr std::uint64_t kReferenceEnvSeed = 4;

/// Structure targets of the reference instance: ε -> stochastic-state count.
inline const std::map<double, int> kReferenceTargets{{0.0, 0}, {3.0, 3}, {4.0, 6}};

TabularMdp generate_env(const EnvSpec& spec);

struct EnvDescription {
    std::map<double, int> epsilon_to_stochastic_count;
    std::pair<double, double> q_star_range{0.0, 0.0};
};

/// Plans on `mdp` and counts the non-singleton ε-balls among decision states.
EnvDescription describe_env(const TabularMdp& mdp, const std::vector<double>& epsilons);

/// No seed in the searched range matched the targets.
class StructureSearchError : public Error {
public:
    StructureSearchError(const std::string& what, std::uint64_t closest_seed,
                         std::map<double, int> closest_counts)
        : Error(what), closest_seed_(closest_seed), closest_counts_(std::move(closest_counts)) {}
    std::uint64_t closest_seed() const noexcept { return closest_seed_; }
    const std::map<double, int>& closest_counts() const noexcept { return closest_counts_; }

private:
    std::uint64_t closest_seed_;
    std::map<double, int> closest_counts_;
};

struct StructureSearchResult {
    TabularMdp mdp;
    std::uint64_t seed;
    int tries;
};

/// Tries seeds spec.seed, spec.seed + 1, ... until describe_env reproduces
/// every (ε -> count) target exactly.
StructureSearchResult find_env_with_structure(const EnvSpec& spec,
                                              const std::map<double, int>& targets,
                                              int max_tries);

/// The shipped reference environment.
TabularMdp reference_env();

} // namespace itl
