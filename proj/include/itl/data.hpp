#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "itl/mdp.hpp"

namespace itl {

struct Step {
    StateIndex state;
    ActionIndex action;
    double reward;
    StateIndex next_state;

    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::vector<Step> steps;

    bool operator==(const Trajectory&) const = default;
};

/// Transition counts N(s, a, s'), stored like TransitionTensor.
class CountTensor {
public:
    CountTensor() = default;
    CountTensor(std::size_t n_states, std::size_t n_actions)
        : n_states_(n_states), n_actions_(n_actions), data_(n_states * n_actions * n_states, 0) {}

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    std::int64_t operator()(StateIndex s, ActionIndex a, StateIndex next) const {
        return data_[(s * n_actions_ + a) * n_states_ + next];
    }
    std::int64_t& operator()(StateIndex s, ActionIndex a, StateIndex next) {
        return data_[(s * n_actions_ + a) * n_states_ + next];
    }
    std::span<const std::int64_t> row(StateIndex s, ActionIndex a) const {
        return {data_.data() + (s * n_actions_ + a) * n_states_, n_states_};
    }
    /// Σ_{s'} N(s, a, s').
    std::int64_t visits(StateIndex s, ActionIndex a) const;
    const std::vector<std::int64_t>& data() const noexcept { return data_; }

    CountTensor& operator+=(const CountTensor& other);
    bool operator==(const CountTensor&) const = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<std::int64_t> data_;
};

/// Offline dataset plus its sufficient statistics. Counts are always
/// derived from the trajectories, never set independently.
class TrajectoryBatch {
public:
    TrajectoryBatch(std::size_t n_states, std::size_t n_actions, StateIndex terminal,
                    std::vector<Trajectory> trajectories);

    std::size_t n_states() const noexcept { return counts_.n_states(); }
    std::size_t n_actions() const noexcept { return counts_.n_actions(); }
    StateIndex terminal() const noexcept { return terminal_; }
    const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
    const CountTensor& counts() const noexcept { return counts_; }
    /// True where any (s, a) step was observed.
    bool visited(StateIndex s, ActionIndex a) const { return counts_.visits(s, a) > 0; }
    std::size_t total_steps() const;

private:
    StateIndex terminal_;
    std::vector<Trajectory> trajectories_;
    CountTensor counts_;
};

/// Exact tally of all steps. Throws ContractViolation on out-of-range indices.
CountTensor counts_from_trajectories(std::span<const Trajectory> trajectories,
                                     std::size_t n_states, std::size_t n_actions);

inline constexpr int kDefaultHorizon = 20;

/// Rolls `expert` out in `mdp` for `episodes` episodes, each starting at a
/// uniformly random decision state and stopping at the terminal state or
/// after `horizon` steps.
TrajectoryBatch rollout_batch(const TabularMdp& mdp, const Policy& expert, int episodes,
                              int horizon, std::uint64_t seed);

} // namespace itl
