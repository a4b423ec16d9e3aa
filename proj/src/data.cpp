#include "itl/data.hpp"

#include <numeric>
#include <string>

#include "itl/random.hpp"

namespace itl {

std::int64_t CountTensor::visits(StateIndex s, ActionIndex a) const {
    const auto r = row(s, a);
    return std::accumulate(r.begin(), r.end(), std::int64_t{0});
}

CountTensor& CountTensor::operator+=(const CountTensor& other) {
    require(n_states_ == other.n_states_ && n_actions_ == other.n_actions_,
            "count tensors have different shapes");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

CountTensor counts_from_trajectories(std::span<const Trajectory> trajectories,
                                     std::size_t n_states, std::size_t n_actions) {
    CountTensor counts(n_states, n_actions);
    for (const auto& traj : trajectories) {
        for (const auto& step : traj.steps) {
            require(step.state < n_states && step.next_state < n_states && step.action < n_actions,
                    "trajectory step (" + std::to_string(step.state) + ", " +
                        std::to_string(step.action) + ", " + std::to_string(step.next_state) +
                        ") is out of range");
            ++counts(step.state, step.action, step.next_state);
        }
    }
    return counts;
}

TrajectoryBatch::TrajectoryBatch(std::size_t n_states, std::size_t n_actions, StateIndex terminal,
                                 std::vector<Trajectory> trajectories)
    : terminal_(terminal),
      trajectories_(std::move(trajectories)),
      counts_(counts_from_trajectories(trajectories_, n_states, n_actions)) {
    require(terminal < n_states, "terminal index out of range");
    for (const auto& traj : trajectories_)
        for (std::size_t i = 1; i < traj.steps.size(); ++i)
            require(traj.steps[i - 1].next_state == traj.steps[i].state,
                    "trajectory steps do not chain");
}

std::size_t TrajectoryBatch::total_steps() const {
    std::size_t n = 0;
    for (const auto& traj : trajectories_) n += traj.steps.size();
    return n;
}

TrajectoryBatch rollout_batch(const TabularMdp& mdp, const Policy& expert, int episodes,
                              int horizon, std::uint64_t seed) {
    require(episodes >= 1, "episodes must be at least 1");
    require(horizon >= 1, "horizon must be at least 1");
    require(expert.n_states() == mdp.n_states() && expert.n_actions() == mdp.n_actions(),
            "expert policy shape does not match MDP");
    require(mdp.n_states() >= 2, "need at least one decision state");

    std::vector<StateIndex> starts;
    for (StateIndex s = 0; s < mdp.n_states(); ++s)
        if (s != mdp.terminal()) starts.push_back(s);

    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
    std::vector<Trajectory> trajectories;
    trajectories.reserve(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
        Trajectory traj;
        StateIndex s = starts[pick_start(rng)];
        for (int t = 0; t < horizon && s != mdp.terminal(); ++t) {
            const ActionIndex a = sample_index(expert.row(s), rng);
            const StateIndex next = sample_index(mdp.transitions().row(s, a), rng);
            traj.steps.push_back(Step{s, a, mdp.rewards()(s, a), next});
            s = next;
        }
        trajectories.push_back(std::move(traj));
    }
    return TrajectoryBatch(mdp.n_states(), mdp.n_actions(), mdp.terminal(), std::move(trajectories));
}

} // namespace itl
