#pragma once

#include <span>
#include <vector>

#include "itl/data.hpp"
#include "itl/mdp.hpp"
#include "itl/random.hpp"

namespace itl {

/// Dirichlet posterior over each transition row: alpha = N(s, a, ·) + prior.
/// The terminal state's rows are structural (absorbing) and never sampled.
class DirichletPosterior {
public:
    DirichletPosterior(std::size_t n_states, std::size_t n_actions, StateIndex terminal,
                       std::vector<double> alpha);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    StateIndex terminal() const noexcept { return terminal_; }
    std::span<const double> alpha(StateIndex s, ActionIndex a) const {
        return {alpha_.data() + (s * n_actions_ + a) * n_states_, n_states_};
    }
    const std::vector<double>& alpha() const noexcept { return alpha_; }

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    StateIndex terminal_;
    std::vector<double> alpha_;
};

DirichletPosterior fit_posterior(const TrajectoryBatch& batch, double prior_concentration = 1.0);

/// alpha / Σ alpha per row; with the default prior this is the add-one
/// smoothed maximum-likelihood estimate. Terminal rows are absorbing.
TransitionTensor posterior_mean(const DirichletPosterior& post);

/// Mean of one row.
std::vector<double> posterior_mean_row(const DirichletPosterior& post, StateIndex s, ActionIndex a);

/// Exact Dirichlet(alpha(s, a, ·)) draw.
std::vector<double> sample_row(const DirichletPosterior& post, StateIndex s, ActionIndex a, Rng& rng);
void sample_row(const DirichletPosterior& post, StateIndex s, ActionIndex a, Rng& rng,
                std::span<double> out);

/// Independent row draws for every decision (s, a); terminal rows absorbing.
TransitionTensor sample_full(const DirichletPosterior& post, Rng& rng);

} // namespace itl
