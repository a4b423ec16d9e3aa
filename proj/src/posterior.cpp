#include "itl/posterior.hpp"

#include <algorithm>
#include <numeric>

namespace itl {

DirichletPosterior::DirichletPosterior(std::size_t n_states, std::size_t n_actions,
                                       StateIndex terminal, std::vector<double> alpha)
    : n_states_(n_states), n_actions_(n_actions), terminal_(terminal), alpha_(std::move(alpha)) {
    require(alpha_.size() == n_states_ * n_actions_ * n_states_, "alpha size does not match shape");
    require(terminal_ < n_states_, "terminal index out of range");
    for (double x : alpha_) require(x > 0.0, "Dirichlet concentrations must be positive");
}

DirichletPosterior fit_posterior(const TrajectoryBatch& batch, double prior_concentration) {
    require(prior_concentration > 0.0, "prior concentration must be positive");
    const auto& counts = batch.counts().data();
    std::vector<double> alpha(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        alpha[i] = static_cast<double>(counts[i]) + prior_concentration;
    return DirichletPosterior(batch.n_states(), batch.n_actions(), batch.terminal(), std::move(alpha));
}

std::vector<double> posterior_mean_row(const DirichletPosterior& post, StateIndex s, ActionIndex a) {
    const auto alpha = post.alpha(s, a);
    const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    std::vector<double> out(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) out[i] = alpha[i] / total;
    return out;
}

TransitionTensor posterior_mean(const DirichletPosterior& post) {
    TransitionTensor mean(post.n_states(), post.n_actions());
    for (StateIndex s = 0; s < post.n_states(); ++s) {
        for (ActionIndex a = 0; a < post.n_actions(); ++a) {
            if (s == post.terminal()) {
                mean(s, a, s) = 1.0;
                continue;
            }
            const auto row = posterior_mean_row(post, s, a);
            std::copy(row.begin(), row.end(), mean.row(s, a).begin());
        }
    }
    return mean;
}

void sample_row(const DirichletPosterior& post, StateIndex s, ActionIndex a, Rng& rng,
                std::span<double> out) {
    require(s < post.n_states() && a < post.n_actions(), "row index out of range");
    sample_dirichlet(post.alpha(s, a), rng, out);
}

std::vector<double> sample_row(const DirichletPosterior& post, StateIndex s, ActionIndex a, Rng& rng) {
    std::vector<double> out(post.n_states());
    sample_row(post, s, a, rng, out);
    return out;
}

TransitionTensor sample_full(const DirichletPosterior& post, Rng& rng) {
    TransitionTensor t(post.n_states(), post.n_actions());
    for (StateIndex s = 0; s < post.n_states(); ++s) {
        for (ActionIndex a = 0; a < post.n_actions(); ++a) {
            if (s == post.terminal())
                t(s, a, s) = 1.0;
            else
                sample_row(post, s, a, rng, t.row(s, a));
        }
    }
    return t;
}

} // namespace itl
