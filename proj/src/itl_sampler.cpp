#include "itl/itl_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace itl {

namespace {

constexpr double kMarginTolerance = 1e-9;

bool supported(const Policy& policy, StateIndex s, ActionIndex a) {
    return policy(s, a) > kSupportThreshold;
}

} // namespace

ConstraintContext build_context(const DirichletPosterior& post, const Policy& expert,
                                const RewardTable& rewards, double discount, double epsilon,
                                AnchorMode anchor_mode, Rng& rng) {
    const std::size_t n = post.n_states();
    const std::size_t n_actions = post.n_actions();
    require(expert.n_states() == n && expert.n_actions() == n_actions,
            "expert policy shape does not match posterior");
    require(rewards.n_states() == n && rewards.n_actions() == n_actions,
            "reward table shape does not match posterior");
    require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
    require(epsilon >= 0.0, "epsilon must be non-negative");

    TransitionTensor rows(n, n_actions);
    for (StateIndex s = 0; s < n; ++s) {
        for (ActionIndex a = 0; a < n_actions; ++a) {
            if (s == post.terminal()) {
                rows(s, a, s) = 1.0;
            } else if (supported(expert, s, a)) {
                if (anchor_mode == AnchorMode::Mle) {
                    const auto mean = posterior_mean_row(post, s, a);
                    std::copy(mean.begin(), mean.end(), rows.row(s, a).begin());
                } else {
                    sample_row(post, s, a, rng, rows.row(s, a));
                }
            } else {
                // unused by the anchor; keep the tensor stochastic
                const auto mean = posterior_mean_row(post, s, a);
                std::copy(mean.begin(), mean.end(), rows.row(s, a).begin());
            }
        }
    }

    auto t_pi = policy_transition_matrix(rows, expert);
    const auto r_pi = policy_rewards(rewards, expert);
    ValueTable v = solve_policy_values(t_pi, r_pi, discount);
    return ConstraintContext{std::move(rows), std::move(t_pi), std::move(v), expert, rewards,
                             discount,        epsilon,         post.terminal()};
}

double constraint_value(const ConstraintContext& ctx, std::span<const double> row, StateIndex s,
                        ActionIndex a) {
    require(row.size() == ctx.n_states(), "row length does not match state count");
    double continuation = 0.0;
    for (StateIndex next = 0; next < row.size(); ++next) continuation += row[next] * ctx.v_expert[next];
    return ctx.v_expert[s] - (ctx.rewards(s, a) + ctx.discount * continuation);
}

DeltaTable DeltaTable::initial(std::size_t n_states, std::size_t n_actions, double epsilon) {
    return DeltaTable{DeltaValues(n_states, n_actions, epsilon), DeltaValues(n_states, n_actions, epsilon)};
}

RowDrawLimitError::RowDrawLimitError(StateIndex s, ActionIndex a, double bound, long draws)
    : Error("row (" + std::to_string(s) + ", " + std::to_string(a) + ") failed its constraint after " +
            std::to_string(draws) + " draws (current bound " + std::to_string(bound) + ")"),
      state_(s),
      action_(a),
      bound_(bound) {}

BallCheck check_ball_property(const TabularMdp& candidate, double epsilon, const Policy& expert,
                              BallSource ball_source) {
    require(expert.n_states() == candidate.n_states() && expert.n_actions() == candidate.n_actions(),
            "expert policy shape does not match candidate");
    QTable q;
    if (ball_source == BallSource::QStar) {
        q = value_iteration(candidate).q;
    } else {
        q = q_from_v(candidate, evaluate_policy_closed_form(candidate, expert));
    }
    const EpsilonBallMap balls = epsilon_ball(q, epsilon);

    BallCheck out;
    for (StateIndex s = 0; s < candidate.n_states(); ++s) {
        if (s == candidate.terminal()) continue;
        const auto& ball = balls.balls[s];
        bool intruder = false;
        bool dropout = false;
        for (ActionIndex a = 0; a < candidate.n_actions(); ++a) {
            const bool in_ball = std::find(ball.begin(), ball.end(), a) != ball.end();
            const bool in_support = supported(expert, s, a);
            intruder |= in_ball && !in_support;
            dropout |= in_support && !in_ball;
        }
        if (intruder) out.intruder_states.push_back(s);
        if (dropout) out.dropout_states.push_back(s);
    }
    out.holds = out.intruder_states.empty() && out.dropout_states.empty();
    return out;
}

bool ball_property_holds(const TabularMdp& candidate, double epsilon, const Policy& expert,
                         BallSource ball_source) {
    return check_ball_property(candidate, epsilon, expert, ball_source).holds;
}

int expert_margin_violations(const TabularMdp& candidate, const Policy& expert, double epsilon,
                             double tol) {
    const ValueTable v = evaluate_policy_closed_form(candidate, expert);
    const QTable q = q_from_v(candidate, v);
    int violations = 0;
    for (StateIndex s = 0; s < candidate.n_states(); ++s) {
        if (s == candidate.terminal()) continue;
        for (ActionIndex a = 0; a < candidate.n_actions(); ++a)
            if (!supported(expert, s, a) && q(s, a) + epsilon >= v[s] + tol) ++violations;
    }
    return violations;
}

namespace {

class ConstrainedSampler {
public:
    ConstrainedSampler(const DirichletPosterior& post, const ConstraintContext& ctx,
                       const SamplerOptions& options, Rng& rng)
        : post_(post),
          ctx_(ctx),
          options_(options),
          rng_(rng),
          deltas_(DeltaTable::initial(post.n_states(), post.n_actions(), ctx.epsilon)),
          draws_(post.n_states(), post.n_actions()),
          candidate_(post.n_states(), post.n_actions()) {
        for (ActionIndex a = 0; a < post.n_actions(); ++a)
            candidate_(post.terminal(), a, post.terminal()) = 1.0;
        for (StateIndex s = 0; s < post.n_states(); ++s) {
            support_size_.push_back(ctx.expert.support(s).size());
        }
    }

    ItlSampleSet run(int n_samples) {
        ItlSampleSet out;
        int consecutive_failures = 0;
        while (out.accepted < n_samples) {
            draw_candidate();
            if (!options_.check_ball_property) {
                accept(out);
                continue;
            }
            const TabularMdp mdp(candidate_, ctx_.rewards, ctx_.discount, ctx_.terminal);
            BallCheck check = check_ball_property(mdp, ctx_.epsilon, ctx_.expert, options_.ball_source);
            if (options_.require_expert_margin) add_margin_failures(mdp, check);
            if (check.holds) {
                accept(out);
                consecutive_failures = 0;
                continue;
            }
            ++out.outer_rounds_used;
            ++consecutive_failures;
            tune(check);
            if (consecutive_failures >= options_.limits.max_outer_rounds) {
                std::vector<StateIndex> states = check.intruder_states;
                states.insert(states.end(), check.dropout_states.begin(), check.dropout_states.end());
                std::sort(states.begin(), states.end());
                states.erase(std::unique(states.begin(), states.end()), states.end());
                std::ostringstream msg;
                msg << consecutive_failures << " consecutive candidates failed the epsilon-ball check; "
                    << "failing states:";
                for (StateIndex s : states) msg << ' ' << s;
                throw OuterRoundLimitError(msg.str(), deltas_, std::move(states));
            }
        }
        out.final_deltas = deltas_;
        out.per_row_draw_counts = draws_;
        return out;
    }

private:
    void accept(ItlSampleSet& out) {
        out.samples.push_back(candidate_);
        ++out.accepted;
    }

    void draw_candidate() {
        for (StateIndex s = 0; s < post_.n_states(); ++s) {
            if (s == post_.terminal()) continue;
            for (ActionIndex a = 0; a < post_.n_actions(); ++a) draw_row(s, a);
        }
    }

    void draw_row(StateIndex s, ActionIndex a) {
        auto row = candidate_.row(s, a);
        if (!options_.enforce_row_constraints) {
            redraw(s, a, row);
            return;
        }
        if (!supported(ctx_.expert, s, a)) {
            const double bound = deltas_.gap(s, a);
            redraw_until(s, a, row, bound, [&] { return constraint_value(ctx_, row, s, a) >= bound; });
        } else if (support_size_[s] == 1) {
            if (options_.equality_mode == EqualityMode::Pin) {
                const auto anchor = ctx_.anchor_rows.row(s, a);
                std::copy(anchor.begin(), anchor.end(), row.begin());
            } else {
                const double tol = options_.equality_tolerance.value_or(0.05 * ctx_.epsilon);
                redraw_until(s, a, row, tol,
                             [&] { return std::abs(constraint_value(ctx_, row, s, a)) <= tol; });
            }
        } else {
            const double bound = deltas_.window(s, a);
            redraw_until(s, a, row, bound,
                         [&] { return std::abs(constraint_value(ctx_, row, s, a)) <= bound; });
        }
    }

    void redraw(StateIndex s, ActionIndex a, std::span<double> row) {
        sample_row(post_, s, a, rng_, row);
        draws_(s, a) += 1.0;
    }

    template <class Accept>
    void redraw_until(StateIndex s, ActionIndex a, std::span<double> row, double bound, Accept ok) {
        for (long n = 0; n < options_.limits.max_row_draws; ++n) {
            redraw(s, a, row);
            if (ok()) return;
        }
        throw RowDrawLimitError(s, a, bound, options_.limits.max_row_draws);
    }

    // Never-taken actions whose expert-policy Q comes within ε of V^π under
    // the candidate count as intrusions at their state.
    void add_margin_failures(const TabularMdp& mdp, BallCheck& check) const {
        const ValueTable v = evaluate_policy_closed_form(mdp, ctx_.expert);
        const QTable q = q_from_v(mdp, v);
        for (StateIndex s = 0; s < mdp.n_states(); ++s) {
            if (s == mdp.terminal()) continue;
            for (ActionIndex a = 0; a < mdp.n_actions(); ++a) {
                if (supported(ctx_.expert, s, a) || q(s, a) + ctx_.epsilon < v[s] + kMarginTolerance) continue;
                auto& states = check.intruder_states;
                if (std::find(states.begin(), states.end(), s) == states.end()) {
                    states.insert(std::upper_bound(states.begin(), states.end(), s), s);
                }
                check.holds = false;
                break;
            }
        }
    }

    void tune(const BallCheck& check) {
        const auto& tuning = options_.tuning;
        for (StateIndex s : check.intruder_states) {
            for (ActionIndex a = 0; a < post_.n_actions(); ++a) {
                if (supported(ctx_.expert, s, a)) continue;
                double& d = deltas_.gap(s, a);
                d = d > 0.0 ? d * tuning.gap_factor : tuning.zero_gap_floor;
            }
        }
        for (StateIndex s : check.dropout_states) {
            for (ActionIndex a = 0; a < post_.n_actions(); ++a)
                if (supported(ctx_.expert, s, a)) deltas_.window(s, a) *= tuning.window_factor;
        }
    }

    const DirichletPosterior& post_;
    const ConstraintContext& ctx_;
    const SamplerOptions& options_;
    Rng& rng_;
    DeltaTable deltas_;
    DrawCounts draws_;
    TransitionTensor candidate_;
    std::vector<std::size_t> support_size_;
};

} // namespace

ItlSampleSet sample_constrained(const DirichletPosterior& post, const ConstraintContext& ctx,
                                int n_samples, const SamplerOptions& options, Rng& rng) {
    require(n_samples >= 1, "n_samples must be at least 1");
    require(options.limits.max_row_draws >= 1 && options.limits.max_outer_rounds >= 1,
            "sampler limits must be positive");
    require(ctx.n_states() == post.n_states() && ctx.n_actions() == post.n_actions() &&
                ctx.terminal == post.terminal(),
            "constraint context does not match posterior");
    return ConstrainedSampler(post, ctx, options, rng).run(n_samples);
}

std::string to_string(AnchorMode mode) { return mode == AnchorMode::Mle ? "mle" : "sample"; }

std::string to_string(BallSource source) {
    return source == BallSource::QStar ? "q-star" : "q-expert";
}

AnchorMode parse_anchor_mode(const std::string& text) {
    if (text == "mle") return AnchorMode::Mle;
    if (text == "sample") return AnchorMode::Sample;
    throw ContractViolation("unknown anchor mode '" + text + "' (expected mle or sample)");
}

BallSource parse_ball_source(const std::string& text) {
    if (text == "q-star" || text == "q_star") return BallSource::QStar;
    if (text == "q-expert" || text == "q_expert") return BallSource::QExpert;
    throw ContractViolation("unknown ball source '" + text + "' (expected q-star or q-expert)");
}

} // namespace itl
