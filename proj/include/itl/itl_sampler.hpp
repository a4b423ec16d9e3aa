#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itl/mdp.hpp"
#include "itl/posterior.hpp"
#include "itl/random.hpp"

namespace itl {

/// Where the fixed expert dynamics T̂_π come from.
enum class AnchorMode {
    Mle,    ///< posterior mean rows of the supported actions
    Sample, ///< one posterior draw per supported (s, a)
};

/// Which Q-table defines the ε-balls of a candidate dynamics.
enum class BallSource {
    QStar,   ///< optimal Q under the candidate (value iteration)
    QExpert, ///< Q of the expert policy under the candidate (closed form)
};

/// How the equality constraint at deterministic-policy states is met.
enum class EqualityMode {
    Pin,       ///< the a* row is set to the anchor row, so the equality holds identically
    Tolerance, ///< rejection loop until |constraint| <= tolerance
};

/// Fixed quantities every constraint is evaluated against.
struct ConstraintContext {
    /// Rows mixed into the anchor, (s, a, ·). Only supported actions are
    /// meaningful; terminal rows are absorbing.
    TransitionTensor anchor_rows;
    /// T̂_π(s, s') as a dense row-major n×n matrix.
    std::vector<double> anchor_t_pi;
    /// V^π solved against the anchor.
    ValueTable v_expert;
    Policy expert;
    RewardTable rewards;
    double discount;
    double epsilon;
    StateIndex terminal;

    std::size_t n_states() const noexcept { return v_expert.size(); }
    std::size_t n_actions() const noexcept { return expert.n_actions(); }
};

ConstraintContext build_context(const DirichletPosterior& post, const Policy& expert,
                                const RewardTable& rewards, double discount, double epsilon,
                                AnchorMode anchor_mode, Rng& rng);

/// V_π(s) - (R(s,a) + γ row·V_π). Positive when action a with next-state
/// distribution `row` looks worse than the expert at s.
double constraint_value(const ConstraintContext& ctx, std::span<const double> row, StateIndex s,
                        ActionIndex a);

struct DeltaTag {};
using DeltaValues = StateActionTable<DeltaTag>;

/// Per-(s, a) slack constants of the suboptimal-expert constraints.
struct DeltaTable {
    /// Lower bound on constraint_value for actions the expert never takes.
    DeltaValues gap;
    /// Half-width of the |constraint_value| window for in-ball actions at
    /// stochastic-policy states.
    DeltaValues window;

    static DeltaTable initial(std::size_t n_states, std::size_t n_actions, double epsilon);
};

struct DrawCountTag {};
using DrawCounts = StateActionTable<DrawCountTag>;

struct SamplerLimits {
    long max_row_draws = 50000;
    /// Consecutive rejected candidates tolerated before giving up.
    int max_outer_rounds = 20;
};

struct SamplerTuning {
    double gap_factor = 1.25;
    double window_factor = 0.8;
    /// Value a zero gap bound (ε = 0) is raised to on its first tightening.
    double zero_gap_floor = 1e-6;
};

struct SamplerOptions {
    SamplerLimits limits;
    SamplerTuning tuning;
    BallSource ball_source = BallSource::QStar;
    EqualityMode equality_mode = EqualityMode::Pin;
    /// Tolerance for EqualityMode::Tolerance; defaults to 0.05 ε.
    std::optional<double> equality_tolerance;
    /// Per-row rejection loops (never-taken, equality and window constraints).
    bool enforce_row_constraints = true;
    /// Whole-candidate ε-ball check with δ tuning.
    bool check_ball_property = true;
    /// Also reject candidates where a never-taken action's expert-policy Q
    /// comes within ε of V^π (the guarantee the fully-optimal constraints
    /// give by construction). Failures tighten the gap bounds.
    bool require_expert_margin = true;
};

struct ItlSampleSet {
    std::vector<TransitionTensor> samples;
    int accepted = 0;
    /// Candidates rejected by the ε-ball check over the whole run.
    int outer_rounds_used = 0;
    DeltaTable final_deltas;
    /// Posterior draws made for each (s, a) row over the whole run.
    DrawCounts per_row_draw_counts;
};

/// A single row could not satisfy its constraint within max_row_draws.
class RowDrawLimitError : public Error {
public:
    RowDrawLimitError(StateIndex s, ActionIndex a, double bound, long draws);
    StateIndex state() const noexcept { return state_; }
    ActionIndex action() const noexcept { return action_; }
    double bound() const noexcept { return bound_; }

private:
    StateIndex state_;
    ActionIndex action_;
    double bound_;
};

/// Too many consecutive candidates failed the ε-ball check.
class OuterRoundLimitError : public Error {
public:
    OuterRoundLimitError(const std::string& what, DeltaTable deltas,
                         std::vector<StateIndex> failure_states)
        : Error(what), deltas_(std::move(deltas)), failure_states_(std::move(failure_states)) {}
    const DeltaTable& deltas() const noexcept { return deltas_; }
    const std::vector<StateIndex>& failure_states() const noexcept { return failure_states_; }

private:
    DeltaTable deltas_;
    std::vector<StateIndex> failure_states_;
};

/// Rejection sampler for the expert-constrained posterior over dynamics.
ItlSampleSet sample_constrained(const DirichletPosterior& post, const ConstraintContext& ctx,
                                int n_samples, const SamplerOptions& options, Rng& rng);

struct BallCheck {
    bool holds = true;
    /// Decision states where a never-taken action entered the ball.
    std::vector<StateIndex> intruder_states;
    /// Decision states where a supported action left the ball.
    std::vector<StateIndex> dropout_states;
};

/// Compares the ε-balls of `candidate` with the expert's support, state by state.
BallCheck check_ball_property(const TabularMdp& candidate, double epsilon, const Policy& expert,
                              BallSource ball_source);

bool ball_property_holds(const TabularMdp& candidate, double epsilon, const Policy& expert,
                         BallSource ball_source);

/// Counts never-taken (s, a) with Q^π(s,a) + ε >= V^π(s) + tol, all values
/// computed in closed form under `candidate` for π = expert.
int expert_margin_violations(const TabularMdp& candidate, const Policy& expert, double epsilon,
                             double tol = 1e-9);

std::string to_string(AnchorMode mode);
std::string to_string(BallSource source);
AnchorMode parse_anchor_mode(const std::string& text);
BallSource parse_ball_source(const std::string& text);

} // namespace itl
