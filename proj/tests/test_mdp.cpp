#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "itl/mdp.hpp"

using namespace itl;

namespace {

// one decision state looping on itself, plus terminal
TabularMdp self_loop(std::vector<double> rewards) {
    const std::size_t na = rewards.size();
    TransitionTensor t(2, na);
    RewardTable r(2, na);
    for (std::size_t a = 0; a < na; ++a) {
        t(0, a, 0) = 1.0;
        t(1, a, 1) = 1.0;
        r(0, a) = rewards[a];
    }
    return TabularMdp(std::move(t), std::move(r), 0.95, 1);
}

// s0 -> s1 -> terminal, two actions that behave identically
TabularMdp chain() {
    TransitionTensor t(3, 2);
    RewardTable r(3, 2);
    for (std::size_t a = 0; a < 2; ++a) {
        t(0, a, 1) = 1.0;
        t(1, a, 2) = 1.0;
        t(2, a, 2) = 1.0;
        r(0, a) = 1.0;
        r(1, a) = 3.0;
    }
    return TabularMdp(std::move(t), std::move(r), 0.95, 2);
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
    return out;
}

} // namespace

TEST_CASE("TabularMdp rejects broken invariants") {
    TransitionTensor t(2, 1);
    t(0, 0, 0) = 0.5;
    t(0, 0, 1) = 0.4;
    t(1, 0, 1) = 1.0;
    RewardTable r(2, 1);
    CHECK_THROWS_AS(TabularMdp(t, r, 0.9, 1), ContractViolation);

    t(0, 0, 1) = 0.5;
    CHECK_NOTHROW(TabularMdp(t, r, 0.9, 1));
    CHECK_THROWS_AS(TabularMdp(t, r, 1.0, 1), ContractViolation);
    CHECK_THROWS_AS(TabularMdp(t, r, 0.9, 2), ContractViolation);

    RewardTable bad_terminal(2, 1);
    bad_terminal(1, 0) = 1.0;
    CHECK_THROWS_AS(TabularMdp(t, bad_terminal, 0.9, 1), ContractViolation);

    TransitionTensor leaky(2, 1);
    leaky(0, 0, 1) = 1.0;
    leaky(1, 0, 0) = 1.0;
    CHECK_THROWS_AS(TabularMdp(leaky, r, 0.9, 1), ContractViolation);

    TransitionTensor negative(2, 1);
    negative(0, 0, 0) = 1.5;
    negative(0, 0, 1) = -0.5;
    negative(1, 0, 1) = 1.0;
    CHECK_THROWS_AS(TabularMdp(negative, r, 0.9, 1), ContractViolation);
}

TEST_CASE("Policy validation") {
    CHECK_THROWS_AS(Policy(1, 2, {0.5, 0.4}), ContractViolation);
    CHECK_THROWS_AS(Policy(1, 2, {1.5, -0.5}), ContractViolation);
    CHECK_THROWS_AS(Policy(1, 2, {1.0}), ContractViolation);
    const Policy p(1, 3, {0.5, 0.0, 0.5});
    CHECK(p.support(0) == std::vector<ActionIndex>{0, 2});
}

TEST_CASE("closed form: self loop is a geometric series") {
    const auto m = self_loop({2.0, 2.0, 2.0});
    const auto v = evaluate_policy_closed_form(m, oracle::random_policy(3, 2, 3));
    CHECK(v[0] == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(v[1] == 0.0);
}

TEST_CASE("closed form: chain against a horizon-200 DP oracle") {
    const auto m = chain();
    const Policy pi(3, 2, {0.3, 0.7, 1.0, 0.0, 0.5, 0.5});
    const auto v = evaluate_policy_closed_form(m, pi);
    CHECK(v[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(v[0] == doctest::Approx(3.85).epsilon(1e-12));
    CHECK(v[2] == 0.0);

    // both actions are identical, so the optimal H-step values equal V^π
    const auto q200 = oracle::finite_horizon_q(m, 200);
    CHECK(std::abs(q200[0][0] - v[0]) < 1e-12);
    CHECK(std::abs(q200[1][1] - v[1]) < 1e-12);

    const QTable q = q_from_v(m, v);
    CHECK(q(0, 0) == doctest::Approx(3.85).epsilon(1e-12));
    CHECK(q(0, 1) == doctest::Approx(3.85).epsilon(1e-12));
    CHECK(q(2, 0) == 0.0);
    CHECK(q(2, 1) == 0.0);
}

TEST_CASE("closed form residual and dimension checks") {
    for (std::uint32_t seed = 0; seed < 10; ++seed) {
        const auto m = oracle::random_mdp(seed, 12, 4, 0.95);
        const auto pi = oracle::random_policy(seed + 100, 12, 4);
        const auto v = evaluate_policy_closed_form(m, pi);
        const auto t_pi = policy_transition_matrix(m.transitions(), pi);
        const auto r_pi = policy_rewards(m.rewards(), pi);
        double residual = 0.0;
        for (std::size_t s = 0; s < 12; ++s) {
            double lhs = v[s];
            for (std::size_t j = 0; j < 12; ++j) lhs -= 0.95 * t_pi[s * 12 + j] * v[j];
            residual = std::max(residual, std::abs(lhs - r_pi[s]));
        }
        CHECK(residual <= 1e-10);
    }
    const auto m = oracle::random_mdp(1, 5, 3, 0.9);
    CHECK_THROWS_AS(evaluate_policy_closed_form(m, oracle::random_policy(1, 4, 3)), ContractViolation);
    CHECK_THROWS_AS(evaluate_policy_closed_form(m, oracle::random_policy(1, 5, 2)), ContractViolation);
    CHECK_THROWS_AS(q_from_v(m, ValueTable{std::vector<double>(4, 0.0)}), ContractViolation);
}

TEST_CASE("property: closed form equals iterative evaluation on random MDPs") {
    for (std::uint32_t seed = 0; seed < 40; ++seed) {
        const std::size_t n = 2 + seed % 19;
        const std::size_t na = 1 + seed % 5;
        const auto m = oracle::random_mdp(seed, n, na, 0.5 + 0.45 * ((seed * 7) % 10) / 10.0);
        const auto pi = oracle::random_policy(seed * 31 + 1, n, na);
        const auto v = evaluate_policy_closed_form(m, pi);
        const auto v_iter = oracle::iterative_evaluation(m, pi);
        CHECK(sup_diff(v.values, v_iter) <= 1e-8);

        // value bound
        const double bound = oracle::max_abs_reward(m) / (1.0 - m.discount());
        for (double x : v.values) CHECK(std::abs(x) <= bound + 1e-9);

        // q contracted with π reproduces V
        const QTable q = q_from_v(m, v);
        for (std::size_t s = 0; s < n; ++s) {
            double acc = 0.0;
            for (std::size_t a = 0; a < na; ++a) acc += pi(s, a) * q(s, a);
            CHECK(std::abs(acc - v[s]) <= 1e-9);
        }
    }
}

TEST_CASE("q_from_v with zero values returns rewards") {
    const auto m = oracle::random_mdp(3, 6, 3, 0.9);
    const QTable q = q_from_v(m, ValueTable{std::vector<double>(6, 0.0)});
    CHECK(q.data() == m.rewards().data());
}

TEST_CASE("value iteration: dominant action on a self loop") {
    const auto plan = value_iteration(self_loop({1.0, 2.0}));
    CHECK(plan.v[0] == doctest::Approx(40.0).epsilon(1e-9));
    CHECK(plan.greedy(0, 1) == 1.0);
    CHECK(plan.residual <= 1e-10);
}

TEST_CASE("value iteration: equal rewards pick action 0") {
    auto base = oracle::random_mdp(5, 6, 4, 0.9);
    TransitionTensor t = base.transitions();
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t a = 1; a < 4; ++a)
            for (std::size_t j = 0; j < 6; ++j) t(s, a, j) = t(s, 0, j);
    RewardTable r(6, 4);
    for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t a = 0; a < 4; ++a) r(s, a) = 1.0 + s;
    const TabularMdp m(t, r, 0.9, 5);
    const auto plan = value_iteration(m);
    for (std::size_t s = 0; s < 6; ++s) CHECK(plan.greedy(s, 0) == 1.0);
}

TEST_CASE("value iteration matches a horizon-1000 DP oracle") {
    for (std::uint32_t seed = 0; seed < 20; ++seed) {
        const auto m = oracle::random_mdp(seed + 500, 5 + seed % 10, 2 + seed % 4, 0.95);
        const ValueIterationOptions opts;
        const auto plan = value_iteration(m, opts);
        const auto q_h = oracle::finite_horizon_q(m, 1000);
        const double vmax = oracle::max_abs_reward(m) / (1.0 - m.discount());
        const double bound = opts.tol + std::pow(m.discount(), 1000) * vmax + 1e-9;
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            const double v_h = *std::max_element(q_h[s].begin(), q_h[s].end());
            CHECK(std::abs(plan.v[s] - v_h) <= bound);
            double best = -1e300;
            for (std::size_t a = 0; a < m.n_actions(); ++a) best = std::max(best, plan.q(s, a));
            CHECK(std::abs(plan.v[s] - best) <= opts.tol);
        }
    }
}

TEST_CASE("value iteration reports non-convergence") {
    const auto m = oracle::random_mdp(9, 8, 3, 0.99);
    ValueIterationOptions opts;
    opts.max_iters = 3;
    opts.tol = 1e-12;
    try {
        value_iteration(m, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_residual() > opts.tol);
    }
    opts.tol = 0.0;
    CHECK_THROWS_AS(value_iteration(m, opts), ContractViolation);
}

TEST_CASE("value iteration: serial and parallel backups agree") {
    const auto m = oracle::random_mdp(77, 16, 6, 0.95);
    ValueIterationOptions par;
    par.parallel = true;
    const auto a = value_iteration(m);
    const auto b = value_iteration(m, par);
    CHECK(a.v.values == b.v.values);
    CHECK(a.q == b.q);
    CHECK(a.greedy == b.greedy);
}

TEST_CASE("epsilon_ball examples") {
    QTable q(3, 3, std::vector<double>{10, 8, 6.9, 1, 4, 2, 5, 5, 1});
    const auto b3 = epsilon_ball(q, 3.0);
    CHECK(b3.balls[0] == std::vector<ActionIndex>{0, 1});
    const auto b0 = epsilon_ball(q, 0.0);
    CHECK(b0.balls[1] == std::vector<ActionIndex>{1});
    CHECK(b0.balls[2] == std::vector<ActionIndex>{0, 1});
    CHECK_THROWS_AS(epsilon_ball(q, -1.0), ContractViolation);
}

TEST_CASE("property: epsilon balls are monotone and contain the argmax") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
        QTable q(4, 6);
        for (std::size_t s = 0; s < 4; ++s)
            for (std::size_t a = 0; a < 6; ++a) q(s, a) = u(gen);
        const double e1 = std::abs(u(gen)) / 2.0;
        const double e2 = e1 + std::abs(u(gen)) / 4.0;
        const auto b1 = epsilon_ball(q, e1);
        const auto b2 = epsilon_ball(q, e2);
        const auto best = greedy_actions(q);
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(std::includes(b2.balls[s].begin(), b2.balls[s].end(), b1.balls[s].begin(), b1.balls[s].end()));
            CHECK(std::find(b1.balls[s].begin(), b1.balls[s].end(), best[s]) != b1.balls[s].end());
            const double mx = q(s, best[s]);
            for (ActionIndex a : b1.balls[s]) CHECK(mx - q(s, a) <= e1 + kBallSlack);
        }
    }
}

TEST_CASE("build_expert_policy and classify_states") {
    EpsilonBallMap balls{{{0, 1}, {2}, {0, 1, 2, 3, 4, 5}}, 1.0, 6};
    const Policy p = build_expert_policy(balls);
    CHECK(p(0, 0) == 0.5);
    CHECK(p(0, 1) == 0.5);
    CHECK(p(0, 2) == 0.0);
    CHECK(p(1, 2) == 1.0);
    for (std::size_t a = 0; a < 6; ++a) CHECK(p(2, a) == doctest::Approx(1.0 / 6.0));

    const auto kinds = classify_states(p, 2);
    CHECK(kinds.size() == 2);
    CHECK(kinds.at(0) == StateKind::Stochastic);
    CHECK(kinds.at(1) == StateKind::Deterministic);

    const Policy rows(2, 3, {0, 1, 0, 0.5, 0.5, 0});
    const auto k2 = classify_states(rows, 5);
    CHECK(k2.at(0) == StateKind::Deterministic);
    CHECK(k2.at(1) == StateKind::Stochastic);
}

TEST_CASE("property: deterministic iff singleton ball; fully optimal expert is deterministic") {
    for (std::uint32_t seed = 0; seed < 20; ++seed) {
        const auto m = oracle::random_mdp(seed + 900, 10, 5, 0.95);
        const auto plan = value_iteration(m);
        for (double eps : {0.0, 0.5, 2.0, 5.0}) {
            const auto balls = epsilon_ball(plan.q, eps);
            const auto kinds = classify_states(build_expert_policy(balls), m.terminal());
            for (const auto& [s, kind] : kinds)
                CHECK((kind == StateKind::Deterministic) == (balls.balls[s].size() == 1));
        }
        // continuous random rewards give unique optima almost surely
        int stochastic = 0;
        for (const auto& [s, kind] : classify_states(build_expert_policy(epsilon_ball(plan.q, 0.0)), m.terminal()))
            stochastic += kind == StateKind::Stochastic;
        CHECK(stochastic == 0);
    }
}
