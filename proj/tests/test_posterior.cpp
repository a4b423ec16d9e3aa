#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "itl/env_gen.hpp"
#include "itl/experiment.hpp"
#include "itl/posterior.hpp"

using namespace itl;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

} // namespace

TEST_CASE("fit_posterior adds the prior to the counts") {
    const TrajectoryBatch empty(4, 2, 3, {});
    const auto post = fit_posterior(empty);
    for (double x : post.alpha()) CHECK(x == 1.0);

    const std::vector<Trajectory> trajs{Trajectory{{Step{0, 1, 0.0, 0}, Step{0, 1, 0.0, 0}, Step{0, 1, 0.0, 2}}}};
    const TrajectoryBatch batch(3, 2, 2, trajs);
    const auto p = fit_posterior(batch);
    CHECK(to_vec(p.alpha(0, 1)) == std::vector<double>{3, 1, 2});
    const auto mean = posterior_mean_row(p, 0, 1);
    CHECK(mean[0] == doctest::Approx(0.5));
    CHECK(mean[1] == doctest::Approx(1.0 / 6.0));
    CHECK(mean[2] == doctest::Approx(1.0 / 3.0));
    const auto uniform = posterior_mean_row(p, 1, 0);
    for (double x : uniform) CHECK(x == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(fit_posterior(batch, 0.0), ContractViolation);
}

TEST_CASE("posterior mean equals add-one smoothed frequencies exactly") {
    const TrueEnvOracle env(reference_env());
    const auto batch = rollout_batch(env.mdp(), env.expert(3.0), 60, 20, 8);
    const auto mean = posterior_mean(fit_posterior(batch));
    for (std::size_t s = 0; s < 15; ++s)
        for (std::size_t a = 0; a < 6; ++a) {
            const auto expected = oracle::smoothed_row(batch.trajectories(), 16, s, a);
            for (std::size_t j = 0; j < 16; ++j) CHECK(mean(s, a, j) == expected[j]);
        }
    for (std::size_t a = 0; a < 6; ++a) CHECK(mean(15, a, 15) == 1.0);
}

TEST_CASE("posterior additivity and order invariance") {
    const TrueEnvOracle env(reference_env());
    const auto a = rollout_batch(env.mdp(), env.expert(4.0), 30, 20, 1);
    const auto b = rollout_batch(env.mdp(), env.expert(4.0), 30, 20, 2);
    std::vector<Trajectory> joined = a.trajectories();
    joined.insert(joined.end(), b.trajectories().begin(), b.trajectories().end());
    const auto together = fit_posterior(TrajectoryBatch(16, 6, 15, joined));
    std::vector<Trajectory> reversed(joined.rbegin(), joined.rend());
    CHECK(fit_posterior(TrajectoryBatch(16, 6, 15, reversed)).alpha() == together.alpha());
    const auto pa = fit_posterior(a);
    const auto pb = fit_posterior(b);
    for (std::size_t i = 0; i < together.alpha().size(); ++i)
        CHECK(together.alpha()[i] == pa.alpha()[i] + pb.alpha()[i] - 1.0);
}

TEST_CASE("Monte Carlo mean of row draws matches the analytic mean") {
    std::mt19937 gen(5);
    std::uniform_int_distribution<int> count(0, 30);
    for (int row = 0; row < 20; ++row) {
        std::vector<double> alpha(16 * 2 * 16, 1.0);
        for (std::size_t j = 0; j < 16; ++j) alpha[j] += gen() % 3 == 0 ? count(gen) : 0;
        const DirichletPosterior post(16, 2, 15, alpha);
        Rng rng(1000 + row);
        std::vector<double> avg(16, 0.0);
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            const auto x = sample_row(post, 0, 0, rng);
            for (std::size_t j = 0; j < 16; ++j) avg[j] += x[j] / n;
        }
        CHECK(oracle::l1(avg, posterior_mean_row(post, 0, 0)) <= 0.02);
    }
}

TEST_CASE("concentrated alpha gives draws near the mode") {
    std::vector<double> alpha(3 * 1 * 3, 1.0);
    alpha[0] = 1e9;
    const DirichletPosterior post(3, 1, 2, alpha);
    Rng rng(4);
    for (int i = 0; i < 100; ++i) CHECK(oracle::l1(sample_row(post, 0, 0, rng), {1, 0, 0}) <= 1e-3);
}

TEST_CASE("sample_full: valid tensors, reproducible, absorbing terminal") {
    const TrueEnvOracle env(reference_env());
    const auto post = fit_posterior(rollout_batch(env.mdp(), env.expert(3.0), 15, 20, 3));
    Rng a(9), b(9);
    for (int i = 0; i < 20; ++i) {
        const auto t = sample_full(post, a);
        CHECK(t == sample_full(post, b));
        CHECK_NOTHROW(validate_stochastic(t));
        CHECK_NOTHROW(env.mdp().with_transitions(t));
        for (std::size_t act = 0; act < 6; ++act) CHECK(t(15, act, 15) == 1.0);
    }
}

TEST_CASE("sample_full with huge alpha is close to the mean") {
    std::vector<double> alpha(4 * 2 * 4);
    std::mt19937 gen(2);
    for (double& x : alpha) x = 1e7 * (1.0 + gen() % 5);
    const DirichletPosterior post(4, 2, 3, alpha);
    Rng rng(6);
    const auto mean = posterior_mean(post);
    const auto t = sample_full(post, rng);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 2; ++a) CHECK(oracle::l1(to_vec(t.row(s, a)), to_vec(mean.row(s, a))) <= 1e-2);
}

TEST_CASE("rows of sample_full are uncorrelated across (s, a)") {
    const std::vector<double> alpha(3 * 2 * 3, 1.0);
    const DirichletPosterior post(3, 2, 2, alpha);
    Rng rng(21);
    const int n = 10000;
    std::vector<double> x(n), y(n), z(n);
    for (int i = 0; i < n; ++i) {
        const auto t = sample_full(post, rng);
        x[i] = t(0, 0, 0);
        y[i] = t(0, 1, 0);
        z[i] = t(1, 0, 1);
    }
    auto corr = [&](const std::vector<double>& u, const std::vector<double>& v) {
        const double mu = oracle::mean(u), mv = oracle::mean(v);
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += (u[i] - mu) * (v[i] - mv);
        return c / n / (oracle::pstd(u) * oracle::pstd(v));
    };
    // 4 / sqrt(n) is a 4-sigma band under independence
    CHECK(std::abs(corr(x, y)) < 0.04);
    CHECK(std::abs(corr(x, z)) < 0.04);
    CHECK(std::abs(corr(y, z)) < 0.04);
}
