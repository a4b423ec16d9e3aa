#include <atomic>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"

#include "itl/kernels.hpp"

using namespace itl;

TEST_CASE("bellman backup: serial matches a plain loop, parallel matches serial bitwise") {
    for (std::uint32_t seed = 0; seed < 10; ++seed) {
        const auto m = oracle::random_mdp(seed, 3 + seed * 3, 2 + seed % 5, 0.9);
        std::vector<double> v(m.n_states());
        for (std::size_t s = 0; s < v.size(); ++s) v[s] = std::sin(static_cast<double>(s + seed));
        v[m.terminal()] = 0.0;
        QTable serial(m.n_states(), m.n_actions());
        QTable parallel(m.n_states(), m.n_actions());
        kernels::bellman_backup_serial(m, v, serial);
        kernels::bellman_backup_parallel(m, v, parallel);
        CHECK(serial == parallel);
        const auto expected = oracle::q_of(m, v);
        for (std::size_t s = 0; s < m.n_states(); ++s)
            for (std::size_t a = 0; a < m.n_actions(); ++a) CHECK(serial(s, a) == doctest::Approx(expected[s][a]).epsilon(1e-14));
    }
}

TEST_CASE("for_each_index visits every index once, for any job count") {
    for (int jobs : {1, 2, 4, 8}) {
        std::vector<int> hits(1000, 0);
        kernels::for_each_index(hits.size(), jobs, [&](std::size_t i) { hits[i] += 1; });
        for (int h : hits) CHECK(h == 1);
    }
    std::vector<std::size_t> order;
    kernels::for_each_index_serial(5, [&](std::size_t i) { order.push_back(i); });
    CHECK(order == std::vector<std::size_t>{0, 1, 2, 3, 4});
    std::atomic<int> calls{0};
    kernels::for_each_index_parallel(0, 4, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
}

TEST_CASE("for_each_index_parallel rethrows the lowest-index exception") {
    for (int jobs : {1, 3}) {
        try {
            kernels::for_each_index_parallel(100, jobs, [](std::size_t i) {
                if (i == 17 || i == 63) throw std::runtime_error("boom " + std::to_string(i));
            });
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "boom 17");
        }
    }
}
