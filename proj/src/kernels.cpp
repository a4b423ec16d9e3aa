#include "itl/kernels.hpp"

#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace itl::kernels {

namespace {

inline double backup_entry(const TabularMdp& mdp, std::span<const double> v, StateIndex s,
                           ActionIndex a) {
    const auto row = mdp.transitions().row(s, a);
    double expected = 0.0;
    for (StateIndex next = 0; next < row.size(); ++next) expected += row[next] * v[next];
    return mdp.rewards()(s, a) + mdp.discount() * expected;
}

} // namespace

void bellman_backup_serial(const TabularMdp& mdp, std::span<const double> v, QTable& q) {
    const std::size_t n_states = mdp.n_states();
    const std::size_t n_actions = mdp.n_actions();
    for (StateIndex s = 0; s < n_states; ++s)
        for (ActionIndex a = 0; a < n_actions; ++a) q(s, a) = backup_entry(mdp, v, s, a);
}

void bellman_backup_parallel(const TabularMdp& mdp, std::span<const double> v, QTable& q) {
    const auto n_states = static_cast<long>(mdp.n_states());
    const std::size_t n_actions = mdp.n_actions();
#pragma omp parallel for schedule(static)
    for (long s = 0; s < n_states; ++s)
        for (ActionIndex a = 0; a < n_actions; ++a)
            q(static_cast<StateIndex>(s), a) = backup_entry(mdp, v, static_cast<StateIndex>(s), a);
}

void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& body) {
    for (std::size_t i = 0; i < n; ++i) body(i);
}

void for_each_index_parallel(std::size_t n, int jobs,
                             const std::function<void(std::size_t)>& body) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long>(n);
#ifdef _OPENMP
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#else
    (void)jobs;
#endif
    for (long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

void for_each_index(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    if (jobs <= 1)
        for_each_index_serial(n, body);
    else
        for_each_index_parallel(n, jobs, body);
}

} // namespace itl::kernels
