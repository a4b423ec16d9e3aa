#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "itl/mdp.hpp"

namespace itl::kernels {

/// q(s,a) = R(s,a) + γ T(s,a,·)·v for every (s, a). Single-threaded reference.
void bellman_backup_serial(const TabularMdp& mdp, std::span<const double> v, QTable& q);

/// OpenMP version of bellman_backup_serial; bitwise identical output.
void bellman_backup_parallel(const TabularMdp& mdp, std::span<const double> v, QTable& q);

/// Calls body(i) for i in [0, n) in index order.
void for_each_index_serial(std::size_t n, const std::function<void(std::size_t)>& body);

/// Calls body(i) for i in [0, n) on up to `jobs` OpenMP threads. The body
/// must only write to slot i of its outputs. Exceptions escaping body are
/// rethrown on the calling thread after the loop (first by index).
void for_each_index_parallel(std::size_t n, int jobs,
                             const std::function<void(std::size_t)>& body);

/// Dispatches to the serial loop for jobs <= 1.
void for_each_index(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

} // namespace itl::kernels
