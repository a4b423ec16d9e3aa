#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace itl {

/// Random stream type passed explicitly to every sampling routine.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Seed for stream i derived from a master seed:
/// master XOR (i + 1) * 0x9E3779B97F4A7C15 (wrapping).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return master ^ ((index + 1) * kGoldenGamma);
}

/// Draws an index with probability proportional to `weights` (which must
/// sum to 1 up to rounding; the last positive entry absorbs the remainder).
std::size_t sample_index(std::span<const double> weights, Rng& rng);

/// Dirichlet(alpha) draw written into `out`.
///
/// Each component is Gamma(alpha_i, 1) from std::gamma_distribution
/// (libstdc++ uses Marsaglia-Tsang, with the alpha < 1 boost
/// Gamma(alpha + 1) * U^(1/alpha)), then the vector is normalised by its sum.
/// Draws are bitwise reproducible within one build for a fixed stream.
void sample_dirichlet(std::span<const double> alpha, Rng& rng, std::span<double> out);

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);

} // namespace itl
