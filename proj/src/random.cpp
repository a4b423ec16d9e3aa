#include "itl/random.hpp"

#include "itl/errors.hpp"

namespace itl {

std::size_t sample_index(std::span<const double> weights, Rng& rng) {
    require(!weights.empty(), "cannot sample from an empty distribution");
    const double u = std::generate_canonical<double, 53>(rng);
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        cumulative += weights[i];
        last_positive = i;
        if (u < cumulative) return i;
    }
    return last_positive;
}

void sample_dirichlet(std::span<const double> alpha, Rng& rng, std::span<double> out) {
    require(alpha.size() == out.size(), "Dirichlet output size mismatch");
    for (;;) {
        double sum = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            require(alpha[i] > 0.0, "Dirichlet concentration must be positive");
            std::gamma_distribution<double> gamma(alpha[i], 1.0);
            out[i] = gamma(rng);
            sum += out[i];
        }
        // all components underflowing is only possible for tiny concentrations
        if (sum > 0.0) {
            for (double& x : out) x /= sum;
            return;
        }
    }
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
    std::vector<double> out(alpha.size());
    sample_dirichlet(alpha, rng, out);
    return out;
}

} // namespace itl
