#include "cfl/graph.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace cfl {

namespace {

void remove_mean(std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double& v : x) v -= mean;
}

double norm(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace

double second_eigenvalue(const MixingMatrix& w, const EigenOptions& opts) {
    const std::size_t n = w.size();
    if (n == 0) throw std::invalid_argument("empty mixing matrix");
    if (n == 1) return 0.0;

    // Power iteration on W^2 restricted to 1-perp. W^2 is PSD there, so the
    // +/- pair of a symmetric W collapses into one eigenvalue sigma2^2 and the
    // Rayleigh quotient converges monotonically.
    std::mt19937_64 rng(0x5eed5eedULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> x(n);
    for (double& v : x) v = unit(rng);
    remove_mean(x);
    double nx = norm(x);
    for (double& v : x) v /= nx;

    double mu = 0.0;
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        std::vector<double> y = w.apply(w.apply(x));
        remove_mean(y);
        mu = 0.0;
        for (std::size_t k = 0; k < n; ++k) mu += x[k] * y[k];
        double residual = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double r = y[k] - mu * x[k];
            residual += r * r;
        }
        residual = std::sqrt(residual);
        const double ny = norm(y);
        if (ny == 0.0) return 0.0;  // W annihilates 1-perp (e.g. J/n)
        if (residual <= opts.tolerance) {
            const double sigma = std::sqrt(std::max(mu, 0.0));
            return (1.0 - sigma <= opts.tolerance) ? 1.0 : std::min(sigma, 1.0);
        }
        for (std::size_t k = 0; k < n; ++k) x[k] = y[k] / ny;
    }
    throw std::runtime_error("second_eigenvalue: power iteration did not converge in " +
                             std::to_string(opts.max_iterations) + " iterations");
}

double spectral_pn(const MixingMatrix& w, const EigenOptions& opts) {
    const double sigma = second_eigenvalue(w, opts);
    if (sigma >= 1.0) throw std::domain_error("spectral_pn: sigma2 = 1, graph is disconnected");
    return 1.0 / (1.0 - sigma);
}

}  // namespace cfl
