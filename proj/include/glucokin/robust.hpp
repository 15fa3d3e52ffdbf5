#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "glucokin/kernel.hpp"
#include "glucokin/stats.hpp"

namespace glucokin::robust {

/// Huber loss. c = 1.345 gives 95% asymptotic efficiency at the Gaussian.
struct HuberLoss {
    double c = 1.345;

    double psi(double u) const { return std::abs(u) <= c ? u : c * (u > 0 ? 1.0 : -1.0); }

    /// IRWLS weight psi(u)/u, continued with psi'(0) = 1 at u = 0.
    double weight(double u) const {
        const double a = std::abs(u);
        return a <= c ? 1.0 : c / a;
    }
};

struct RobustConfig {
    HuberLoss loss{};
    double scale = 0.0;  // fixed sigma-hat; <= 0 selects the auto estimate
    int max_irwls_iters = 100;
    double irwls_tol = 1e-8;
};

struct IrwlsResult {
    std::vector<double> weights;  // strictly positive, sum to 1
    int iterations = 0;
    bool converged = false;
    double scale = 0.0;
};

// Kernelised IRWLS for the M-estimate of the feature-space mean
// mu = sum_j w_j Phi(x_j). The residual of x_l never needs Phi explicitly:
//   e_l^2 = ||Phi(x_l) - mu||^2
//         = K(0) - 2 sum_j w_j K(x_l, x_j) + sum_{j,j'} w_j w_j' K(x_j, x_j')
// with K(0) = 1 for the Gaussian profile. Each sweep recomputes the Huber
// weights w_l = psi(e_l / sigma) / (e_l / sigma), normalised to sum 1.
inline IrwlsResult irwls_weights(const std::vector<Point>& data, const KernelConfig& kernel,
                                 const RobustConfig& cfg = {}) {
    const std::size_t L = data.size();
    if (L < 2) throw std::invalid_argument("irwls_weights: need L >= 2");

    // Gram matrix, computed once
    std::vector<double> gram(L * L);
    for (std::size_t i = 0; i < L; ++i) {
        gram[i * L + i] = 1.0;
        for (std::size_t j = i + 1; j < L; ++j) {
            const double k = kernel.eval(data[i], data[j]);
            gram[i * L + j] = k;
            gram[j * L + i] = k;
        }
    }

    IrwlsResult out;
    out.weights.assign(L, 1.0 / static_cast<double>(L));
    std::vector<double> residuals(L), next(L);

    for (out.iterations = 1; out.iterations <= cfg.max_irwls_iters; ++out.iterations) {
        // mu'Gram*mu term and per-point cross terms
        std::vector<double> gw(L, 0.0);
        for (std::size_t i = 0; i < L; ++i) {
            double s = 0.0;
            const double* row = &gram[i * L];
            for (std::size_t j = 0; j < L; ++j) s += row[j] * out.weights[j];
            gw[i] = s;
        }
        double wgw = 0.0;
        for (std::size_t i = 0; i < L; ++i) wgw += out.weights[i] * gw[i];
        for (std::size_t l = 0; l < L; ++l) {
            const double e2 = std::max(0.0, 1.0 - 2.0 * gw[l] + wgw);
            residuals[l] = std::sqrt(e2);
        }

        double sigma = cfg.scale;
        if (!(sigma > 0.0)) {
            // normalized MAD about the median, 1.2533 for Gaussian consistency
            const double med = stats::median(residuals);
            double mad = 0.0;
            for (double e : residuals) mad += std::abs(e - med);
            sigma = 1.2533 * mad / static_cast<double>(L);
            if (!(sigma > 0.0)) sigma = 1.0;  // all residuals equal: weights stay uniform
        }
        out.scale = sigma;

        double sum = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            next[l] = cfg.loss.weight(residuals[l] / sigma);
            sum += next[l];
        }
        double delta = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            next[l] /= sum;
            delta = std::max(delta, std::abs(next[l] - out.weights[l]));
        }
        out.weights = next;
        if (delta < cfg.irwls_tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace glucokin::robust
