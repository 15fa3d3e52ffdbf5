#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "glucokin/kernel.hpp"

namespace glucokin::sparse {

/// Sparse representation of the weighted kernel mean: a subset of data
/// indices with positive weights alpha summing to 1.
struct SparseBasis {
    std::vector<std::size_t> indices;  // I*, in greedy selection order
    std::vector<double> alphas;        // one per index, > 0, sum 1
    std::vector<double> nu_trace;      // normalised nu after each addition
    std::size_t size() const { return indices.size(); }
};

/// Stopping rule for the greedy selection: either a fixed cardinality or the
/// incoherence-gradient threshold T_nu.
struct SparseStop {
    std::size_t fixed_n = 0;  // 0 selects the data-driven rule
    double t_nu = 1e-3;

    static SparseStop fixed(std::size_t n) { return {n, 0.0}; }
    static SparseStop gradient(double t) { return {0, t}; }
};

/// Gram matrix of the subset: Xi_ij = K((x_i - x_j)/h). Symmetric with unit
/// diagonal, positive semi-definite.
inline std::vector<double> gram(const std::vector<Point>& subset, const KernelConfig& kernel) {
    if (subset.empty()) throw std::invalid_argument("gram: empty subset");
    const std::size_t n = subset.size();
    std::vector<double> g(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double k = kernel.eval(subset[i], subset[j]);
            g[i * n + j] = k;
            g[j * n + i] = k;
        }
    }
    return g;
}

/// xi_m = sum_j w_j K((x_m - x_j)/h) for every m in the subset.
inline std::vector<double> xi(const std::vector<std::size_t>& subset,
                              const std::vector<Point>& data, const std::vector<double>& w,
                              const KernelConfig& kernel) {
    if (w.size() != data.size()) throw std::invalid_argument("xi: weight length mismatch");
    std::vector<double> out(subset.size(), 0.0);
    for (std::size_t m = 0; m < subset.size(); ++m) {
        double s = 0.0;
        for (std::size_t j = 0; j < data.size(); ++j)
            s += w[j] * kernel.eval(data[subset[m]], data[j]);
        out[m] = s;
    }
    return out;
}

namespace detail {
// Cholesky solve of (A + lambda I) x = b for symmetric positive
// semi-definite A, row-major.
inline std::vector<double> ridge_solve(std::vector<double> a, std::vector<double> b,
                                       double lambda) {
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += lambda;
    // in-place Cholesky A = L L'
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) throw std::runtime_error("ridge_solve: matrix not positive definite");
        const double ljj = std::sqrt(d);
        a[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / ljj;
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
        b[ii] = s / a[ii * n + ii];
    }
    return b;
}
}  // namespace detail

struct AlphaSolution {
    std::vector<double> alphas;           // positive entries only
    std::vector<std::size_t> kept;        // positions within the subset that survived
};

/// Solve Xi alpha = xi with diagonal regularisation, zero out negative
/// entries and renormalise to sum 1. Throws if nothing positive remains.
inline AlphaSolution solve_alpha(const std::vector<double>& gram_matrix,
                                 const std::vector<double>& xi_vector) {
    const std::size_t n = xi_vector.size();
    if (gram_matrix.size() != n * n) throw std::invalid_argument("solve_alpha: dimension mismatch");
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += gram_matrix[i * n + i];
    const double lambda = 1e-8 * trace / static_cast<double>(n);
    std::vector<double> alpha = detail::ridge_solve(gram_matrix, xi_vector, lambda);

    AlphaSolution out;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] > 0.0) {
            out.kept.push_back(i);
            out.alphas.push_back(alpha[i]);
            sum += alpha[i];
        }
    }
    if (out.alphas.empty() || !(sum > 0.0))
        throw std::runtime_error("solve_alpha: degenerate basis, no positive weights");
    for (double& a : out.alphas) a /= sum;
    return out;
}

/// Greedy incoherence-maximising subset selection. The seed is the datum of
/// maximal total kernel affinity; each following addition is the candidate
/// with the smallest max-affinity to the selected set. nu after each step is
/// the min-max affinity over the remaining candidates; growth stops at the
/// fixed cardinality or once the normalised gain drops to T_nu.
inline SparseBasis select_subset(const std::vector<Point>& data, const KernelConfig& kernel,
                                 const SparseStop& stop, const std::vector<double>& w) {
    const std::size_t L = data.size();
    if (L == 0) throw std::invalid_argument("select_subset: empty data");
    if (w.size() != L) throw std::invalid_argument("select_subset: weight length mismatch");
    const std::size_t n_target = stop.fixed_n > 0 ? std::min(stop.fixed_n, L) : L;
    if (stop.fixed_n == 0 && !(stop.t_nu > 0.0))
        throw std::invalid_argument("select_subset: T_nu must be > 0");

    SparseBasis basis;
    std::vector<double> max_aff(L, -1.0);  // max affinity of each datum to the selected set
    std::vector<char> selected(L, 0);

    // seed: most central datum
    std::size_t seed = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < L; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < L; ++j) s += kernel.eval(data[i], data[j]);
        if (s > best) {
            best = s;
            seed = i;
        }
    }
    auto add = [&](std::size_t idx) {
        selected[idx] = 1;
        basis.indices.push_back(idx);
        for (std::size_t j = 0; j < L; ++j)
            if (!selected[j]) max_aff[j] = std::max(max_aff[j], kernel.eval(data[idx], data[j]));
    };
    auto current_nu = [&]() {
        double nu = std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < L; ++j)
            if (!selected[j]) {
                nu = std::min(nu, max_aff[j]);
                any = true;
            }
        return any ? nu : 1.0;  // exhausted set: every point trivially covered
    };

    add(seed);
    std::vector<double> nu_raw{current_nu()};
    double nu_max = nu_raw.back();

    while (basis.size() < n_target) {
        // most incoherent candidate
        std::size_t next = L;
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < L; ++j)
            if (!selected[j] && max_aff[j] < lo) {
                lo = max_aff[j];
                next = j;
            }
        if (next == L) break;
        add(next);
        const double nu = current_nu();
        nu_raw.push_back(nu);
        nu_max = std::max(nu_max, nu);
        if (stop.fixed_n == 0) {
            const double gain = (nu_raw[nu_raw.size() - 1] - nu_raw[nu_raw.size() - 2]) / nu_max;
            if (gain <= stop.t_nu) {
                // the last addition contributed nothing; drop it
                selected[basis.indices.back()] = 0;
                basis.indices.pop_back();
                nu_raw.pop_back();
                break;
            }
        }
    }

    basis.nu_trace.resize(nu_raw.size());
    for (std::size_t i = 0; i < nu_raw.size(); ++i) basis.nu_trace[i] = nu_raw[i] / nu_max;

    // alpha on the selected subset
    std::vector<Point> pts;
    pts.reserve(basis.size());
    for (std::size_t idx : basis.indices) pts.push_back(data[idx]);
    const AlphaSolution sol = solve_alpha(gram(pts, kernel), xi(basis.indices, data, w, kernel));
    std::vector<std::size_t> kept_indices;
    kept_indices.reserve(sol.kept.size());
    for (std::size_t k : sol.kept) kept_indices.push_back(basis.indices[k]);
    basis.indices = std::move(kept_indices);
    basis.alphas = sol.alphas;
    return basis;
}

inline SparseBasis select_subset(const std::vector<Point>& data, const KernelConfig& kernel,
                                 const SparseStop& stop) {
    return select_subset(data, kernel, stop,
                         std::vector<double>(data.size(), 1.0 / static_cast<double>(data.size())));
}

/// One sparse shift step. Mean mode: alpha-weighted kernel mean over the
/// basis. Medoid mode: argmin over the full data of the basis-weighted
/// quadratic objective, ties broken by lowest index.
inline Point sparse_shift_step(const Point& x, const SparseBasis& basis,
                               const std::vector<Point>& data, const KernelConfig& kernel,
                               bool medoid) {
    if (basis.size() == 0) throw std::invalid_argument("sparse_shift_step: empty basis");
    const std::size_t n = basis.size();
    if (!medoid) {
        double denom = 0.0;
        Point num;
        for (std::size_t m = 0; m < n; ++m) {
            const Point& xi_pt = data[basis.indices[m]];
            const double g = basis.alphas[m] * KernelConfig::deriv_weight(kernel.scaled_sqdist(x, xi_pt));
            ++KernelConfig::eval_count;
            denom += g;
            for (int d = 0; d < kernel.dim; ++d) num.v[d] += g * xi_pt.v[d];
        }
        if (!(denom > 0.0))
            throw std::runtime_error("sparse_shift_step: vanishing denominator (isolated point)");
        for (int d = 0; d < kernel.dim; ++d) num.v[d] /= denom;
        return num;
    }
    // medoid: expand ||y - x_i||^2 to C ||y||^2 - 2 <y, S> + const in the
    // bandwidth-scaled space, then scan candidates in O(L)
    double c_sum = 0.0;
    Point s_sum;
    for (std::size_t m = 0; m < n; ++m) {
        const Point& xi_pt = data[basis.indices[m]];
        const double g = basis.alphas[m] * KernelConfig::deriv_weight(kernel.scaled_sqdist(x, xi_pt));
        ++KernelConfig::eval_count;
        c_sum += g;
        for (int d = 0; d < kernel.dim; ++d) s_sum.v[d] += g * xi_pt.v[d] / (kernel.bandwidth[d] * kernel.bandwidth[d]);
    }
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < data.size(); ++m) {
        double y2 = 0.0, ys = 0.0;
        for (int d = 0; d < kernel.dim; ++d) {
            const double yd = data[m].v[d] / kernel.bandwidth[d];
            y2 += yd * yd;
            ys += data[m].v[d] * s_sum.v[d];
        }
        const double val = c_sum * y2 - 2.0 * ys;
        if (val < best_val) {
            best_val = val;
            best = m;
        }
    }
    return data[best];
}

}  // namespace glucokin::sparse
