#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "glucokin/kernel.hpp"
#include "glucokin/robust.hpp"
#include "glucokin/sparse.hpp"

namespace glucokin::modeseek {

enum class Variant {
    MeanShift,          // MS
    RobustMeanShift,    // R-MS
    MedoidShift,        // MedS
    RobustMedoidShift,  // R-MedS
    SparseMeanShift,    // SS-MS
    RobustSparseMeanShift,    // RSS-MS
    SparseMedoidShift,        // SS-MedS
    RobustSparseMedoidShift,  // RSS-MedS
};

inline bool is_medoid(Variant v) {
    return v == Variant::MedoidShift || v == Variant::RobustMedoidShift ||
           v == Variant::SparseMedoidShift || v == Variant::RobustSparseMedoidShift;
}
inline bool is_robust(Variant v) {
    return v == Variant::RobustMeanShift || v == Variant::RobustMedoidShift ||
           v == Variant::RobustSparseMeanShift || v == Variant::RobustSparseMedoidShift;
}
inline bool is_sparse(Variant v) {
    return v == Variant::SparseMeanShift || v == Variant::RobustSparseMeanShift ||
           v == Variant::SparseMedoidShift || v == Variant::RobustSparseMedoidShift;
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "ms") return Variant::MeanShift;
    if (s == "rms") return Variant::RobustMeanShift;
    if (s == "meds") return Variant::MedoidShift;
    if (s == "rmeds") return Variant::RobustMedoidShift;
    if (s == "ssms") return Variant::SparseMeanShift;
    if (s == "rssms") return Variant::RobustSparseMeanShift;
    if (s == "ssmeds") return Variant::SparseMedoidShift;
    if (s == "rssmeds") return Variant::RobustSparseMedoidShift;
    throw std::invalid_argument("unknown variant: " + s);
}

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::MeanShift: return "ms";
        case Variant::RobustMeanShift: return "rms";
        case Variant::MedoidShift: return "meds";
        case Variant::RobustMedoidShift: return "rmeds";
        case Variant::SparseMeanShift: return "ssms";
        case Variant::RobustSparseMeanShift: return "rssms";
        case Variant::SparseMedoidShift: return "ssmeds";
        case Variant::RobustSparseMedoidShift: return "rssmeds";
    }
    return "ms";
}

/// Weighted kernel density estimate at x: (1/h) sum_l w_l k(||x-x_l||^2/h^2).
inline double kde(const Point& x, const std::vector<Point>& data, const std::vector<double>& w,
                  const KernelConfig& kernel) {
    if (w.size() != data.size()) throw std::invalid_argument("kde: weight length mismatch");
    double s = 0.0;
    for (std::size_t l = 0; l < data.size(); ++l) {
        if (!(w[l] > 0.0)) throw std::invalid_argument("kde: weights must be positive");
        s += w[l] * kernel.eval(x, data[l]);
    }
    return s / kernel.normalizer();
}

/// KDE of the sparse representation, using only the basis points.
inline double kde_sparse(const Point& x, const sparse::SparseBasis& basis,
                         const std::vector<Point>& data, const KernelConfig& kernel) {
    double s = 0.0;
    for (std::size_t m = 0; m < basis.size(); ++m)
        s += basis.alphas[m] * kernel.eval(x, data[basis.indices[m]]);
    return s / kernel.normalizer();
}

/// One weighted mean-shift step: the g-weighted mean of the data.
inline Point mean_shift_step(const Point& x, const std::vector<Point>& data,
                             const std::vector<double>& w, const KernelConfig& kernel) {
    if (w.size() != data.size()) throw std::invalid_argument("mean_shift_step: weight length mismatch");
    double denom = 0.0;
    Point num;
    for (std::size_t l = 0; l < data.size(); ++l) {
        const double g = w[l] * KernelConfig::deriv_weight(kernel.scaled_sqdist(x, data[l]));
        ++KernelConfig::eval_count;
        denom += g;
        for (int d = 0; d < kernel.dim; ++d) num.v[d] += g * data[l].v[d];
    }
    if (!(denom > 0.0))
        throw std::runtime_error("mean_shift_step: vanishing denominator (isolated point)");
    for (int d = 0; d < kernel.dim; ++d) num.v[d] /= denom;
    return num;
}

/// One medoid-shift step: argmin over data of the g-weighted quadratic
/// objective, evaluated in the bandwidth-scaled space. The quadratic expands
/// to C||y||^2 - 2<y,S> + const, so the scan is O(L) after one O(L) pass.
/// Ties break to the lowest data index.
inline Point medoid_shift_step(const Point& x, const std::vector<Point>& data,
                               const std::vector<double>& w, const KernelConfig& kernel,
                               std::size_t* out_index = nullptr) {
    if (data.empty()) throw std::invalid_argument("medoid_shift_step: empty data");
    if (w.size() != data.size()) throw std::invalid_argument("medoid_shift_step: weight length mismatch");
    double c_sum = 0.0;
    std::array<double, 3> s_sum{0.0, 0.0, 0.0};
    for (std::size_t l = 0; l < data.size(); ++l) {
        const double g = w[l] * KernelConfig::deriv_weight(kernel.scaled_sqdist(x, data[l]));
        ++KernelConfig::eval_count;
        c_sum += g;
        for (int d = 0; d < kernel.dim; ++d)
            s_sum[d] += g * data[l].v[d] / (kernel.bandwidth[d] * kernel.bandwidth[d]);
    }
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < data.size(); ++m) {
        double y2 = 0.0, ys = 0.0;
        for (int d = 0; d < kernel.dim; ++d) {
            const double yd = data[m].v[d] / kernel.bandwidth[d];
            y2 += yd * yd;
            ys += data[m].v[d] * s_sum[d];
        }
        const double val = c_sum * y2 - 2.0 * ys;
        if (val < best_val) {
            best_val = val;
            best = m;
        }
    }
    if (out_index) *out_index = best;
    return data[best];
}

struct ModeSeekOptions {
    double tol = 1e-6;  // step size tolerance in the bandwidth-scaled space
    int max_iters = 200;
    robust::RobustConfig robust{};
    sparse::SparseStop sparse_stop{};
};

struct ModeSeekResult {
    Variant variant = Variant::MeanShift;
    std::vector<Point> modes;                       // per-point converged location
    std::vector<int> iterations;                    // per-point iteration count
    std::vector<std::vector<double>> density_trace; // per-point KDE along its trajectory
    std::vector<double> weights;                    // the w_l actually used
    sparse::SparseBasis basis;                      // filled for sparse variants
    bool irwls_converged = true;
    std::uint64_t kernel_evals = 0;
};

/// Iterate the variant's step from every data point. Mean trajectories stop
/// once the scaled step length drops below tol; medoid trajectories stop when
/// a point is its own successor. Medoid successors are memoised, so each
/// distinct datum is stepped at most once.
inline ModeSeekResult run(const std::vector<Point>& data, Variant variant,
                          const KernelConfig& kernel, const ModeSeekOptions& opts = {}) {
    if (data.empty()) throw std::invalid_argument("modeseek::run: empty data");
    if (!(opts.tol > 0.0)) throw std::invalid_argument("modeseek::run: tol must be > 0");
    const std::size_t L = data.size();
    const std::uint64_t evals_before = KernelConfig::eval_count;

    ModeSeekResult out;
    out.variant = variant;
    out.weights.assign(L, 1.0 / static_cast<double>(L));
    if (is_robust(variant)) {
        auto irwls = robust::irwls_weights(data, kernel, opts.robust);
        out.weights = std::move(irwls.weights);
        out.irwls_converged = irwls.converged;
    }
    const bool use_sparse = is_sparse(variant);
    if (use_sparse)
        out.basis = sparse::select_subset(data, kernel, opts.sparse_stop, out.weights);

    auto density = [&](const Point& x) {
        return use_sparse ? kde_sparse(x, out.basis, data, kernel)
                          : kde(x, data, out.weights, kernel);
    };

    out.modes.resize(L);
    out.iterations.assign(L, 0);
    out.density_trace.resize(L);

    if (!is_medoid(variant)) {
        for (std::size_t l = 0; l < L; ++l) {
            Point x = data[l];
            out.density_trace[l].push_back(density(x));
            int j = 0;
            for (; j < opts.max_iters; ++j) {
                const Point nx = use_sparse
                                     ? sparse::sparse_shift_step(x, out.basis, data, kernel, false)
                                     : mean_shift_step(x, data, out.weights, kernel);
                const double step = std::sqrt(kernel.scaled_sqdist(nx, x));
                x = nx;
                out.density_trace[l].push_back(density(x));
                if (step < opts.tol) {
                    ++j;
                    break;
                }
            }
            out.modes[l] = x;
            out.iterations[l] = j;
        }
    } else {
        // successor per datum, then chain-following with memoised terminals
        std::vector<std::size_t> succ(L);
        for (std::size_t l = 0; l < L; ++l) {
            std::size_t s = l;
            if (use_sparse) {
                const Point nx = sparse::sparse_shift_step(data[l], out.basis, data, kernel, true);
                // locate the returned datum; sparse medoid argmin already scans
                // the data, so recover the index by a direct comparison scan
                for (std::size_t m = 0; m < L; ++m)
                    if (data[m].v == nx.v) {
                        s = m;
                        break;
                    }
            } else {
                medoid_shift_step(data[l], data, out.weights, kernel, &s);
            }
            succ[l] = s;
        }
        std::vector<std::size_t> terminal(L, L);  // L marks unknown
        for (std::size_t l = 0; l < L; ++l) {
            std::vector<std::size_t> chain;
            std::size_t cur = l;
            while (terminal[cur] == L && succ[cur] != cur) {
                chain.push_back(cur);
                cur = succ[cur];
            }
            const std::size_t t = terminal[cur] == L ? cur : terminal[cur];
            for (std::size_t c : chain) terminal[c] = t;
            terminal[l] = t;

            // trajectory trace and iteration count for this start point
            std::size_t walk = l;
            out.density_trace[l].push_back(density(data[walk]));
            int j = 0;
            while (walk != succ[walk]) {
                walk = succ[walk];
                out.density_trace[l].push_back(density(data[walk]));
                ++j;
                if (j > static_cast<int>(L)) break;  // cycle guard; must not trigger
            }
            out.modes[l] = data[terminal[l]];
            out.iterations[l] = j;
        }
    }
    out.kernel_evals = KernelConfig::eval_count - evals_before;
    return out;
}

/// Cluster labels, centers and sizes for one frame.
struct ClusterSet {
    std::vector<int> labels;      // per-datum group id
    std::vector<Point> centers;   // representative per group
    std::vector<std::size_t> sizes;
};

/// Greedy mode agglomeration with bandwidth h: scan modes in data order,
/// join the first group whose representative is within h (scaled distance
/// <= 1), else found a new group. Mean variants track the running mean;
/// medoid variants the group medoid. A final merge pass keeps surviving
/// centers pairwise farther than h apart.
inline ClusterSet prune_modes(const std::vector<Point>& modes, const KernelConfig& kernel,
                              bool medoid_variant = false) {
    ClusterSet cs;
    cs.labels.assign(modes.size(), -1);
    std::vector<std::vector<std::size_t>> members;

    auto representative = [&](const std::vector<std::size_t>& group) {
        if (!medoid_variant) {
            Point mean;
            for (std::size_t i : group)
                for (int d = 0; d < kernel.dim; ++d) mean.v[d] += modes[i].v[d];
            for (int d = 0; d < kernel.dim; ++d) mean.v[d] /= static_cast<double>(group.size());
            return mean;
        }
        // medoid over the group's mode multiset
        std::size_t best = group.front();
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t i : group) {
            double cost = 0.0;
            for (std::size_t j : group) cost += kernel.scaled_sqdist(modes[i], modes[j]);
            if (cost < best_cost) {
                best_cost = cost;
                best = i;
            }
        }
        return modes[best];
    };

    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (!std::isfinite(modes[i].v[0]))
            throw std::invalid_argument("prune_modes: non-finite mode");
        int assigned = -1;
        for (std::size_t g = 0; g < cs.centers.size(); ++g) {
            if (kernel.scaled_sqdist(modes[i], cs.centers[g]) <= 1.0) {
                assigned = static_cast<int>(g);
                break;
            }
        }
        if (assigned < 0) {
            members.push_back({i});
            cs.centers.push_back(modes[i]);
            assigned = static_cast<int>(members.size() - 1);
        } else {
            members[assigned].push_back(i);
            cs.centers[assigned] = representative(members[assigned]);
        }
        cs.labels[i] = assigned;
    }

    // merge any groups whose representatives drifted within h of each other
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t a = 0; a < cs.centers.size() && !merged; ++a)
            for (std::size_t b = a + 1; b < cs.centers.size() && !merged; ++b)
                if (kernel.scaled_sqdist(cs.centers[a], cs.centers[b]) <= 1.0) {
                    for (std::size_t i : members[b]) members[a].push_back(i);
                    members.erase(members.begin() + static_cast<std::ptrdiff_t>(b));
                    cs.centers.erase(cs.centers.begin() + static_cast<std::ptrdiff_t>(b));
                    cs.centers[a] = representative(members[a]);
                    merged = true;
                }
    }
    for (std::size_t g = 0; g < members.size(); ++g) {
        for (std::size_t i : members[g]) cs.labels[i] = static_cast<int>(g);
        cs.sizes.push_back(members[g].size());
    }
    return cs;
}

}  // namespace glucokin::modeseek
