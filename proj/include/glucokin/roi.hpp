#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "glucokin/modeseek.hpp"

namespace glucokin::roi {

enum class ClusterRole { Roi, Background, Edge, Artefact };

struct RegionAssignment {
    int roi_cluster_id = -1;
    int background_cluster_id = -1;
    double r_hat = 0.0;  // ROI center intensity, percent
    std::vector<ClusterRole> roles;  // one per cluster
    bool single_region = false;      // pre-reaction / low-glucose convergence case
};

/// Pick the ROI from a pruned cluster set. Candidates are the two largest
/// clusters by pixel count; the ROI is the darker of the two. Remaining
/// clusters are edge when their intensity lies between ROI and background,
/// artefact otherwise. A single cluster is both ROI and background.
inline RegionAssignment assign(const modeseek::ClusterSet& clusters) {
    const std::size_t n = clusters.centers.size();
    if (n == 0) throw std::invalid_argument("roi::assign: empty cluster set");

    RegionAssignment out;
    out.roles.assign(n, ClusterRole::Artefact);

    if (n == 1) {
        out.roi_cluster_id = 0;
        out.background_cluster_id = 0;
        out.r_hat = clusters.centers[0].v[0];
        out.roles[0] = ClusterRole::Roi;
        out.single_region = true;
        return out;
    }

    // two largest by size; ties by lower intensity
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (clusters.sizes[a] != clusters.sizes[b]) return clusters.sizes[a] > clusters.sizes[b];
        return clusters.centers[a].v[0] < clusters.centers[b].v[0];
    });
    std::size_t first = order[0], second = order[1];
    const double i1 = clusters.centers[first].v[0];
    const double i2 = clusters.centers[second].v[0];
    const std::size_t roi_id = i1 <= i2 ? first : second;
    const std::size_t bg_id = i1 <= i2 ? second : first;

    out.roi_cluster_id = static_cast<int>(roi_id);
    out.background_cluster_id = static_cast<int>(bg_id);
    out.r_hat = clusters.centers[roi_id].v[0];
    out.roles[roi_id] = ClusterRole::Roi;
    out.roles[bg_id] = ClusterRole::Background;
    const double lo = clusters.centers[roi_id].v[0];
    const double hi = clusters.centers[bg_id].v[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (i == roi_id || i == bg_id) continue;
        const double v = clusters.centers[i].v[0];
        out.roles[i] = (v > lo && v < hi) ? ClusterRole::Edge : ClusterRole::Artefact;
    }
    return out;
}

inline const char* role_name(ClusterRole r) {
    switch (r) {
        case ClusterRole::Roi: return "roi";
        case ClusterRole::Background: return "background";
        case ClusterRole::Edge: return "edge";
        case ClusterRole::Artefact: return "artefact";
    }
    return "artefact";
}

}  // namespace glucokin::roi
