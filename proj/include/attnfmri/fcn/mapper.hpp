#ifndef ATTNFMRI_FCN_MAPPER_HPP
#define ATTNFMRI_FCN_MAPPER_HPP

#include "../core.hpp"
#include "../data_model.hpp"
#include "pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

/**
 * @file mapper.hpp
 *
 * @brief Mapper over a 2-D embedding of ROIs, and clique expansion of the
 * resulting nerve into an ROI adjacency.
 *
 * The lens is either the first embedding axis or both axes (a product
 * cover). Each cover bin is clustered by single linkage cut at
 * `cluster_eps`; clusters become nodes and nodes sharing an ROI are joined.
 */

namespace attnfmri::fcn {

enum class MapperLens { first_embedding_axis, both_axes_grid };

struct MapperParams {
    MapperLens lens = MapperLens::first_embedding_axis;
    int n_intervals = 10;
    double overlap_fraction = 0.3;

    /// Single-linkage cut distance; unset means 0.5 x median pairwise embedded distance.
    std::optional<double> cluster_eps;
    int min_cluster_size = 1;
};

/**
 * Nodes hold sorted 1-based ROI indices. Edges are node-id pairs (a < b).
 */
struct MapperGraph {
    std::vector<std::vector<int>> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
};

inline void validate_mapper_params(const MapperParams& p) {
    if (p.n_intervals < 1) {
        throw Error(ErrorCode::InvalidParams, "n_intervals must be >= 1");
    }
    if (!(p.overlap_fraction >= 0.0 && p.overlap_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidParams, "overlap_fraction must be in [0, 1)");
    }
    if (p.cluster_eps && !(*p.cluster_eps > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "cluster_eps must be positive");
    }
    if (p.min_cluster_size < 1) {
        throw Error(ErrorCode::InvalidParams, "min_cluster_size must be >= 1");
    }
}

inline double median_pairwise_distance(const Matrix& points) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
            d.push_back((points.row(i) - points.row(j)).norm());
        }
    }
    if (d.empty()) {
        return 0.0;
    }
    const auto mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double upper = d[mid];
    if (d.size() % 2 == 1) {
        return upper;
    }
    double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/**
 * Cover of one lens coordinate: returns, for each interval, the 0-based
 * indices of the points it contains.
 *
 * Interval length L = range / (n - (n - 1) f), consecutive starts are
 * L (1 - f) apart. With f = 0 a point on a shared boundary goes to the
 * lower interval only. A zero range puts every point in every interval.
 */
inline std::vector<std::vector<Eigen::Index>> cover_axis(const Vector& lens, int n_intervals, double overlap) {
    std::vector<std::vector<Eigen::Index>> bins(static_cast<std::size_t>(n_intervals));
    const double lo = lens.minCoeff(), hi = lens.maxCoeff();
    const double range = hi - lo;
    if (!(range > 0.0)) {
        for (auto& b : bins) {
            b.resize(static_cast<std::size_t>(lens.size()));
            std::iota(b.begin(), b.end(), Eigen::Index{0});
        }
        return bins;
    }

    const double length = range / (n_intervals - (n_intervals - 1) * overlap);
    const double step = length * (1.0 - overlap);
    for (Eigen::Index p = 0; p < lens.size(); ++p) {
        const double x = lens[p] - lo;
        if (overlap == 0.0) {
            double pos = x / length;
            auto k = static_cast<long long>(std::floor(pos));
            if (k > 0 && pos == static_cast<double>(k)) {
                --k;
            }
            k = std::clamp<long long>(k, 0, n_intervals - 1);
            bins[static_cast<std::size_t>(k)].push_back(p);
            continue;
        }
        for (int k = 0; k < n_intervals; ++k) {
            const double start = k * step;
            const double end = (k == n_intervals - 1) ? range : start + length;
            if (x >= start && x <= end) {
                bins[static_cast<std::size_t>(k)].push_back(p);
            }
        }
    }
    return bins;
}

/**
 * Connected components of the eps-neighbourhood graph of `members`
 * (single linkage cut at eps). Components are in order of their smallest member.
 */
inline std::vector<std::vector<Eigen::Index>> single_linkage(const Matrix& points, const std::vector<Eigen::Index>& members, double eps) {
    const std::size_t m = members.size();
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            if ((points.row(members[a]) - points.row(members[b])).norm() <= eps) {
                auto ra = find(a), rb = find(b);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
    }
    std::vector<std::vector<Eigen::Index>> clusters;
    std::vector<std::ptrdiff_t> slot(m, -1);
    for (std::size_t a = 0; a < m; ++a) {
        auto r = find(a);
        if (slot[r] < 0) {
            slot[r] = static_cast<std::ptrdiff_t>(clusters.size());
            clusters.emplace_back();
        }
        clusters[static_cast<std::size_t>(slot[r])].push_back(members[a]);
    }
    return clusters;
}

/**
 * Build the Mapper graph of an embedding.
 */
inline MapperGraph mapper_fcn(const Embedding2D& e, const MapperParams& p) {
    validate_mapper_params(p);
    if (e.points.rows() == 0) {
        throw Error(ErrorCode::EmptyEmbedding, "embedding has no points");
    }
    if (e.points.cols() < 2 && p.lens == MapperLens::both_axes_grid) {
        throw Error(ErrorCode::InvalidParams, "grid lens needs two embedding axes");
    }
    if (!e.points.allFinite()) {
        throw Error(ErrorCode::NonFiniteValue, "embedding has non-finite coordinates");
    }

    const double eps = p.cluster_eps ? *p.cluster_eps : 0.5 * median_pairwise_distance(e.points);

    std::vector<std::vector<Eigen::Index>> bins = cover_axis(e.points.col(0), p.n_intervals, p.overlap_fraction);
    if (p.lens == MapperLens::both_axes_grid) {
        auto ybins = cover_axis(e.points.col(1), p.n_intervals, p.overlap_fraction);
        std::vector<std::vector<Eigen::Index>> grid;
        for (const auto& bx : bins) {
            for (const auto& by : ybins) {
                std::vector<Eigen::Index> both;
                std::set_intersection(bx.begin(), bx.end(), by.begin(), by.end(), std::back_inserter(both));
                grid.push_back(std::move(both));
            }
        }
        bins = std::move(grid);
    }

    MapperGraph g;
    for (const auto& bin : bins) {
        if (bin.empty()) continue;
        for (auto& cluster : single_linkage(e.points, bin, eps)) {
            if (static_cast<int>(cluster.size()) < p.min_cluster_size) continue;
            std::vector<int> node;
            node.reserve(cluster.size());
            for (auto idx : cluster) node.push_back(static_cast<int>(idx) + 1);
            std::sort(node.begin(), node.end());
            g.nodes.push_back(std::move(node));
        }
    }

    for (std::size_t a = 0; a < g.nodes.size(); ++a) {
        for (std::size_t b = a + 1; b < g.nodes.size(); ++b) {
            const auto& na = g.nodes[a];
            const auto& nb = g.nodes[b];
            std::size_t ia = 0, ib = 0;
            bool shared = false;
            while (ia < na.size() && ib < nb.size() && !shared) {
                if (na[ia] == nb[ib]) shared = true;
                else if (na[ia] < nb[ib]) ++ia;
                else ++ib;
            }
            if (shared) g.edges.emplace_back(a, b);
        }
    }
    return g;
}

/**
 * Binary adjacency with (i, j) = 1 iff ROIs i and j share at least one node.
 */
inline FcnAdjacency mapper_to_adjacency(const MapperGraph& g, Eigen::Index rois, std::string subject_id = "") {
    FcnAdjacency out;
    out.subject_id = std::move(subject_id);
    out.kind = AdjacencyKind::binary;
    out.values = Matrix::Zero(rois, rois);
    for (const auto& node : g.nodes) {
        for (std::size_t a = 0; a < node.size(); ++a) {
            if (node[a] < 1 || node[a] > rois) {
                throw Error(ErrorCode::InvalidParams, "Mapper node references ROI " + std::to_string(node[a]) + " outside 1.." + std::to_string(rois));
            }
            for (std::size_t b = a + 1; b < node.size(); ++b) {
                if (node[a] == node[b]) continue;
                out.values(node[a] - 1, node[b] - 1) = 1.0;
                out.values(node[b] - 1, node[a] - 1) = 1.0;
            }
        }
    }
    return out;
}

}

#endif
