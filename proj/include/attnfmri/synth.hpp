#ifndef ATTNFMRI_SYNTH_HPP
#define ATTNFMRI_SYNTH_HPP

#include "core.hpp"
#include "data_model.hpp"
#include "parallel.hpp"

#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

/**
 * @file synth.hpp
 *
 * @brief Synthetic cohorts with planted group-differential connectivity.
 *
 * Each subject's ROI signal is a community latent scaled by a loading plus
 * Gaussian noise. ROIs touched by a group's differential pairs load with
 * `coupling_weak` instead of `coupling_strong`, which lowers their
 * within-community correlation in that group only.
 */

namespace attnfmri {

struct SynthSpec {
    int rois = 20;
    int timepoints = 200;
    std::vector<std::pair<std::string, int>> groups{{"A", 40}, {"B", 40}};

    /// Partition of 1-based ROI indices into latent communities.
    std::vector<std::vector<int>> blocks;

    /// Per-group 1-based ROI pairs whose coupling is weakened in that group.
    std::map<std::string, std::vector<std::pair<int, int>>> differential_edges;

    double coupling_strong = 0.9;
    double coupling_weak = 0.1;
    double noise_sd = 0.5;
    int smoothing_window = 5;
    std::uint64_t seed = 20240501;
};

/**
 * Contiguous partition of 1..rois into `n_blocks` near-equal communities.
 */
inline std::vector<std::vector<int>> contiguous_blocks(int rois, int n_blocks) {
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(n_blocks));
    for (int i = 0; i < rois; ++i) {
        blocks[static_cast<std::size_t>(static_cast<long long>(i) * n_blocks / rois)].push_back(i + 1);
    }
    return blocks;
}

/**
 * All unordered pairs within one block.
 */
inline std::vector<std::pair<int, int>> block_pairs(const std::vector<int>& block) {
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t a = 0; a < block.size(); ++a) {
        for (std::size_t b = a + 1; b < block.size(); ++b) {
            pairs.emplace_back(block[a], block[b]);
        }
    }
    return pairs;
}

/**
 * Desk-scale default: two groups of 40, 20 ROIs in 4 communities of 5, and the
 * first community decoupled in group "B".
 */
inline SynthSpec default_synth_spec(std::uint64_t seed = 20240501) {
    SynthSpec spec;
    spec.seed = seed;
    spec.blocks = contiguous_blocks(spec.rois, 4);
    spec.differential_edges["B"] = block_pairs(spec.blocks[0]);
    return spec;
}

inline void validate_synth_spec(const SynthSpec& spec) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
    if (spec.rois < 2) fail("need at least 2 ROIs");
    if (spec.timepoints < 3) fail("need at least 3 timepoints");
    if (spec.groups.empty()) fail("need at least one group");
    for (const auto& [label, n] : spec.groups) {
        if (label.empty()) fail("group label must be non-empty");
        if (n < 1) fail("group '" + label + "' must have at least one subject");
    }
    if (!(spec.coupling_strong > spec.coupling_weak) || spec.coupling_weak < 0.0) fail("need coupling_strong > coupling_weak >= 0");
    if (!(spec.noise_sd > 0.0)) fail("noise_sd must be positive");
    if (spec.smoothing_window < 1) fail("smoothing_window must be >= 1");

    std::vector<int> seen(static_cast<std::size_t>(spec.rois), 0);
    for (const auto& block : spec.blocks) {
        for (int r : block) {
            if (r < 1 || r > spec.rois) fail("block references ROI " + std::to_string(r) + " outside 1.." + std::to_string(spec.rois));
            if (seen[static_cast<std::size_t>(r - 1)]++) fail("ROI " + std::to_string(r) + " appears in more than one block");
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) fail("ROI " + std::to_string(i + 1) + " is not assigned to a block");
    }
    for (const auto& [label, pairs] : spec.differential_edges) {
        bool known = false;
        for (const auto& g : spec.groups) known = known || g.first == label;
        if (!known) fail("differential edges reference unknown group '" + label + "'");
        for (const auto& [a, b] : pairs) {
            if (a < 1 || a > spec.rois || b < 1 || b > spec.rois || a == b) {
                fail("differential edge (" + std::to_string(a) + "," + std::to_string(b) + ") is not a valid ROI pair");
            }
        }
    }
}

/// @cond
namespace detail {

inline Vector smooth_latent(Rng& rng, int timepoints, int window) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector raw(timepoints + window - 1);
    for (Eigen::Index t = 0; t < raw.size(); ++t) {
        raw[t] = normal(rng);
    }
    Vector out(timepoints);
    for (int t = 0; t < timepoints; ++t) {
        out[t] = raw.segment(t, window).mean();
    }
    out.array() -= out.mean();
    const double sd = std::sqrt(out.squaredNorm() / (timepoints - 1));
    if (sd > 0) {
        out /= sd;
    }
    return out;
}

}
/// @endcond

/**
 * Generate a deterministic cohort. Subject k of group g draws from a stream
 * seeded by (seed, g, k), so adding subjects never changes earlier ones.
 */
inline Cohort generate_cohort(const SynthSpec& spec, int threads = 1) {
    validate_synth_spec(spec);
    auto table = std::make_shared<const RoiTable>(RoiTable::default_for(static_cast<std::size_t>(spec.rois)));

    std::vector<int> block_of(static_cast<std::size_t>(spec.rois));
    for (std::size_t c = 0; c < spec.blocks.size(); ++c) {
        for (int r : spec.blocks[c]) {
            block_of[static_cast<std::size_t>(r - 1)] = static_cast<int>(c);
        }
    }

    Cohort cohort;
    for (const auto& [label, count] : spec.groups) {
        Vector loading = Vector::Constant(spec.rois, spec.coupling_strong);
        if (auto it = spec.differential_edges.find(label); it != spec.differential_edges.end()) {
            for (const auto& [a, b] : it->second) {
                loading[a - 1] = spec.coupling_weak;
                loading[b - 1] = spec.coupling_weak;
            }
        }

        CohortGroup group;
        group.label = label;
        group.subjects.resize(static_cast<std::size_t>(count));
        const std::uint64_t group_seed = derive_seed(spec.seed, label);

        parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t k) {
            Rng rng(derive_seed(group_seed, static_cast<std::uint64_t>(k)));
            std::vector<Vector> latents;
            for (std::size_t c = 0; c < spec.blocks.size(); ++c) {
                latents.push_back(detail::smooth_latent(rng, spec.timepoints, spec.smoothing_window));
            }
            std::normal_distribution<double> noise(0.0, spec.noise_sd);

            BoldMatrix b;
            char id[64];
            std::snprintf(id, sizeof(id), "%s_%03zu", label.c_str(), k + 1);
            b.subject_id = id;
            b.group = label;
            b.roi_table = table;
            b.values.resize(spec.rois, spec.timepoints);
            for (int i = 0; i < spec.rois; ++i) {
                const auto& s = latents[static_cast<std::size_t>(block_of[static_cast<std::size_t>(i)])];
                for (int t = 0; t < spec.timepoints; ++t) {
                    b.values(i, t) = loading[i] * s[t] + noise(rng);
                }
            }
            group.subjects[k] = std::move(b);
        });
        cohort.groups.push_back(std::move(group));
    }
    return cohort;
}

}

#endif
