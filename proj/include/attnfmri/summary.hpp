#ifndef ATTNFMRI_SUMMARY_HPP
#define ATTNFMRI_SUMMARY_HPP

#include "core.hpp"
#include "data_model.hpp"
#include "text.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <string>
#include <vector>

/**
 * @file summary.hpp
 *
 * @brief Group summary networks: mean adjacency, thresholding, ROI roles and
 * DOT / JSON / SVG export.
 */

namespace attnfmri::summary {

/**
 * Elementwise mean over subjects.
 */
inline Matrix group_mean_adjacency(const std::vector<FcnAdjacency>& adjs) {
    if (adjs.empty()) {
        throw Error(ErrorCode::InvalidParams, "no adjacency matrices to average");
    }
    const Eigen::Index r = adjs.front().values.rows();
    Matrix sum = Matrix::Zero(r, r);
    for (const auto& a : adjs) {
        if (a.values.rows() != r || a.values.cols() != r) {
            throw Error(ErrorCode::InconsistentR, "subject '" + a.subject_id + "' has " + std::to_string(a.values.rows()) + " ROIs, expected " + std::to_string(r));
        }
        sum += a.values;
    }
    return sum / static_cast<double>(adjs.size());
}

/**
 * Edge wherever weight >= t and weight > 0, off the diagonal. A threshold
 * above 1 gives an empty graph.
 */
inline Matrix threshold_summary(const Matrix& w, double t = 0.2) {
    if (std::isnan(t)) {
        throw Error(ErrorCode::InvalidParams, "threshold is NaN");
    }
    Matrix e = Matrix::Zero(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            if (i != j && w(i, j) >= t && w(i, j) > 0.0) e(i, j) = 1.0;
        }
    }
    return e;
}

enum class Role {
    significant_both,        ///< green
    more_reactive_here,      ///< orange
    significant_only_here,   ///< blue
    neighbor_of_significant, ///< dimmed parent colour
    background
};

inline const char* to_string(Role r) {
    switch (r) {
        case Role::significant_both: return "significant_both";
        case Role::more_reactive_here: return "more_reactive_here";
        case Role::significant_only_here: return "significant_only_here";
        case Role::neighbor_of_significant: return "neighbor_of_significant";
        case Role::background: return "background";
    }
    return "unknown";
}

inline Role parse_role(const std::string& s) {
    for (Role r : {Role::significant_both, Role::more_reactive_here, Role::significant_only_here, Role::neighbor_of_significant, Role::background}) {
        if (s == to_string(r)) return r;
    }
    throw Error(ErrorCode::Format, "unknown ROI role '" + s + "'");
}

struct RoiRole {
    Role role = Role::background;
    Role parent_role = Role::background; ///< Colour source for neighbours.
    int parent = 0;                      ///< 1-based parent ROI for neighbours, else 0.

    bool operator==(const RoiRole&) const = default;
};

inline bool is_significant(Role r) {
    return r == Role::significant_both || r == Role::more_reactive_here || r == Role::significant_only_here;
}

/**
 * Roles of group g's ROIs. `sig_*` are near-origin sets, `top_*` the
 * top-quartile candidate sets, all 1-based. `edges_g` is g's thresholded
 * summary adjacency.
 */
inline std::vector<RoiRole> classify_roles(const std::vector<int>& sig_g, const std::vector<int>& sig_h, const std::vector<int>& top_g, const std::vector<int>& top_h, const Matrix& edges_g) {
    const auto r = static_cast<int>(edges_g.rows());
    auto as_set = [r](const std::vector<int>& v, const char* what) {
        std::set<int> s;
        for (int x : v) {
            if (x < 1 || x > r) {
                throw Error(ErrorCode::InvalidParams, std::string(what) + " contains ROI " + std::to_string(x) + " outside 1.." + std::to_string(r));
            }
            s.insert(x);
        }
        return s;
    };
    const auto sg = as_set(sig_g, "sig_g"), sh = as_set(sig_h, "sig_h"), th = as_set(top_h, "top_h");
    as_set(top_g, "top_g");

    std::vector<RoiRole> roles(static_cast<std::size_t>(r));
    for (int j : sg) {
        auto& role = roles[static_cast<std::size_t>(j - 1)].role;
        if (sh.count(j)) {
            role = Role::significant_both;
        } else if (th.count(j)) {
            role = Role::more_reactive_here;
        } else {
            role = Role::significant_only_here;
        }
    }
    for (int j = 0; j < r; ++j) {
        auto& rj = roles[static_cast<std::size_t>(j)];
        if (rj.role != Role::background) continue;
        for (int p = 0; p < r; ++p) {
            if (p != j && edges_g(j, p) != 0.0 && is_significant(roles[static_cast<std::size_t>(p)].role)) {
                rj.role = Role::neighbor_of_significant;
                rj.parent_role = roles[static_cast<std::size_t>(p)].role;
                rj.parent = p + 1;
                break;
            }
        }
    }
    return roles;
}

struct SummaryFcn {
    std::string group;
    double threshold = 0.2;
    std::vector<std::string> roi_names;
    Matrix weights;
    Matrix edges;
    std::vector<RoiRole> roles;

    bool operator==(const SummaryFcn& o) const {
        return group == o.group && threshold == o.threshold && roi_names == o.roi_names && weights == o.weights && edges == o.edges && roles == o.roles;
    }
};

inline SummaryFcn build_summary(std::string group, const std::vector<FcnAdjacency>& adjs, double threshold, const std::vector<int>& sig_g, const std::vector<int>& sig_h, const std::vector<int>& top_g, const std::vector<int>& top_h, const RoiTable& table) {
    SummaryFcn s;
    s.group = std::move(group);
    s.threshold = threshold;
    s.weights = group_mean_adjacency(adjs);
    if (table.size() != static_cast<std::size_t>(s.weights.rows())) {
        throw Error(ErrorCode::InconsistentR, "ROI table does not match the adjacency size");
    }
    for (const auto& e : table.entries()) s.roi_names.push_back(e.name);
    s.edges = threshold_summary(s.weights, threshold);
    s.roles = classify_roles(sig_g, sig_h, top_g, top_h, s.edges);
    return s;
}

/**
 * Connected components of the subgraph induced on non-background ROIs,
 * each sorted, ordered by smallest member.
 */
inline std::vector<std::vector<int>> colored_components(const SummaryFcn& s) {
    const auto r = static_cast<int>(s.roles.size());
    std::vector<int> comp(static_cast<std::size_t>(r), -1);
    std::vector<std::vector<int>> out;
    for (int start = 0; start < r; ++start) {
        if (s.roles[static_cast<std::size_t>(start)].role == Role::background || comp[static_cast<std::size_t>(start)] >= 0) continue;
        std::vector<int> stack{start}, members;
        comp[static_cast<std::size_t>(start)] = static_cast<int>(out.size());
        while (!stack.empty()) {
            const int j = stack.back();
            stack.pop_back();
            members.push_back(j + 1);
            for (int k = 0; k < r; ++k) {
                if (s.edges(j, k) != 0.0 && comp[static_cast<std::size_t>(k)] < 0 && s.roles[static_cast<std::size_t>(k)].role != Role::background) {
                    comp[static_cast<std::size_t>(k)] = comp[static_cast<std::size_t>(start)];
                    stack.push_back(k);
                }
            }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    return out;
}

// ---- colours ----

inline constexpr const char* color_blue = "#1f77b4";
inline constexpr const char* color_orange = "#ff7f0e";
inline constexpr const char* color_green = "#2ca02c";
inline constexpr const char* color_background = "#d3d3d3";

/// Same hue and value with saturation scaled by `factor`.
inline std::string desaturate(const std::string& hex, double factor) {
    unsigned rgb[3];
    std::sscanf(hex.c_str() + 1, "%02x%02x%02x", &rgb[0], &rgb[1], &rgb[2]);
    const double mx = std::max({rgb[0], rgb[1], rgb[2]}) / 255.0;
    char buf[8];
    unsigned out[3];
    for (int c = 0; c < 3; ++c) {
        // channel = v * (1 - s * (1 - f)) with s scaled keeps hue and value
        const double ch = rgb[c] / 255.0;
        const double scaled = mx - factor * (mx - ch);
        out[c] = static_cast<unsigned>(std::lround(scaled * 255.0));
    }
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", out[0], out[1], out[2]);
    return buf;
}

inline std::string role_color(const RoiRole& r) {
    switch (r.role) {
        case Role::significant_both: return color_green;
        case Role::more_reactive_here: return color_orange;
        case Role::significant_only_here: return color_blue;
        case Role::neighbor_of_significant: return desaturate(role_color({r.parent_role, Role::background, 0}), 0.4);
        case Role::background: return color_background;
    }
    return color_background;
}

enum class ExportFormat { dot, json, svg };

inline ExportFormat parse_export_format(const std::string& s) {
    if (s == "dot") return ExportFormat::dot;
    if (s == "json") return ExportFormat::json;
    if (s == "svg") return ExportFormat::svg;
    throw Error(ErrorCode::UnknownFormat, "unknown export format '" + s + "'");
}

inline std::string escape_quoted(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string to_dot(const SummaryFcn& s) {
    std::string out = "graph \"" + escape_quoted(s.group) + "\" {\n  node [style=filled, shape=ellipse];\n";
    for (std::size_t j = 0; j < s.roles.size(); ++j) {
        out += "  n" + std::to_string(j + 1) + " [label=\"" + escape_quoted(s.roi_names.at(j)) + "\", fillcolor=\"" + role_color(s.roles[j]) + "\", role=\"" + to_string(s.roles[j].role) + "\"];\n";
    }
    for (Eigen::Index i = 0; i < s.edges.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < s.edges.cols(); ++j) {
            if (s.edges(i, j) != 0.0) {
                out += "  n" + std::to_string(i + 1) + " -- n" + std::to_string(j + 1) + " [weight=" + format_double(s.weights(i, j)) + "];\n";
            }
        }
    }
    out += "}\n";
    return out;
}

inline nlohmann::json to_json(const SummaryFcn& s) {
    nlohmann::json roles = nlohmann::json::array();
    for (std::size_t j = 0; j < s.roles.size(); ++j) {
        nlohmann::json r = {{"roi", j + 1}, {"name", s.roi_names.at(j)}, {"role", to_string(s.roles[j].role)}, {"color", role_color(s.roles[j])}};
        if (s.roles[j].role == Role::neighbor_of_significant) {
            r["parent"] = s.roles[j].parent;
            r["parent_role"] = to_string(s.roles[j].parent_role);
        }
        roles.push_back(std::move(r));
    }
    return {{"group", s.group},
            {"threshold", s.threshold},
            {"roi_names", s.roi_names},
            {"weights", matrix_rows_json(s.weights)},
            {"edges", matrix_rows_json(s.edges)},
            {"roles", roles},
            {"components", colored_components(s)}};
}

inline SummaryFcn summary_from_json(const nlohmann::json& j) {
    try {
        SummaryFcn s;
        s.group = j.at("group").get<std::string>();
        s.threshold = j.at("threshold").get<double>();
        s.roi_names = j.at("roi_names").get<std::vector<std::string>>();
        s.weights = matrix_from_rows_json(j.at("weights"));
        s.edges = matrix_from_rows_json(j.at("edges"));
        for (const auto& r : j.at("roles")) {
            RoiRole role;
            role.role = parse_role(r.at("role").get<std::string>());
            if (role.role == Role::neighbor_of_significant) {
                role.parent = r.at("parent").get<int>();
                role.parent_role = parse_role(r.at("parent_role").get<std::string>());
            }
            s.roles.push_back(role);
        }
        if (s.roles.size() != s.roi_names.size() || static_cast<std::size_t>(s.weights.rows()) != s.roles.size()) {
            throw Error(ErrorCode::Format, "summary JSON sizes disagree");
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Format, std::string("summary JSON: ") + e.what());
    }
}

struct Layout {
    Matrix xy; ///< R x 2, inside [0, width] x [0, height].
};

/**
 * Fruchterman-Reingold with a seeded uniform start.
 */
inline Layout force_layout(const Matrix& edges, std::uint64_t seed, double width = 800, double height = 800, int iterations = 300) {
    const Eigen::Index n = edges.rows();
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(0.0, width), uy(0.0, height);
    Layout l{Matrix(n, 2)};
    for (Eigen::Index i = 0; i < n; ++i) {
        l.xy(i, 0) = ux(rng);
        l.xy(i, 1) = uy(rng);
    }
    if (n < 2) return l;
    const double k = std::sqrt(width * height / static_cast<double>(n));
    Matrix disp(n, 2);
    for (int it = 0; it < iterations; ++it) {
        const double temp = 0.1 * width * (1.0 - static_cast<double>(it) / iterations);
        disp.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                Eigen::RowVector2d delta = l.xy.row(i) - l.xy.row(j);
                const double dist = std::max(delta.norm(), 1e-6);
                double force = k * k / dist;
                if (edges(i, j) != 0.0) force -= dist * dist / k;
                const Eigen::RowVector2d f = delta / dist * force;
                disp.row(i) += f;
                disp.row(j) -= f;
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double len = disp.row(i).norm();
            if (len > 0.0) l.xy.row(i) += disp.row(i) / len * std::min(len, temp);
            l.xy(i, 0) = std::clamp(l.xy(i, 0), 0.0, width);
            l.xy(i, 1) = std::clamp(l.xy(i, 1), 0.0, height);
        }
    }
    return l;
}

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string to_svg(const SummaryFcn& s, std::uint64_t layout_seed) {
    const double margin = 40, size = 800;
    const Layout l = force_layout(s.edges, layout_seed, size, size);
    auto px = [&](Eigen::Index i, int c) { return fixed2(margin + l.xy(i, c)); };
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed2(size + 2 * margin) + "\" height=\"" + fixed2(size + 2 * margin) + "\">\n";
    out += "<metadata>{\"group\":\"" + xml_escape(s.group) + "\",\"layout\":\"fruchterman-reingold\",\"layout_seed\":" + std::to_string(layout_seed) + ",\"threshold\":" + format_double(s.threshold) + "}</metadata>\n";
    out += "<g stroke=\"#999999\" stroke-width=\"1\">\n";
    for (Eigen::Index i = 0; i < s.edges.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < s.edges.cols(); ++j) {
            if (s.edges(i, j) != 0.0) {
                out += "<line x1=\"" + px(i, 0) + "\" y1=\"" + px(i, 1) + "\" x2=\"" + px(j, 0) + "\" y2=\"" + px(j, 1) + "\"/>\n";
            }
        }
    }
    out += "</g>\n<g font-family=\"sans-serif\" font-size=\"9\">\n";
    for (std::size_t j = 0; j < s.roles.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        out += "<circle cx=\"" + px(i, 0) + "\" cy=\"" + px(i, 1) + "\" r=\"7\" fill=\"" + role_color(s.roles[j]) + "\"><title>" + xml_escape(s.roi_names.at(j)) + "</title></circle>\n";
        if (s.roles[j].role != Role::background) {
            out += "<text x=\"" + fixed2(margin + l.xy(i, 0) + 9) + "\" y=\"" + px(i, 1) + "\">" + xml_escape(s.roi_names.at(j)) + "</text>\n";
        }
    }
    out += "</g>\n</svg>\n";
    return out;
}

inline std::string export_graph(const SummaryFcn& s, ExportFormat f, std::uint64_t layout_seed = 0) {
    switch (f) {
        case ExportFormat::dot: return to_dot(s);
        case ExportFormat::json: return to_json(s).dump(2) + "\n";
        case ExportFormat::svg: return to_svg(s, layout_seed);
    }
    throw Error(ErrorCode::UnknownFormat, "unknown export format");
}

inline std::string export_graph(const SummaryFcn& s, const std::string& format, std::uint64_t layout_seed = 0) {
    return export_graph(s, parse_export_format(format), layout_seed);
}

}

#endif
