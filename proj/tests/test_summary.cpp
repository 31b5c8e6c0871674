#include "attnfmri/summary.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace attnfmri;
using namespace attnfmri::summary;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::StageFailure;
}

FcnAdjacency binary(const Matrix& m, std::string id = "") {
    FcnAdjacency a;
    a.values = m;
    a.kind = AdjacencyKind::binary;
    a.subject_id = std::move(id);
    return a;
}

Matrix random_binary(int r, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution b(p);
    Matrix m = Matrix::Zero(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = i + 1; j < r; ++j) m(i, j) = m(j, i) = b(rng) ? 1 : 0;
    return m;
}

std::vector<int> random_subset(int r, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution b(p);
    std::vector<int> out;
    for (int j = 1; j <= r; ++j)
        if (b(rng)) out.push_back(j);
    return out;
}

SummaryFcn sample_summary(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<FcnAdjacency> adjs;
    for (int k = 0; k < 5; ++k) adjs.push_back(binary(random_binary(10, 0.3, rng), "S" + std::to_string(k)));
    return build_summary("AD", adjs, 0.2, {1, 4, 7}, {4}, {1, 4, 7, 8}, {4, 7, 9}, RoiTable::default_for(10));
}

}

TEST(MeanAdjacency, Examples) {
    Matrix a = Matrix::Zero(2, 2), b(2, 2);
    b << 0, 1, 1, 0;
    Matrix half(2, 2);
    half << 0, 0.5, 0.5, 0;
    EXPECT_EQ(group_mean_adjacency({binary(a), binary(b)}), half);
    EXPECT_EQ(group_mean_adjacency({binary(b), binary(b), binary(b)}), b);
    EXPECT_EQ(code_of([&] { group_mean_adjacency({binary(a), binary(Matrix::Zero(3, 3))}); }), ErrorCode::InconsistentR);
}

TEST(Threshold, Examples) {
    Matrix w(3, 3);
    w << 0, 0.2, 0,
         0.2, 0, 0.05,
         0, 0.05, 0;
    Matrix e = threshold_summary(w, 0.2);
    EXPECT_EQ(e(0, 1), 1.0);
    EXPECT_EQ(e(1, 2), 0.0);
    Matrix all = threshold_summary(w, 0.0);
    EXPECT_EQ(all(1, 2), 1.0);
    EXPECT_EQ(all(0, 2), 0.0);
    EXPECT_EQ(threshold_summary(w, 1.01), Matrix::Zero(3, 3));
}

TEST(Threshold, PropertyMonotone) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<FcnAdjacency> adjs;
        for (int k = 0; k < 6; ++k) adjs.push_back(binary(random_binary(8, u(rng), rng)));
        Matrix w = group_mean_adjacency(adjs);
        double t1 = u(rng), t2 = u(rng);
        if (t1 > t2) std::swap(t1, t2);
        Matrix e1 = threshold_summary(w, t1), e2 = threshold_summary(w, t2);
        EXPECT_TRUE(((e2.array() <= e1.array())).all());
        EXPECT_EQ(e1, e1.transpose());
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                if (i != j && w(i, j) > 0) EXPECT_EQ(e1(i, j), w(i, j) >= t1 ? 1.0 : 0.0);
    }
}

TEST(Roles, Examples) {
    Matrix edges = Matrix::Zero(6, 6);
    edges(0, 4) = edges(4, 0) = 1;
    edges(1, 4) = edges(4, 1) = 1;
    edges(2, 5) = edges(5, 2) = 1;
    auto roles = classify_roles({1, 2, 3}, {1}, {1, 2, 3}, {2, 6}, edges);
    EXPECT_EQ(roles[0].role, Role::significant_both);
    EXPECT_EQ(roles[1].role, Role::more_reactive_here);
    EXPECT_EQ(roles[2].role, Role::significant_only_here);
    EXPECT_EQ(roles[3].role, Role::background);
    // ROI 5 touches ROIs 1 and 2; the lower index wins
    EXPECT_EQ(roles[4].role, Role::neighbor_of_significant);
    EXPECT_EQ(roles[4].parent, 1);
    EXPECT_EQ(roles[4].parent_role, Role::significant_both);
    EXPECT_EQ(roles[5].parent, 3);
    EXPECT_EQ(roles[5].parent_role, Role::significant_only_here);

    EXPECT_EQ(code_of([&] { classify_roles({7}, {}, {}, {}, edges); }), ErrorCode::InvalidParams);
}

TEST(Roles, PropertyPartitionOverRandomSets) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> size(1, 20);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const int r = size(rng);
        auto sig_g = random_subset(r, u(rng), rng), sig_h = random_subset(r, u(rng), rng);
        auto top_g = random_subset(r, u(rng), rng), top_h = random_subset(r, u(rng), rng);
        Matrix edges = random_binary(r, u(rng) * 0.5, rng);
        auto roles = classify_roles(sig_g, sig_h, top_g, top_h, edges);
        ASSERT_EQ(roles.size(), static_cast<std::size_t>(r));
        const std::set<int> sg(sig_g.begin(), sig_g.end()), sh(sig_h.begin(), sig_h.end()), th(top_h.begin(), top_h.end());
        for (int j = 1; j <= r; ++j) {
            const auto& rr = roles[static_cast<std::size_t>(j - 1)];
            // oracle: rules evaluated independently, exactly one applies
            const bool green = sg.count(j) && sh.count(j);
            const bool orange = sg.count(j) && th.count(j) && !sh.count(j);
            const bool blue = sg.count(j) && !th.count(j) && !sh.count(j);
            ASSERT_LE(green + orange + blue, 1);
            EXPECT_EQ(rr.role == Role::significant_both, green);
            EXPECT_EQ(rr.role == Role::more_reactive_here, orange);
            EXPECT_EQ(rr.role == Role::significant_only_here, blue);
            if (!sg.count(j)) {
                int parent = 0;
                for (int p = 1; p <= r && !parent; ++p)
                    if (sg.count(p) && edges(j - 1, p - 1) != 0) parent = p;
                EXPECT_EQ(rr.role, parent ? Role::neighbor_of_significant : Role::background);
                EXPECT_EQ(rr.parent, parent);
                if (parent) EXPECT_EQ(rr.parent_role, roles[static_cast<std::size_t>(parent - 1)].role);
            }
        }
    }
}

TEST(Colors, PaletteAndDesaturation) {
    EXPECT_EQ(role_color({Role::significant_both, Role::background, 0}), "#2ca02c");
    EXPECT_EQ(role_color({Role::more_reactive_here, Role::background, 0}), "#ff7f0e");
    EXPECT_EQ(role_color({Role::significant_only_here, Role::background, 0}), "#1f77b4");
    EXPECT_EQ(desaturate("#1f77b4", 1.0), "#1f77b4");
    EXPECT_EQ(desaturate("#1f77b4", 0.0), "#b4b4b4");
    // 40%: each channel moves 60% of the way to the brightest one
    EXPECT_EQ(desaturate("#ff7f0e", 0.4), "#ffcc9f");
    const auto dim = role_color({Role::neighbor_of_significant, Role::significant_only_here, 3});
    EXPECT_EQ(dim, desaturate("#1f77b4", 0.4));
}

TEST(Export, DotWithIsolatedNodes) {
    SummaryFcn s = sample_summary(3);
    s.edges.setZero();
    const auto dot = export_graph(s, ExportFormat::dot);
    EXPECT_EQ(dot.find(" -- "), std::string::npos);
    std::size_t nodes = 0;
    for (std::size_t at = dot.find("[label="); at != std::string::npos; at = dot.find("[label=", at + 1)) ++nodes;
    EXPECT_EQ(nodes, 10u);
    EXPECT_NE(dot.find("Precentral_L"), std::string::npos);
}

TEST(Export, JsonRoundTrip) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = sample_summary(seed);
        auto back = summary_from_json(nlohmann::json::parse(export_graph(s, "json")));
        EXPECT_EQ(back, s);
    }
    EXPECT_EQ(code_of([] { summary_from_json(nlohmann::json::object()); }), ErrorCode::Format);
}

TEST(Export, SvgDeterministicWithSeedMetadata) {
    auto s = sample_summary(4);
    const auto a = export_graph(s, ExportFormat::svg, 17), b = export_graph(s, ExportFormat::svg, 17);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, export_graph(s, ExportFormat::svg, 18));
    EXPECT_NE(a.find("\"layout_seed\":17"), std::string::npos);
    EXPECT_EQ(a.rfind("<svg", 0), 0u);
}

TEST(Export, UnknownFormat) {
    auto s = sample_summary(5);
    EXPECT_EQ(code_of([&] { export_graph(s, "png"); }), ErrorCode::UnknownFormat);
    EXPECT_EQ(code_of([] { parse_export_format("DOT"); }), ErrorCode::UnknownFormat);
}

TEST(Components, ColoredSubgraphs) {
    auto s = sample_summary(6);
    auto comps = colored_components(s);
    std::set<int> seen;
    for (const auto& c : comps)
        for (int j : c) {
            EXPECT_NE(s.roles[static_cast<std::size_t>(j - 1)].role, Role::background);
            EXPECT_TRUE(seen.insert(j).second);
        }
    std::size_t colored = 0;
    for (const auto& r : s.roles) colored += r.role != Role::background;
    EXPECT_EQ(seen.size(), colored);
}
