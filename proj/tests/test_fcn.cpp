#include "attnfmri/fcn.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace attnfmri;
using namespace attnfmri::fcn;

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

BoldMatrix bold(const Matrix& v, std::string id = "S") {
    BoldMatrix b;
    b.subject_id = std::move(id);
    b.values = v;
    b.roi_table = std::make_shared<const RoiTable>(RoiTable::default_for(static_cast<std::size_t>(v.rows())));
    return b;
}

// Two groups of ROIs around distant centres in signal space.
Matrix two_clusters(int per, int t, std::mt19937_64& rng) {
    Matrix m = oracle::gaussian(2 * per, t, rng);
    m.bottomRows(per).array() += 6.0;
    return m;
}

// Embedded centroid distance beats every within-cluster distance.
bool separated(const Matrix& y, int per) {
    const Eigen::RowVector2d c0 = y.topRows(per).colwise().mean();
    const Eigen::RowVector2d c1 = y.bottomRows(per).colwise().mean();
    double within = 0;
    for (int i = 0; i < 2 * per; ++i)
        for (int j = i + 1; j < 2 * per; ++j)
            if ((i < per) == (j < per)) within = std::max(within, (y.row(i) - y.row(j)).norm());
    return (c0 - c1).norm() > within;
}

Embedding2D points(std::initializer_list<std::pair<double, double>> p) {
    Embedding2D e;
    e.points.resize(static_cast<Eigen::Index>(p.size()), 2);
    Eigen::Index i = 0;
    for (auto [x, y] : p) {
        e.points(i, 0) = x;
        e.points(i, 1) = y;
        ++i;
    }
    return e;
}

}

TEST(Pearson, Examples) {
    Matrix m(4, 3);
    m << 1, 2, 3,
         3, 5, 7,
         -1, -2, -3,
         1, 3, 2;
    auto c = pearson_matrix(bold(m));
    EXPECT_NEAR(c.values(0, 1), 1.0, 1e-12);
    EXPECT_NEAR(c.values(0, 2), -1.0, 1e-12);
    EXPECT_NEAR(c.values(0, 3), oracle::pearson({1, 2, 3}, {1, 3, 2}), 1e-12);
    EXPECT_NEAR(c.values(0, 3), 0.5, 1e-12);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(c.values(i, i), 1.0);
}

TEST(Pearson, ZeroVarianceRowReported) {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 4, 4;
    try {
        pearson_matrix(bold(m));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVarianceRow);
        EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
    }
}

TEST(Pearson, PropertyMatchesOracleAndAffineInvariance) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> scale(0.1, 10), shift(-5, 5);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix m = oracle::gaussian(6, 20, rng);
        auto c = pearson_matrix(bold(m));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                if (i != j) EXPECT_NEAR(c.values(i, j), oracle::pearson(oracle::row(m, i), oracle::row(m, j)), 1e-12);
        Matrix moved = m;
        for (int i = 0; i < 6; ++i) moved.row(i) = moved.row(i) * scale(rng) + Eigen::RowVectorXd::Constant(20, shift(rng));
        auto c2 = pearson_matrix(bold(moved));
        EXPECT_LE((c.values - c2.values).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE((c.values - c.values.transpose()).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(FisherZ, ExamplesAndOddness) {
    Matrix r(3, 3);
    r << 1, 0, 0.5,
         0, 1, -0.5,
         0.5, -0.5, 1;
    auto z = fisher_z(CorrMatrix{r, CorrScale::pearson_r});
    EXPECT_EQ(z.scale, CorrScale::fisher_z);
    EXPECT_EQ(z.values(0, 1), 0.0);
    EXPECT_NEAR(z.values(0, 2), oracle::atanh_series(0.5), 1e-12);
    EXPECT_NEAR(z.values(0, 2), 0.5493061, 1e-7);
    EXPECT_EQ(z.values(1, 2), -z.values(0, 2));
    EXPECT_EQ(z.values.diagonal(), Vector::Zero(3));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.999, 0.999);
    for (int i = 0; i < 200; ++i) {
        const double x = u(rng);
        Matrix a(2, 2), b(2, 2);
        a << 1, x, x, 1;
        b << 1, -x, -x, 1;
        EXPECT_EQ(fisher_z(CorrMatrix{a, CorrScale::pearson_r}).values(0, 1), -fisher_z(CorrMatrix{b, CorrScale::pearson_r}).values(0, 1));
    }
}

TEST(FisherZ, PerfectCorrelation) {
    Matrix r(2, 2);
    r << 1, 1, 1, 1;
    EXPECT_EQ(code_of([&] { fisher_z(CorrMatrix{r, CorrScale::pearson_r}); }), ErrorCode::PerfectCorrelation);
}

TEST(CorrAdjacency, Examples) {
    Matrix r(3, 3);
    r << 1, 0.2, -0.5,
         0.2, 1, 0.1,
         -0.5, 0.1, 1;
    CorrMatrix c{r, CorrScale::pearson_r};
    auto a = corr_to_adjacency(c, 0.2);
    EXPECT_EQ(a.values(0, 1), 1.0);
    EXPECT_EQ(a.values(1, 2), 0.0);
    EXPECT_EQ(corr_to_adjacency(c, 0.4).values(0, 2), 1.0);
    EXPECT_EQ(corr_to_adjacency(c, 1.01).values, Matrix::Zero(3, 3));
    EXPECT_EQ(a.values.diagonal(), Vector::Zero(3));
}

TEST(Pca, RankOneHasZeroSecondAxis) {
    Matrix m(4, 5);
    const Eigen::RowVectorXd dir = (Eigen::RowVectorXd(5) << 1, -2, 0.5, 3, 1).finished();
    for (int i = 0; i < 4; ++i) m.row(i) = (i - 1.5) * dir;
    auto e = pca_embed(m);
    EXPECT_TRUE(e.degenerate);
    EXPECT_LE(e.points.col(1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, ThreePointHandExample) {
    Matrix m(3, 2);
    m << 1, 0, 0, 1, -1, 0;
    auto e = pca_embed(m);
    // Centred over time and across ROIs: (2/3,-2/3), (-1/3,1/3), (-1/3,1/3); the first
    // direction is (1,-1)/sqrt2 up to sign.
    const double s = std::sqrt(2.0);
    EXPECT_NEAR(std::abs(e.points(0, 0)), 2 * s / 3, 1e-12);
    EXPECT_NEAR(std::abs(e.points(2, 0)), s / 3, 1e-12);
    EXPECT_LT(e.points(0, 0) * e.points(2, 0), 0.0);
}

TEST(Pca, VarianceOrderingAndSignConvention) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        Matrix m = oracle::gaussian(12, 8, rng);
        auto e = pca_embed(m);
        auto var = [&](int k) {
            auto c = oracle::col(e.points, k);
            const double mu = oracle::mean(c);
            double s = 0;
            for (double v : c) s += (v - mu) * (v - mu);
            return s;
        };
        EXPECT_GE(var(0), var(1) - 1e-12);
        EXPECT_FALSE(e.degenerate);
    }
}

TEST(Tsne, SeparatesTwoClustersOverSeeds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(100 + seed);
        Matrix m = two_clusters(10, 30, rng);
        TsneParams p;
        p.seed = seed;
        auto r = tsne_run(m, p);
        EXPECT_TRUE(separated(r.embedding.points, 10)) << "seed " << seed;
    }
}

TEST(Tsne, KlSettlesAndProbabilitiesNormalised) {
    std::mt19937_64 rng(7);
    Matrix m = two_clusters(10, 30, rng);
    auto r = tsne_run(m, TsneParams{});
    ASSERT_EQ(r.kl_trace.size(), 1000u);
    for (std::size_t i = r.kl_trace.size() - 100; i < r.kl_trace.size(); ++i) EXPECT_LE(r.kl_trace[i], r.kl_trace[i - 1] + 1e-3);
    for (Eigen::Index i = 0; i < m.rows(); ++i) EXPECT_NEAR(r.conditional_p.row(i).sum(), 1.0, 1e-9);
    EXPECT_NEAR(r.joint_p.sum(), 1.0, 1e-9);
    EXPECT_LE((r.joint_p - r.joint_p.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Tsne, PerplexityBisectionHitsTarget) {
    std::mt19937_64 rng(8);
    Matrix m = oracle::gaussian(15, 6, rng);
    const double perp = 4.0;
    Matrix p = conditional_probabilities(squared_distances(m), perp, 1e-5);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        double h = 0;
        for (Eigen::Index j = 0; j < p.cols(); ++j)
            if (p(i, j) > 0) h -= p(i, j) * std::log(p(i, j));
        EXPECT_NEAR(h, std::log(perp), 1e-5);
        EXPECT_EQ(p(i, i), 0.0);
    }
}

TEST(Tsne, DeterministicAndValidated) {
    std::mt19937_64 rng(9);
    Matrix m = oracle::gaussian(12, 5, rng);
    TsneParams p;
    p.n_iter = 300;
    EXPECT_EQ(tsne_embed(m, p).points, tsne_embed(m, p).points);
    p.perplexity = 12;
    EXPECT_EQ(code_of([&] { tsne_embed(m, p); }), ErrorCode::PerplexityTooLarge);
    p.perplexity = 0.5;
    EXPECT_NE(code_of([&] { tsne_embed(m, p); }), ErrorCode::PerplexityTooLarge);
}

TEST(Umap, SeparatesTwoClustersOverSeeds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(200 + seed);
        Matrix m = two_clusters(10, 30, rng);
        UmapParams p;
        p.seed = seed;
        EXPECT_TRUE(separated(umap_embed(m, p).points, 10)) << "seed " << seed;
    }
}

TEST(Umap, MembershipsAndBandwidths) {
    std::mt19937_64 rng(10);
    Matrix m = oracle::gaussian(20, 8, rng);
    UmapParams p;
    auto g = umap_graph(m, p);
    Matrix dist = squared_distances(m).cwiseSqrt();
    ASSERT_FALSE(g.symmetric.empty());
    for (const auto& e : g.directed) {
        EXPECT_GT(e.weight, 0.0);
        EXPECT_LE(e.weight, 1.0);
    }
    for (const auto& e : g.symmetric) {
        EXPECT_GT(e.weight, 0.0);
        EXPECT_LE(e.weight, 1.0);
        EXPECT_LT(e.from, e.to);
    }
    // Each point's memberships sum to log2(k).
    std::vector<double> total(20, 0.0);
    for (const auto& e : g.directed) total[static_cast<std::size_t>(e.from)] += e.weight;
    for (double t : total) EXPECT_NEAR(t, std::log2(10.0), 1e-4);
    // rho is the nearest-neighbour distance.
    for (int i = 0; i < 20; ++i) {
        double nn = std::numeric_limits<double>::infinity();
        for (int j = 0; j < 20; ++j)
            if (j != i) nn = std::min(nn, dist(i, j));
        EXPECT_NEAR(g.rho[i], nn, 1e-12);
    }
}

TEST(Umap, FuzzyUnion) {
    std::mt19937_64 rng(12);
    Matrix m = oracle::gaussian(12, 4, rng);
    UmapParams p;
    p.n_neighbors = 4;
    auto g = umap_graph(m, p);
    Matrix w = Matrix::Zero(12, 12);
    for (const auto& e : g.directed) w(e.from, e.to) = e.weight;
    std::size_t count = 0;
    for (int i = 0; i < 12; ++i)
        for (int j = i + 1; j < 12; ++j)
            if (w(i, j) > 0 || w(j, i) > 0) ++count;
    ASSERT_EQ(g.symmetric.size(), count);
    for (const auto& e : g.symmetric) {
        const double a = w(e.from, e.to), b = w(e.to, e.from);
        EXPECT_NEAR(e.weight, a + b - a * b, 1e-15);
    }
}

TEST(Umap, DeterministicAndValidated) {
    std::mt19937_64 rng(13);
    Matrix m = oracle::gaussian(15, 6, rng);
    UmapParams p;
    p.seed = 77;
    EXPECT_EQ(umap_embed(m, p).points, umap_embed(m, p).points);
    p.n_neighbors = 15;
    EXPECT_EQ(code_of([&] { umap_embed(m, p); }), ErrorCode::TooFewNeighbors);
    p.n_neighbors = 1;
    EXPECT_EQ(code_of([&] { umap_embed(m, p); }), ErrorCode::TooFewNeighbors);
}

TEST(Umap, CurveFit) {
    auto [a, b] = fit_ab(0.1, 1.0);
    EXPECT_NEAR(a, 1.577, 0.05);
    EXPECT_NEAR(b, 0.895, 0.05);
}

TEST(Mapper, FourPointExample) {
    MapperParams p;
    p.n_intervals = 2;
    p.overlap_fraction = 0.2;
    p.cluster_eps = 1.0;
    auto g = mapper_fcn(points({{0, 0}, {0.1, 0}, {10, 0}, {10.1, 0}}), p);
    ASSERT_EQ(g.nodes.size(), 2u);
    EXPECT_EQ(g.nodes[0], (std::vector<int>{1, 2}));
    EXPECT_EQ(g.nodes[1], (std::vector<int>{3, 4}));
    EXPECT_TRUE(g.edges.empty());
}

TEST(Mapper, IdenticalPoints) {
    MapperParams p;
    p.n_intervals = 4;
    p.cluster_eps = 0.5;
    auto g = mapper_fcn(points({{1, 1}, {1, 1}, {1, 1}}), p);
    ASSERT_EQ(g.nodes.size(), 4u);
    EXPECT_EQ(g.edges.size(), 6u);
}

TEST(Mapper, ZeroOverlapGivesNoEdges) {
    std::mt19937_64 rng(14);
    MapperParams p;
    p.overlap_fraction = 0.0;
    p.n_intervals = 5;
    for (int trial = 0; trial < 50; ++trial) {
        Embedding2D e;
        e.points = oracle::gaussian(25, 2, rng);
        if (trial == 0) e.points.col(0) << Vector::LinSpaced(25, 0, 24);
        EXPECT_TRUE(mapper_fcn(e, p).edges.empty());
    }
}

TEST(Mapper, BoundaryTieGoesToLowerBin) {
    Vector lens(3);
    lens << 0, 1, 2;
    auto bins = cover_axis(lens, 2, 0.0);
    EXPECT_EQ(bins[0], (std::vector<Eigen::Index>{0, 1}));
    EXPECT_EQ(bins[1], (std::vector<Eigen::Index>{2}));
}

TEST(Mapper, Errors) {
    Embedding2D e;
    e.points.resize(0, 2);
    EXPECT_EQ(code_of([&] { mapper_fcn(e, MapperParams{}); }), ErrorCode::EmptyEmbedding);
    MapperParams bad;
    bad.overlap_fraction = 1.0;
    EXPECT_EQ(code_of([&] { mapper_fcn(points({{0, 0}}), bad); }), ErrorCode::InvalidParams);
}

TEST(Mapper, NervePropertyOnRandomEmbeddings) {
    std::mt19937_64 rng(15);
    std::uniform_int_distribution<int> n(1, 30), k(1, 8);
    std::uniform_real_distribution<double> f(0, 0.6);
    for (int trial = 0; trial < 200; ++trial) {
        Embedding2D e;
        e.points = oracle::gaussian(n(rng), 2, rng);
        MapperParams p;
        p.n_intervals = k(rng);
        p.overlap_fraction = f(rng);
        p.lens = trial % 3 == 0 ? MapperLens::both_axes_grid : MapperLens::first_embedding_axis;
        auto g = mapper_fcn(e, p);
        EXPECT_LE(g.edges.size(), g.nodes.size() * (g.nodes.size() - 1) / 2);
        std::set<int> covered;
        for (const auto& node : g.nodes) covered.insert(node.begin(), node.end());
        EXPECT_EQ(covered.size(), static_cast<std::size_t>(e.points.rows()));
        for (auto [a, b] : g.edges) {
            ASSERT_LT(a, b);
            std::vector<int> both;
            std::set_intersection(g.nodes[a].begin(), g.nodes[a].end(), g.nodes[b].begin(), g.nodes[b].end(), std::back_inserter(both));
            EXPECT_FALSE(both.empty());
        }
    }
}

TEST(MapperAdjacency, Examples) {
    MapperGraph clique{{{1, 2, 3}}, {}};
    Matrix expected = Matrix::Ones(3, 3);
    expected.diagonal().setZero();
    EXPECT_EQ(mapper_to_adjacency(clique, 3).values, expected);

    MapperGraph disjoint{{{1, 2}, {3, 4}}, {}};
    Matrix block = Matrix::Zero(4, 4);
    block(0, 1) = block(1, 0) = block(2, 3) = block(3, 2) = 1;
    EXPECT_EQ(mapper_to_adjacency(disjoint, 4).values, block);

    MapperGraph chain{{{1, 2}, {2, 3}}, {{0, 1}}};
    auto a = mapper_to_adjacency(chain, 3);
    EXPECT_EQ(a.values(0, 1), 1.0);
    EXPECT_EQ(a.values(1, 2), 1.0);
    EXPECT_EQ(a.values(0, 2), 0.0);
}

TEST(MapperAdjacency, PropertyRandomGraphs) {
    std::mt19937_64 rng(16);
    std::uniform_int_distribution<int> rsize(1, 15), nodes(0, 10);
    for (int trial = 0; trial < 500; ++trial) {
        const int r = rsize(rng);
        std::uniform_int_distribution<int> roi(1, r), len(1, r);
        MapperGraph g;
        const int count = nodes(rng);
        for (int k = 0; k < count; ++k) {
            std::set<int> s;
            const int l = len(rng);
            for (int i = 0; i < l; ++i) s.insert(roi(rng));
            g.nodes.emplace_back(s.begin(), s.end());
        }
        auto a = mapper_to_adjacency(g, r);
        EXPECT_EQ(a.values, a.values.transpose());
        EXPECT_EQ(a.values.diagonal(), Vector::Zero(r));
        EXPECT_TRUE((a.values.array() == 0.0 || a.values.array() == 1.0).all());
        // brute-force co-membership
        for (int i = 1; i <= r; ++i)
            for (int j = 1; j <= r; ++j) {
                bool co = false;
                for (const auto& n : g.nodes)
                    co = co || (i != j && std::count(n.begin(), n.end(), i) && std::count(n.begin(), n.end(), j));
                EXPECT_EQ(a.values(i - 1, j - 1), co ? 1.0 : 0.0);
            }
    }
}

TEST(BuildFcn, PathsProduceValidAdjacency) {
    std::mt19937_64 rng(17);
    auto b = bold(two_clusters(8, 40, rng));
    for (auto m : {FcnMethod::pearson, FcnMethod::fisher, FcnMethod::pca, FcnMethod::tsne, FcnMethod::umap}) {
        FcnOptions o;
        o.method = m;
        o.tsne.perplexity = 4;
        o.umap.n_neighbors = 5;
        auto r = build_fcn(b, o, 3);
        EXPECT_EQ(r.adjacency.values.rows(), 16);
        EXPECT_NO_THROW(validate_adjacency(r.adjacency.values));
        EXPECT_EQ(r.embedding.has_value(), m != FcnMethod::pearson && m != FcnMethod::fisher);
        EXPECT_EQ(build_fcn(b, o, 3).adjacency.values, r.adjacency.values);
    }
    FcnOptions o;
    o.method = FcnMethod::pearson;
    o.correlation_path = CorrelationPath::mapper;
    auto r = build_fcn(b, o, 1);
    EXPECT_TRUE(r.embedding.has_value());
}

TEST(BuildFcn, TwoBlobMapperHasTwoComponents) {
    MapperParams p;
    p.n_intervals = 5;
    p.overlap_fraction = 0.5;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> ang(0, 2 * 3.14159265358979), rad(0, 0.5);
        Embedding2D e;
        e.points.resize(20, 2);
        for (int i = 0; i < 20; ++i) {
            const double a = ang(rng), d = rad(rng);
            e.points(i, 0) = (i < 10 ? 0.0 : 10.0) + d * std::cos(a);
            e.points(i, 1) = d * std::sin(a);
        }
        auto adj = mapper_to_adjacency(mapper_fcn(e, p), 20);
        EXPECT_EQ(oracle::components(adj.values), 2) << "seed " << seed;
    }
}
