#include "attnfmri/data_model.hpp"
#include "attnfmri/fcn/correlation.hpp"
#include "attnfmri/synth.hpp"
#include "attnfmri/text.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace attnfmri;

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

std::shared_ptr<const RoiTable> table_of(std::size_t r) {
    return std::make_shared<const RoiTable>(RoiTable::default_for(r));
}

}

TEST(Text, ParseDoubleIsStrict) {
    EXPECT_EQ(parse_double("1.5"), 1.5);
    EXPECT_EQ(parse_double("+2"), 2.0);
    EXPECT_EQ(parse_double(" -3e2 "), -300.0);
    EXPECT_FALSE(parse_double("1.5x"));
    EXPECT_FALSE(parse_double(""));
    EXPECT_FALSE(parse_int("2.5"));
}

TEST(Text, FormatDoubleRoundTrips) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) / 7.0;
        EXPECT_EQ(*parse_double(format_double(x)), x);
    }
}

TEST(Seeds, DerivationIsStableAndSpreads) {
    EXPECT_EQ(derive_seed(1, 5), derive_seed(1, 5));
    EXPECT_NE(derive_seed(1, 5), derive_seed(1, 6));
    EXPECT_NE(derive_seed(1, "fcn"), derive_seed(1, "train"));
    EXPECT_NE(derive_seed(1, "fcn"), derive_seed(2, "fcn"));
}

TEST(RoiTable, BundledAal) {
    auto t = load_roi_labels();
    ASSERT_EQ(t.size(), 116u);
    EXPECT_EQ(t.name(0), "Precentral_L");
    EXPECT_EQ(t.name(115), "Vermis_10");
}

TEST(RoiTable, ParsesAndValidates) {
    EXPECT_EQ(parse_roi_labels("1,A\n2,B").size(), 2u);
    EXPECT_EQ(parse_roi_labels("index,name\n2,B\n1,A\n").name(0), "A");
    EXPECT_EQ(code_of([] { parse_roi_labels("1,A\n3,B"); }), ErrorCode::GapInIndices);
    EXPECT_EQ(code_of([] { parse_roi_labels("1,A\n1,B"); }), ErrorCode::DuplicateIndex);
    EXPECT_EQ(code_of([] { parse_roi_labels("1,A\n2, "); }), ErrorCode::EmptyName);
}

TEST(RoiTable, WriteParseRoundTrip) {
    auto t = RoiTable::aal116();
    EXPECT_EQ(parse_roi_labels(write_roi_labels(t)), t);
}

TEST(Bold, ParsesSmallFile) {
    auto b = parse_bold_csv("1,2,3\n4,5,6", table_of(2));
    ASSERT_EQ(b.rois(), 2);
    ASSERT_EQ(b.timepoints(), 3);
    Matrix expected(2, 3);
    expected << 1, 2, 3, 4, 5, 6;
    EXPECT_EQ(b.values, expected);
}

TEST(Bold, HeaderRowIsSkipped) {
    auto b = parse_bold_csv("t1,t2,t3\n1,2,3\n4,5,6\n", table_of(2));
    EXPECT_EQ(b.values(1, 2), 6.0);
}

TEST(Bold, FullSizeShape) {
    std::string csv;
    for (int i = 0; i < 116; ++i) {
        for (int t = 0; t < 200; ++t) csv += (t ? "," : "") + std::to_string(i * 0.5 + t);
        csv += "\n";
    }
    auto b = parse_bold_csv(csv, std::make_shared<const RoiTable>(RoiTable::aal116()));
    EXPECT_EQ(b.rois(), 116);
    EXPECT_EQ(b.timepoints(), 200);
}

TEST(Bold, Errors) {
    std::string csv115;
    for (int i = 0; i < 115; ++i) csv115 += "1,2,3\n";
    EXPECT_EQ(code_of([&] { parse_bold_csv(csv115, std::make_shared<const RoiTable>(RoiTable::aal116())); }), ErrorCode::RowCountMismatch);
    EXPECT_EQ(code_of([] { parse_bold_csv("1,2,3\n4,x,6", table_of(2)); }), ErrorCode::NonNumericCell);
    EXPECT_EQ(code_of([] { parse_bold_csv("1,2,3\n4,inf,6", table_of(2)); }), ErrorCode::NonFiniteValue);
    try {
        parse_bold_csv("1,2,3\n4,x,6", table_of(2));
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("row 2, column 2"), std::string::npos);
    }
}

TEST(Bold, WriteLoadRoundTripIsBitExact) {
    std::mt19937_64 rng(11);
    BoldMatrix b;
    b.values = oracle::gaussian(7, 13, rng, 3.0);
    b.roi_table = table_of(7);
    auto dir = std::filesystem::temp_directory_path() / "attnfmri_bold_rt";
    std::filesystem::create_directories(dir);
    write_file((dir / "S1.csv").string(), write_bold_csv(b));
    auto back = load_bold_csv((dir / "S1.csv").string(), table_of(7));
    EXPECT_EQ(back.subject_id, "S1");
    EXPECT_EQ(back.values, b.values);
}

TEST(Adjacency, Examples) {
    auto z = validate_adjacency(Matrix::Zero(3, 3));
    EXPECT_EQ(z.kind, AdjacencyKind::binary);
    EXPECT_EQ(z.values, Matrix::Zero(3, 3));

    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    EXPECT_EQ(validate_adjacency(m).kind, AdjacencyKind::binary);

    Matrix a(2, 2);
    a << 0, 1, 0, 0;
    EXPECT_EQ(code_of([&] { validate_adjacency(a); }), ErrorCode::Asymmetric);

    Matrix out(2, 2);
    out << 0, 1.5, 1.5, 0;
    EXPECT_EQ(code_of([&] { validate_adjacency(out); }), ErrorCode::OutOfRangeEntry);
}

TEST(Adjacency, PropertyRandomSymmetricMatricesSatisfyInvariants) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> size(1, 12);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = size(rng);
        Matrix m(n, n);
        const bool binary = trial % 2 == 0;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                const double v = binary ? std::round(u(rng)) : u(rng);
                m(i, j) = v;
                // asymmetry below the tolerance is averaged away
                m(j, i) = (i == j || binary) ? v : std::clamp(v + 1e-11 * (u(rng) - 0.5), 0.0, 1.0);
            }
        auto a = validate_adjacency(m);
        EXPECT_LE((a.values - a.values.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(a.values.diagonal().cwiseAbs().sum(), 0.0);
        EXPECT_GE(a.values.minCoeff(), 0.0);
        EXPECT_LE(a.values.maxCoeff(), 1.0);
        if (a.kind == AdjacencyKind::binary) {
            EXPECT_TRUE((a.values.array() == 0.0 || a.values.array() == 1.0).all());
        }
        if (binary) EXPECT_EQ(a.kind, AdjacencyKind::binary);
    }
}

TEST(Adjacency, JsonRoundTrip) {
    Matrix m(3, 3);
    m << 0, 0.25, 1, 0.25, 0, 0.5, 1, 0.5, 0;
    auto a = validate_adjacency(m, "S7");
    auto j = adjacency_to_json(a);
    EXPECT_EQ(j["n"], 3);
    EXPECT_EQ(j["kind"], "weighted");
    auto back = adjacency_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.subject_id, "S7");
    EXPECT_EQ(back.values, a.values);
    EXPECT_EQ(back.kind, a.kind);
}

TEST(Synth, ShapeContract) {
    SynthSpec spec;
    spec.rois = 10;
    spec.timepoints = 50;
    spec.groups = {{"A", 5}, {"B", 5}};
    spec.blocks = contiguous_blocks(10, 2);
    spec.seed = 7;
    auto c = generate_cohort(spec);
    EXPECT_EQ(c.size(), 10u);
    for (const auto& g : c.groups)
        for (const auto& s : g.subjects) {
            EXPECT_EQ(s.rois(), 10);
            EXPECT_EQ(s.timepoints(), 50);
        }
}

TEST(Synth, Deterministic) {
    auto spec = default_synth_spec(99);
    auto a = generate_cohort(spec, 1);
    auto b = generate_cohort(spec, 3);
    for (std::size_t g = 0; g < a.groups.size(); ++g)
        for (std::size_t s = 0; s < a.groups[g].subjects.size(); ++s) {
            EXPECT_EQ(a.groups[g].subjects[s].values, b.groups[g].subjects[s].values);
            EXPECT_EQ(write_bold_csv(a.groups[g].subjects[s]), write_bold_csv(b.groups[g].subjects[s]));
        }
}

TEST(Synth, AddingSubjectsKeepsEarlierOnes) {
    auto spec = default_synth_spec(4);
    auto small = spec;
    small.groups = {{"A", 3}, {"B", 3}};
    auto a = generate_cohort(spec), b = generate_cohort(small);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(a.groups[1].subjects[s].values, b.groups[1].subjects[s].values);
}

TEST(Synth, InvalidSpecs) {
    auto s = default_synth_spec();
    s.coupling_weak = 0.95;
    EXPECT_EQ(code_of([&] { generate_cohort(s); }), ErrorCode::InvalidSpec);
    s = default_synth_spec();
    s.noise_sd = 0;
    EXPECT_EQ(code_of([&] { generate_cohort(s); }), ErrorCode::InvalidSpec);
    s = default_synth_spec();
    s.differential_edges["B"].push_back({1, 21});
    EXPECT_EQ(code_of([&] { generate_cohort(s); }), ErrorCode::InvalidSpec);
}

namespace {

double mean_block_r(const CohortGroup& g, const std::vector<int>& block) {
    double total = 0;
    int count = 0;
    for (const auto& s : g.subjects) {
        for (std::size_t a = 0; a < block.size(); ++a)
            for (std::size_t b = a + 1; b < block.size(); ++b) {
                total += oracle::pearson(oracle::row(s.values, block[a] - 1), oracle::row(s.values, block[b] - 1));
                ++count;
            }
    }
    return total / count;
}

}

TEST(Synth, DifferentialBlockIsDetectable) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto spec = default_synth_spec(seed);
        auto c = generate_cohort(spec);
        const auto& block = spec.blocks[0];
        const double ra = mean_block_r(*c.find("A"), block), rb = mean_block_r(*c.find("B"), block);
        EXPECT_GT(ra, rb);
        EXPECT_GE(std::abs(ra - rb), 0.2) << "seed " << seed;
    }
}

TEST(Cohort, DuplicateIdsRejected) {
    Cohort c;
    BoldMatrix b;
    b.subject_id = "X";
    b.values = Matrix::Ones(2, 3);
    b.roi_table = table_of(2);
    c.groups = {{"A", {b}}, {"B", {b}}};
    EXPECT_EQ(code_of([&] { validate_cohort(c); }), ErrorCode::Format);
}
