#include "attnfmri/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

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

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("attnfmri_test_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

const char* small_text =
    "seed = 3\n"
    "synth.rois = 10\n"
    "synth.timepoints = 80\n"
    "synth.n_a = 6\n"
    "synth.n_b = 6\n"
    "synth.blocks = 2\n"
    "fcn.method = tsne\n"
    "tsne.iters = 250\n"
    "attn.epochs = 5\n"
    "attn.folds = 3\n"
    "mcmc.iters = 400\n"
    "mcmc.burnin = 100\n"
    "mcmc.thin = 5\n";

PipelineConfig small_config(const fs::path& out) {
    auto cfg = parse_config_text(small_text);
    cfg.out = out.string();
    return cfg;
}

int cli(const std::string& args) {
    const int rc = std::system((std::string(ATTNFMRI_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}

TEST(Config, EmptyGivesDefaults) {
    const PipelineConfig d;
    auto cfg = parse_config_text("");
    EXPECT_EQ(effective_config_text(cfg), effective_config_text(d));
    EXPECT_EQ(cfg.attn.n_heads, d.attn.n_heads);
    auto commented = parse_config_text("# nothing\n\n   \n");
    EXPECT_EQ(effective_config_text(commented), effective_config_text(d));
}

TEST(Config, ParsesAndRejects) {
    EXPECT_EQ(parse_config_text("mcmc.iters = 55000\n").lsirm.mcmc.n_iter, 55000);
    EXPECT_EQ(parse_config_text("synth.group_a = \"AD patients\"\n").synth.group_a, "AD patients");
    EXPECT_EQ(code_of([] { parse_config_text("attn.dropuot = 0.5\n"); }), ErrorCode::UnknownKey);
    EXPECT_EQ(code_of([] { parse_config_text("mcmc.iters = many\n"); }), ErrorCode::TypeMismatch);
    EXPECT_EQ(code_of([] { parse_config_text("fcn.method = spectral\n"); }), ErrorCode::TypeMismatch);
    EXPECT_EQ(code_of([] { parse_config_text("mcmc.iters =\n"); }), ErrorCode::MissingRequired);
    EXPECT_EQ(code_of([] { parse_config_text("dropuot =\n"); }), ErrorCode::UnknownKey);
}

TEST(Config, EffectiveTextRoundTrips) {
    auto cfg = parse_config_text(small_text);
    auto back = parse_config_text(effective_config_text(cfg));
    EXPECT_EQ(effective_config_text(back), effective_config_text(cfg));
}

TEST(Pipeline, IngestFailsWithoutInput) {
    auto cfg = small_config(scratch("noinput"));
    cfg.synth.enabled = false;
    try {
        run_pipeline(cfg);
        FAIL() << "no error thrown";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "ingest");
        EXPECT_EQ(e.code(), ErrorCode::StageFailure);
    }
}

TEST(Pipeline, DeterministicManifestAndVerify) {
    const auto a = scratch("a"), b = scratch("b");
    auto ra = run_pipeline(small_config(a));
    auto cb = small_config(b);
    cb.threads = 3;
    auto rb = run_pipeline(cb);
    EXPECT_EQ(ra.manifest_sha256, rb.manifest_sha256);
    EXPECT_EQ(read_file((a / "manifest.json").string()), read_file((b / "manifest.json").string()));
    EXPECT_TRUE(verify_manifest(a).ok());

    const auto files = ra.manifest.at("files");
    ASSERT_FALSE(files.empty());
    for (const auto& f : files) EXPECT_TRUE(fs::exists(a / f.at("path").get<std::string>()));
    EXPECT_TRUE(fs::exists(a / "summary" / "A.svg"));

    {
        std::ofstream out(b / "summary" / "A.dot", std::ios::app);
        out << "// edited\n";
    }
    fs::remove(b / "metrics.json");
    auto v = verify_manifest(b);
    EXPECT_EQ(v.mismatched, (std::vector<std::string>{"summary/A.dot"}));
    EXPECT_EQ(v.missing, (std::vector<std::string>{"metrics.json"}));

    auto other = small_config(scratch("c"));
    other.seed = 4;
    EXPECT_NE(run_pipeline(other).manifest_sha256, ra.manifest_sha256);
}

TEST(Cli, ExitCodesAndStageRerun) {
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    const std::string cfg_path = (dir / "small.cfg").string();
    write_file(cfg_path, small_text);
    const std::string base = "--config " + cfg_path + " --out " + dir.string();

    EXPECT_EQ(cli("--help"), 0);
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("train --bogus"), 2);
    const std::string bad = (dir / "bad.cfg").string();
    write_file(bad, "attn.dropuot = 0.5\n");
    EXPECT_EQ(cli("--config " + bad + " pipeline"), 2);
    EXPECT_EQ(cli("--out " + (dir / "empty").string() + " train"), 3);

    ASSERT_EQ(cli(base + " synth"), 0);
    ASSERT_EQ(cli(base + " fcn"), 0);
    ASSERT_EQ(cli(base + " train"), 0);
    ASSERT_EQ(cli(base + " features"), 0);
    ASSERT_EQ(cli(base + " lsirm"), 0);
    ASSERT_EQ(cli(base + " summarize"), 0);

    const std::vector<std::string> outputs = {"train/attention/A_001.json", "features/A_top_rois.json", "lsirm/B_positions.csv", "summary/B.json"};
    std::vector<std::string> before;
    for (const auto& rel : outputs) {
        ASSERT_TRUE(fs::exists(dir / rel)) << rel;
        before.push_back(read_file((dir / rel).string()));
    }
    ASSERT_EQ(cli(base + " train"), 0);
    ASSERT_EQ(cli(base + " lsirm"), 0);
    ASSERT_EQ(cli(base + " summarize"), 0);
    for (std::size_t i = 0; i < outputs.size(); ++i) EXPECT_EQ(read_file((dir / outputs[i]).string()), before[i]) << outputs[i];

    EXPECT_EQ(cli(base + " summarize --format png"), 2);
}
