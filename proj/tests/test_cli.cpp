#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cwr/attacks.hpp"
#include "cwr/cli.hpp"
#include "cwr/dataset_io.hpp"
#include "cwr/model_io.hpp"
#include "test_support.hpp"

using namespace cwr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kTrain = "synthetic:classes=3,per_class=12,shape=3x8x8,sep=0.4,noise=0.05,block=2,seed=1";
const std::string kTest = "synthetic:classes=3,per_class=6,shape=3x8x8,sep=0.4,noise=0.05,block=2,seed=1,split=test";

struct Run {
    int code;
    std::string out, err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cwr::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(test::scratch_dir("cli"));
        const auto r = invoke({"train", "--preset", "mlp_small", "--data", kTrain, "--out", model(), "--epochs", "3"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    static void TearDownTestSuite() { delete dir_; }
    static std::string model() { return (*dir_ / "m.cwrm").string(); }
    static fs::path sub(const std::string& name) {
        const auto p = *dir_ / name;
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }
    static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

}  // namespace

TEST(CliParsing, Epsilon) {
    EXPECT_DOUBLE_EQ(cli::parse_epsilon("8/255"), 8.0 / 255.0);
    EXPECT_EQ(cli::parse_epsilon("0.25"), 0.25);
    EXPECT_EQ(cli::parse_epsilon("0"), 0.0);
    for (const char* bad : {"1/0", "-0.1", "abc", "8/", "/3", "nan", ""})
        EXPECT_THROW(cli::parse_epsilon(bad), InvalidConfig) << bad;
}

TEST(CliParsing, ExitCodeMapping) {
    EXPECT_EQ(cli::exit_code_for(Error::Category::invalid_argument), 2);
    EXPECT_EQ(cli::exit_code_for(Error::Category::data), 3);
    EXPECT_EQ(cli::exit_code_for(Error::Category::numeric), 4);
    EXPECT_EQ(cli::exit_code_for(Error::Category::io), 1);
}

TEST(CliParsing, DataReferences) {
    const auto d = cli::load_data(kTrain);
    EXPECT_EQ(d.size(), 36u);
    EXPECT_EQ(d.manifest.image_shape, (Shape{3, 8, 8}));
    EXPECT_NE(cli::load_data(kTest).images, d.images);
    EXPECT_THROW(cli::load_data("synthetic:classes=3,colour=blue"), InvalidConfig);
    EXPECT_THROW(cli::load_data("synthetic:shape=3x8"), InvalidConfig);
}

TEST(CliErrors, BadArgumentsExitWithTwo) {
    auto r = invoke({"train", "--preset", "resnet", "--data", kTrain, "--out", "x"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error:", 0), 0u);
    EXPECT_NE(r.err.find("--preset"), std::string::npos);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
    EXPECT_EQ(invoke({"evaluate", "--bogus"}).code, 2);
    r = invoke({"evaluate", "--data", kTest});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--model"), std::string::npos);
    EXPECT_EQ(invoke({"corrupt", "--model", "m", "--data", kTest, "--kinds", "fog"}).code, 2);
    EXPECT_EQ(invoke({"train", "--help"}).code, 0);
}

TEST_F(Cli, MissingAndCorruptInputs) {
    const auto out = sub("errors");
    auto r = invoke({"evaluate", "--model", (out / "absent.cwrm").string(), "--data", kTest});
    EXPECT_EQ(r.code, 1) << r.err;
    EXPECT_EQ(r.err.rfind("error:", 0), 0u);

    auto bytes = read_file(model());
    bytes.back() ^= 0x40;
    write_file(out / "bad.cwrm", bytes);
    EXPECT_EQ(invoke({"evaluate", "--model", (out / "bad.cwrm").string(), "--data", kTest}).code, 3);

    std::vector<std::uint8_t> truncated(kCifarRecordBytes + 7, 1);
    write_file(out / "t.bin", truncated);
    r = invoke({"evaluate", "--model", model(), "--data", "cifar:" + (out / "t.bin").string()});
    EXPECT_EQ(r.code, 3) << r.err;

    // a 32x32 dataset does not fit a model trained on 8x8 images
    std::vector<std::uint8_t> ok(kCifarRecordBytes, 1);
    write_file(out / "ok.bin", ok);
    EXPECT_EQ(invoke({"evaluate", "--model", model(), "--data", "cifar:" + (out / "ok.bin").string()}).code, 3);
}

TEST_F(Cli, TrainWritesTraceWithOneRowPerEpoch) {
    const auto trace = slurp(model() + ".trace.csv");
    EXPECT_EQ(line_count(trace), 1u + 3u);
    const Model m = load_model(model());
    EXPECT_EQ(m.name, "mlp_small");
    EXPECT_EQ(m.num_classes, 3u);
}

TEST_F(Cli, ConfigSuppliesFlagsAndCommandLineWins) {
    const auto out = sub("config");
    const auto cfg = out / "cfg.json";
    std::ofstream(cfg) << json{{"epochs", 1}, {"preset", "mlp_small"}, {"train", {{"epochs", 2}}}}.dump();
    const auto m = (out / "a.cwrm").string();
    auto r = invoke({"train", "--config", cfg.string(), "--data", kTrain, "--out", m});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(slurp(m + ".trace.csv")), 1u + 2u);
    r = invoke({"train", "--config", cfg.string(), "--data", kTrain, "--out", m, "--epochs", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(slurp(m + ".trace.csv")), 1u + 4u);

    std::ofstream(cfg) << json{{"epochz", 1}}.dump();
    r = invoke({"train", "--config", cfg.string(), "--data", kTrain, "--out", m});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("epochz"), std::string::npos);
    std::ofstream(cfg) << "{ not json";
    EXPECT_EQ(invoke({"train", "--config", cfg.string(), "--data", kTrain, "--out", m}).code, 2);
}

TEST_F(Cli, EvaluateWritesReportFiles) {
    const auto out = sub("evaluate");
    const auto r = invoke({"evaluate", "--model", model(), "--compare", model(), "--data", kTest, "--out-dir", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"clean.json", "clean.csv", "clean_confusion.csv", "clean_bars.svg", "clean_heatmap.svg",
                          "clean_cmp1.json", "clean_similarity.json", "clean_similarity.csv"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto j = read_json(out / "clean.json");
    EXPECT_EQ(j.at("sample_count"), 18);
    EXPECT_EQ(j.at("provenance").at("command"), "evaluate");
    EXPECT_EQ(j.at("provenance").at("model").at("preset"), "mlp_small");
    EXPECT_EQ(line_count(slurp(out / "clean.csv")), 1u + 3u);
    const auto sim = read_json(out / "clean_similarity.json");
    EXPECT_EQ(sim.dump().find("null"), std::string::npos);
}

TEST_F(Cli, AttackDefaultsAreRecorded) {
    const auto out = sub("attack_defaults");
    const auto r = invoke({"attack", "--model", model(), "--data", kTest, "--out-dir", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto p = read_json(out / "robust.json").at("provenance");
    const auto def = AttackConfig::untargeted_default();
    EXPECT_EQ(p.at("attack"), "pgd");
    EXPECT_NEAR(p.at("epsilon").get<double>(), def.epsilon, 1e-10);
    EXPECT_EQ(p.at("steps"), def.steps);
    EXPECT_NEAR(p.at("step_size").get<double>(), 2.5 * def.epsilon / def.steps, 1e-10);
    EXPECT_TRUE(p.at("target").is_null());
    EXPECT_EQ(line_count(slurp(out / "robust_predictions.csv")), 1u + 18u);

    const auto t = sub("attack_target");
    ASSERT_EQ(invoke({"attack", "--model", model(), "--data", kTest, "--out-dir", t.string(), "--target", "2"}).code, 0);
    const auto tp = read_json(t / "target_2.json");
    EXPECT_NEAR(tp.at("provenance").at("epsilon").get<double>(), AttackConfig::targeted_default(2).epsilon, 1e-10);
    EXPECT_TRUE(tp.contains("targeted_success_rate"));
    EXPECT_EQ(invoke({"attack", "--model", model(), "--data", kTest, "--target", "3"}).code, 2);
    EXPECT_EQ(invoke({"attack", "--model", model(), "--data", kTest, "--eps", "1/0"}).code, 2);
    EXPECT_EQ(invoke({"attack", "--model", model(), "--data", kTest, "--attack", "cw"}).code, 2);
}

TEST_F(Cli, ZeroBudgetAttackMatchesCleanEvaluation) {
    const auto out = sub("attack_zero");
    ASSERT_EQ(invoke({"evaluate", "--model", model(), "--data", kTest, "--out-dir", out.string()}).code, 0);
    ASSERT_EQ(invoke({"attack", "--model", model(), "--data", kTest, "--out-dir", out.string(), "--eps", "0",
                   "--step-size", "1/255", "--random-start", "--archive", (out / "adv.bin").string()})
                  .code,
              0);
    const auto clean = read_json(out / "clean.json"), robust = read_json(out / "robust.json");
    EXPECT_EQ(clean.at("confusion"), robust.at("confusion"));
    EXPECT_EQ(clean.at("classes"), robust.at("classes"));
    const auto archived = load_dataset(out / "adv.bin");
    EXPECT_EQ(archived.images, cli::load_data(kTest).images);
    EXPECT_EQ(archived.manifest.provenance.at("epsilon"), 0.0);
}

TEST_F(Cli, AllTargetsSummary) {
    const auto out = sub("all_targets");
    const auto r = invoke({"attack", "--model", model(), "--data", kTest, "--out-dir", out.string(), "--all-targets",
                        "--steps", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(out / "targeted_success.csv");
    EXPECT_EQ(line_count(csv), 1u + 3u);
    const auto doc = read_json(out / "targeted_success.json");
    for (int k = 0; k < 3; ++k) {
        const auto rep = read_json(out / ("target_" + std::to_string(k) + ".json"));
        EXPECT_EQ(doc.at("success_rates").at(k).at("success_rate"), rep.at("targeted_success_rate"));
        EXPECT_EQ(doc.at("success_rates").at(k).at("non_target_samples"), 12);
    }
    EXPECT_TRUE(fs::exists(out / "targeted_success.svg"));
}

TEST_F(Cli, CorruptionSweepGrid) {
    auto out = sub("corrupt_one");
    auto r = invoke({"corrupt", "--model", model(), "--data", kTest, "--out-dir", out.string(), "--kinds", "contrast",
                  "--severities", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::size_t reports = 0;
    for (const auto& e : fs::directory_iterator(out)) {
        const auto name = e.path().filename().string();
        reports += name.ends_with(".json") && name != "clean.json";
    }
    EXPECT_EQ(reports, 1u);
    EXPECT_TRUE(fs::exists(out / "contrast_s2.json"));

    out = sub("corrupt_grid");
    r = invoke({"corrupt", "--model", model(), "--data", kTest, "--out-dir", out.string(), "--kinds",
             "gaussian_noise,brightness", "--severities", "1,3,5"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(slurp(out / "corruption_grid.csv")), 1u + 6u);

    out = sub("corrupt_identity");
    r = invoke({"corrupt", "--model", model(), "--data", kTest, "--out-dir", out.string(), "--kinds", "gaussian_blur",
             "--severities", "1", "--parameter", "0", "--export", (out / "export").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto clean = read_json(out / "clean.json"), blurred = read_json(out / "gaussian_blur_s1.json");
    EXPECT_EQ(clean.at("confusion"), blurred.at("confusion"));
    EXPECT_EQ(clean.at("classes"), blurred.at("classes"));
    EXPECT_FALSE(fs::is_empty(out / "export"));

    EXPECT_EQ(invoke({"corrupt", "--model", model(), "--data", kTest, "--severities", "6"}).code, 2);
}

TEST_F(Cli, CompareAndReport) {
    const auto out = sub("compare");
    auto r = invoke({"compare", "--models", model(), model(), "--data", kTest, "--out-dir", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"model_0.json", "model_1.json", "confusion_pooled.csv", "confusion_mean.csv", "compare.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_EQ(slurp(out / "model_0.json"), slurp(out / "model_1.json"));
    EXPECT_EQ(invoke({"compare", "--models", model(), "--data", kTest}).code, 2);

    const auto again = sub("report");
    r = invoke({"report", "--input", (out / "model_0.json").string(), "--out-dir", again.string(), "--stem", "model_0"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(again / "model_0.json"), slurp(out / "model_0.json"));
    EXPECT_EQ(slurp(again / "model_0.csv"), slurp(out / "model_0.csv"));
    r = invoke({"report", "--input", (out / "model_0.json").string(), "--print", "csv"});
    EXPECT_EQ(r.out, slurp(out / "model_0.csv"));
    std::ofstream(again / "broken.json") << "[]";
    EXPECT_EQ(invoke({"report", "--input", (again / "broken.json").string()}).code, 3);
}
