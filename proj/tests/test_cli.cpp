#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("latq_cli_" + std::string(info->name()) + "_" +
                                           std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    static std::string data(const std::string& name) { return std::string(LATQ_TEST_DATA) + "/" + name; }
    fs::path tmp(const std::string& name) const { return dir / name; }

    Outcome run(const std::string& args) const {
        const fs::path out = tmp("stdout.txt"), err = tmp("stderr.txt");
        const std::string cmd = std::string(LATQ_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    nlohmann::json report() const { return nlohmann::json::parse(slurp(tmp("report.json"))); }
};

TEST_F(Cli, QuantizeIdentityIsRounding) {
    const Outcome r = run("quantize --weights " + data("w_identity2.csv") + " --calib " + data("identity2.csv"));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "0,2\n");
}

TEST_F(Cli, QuantizeWritesReport) {
    const Outcome r = run("quantize --weights " + data("weights_4x5.csv") + " --calib " + data("calib_8x5.csv") +
                      " --out " + tmp("v.csv").string() + " --report " + tmp("report.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = report();
    EXPECT_EQ(j["algorithm"], "gptq");
    EXPECT_EQ(j["n"], 5);
    EXPECT_EQ(j["k"], 8);
    EXPECT_EQ(j["m"], 4);
    EXPECT_EQ(j["V"].size(), 4u);
    EXPECT_LE(j["error_l2"].get<double>(), j["bound_abs_paper"].get<double>());
    EXPECT_TRUE(j["wall_time_ms"].is_number());
    EXPECT_FALSE(slurp(tmp("v.csv")).empty());
}

TEST_F(Cli, GptqAndBabaiWriteIdenticalCsv) {
    const std::string common = " --weights " + data("weights_4x5.csv") + " --calib " + data("calib_8x5.csv");
    const Outcome a = run("quantize --algo gptq" + common + " --out " + tmp("a.csv").string() + " --report " +
                      tmp("report.json").string());
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(report()["fragile_count"], 0);
    for (const char* algo : {"babai", "gptq-rec", "babai-proj-rec"}) {
        const Outcome b = run(std::string("quantize --algo ") + algo + common + " --out " + tmp("b.csv").string());
        ASSERT_EQ(b.code, 0) << b.err;
        EXPECT_EQ(slurp(tmp("a.csv")), slurp(tmp("b.csv"))) << algo;
    }
}

TEST_F(Cli, RankDeficientWithoutMuExitsThree) {
    const Outcome r = run("quantize --mu 0 --weights " + data("w_rank_deficient.csv") + " --calib " +
                      data("rank_deficient.csv"));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("mu"), std::string::npos) << r.err;
    const Outcome ok = run("quantize --mu auto --weights " + data("w_rank_deficient.csv") + " --calib " +
                       data("rank_deficient.csv"));
    EXPECT_EQ(ok.code, 0) << ok.err;
}

TEST_F(Cli, CompareRandomAgrees) {
    const Outcome r = run("compare --random 8,16 --seeds 100 --report " + tmp("report.json").string());
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    const auto j = report();
    EXPECT_TRUE(j["agreement"].get<bool>());
    EXPECT_EQ(j["m"], 100);
    EXPECT_TRUE(j.contains("seed"));
}

TEST_F(Cli, CompareCountsTies) {
    const Outcome r = run("compare --weights " + data("w_tie.csv") + " --calib " + data("identity4.csv") +
                      " --report " + tmp("report.json").string());
    EXPECT_EQ(r.code, 0) << r.err;
    const auto j = report();
    EXPECT_GE(j["fragile_count"].get<int>(), 1);
    EXPECT_EQ(j["V"], nlohmann::json::parse("[[2,0,-1,1],[0,-1,4,1]]"));
}

TEST_F(Cli, BoundsOnIdentity) {
    const Outcome r = run("bounds --calib " + data("identity4.csv") + " --report " + tmp("report.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = report();
    EXPECT_NEAR(j["bound_abs_paper"].get<double>(), 2.0, 1e-12);
    EXPECT_NEAR(j["bound_abs_halfstep"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(j["gamma_bound"].get<double>(), std::sqrt(5.0), 1e-12);
}

TEST_F(Cli, BoundsImproveAfterReduction) {
    const Outcome r = run("bounds --reduce lll --calib " + data("basis_z2.csv") + " --report " +
                      tmp("report.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = report();
    EXPECT_NEAR(j["gamma_bound"].get<double>(), std::sqrt(843.0), 1e-9);
    EXPECT_NEAR(j["reduced"]["bound_abs_paper"].get<double>(), std::sqrt(2.0), 1e-9);
    EXPECT_NEAR(j["reduced"]["gamma_bound"].get<double>(), std::sqrt(3.0), 1e-9);

    for (const char* fixture : {"identity4.csv", "skewed3.csv", "calib_8x5.csv", "basis_z2.csv"}) {
        const Outcome b = run(std::string("bounds --reduce lll --calib ") + data(fixture) + " --report " +
                          tmp("report.json").string());
        ASSERT_EQ(b.code, 0) << b.err;
        const auto k = report();
        EXPECT_LE(k["reduced"]["bound_abs_paper"].get<double>(), k["bound_abs_paper"].get<double>() * (1 + 1e-12))
            << fixture;
    }
}

TEST_F(Cli, OracleRatioOnSkewedBasis) {
    const std::string common = " --calib " + data("basis_z2.csv") + " --target " + data("target_z2.csv") +
                               " --report " + tmp("report.json").string();
    const Outcome r = run("oracle" + common);
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = report();
    EXPECT_NEAR(j["oracle_ratio"].get<double>(), 3.0207615, 1e-6);
    EXPECT_NEAR(j["oracle_error"].get<double>(), 0.5656854249492382, 1e-12);
    EXPECT_NEAR(j["error_l2"].get<double>(), 1.7088007490635058, 1e-12);

    const Outcome red = run("oracle --reduce lll" + common);
    ASSERT_EQ(red.code, 0) << red.err;
    j = report();
    EXPECT_NEAR(j["oracle_ratio"].get<double>(), 1.0, 1e-12);
    EXPECT_EQ(j["v"], nlohmann::json::parse("[0,0]"));
}

TEST_F(Cli, ReduceWritesUnimodular) {
    const Outcome r = run("reduce --calib " + data("basis_z2.csv") + " --out " + tmp("b.csv").string() +
                      " --unimodular " + tmp("u.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("swaps"), std::string::npos);
    EXPECT_FALSE(slurp(tmp("u.csv")).empty());
}

TEST_F(Cli, InvalidInputsExitTwo) {
    EXPECT_EQ(run("quantize --weights " + data("missing.csv") + " --calib " + data("identity2.csv")).code, 2);
    EXPECT_EQ(run("quantize --weights " + data("w_tie.csv") + " --calib " + data("identity2.csv")).code, 2);
    EXPECT_EQ(run("quantize --algo nope --weights " + data("w_identity2.csv") + " --calib " +
                  data("identity2.csv")).code,
              2);
    EXPECT_EQ(run("quantize --mu -1 --weights " + data("w_identity2.csv") + " --calib " +
                  data("identity2.csv")).code,
              2);
    EXPECT_EQ(run("oracle --calib " + data("calib_8x5.csv")).code, 2);
    EXPECT_EQ(run("bogus").code, 2);
    EXPECT_EQ(run("").code, 2);

    std::ofstream(tmp("bad.csv")) << "1,2\n3\n";
    const Outcome r = run("bounds --calib " + tmp("bad.csv").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("2"), std::string::npos);
}

}  // namespace
