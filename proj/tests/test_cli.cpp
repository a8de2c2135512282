#include "lstmeq/signal.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = LSTMEQ_CLI_PATH;
const std::string kIdentity = std::string(LSTMEQ_SOURCE_DIR) + "/configs/identity.json";

int run(const std::string& args)
{
    const std::string cmd = "'" + kCli + "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        out[e.path().filename().string()] = slurp(e.path());
    return out;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);)
        out.push_back(l);
    return out;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() / ("lstmeq_cli_" + std::string(
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string out(const char* sub) const { return (dir_ / sub).string(); }

    // Small, fast variant of the identity config.
    std::string quick(const std::string& verb, const char* sub, const std::string& extra = "") const
    {
        return verb + " --config '" + kIdentity + "' --out '" + out(sub) +
               "' --set training.max_epochs=1 --set training.train_bits=300 --set training.valid_bits=100"
               " --set signal.bits=600 " +
               extra;
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("simulate"), 1);
    EXPECT_EQ(run("simulate --config /no/such/config.json"), 1);
    EXPECT_EQ(run(quick("simulate", "a", "--set model.colour=3")), 1);
    EXPECT_EQ(run(quick("simulate", "a", "--set channel.synthetic.decay=1.5")), 1);
    EXPECT_EQ(run(quick("simulate", "a", "--seed notanumber")), 1);
    EXPECT_EQ(run(quick("evaluate", "a", "--model /no/such/model.rom")), 1);
    EXPECT_EQ(run("render-eye --input '" + kIdentity + "'"), 1);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, RuntimeFailureExitsTwo)
{
    // A waveform shorter than one unit interval cannot form an eye.
    lstmeq::write_waveform_csv(out("short.csv"), lstmeq::Waveform{{0.0, 1.0, 0.0}, 2.5e-12});
    EXPECT_EQ(run("render-eye --input '" + out("short.csv") + "' --bit-rate 50e9 --out '" + out("r") + "'"), 2);
    // Output directory below a regular file.
    std::ofstream(out("blocker")) << "x";
    EXPECT_EQ(run(quick("simulate", "blocker/sub")), 2);
}

TEST_F(Cli, SimulateIsDeterministicAndLeavesInputsAlone)
{
    const auto config_before = slurp(kIdentity);
    ASSERT_EQ(run(quick("simulate", "a")), 0);
    const auto first = snapshot(out("a"));
    for (const char* f : {"tx_bits.csv", "tx_waveform.csv", "rx_waveform.csv", "channel_impulse.csv",
                          "eye_none.pgm", "eye_none.csv", "eye_report.csv", "config.json", "manifest.json"})
        EXPECT_TRUE(first.count(f)) << f;
    ASSERT_EQ(run(quick("simulate", "a")), 0);
    EXPECT_EQ(snapshot(out("a")), first);
    EXPECT_EQ(slurp(kIdentity), config_before);

    ASSERT_EQ(run(quick("simulate", "b", "--seed 99")), 0);
    EXPECT_NE(slurp(out("b") + "/tx_bits.csv"), first.at("tx_bits.csv"));
    const auto manifest = first.at("manifest.json");
    EXPECT_NE(manifest.find("\"config_hash\""), std::string::npos);
    EXPECT_NE(manifest.find("\"simulate\""), std::string::npos);

    // The recorded config replays the same run.
    ASSERT_EQ(run("simulate --config '" + out("a") + "/config.json' --out '" + out("c") + "'"), 0);
    EXPECT_EQ(slurp(out("c") + "/rx_waveform.csv"), first.at("rx_waveform.csv"));
}

TEST_F(Cli, TrainEvaluateCompareOnIdentityChannel)
{
    ASSERT_EQ(run(quick("fit-baseline", "fit")), 0);
    EXPECT_NE(slurp(out("fit") + "/baseline.json").find("\"dfe\""), std::string::npos);

    ASSERT_EQ(run(quick("train", "t")), 0);
    const auto rom = out("t") + "/model.rom";
    ASSERT_TRUE(fs::exists(rom));
    const auto report = lines(slurp(out("t") + "/train_report.csv"));
    ASSERT_GT(report.size(), 1u);
    EXPECT_EQ(report[0], "step,train_loss,valid_loss");

    ASSERT_EQ(run(quick("train", "t2")), 0);
    EXPECT_EQ(slurp(out("t2") + "/model.rom"), slurp(rom));

    ASSERT_EQ(run(quick("evaluate", "e", "--model '" + rom + "'")), 0);
    ASSERT_EQ(run(quick("compare", "c", "--model '" + rom + "'")), 0);
    const auto rows = lines(slurp(out("c") + "/compare_report.csv"));
    ASSERT_EQ(rows.size(), 4u);
    const char* names[] = {"none,", "ffe-dfe,", "lstm,"};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(rows[i + 1].rfind(names[i], 0), 0u) << rows[i + 1];
        // bit_errors column is zero for every pipeline.
        std::vector<std::string> cols;
        std::stringstream ss(rows[i + 1]);
        for (std::string c; std::getline(ss, c, ',');)
            cols.push_back(c);
        ASSERT_EQ(cols.size(), 9u);
        EXPECT_EQ(cols[7], "0") << rows[i + 1];
    }
    for (const char* f : {"eye_none.pgm", "eye_ffe-dfe.pgm", "eye_lstm.pgm", "overlay.csv", "baseline.json"})
        EXPECT_TRUE(fs::exists(out("c") + "/" + f)) << f;
    EXPECT_EQ(lines(slurp(out("c") + "/overlay.csv"))[0], "time_s,tx,rx,ffe_dfe,lstm");

    // Resuming with no further epochs reproduces the model and its outputs.
    ASSERT_EQ(run(quick("train", "r", "--resume '" + rom + "' --set training.max_epochs=0")), 0);
    EXPECT_EQ(slurp(out("r") + "/model.rom"), slurp(rom));
    ASSERT_EQ(run(quick("evaluate", "e2", "--model '" + out("r") + "/model.rom'")), 0);
    EXPECT_EQ(slurp(out("e2") + "/lstm_waveform.csv"), slurp(out("e") + "/lstm_waveform.csv"));

    // render-eye on the equalized waveform.
    ASSERT_EQ(run("render-eye --input '" + out("e") + "/lstm_waveform.csv' --bit-rate 50e9 --out '" + out("eye") + "'"), 0);
    const auto pgm = slurp(out("eye") + "/eye.pgm");
    EXPECT_EQ(pgm.rfind("P5\n16 128\n255\n", 0), 0u);
}
