#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct CliResult {
    int status = -1;
    std::string output;
};

CliResult run(const std::string& args) {
    const std::string cmd = std::string(STEADYREPLAY_CLI) + " " + args + " 2>&1";
    CliResult r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
    const int raw = pclose(p);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::filesystem::path workdir() {
    const auto d = std::filesystem::temp_directory_path() / "steady_replay_cli";
    std::filesystem::create_directories(d);
    return d;
}

std::string write_config(const std::string& name, const std::string& body) {
    const auto p = workdir() / name;
    std::ofstream(p) << body;
    return p.string();
}

const char* kTinyConfig =
    "profile = desk\nepisodes = 3\nhidden = 8,8\nbatch_size = 16\nwarmup_transitions = 32\n"
    "stored_steps_per_episode = 15\nmax_attempted_steps = 30\neval_episodes = 4\n";

}  // namespace

TEST(Cli, ErrorsExitNonZero) {
    EXPECT_NE(run("").status, 0);
    EXPECT_NE(run("frobnicate").status, 0);
    EXPECT_NE(run("train --method A --seed 1 --out x").status, 0);
    const std::string bad = write_config("bad.conf", "gamma = 2\n");
    const CliResult r = run("train --config " + bad + " --method A --seed 1 --out " + (workdir() / "bad").string());
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.output.find("line 1"), std::string::npos);
    const std::string ok = write_config("tiny.conf", kTinyConfig);
    EXPECT_NE(run("train --config " + ok + " --method Q --seed 1 --out " + (workdir() / "q").string()).status, 0);
    EXPECT_NE(run("compare --config " + ok + " --seeds 1,x").status, 0);
    EXPECT_NE(run("plot --log " + ok + " --out " + (workdir() / "p.svg").string()).status, 0);
}

TEST(Cli, TrainEvalPlot) {
    const std::string cfg = write_config("tiny.conf", kTinyConfig);
    const auto out = workdir() / "run";
    std::filesystem::remove_all(out);
    const CliResult t = run("train --config " + cfg + " --method C --seed 3 --out " + out.string());
    ASSERT_EQ(t.status, 0) << t.output;
    for (const char* f : {"episodes.csv", "steps.csv", "checkpoint.srckpt", "manifest.json"})
        EXPECT_TRUE(std::filesystem::exists(out / f)) << f;

    const CliResult e = run("eval --checkpoint " + (out / "checkpoint.srckpt").string() + " --config " + cfg +
                      " --eval-seed 4242 --method C");
    ASSERT_EQ(e.status, 0) << e.output;
    EXPECT_NE(e.output.find("\"success_rate\""), std::string::npos);

    const CliResult p = run("plot --log " + (out / "episodes.csv").string() + " --out " + (out / "rewards.svg").string());
    ASSERT_EQ(p.status, 0) << p.output;
    EXPECT_TRUE(std::filesystem::exists(out / "rewards.svg"));

    const std::string corrupt = (out / "broken.srckpt").string();
    std::ofstream(corrupt) << "SRCKPT 2\n";
    EXPECT_NE(run("eval --checkpoint " + corrupt + " --config " + cfg + " --eval-seed 1").status, 0);
    std::filesystem::remove_all(out);
}

TEST(Cli, Compare) {
    const auto out = workdir() / "cmp";
    std::filesystem::remove_all(out);
    const std::string cfg = write_config("cmp.conf", std::string(kTinyConfig) + "out_dir = " + out.string() + "\n");
    const CliResult c = run("compare --config " + cfg + " --seeds 1,2 --methods AB");
    ASSERT_EQ(c.status, 0) << c.output;
    EXPECT_TRUE(std::filesystem::exists(out / "comparison.csv"));
    EXPECT_TRUE(std::filesystem::exists(out / "method_B_seed_2" / "checkpoint.srckpt"));
    std::filesystem::remove_all(out);
}
