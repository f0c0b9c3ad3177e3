// steadyreplay: train, evaluate, compare and plot DDPG runs on the suction-arm reaching task.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "steady_replay/harness/experiment.hpp"
#include "steady_replay/harness/plot.hpp"

using namespace steady_replay;

namespace {

std::optional<Profile> profile_arg(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_profile(s);
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::size_t used = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (part.empty() || used != part.size() || part.front() == '-')
            throw ConfigError("--seeds: '" + part + "' is not a seed");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--seeds: empty list");
    return out;
}

std::vector<UpdateMethod> parse_methods(const std::string& s) {
    std::vector<UpdateMethod> out;
    for (char c : s) out.push_back(parse_method(std::string(1, c)));
    if (out.empty()) throw ConfigError("--methods: empty list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive replay-buffer updates for DDPG on a simulated suction arm"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::string profile;
    std::string method;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto* train_cmd = app.add_subcommand("train", "train one method/seed and write logs, checkpoint and manifest");
    train_cmd->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--method", method, "A, B, C or D")->required();
    train_cmd->add_option("--seed", seed, "training seed")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--profile", profile, "paper or desk (overrides the config file)");

    std::string checkpoint;
    std::uint64_t eval_seed = 0;
    int eval_episodes = 0;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the seeded object set");
    eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--eval-seed", eval_seed)->required();
    eval_cmd->add_option("--method", method, "step mode to evaluate in (defaults to the config's method)");
    eval_cmd->add_option("--episodes", eval_episodes, "number of episodes (defaults to eval_episodes)");
    eval_cmd->add_option("--profile", profile);

    std::string seeds;
    std::string methods = "ABCD";
    int threads = -1;
    auto* compare_cmd = app.add_subcommand("compare", "train and evaluate every method for each seed");
    compare_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
    compare_cmd->add_option("--seeds", seeds, "comma-separated training seeds")->required();
    compare_cmd->add_option("--methods", methods, "subset of ABCD");
    compare_cmd->add_option("--out", out_dir, "output directory (defaults to out_dir)");
    compare_cmd->add_option("--threads", threads, "worker threads, 0 = all cores");
    compare_cmd->add_option("--profile", profile);

    std::string log_path;
    std::string svg_path;
    auto* plot_cmd = app.add_subcommand("plot", "render an episode log as SVG");
    plot_cmd->add_option("--log", log_path)->required()->check(CLI::ExistingFile);
    plot_cmd->add_option("--out", svg_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            RunConfig cfg = load_config(config_path, profile_arg(profile));
            cfg.method = parse_method(method);
            cfg.seed = seed;
            cfg.out_dir = out_dir;
            cfg.validate();
            const RunArtifacts art = run_training(cfg, out_dir);
            fmt::print("method {} seed {}: success_rate {:.2f} mean_reward {:.4f} shake {:.4f}\n", to_char(cfg.method),
                       cfg.seed, art.evaluation.success_rate, art.evaluation.mean_episode_reward, art.evaluation.shake);
            fmt::print("wrote {}\n", out_dir);
        } else if (*eval_cmd) {
            RunConfig cfg = load_config(config_path, profile_arg(profile));
            if (!method.empty()) cfg.method = parse_method(method);
            const int n = eval_episodes > 0 ? eval_episodes : cfg.eval_episodes;
            const EvalReport ev = evaluate_checkpoint(checkpoint, cfg, eval_seed, n);
            nlohmann::ordered_json j = eval_json(ev);
            j["eval_seed"] = eval_seed;
            j["method"] = std::string(1, to_char(cfg.method));
            std::cout << j.dump(2) << '\n';
        } else if (*compare_cmd) {
            RunConfig cfg = load_config(config_path, profile_arg(profile));
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (threads >= 0) cfg.threads = threads;
            const auto rows = compare(cfg, parse_methods(methods), parse_seeds(seeds), [](const ComparisonRow& r) {
                fmt::print(stderr, "done {} seed {}\n", to_char(r.method), r.seed);
            });
            std::cout << kComparisonHeader << '\n';
            for (const auto& r : rows) std::cout << format_comparison_row(r) << '\n';
        } else if (*plot_cmd) {
            emit_plots(log_path, svg_path);
            fmt::print("wrote {}\n", svg_path);
        }
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
