#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lvgpt/error.hpp"
#include "lvgpt/harness.hpp"
#include "lvgpt/run_config.hpp"
#include "lvgpt/synthetic.hpp"

namespace {

using namespace lvgpt;

struct RunFlags {
    std::string config;
    std::string profile = "paper";
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> sets;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "config file (key = value lines)");
    cmd->add_option("--profile", f.profile, "defaults to start from")->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--seed", f.seed, "overrides train.seed");
    cmd->add_option("--out", f.out, "overrides out.dir");
    cmd->add_option("--set", f.sets, "extra key=value override, repeatable");
}

RunConfig resolve(const RunFlags& f) {
    RunConfig cfg = default_run_config(parse_profile(f.profile));
    if (!f.config.empty()) cfg = load_run_config(f.config, cfg);
    for (const auto& s : f.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        auto trim = [](std::string v) {
            const auto b = v.find_first_not_of(" \t");
            const auto e = v.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
        };
        apply_setting(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.out_dir = f.out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vision-language GPT for synthetic VQA: data generation, training, evaluation, ablation"};
    app.require_subcommand(1);

    SyntheticSpec spec;
    std::string gen_out = "data/synthetic";
    auto* gen = app.add_subcommand("gen-data", "write a synthetic grid-of-shapes VQA dataset");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", spec.seed, "generator seed");
    gen->add_option("--n-train", spec.n_train, "training samples");
    gen->add_option("--n-test", spec.n_test, "test samples");
    gen->add_option("--grid-side", spec.grid_side, "2 or 3");
    gen->add_option("--image-size", spec.image_size, "image side in pixels");
    gen->add_option("--templates", spec.templates_per_type, "question templates per type (2..4)");
    gen->add_flag("--holdout-template", spec.holdout_last_template,
                  "train and test use templates 0..K-2; the rephrased split uses K-1");

    RunFlags train_flags;
    auto* train = app.add_subcommand("train", "train a model and write checkpoint + metrics.csv");
    add_run_flags(train, train_flags);

    EvalOptions eval_opts;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, overall and per question type");
    eval->add_option("--checkpoint", eval_opts.checkpoint, "model.lvgp file")->required();
    eval->add_option("--data", eval_opts.data, "manifest (.jsonl)")->required();
    eval->add_option("--labels", eval_opts.label_map, "label map (default: labels.tsv beside the manifest)");
    eval->add_flag("--rephrased", eval_opts.rephrased, "also evaluate the rephrased-query split");
    eval->add_option("--rephrased-data", eval_opts.rephrased_data,
                     "rephrased manifest (default: test_rephrased.jsonl beside --data)");
    eval->add_option("--threads", eval_opts.threads, "evaluation threads")->check(CLI::PositiveNumber);
    eval->add_option("--out", eval_opts.out_dir, "directory for eval.csv");

    RunFlags ablate_flags;
    std::string grid_text;
    auto* ablate = app.add_subcommand("ablate", "train and evaluate every cell of an ablation grid");
    add_run_flags(ablate, ablate_flags);
    ablate->add_option("--grid", grid_text,
                       "axes, e.g. \"order=early_word,early_vision;pose=zero,actual;backend=cnn_lite,vit_lite\"");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            const auto data = generate_synthetic(spec, gen_out);
            std::cout << "wrote " << data.train.samples.size() << " train, " << data.test.samples.size()
                      << " test and " << data.test_rephrased.samples.size() << " rephrased samples to " << gen_out
                      << "\n";
        } else if (*train) {
            const RunConfig cfg = resolve(train_flags);
            const auto r = run_training(cfg, &std::cout);
            print_metrics(std::cout, "train", r.train_report);
            if (r.test_report) print_metrics(std::cout, "test", *r.test_report);
            std::cout << "checkpoint " << r.checkpoint.string() << " (" << r.seconds << " s)\n";
        } else if (*eval) {
            run_eval(eval_opts, &std::cout);
        } else if (*ablate) {
            const RunConfig cfg = resolve(ablate_flags);
            const auto grid = grid_text.empty() ? default_ablation_grid() : parse_ablation_grid(grid_text);
            const auto r = run_ablation(cfg, grid, cfg.out_dir, &std::cout);
            for (const auto& c : r.cells)
                if (!c.ok) return 1;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
