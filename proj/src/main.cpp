#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsadapt/checkpoint.hpp"
#include "tsadapt/config.hpp"
#include "tsadapt/dataset.hpp"
#include "tsadapt/experiment.hpp"

namespace {

using tsadapt::cli::ExperimentConfig;

void write_text(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw std::runtime_error("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.good()) throw std::runtime_error("cannot write '" + path + "'");
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string item =
            text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!item.empty()) out.push_back(std::stod(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (const double v : parse_double_list(text)) out.push_back(static_cast<std::size_t>(v));
    return out;
}

std::string joined(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void write_eval_outputs(const std::string& dir, const tsadapt::eval::MetricsReport& metrics,
                        const std::optional<tsadapt::eval::ReliabilityTable>& reliability) {
    write_text(joined(dir, "metrics.csv"), tsadapt::eval::to_csv(metrics));
    if (reliability.has_value()) {
        write_text(joined(dir, "reliability.csv"), tsadapt::eval::to_csv(*reliability));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-space adapters around a frozen univariate forecaster"};
    app.require_subcommand(1);
    app.footer("Config file keys and defaults:\n\n" +
               tsadapt::cli::serialize_config(ExperimentConfig{}));
    std::function<void()> action;

    // synth-gen
    auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic benchmark series as CSV");
    {
        auto mode = std::make_shared<std::string>("correlated");
        auto length = std::make_shared<std::size_t>(1600);
        auto scale = std::make_shared<double>(0.2);
        auto offset = std::make_shared<double>(0.0);
        auto seed = std::make_shared<std::uint64_t>(0);
        auto out = std::make_shared<std::string>("synthetic.csv");
        synth->add_option("--mode", *mode, "uncorrelated or correlated")
            ->check(CLI::IsMember({"uncorrelated", "correlated"}));
        synth->add_option("--length", *length, "series length T (>= 1024)");
        synth->add_option("--scale", *scale, "signal amplitude scale");
        synth->add_option("--offset", *offset, "constant level shift on the test range");
        synth->add_option("--seed", *seed, "generator seed");
        synth->add_option("--out", *out, "output CSV path");
        synth->callback([=, &action]() {
            action = [=]() {
                const auto m = *mode == "uncorrelated" ? tsadapt::data::SyntheticMode::uncorrelated
                                                       : tsadapt::data::SyntheticMode::correlated;
                const auto ds = tsadapt::data::generate_synthetic(tsadapt::num::Rng(*seed), m,
                                                                  *length, *scale, *offset);
                const std::filesystem::path p(*out);
                if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
                tsadapt::data::save_csv(ds, *out);
                nlohmann::ordered_json rec;
                rec["command"] = "synth-gen";
                rec["config"] = {{"mode", *mode},     {"length", *length}, {"scale", *scale},
                                 {"offset", *offset}, {"seed", *seed},     {"out", *out}};
                write_text(*out + ".json", rec.dump(2) + "\n");
                std::cout << "wrote " << *out << " (" << ds.length() << " x " << ds.channels()
                          << ")\n";
            };
        });
    }

    // linear-experiment
    auto* linexp = app.add_subcommand(
        "linear-experiment", "Closed-form vs identity vs PCA across random linear forecasters");
    {
        auto mode = std::make_shared<std::string>("uncorrelated");
        auto trials = std::make_shared<std::size_t>(1000);
        auto seed = std::make_shared<std::uint64_t>(0);
        auto context = std::make_shared<std::size_t>(96);
        auto horizon = std::make_shared<std::size_t>(24);
        auto out = std::make_shared<std::string>("runs");
        linexp->add_option("--mode", *mode, "uncorrelated or correlated")
            ->check(CLI::IsMember({"uncorrelated", "correlated"}));
        linexp->add_option("--trials", *trials, "number of random forecasters");
        linexp->add_option("--seed", *seed, "experiment seed");
        linexp->add_option("--context", *context, "context length L");
        linexp->add_option("--horizon", *horizon, "horizon H");
        linexp->add_option("--out", *out, "output directory");
        linexp->callback([=, &action]() {
            action = [=]() {
                const auto m = *mode == "uncorrelated" ? tsadapt::data::SyntheticMode::uncorrelated
                                                       : tsadapt::data::SyntheticMode::correlated;
                const auto summary =
                    tsadapt::cli::run_linear_experiment(m, *trials, *seed, *context, *horizon);
                write_text(joined(*out, "linear_experiment_" + *mode + ".csv"),
                           tsadapt::cli::to_csv(summary));
                nlohmann::ordered_json rec;
                rec["command"] = "linear-experiment";
                rec["config"] = {{"mode", *mode},       {"trials", *trials},
                                 {"seed", *seed},       {"context", *context},
                                 {"horizon", *horizon}, {"out", *out}};
                write_text(joined(*out, "run_record.json"), rec.dump(2) + "\n");
                std::cout << "median mse: identity " << summary.median_identity << ", pca "
                          << summary.median_pca << ", closed-form " << summary.median_closed
                          << "\n";
                tsadapt::cli::check_orderings(summary);
            };
        });
    }

    // train
    auto* train = app.add_subcommand("train", "Fit an adapter around the frozen forecaster");
    {
        auto config_path = std::make_shared<std::string>();
        auto seed = std::make_shared<std::int64_t>(-1);
        auto out = std::make_shared<std::string>();
        train->add_option("--config", *config_path, "experiment config file")->required();
        train->add_option("--seed", *seed, "override [run] seed");
        train->add_option("--out", *out, "override [run] out_dir");
        train->callback([=, &action]() {
            action = [=]() {
                ExperimentConfig cfg = tsadapt::cli::load_config(*config_path);
                if (*seed >= 0) cfg.run.seed = static_cast<std::uint64_t>(*seed);
                if (!out->empty()) cfg.run.out_dir = *out;
                const auto result = tsadapt::cli::run_training(cfg);
                const std::string dir = cfg.run.out_dir;
                std::filesystem::create_directories(dir);
                tsadapt::io::save_checkpoint(result.checkpoint, joined(dir, "checkpoint.tsac"));
                write_text(joined(dir, "run_record.json"), tsadapt::cli::to_json(result.record));
                write_eval_outputs(dir, result.record.metrics, result.record.reliability);
                std::cout << "test mse " << result.record.metrics.mse << ", mae "
                          << result.record.metrics.mae << ", identity mse "
                          << result.record.identity_mse << "\n";
            };
        });
    }

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score a stored checkpoint on a dataset");
    {
        auto ckpt_path = std::make_shared<std::string>();
        auto config_path = std::make_shared<std::string>();
        auto samples = std::make_shared<std::int64_t>(-1);
        auto out = std::make_shared<std::string>();
        evaluate->add_option("--checkpoint", *ckpt_path, "checkpoint file")->required();
        evaluate->add_option("--config", *config_path, "config describing the dataset")
            ->required();
        evaluate->add_option("--samples", *samples, "override [run] s_samples");
        evaluate->add_option("--out", *out, "override [run] out_dir");
        evaluate->callback([=, &action]() {
            action = [=]() {
                ExperimentConfig cfg = tsadapt::cli::load_config(*config_path);
                if (!out->empty()) cfg.run.out_dir = *out;
                const std::size_t s = *samples >= 0 ? static_cast<std::size_t>(*samples)
                                                    : cfg.run.s_samples;
                const auto ckpt = tsadapt::io::load_checkpoint(*ckpt_path);
                const auto result = tsadapt::cli::run_evaluation(ckpt, cfg, s);
                write_text(joined(cfg.run.out_dir, "run_record.json"),
                           tsadapt::cli::command_record_json("evaluate", cfg));
                write_eval_outputs(cfg.run.out_dir, result.metrics, result.reliability);
                std::cout << "test mse " << result.metrics.mse << ", mae " << result.metrics.mae
                          << "\n";
            };
        });
    }

    // sweep-components
    auto* sweepc = app.add_subcommand("sweep-components",
                                      "Train once per latent width and tabulate test error");
    {
        auto config_path = std::make_shared<std::string>();
        auto widths = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sweepc->add_option("--config", *config_path, "experiment config file")->required();
        sweepc->add_option("--widths", *widths, "comma-separated latent widths (default 1..D)");
        sweepc->add_option("--out", *out, "override [run] out_dir");
        sweepc->callback([=, &action]() {
            action = [=]() {
                ExperimentConfig cfg = tsadapt::cli::load_config(*config_path);
                if (!out->empty()) cfg.run.out_dir = *out;
                std::vector<std::size_t> list = widths->empty()
                                                    ? cfg.experiment.component_sweep
                                                    : parse_size_list(*widths);
                const std::string csv = tsadapt::cli::sweep_components_csv(cfg, std::move(list));
                write_text(joined(cfg.run.out_dir, "run_record.json"),
                           tsadapt::cli::command_record_json("sweep-components", cfg));
                write_text(joined(cfg.run.out_dir, "sweep_components.csv"), csv);
                std::cout << csv;
            };
        });
    }

    // sweep-beta-sigma
    auto* sweepb = app.add_subcommand("sweep-beta-sigma",
                                      "Grid over KL weight and observation variance");
    {
        auto config_path = std::make_shared<std::string>();
        auto betas = std::make_shared<std::string>();
        auto logs = std::make_shared<std::string>();
        auto no_auto = std::make_shared<bool>(false);
        auto out = std::make_shared<std::string>();
        sweepb->add_option("--config", *config_path, "experiment config file")->required();
        sweepb->add_option("--betas", *betas, "comma-separated beta values");
        sweepb->add_option("--log-sigma2s", *logs, "comma-separated log sigma2 values");
        sweepb->add_flag("--no-auto", *no_auto, "skip the learned-variance column");
        sweepb->add_option("--out", *out, "override [run] out_dir");
        sweepb->callback([=, &action]() {
            action = [=]() {
                ExperimentConfig cfg = tsadapt::cli::load_config(*config_path);
                if (!out->empty()) cfg.run.out_dir = *out;
                if (!betas->empty()) cfg.experiment.beta_sweep = parse_double_list(*betas);
                if (!logs->empty()) cfg.experiment.log_sigma2_sweep = parse_double_list(*logs);
                if (*no_auto) cfg.experiment.include_auto = false;
                const std::string csv = tsadapt::cli::sweep_beta_sigma_csv(cfg);
                write_text(joined(cfg.run.out_dir, "run_record.json"),
                           tsadapt::cli::command_record_json("sweep-beta-sigma", cfg));
                write_text(joined(cfg.run.out_dir, "sweep_beta_sigma.csv"), csv);
                std::cout << csv;
            };
        });
    }

    // export-latent
    auto* latent = app.add_subcommand("export-latent",
                                      "Project encoded windows to two principal components");
    {
        auto ckpt_path = std::make_shared<std::string>();
        auto config_path = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        latent->add_option("--checkpoint", *ckpt_path, "checkpoint file")->required();
        latent->add_option("--config", *config_path, "config describing the dataset")->required();
        latent->add_option("--out", *out, "override [run] out_dir");
        latent->callback([=, &action]() {
            action = [=]() {
                ExperimentConfig cfg = tsadapt::cli::load_config(*config_path);
                if (!out->empty()) cfg.run.out_dir = *out;
                const auto ckpt = tsadapt::io::load_checkpoint(*ckpt_path);
                const std::string csv = tsadapt::cli::export_latent_csv(ckpt, cfg);
                write_text(joined(cfg.run.out_dir, "run_record.json"),
                           tsadapt::cli::command_record_json("export-latent", cfg));
                write_text(joined(cfg.run.out_dir, "latent.csv"), csv);
                std::cout << "wrote " << joined(cfg.run.out_dir, "latent.csv") << "\n";
            };
        });
    }

    CLI11_PARSE(app, argc, argv);
    try {
        action();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
