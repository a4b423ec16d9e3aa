// itl: command line front end for environment generation, data collection,
// posterior fitting, constrained sampling and the experiment pipeline.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "itl/data.hpp"
#include "itl/env_gen.hpp"
#include "itl/experiment.hpp"
#include "itl/itl_sampler.hpp"
#include "itl/kernels.hpp"
#include "itl/posterior.hpp"
#include "itl/report.hpp"
#include "itl/serialization.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFlagged = 2;

struct GenEnvArgs {
    itl::EnvSpec spec;
    double reward_high = -1.0;
    std::string reward_dependence = "state-action";
    std::string targets;
    int max_tries = 1000;
    std::string out;
};

int run_gen_env(GenEnvArgs& args) {
    if (args.reward_high >= 0.0) args.spec.reward_high = args.reward_high;
    if (args.reward_dependence == "action")
        args.spec.reward_dependence = itl::RewardDependence::ActionOnly;
    else if (args.reward_dependence != "state-action")
        throw itl::ContractViolation("--reward-dependence must be 'state-action' or 'action'");
    args.spec.validate();
    if (args.targets.empty()) {
        itl::save_mdp(itl::generate_env(args.spec), args.out);
        std::cout << "seed " << args.spec.seed << '\n';
        return kExitOk;
    }
    const auto targets = itl::parse_targets(args.targets);
    try {
        const auto found = itl::find_env_with_structure(args.spec, targets, args.max_tries);
        itl::save_mdp(found.mdp, args.out);
        std::cout << "seed " << found.seed << " after " << found.tries << " tries\n";
        return kExitOk;
    } catch (const itl::StructureSearchError& e) {
        std::cerr << "error: " << e.what() << "\nclosest seed " << e.closest_seed() << ':';
        for (const auto& [eps, count] : e.closest_counts()) std::cerr << ' ' << eps << "->" << count;
        std::cerr << '\n';
        return kExitError;
    }
}

struct GenDataArgs {
    std::string env;
    double expert_epsilon = 0.0;
    int episodes = 15;
    int horizon = itl::kDefaultHorizon;
    int n_datasets = 1;
    std::uint64_t master_seed = 0;
    std::string out_dir;
    int jobs = 1;
};

int run_gen_data(const GenDataArgs& args) {
    const itl::TabularMdp mdp = itl::load_mdp(args.env);
    const itl::TrueEnvOracle oracle(mdp);
    const itl::Policy expert = oracle.expert(args.expert_epsilon);
    const std::string hash = itl::env_hash(mdp);
    const std::filesystem::path dir(args.out_dir);
    itl::kernels::for_each_index(static_cast<std::size_t>(args.n_datasets), args.jobs, [&](std::size_t i) {
        const std::uint64_t seed = itl::dataset_seed(args.master_seed, i);
        const auto batch = itl::rollout_batch(mdp, expert, args.episodes, args.horizon, seed);
        char name[32];
        std::snprintf(name, sizeof name, "batch_%05zu.json", i);
        itl::save_batch(batch, {hash, seed, args.episodes, args.horizon, args.expert_epsilon}, dir / name);
    });
    return kExitOk;
}

int run_fit_mle(const std::string& batch_path, const std::string& out) {
    const itl::BatchFile file = itl::load_batch(batch_path);
    const itl::DirichletPosterior post = itl::fit_posterior(file.batch);
    const itl::Json doc{{"format", "itl-mle/1"},
                        {"env_hash", file.meta.env_hash},
                        {"batch_seed", file.meta.seed},
                        {"episodes", file.meta.episodes},
                        {"total_steps", file.batch.total_steps()},
                        {"prior_concentration", 1.0},
                        {"n_states", file.batch.n_states()},
                        {"n_actions", file.batch.n_actions()},
                        {"terminal", file.batch.terminal()},
                        {"transitions", itl::transitions_to_json(itl::posterior_mean(post))}};
    itl::write_text_file(out, doc.dump(1) + "\n");
    return kExitOk;
}

struct SampleArgs {
    std::string env;
    double expert_epsilon = 0.0;
    std::string batch;
    int n_samples = 100;
    std::string anchor = "mle";
    std::string ball_source = "q-star";
    std::uint64_t seed = 0;
    std::string out;
    bool compress = false;
    bool omit_samples = false;
};

int run_itl_sample(const SampleArgs& args) {
    const itl::TabularMdp mdp = itl::load_mdp(args.env);
    const itl::BatchFile file = itl::load_batch(args.batch);
    itl::require(file.batch.n_states() == mdp.n_states() && file.batch.n_actions() == mdp.n_actions(),
                 "batch shape does not match the environment");
    const itl::TrueEnvOracle oracle(mdp);
    const itl::Policy expert = oracle.expert(args.expert_epsilon);
    const itl::DirichletPosterior post = itl::fit_posterior(file.batch);

    itl::SamplerOptions options;
    options.ball_source = itl::parse_ball_source(args.ball_source);
    const itl::AnchorMode anchor = itl::parse_anchor_mode(args.anchor);
    itl::Rng rng(args.seed);
    const auto ctx =
        itl::build_context(post, expert, mdp.rewards(), mdp.discount(), args.expert_epsilon, anchor, rng);
    const auto set = itl::sample_constrained(post, ctx, args.n_samples, options, rng);

    itl::Json doc{{"format", "itl-samples/1"},
                  {"env_hash", itl::env_hash(mdp)},
                  {"batch_seed", file.meta.seed},
                  {"expert_epsilon", args.expert_epsilon},
                  {"anchor", itl::to_string(anchor)},
                  {"ball_source", itl::to_string(options.ball_source)},
                  {"seed", args.seed}};
    doc.update(itl::sample_set_to_json(set, !args.omit_samples));
    itl::write_text_file(args.out, doc.dump() + "\n", args.compress);
    std::cout << "accepted " << set.accepted << ", rejected candidates " << set.outer_rounds_used << '\n';
    return kExitOk;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_dir, int jobs) {
    const itl::ExperimentConfig config = itl::load_config(config_path);
    const itl::MetricsReport report = itl::run_experiment(config, jobs);
    itl::emit_outputs(report, config, out_dir);
    if (report.flagged_overflow(config.max_flagged_fraction)) {
        std::cerr << "error: " << report.flagged_datasets << " of " << report.total_datasets
                  << " datasets flagged (limit " << config.max_flagged_fraction * 100.0 << "%)\n";
        return kExitFlagged;
    }
    std::cout << "wrote " << out_dir << " (" << report.flagged_datasets << " flagged datasets)\n";
    return kExitOk;
}

int run_plot(const std::string& metrics, const std::string& out, int bins) {
    const auto rows = itl::parse_qstar_csv(itl::read_text_file(metrics));
    itl::require(!rows.empty(), "no Q*-metric values in " + metrics);
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> groups;
    std::vector<double> all;
    for (const auto& r : rows) {
        const std::string key =
            r.method + " (eps=" + itl::format_epsilon(r.epsilon) + ", K=" + std::to_string(r.episodes) + ")";
        if (!groups.contains(key)) order.push_back(key);
        groups[key].push_back(r.value);
        all.push_back(r.value);
    }
    const itl::Histogram range = itl::make_histogram(all, 1);
    std::vector<itl::HistogramPanel> panels;
    for (const auto& key : order)
        panels.push_back({key, itl::make_histogram(groups[key], range.edges.front(), range.edges.back(), bins)});
    itl::write_text_file(out, itl::render_histograms_svg(panels));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular expert-constrained posterior sampling toolkit"};
    app.require_subcommand(1);

    GenEnvArgs env_args;
    auto* gen_env = app.add_subcommand("gen-env", "Generate a random environment");
    gen_env->add_option("--n-states", env_args.spec.n_decision_states, "Decision states (terminal excluded)");
    gen_env->add_option("--n-actions", env_args.spec.n_actions);
    gen_env->add_option("--discount", env_args.spec.discount);
    gen_env->add_option("--skew-mix", env_args.spec.skew_mix);
    gen_env->add_option("--skew-concentration", env_args.spec.skew_concentration);
    gen_env->add_option("--flat-concentration", env_args.spec.flat_concentration);
    gen_env->add_option("--reward-low", env_args.spec.reward_low);
    gen_env->add_option("--reward-high", env_args.reward_high, "Defaults to the number of decision states");
    gen_env->add_option("--reward-dependence", env_args.reward_dependence)
        ->check(CLI::IsMember({"state-action", "action"}));
    gen_env->add_option("--seed", env_args.spec.seed);
    gen_env->add_option("--targets", env_args.targets, "Structure targets, e.g. \"0:0,3:3,4:6\"");
    gen_env->add_option("--max-tries", env_args.max_tries);
    gen_env->add_option("--out", env_args.out)->required();

    GenDataArgs data_args;
    auto* gen_data = app.add_subcommand("gen-data", "Roll out expert batches");
    gen_data->add_option("--env", data_args.env)->required();
    gen_data->add_option("--expert-epsilon", data_args.expert_epsilon)->required();
    gen_data->add_option("--episodes", data_args.episodes)->required();
    gen_data->add_option("--horizon", data_args.horizon);
    gen_data->add_option("--n-datasets", data_args.n_datasets);
    gen_data->add_option("--master-seed", data_args.master_seed);
    gen_data->add_option("--out-dir", data_args.out_dir)->required();
    gen_data->add_option("--jobs", data_args.jobs);

    std::string mle_batch;
    std::string mle_out;
    auto* fit_mle = app.add_subcommand("fit-mle", "Write the posterior-mean transition tensor");
    fit_mle->add_option("--batch", mle_batch)->required();
    fit_mle->add_option("--out", mle_out)->required();

    SampleArgs sample_args;
    auto* itl_sample = app.add_subcommand("itl-sample", "Draw expert-constrained posterior samples");
    itl_sample->add_option("--env", sample_args.env)->required();
    itl_sample->add_option("--expert-epsilon", sample_args.expert_epsilon)->required();
    itl_sample->add_option("--batch", sample_args.batch)->required();
    itl_sample->add_option("--n-samples", sample_args.n_samples);
    itl_sample->add_option("--anchor", sample_args.anchor)->check(CLI::IsMember({"mle", "sample"}));
    itl_sample->add_option("--ball-source", sample_args.ball_source)->check(CLI::IsMember({"q-star", "q-expert"}));
    itl_sample->add_option("--seed", sample_args.seed);
    itl_sample->add_option("--out", sample_args.out)->required();
    itl_sample->add_flag("--compress", sample_args.compress, "gzip the output document");
    itl_sample->add_flag("--omit-samples", sample_args.omit_samples, "Write diagnostics only");

    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    auto* experiment = app.add_subcommand("experiment", "Run the full evaluation pipeline");
    experiment->add_option("--config", config_path)->required();
    experiment->add_option("--out-dir", out_dir)->required();
    experiment->add_option("--jobs", jobs);

    std::string plot_metrics;
    std::string plot_out;
    int plot_bins = itl::kDefaultBins;
    auto* plot = app.add_subcommand("plot", "Histogram a per-dataset Q*-metric CSV");
    plot->add_option("--metrics", plot_metrics)->required();
    plot->add_option("--out", plot_out)->required();
    plot->add_option("--bins", plot_bins);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }

    try {
        if (*gen_env) return run_gen_env(env_args);
        if (*gen_data) return run_gen_data(data_args);
        if (*fit_mle) return run_fit_mle(mle_batch, mle_out);
        if (*itl_sample) return run_itl_sample(sample_args);
        if (*experiment) return run_experiment_cmd(config_path, out_dir, jobs);
        if (*plot) return run_plot(plot_metrics, plot_out, plot_bins);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
