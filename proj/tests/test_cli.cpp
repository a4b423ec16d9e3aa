#include <cstdlib>
#include <sys/wait.h>

#include "doctest.h"

#include "itl/env_gen.hpp"
#include "itl/report.hpp"
#include "itl/serialization.hpp"

using namespace itl;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "itl_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(ITL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

std::string slurp(const fs::path& p) { return read_text_file(p); }

void write_config(const std::string& name, const std::string& body) { write_text_file(workdir() / name, body); }

} // namespace

TEST_CASE("gen-env reproduces the reference instance through the structure search") {
    CHECK(run("gen-env --seed 0 --targets 0:0,3:3,4:6 --out " + path("ref.json")) == 0);
    CHECK(load_mdp(path("ref.json")) == reference_env());
    CHECK(run("gen-env --seed 7 --out " + path("plain.json")) == 0);
    EnvSpec spec;
    spec.seed = 7;
    CHECK(load_mdp(path("plain.json")) == generate_env(spec));
    CHECK(run("gen-env --seed 0 --targets 0:9999 --max-tries 3 --out " + path("none.json")) == 1);
    CHECK(run("gen-env --discount 1.5 --out " + path("bad.json")) == 1);
    CHECK(run("gen-env") == 1);
}

TEST_CASE("gen-data, fit-mle and itl-sample pipeline is deterministic") {
    save_mdp(reference_env(), workdir() / "env.json");
    const std::string common = "gen-data --env " + path("env.json") + " --expert-epsilon 3 --episodes 15 --n-datasets 3 --master-seed 4";
    CHECK(run(common + " --out-dir " + path("data_a")) == 0);
    CHECK(run(common + " --jobs 3 --out-dir " + path("data_b")) == 0);
    for (const char* f : {"batch_00000.json", "batch_00001.json", "batch_00002.json"})
        CHECK(slurp(workdir() / "data_a" / f) == slurp(workdir() / "data_b" / f));
    const auto batch = load_batch(workdir() / "data_a" / "batch_00001.json");
    CHECK(batch.meta.seed == dataset_seed(4, 1));
    CHECK(batch.meta.episodes == 15);
    CHECK(batch.batch.trajectories().size() == 15);

    const std::string b0 = (workdir() / "data_a" / "batch_00000.json").string();
    CHECK(run("fit-mle --batch " + b0 + " --out " + path("mle.json")) == 0);
    const Json mle = read_json_file(path("mle.json"));
    const auto t = transitions_from_json(mle.at("transitions"), 16, 6);
    CHECK(t == posterior_mean(fit_posterior(load_batch(b0).batch)));

    const std::string sample = "itl-sample --env " + path("env.json") + " --expert-epsilon 3 --batch " + b0 +
                               " --n-samples 5 --seed 2";
    CHECK(run(sample + " --out " + path("s1.json")) == 0);
    CHECK(run(sample + " --compress --out " + path("s2.json.gz")) == 0);
    CHECK(slurp(path("s1.json")) == slurp(path("s2.json.gz")));
    const Json doc = read_json_file(path("s2.json.gz"));
    CHECK(doc.at("accepted") == 5);
    CHECK(doc.at("samples").size() == 5);
    CHECK(doc.at("final_deltas").contains("gap"));
    CHECK(run(sample + " --ball-source q-expert --anchor sample --out " + path("s3.json")) == 0);
    CHECK(run(sample + " --ball-source nope --out " + path("s4.json")) == 1);
    CHECK(run("fit-mle --batch " + path("missing.json") + " --out " + path("x.json")) == 1);
}

TEST_CASE("experiment: byte-identical outputs for any --jobs, exit codes") {
    save_mdp(reference_env(), workdir() / "env.json");
    write_config("small.json", R"({"env": {"path": ")" + path("env.json") +
                                   R"("}, "epsilons": [0, 4], "episode_counts": [15], "n_datasets": 3,
                                   "n_posterior_samples": 6, "master_seed": 21})");
    CHECK(run("experiment --config " + path("small.json") + " --out-dir " + path("exp1")) == 0);
    CHECK(run("experiment --config " + path("small.json") + " --out-dir " + path("exp2") + " --jobs 3") == 0);
    int files = 0;
    for (const auto& e : fs::recursive_directory_iterator(workdir() / "exp1")) {
        if (!e.is_regular_file()) continue;
        ++files;
        CHECK(slurp(e.path()) == slurp(workdir() / "exp2" / fs::relative(e.path(), workdir() / "exp1")));
    }
    CHECK(files == 2 + 2 + 2 * 4);

    write_config("bad.json", R"({"methods": []})");
    CHECK(run("experiment --config " + path("bad.json") + " --out-dir " + path("exp_bad")) == 1);
    CHECK(!fs::exists(workdir() / "exp_bad"));
    CHECK(run("experiment --config " + path("absent.json") + " --out-dir " + path("exp_bad")) == 1);
    write_config("typo.json", R"({"n_dataset": 3})");
    CHECK(run("experiment --config " + path("typo.json") + " --out-dir " + path("exp_bad")) == 1);

    write_config("overflow.json", R"({"env": {"path": ")" + path("env.json") +
                                      R"("}, "epsilons": [3], "episode_counts": [15], "n_datasets": 2,
                                      "n_posterior_samples": 3, "methods": ["constrained"],
                                      "sampler": {"max_row_draws": 1}})");
    CHECK(run("experiment --config " + path("overflow.json") + " --out-dir " + path("exp_over")) == 2);
    CHECK(fs::exists(workdir() / "exp_over" / "summary.json"));
}

TEST_CASE("plot recounts the per-dataset CSV") {
    save_mdp(reference_env(), workdir() / "env.json");
    write_config("plot.json", R"({"env": {"path": ")" + path("env.json") +
                                  R"("}, "epsilons": [3], "episode_counts": [15], "n_datasets": 4,
                                  "n_posterior_samples": 4})");
    REQUIRE(run("experiment --config " + path("plot.json") + " --out-dir " + path("plot_run")) == 0);
    const std::string csv = (workdir() / "plot_run" / "qstar_per_dataset.csv").string();
    CHECK(run("plot --metrics " + csv + " --out " + path("plot.svg") + " --bins 7") == 0);
    const std::string svg = slurp(path("plot.svg"));
    std::size_t panels = 0;
    for (std::size_t pos = 0; (pos = svg.find("class=\"panel\"", pos)) != std::string::npos; ++pos) ++panels;
    CHECK(panels == 4);
    std::size_t bars = 0;
    for (std::size_t pos = 0; (pos = svg.find("class=\"bar\"", pos)) != std::string::npos; ++pos) ++bars;
    CHECK(bars == 4 * 7);
    CHECK(run("plot --metrics " + path("nothing.csv") + " --out " + path("p.svg")) == 1);
}
