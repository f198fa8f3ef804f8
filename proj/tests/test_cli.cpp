#include <doctest/doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fusionsearch/feature_store.hpp"
#include "fusionsearch/moea.hpp"
#include "fusionsearch/search_io.hpp"
#include "test_support.hpp"

using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string cli_path() {
    const char* env = std::getenv("FUSIONSEARCH_CLI");
    REQUIRE_MESSAGE(env != nullptr, "FUSIONSEARCH_CLI must point at the fusion-search binary");
    return env;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

RunResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const auto out_file = scratch / "stdout.txt";
    const auto err_file = scratch / "stderr.txt";
    const std::string command = cli_path() + " " + args + " > " + out_file.string() + " 2> " +
                                err_file.string();
    const int raw = std::system(command.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

std::size_t count_lines(const std::string& text) {
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    return lines;
}

}  // namespace

TEST_CASE("cli: synth then validate round trip, exit codes, and machine-readable stdout") {
    testsupport::TempDir dir("cli_synth");
    const auto pool = dir.path() / "pool";

    const RunResult synth = run_cli("synth --out " + pool.string() +
                                        " --n-res 300 --features 3 --dim 4 "
                                        "--strengths 0.9,0,0 --noise-sd 0.2 --seed 5",
                                    dir.path());
    REQUIRE(synth.exit_code == 0);
    const json synth_report = json::parse(synth.out);
    CHECK(synth_report.at("pool_dir") == pool.string());

    const RunResult validate = run_cli(
        "validate --pool " + pool.string() + " --labels " + (pool / "labels.csv").string(),
        dir.path());
    CHECK(validate.exit_code == 0);
    const json report = json::parse(validate.out);
    CHECK(report.at("ok") == true);

    // Break the labels: wipe every positive in val.
    auto labels = fusionsearch::load_labels(pool / "labels.csv");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels.split[i] == fusionsearch::Split::val) labels.labels[i] = 0;
    }
    fusionsearch::save_labels(pool / "broken.csv", labels);
    const RunResult broken = run_cli(
        "validate --pool " + pool.string() + " --labels " + (pool / "broken.csv").string(),
        dir.path());
    CHECK(broken.exit_code == 1);
    CHECK(json::parse(broken.out).at("ok") == false);

    const RunResult missing =
        run_cli("validate --pool /nonexistent --labels /nonexistent.csv", dir.path());
    CHECK(missing.exit_code == 2);
}

TEST_CASE("cli: search runs are byte-identical for a fixed seed and reproducible from manifest") {
    testsupport::TempDir dir("cli_search");
    const auto pool = dir.path() / "pool";
    REQUIRE(run_cli("synth --out " + pool.string() +
                        " --n-res 300 --features 3 --dim 3 --strengths 0.6,0.4,0 "
                        "--noise-sd 0.4 --seed 3",
                    dir.path())
                .exit_code == 0);

    const std::string search_args = " --pool " + pool.string() + " --labels " +
                                    (pool / "labels.csv").string() +
                                    " --population-size 10 --max-generations 6 --n-max 3 --seed 7";
    const auto run1 = dir.path() / "run1";
    const auto run2 = dir.path() / "run2";
    const RunResult first =
        run_cli("search" + search_args + " --out " + run1.string(), dir.path());
    REQUIRE(first.exit_code == 0);
    const json summary = json::parse(first.out);
    CHECK(summary.at("generations") == 6);

    REQUIRE(run_cli("search" + search_args + " --out " + run2.string(), dir.path()).exit_code ==
            0);
    CHECK(slurp(run1 / "front.json") == slurp(run2 / "front.json"));
    CHECK(slurp(run1 / "best.json") == slurp(run2 / "best.json"));
    CHECK(slurp(run1 / "history.csv") == slurp(run2 / "history.csv"));

    const auto run3 = dir.path() / "run3";
    REQUIRE(run_cli("search --from-manifest " + (run1 / "run_manifest.json").string() +
                        " --out " + run3.string(),
                    dir.path())
                .exit_code == 0);
    CHECK(slurp(run1 / "front.json") == slurp(run3 / "front.json"));
    CHECK(slurp(run1 / "best.json") == slurp(run3 / "best.json"));

    // Workers must not affect the outputs.
    const auto run4 = dir.path() / "run4";
    REQUIRE(run_cli("search" + search_args + " --out " + run4.string() + " --workers 4",
                    dir.path())
                .exit_code == 0);
    CHECK(slurp(run1 / "front.json") == slurp(run4 / "front.json"));

    // history.csv holds one row per generation plus the initial state.
    CHECK(count_lines(slurp(run1 / "history.csv")) == 8);
}

TEST_CASE("cli: single-objective and ablation modes run and report a unit front") {
    testsupport::TempDir dir("cli_modes");
    const auto pool = dir.path() / "pool";
    REQUIRE(run_cli("synth --out " + pool.string() +
                        " --n-res 250 --features 2 --dim 3 --strengths 0.7,0 "
                        "--noise-sd 0.3 --seed 11",
                    dir.path())
                .exit_code == 0);
    const std::string common = " --pool " + pool.string() + " --labels " +
                               (pool / "labels.csv").string() +
                               " --population-size 8 --max-generations 5 --n-max 2 --seed 2";

    const auto single = dir.path() / "single";
    const RunResult single_run =
        run_cli("search" + common + " --objective single --out " + single.string(), dir.path());
    REQUIRE(single_run.exit_code == 0);
    CHECK(json::parse(single_run.out).at("front_size") == 1);
    // Every history row reports a front of at most one entry.
    std::istringstream history(slurp(single / "history.csv"));
    std::string line;
    std::getline(history, line);  // header
    while (std::getline(history, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "1");
    }

    const auto ablation = dir.path() / "ablation";
    const RunResult ablation_run = run_cli(
        "search" + common + " --fixed-operator Max --weight-mode fixed_one --out " +
            ablation.string(),
        dir.path());
    REQUIRE(ablation_run.exit_code == 0);
    // Every front genome reflects the forced operator.
    for (const auto& entry : fusionsearch::read_front(ablation / "front.json")) {
        for (auto op : entry.genome.q) CHECK(op == fusionsearch::FusionOp::max);
        for (double w : entry.genome.a) CHECK(w == 1.0);
    }
}

TEST_CASE("cli: eval reports perfect metrics on separable data and n_features") {
    testsupport::TempDir dir("cli_eval");
    const auto pool = dir.path() / "pool";
    REQUIRE(run_cli("synth --out " + pool.string() +
                        " --n-res 300 --features 2 --dim 3 --strengths 1.0,0 "
                        "--noise-sd 0 --seed 19",
                    dir.path())
                .exit_code == 0);
    const auto run = dir.path() / "run";
    REQUIRE(run_cli("search --pool " + pool.string() + " --labels " +
                        (pool / "labels.csv").string() +
                        " --population-size 8 --max-generations 5 --n-max 2 --seed 3 --out " +
                        run.string(),
                    dir.path())
                .exit_code == 0);

    const RunResult eval = run_cli("eval --pool " + pool.string() + " --labels " +
                                       (pool / "labels.csv").string() + " --genome " +
                                       (run / "best.json").string() + " --split test",
                                   dir.path());
    REQUIRE(eval.exit_code == 0);
    const json report = json::parse(eval.out);
    CHECK(report.at("auc") == 1.0);
    CHECK(report.at("n_features") == 1);
    CHECK(report.at("split") == "test");
}

TEST_CASE("cli: eval generalizes from val to test on planted pools") {
    for (int seed = 0; seed < 10; ++seed) {
        testsupport::TempDir dir("cli_gen");
        const auto pool = dir.path() / "pool";
        REQUIRE(run_cli("synth --out " + pool.string() +
                            " --n-res 500 --features 2 --dim 3 --strengths 0.8,0 "
                            "--noise-sd 0.8 --seed " +
                            std::to_string(100 + seed),
                        dir.path())
                    .exit_code == 0);
        std::ofstream(dir.path() / "genome.json") << R"({"s":[0],"q":[],"a":[]})";
        json reports[2];
        int slot = 0;
        for (const std::string split : {"val", "test"}) {
            const RunResult eval = run_cli("eval --pool " + pool.string() + " --labels " +
                                               (pool / "labels.csv").string() + " --genome " +
                                               (dir.path() / "genome.json").string() +
                                               " --split " + split,
                                           dir.path());
            REQUIRE(eval.exit_code == 0);
            reports[slot++] = json::parse(eval.out);
        }
        const double gap = std::abs(reports[0].at("auc").get<double>() -
                                    reports[1].at("auc").get<double>());
        CHECK(gap <= 0.05);
    }
}

TEST_CASE("cli: metrics subcommand scores an external prediction file") {
    testsupport::TempDir dir("cli_metrics");
    const auto pool = dir.path() / "pool";
    REQUIRE(run_cli("synth --out " + pool.string() +
                        " --n-res 200 --features 1 --dim 2 --strengths 0 --seed 29",
                    dir.path())
                .exit_code == 0);

    // Perfect scores: copy the labels.
    const auto labels = fusionsearch::load_labels(pool / "labels.csv");
    std::ofstream scores(dir.path() / "scores.csv");
    scores << "index,score\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        scores << i << ',' << (labels.labels[i] ? "0.9" : "0.1") << '\n';
    }
    scores.close();

    const RunResult metrics = run_cli("metrics --scores " + (dir.path() / "scores.csv").string() +
                                          " --labels " + (pool / "labels.csv").string() +
                                          " --split val",
                                      dir.path());
    REQUIRE(metrics.exit_code == 0);
    const json report = json::parse(metrics.out);
    CHECK(report.at("auc") == 1.0);
    CHECK(report.at("mcc") == 1.0);
    CHECK(report.at("f1") == 1.0);
    CHECK(report.at("count") == 40);
}

TEST_CASE("cli: export-front emits sorted points and conserves feature counts") {
    testsupport::TempDir dir("cli_export");
    const auto pool = dir.path() / "pool";
    REQUIRE(run_cli("synth --out " + pool.string() +
                        " --n-res 400 --features 3 --dim 3 --strengths 0.5,0.3,0 "
                        "--noise-sd 0.6 --seed 31",
                    dir.path())
                .exit_code == 0);
    const auto run = dir.path() / "run";
    REQUIRE(run_cli("search --pool " + pool.string() + " --labels " +
                        (pool / "labels.csv").string() +
                        " --population-size 12 --max-generations 8 --n-max 3 --seed 9 --out " +
                        run.string(),
                    dir.path())
                .exit_code == 0);

    const auto points = dir.path() / "points.csv";
    const RunResult exported = run_cli(
        "export-front --front " + (run / "front.json").string() + " --points " + points.string(),
        dir.path());
    REQUIRE(exported.exit_code == 0);
    const json tallies = json::parse(exported.out);

    const auto front = fusionsearch::read_front(run / "front.json");
    CHECK(count_lines(slurp(points)) == front.size() + 1);

    std::size_t sum_f2 = 0;
    for (const auto& e : front) sum_f2 += static_cast<std::size_t>(e.fitness.f2);
    CHECK(tallies.at("sum_f2") == sum_f2);
    CHECK(tallies.at("entries") == front.size());

    std::size_t tally_total = 0;
    for (const auto& [key, value] : tallies.at("features").items()) {
        tally_total += value.get<std::size_t>();
    }
    CHECK(tally_total == sum_f2);

    // Exported points must be mutually non-dominated.
    for (const auto& a : front) {
        for (const auto& b : front) {
            CHECK_FALSE(fusionsearch::dominates(a.fitness, b.fitness));
        }
    }

    // f2 ascending in the CSV.
    std::istringstream lines(slurp(points));
    std::string line;
    std::getline(lines, line);
    int prev_f2 = 0;
    while (std::getline(lines, line)) {
        const int f2 = std::stoi(line.substr(line.rfind(',') + 1));
        CHECK(f2 >= prev_f2);
        prev_f2 = f2;
    }
}
