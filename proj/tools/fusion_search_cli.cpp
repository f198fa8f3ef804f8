#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fusionsearch/feature_store.hpp"
#include "fusionsearch/fusion_tree.hpp"
#include "fusionsearch/metrics.hpp"
#include "fusionsearch/moea.hpp"
#include "fusionsearch/search_io.hpp"
#include "fusionsearch/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fusionsearch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

int exit_code_for(const StoreError& e) {
    switch (e.code()) {
        case StoreErrc::missing_file:
        case StoreErrc::io_failure:
            return kExitIo;
        default:
            return kExitValidation;
    }
}

std::size_t default_workers() {
    if (const char* env = std::getenv("FUSION_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
        std::cerr << "ignoring invalid FUSION_WORKERS='" << env << "'\n";
    }
    return 1;
}

json metric_report(std::span<const double> scores, std::span<const int> labels, double threshold) {
    const Confusion c = confusion(scores, labels, threshold);
    return json{{"mcc", mcc(c)},
                {"auc", auc(scores, labels)},
                {"aupr", aupr(scores, labels)},
                {"f1", f1_score(c)},
                {"threshold", threshold},
                {"count", scores.size()}};
}

Genome load_genome_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw StoreError(StoreErrc::missing_file, "missing file: " + file.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest, "cannot parse " + file.string() + ": " + e.what());
    }
    // Accepts both a bare genome and a best.json-style entry.
    return genome_from_json(j.contains("genome") ? j.at("genome") : j);
}

struct SearchFlags {
    std::optional<std::size_t> population_size, max_generations, n_max, stall_patience;
    std::optional<double> mutation_prob, crossover_prob, rho0, rho_lo, rho_hi, ridge;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> objective, weight_mode, fixed_operator;
};

void add_search_flags(CLI::App* cmd, SearchFlags& f) {
    cmd->add_option("--population-size", f.population_size, "Population size N");
    cmd->add_option("--max-generations", f.max_generations, "Generation budget");
    cmd->add_option("--mutation-prob", f.mutation_prob, "Per-step mutation probability");
    cmd->add_option("--crossover-prob", f.crossover_prob, "Crossover probability");
    cmd->add_option("--n-max", f.n_max, "Maximum fused features per genome");
    cmd->add_option("--rho0", f.rho0, "Initial differential weight");
    cmd->add_option("--rho-lo", f.rho_lo, "Lower clamp for the differential weight");
    cmd->add_option("--rho-hi", f.rho_hi, "Upper clamp for the differential weight");
    cmd->add_option("--ridge", f.ridge, "Ridge strength for the linear head");
    cmd->add_option("--seed", f.seed, "RNG seed");
    cmd->add_option("--objective", f.objective, "multi | single")
        ->check(CLI::IsMember({"multi", "single"}));
    cmd->add_option("--weight-mode", f.weight_mode, "evolved | fixed_one")
        ->check(CLI::IsMember({"evolved", "fixed_one"}));
    cmd->add_option("--fixed-operator", f.fixed_operator, "none | Add | Mul | Max | Min")
        ->check(CLI::IsMember({"none", "Add", "Mul", "Max", "Min"}));
    cmd->add_option("--stall-patience", f.stall_patience,
                    "Stop after this many generations without improvement (0 = off)");
}

void apply_search_flags(const SearchFlags& f, SearchConfig& c) {
    if (f.population_size) c.population_size = *f.population_size;
    if (f.max_generations) c.max_generations = *f.max_generations;
    if (f.mutation_prob) c.mutation_prob = *f.mutation_prob;
    if (f.crossover_prob) c.crossover_prob = *f.crossover_prob;
    if (f.n_max) c.n_max = *f.n_max;
    if (f.rho0) c.rho0 = *f.rho0;
    if (f.rho_lo) c.rho_lo = *f.rho_lo;
    if (f.rho_hi) c.rho_hi = *f.rho_hi;
    if (f.ridge) c.ridge = *f.ridge;
    if (f.seed) c.seed = *f.seed;
    if (f.objective) {
        c.objective = *f.objective == "multi" ? ObjectiveMode::multi : ObjectiveMode::single_f1;
    }
    if (f.weight_mode) {
        c.weight_mode =
            *f.weight_mode == "evolved" ? WeightMode::evolved : WeightMode::fixed_one;
    }
    if (f.fixed_operator) {
        if (*f.fixed_operator == "none") {
            c.fixed_operator.reset();
        } else {
            c.fixed_operator = fusion_op_from_string(*f.fixed_operator);
        }
    }
    if (f.stall_patience) c.stall_patience = *f.stall_patience;
}

std::pair<CandidateFeaturePool, LabelSet> load_validated(const fs::path& pool_dir,
                                                         const fs::path& labels_file) {
    CandidateFeaturePool pool = load_pool(pool_dir);
    LabelSet labels = load_labels(labels_file);
    ValidationReport report = validate_pool(pool, labels);
    if (!report.ok()) {
        throw ValidationError(std::move(report));
    }
    return {std::move(pool), std::move(labels)};
}

int cmd_synth(const PlantConfig& plant, const fs::path& out_dir) {
    auto [pool, labels] = generate_planted_pool(plant);
    save_pool(out_dir, pool);
    save_labels(out_dir / "labels.csv", labels);

    json pairs = json::array();
    for (auto [a, b] : plant.complementary_pairs) pairs.push_back({a, b});
    const json plan{{"n_res", plant.n_res},
                    {"features", plant.feature_count},
                    {"dim", plant.dim},
                    {"signal_strength", plant.signal_strength},
                    {"complementary_pairs", pairs},
                    {"noise_sd", plant.noise_sd},
                    {"positive_rate", plant.positive_rate},
                    {"seed", plant.seed}};
    std::ofstream plan_out(out_dir / "plant.json");
    plan_out << plan.dump(2) << "\n";
    if (!plan_out) {
        throw StoreError(StoreErrc::io_failure, "write failed for plant.json");
    }

    std::cout << json{{"pool_dir", out_dir.string()},
                      {"labels", (out_dir / "labels.csv").string()},
                      {"plant", (out_dir / "plant.json").string()}}
                     .dump()
              << "\n";
    return kExitOk;
}

int cmd_validate(const fs::path& pool_dir, const fs::path& labels_file) {
    const CandidateFeaturePool pool = load_pool(pool_dir);
    const LabelSet labels = load_labels(labels_file);
    const ValidationReport report = validate_pool(pool, labels);
    std::cout << json{{"ok", report.ok()}, {"issues", report.issues}}.dump(2) << "\n";
    return report.ok() ? kExitOk : kExitValidation;
}

int cmd_search(const fs::path& pool_dir, const fs::path& labels_file, const SearchConfig& config,
               const fs::path& out_dir, std::size_t workers) {
    auto [pool, labels] = load_validated(pool_dir, labels_file);
    config.validate();

    const auto started = std::chrono::steady_clock::now();
    const SearchResult result = run_search(pool, labels, config, workers);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    fs::create_directories(out_dir);
    write_front(out_dir / "front.json", result.front);
    write_best(out_dir / "best.json", result.best);
    write_history(out_dir / "history.csv", result.history);

    RunManifest manifest;
    manifest.config = config;
    manifest.pool_dir = pool_dir.string();
    manifest.labels_file = labels_file.string();
    manifest.pool_hash = hash_hex(hash_pool_dir(pool_dir));
    manifest.labels_hash = hash_hex(hash_file(labels_file));
    manifest.workers = workers;
    manifest.duration_seconds = seconds;
    write_run_manifest(out_dir / "run_manifest.json", manifest);

    std::cerr << "search finished: " << result.generations_run << " generations, front size "
              << result.front.size() << ", " << result.cache_misses << " evaluations ("
              << result.cache_hits << " cache hits), " << seconds << " s\n";
    std::cout << json{{"best_f1", result.best.fitness.f1},
                      {"best_f2", result.best.fitness.f2},
                      {"front_size", result.front.size()},
                      {"generations", result.generations_run},
                      {"evaluations", result.cache_misses},
                      {"cache_hits", result.cache_hits},
                      {"out_dir", out_dir.string()}}
                     .dump()
              << "\n";
    return kExitOk;
}

int cmd_eval(const fs::path& pool_dir, const fs::path& labels_file, const fs::path& genome_file,
             const std::string& split_name, double ridge, double threshold) {
    auto [pool, labels] = load_validated(pool_dir, labels_file);
    const Genome genome = load_genome_file(genome_file);
    check_genome(genome, pool.feature_count(), genome.n());
    const Split split = split_from_string(split_name);

    const Matrix train = decode_fuse(genome, pool, labels, Split::train);
    const LinearHead head = fit_head(train, one_hot_targets(labels, Split::train), ridge);
    const Matrix at_split = decode_fuse(genome, pool, labels, split);
    const std::vector<double> scores = predict(head, at_split);

    std::vector<int> truth;
    for (std::size_t r : split_rows(labels, split)) truth.push_back(labels.labels[r]);

    json report = metric_report(scores, truth, threshold);
    report["n_features"] = genome.n();
    report["split"] = split_name;
    std::cout << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_metrics(const fs::path& scores_file, const fs::path& labels_file,
                const std::string& split_name, double threshold) {
    const LabelSet labels = load_labels(labels_file);

    std::ifstream in(scores_file);
    if (!in) {
        throw StoreError(StoreErrc::missing_file, "missing file: " + scores_file.string());
    }
    std::map<std::size_t, double> by_index;
    std::string line;
    if (!std::getline(in, line) || line.rfind("index,score", 0) != 0) {
        throw StoreError(StoreErrc::bad_labels, "scores header must be index,score");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw StoreError(StoreErrc::bad_labels, "malformed scores row: " + line);
        }
        try {
            by_index[std::stoull(line.substr(0, comma))] = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw StoreError(StoreErrc::bad_labels, "malformed scores row: " + line);
        }
    }

    std::vector<std::size_t> rows;
    if (split_name == "all") {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels.mask[i]) rows.push_back(i);
        }
    } else {
        rows = split_rows(labels, split_from_string(split_name));
    }

    std::vector<double> scores;
    std::vector<int> truth;
    for (std::size_t r : rows) {
        const auto it = by_index.find(r);
        if (it == by_index.end()) {
            throw StoreError(StoreErrc::bad_labels,
                             "no score for residue " + std::to_string(r));
        }
        scores.push_back(it->second);
        truth.push_back(labels.labels[r]);
    }

    json report = metric_report(scores, truth, threshold);
    report["split"] = split_name;
    std::cout << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_export_front(const fs::path& front_file, const fs::path& points_file) {
    std::vector<FrontEntry> entries = read_front(front_file);
    std::sort(entries.begin(), entries.end(), [](const FrontEntry& a, const FrontEntry& b) {
        if (a.fitness.f2 != b.fitness.f2) return a.fitness.f2 < b.fitness.f2;
        return a.fitness.f1 > b.fitness.f1;
    });

    std::string csv = "f1,f2\n";
    std::map<int, std::size_t> feature_tally;
    std::map<std::string, std::size_t> op_tally;
    std::size_t sum_f2 = 0;
    for (const FrontEntry& e : entries) {
        csv += json(e.fitness.f1).dump();
        csv += ',';
        csv += std::to_string(e.fitness.f2);
        csv += '\n';
        for (int idx : e.genome.s) ++feature_tally[idx];
        for (FusionOp op : e.genome.q) ++op_tally[to_string(op)];
        sum_f2 += static_cast<std::size_t>(e.fitness.f2);
    }
    std::ofstream out(points_file, std::ios::binary | std::ios::trunc);
    out << csv;
    if (!out) {
        throw StoreError(StoreErrc::io_failure, "write failed for " + points_file.string());
    }

    json features = json::object();
    for (const auto& [idx, count] : feature_tally) features[std::to_string(idx)] = count;
    std::cout << json{{"entries", entries.size()},
                      {"sum_f2", sum_f2},
                      {"features", features},
                      {"operators", op_tally},
                      {"points", points_file.string()}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-fusion architecture search over candidate descriptor pools"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("fusion-search ") + kToolVersion);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a planted synthetic pool");
    fs::path synth_out;
    PlantConfig plant;
    std::vector<double> strengths;
    std::vector<std::string> pair_args;
    synth->add_option("--out", synth_out, "Output pool directory")->required();
    synth->add_option("--n-res", plant.n_res, "Residue count");
    synth->add_option("--features", plant.feature_count, "Number of candidate features");
    synth->add_option("--dim", plant.dim, "Columns per feature");
    synth->add_option("--strengths", strengths,
                      "Per-feature signal strength in [0,1] (defaults to all 0)")
        ->delimiter(',');
    synth->add_option("--pair", pair_args, "Complementary pair 'a:b' (repeatable)");
    synth->add_option("--noise-sd", plant.noise_sd, "Additive noise level");
    synth->add_option("--positive-rate", plant.positive_rate, "Positive class rate");
    synth->add_option("--seed", plant.seed, "RNG seed");

    // validate
    auto* validate = app.add_subcommand("validate", "Check a pool directory against labels");
    fs::path val_pool, val_labels;
    validate->add_option("--pool", val_pool, "Pool directory")->required();
    validate->add_option("--labels", val_labels, "Labels CSV")->required();

    // search
    auto* search = app.add_subcommand("search", "Run the fusion architecture search");
    fs::path search_pool, search_labels, config_file, out_dir = ".", manifest_file;
    SearchFlags flags;
    std::size_t workers = default_workers();
    search->add_option("--pool", search_pool, "Pool directory");
    search->add_option("--labels", search_labels, "Labels CSV");
    search->add_option("--config", config_file, "JSON config file");
    search->add_option("--out", out_dir, "Output directory (default .)");
    search->add_option("--from-manifest", manifest_file,
                       "Reproduce a previous run from its run_manifest.json");
    search->add_option("--workers", workers, "Parallel evaluation threads (env FUSION_WORKERS)");
    add_search_flags(search, flags);

    // eval
    auto* eval = app.add_subcommand("eval", "Score a saved genome on one split");
    fs::path eval_pool, eval_labels, genome_file;
    std::string eval_split = "test";
    double eval_ridge = SearchConfig{}.ridge;
    double eval_threshold = 0.5;
    eval->add_option("--pool", eval_pool, "Pool directory")->required();
    eval->add_option("--labels", eval_labels, "Labels CSV")->required();
    eval->add_option("--genome", genome_file, "Genome JSON (bare or best.json entry)")->required();
    eval->add_option("--split", eval_split, "train | val | test")
        ->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--ridge", eval_ridge, "Ridge strength for the head fit");
    eval->add_option("--threshold", eval_threshold, "Decision threshold for MCC/F1");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Metric report for an external score file");
    fs::path scores_file, metrics_labels;
    std::string metrics_split = "all";
    double metrics_threshold = 0.5;
    metrics->add_option("--scores", scores_file, "CSV with header index,score")->required();
    metrics->add_option("--labels", metrics_labels, "Labels CSV")->required();
    metrics->add_option("--split", metrics_split, "train | val | test | all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    metrics->add_option("--threshold", metrics_threshold, "Decision threshold for MCC/F1");

    // export-front
    auto* export_front = app.add_subcommand("export-front", "Flatten front.json for plotting");
    fs::path front_file, points_file = "front_points.csv";
    export_front->add_option("--front", front_file, "front.json from a search run")->required();
    export_front->add_option("--points", points_file, "Output CSV of (f1, f2) points");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            if (!strengths.empty()) {
                plant.signal_strength = strengths;
            } else {
                plant.signal_strength.assign(plant.feature_count, 0.0);
            }
            for (const std::string& p : pair_args) {
                const auto colon = p.find(':');
                if (colon == std::string::npos) {
                    throw std::invalid_argument("--pair expects 'a:b', got '" + p + "'");
                }
                plant.complementary_pairs.emplace_back(std::stoi(p.substr(0, colon)),
                                                       std::stoi(p.substr(colon + 1)));
            }
            return cmd_synth(plant, synth_out);
        }
        if (validate->parsed()) {
            return cmd_validate(val_pool, val_labels);
        }
        if (search->parsed()) {
            SearchConfig config;
            if (!manifest_file.empty()) {
                if (!search_pool.empty() || !search_labels.empty() || !config_file.empty()) {
                    throw std::invalid_argument(
                        "--from-manifest replaces --pool/--labels/--config");
                }
                const RunManifest m = read_run_manifest(manifest_file);
                search_pool = m.pool_dir;
                search_labels = m.labels_file;
                config = m.config;
                if (hash_hex(hash_pool_dir(search_pool)) != m.pool_hash ||
                    hash_hex(hash_file(search_labels)) != m.labels_hash) {
                    std::cerr << "input files no longer match the manifest hashes\n";
                    return kExitValidation;
                }
            } else {
                if (search_pool.empty() || search_labels.empty()) {
                    throw std::invalid_argument("search needs --pool and --labels");
                }
                if (!config_file.empty()) {
                    config = load_config_file(config_file);
                }
            }
            apply_search_flags(flags, config);
            return cmd_search(search_pool, search_labels, config, out_dir, workers);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_pool, eval_labels, genome_file, eval_split, eval_ridge,
                            eval_threshold);
        }
        if (metrics->parsed()) {
            return cmd_metrics(scores_file, metrics_labels, metrics_split, metrics_threshold);
        }
        if (export_front->parsed()) {
            return cmd_export_front(front_file, points_file);
        }
    } catch (const ValidationError& e) {
        std::cerr << e.what() << "\n";
        for (const std::string& issue : e.report().issues) {
            std::cerr << "  - " << issue << "\n";
        }
        return kExitValidation;
    } catch (const StoreError& e) {
        std::cerr << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
