// Acceptance gate: ten pinned criteria, one PASS/FAIL line each. Exit
// status is nonzero if any criterion fails. Thresholds, seeds, and run
// budgets are frozen; do not loosen them to make a regression pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fusionsearch/feature_store.hpp"
#include "fusionsearch/fusion_tree.hpp"
#include "fusionsearch/matrix.hpp"
#include "fusionsearch/metrics.hpp"
#include "fusionsearch/moea.hpp"
#include "fusionsearch/rng.hpp"
#include "fusionsearch/search_io.hpp"
#include "fusionsearch/synthetic.hpp"

#include "../oracles.hpp"
#include "../test_support.hpp"

using namespace fusionsearch;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Random score/label vector with deliberate score ties and both classes.
void random_scored_vector(Rng& rng, std::size_t n, std::vector<double>& scores,
                          std::vector<int>& labels) {
    scores.resize(n);
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = std::round(uniform01(rng) * 20.0) / 20.0;
        labels[i] = uniform01(rng) < 0.35 ? 1 : 0;
    }
    labels[0] = 0;
    labels[1] = 1;
}

// Criterion 1: metric implementations against independent oracles.
// auc/aupr within 1e-12 of the pairwise / threshold-sweep oracles; mcc and
// f1 bit-equal to direct formula evaluation on independently counted
// confusion cells (integer counts are exact in doubles, so the correctly
// rounded sqrt and division admit exact comparison).
Outcome criterion1() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(101);
    std::vector<double> scores;
    std::vector<int> labels;
    double worst_auc = 0.0;
    double worst_aupr = 0.0;
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        random_scored_vector(rng, 200, scores, labels);

        worst_auc = std::max(worst_auc, std::abs(auc(scores, labels) -
                                                 oracles::auc_pairs(scores, labels)));
        worst_aupr = std::max(worst_aupr, std::abs(aupr(scores, labels) -
                                                   oracles::aupr_thresholds(scores, labels)));

        const double threshold = 0.5;
        const Confusion c = confusion(scores, labels, threshold);
        long tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const bool predicted = scores[i] >= threshold;
            if (predicted && labels[i] == 1) ++tp;
            if (predicted && labels[i] == 0) ++fp;
            if (!predicted && labels[i] == 0) ++tn;
            if (!predicted && labels[i] == 1) ++fn;
        }
        const double denom = std::sqrt(static_cast<double>((tp + fp) * (tp + fn)) *
                                       static_cast<double>((tn + fp) * (tn + fn)));
        const double mcc_direct =
            denom == 0.0 ? 0.0 : (static_cast<double>(tp * tn) - static_cast<double>(fp * fn)) /
                                     denom;
        const double f1_direct =
            2 * tp + fp + fn == 0 ? 0.0
                                  : 2.0 * static_cast<double>(tp) /
                                        static_cast<double>(2 * tp + fp + fn);
        if (c.tp != static_cast<std::size_t>(tp) || c.fp != static_cast<std::size_t>(fp) ||
            c.tn != static_cast<std::size_t>(tn) || c.fn != static_cast<std::size_t>(fn)) {
            ++mismatches;
        }
        if (mcc(c) != mcc_direct || f1_score(c) != f1_direct) ++mismatches;
    }

    std::ostringstream detail;
    detail << "100 vectors, max |auc gap| " << worst_auc << ", max |aupr gap| " << worst_aupr
           << ", formula mismatches " << mismatches;
    Outcome out{worst_auc <= 1e-12 && worst_aupr <= 1e-12 && mismatches == 0, detail.str(),
                seconds_since(start)};
    out.pass = out.pass && out.seconds < 5.0;
    return out;
}

// Criterion 2: decode against the per-cell straight-line oracle.
Outcome criterion2() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t t = 1 + uniform_below(rng, 4);
        const std::size_t dim = 1 + uniform_below(rng, 6);
        const std::size_t n_res = 5 + uniform_below(rng, 10);
        const CandidateFeaturePool pool = testsupport::random_pool(rng, t, n_res, dim);
        const Genome genome = random_genome(rng, t, 4);

        std::vector<std::size_t> rows(n_res);
        for (std::size_t i = 0; i < n_res; ++i) rows[i] = i;
        const Matrix fused = decode_fuse_rows(genome, pool, rows);
        const Matrix expected = oracles::fold_per_cell(genome, pool, rows);
        for (std::size_t i = 0; i < fused.values.size(); ++i) {
            worst = std::max(worst, std::abs(fused.values[i] - expected.values[i]));
        }
    }
    std::ostringstream detail;
    detail << "1000 genomes, max |cell gap| " << worst;
    Outcome out{worst <= 1e-12, detail.str(), seconds_since(start)};
    out.pass = out.pass && out.seconds < 5.0;
    return out;
}

// Criterion 3: sorting and selection against dominance-peeling oracles.
Outcome criterion3() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(303);
    int sort_mismatches = 0;
    int select_mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FitnessPair> fitness(50);
        for (FitnessPair& f : fitness) {
            f.f1 = std::round(uniform01(rng) * 20.0) / 20.0;
            f.f2 = 1 + static_cast<int>(uniform_below(rng, 6));
        }
        if (fast_nondominated_sort(fitness) != oracles::peel_fronts(fitness)) ++sort_mismatches;
        if (next_generation(fitness, 25, ObjectiveMode::multi) !=
            oracles::select_total_order(fitness, 25)) {
            ++select_mismatches;
        }
    }
    std::ostringstream detail;
    detail << "100 populations, sort mismatches " << sort_mismatches << ", selection mismatches "
           << select_mismatches;
    Outcome out{sort_mismatches == 0 && select_mismatches == 0, detail.str(),
                seconds_since(start)};
    out.pass = out.pass && out.seconds < 10.0;
    return out;
}

// Criterion 4: variation never produces an invalid genome, and crossover
// offspring take parent_m's lengths.
Outcome criterion4() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(404);
    const std::size_t feature_count = 5;
    SearchConfig cfg;
    cfg.n_max = 6;
    cfg.max_generations = 100;

    Population population(8);
    for (Individual& ind : population) {
        ind.genome = random_genome(rng, feature_count, cfg.n_max);
        ind.fitness = {uniform01(rng), static_cast<int>(ind.genome.n())};
    }

    int violations = 0;
    for (int call = 0; call < 100000; ++call) {
        const std::size_t parent = uniform_below(rng, population.size());
        const std::size_t generation = uniform_below(rng, cfg.max_generations);
        Genome mutant = mutate(population, parent, generation, cfg, feature_count, rng);
        try {
            check_genome(mutant, feature_count, cfg.n_max);
        } catch (const std::exception&) {
            ++violations;
        }

        const Genome& parent_m = population[uniform_below(rng, population.size())].genome;
        const Genome child = crossover(mutant, parent_m, rng);
        try {
            check_genome(child, feature_count, cfg.n_max);
        } catch (const std::exception&) {
            ++violations;
        }
        if (child.s.size() != parent_m.s.size() || child.q.size() != parent_m.s.size() - 1 ||
            child.a.size() != 2 * (parent_m.s.size() - 1)) {
            ++violations;
        }

        // Recycle the mutant to keep the parent pool moving.
        population[parent].genome = std::move(mutant);
        population[parent].fitness.f2 = static_cast<int>(population[parent].genome.n());
    }
    std::ostringstream detail;
    detail << "100000 variation calls, violations " << violations;
    Outcome out{violations == 0, detail.str(), seconds_since(start)};
    out.pass = out.pass && out.seconds < 30.0;
    return out;
}

// Criterion 5: decay endpoints before clamping, and the donor fixed point.
Outcome criterion5() {
    const auto start = std::chrono::steady_clock::now();
    const bool endpoints =
        de_raw_weight(0, 100, 0.9) == 0.9 && de_raw_weight(100, 100, 0.9) == 0.0;

    const std::vector<double> target{0.3, 1.7, 0.9, 1.1};
    const bool fixed_point = de_update(target, target, target, target, 0.55) == target;

    std::ostringstream detail;
    detail << "rho(0) = " << de_raw_weight(0, 100, 0.9) << ", rho(G_max) = "
           << de_raw_weight(100, 100, 0.9) << ", donor fixed point "
           << (fixed_point ? "exact" : "violated");
    return {endpoints && fixed_point, detail.str(), seconds_since(start)};
}

PlantConfig recovery_pool(std::uint64_t seed) {
    PlantConfig p;
    p.n_res = 400;
    p.feature_count = 3;
    p.dim = 3;
    p.signal_strength = {0.7, 0.4, 0.0};
    p.noise_sd = 0.5;
    p.seed = seed;
    return p;
}

SearchConfig recovery_config(std::uint64_t seed) {
    SearchConfig cfg;
    cfg.population_size = 20;
    cfg.max_generations = 30;
    cfg.n_max = 2;
    cfg.weight_mode = WeightMode::fixed_one;
    cfg.seed = seed;
    return cfg;
}

// Criterion 6: search recovers the exhaustive-enumeration optimum.
Outcome criterion6() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<FusionOp> all_ops{FusionOp::add, FusionOp::mul, FusionOp::max,
                                        FusionOp::min};
    int hits = 0;
    double worst_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [pool, labels] = generate_planted_pool(recovery_pool(1000 + seed));
        const BruteForceResult oracle = brute_force_search(pool, labels, 2, all_ops, {1.0}, 1e-3);
        const SearchResult run = run_search(pool, labels, recovery_config(seed));
        const double gap = oracle.fitness.f1 - run.best.fitness.f1;
        worst_gap = std::max(worst_gap, gap);
        if (gap <= 1e-9) ++hits;
    }
    std::ostringstream detail;
    detail << hits << "/10 seeds within 1e-9 of the brute-force optimum, worst gap " << worst_gap;
    Outcome out{hits >= 9, detail.str(), seconds_since(start)};
    out.pass = out.pass && out.seconds < 120.0;
    return out;
}

PlantConfig synergy_pool(std::uint64_t seed) {
    PlantConfig p;
    p.n_res = 600;
    p.feature_count = 3;
    p.dim = 3;
    p.signal_strength = {0.8, 0.8, 0.0};
    p.complementary_pairs = {{0, 1}};
    p.noise_sd = 0.0;
    p.seed = seed;
    return p;
}

SearchConfig synergy_config(std::uint64_t seed) {
    SearchConfig cfg;
    cfg.population_size = 32;
    cfg.max_generations = 80;
    cfg.n_max = 3;
    cfg.seed = seed;
    return cfg;
}

// Best f1 of the free search per seed, shared between criteria 7 and 8.
std::vector<double> evolved_best;

// Criterion 7: no single feature suffices, yet the search finds a fusion
// that does.
Outcome criterion7() {
    const auto start = std::chrono::steady_clock::now();
    evolved_best.assign(10, 0.0);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [pool, labels] = generate_planted_pool(synergy_pool(2000 + seed));
        const SearchConfig cfg = synergy_config(seed);
        Evaluator probe(pool, labels, cfg);
        double best_single = 0.0;
        for (int t = 0; t < static_cast<int>(pool.feature_count()); ++t) {
            best_single =
                std::max(best_single, probe.evaluate(Genome{.s = {t}, .q = {}, .a = {}}).f1);
        }
        const SearchResult run = run_search(pool, labels, cfg);
        evolved_best[seed] = run.best.fitness.f1;
        if (best_single <= 0.85 && run.best.fitness.f1 >= 0.93) ++hits;
    }
    std::ostringstream detail;
    detail << hits << "/10 seeds with every single feature <= 0.85 and fused best >= 0.93";
    Outcome out{hits >= 8, detail.str(), seconds_since(start)};
    out.pass = out.pass && out.seconds < 300.0;
    return out;
}

// Criterion 8: weight evolution and free operator choice never lose to
// their ablations.
Outcome criterion8() {
    const auto start = std::chrono::steady_clock::now();
    if (evolved_best.size() != 10) return {false, "criterion 7 runs unavailable", 0.0};

    double evolved_sum = 0.0;
    double fixed_sum = 0.0;
    int op_hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [pool, labels] = generate_planted_pool(synergy_pool(2000 + seed));
        const SearchConfig cfg = synergy_config(seed);

        SearchConfig fixed = cfg;
        fixed.weight_mode = WeightMode::fixed_one;
        evolved_sum += evolved_best[seed];
        fixed_sum += run_search(pool, labels, fixed).best.fitness.f1;

        bool beats_all = true;
        for (int op = 0; op < kFusionOpCount; ++op) {
            SearchConfig ablation = cfg;
            ablation.fixed_operator = static_cast<FusionOp>(op);
            if (evolved_best[seed] < run_search(pool, labels, ablation).best.fitness.f1) {
                beats_all = false;
            }
        }
        if (beats_all) ++op_hits;
    }
    const double evolved_mean = evolved_sum / 10.0;
    const double fixed_mean = fixed_sum / 10.0;
    std::ostringstream detail;
    detail << "evolved mean " << evolved_mean << " vs fixed-weight mean " << fixed_mean << "; "
           << op_hits << "/10 seeds at least as good as every fixed-operator run";
    Outcome out{evolved_mean >= fixed_mean && op_hits >= 8, detail.str(), seconds_since(start)};
    out.pass = out.pass && out.seconds < 900.0;
    return out;
}

// Criterion 9: when one feature already solves the task, the front keeps a
// genome smaller than n_max.
Outcome criterion9() {
    const auto start = std::chrono::steady_clock::now();
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        PlantConfig plant;
        plant.n_res = 400;
        plant.feature_count = 3;
        plant.dim = 3;
        plant.signal_strength = {0.95, 0.3, 0.0};
        plant.noise_sd = 0.1;
        plant.seed = 3000 + seed;
        auto [pool, labels] = generate_planted_pool(plant);

        SearchConfig cfg;
        cfg.population_size = 16;
        cfg.max_generations = 20;
        cfg.n_max = 4;
        cfg.seed = seed;

        Evaluator probe(pool, labels, cfg);
        const double single = probe.evaluate(Genome{.s = {0}, .q = {}, .a = {}}).f1;

        const SearchResult run = run_search(pool, labels, cfg);
        int min_f2 = cfg.n_max + 1;
        for (const FrontEntry& e : run.front) min_f2 = std::min(min_f2, e.fitness.f2);
        if (single >= 0.99 && min_f2 < static_cast<int>(cfg.n_max)) ++hits;
    }
    std::ostringstream detail;
    detail << hits << "/10 seeds keep a front genome below n_max";
    return {hits == 10, detail.str(), seconds_since(start)};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Criterion 10: repeating a run reproduces the output artifacts byte for
// byte.
Outcome criterion10() {
    const auto start = std::chrono::steady_clock::now();
    auto [pool, labels] = generate_planted_pool(recovery_pool(1000));
    testsupport::TempDir dir("acceptance_determinism");

    bool identical = true;
    std::filesystem::path first_dir;
    for (int rep = 0; rep < 2; ++rep) {
        const SearchResult run = run_search(pool, labels, recovery_config(0));
        const auto out_dir = dir.path() / ("rep" + std::to_string(rep));
        std::filesystem::create_directories(out_dir);
        write_front(out_dir / "front.json", run.front);
        write_best(out_dir / "best.json", run.best);
        write_history(out_dir / "history.csv", run.history);
        if (rep == 0) {
            first_dir = out_dir;
            continue;
        }
        for (const char* name : {"front.json", "best.json", "history.csv"}) {
            identical = identical && slurp(first_dir / name) == slurp(out_dir / name);
        }
    }
    return {identical, identical ? "front.json, best.json, history.csv byte-identical"
                                 : "artifacts differ between repeats",
            seconds_since(start)};
}

}  // namespace

int main() {
    const std::function<Outcome()> criteria[] = {
        criterion1, criterion2, criterion3, criterion4, criterion5,
        criterion6, criterion7, criterion8, criterion9, criterion10,
    };

    int failures = 0;
    for (std::size_t i = 0; i < std::size(criteria); ++i) {
        Outcome out;
        try {
            out = criteria[i]();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what(), 0.0};
        }
        failures += !out.pass;
        std::printf("CRITERION %2zu [%s] %s (%.1f s)\n", i + 1, out.pass ? "PASS" : "FAIL",
                    out.detail.c_str(), out.seconds);
        std::fflush(stdout);
    }
    std::printf("%s: %d/10 criteria passed\n", failures == 0 ? "ACCEPTED" : "REJECTED",
                10 - failures);
    return failures == 0 ? 0 : 1;
}
