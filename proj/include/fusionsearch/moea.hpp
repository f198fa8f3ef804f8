#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusionsearch/feature_store.hpp"
#include "fusionsearch/fusion_tree.hpp"
#include "fusionsearch/rng.hpp"

namespace fusionsearch {

// f1 = validation AUC (maximize), f2 = feature count (minimize). A failed
// evaluation stores f1 = 0.
struct FitnessPair {
    double f1 = 0.0;
    int f2 = 0;

    bool operator==(const FitnessPair&) const = default;
};

// True iff a is no worse in both objectives and strictly better in one.
inline bool dominates(const FitnessPair& a, const FitnessPair& b) {
    return a.f1 >= b.f1 && a.f2 <= b.f2 && (a.f1 > b.f1 || a.f2 < b.f2);
}

enum class ObjectiveMode { multi, single_f1 };
enum class WeightMode { evolved, fixed_one };

struct SearchConfig {
    std::size_t population_size = 40;
    std::size_t max_generations = 100;
    double mutation_prob = 0.25;
    double crossover_prob = 0.4;
    std::size_t n_max = 12;
    double rho0 = 0.9;
    double rho_lo = 0.1;
    double rho_hi = 0.9;
    double ridge = 1e-3;
    std::uint64_t seed = 0;
    ObjectiveMode objective = ObjectiveMode::multi;
    WeightMode weight_mode = WeightMode::evolved;
    // When set, every operator slot is forced to this value (ablation runs).
    std::optional<FusionOp> fixed_operator;
    // Early stop after this many generations without best-f1 improvement;
    // 0 disables the check.
    std::size_t stall_patience = 0;

    bool operator==(const SearchConfig&) const = default;

    // Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

struct Individual {
    Genome genome;
    FitnessPair fitness;
};

using Population = std::vector<Individual>;

// Cached fitness evaluation: decode the genome on the train split, fit the
// ridge head, score the val split. The cache key is the canonical key of the
// effective genome (after weight_mode / fixed_operator rewrites).
class Evaluator {
  public:
    Evaluator(const CandidateFeaturePool& pool, const LabelSet& labels, const SearchConfig& config);

    // Applies weight_mode=fixed_one (all weights 1) and fixed_operator
    // rewrites; what the search actually scores and archives.
    Genome effective_genome(const Genome& genome) const;

    FitnessPair evaluate(const Genome& genome);

    // Fills fitness for every individual; distinct uncached genomes are
    // evaluated in parallel over `workers` threads. Workers are pure: no
    // randomness, no shared mutable state beyond the result slots.
    void evaluate_all(Population& batch, std::size_t workers);

    std::size_t cache_hits() const { return hits_; }
    std::size_t cache_misses() const { return misses_; }

  private:
    FitnessPair evaluate_uncached(const Genome& effective) const;

    const CandidateFeaturePool& pool_;
    const LabelSet& labels_;
    SearchConfig config_;
    std::vector<std::size_t> train_rows_;
    std::vector<std::size_t> val_rows_;
    Matrix train_targets_;
    std::vector<int> val_labels_;
    std::unordered_map<std::string, FitnessPair> cache_;
    std::mutex cache_mutex_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

// Deb's fast non-dominated sort; fronts partition 0..fitness.size()-1 and
// preserve ascending index order within each front.
std::vector<std::vector<std::size_t>> fast_nondominated_sort(
    const std::vector<FitnessPair>& fitness);

// NSGA-II crowding distance over one front. Boundary members per objective
// get +inf, interior members accumulate normalized neighbor gaps, zero-range
// objectives contribute nothing. Fronts of size <= 2 are all-boundary.
std::vector<double> crowding_distance(const std::vector<FitnessPair>& front);

// Environmental selection: indices of the n survivors, ascending. Multi mode
// fills whole fronts in rank order and splits the last front by descending
// crowding distance (ties by insertion index); single_f1 mode sorts by f1
// descending (ties by insertion index).
std::vector<std::size_t> next_generation(const std::vector<FitnessPair>& fitness, std::size_t n,
                                         ObjectiveMode mode);

// Linear decay of the differential weight, before clamping.
inline double de_raw_weight(std::size_t g, std::size_t g_max, double rho0) {
    return rho0 * (1.0 - static_cast<double>(g) / static_cast<double>(g_max));
}

double de_weight(std::size_t g, const SearchConfig& config);

// a_m + rho*(a1 - a_m) + rho*(a2 - a3) component-wise; donor vectors are
// truncated or zero-padded to the target length first. A component whose
// update is non-finite keeps its previous value.
std::vector<double> de_update(const std::vector<double>& target, const std::vector<double>& a1,
                              const std::vector<double>& a2, const std::vector<double>& a3,
                              double rho);

// Hybrid mutation: with prob mutation_prob each, (i) resample the genome
// length (truncate or extend with fresh random tail), (ii) replace one
// feature pick, (iii) replace one operator; then the DE weight update with
// donors drawn from the population, sorted descending by f1. Donors avoid
// the parent index when the population has >= 4 members and degrade to
// sampling with replacement below 3.
Genome mutate(const Population& population, std::size_t parent_index, std::size_t generation,
              const SearchConfig& config, std::size_t feature_count, Rng& rng);

// Synchronized single-point crossover. The cut n_c is uniform over
// {1..min(n_k, n_m)}; the child takes parent_k's slots before the cut and
// parent_m's from it, so its length equals parent_m's. n_c = 1 copies
// parent_m exactly.
Genome crossover(const Genome& parent_k, const Genome& parent_m, Rng& rng);

struct FrontEntry {
    Genome genome;
    FitnessPair fitness;
    std::size_t generation = 0;
};

// Archive of the non-dominated set over everything ever evaluated, deduped
// by canonical key. single_f1 mode keeps only the incumbent best.
class ParetoFront {
  public:
    explicit ParetoFront(ObjectiveMode mode) : mode_(mode) {}

    void consider(const Genome& genome, FitnessPair fitness, std::size_t generation);

    const std::vector<FrontEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    // Output order: f2 ascending, then f1 descending, then key.
    std::vector<FrontEntry> sorted_entries() const;

  private:
    ObjectiveMode mode_;
    std::vector<FrontEntry> entries_;
};

// Max f1, ties by min f2, then min canonical key. Throws on an empty front.
const FrontEntry& select_best(const std::vector<FrontEntry>& entries);

struct GenerationStats {
    std::size_t generation = 0;
    double best_f1 = 0.0;
    double mean_f2 = 0.0;
    std::size_t front_size = 0;
};

struct SearchResult {
    std::vector<FrontEntry> front;
    FrontEntry best;
    std::vector<GenerationStats> history;
    std::size_t generations_run = 0;
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
};

// Full co-evolution loop, reproducible from config.seed. Per generation the
// union holds every parent, one mutant per parent, and with probability
// crossover_prob a crossover child of the parent and its own mutant, so
// |union| <= 3 * population_size.
SearchResult run_search(const CandidateFeaturePool& pool, const LabelSet& labels,
                        const SearchConfig& config, std::size_t workers = 1);

}  // namespace fusionsearch
