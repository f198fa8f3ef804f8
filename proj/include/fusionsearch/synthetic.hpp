#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fusionsearch/feature_store.hpp"
#include "fusionsearch/fusion_tree.hpp"
#include "fusionsearch/moea.hpp"

namespace fusionsearch {

// Recipe for a pool with known signal structure. Labels are Bernoulli
// (positive_rate); residue i carries the class sign h = +1/-1.
//
// Feature content (strength sigma = signal_strength[t], everything else
// standard normal noise):
//   - lone informative feature: col0 = sigma*h + noise_sd*eps and, when the
//     pool has >= 2 columns, col1 = 0.5*sigma*h + noise_sd*eps;
//   - complementary pair (A, B): a shared per-residue nuisance z enters with
//     opposite polarity and unequal gain,
//       A col0 = sigma*h + 2*sigma*z + noise_sd*eps
//       B col0 = sigma*h - (2*sigma/3)*z + noise_sd*eps
//     so either member alone is swamped by z, while the weighted sum with
//     w_B/w_A = 3 cancels z exactly. Both members use A's strength.
// Splits are assigned round-robin: residue i goes to train when i mod 5 is
// 0, 1 or 2, to val when 3, to test when 4. The mask is all-true. Every
// value is cast through float so saving and reloading is bit-exact.
struct PlantConfig {
    std::size_t n_res = 500;
    std::size_t feature_count = 3;
    std::size_t dim = 4;
    std::vector<double> signal_strength;
    std::vector<std::pair<int, int>> complementary_pairs;
    double noise_sd = 1.0;
    double positive_rate = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

std::pair<CandidateFeaturePool, LabelSet> generate_planted_pool(const PlantConfig& config);

struct BruteForceResult {
    Genome genome;
    FitnessPair fitness;
    std::size_t candidates = 0;
};

// Exhaustively evaluates every genome with n in [1, n_max], feature picks
// over the pool, operators from operator_set and weights from weight_grid,
// through the same fitness path the search uses. Ties resolved like
// select_best (max f1, min f2, min key). Throws when the candidate count
// sum_{n=1..n_max} T^n * |ops|^(n-1) * |grid|^(2(n-1)) exceeds 1e7.
BruteForceResult brute_force_search(const CandidateFeaturePool& pool, const LabelSet& labels,
                                    std::size_t n_max, const std::vector<FusionOp>& operator_set,
                                    const std::vector<double>& weight_grid, double ridge);

}  // namespace fusionsearch
