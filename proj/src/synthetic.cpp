#include "fusionsearch/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fusionsearch {

void PlantConfig::validate() const {
    if (n_res < 5 || feature_count == 0 || dim == 0) {
        throw std::invalid_argument("plant needs n_res >= 5, feature_count >= 1, dim >= 1");
    }
    if (signal_strength.size() != feature_count) {
        throw std::invalid_argument("signal_strength must list one value per feature");
    }
    for (double s : signal_strength) {
        if (!(s >= 0.0 && s <= 1.0)) {
            throw std::invalid_argument("signal strengths must lie in [0, 1]");
        }
    }
    if (!complementary_pairs.empty() && feature_count < 2) {
        throw std::invalid_argument("complementary pairs need at least two features");
    }
    for (auto [a, b] : complementary_pairs) {
        if (a < 0 || b < 0 || a == b || static_cast<std::size_t>(a) >= feature_count ||
            static_cast<std::size_t>(b) >= feature_count) {
            throw std::invalid_argument("complementary pair indices must be distinct and in range");
        }
    }
    if (!(noise_sd >= 0.0) || !(positive_rate > 0.0 && positive_rate < 1.0)) {
        throw std::invalid_argument("noise_sd must be >= 0 and positive_rate in (0, 1)");
    }
}

std::pair<CandidateFeaturePool, LabelSet> generate_planted_pool(const PlantConfig& config) {
    config.validate();
    Rng rng(config.seed);

    LabelSet labels;
    labels.labels.resize(config.n_res);
    labels.mask.assign(config.n_res, 1);
    labels.split.resize(config.n_res);
    std::vector<double> h(config.n_res);
    for (std::size_t i = 0; i < config.n_res; ++i) {
        const bool positive = uniform01(rng) < config.positive_rate;
        labels.labels[i] = positive ? 1 : 0;
        h[i] = positive ? 1.0 : -1.0;
        const std::size_t slot = i % 5;
        labels.split[i] = slot < 3 ? Split::train : slot == 3 ? Split::val : Split::test;
    }

    // Pair membership: role 1 = leading member, role 2 = partner.
    std::vector<int> pair_role(config.feature_count, 0);
    std::vector<std::size_t> pair_id(config.feature_count, 0);
    std::vector<std::vector<double>> nuisance(config.complementary_pairs.size());
    for (std::size_t p = 0; p < config.complementary_pairs.size(); ++p) {
        const auto [a, b] = config.complementary_pairs[p];
        pair_role[static_cast<std::size_t>(a)] = 1;
        pair_role[static_cast<std::size_t>(b)] = 2;
        pair_id[static_cast<std::size_t>(a)] = p;
        pair_id[static_cast<std::size_t>(b)] = p;
        nuisance[p].resize(config.n_res);
        for (double& z : nuisance[p]) z = normal(rng);
    }

    CandidateFeaturePool pool;
    for (std::size_t t = 0; t < config.feature_count; ++t) {
        FeatureMatrix fm;
        fm.name = "feat_" + std::to_string(t);
        fm.data = Matrix(config.n_res, config.dim);

        double sigma = config.signal_strength[t];
        if (pair_role[t] != 0) {
            sigma = config.signal_strength[static_cast<std::size_t>(
                config.complementary_pairs[pair_id[t]].first)];
        }

        for (std::size_t i = 0; i < config.n_res; ++i) {
            double* row = fm.data.row(i);
            for (std::size_t c = 0; c < config.dim; ++c) {
                const double eps = normal(rng);
                double v = eps;
                if (c == 0 && pair_role[t] == 1) {
                    // Shared nuisance dominates each member alone; the 1:3 coefficient
                    // ratio means Add with weights (3, 1) cancels it exactly.
                    v = sigma * h[i] + 2.5 * sigma * nuisance[pair_id[t]][i] + config.noise_sd * eps;
                } else if (c == 0 && pair_role[t] == 2) {
                    v = sigma * h[i] - 7.5 * sigma * nuisance[pair_id[t]][i] + config.noise_sd * eps;
                } else if (pair_role[t] == 0 && sigma > 0.0 && c == 0) {
                    v = sigma * h[i] + config.noise_sd * eps;
                } else if (pair_role[t] == 0 && sigma > 0.0 && c == 1) {
                    v = 0.5 * sigma * h[i] + config.noise_sd * eps;
                }
                row[c] = static_cast<double>(static_cast<float>(v));
            }
        }
        pool.features.push_back(std::move(fm));
    }
    pool.residue_mask.assign(config.n_res, 1);
    return {std::move(pool), std::move(labels)};
}

BruteForceResult brute_force_search(const CandidateFeaturePool& pool, const LabelSet& labels,
                                    std::size_t n_max, const std::vector<FusionOp>& operator_set,
                                    const std::vector<double>& weight_grid, double ridge) {
    if (n_max < 1 || operator_set.empty() || weight_grid.empty() || pool.feature_count() == 0) {
        throw std::invalid_argument("brute force needs n_max >= 1, operators, weights, features");
    }
    const double t_count = static_cast<double>(pool.feature_count());
    const double ops = static_cast<double>(operator_set.size());
    const double grid = static_cast<double>(weight_grid.size());
    double total = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        total += std::pow(t_count, static_cast<double>(n)) *
                 std::pow(ops, static_cast<double>(n - 1)) *
                 std::pow(grid, static_cast<double>(2 * (n - 1)));
    }
    if (total > 1e7) {
        throw std::invalid_argument("brute-force grid has " + std::to_string(total) +
                                    " candidates, over the 1e7 guard");
    }

    SearchConfig eval_config;
    eval_config.ridge = ridge;
    Evaluator evaluator(pool, labels, eval_config);

    BruteForceResult result;
    std::string best_key;
    auto offer = [&](const Genome& genome) {
        const FitnessPair fit = evaluator.evaluate(genome);
        ++result.candidates;
        const std::string key = canonical_key(genome);
        const bool better = result.candidates == 1 ||
                            (fit.f1 != result.fitness.f1   ? fit.f1 > result.fitness.f1
                             : fit.f2 != result.fitness.f2 ? fit.f2 < result.fitness.f2
                                                           : key < best_key);
        if (better) {
            result.genome = genome;
            result.fitness = fit;
            best_key = key;
        }
    };

    // Odometer enumeration over (s, q, a) for each length.
    for (std::size_t n = 1; n <= n_max; ++n) {
        Genome g;
        g.s.assign(n, 0);
        g.q.assign(n - 1, operator_set[0]);
        g.a.assign(2 * (n - 1), weight_grid[0]);
        std::vector<std::size_t> s_idx(n, 0), q_idx(n - 1, 0), a_idx(2 * (n - 1), 0);

        auto advance = [](std::vector<std::size_t>& digits, std::size_t base) {
            for (std::size_t i = 0; i < digits.size(); ++i) {
                if (++digits[i] < base) return true;
                digits[i] = 0;
            }
            return false;
        };

        for (;;) {
            for (std::size_t i = 0; i < n; ++i) g.s[i] = static_cast<int>(s_idx[i]);
            for (;;) {
                for (std::size_t i = 0; i + 1 < n; ++i) g.q[i] = operator_set[q_idx[i]];
                for (;;) {
                    for (std::size_t i = 0; i < g.a.size(); ++i) g.a[i] = weight_grid[a_idx[i]];
                    offer(g);
                    if (!advance(a_idx, weight_grid.size())) break;
                }
                if (!advance(q_idx, operator_set.size())) break;
            }
            if (!advance(s_idx, pool.feature_count())) break;
        }
    }
    return result;
}

}  // namespace fusionsearch
