#include "fusionsearch/moea.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "fusionsearch/metrics.hpp"

namespace fusionsearch {

void SearchConfig::validate() const {
    if (population_size < 2) {
        throw std::invalid_argument("population_size must be >= 2");
    }
    if (max_generations < 1) {
        throw std::invalid_argument("max_generations must be >= 1");
    }
    if (mutation_prob < 0.0 || mutation_prob > 1.0) {
        throw std::invalid_argument("mutation_prob must lie in [0, 1]");
    }
    if (crossover_prob < 0.0 || crossover_prob > 1.0) {
        throw std::invalid_argument("crossover_prob must lie in [0, 1]");
    }
    if (n_max < 1) {
        throw std::invalid_argument("n_max must be >= 1");
    }
    if (!(rho_lo >= 0.0 && rho_lo <= rho_hi && rho_hi <= 1.0)) {
        throw std::invalid_argument("rho range must satisfy 0 <= lo <= hi <= 1");
    }
    if (!(ridge > 0.0)) {
        throw std::invalid_argument("ridge must be positive");
    }
}

Evaluator::Evaluator(const CandidateFeaturePool& pool, const LabelSet& labels,
                     const SearchConfig& config)
    : pool_(pool), labels_(labels), config_(config) {
    train_rows_ = split_rows(labels, Split::train);
    val_rows_ = split_rows(labels, Split::val);
    if (train_rows_.empty() || val_rows_.empty()) {
        throw StoreError(StoreErrc::bad_labels, "train and val splits must be non-empty");
    }
    train_targets_ = one_hot_targets(labels, Split::train);
    val_labels_.reserve(val_rows_.size());
    for (std::size_t r : val_rows_) {
        val_labels_.push_back(labels.labels[r]);
    }
}

Genome Evaluator::effective_genome(const Genome& genome) const {
    Genome g = genome;
    if (config_.weight_mode == WeightMode::fixed_one) {
        std::fill(g.a.begin(), g.a.end(), 1.0);
    }
    if (config_.fixed_operator) {
        std::fill(g.q.begin(), g.q.end(), *config_.fixed_operator);
    }
    return g;
}

FitnessPair Evaluator::evaluate_uncached(const Genome& effective) const {
    const int n = static_cast<int>(effective.n());
    try {
        const Matrix train = decode_fuse_rows(effective, pool_, train_rows_);
        const LinearHead head = fit_head(train, train_targets_, config_.ridge);
        const Matrix val = decode_fuse_rows(effective, pool_, val_rows_);
        const std::vector<double> scores = predict(head, val);
        return FitnessPair{auc(scores, val_labels_), n};
    } catch (const EvalError&) {
        return FitnessPair{0.0, n};
    }
}

FitnessPair Evaluator::evaluate(const Genome& genome) {
    const Genome effective = effective_genome(genome);
    const std::string key = canonical_key(effective);
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) {
            ++hits_;
            return it->second;
        }
    }
    const FitnessPair fit = evaluate_uncached(effective);
    std::lock_guard lock(cache_mutex_);
    ++misses_;
    cache_.emplace(key, fit);
    return fit;
}

void Evaluator::evaluate_all(Population& batch, std::size_t workers) {
    struct Job {
        Genome effective;
        std::string key;
        FitnessPair result;
    };
    std::vector<Job> jobs;
    std::unordered_map<std::string, std::size_t> job_index;
    // Individual -> job that will produce its fitness, or already resolved.
    std::vector<std::size_t> pending(batch.size(), std::size_t(-1));

    {
        std::lock_guard lock(cache_mutex_);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            Genome effective = effective_genome(batch[i].genome);
            std::string key = canonical_key(effective);
            if (auto it = cache_.find(key); it != cache_.end()) {
                batch[i].fitness = it->second;
                ++hits_;
                continue;
            }
            if (auto it = job_index.find(key); it != job_index.end()) {
                // Duplicate within the batch: served by the first evaluation.
                pending[i] = it->second;
                ++hits_;
                continue;
            }
            job_index.emplace(key, jobs.size());
            pending[i] = jobs.size();
            jobs.push_back(Job{std::move(effective), std::move(key), {}});
            ++misses_;
        }
    }

    if (!jobs.empty()) {
        const std::size_t n_workers = std::min(std::max<std::size_t>(workers, 1), jobs.size());
        if (n_workers == 1) {
            for (Job& job : jobs) {
                job.result = evaluate_uncached(job.effective);
            }
        } else {
            std::atomic<std::size_t> next{0};
            auto work = [&] {
                for (;;) {
                    const std::size_t k = next.fetch_add(1);
                    if (k >= jobs.size()) return;
                    jobs[k].result = evaluate_uncached(jobs[k].effective);
                }
            };
            std::vector<std::thread> pool;
            pool.reserve(n_workers);
            for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        std::lock_guard lock(cache_mutex_);
        for (Job& job : jobs) {
            cache_.emplace(job.key, job.result);
        }
    }

    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (pending[i] != std::size_t(-1)) {
            batch[i].fitness = jobs[pending[i]].result;
        }
    }
}

std::vector<std::vector<std::size_t>> fast_nondominated_sort(
    const std::vector<FitnessPair>& fitness) {
    const std::size_t n = fitness.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> dom_count(n, 0);
    std::vector<std::vector<std::size_t>> fronts;

    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(fitness[i], fitness[j])) {
                dominated[i].push_back(j);
            } else if (dominates(fitness[j], fitness[i])) {
                ++dom_count[i];
            }
        }
        if (dom_count[i] == 0) current.push_back(i);
    }

    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (std::size_t i : fronts.back()) {
            for (std::size_t j : dominated[i]) {
                if (--dom_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<FitnessPair>& front) {
    const std::size_t n = front.size();
    if (n == 0) return {};
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (n <= 2) return std::vector<double>(n, inf);

    std::vector<double> dist(n, 0.0);
    auto accumulate = [&](auto value_of) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = value_of(a), vb = value_of(b);
            return va != vb ? va < vb : a < b;
        });
        const double range = value_of(order[n - 1]) - value_of(order[0]);
        if (range == 0.0) return;
        dist[order[0]] = inf;
        dist[order[n - 1]] = inf;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            dist[order[k]] += (value_of(order[k + 1]) - value_of(order[k - 1])) / range;
        }
    };
    accumulate([&](std::size_t i) { return front[i].f1; });
    accumulate([&](std::size_t i) { return static_cast<double>(front[i].f2); });
    return dist;
}

std::vector<std::size_t> next_generation(const std::vector<FitnessPair>& fitness, std::size_t n,
                                         ObjectiveMode mode) {
    if (fitness.size() < n) {
        throw std::invalid_argument("union smaller than the requested population");
    }
    std::vector<std::size_t> selected;
    selected.reserve(n);

    if (mode == ObjectiveMode::single_f1) {
        std::vector<std::size_t> order(fitness.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return fitness[a].f1 != fitness[b].f1 ? fitness[a].f1 > fitness[b].f1 : a < b;
        });
        selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        for (const auto& front : fast_nondominated_sort(fitness)) {
            if (selected.size() + front.size() <= n) {
                selected.insert(selected.end(), front.begin(), front.end());
                if (selected.size() == n) break;
                continue;
            }
            std::vector<FitnessPair> front_fitness;
            front_fitness.reserve(front.size());
            for (std::size_t i : front) front_fitness.push_back(fitness[i]);
            const std::vector<double> crowd = crowding_distance(front_fitness);

            std::vector<std::size_t> order(front.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return crowd[a] != crowd[b] ? crowd[a] > crowd[b] : front[a] < front[b];
            });
            for (std::size_t k = 0; selected.size() < n; ++k) {
                selected.push_back(front[order[k]]);
            }
            break;
        }
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

double de_weight(std::size_t g, const SearchConfig& config) {
    return std::clamp(de_raw_weight(g, config.max_generations, config.rho0), config.rho_lo,
                      config.rho_hi);
}

std::vector<double> de_update(const std::vector<double>& target, const std::vector<double>& a1,
                              const std::vector<double>& a2, const std::vector<double>& a3,
                              double rho) {
    auto at = [](const std::vector<double>& v, std::size_t i) {
        return i < v.size() ? v[i] : 0.0;
    };
    std::vector<double> out = target;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v =
            target[i] + rho * (at(a1, i) - target[i]) + rho * (at(a2, i) - at(a3, i));
        if (std::isfinite(v)) out[i] = v;
    }
    return out;
}

Genome mutate(const Population& population, std::size_t parent_index, std::size_t generation,
              const SearchConfig& config, std::size_t feature_count, Rng& rng) {
    if (population.empty()) {
        throw std::invalid_argument("mutation needs a non-empty population");
    }
    Genome g = population[parent_index].genome;

    // (i) resample the genome length.
    if (uniform01(rng) < config.mutation_prob) {
        const std::size_t n_new = 1 + static_cast<std::size_t>(uniform_below(rng, config.n_max));
        const std::size_t n_old = g.n();
        g.s.resize(n_new);
        g.q.resize(n_new >= 1 ? n_new - 1 : 0);
        g.a.resize(2 * (n_new - 1));
        for (std::size_t t = n_old; t < n_new; ++t) {
            g.s[t] = static_cast<int>(uniform_below(rng, feature_count));
        }
        for (std::size_t t = n_old >= 1 ? n_old - 1 : 0; t < n_new - 1; ++t) {
            g.q[t] = static_cast<FusionOp>(uniform_below(rng, kFusionOpCount));
        }
        for (std::size_t t = 2 * (n_old - 1); t < 2 * (n_new - 1); ++t) {
            g.a[t] = uniform_real(rng, 0.1, 2.0);
        }
    }

    // (ii) replace one feature pick.
    if (uniform01(rng) < config.mutation_prob) {
        const std::size_t pos = static_cast<std::size_t>(uniform_below(rng, g.n()));
        g.s[pos] = static_cast<int>(uniform_below(rng, feature_count));
    }

    // (iii) replace one operator; nothing to replace when n = 1.
    if (uniform01(rng) < config.mutation_prob && !g.q.empty()) {
        const std::size_t pos = static_cast<std::size_t>(uniform_below(rng, g.q.size()));
        g.q[pos] = static_cast<FusionOp>(uniform_below(rng, kFusionOpCount));
    }

    // (iv) DE weight update.
    if (config.weight_mode != WeightMode::fixed_one && !g.a.empty()) {
        std::array<std::size_t, 3> donor{};
        if (population.size() >= 3) {
            const bool exclude_parent = population.size() >= 4;
            for (std::size_t k = 0; k < 3; ++k) {
                for (;;) {
                    const auto cand =
                        static_cast<std::size_t>(uniform_below(rng, population.size()));
                    if (exclude_parent && cand == parent_index) continue;
                    bool duplicate = false;
                    for (std::size_t j = 0; j < k; ++j) duplicate |= donor[j] == cand;
                    if (!duplicate) {
                        donor[k] = cand;
                        break;
                    }
                }
            }
        } else {
            for (std::size_t k = 0; k < 3; ++k) {
                donor[k] = static_cast<std::size_t>(uniform_below(rng, population.size()));
            }
        }
        std::stable_sort(donor.begin(), donor.end(), [&](std::size_t a, std::size_t b) {
            return population[a].fitness.f1 > population[b].fitness.f1;
        });
        const double rho = de_weight(generation, config);
        g.a = de_update(g.a, population[donor[0]].genome.a, population[donor[1]].genome.a,
                        population[donor[2]].genome.a, rho);
    }
    return g;
}

Genome crossover(const Genome& parent_k, const Genome& parent_m, Rng& rng) {
    const std::size_t n_min = std::min(parent_k.n(), parent_m.n());
    const std::size_t n_c = 1 + static_cast<std::size_t>(uniform_below(rng, n_min));
    const std::size_t n_m = parent_m.n();

    Genome child;
    child.s.reserve(n_m);
    child.s.assign(parent_k.s.begin(), parent_k.s.begin() + static_cast<std::ptrdiff_t>(n_c - 1));
    child.s.insert(child.s.end(), parent_m.s.begin() + static_cast<std::ptrdiff_t>(n_c - 1),
                   parent_m.s.end());
    child.q.reserve(n_m - 1);
    child.q.assign(parent_k.q.begin(), parent_k.q.begin() + static_cast<std::ptrdiff_t>(n_c - 1));
    child.q.insert(child.q.end(), parent_m.q.begin() + static_cast<std::ptrdiff_t>(n_c - 1),
                   parent_m.q.end());
    child.a.reserve(2 * (n_m - 1));
    child.a.assign(parent_k.a.begin(),
                   parent_k.a.begin() + static_cast<std::ptrdiff_t>(2 * (n_c - 1)));
    child.a.insert(child.a.end(), parent_m.a.begin() + static_cast<std::ptrdiff_t>(2 * (n_c - 1)),
                   parent_m.a.end());
    return child;
}

void ParetoFront::consider(const Genome& genome, FitnessPair fitness, std::size_t generation) {
    if (mode_ == ObjectiveMode::single_f1) {
        if (entries_.empty()) {
            entries_.push_back(FrontEntry{genome, fitness, generation});
            return;
        }
        FrontEntry& best = entries_.front();
        const bool better =
            fitness.f1 != best.fitness.f1 ? fitness.f1 > best.fitness.f1
            : fitness.f2 != best.fitness.f2
                ? fitness.f2 < best.fitness.f2
                : canonical_key(genome) < canonical_key(best.genome);
        if (better) best = FrontEntry{genome, fitness, generation};
        return;
    }

    const std::string key = canonical_key(genome);
    for (const FrontEntry& e : entries_) {
        if (dominates(e.fitness, fitness)) return;
        if (canonical_key(e.genome) == key) return;
    }
    std::erase_if(entries_,
                  [&](const FrontEntry& e) { return dominates(fitness, e.fitness); });
    entries_.push_back(FrontEntry{genome, fitness, generation});
}

std::vector<FrontEntry> ParetoFront::sorted_entries() const {
    std::vector<FrontEntry> out = entries_;
    std::sort(out.begin(), out.end(), [](const FrontEntry& a, const FrontEntry& b) {
        if (a.fitness.f2 != b.fitness.f2) return a.fitness.f2 < b.fitness.f2;
        if (a.fitness.f1 != b.fitness.f1) return a.fitness.f1 > b.fitness.f1;
        return canonical_key(a.genome) < canonical_key(b.genome);
    });
    return out;
}

const FrontEntry& select_best(const std::vector<FrontEntry>& entries) {
    if (entries.empty()) {
        throw std::invalid_argument("cannot select from an empty front");
    }
    const FrontEntry* best = &entries.front();
    for (const FrontEntry& e : entries) {
        if (e.fitness.f1 != best->fitness.f1) {
            if (e.fitness.f1 > best->fitness.f1) best = &e;
        } else if (e.fitness.f2 != best->fitness.f2) {
            if (e.fitness.f2 < best->fitness.f2) best = &e;
        } else if (canonical_key(e.genome) < canonical_key(best->genome)) {
            best = &e;
        }
    }
    return *best;
}

namespace {

std::vector<FitnessPair> fitness_of(const Population& population) {
    std::vector<FitnessPair> out;
    out.reserve(population.size());
    for (const Individual& ind : population) out.push_back(ind.fitness);
    return out;
}

GenerationStats population_stats(const Population& population, std::size_t generation,
                                 std::size_t front_size) {
    GenerationStats stats;
    stats.generation = generation;
    stats.front_size = front_size;
    double best = 0.0;
    double f2_sum = 0.0;
    for (const Individual& ind : population) {
        best = std::max(best, ind.fitness.f1);
        f2_sum += static_cast<double>(ind.fitness.f2);
    }
    stats.best_f1 = best;
    stats.mean_f2 = f2_sum / static_cast<double>(population.size());
    return stats;
}

}  // namespace

SearchResult run_search(const CandidateFeaturePool& pool, const LabelSet& labels,
                        const SearchConfig& config, std::size_t workers) {
    config.validate();
    const std::size_t feature_count = pool.feature_count();
    if (feature_count == 0) {
        throw std::invalid_argument("pool has no features");
    }

    Rng rng(config.seed);
    Evaluator evaluator(pool, labels, config);
    ParetoFront archive(config.objective);

    Population population(config.population_size);
    for (Individual& ind : population) {
        ind.genome = random_genome(rng, feature_count, config.n_max);
    }
    evaluator.evaluate_all(population, workers);
    for (const Individual& ind : population) {
        archive.consider(evaluator.effective_genome(ind.genome), ind.fitness, 0);
    }

    SearchResult result{.front = {},
                        .best = {},
                        .history = {},
                        .generations_run = 0,
                        .cache_hits = 0,
                        .cache_misses = 0};
    result.history.push_back(population_stats(population, 0, archive.size()));

    double stall_best = result.history.back().best_f1;
    std::size_t stalled = 0;

    for (std::size_t g = 0; g < config.max_generations; ++g) {
        Population offspring;
        offspring.reserve(2 * population.size());
        for (std::size_t i = 0; i < population.size(); ++i) {
            Genome mutant = mutate(population, i, g, config, feature_count, rng);
            const bool cross = uniform01(rng) < config.crossover_prob;
            offspring.push_back(Individual{std::move(mutant), {}});
            if (cross) {
                Genome child = crossover(population[i].genome, offspring.back().genome, rng);
                offspring.push_back(Individual{std::move(child), {}});
            }
        }

        // Parents already carry fitness; only the offspring go to the evaluator.
        evaluator.evaluate_all(offspring, workers);

        Population union_pop = population;
        union_pop.reserve(population.size() + offspring.size());
        for (Individual& ind : offspring) {
            archive.consider(evaluator.effective_genome(ind.genome), ind.fitness, g + 1);
            union_pop.push_back(std::move(ind));
        }

        const std::vector<std::size_t> keep =
            next_generation(fitness_of(union_pop), config.population_size, config.objective);
        Population next;
        next.reserve(keep.size());
        for (std::size_t idx : keep) next.push_back(union_pop[idx]);
        population = std::move(next);

        result.history.push_back(population_stats(population, g + 1, archive.size()));
        result.generations_run = g + 1;

        const double best_now = result.history.back().best_f1;
        if (config.stall_patience > 0) {
            if (best_now > stall_best + 1e-12) {
                stall_best = best_now;
                stalled = 0;
            } else if (++stalled >= config.stall_patience) {
                break;
            }
        }
    }

    result.front = archive.sorted_entries();
    result.best = select_best(result.front);
    result.cache_hits = evaluator.cache_hits();
    result.cache_misses = evaluator.cache_misses();
    return result;
}

}  // namespace fusionsearch
