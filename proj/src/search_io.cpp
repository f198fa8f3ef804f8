#include "fusionsearch/search_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fusionsearch/feature_store.hpp"

namespace fusionsearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw StoreError(StoreErrc::missing_file, "missing file: " + file.string());
    }
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest, "cannot parse " + file.string() + ": " + e.what());
    }
}

void write_text_file(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw StoreError(StoreErrc::io_failure, "cannot open " + file.string());
    }
    out << text;
    if (!out) {
        throw StoreError(StoreErrc::io_failure, "write failed for " + file.string());
    }
}

// Shortest round-trip decimal form, shared by JSON and CSV output.
std::string number_repr(double v) { return json(v).dump(); }

json entry_to_json(const FrontEntry& e) {
    return json{{"genome", genome_to_json(e.genome)},
                {"f1", e.fitness.f1},
                {"f2", e.fitness.f2},
                {"generation", e.generation}};
}

FrontEntry entry_from_json(const json& j) {
    FrontEntry e;
    e.genome = genome_from_json(j.at("genome"));
    e.fitness.f1 = j.at("f1").get<double>();
    e.fitness.f2 = j.at("f2").get<int>();
    e.generation = j.at("generation").get<std::size_t>();
    return e;
}

}  // namespace

json genome_to_json(const Genome& genome) {
    json q = json::array();
    for (FusionOp op : genome.q) q.push_back(static_cast<int>(op));
    return json{{"s", genome.s}, {"q", q}, {"a", genome.a}};
}

Genome genome_from_json(const json& j) {
    Genome g;
    try {
        g.s = j.at("s").get<std::vector<int>>();
        for (int code : j.at("q").get<std::vector<int>>()) {
            g.q.push_back(fusion_op_from_code(code));
        }
        g.a = j.at("a").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest, std::string("malformed genome: ") + e.what());
    }
    if (g.s.empty() || g.q.size() != g.s.size() - 1 || g.a.size() != 2 * (g.s.size() - 1)) {
        throw StoreError(StoreErrc::bad_manifest, "genome component lengths are inconsistent");
    }
    for (double w : g.a) {
        if (!std::isfinite(w)) {
            throw StoreError(StoreErrc::bad_manifest, "genome weight is not finite");
        }
    }
    return g;
}

void write_front(const fs::path& file, const std::vector<FrontEntry>& entries) {
    json arr = json::array();
    for (const FrontEntry& e : entries) arr.push_back(entry_to_json(e));
    write_text_file(file, arr.dump(2) + "\n");
}

std::vector<FrontEntry> read_front(const fs::path& file) {
    const json j = load_json_file(file);
    if (!j.is_array()) {
        throw StoreError(StoreErrc::bad_manifest, "front file must hold a JSON array");
    }
    std::vector<FrontEntry> entries;
    entries.reserve(j.size());
    for (const json& item : j) entries.push_back(entry_from_json(item));
    return entries;
}

void write_best(const fs::path& file, const FrontEntry& best) {
    write_text_file(file, entry_to_json(best).dump(2) + "\n");
}

FrontEntry read_best(const fs::path& file) { return entry_from_json(load_json_file(file)); }

void write_history(const fs::path& file, const std::vector<GenerationStats>& history) {
    std::string text = "generation,best_f1,mean_f2,front_size\n";
    for (const GenerationStats& row : history) {
        text += std::to_string(row.generation);
        text += ',';
        text += number_repr(row.best_f1);
        text += ',';
        text += number_repr(row.mean_f2);
        text += ',';
        text += std::to_string(row.front_size);
        text += '\n';
    }
    write_text_file(file, text);
}

json config_to_json(const SearchConfig& c) {
    return json{{"population_size", c.population_size},
                {"max_generations", c.max_generations},
                {"mutation_prob", c.mutation_prob},
                {"crossover_prob", c.crossover_prob},
                {"n_max", c.n_max},
                {"rho0", c.rho0},
                {"rho_range", {c.rho_lo, c.rho_hi}},
                {"ridge", c.ridge},
                {"seed", c.seed},
                {"objective", c.objective == ObjectiveMode::multi ? "multi" : "single"},
                {"weight_mode", c.weight_mode == WeightMode::evolved ? "evolved" : "fixed_one"},
                {"fixed_operator", c.fixed_operator ? to_string(*c.fixed_operator) : "none"},
                {"stall_patience", c.stall_patience}};
}

SearchConfig config_from_json(const json& j) {
    SearchConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "population_size") {
                c.population_size = value.get<std::size_t>();
            } else if (key == "max_generations") {
                c.max_generations = value.get<std::size_t>();
            } else if (key == "mutation_prob") {
                c.mutation_prob = value.get<double>();
            } else if (key == "crossover_prob") {
                c.crossover_prob = value.get<double>();
            } else if (key == "n_max") {
                c.n_max = value.get<std::size_t>();
            } else if (key == "rho0") {
                c.rho0 = value.get<double>();
            } else if (key == "rho_range") {
                if (!value.is_array() || value.size() != 2) {
                    throw StoreError(StoreErrc::bad_manifest, "rho_range must be [lo, hi]");
                }
                c.rho_lo = value[0].get<double>();
                c.rho_hi = value[1].get<double>();
            } else if (key == "ridge") {
                c.ridge = value.get<double>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else if (key == "objective") {
                const auto mode = value.get<std::string>();
                if (mode == "multi") {
                    c.objective = ObjectiveMode::multi;
                } else if (mode == "single") {
                    c.objective = ObjectiveMode::single_f1;
                } else {
                    throw StoreError(StoreErrc::bad_manifest,
                                     "objective must be 'multi' or 'single', got '" + mode + "'");
                }
            } else if (key == "weight_mode") {
                const auto mode = value.get<std::string>();
                if (mode == "evolved") {
                    c.weight_mode = WeightMode::evolved;
                } else if (mode == "fixed_one") {
                    c.weight_mode = WeightMode::fixed_one;
                } else {
                    throw StoreError(StoreErrc::bad_manifest,
                                     "weight_mode must be 'evolved' or 'fixed_one', got '" + mode +
                                         "'");
                }
            } else if (key == "fixed_operator") {
                const auto name = value.get<std::string>();
                if (name == "none") {
                    c.fixed_operator.reset();
                } else {
                    c.fixed_operator = fusion_op_from_string(name);
                }
            } else if (key == "stall_patience") {
                c.stall_patience = value.get<std::size_t>();
            } else {
                throw StoreError(StoreErrc::bad_manifest, "unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest, std::string("malformed config: ") + e.what());
    }
    return c;
}

SearchConfig load_config_file(const fs::path& file) {
    return config_from_json(load_json_file(file));
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t hash_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw StoreError(StoreErrc::missing_file, "missing file: " + file.string());
    }
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a_bytes(buf, static_cast<std::size_t>(in.gcount()), h);
        if (in.eof()) break;
    }
    return h;
}

std::uint64_t hash_pool_dir(const fs::path& dir) {
    const json manifest = load_json_file(dir / "pool.json");
    std::uint64_t h = hash_file(dir / "pool.json");
    try {
        for (const json& entry : manifest.at("features")) {
            const std::string file = entry.at("file").get<std::string>();
            h = fnv1a_bytes(file.data(), file.size(), h);
            const std::uint64_t fh = hash_file(dir / file);
            h = fnv1a_bytes(&fh, sizeof(fh), h);
        }
        const std::string mask = manifest.at("mask_file").get<std::string>();
        const std::uint64_t mh = hash_file(dir / mask);
        h = fnv1a_bytes(&mh, sizeof(mh), h);
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest,
                         "malformed pool manifest in " + dir.string() + ": " + e.what());
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_run_manifest(const fs::path& file, const RunManifest& m) {
    const json j{{"tool_version", m.tool_version},
                 {"config", config_to_json(m.config)},
                 {"pool_dir", m.pool_dir},
                 {"labels_file", m.labels_file},
                 {"pool_hash", m.pool_hash},
                 {"labels_hash", m.labels_hash},
                 {"workers", m.workers},
                 {"duration_seconds", m.duration_seconds}};
    write_text_file(file, j.dump(2) + "\n");
}

RunManifest read_run_manifest(const fs::path& file) {
    const json j = load_json_file(file);
    RunManifest m;
    try {
        m.tool_version = j.at("tool_version").get<std::string>();
        m.config = config_from_json(j.at("config"));
        m.pool_dir = j.at("pool_dir").get<std::string>();
        m.labels_file = j.at("labels_file").get<std::string>();
        m.pool_hash = j.at("pool_hash").get<std::string>();
        m.labels_hash = j.at("labels_hash").get<std::string>();
        m.workers = j.at("workers").get<std::size_t>();
        m.duration_seconds = j.at("duration_seconds").get<double>();
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest,
                         "malformed run manifest " + file.string() + ": " + e.what());
    }
    return m;
}

}  // namespace fusionsearch
