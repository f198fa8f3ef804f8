#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusionsearch/fusion_tree.hpp"
#include "fusionsearch/moea.hpp"

namespace fusionsearch {

inline constexpr const char* kToolVersion = "0.1.0";

// Genomes serialize as {"s":[...], "q":[int codes], "a":[...]}.
nlohmann::json genome_to_json(const Genome& genome);
Genome genome_from_json(const nlohmann::json& j);

// front.json: array of {genome, f1, f2, generation}; best.json: one entry.
void write_front(const std::filesystem::path& file, const std::vector<FrontEntry>& entries);
std::vector<FrontEntry> read_front(const std::filesystem::path& file);
void write_best(const std::filesystem::path& file, const FrontEntry& best);
FrontEntry read_best(const std::filesystem::path& file);

// history.csv: generation,best_f1,mean_f2,front_size. Doubles are printed in
// shortest round-trip form so identical runs write identical bytes.
void write_history(const std::filesystem::path& file, const std::vector<GenerationStats>& history);

nlohmann::json config_to_json(const SearchConfig& config);
// Missing keys keep their defaults; unknown keys are an error.
SearchConfig config_from_json(const nlohmann::json& j);
SearchConfig load_config_file(const std::filesystem::path& file);

// FNV-1a 64-bit, streamed over file bytes.
std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t hash_file(const std::filesystem::path& file);
// Hash of pool.json plus every referenced matrix file and the mask, in
// manifest order.
std::uint64_t hash_pool_dir(const std::filesystem::path& dir);
std::string hash_hex(std::uint64_t h);

// Snapshot written next to every search run; re-running from it reproduces
// front/best/history byte-exactly.
struct RunManifest {
    std::string tool_version = kToolVersion;
    SearchConfig config;
    std::string pool_dir;
    std::string labels_file;
    std::string pool_hash;
    std::string labels_hash;
    std::size_t workers = 1;
    double duration_seconds = 0.0;
};

void write_run_manifest(const std::filesystem::path& file, const RunManifest& manifest);
RunManifest read_run_manifest(const std::filesystem::path& file);

}  // namespace fusionsearch
