#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusionsearch/matrix.hpp"

namespace fusionsearch {

// ---------------------------------------------------------------------------
// Data model
//
// A candidate pool is a directory:
//   pool.json   manifest {version, n_res, mask_file, features:[{name,dim,file}]}
//   <name>.fpm  one binary matrix per feature ("FPM1" header + f32 payload)
//   mask.txt    one 0/1 line per residue (1 = real residue, 0 = padding)
// Residue labels live in a separate CSV with columns index,label,mask,split.
// ---------------------------------------------------------------------------

enum class Split : int { train = 0, val = 1, test = 2 };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

enum class StoreErrc {
    missing_file,
    io_failure,
    bad_manifest,
    bad_magic,
    dimension_mismatch,
    non_finite_entry,
    bad_mask,
    bad_labels,
};

class StoreError : public std::runtime_error {
public:
    StoreError(StoreErrc code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}
    StoreErrc code() const { return code_; }

private:
    StoreErrc code_;
};

struct FeatureMatrix {
    std::string name;
    Matrix data;

    std::size_t dim() const { return data.cols; }
    bool operator==(const FeatureMatrix&) const = default;
};

struct CandidateFeaturePool {
    std::vector<FeatureMatrix> features;
    std::vector<std::uint8_t> residue_mask;  // 1 = real residue
    int version = 1;

    std::size_t feature_count() const { return features.size(); }
    std::size_t n_res() const { return features.empty() ? 0 : features.front().data.rows; }
    // Common feature dimension, or 0 when the pool is empty or dims disagree.
    std::size_t common_dim() const;

    bool operator==(const CandidateFeaturePool&) const = default;
};

struct LabelSet {
    std::vector<std::uint8_t> labels;  // 1 = disordered
    std::vector<std::uint8_t> mask;    // 1 = real residue
    std::vector<Split> split;

    std::size_t size() const { return labels.size(); }
    bool operator==(const LabelSet&) const = default;
};

struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
};

// Thrown by callers that require a clean report (e.g. the search driver).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

// ---------------------------------------------------------------------------
// I/O
// ---------------------------------------------------------------------------

// Loads pool.json plus every referenced matrix and the mask file. Throws
// StoreError with a specific code on the first defect found.
CandidateFeaturePool load_pool(const std::filesystem::path& dir);

// Writes the manifest, one .fpm file per feature, and the mask file.
// Matrix payloads are stored as little-endian f32; values must be exactly
// representable at that precision for load_pool(save_pool(p)) == p.
void save_pool(const std::filesystem::path& dir, const CandidateFeaturePool& pool);

Matrix load_matrix_file(const std::filesystem::path& file);
void save_matrix_file(const std::filesystem::path& file, const Matrix& m);

LabelSet load_labels(const std::filesystem::path& file);
void save_labels(const std::filesystem::path& file, const LabelSet& labels);

// ---------------------------------------------------------------------------
// Validation and split handling
// ---------------------------------------------------------------------------

// Collects every invariant violation; an empty report means the pool and
// labels are usable by the search.
ValidationReport validate_pool(const CandidateFeaturePool& pool, const LabelSet& labels);

// Indices of masked-true residues belonging to the split, in residue order.
std::vector<std::size_t> split_rows(const LabelSet& labels, Split split);

// One-hot target matrix (n_split x 2): row (1,0) for ordered, (0,1) for
// disordered. Throws StoreError(bad_labels) when the split is empty after
// masking.
Matrix one_hot_targets(const LabelSet& labels, Split split);

}  // namespace fusionsearch
