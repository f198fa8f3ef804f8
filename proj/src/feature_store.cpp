#include "fusionsearch/feature_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fusionsearch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'P', 'M', '1'};

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void write_u32_le(unsigned char* p, std::uint32_t v) {
    p[0] = static_cast<unsigned char>(v & 0xff);
    p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
    p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
    p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

float f32_from_le(const unsigned char* p) {
    const std::uint32_t bits = read_u32_le(p);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

void f32_to_le(unsigned char* p, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    write_u32_le(p, bits);
}

[[noreturn]] void missing(const fs::path& p) {
    throw StoreError(StoreErrc::missing_file, "missing file: " + p.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw StoreError(StoreErrc::bad_labels, "unknown split tag '" + s + "'");
}

ValidationError::ValidationError(ValidationReport report)
    : std::runtime_error("pool/label validation failed with " +
                         std::to_string(report.issues.size()) + " issue(s)"),
      report_(std::move(report)) {}

std::size_t CandidateFeaturePool::common_dim() const {
    if (features.empty()) return 0;
    const std::size_t d = features.front().dim();
    for (const auto& f : features) {
        if (f.dim() != d) return 0;
    }
    return d;
}

Matrix load_matrix_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) missing(file);

    unsigned char header[16];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
        throw StoreError(StoreErrc::io_failure, "truncated header in " + file.string());
    }
    if (std::memcmp(header, kMagic, 4) != 0) {
        throw StoreError(StoreErrc::bad_magic, "bad magic in " + file.string());
    }
    const std::uint32_t n_res = read_u32_le(header + 4);
    const std::uint32_t dim = read_u32_le(header + 8);
    if (n_res == 0 || dim == 0) {
        throw StoreError(StoreErrc::dimension_mismatch,
                         "zero dimension in header of " + file.string());
    }

    Matrix m(n_res, dim);
    std::vector<unsigned char> buf(static_cast<std::size_t>(dim) * 4);
    for (std::uint32_t r = 0; r < n_res; ++r) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw StoreError(StoreErrc::io_failure, "truncated payload in " + file.string());
        }
        double* dst = m.row(r);
        for (std::uint32_t c = 0; c < dim; ++c) {
            dst[c] = static_cast<double>(f32_from_le(buf.data() + static_cast<std::size_t>(c) * 4));
        }
    }
    return m;
}

void save_matrix_file(const fs::path& file, const Matrix& m) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError(StoreErrc::io_failure, "cannot open " + file.string());

    unsigned char header[16] = {};
    std::memcpy(header, kMagic, 4);
    write_u32_le(header + 4, static_cast<std::uint32_t>(m.rows));
    write_u32_le(header + 8, static_cast<std::uint32_t>(m.cols));
    write_u32_le(header + 12, 0);
    out.write(reinterpret_cast<const char*>(header), sizeof(header));

    std::vector<unsigned char> buf(m.cols * 4);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* src = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) {
            f32_to_le(buf.data() + c * 4, static_cast<float>(src[c]));
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw StoreError(StoreErrc::io_failure, "write failed for " + file.string());
}

namespace {

std::vector<std::uint8_t> load_mask_file(const fs::path& file, std::size_t n_res) {
    std::ifstream in(file);
    if (!in) missing(file);
    std::vector<std::uint8_t> mask;
    mask.reserve(n_res);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "0") {
            mask.push_back(0);
        } else if (line == "1") {
            mask.push_back(1);
        } else {
            throw StoreError(StoreErrc::bad_mask,
                             "mask line must be 0 or 1, got '" + line + "' in " + file.string());
        }
    }
    if (mask.size() != n_res) {
        throw StoreError(StoreErrc::bad_mask,
                         "mask length " + std::to_string(mask.size()) + " does not match n_res " +
                             std::to_string(n_res) + " in " + file.string());
    }
    return mask;
}

}  // namespace

CandidateFeaturePool load_pool(const fs::path& dir) {
    const fs::path manifest_path = dir / "pool.json";
    std::ifstream in(manifest_path);
    if (!in) missing(manifest_path);

    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest,
                         "cannot parse " + manifest_path.string() + ": " + e.what());
    }

    CandidateFeaturePool pool;
    try {
        pool.version = manifest.at("version").get<int>();
        const auto n_res = manifest.at("n_res").get<std::uint64_t>();
        const auto mask_file = manifest.at("mask_file").get<std::string>();
        const auto& feats = manifest.at("features");
        if (!feats.is_array() || feats.empty()) {
            throw StoreError(StoreErrc::bad_manifest,
                             "manifest must list at least one feature: " + manifest_path.string());
        }
        if (n_res == 0) {
            throw StoreError(StoreErrc::bad_manifest, "n_res must be positive");
        }

        for (const auto& entry : feats) {
            FeatureMatrix fm;
            fm.name = entry.at("name").get<std::string>();
            const auto declared_dim = entry.at("dim").get<std::uint64_t>();
            const fs::path file = dir / entry.at("file").get<std::string>();
            fm.data = load_matrix_file(file);
            if (fm.data.rows != n_res) {
                throw StoreError(StoreErrc::dimension_mismatch,
                                 "feature '" + fm.name + "': file has " +
                                     std::to_string(fm.data.rows) + " rows, manifest says n_res=" +
                                     std::to_string(n_res));
            }
            if (fm.data.cols != declared_dim) {
                throw StoreError(StoreErrc::dimension_mismatch,
                                 "feature '" + fm.name + "': file has dim " +
                                     std::to_string(fm.data.cols) + ", manifest says " +
                                     std::to_string(declared_dim));
            }
            for (std::size_t r = 0; r < fm.data.rows; ++r) {
                const double* row = fm.data.row(r);
                for (std::size_t c = 0; c < fm.data.cols; ++c) {
                    if (!std::isfinite(row[c])) {
                        throw StoreError(StoreErrc::non_finite_entry,
                                         "feature '" + fm.name + "': non-finite entry at (" +
                                             std::to_string(r) + "," + std::to_string(c) + ")");
                    }
                }
            }
            pool.features.push_back(std::move(fm));
        }
        pool.residue_mask = load_mask_file(dir / mask_file, n_res);
    } catch (const json::exception& e) {
        throw StoreError(StoreErrc::bad_manifest,
                         "malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    return pool;
}

void save_pool(const fs::path& dir, const CandidateFeaturePool& pool) {
    if (pool.features.empty()) {
        throw StoreError(StoreErrc::bad_manifest, "refusing to save a pool with no features");
    }
    fs::create_directories(dir);

    json manifest;
    manifest["version"] = pool.version;
    manifest["n_res"] = pool.n_res();
    manifest["mask_file"] = "mask.txt";
    manifest["features"] = json::array();
    for (const auto& f : pool.features) {
        const std::string file = f.name + ".fpm";
        manifest["features"].push_back({{"name", f.name}, {"dim", f.dim()}, {"file", file}});
        save_matrix_file(dir / file, f.data);
    }

    std::ofstream out(dir / "pool.json");
    if (!out) throw StoreError(StoreErrc::io_failure, "cannot open " + (dir / "pool.json").string());
    out << manifest.dump(2) << "\n";

    std::ofstream mask_out(dir / "mask.txt");
    if (!mask_out) throw StoreError(StoreErrc::io_failure, "cannot open " + (dir / "mask.txt").string());
    for (std::uint8_t m : pool.residue_mask) {
        mask_out << (m ? '1' : '0') << '\n';
    }
}

LabelSet load_labels(const fs::path& file) {
    std::ifstream in(file);
    if (!in) missing(file);

    std::string line;
    if (!std::getline(in, line)) {
        throw StoreError(StoreErrc::bad_labels, "empty labels file " + file.string());
    }
    {
        auto header = split_csv_line(line);
        if (header != std::vector<std::string>{"index", "label", "mask", "split"}) {
            throw StoreError(StoreErrc::bad_labels,
                             "labels header must be index,label,mask,split in " + file.string());
        }
    }

    LabelSet set;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 4) {
            throw StoreError(StoreErrc::bad_labels,
                             "labels row " + std::to_string(expected) + " has " +
                                 std::to_string(fields.size()) + " fields");
        }
        std::size_t index = 0;
        try {
            index = static_cast<std::size_t>(std::stoull(fields[0]));
        } catch (const std::exception&) {
            throw StoreError(StoreErrc::bad_labels, "bad index '" + fields[0] + "'");
        }
        if (index != expected) {
            throw StoreError(StoreErrc::bad_labels,
                             "indices must be 0..n-1 in order; expected " +
                                 std::to_string(expected) + ", got " + fields[0]);
        }
        if (fields[1] != "0" && fields[1] != "1") {
            throw StoreError(StoreErrc::bad_labels, "label must be 0 or 1, got '" + fields[1] + "'");
        }
        if (fields[2] != "0" && fields[2] != "1") {
            throw StoreError(StoreErrc::bad_labels, "mask must be 0 or 1, got '" + fields[2] + "'");
        }
        set.labels.push_back(fields[1] == "1" ? 1 : 0);
        set.mask.push_back(fields[2] == "1" ? 1 : 0);
        set.split.push_back(split_from_string(fields[3]));
        ++expected;
    }
    if (set.labels.empty()) {
        throw StoreError(StoreErrc::bad_labels, "labels file has no rows: " + file.string());
    }
    return set;
}

void save_labels(const fs::path& file, const LabelSet& labels) {
    std::ofstream out(file);
    if (!out) throw StoreError(StoreErrc::io_failure, "cannot open " + file.string());
    out << "index,label,mask,split\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << i << ',' << (labels.labels[i] ? '1' : '0') << ',' << (labels.mask[i] ? '1' : '0')
            << ',' << to_string(labels.split[i]) << '\n';
    }
    if (!out) throw StoreError(StoreErrc::io_failure, "write failed for " + file.string());
}

ValidationReport validate_pool(const CandidateFeaturePool& pool, const LabelSet& labels) {
    ValidationReport report;
    auto add = [&report](std::string msg) { report.issues.push_back(std::move(msg)); };

    if (pool.features.empty()) {
        add("pool has no features");
        return report;
    }

    const std::size_t n_res = pool.n_res();
    if (n_res == 0) add("pool n_res is zero");

    for (const auto& f : pool.features) {
        if (f.data.rows != n_res) {
            add("feature '" + f.name + "' has " + std::to_string(f.data.rows) +
                " rows, expected " + std::to_string(n_res));
        }
        if (f.dim() == 0) add("feature '" + f.name + "' has zero columns");
        for (std::size_t r = 0; r < f.data.rows; ++r) {
            const double* row = f.data.row(r);
            for (std::size_t c = 0; c < f.data.cols; ++c) {
                if (!std::isfinite(row[c])) {
                    add("feature '" + f.name + "' has non-finite entry at (" + std::to_string(r) +
                        "," + std::to_string(c) + ")");
                }
            }
        }
    }
    if (pool.common_dim() == 0) {
        add("features do not share a common dimension");
    }

    if (pool.residue_mask.size() != n_res) {
        add("residue mask length " + std::to_string(pool.residue_mask.size()) +
            " does not match n_res " + std::to_string(n_res));
    }
    if (labels.size() != n_res) {
        add("label set length " + std::to_string(labels.size()) + " does not match n_res " +
            std::to_string(n_res));
    }
    if (labels.mask.size() == pool.residue_mask.size() && labels.mask != pool.residue_mask) {
        add("label mask column disagrees with the pool residue mask");
    }

    // Each split needs both classes among masked residues, otherwise AUC on
    // that split is undefined.
    if (labels.size() == n_res) {
        for (Split s : {Split::train, Split::val, Split::test}) {
            std::size_t pos = 0, neg = 0;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (!labels.mask[i] || labels.split[i] != s) continue;
                (labels.labels[i] ? pos : neg) += 1;
            }
            if (pos + neg == 0) {
                add(std::string("split '") + to_string(s) + "' is empty after masking");
            } else if (pos == 0) {
                add(std::string("split '") + to_string(s) + "' has no positive residues");
            } else if (neg == 0) {
                add(std::string("split '") + to_string(s) + "' has no negative residues");
            }
        }
    }
    return report;
}

std::vector<std::size_t> split_rows(const LabelSet& labels, Split split) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels.mask[i] && labels.split[i] == split) rows.push_back(i);
    }
    return rows;
}

Matrix one_hot_targets(const LabelSet& labels, Split split) {
    const auto rows = split_rows(labels, split);
    if (rows.empty()) {
        throw StoreError(StoreErrc::bad_labels,
                         std::string("split '") + to_string(split) + "' is empty after masking");
    }
    Matrix targets(rows.size(), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (labels.labels[rows[i]]) {
            targets(i, 1) = 1.0;
        } else {
            targets(i, 0) = 1.0;
        }
    }
    return targets;
}

}  // namespace fusionsearch
