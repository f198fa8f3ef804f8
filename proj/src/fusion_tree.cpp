#include "fusionsearch/fusion_tree.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace fusionsearch {

const char* to_string(FusionOp op) {
    switch (op) {
        case FusionOp::add: return "Add";
        case FusionOp::mul: return "Mul";
        case FusionOp::max: return "Max";
        case FusionOp::min: return "Min";
    }
    return "?";
}

FusionOp fusion_op_from_string(const std::string& name) {
    if (name == "Add") return FusionOp::add;
    if (name == "Mul") return FusionOp::mul;
    if (name == "Max") return FusionOp::max;
    if (name == "Min") return FusionOp::min;
    throw std::invalid_argument("unknown fusion operator '" + name + "'");
}

FusionOp fusion_op_from_code(int code) {
    if (code < 0 || code >= kFusionOpCount) {
        throw std::invalid_argument("fusion operator code out of range: " + std::to_string(code));
    }
    return static_cast<FusionOp>(code);
}

void check_genome(const Genome& genome, std::size_t feature_count, std::size_t n_max) {
    const std::size_t n = genome.n();
    if (n < 1 || n > n_max) {
        throw std::invalid_argument("genome length " + std::to_string(n) + " outside [1, " +
                                    std::to_string(n_max) + "]");
    }
    if (genome.q.size() != n - 1) {
        throw std::invalid_argument("genome has " + std::to_string(genome.q.size()) +
                                    " operators, expected " + std::to_string(n - 1));
    }
    if (genome.a.size() != 2 * (n - 1)) {
        throw std::invalid_argument("genome has " + std::to_string(genome.a.size()) +
                                    " weights, expected " + std::to_string(2 * (n - 1)));
    }
    for (int idx : genome.s) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= feature_count) {
            throw std::invalid_argument("feature index " + std::to_string(idx) +
                                        " outside pool of size " + std::to_string(feature_count));
        }
    }
    for (double w : genome.a) {
        if (!std::isfinite(w)) {
            throw std::invalid_argument("genome weight is not finite");
        }
    }
}

Matrix decode_fuse_rows(const Genome& genome, const CandidateFeaturePool& pool,
                        const std::vector<std::size_t>& rows) {
    check_genome(genome, pool.feature_count(), genome.n());

    auto feature_rows = [&](int idx) {
        return gather_rows(pool.features[static_cast<std::size_t>(idx)].data, rows);
    };

    Matrix acc = feature_rows(genome.s[0]);
    for (std::size_t t = 1; t < genome.n(); ++t) {
        const Matrix operand = feature_rows(genome.s[t]);
        if (operand.cols != acc.cols) {
            throw EvalError("operand dimension " + std::to_string(operand.cols) +
                            " does not match accumulator dimension " + std::to_string(acc.cols));
        }
        const double wa = genome.a[2 * (t - 1)];
        const double wb = genome.a[2 * (t - 1) + 1];
        const FusionOp op = genome.q[t - 1];
        for (std::size_t i = 0; i < acc.values.size(); ++i) {
            acc.values[i] = apply_op(op, wa * acc.values[i], wb * operand.values[i]);
        }
    }
    if (!acc.all_finite()) {
        throw EvalError("fusion produced a non-finite value");
    }
    return acc;
}

Matrix decode_fuse(const Genome& genome, const CandidateFeaturePool& pool,
                   const LabelSet& labels, Split split) {
    const auto rows = split_rows(labels, split);
    if (rows.empty()) {
        throw EvalError(std::string("split '") + to_string(split) + "' is empty after masking");
    }
    return decode_fuse_rows(genome, pool, rows);
}

namespace {

// In-place Cholesky solve of A X = B for symmetric positive definite A.
Matrix cholesky_solve(Matrix a, Matrix b) {
    const std::size_t n = a.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
        // Ridge keeps a well-conditioned system positive definite, so a bad
        // pivot always means this descriptor degenerated numerically.
        if (!(diag > 0.0)) {
            throw EvalError("normal-equations matrix is not positive definite");
        }
        diag = std::sqrt(diag);
        a(j, j) = diag;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
            a(i, j) = v / diag;
        }
    }
    // Forward then backward substitution, one right-hand side per column.
    for (std::size_t c = 0; c < b.cols; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = b(i, c);
            for (std::size_t k = 0; k < i; ++k) v -= a(i, k) * b(k, c);
            b(i, c) = v / a(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double v = b(i, c);
            for (std::size_t k = i + 1; k < n; ++k) v -= a(k, i) * b(k, c);
            b(i, c) = v / a(i, i);
        }
    }
    return b;
}

}  // namespace

LinearHead fit_head(const Matrix& descriptor, const Matrix& targets, double ridge) {
    if (descriptor.rows != targets.rows) {
        throw std::invalid_argument("descriptor and targets disagree on row count");
    }
    if (descriptor.rows == 0 || targets.cols != 2) {
        throw std::invalid_argument("fit_head needs at least one row and exactly two targets");
    }
    if (!(ridge > 0.0)) {
        throw std::invalid_argument("ridge must be positive");
    }
    if (!descriptor.all_finite()) {
        throw EvalError("descriptor contains a non-finite value");
    }

    const std::size_t m = descriptor.rows;
    const std::size_t d = descriptor.cols;

    // Normal equations over the augmented design [X|1]; only the d feature
    // rows of the Gram matrix carry the ridge, the bias stays unpenalized.
    Matrix gram(d + 1, d + 1);
    Matrix rhs(d + 1, 2);
    for (std::size_t r = 0; r < m; ++r) {
        const double* x = descriptor.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i; j < d; ++j) {
                gram(i, j) += x[i] * x[j];
            }
            gram(i, d) += x[i];
            rhs(i, 0) += x[i] * targets(r, 0);
            rhs(i, 1) += x[i] * targets(r, 1);
        }
        rhs(d, 0) += targets(r, 0);
        rhs(d, 1) += targets(r, 1);
    }
    gram(d, d) = static_cast<double>(m);
    for (std::size_t i = 0; i < d; ++i) {
        gram(i, i) += ridge;
        for (std::size_t j = i + 1; j <= d; ++j) {
            gram(j, i) = gram(i, j);
        }
    }

    LinearHead head;
    head.ridge = ridge;
    head.weights = cholesky_solve(std::move(gram), std::move(rhs));
    if (!head.weights.all_finite()) {
        throw EvalError("head fit produced non-finite weights");
    }
    return head;
}

Matrix predict_probs(const LinearHead& head, const Matrix& descriptor) {
    if (head.weights.rows != descriptor.cols + 1 || head.weights.cols != 2) {
        throw std::invalid_argument("head shape does not match descriptor");
    }
    Matrix probs(descriptor.rows, 2);
    for (std::size_t r = 0; r < descriptor.rows; ++r) {
        const double* x = descriptor.row(r);
        double z0 = head.weights(descriptor.cols, 0);
        double z1 = head.weights(descriptor.cols, 1);
        for (std::size_t j = 0; j < descriptor.cols; ++j) {
            z0 += x[j] * head.weights(j, 0);
            z1 += x[j] * head.weights(j, 1);
        }
        const double zmax = z0 > z1 ? z0 : z1;
        const double e0 = std::exp(z0 - zmax);
        const double e1 = std::exp(z1 - zmax);
        probs(r, 0) = e0 / (e0 + e1);
        probs(r, 1) = e1 / (e0 + e1);
    }
    return probs;
}

std::vector<double> predict(const LinearHead& head, const Matrix& descriptor) {
    const Matrix probs = predict_probs(head, descriptor);
    std::vector<double> disorder(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        disorder[r] = probs(r, 1);
    }
    return disorder;
}

Genome random_genome(Rng& rng, std::size_t feature_count, std::size_t n_max) {
    if (feature_count == 0 || n_max == 0) {
        throw std::invalid_argument("random_genome needs feature_count >= 1 and n_max >= 1");
    }
    const std::size_t n = 1 + static_cast<std::size_t>(uniform_below(rng, n_max));
    Genome g;
    g.s.resize(n);
    for (auto& idx : g.s) {
        idx = static_cast<int>(uniform_below(rng, feature_count));
    }
    g.q.resize(n - 1);
    for (auto& op : g.q) {
        op = static_cast<FusionOp>(uniform_below(rng, kFusionOpCount));
    }
    g.a.resize(2 * (n - 1));
    for (auto& w : g.a) {
        w = uniform_real(rng, 0.1, 2.0);
    }
    return g;
}

std::string canonical_key(const Genome& genome) {
    std::string key = "s";
    for (int idx : genome.s) {
        key += ':';
        key += std::to_string(idx);
    }
    key += "|q";
    for (FusionOp op : genome.q) {
        key += ':';
        key += std::to_string(static_cast<int>(op));
    }
    key += "|a";
    char buf[64];
    for (double w : genome.a) {
        // nearbyint keeps huge weights printable where an integer cast
        // would overflow.
        std::snprintf(buf, sizeof(buf), "%.0f", std::nearbyint(w * 1e9));
        key += ':';
        key += buf;
    }
    return key;
}

}  // namespace fusionsearch
