#pragma once

#include <string>
#include <vector>

#include "fusionsearch/feature_store.hpp"
#include "fusionsearch/matrix.hpp"
#include "fusionsearch/rng.hpp"

namespace fusionsearch {

// Element-wise operators combining two scaled operands. Integer codes are
// part of the on-disk genome format and must not be reordered.
enum class FusionOp : int { add = 0, mul = 1, max = 2, min = 3 };

constexpr int kFusionOpCount = 4;

const char* to_string(FusionOp op);
FusionOp fusion_op_from_string(const std::string& name);
FusionOp fusion_op_from_code(int code);

inline double apply_op(FusionOp op, double lhs, double rhs) {
    switch (op) {
        case FusionOp::add: return lhs + rhs;
        case FusionOp::mul: return lhs * rhs;
        case FusionOp::max: return lhs > rhs ? lhs : rhs;
        case FusionOp::min: return lhs < rhs ? lhs : rhs;
    }
    return 0.0;
}

// Fusion-tree genome: feature picks s (length n, repeats allowed), operators
// q (length n-1), scale weights a (length 2(n-1)).
struct Genome {
    std::vector<int> s;
    std::vector<FusionOp> q;
    std::vector<double> a;

    std::size_t n() const { return s.size(); }
    bool operator==(const Genome&) const = default;
};

// Throws std::invalid_argument unless the length relations hold, every weight
// is finite, and every feature index lies in [0, feature_count).
void check_genome(const Genome& genome, std::size_t feature_count, std::size_t n_max);

// Raised when fusion produces a non-finite value (e.g. Mul overflow); the
// search maps it to worst fitness instead of aborting.
class EvalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Left fold over the genome, restricted to the masked rows of one split:
//   c_1 = phi_{s_1}
//   c_t = q_{t-1}( a_{2(t-2)} * c_{t-1}, a_{2(t-2)+1} * phi_{s_t} )
// n=1 returns phi_{s_1} unscaled. Throws EvalError on non-finite output.
Matrix decode_fuse(const Genome& genome, const CandidateFeaturePool& pool,
                   const LabelSet& labels, Split split);

// Same fold over an explicit row subset (already masked).
Matrix decode_fuse_rows(const Genome& genome, const CandidateFeaturePool& pool,
                        const std::vector<std::size_t>& rows);

// Two-class linear readout fit by ridge least squares. weights is
// (d+1) x 2 with the bias in the last row.
struct LinearHead {
    Matrix weights;
    double ridge = 0.0;
};

// Solves argmin |[X|1]W - Y|^2 + ridge*|W|^2 (bias row unpenalized) through
// the normal equations with a Cholesky factorization; ridge > 0 keeps the
// system positive definite.
LinearHead fit_head(const Matrix& descriptor, const Matrix& targets, double ridge);

// Row-wise softmax over logits [x|1]*W; returns the m x 2 probability matrix.
Matrix predict_probs(const LinearHead& head, const Matrix& descriptor);

// Class-1 (disorder) probability per row.
std::vector<double> predict(const LinearHead& head, const Matrix& descriptor);

// n ~ U{1..n_max}, s entries U{0..T-1}, q uniform over the 4 operators,
// weights U[0.1, 2].
Genome random_genome(Rng& rng, std::size_t feature_count, std::size_t n_max);

// Memoization key: s and q verbatim, weights quantized to 1e-9 so that
// float noise below the quantum does not split cache entries.
std::string canonical_key(const Genome& genome);

}  // namespace fusionsearch
