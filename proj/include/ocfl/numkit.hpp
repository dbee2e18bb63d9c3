#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace ocfl {

// Flattened model parametrisation (or a per-round parameter delta). Entries
// are expected to be finite; dimension is the vector length.
using ParameterVector = std::vector<double>;

double dot(const ParameterVector& a, const ParameterVector& b);
double l2_norm(const ParameterVector& v);

// Cosine of the angle between a and b, clamped to [-1, 1] to absorb
// floating-point overshoot. Throws DimensionMismatchError/ZeroVectorError.
double cosine_similarity(const ParameterVector& a, const ParameterVector& b);

// 1 - cosine_similarity; ranges over [0, 2].
double cosine_distance(const ParameterVector& a, const ParameterVector& b);

// Symmetric matrix of pairwise cosine distances with an exactly-zero
// diagonal. Each unordered pair is computed once and mirrored, so symmetry
// holds bit-for-bit.
class DivergenceMatrix {
public:
    DivergenceMatrix() : n_(0) {}
    explicit DivergenceMatrix(std::size_t n) : n_(n), entries_(n * n, 0.0) {}

    std::size_t size() const { return n_; }

    double at(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }

    // Sets entry (i, j) and its mirror (j, i). Setting a diagonal entry to a
    // non-zero value is a programming error and is ignored for i == j.
    void set(std::size_t i, std::size_t j, double value) {
        if (i == j) return;
        entries_[i * n_ + j] = value;
        entries_[j * n_ + i] = value;
    }

    const std::vector<double>& flat() const { return entries_; }

private:
    std::size_t n_;
    std::vector<double> entries_;  // row-major n x n
};

DivergenceMatrix divergence_matrix(const std::vector<ParameterVector>& deltas);

// Entrywise p-norm over all n^2 entries (both symmetric halves contribute,
// matching the double sum in the defining formula). Requires p >= 1.
double matrix_p_norm(const DivergenceMatrix& m, double p);

// (n(n-1) * 2^p)^(1/p): the formal supremum of matrix_p_norm over valid
// divergence matrices of size n. Requires n >= 2, p >= 1.
double max_divergence_constant(std::size_t n, double p);

// Scaling-constant policy for the temperature function. Because cosine
// distance is non-negative, both published constants collapse to
// max_divergence_constant; the enum is kept so alternative policies can be
// added without touching call sites.
enum class LambdaMode { MaximalDivergence, Normalising };

// Clustering temperature T(m) = matrix_p_norm(m, p) / lambda, in [0, 1].
double temperature(const DivergenceMatrix& m, double p, LambdaMode mode);

// State of the one-shot clustering trigger. The previous temperature starts
// at +infinity so the first observation can never fire. window == 1 gives the
// plain round-over-round rule; window == w > 1 compares the mean of the last
// w temperatures against the mean of the w before them (both windows must be
// fully populated before the trigger can fire).
struct TemperatureState {
    double t_prev = std::numeric_limits<double>::infinity();
    double t_curr = std::numeric_limits<double>::quiet_NaN();
    double p = 2.0;
    LambdaMode lambda_mode = LambdaMode::MaximalDivergence;
    bool fired = false;
    std::size_t window = 1;
    std::vector<double> history;
};

// Records the temperature of m into the state and evaluates the trigger rule.
// Returns true (and latches state.fired) when the rule first holds. Throws
// AlreadyFiredError when called after firing.
bool update_and_test_trigger(TemperatureState& state, const DivergenceMatrix& m);

}  // namespace ocfl
