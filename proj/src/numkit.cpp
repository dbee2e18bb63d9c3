#include "ocfl/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ocfl/errors.hpp"

namespace ocfl {

double dot(const ParameterVector& a, const ParameterVector& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatchError("dot: dimensions differ (" + std::to_string(a.size()) +
                                     " vs " + std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(const ParameterVector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double cosine_similarity(const ParameterVector& a, const ParameterVector& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatchError("cosine_similarity: dimensions differ (" +
                                     std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()) + ")");
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw ZeroVectorError("cosine_similarity: zero-norm vector");
    }
    const double sim = dot(a, b) / (na * nb);
    return std::clamp(sim, -1.0, 1.0);
}

double cosine_distance(const ParameterVector& a, const ParameterVector& b) {
    return 1.0 - cosine_similarity(a, b);
}

DivergenceMatrix divergence_matrix(const std::vector<ParameterVector>& deltas) {
    const std::size_t n = deltas.size();
    if (n < 2) {
        throw DimensionMismatchError("divergence_matrix: need at least 2 vectors, got " +
                                     std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (deltas[i].size() != deltas[0].size()) {
            throw DimensionMismatchError("divergence_matrix: vector " + std::to_string(i) +
                                         " has dimension " + std::to_string(deltas[i].size()) +
                                         ", expected " + std::to_string(deltas[0].size()));
        }
        if (l2_norm(deltas[i]) == 0.0) {
            throw ZeroVectorError("divergence_matrix: zero-norm delta for client " +
                                  std::to_string(i));
        }
    }
    DivergenceMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            m.set(i, j, cosine_distance(deltas[i], deltas[j]));
        }
    }
    return m;
}

double matrix_p_norm(const DivergenceMatrix& m, double p) {
    if (p < 1.0) throw std::invalid_argument("matrix_p_norm: p must be >= 1");
    double acc = 0.0;
    for (double e : m.flat()) acc += std::pow(std::abs(e), p);
    return std::pow(acc, 1.0 / p);
}

double max_divergence_constant(std::size_t n, double p) {
    if (n < 2) throw std::invalid_argument("max_divergence_constant: n must be >= 2");
    if (p < 1.0) throw std::invalid_argument("max_divergence_constant: p must be >= 1");
    const double count = static_cast<double>(n) * static_cast<double>(n - 1);
    return std::pow(count * std::pow(2.0, p), 1.0 / p);
}

double temperature(const DivergenceMatrix& m, double p, LambdaMode mode) {
    // Both published scaling constants bound the entrywise norm by its
    // attainable maximum, so the two modes currently share one formula.
    (void)mode;
    const double lambda = max_divergence_constant(m.size(), p);
    return matrix_p_norm(m, p) / lambda;
}

bool update_and_test_trigger(TemperatureState& state, const DivergenceMatrix& m) {
    if (state.fired) {
        throw AlreadyFiredError("update_and_test_trigger: trigger already fired");
    }
    state.t_prev = state.history.empty() ? std::numeric_limits<double>::infinity()
                                         : state.t_curr;
    state.t_curr = temperature(m, state.p, state.lambda_mode);
    state.history.push_back(state.t_curr);

    bool fire = false;
    const std::size_t w = state.window == 0 ? 1 : state.window;
    if (w == 1) {
        fire = state.t_curr >= state.t_prev;
    } else if (state.history.size() >= 2 * w) {
        double recent = 0.0;
        double older = 0.0;
        const std::size_t sz = state.history.size();
        for (std::size_t i = 0; i < w; ++i) {
            recent += state.history[sz - 1 - i];
            older += state.history[sz - 1 - w - i];
        }
        fire = recent / static_cast<double>(w) >= older / static_cast<double>(w);
    }
    if (fire) state.fired = true;
    return fire;
}

}  // namespace ocfl
