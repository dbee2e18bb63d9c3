#include "ocfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ocfl/errors.hpp"
#include "ocfl/rng.hpp"

namespace ocfl {

namespace {

double activate(double x, Activation a) {
    return a == Activation::ReLU ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

double activate_grad_from_out(double pre, double out, Activation a) {
    // ReLU's derivative from the pre-activation; tanh's from its output.
    return a == Activation::ReLU ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - out * out;
}

// Dense per-layer pass: y = W x + b.
void affine(const std::vector<double>& w, const std::vector<double>& b, const double* x,
            std::size_t in, std::size_t out, double* y) {
    for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        const double* wrow = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
        y[o] = acc;
    }
}

void softmax_inplace(std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (auto& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : v) x /= sum;
}

struct ForwardTrace {
    // Per layer: pre-activations and activated outputs (last layer holds
    // logits; probabilities are separate).
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;
    std::vector<double> probs;
};

ForwardTrace forward_traced(const MlpModel& m, const double* x) {
    ForwardTrace tr;
    const std::size_t layers = m.weights.size();
    tr.pre.resize(layers);
    tr.act.resize(layers);
    const double* cur = x;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = m.layer_dims[l];
        const std::size_t out = m.layer_dims[l + 1];
        tr.pre[l].resize(out);
        affine(m.weights[l], m.biases[l], cur, in, out, tr.pre[l].data());
        tr.act[l] = tr.pre[l];
        if (l + 1 < layers) {
            for (auto& v : tr.act[l]) v = activate(v, m.activation);
        }
        cur = tr.act[l].data();
    }
    tr.probs = tr.act.back();
    softmax_inplace(tr.probs);
    return tr;
}

}  // namespace

MlpModel MlpModel::init(const std::vector<std::size_t>& layer_dims, Activation activation,
                        std::uint64_t seed) {
    if (layer_dims.size() < 2) {
        throw DimensionMismatchError("MlpModel::init: need at least input and output dims");
    }
    MlpModel m;
    m.layer_dims = layer_dims;
    m.activation = activation;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t in = layer_dims[l];
        const std::size_t out = layer_dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in));
        std::vector<double> w(out * in);
        for (auto& v : w) v = rng.uniform(-limit, limit);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    return m;
}

std::size_t MlpModel::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

ParameterVector flatten(const MlpModel& m) {
    ParameterVector v;
    v.reserve(m.param_count());
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        v.insert(v.end(), m.weights[l].begin(), m.weights[l].end());
        v.insert(v.end(), m.biases[l].begin(), m.biases[l].end());
    }
    return v;
}

void unflatten(MlpModel& m, const ParameterVector& params) {
    if (params.size() != m.param_count()) {
        throw DimensionMismatchError("unflatten: expected " + std::to_string(m.param_count()) +
                                     " parameters, got " + std::to_string(params.size()));
    }
    std::size_t pos = 0;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        std::copy_n(params.begin() + pos, m.weights[l].size(), m.weights[l].begin());
        pos += m.weights[l].size();
        std::copy_n(params.begin() + pos, m.biases[l].size(), m.biases[l].begin());
        pos += m.biases[l].size();
    }
}

std::vector<double> forward(const MlpModel& m, const LocalDataset& batch) {
    if (batch.feature_dim != m.input_dim()) {
        throw DimensionMismatchError("forward: batch feature dim " +
                                     std::to_string(batch.feature_dim) + " != model input dim " +
                                     std::to_string(m.input_dim()));
    }
    const std::size_t k = m.class_count();
    std::vector<double> out(batch.size() * k);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        ForwardTrace tr = forward_traced(m, batch.row(r));
        std::copy(tr.probs.begin(), tr.probs.end(), out.begin() + r * k);
    }
    return out;
}

std::vector<double> forward_one(const MlpModel& m, const std::vector<double>& x) {
    if (x.size() != m.input_dim()) {
        throw DimensionMismatchError("forward_one: input dim " + std::to_string(x.size()) +
                                     " != model input dim " + std::to_string(m.input_dim()));
    }
    return forward_traced(m, x.data()).probs;
}

std::vector<int> predict(const MlpModel& m, const LocalDataset& batch) {
    const std::vector<double> probs = forward(m, batch);
    const std::size_t k = m.class_count();
    std::vector<int> preds(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const double* row = probs.data() + r * k;
        preds[r] = static_cast<int>(std::max_element(row, row + k) - row);
    }
    return preds;
}

LossGrad loss_and_gradient(const MlpModel& m, const LocalDataset& batch, double weight_decay) {
    if (batch.feature_dim != m.input_dim()) {
        throw DimensionMismatchError("loss_and_gradient: batch feature dim mismatch");
    }
    if (batch.size() == 0) throw EmptyDatasetError("loss_and_gradient: empty batch");
    const std::size_t k = m.class_count();
    for (int y : batch.labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw InvalidLabelError("loss_and_gradient: label " + std::to_string(y) +
                                    " outside [0, " + std::to_string(k) + ")");
        }
    }

    const std::size_t layers = m.weights.size();
    std::vector<std::vector<double>> gw(layers);
    std::vector<std::vector<double>> gb(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        gw[l].assign(m.weights[l].size(), 0.0);
        gb[l].assign(m.biases[l].size(), 0.0);
    }

    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const double* x = batch.row(r);
        ForwardTrace tr = forward_traced(m, x);
        const int y = batch.labels[r];
        loss += -std::log(std::max(tr.probs[static_cast<std::size_t>(y)], 1e-300));

        // dL/dlogit = softmax - onehot, scaled by 1/n for the batch mean.
        std::vector<double> delta = tr.probs;
        delta[static_cast<std::size_t>(y)] -= 1.0;
        for (auto& d : delta) d *= inv_n;

        for (std::size_t l = layers; l-- > 0;) {
            const std::size_t in = m.layer_dims[l];
            const std::size_t out = m.layer_dims[l + 1];
            const double* input = l == 0 ? x : tr.act[l - 1].data();
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                double* gwrow = gw[l].data() + o * in;
                for (std::size_t i = 0; i < in; ++i) gwrow[i] += d * input[i];
                gb[l][o] += d;
            }
            if (l == 0) break;
            std::vector<double> prev(in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                const double* wrow = m.weights[l].data() + o * in;
                for (std::size_t i = 0; i < in; ++i) prev[i] += d * wrow[i];
            }
            for (std::size_t i = 0; i < in; ++i) {
                prev[i] *= activate_grad_from_out(tr.pre[l - 1][i], tr.act[l - 1][i],
                                                  m.activation);
            }
            delta = std::move(prev);
        }
    }
    loss *= inv_n;

    LossGrad out;
    out.grad.reserve(m.param_count());
    for (std::size_t l = 0; l < layers; ++l) {
        out.grad.insert(out.grad.end(), gw[l].begin(), gw[l].end());
        out.grad.insert(out.grad.end(), gb[l].begin(), gb[l].end());
    }
    if (weight_decay > 0.0) {
        const ParameterVector theta = flatten(m);
        double penalty = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            out.grad[i] += weight_decay * theta[i];
            penalty += theta[i] * theta[i];
        }
        loss += 0.5 * weight_decay * penalty;
    }
    out.loss = loss;
    return out;
}

std::vector<double> input_logit_gradient(const MlpModel& m, const std::vector<double>& x,
                                         int target) {
    if (x.size() != m.input_dim()) {
        throw DimensionMismatchError("input_logit_gradient: input dim mismatch");
    }
    if (target < 0 || static_cast<std::size_t>(target) >= m.class_count()) {
        throw InvalidLabelError("input_logit_gradient: target " + std::to_string(target) +
                                " outside [0, " + std::to_string(m.class_count()) + ")");
    }
    const std::size_t layers = m.weights.size();
    ForwardTrace tr = forward_traced(m, x.data());

    std::vector<double> delta(m.class_count(), 0.0);
    delta[static_cast<std::size_t>(target)] = 1.0;
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t in = m.layer_dims[l];
        const std::size_t out = m.layer_dims[l + 1];
        std::vector<double> prev(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* wrow = m.weights[l].data() + o * in;
            for (std::size_t i = 0; i < in; ++i) prev[i] += d * wrow[i];
        }
        if (l > 0) {
            for (std::size_t i = 0; i < in; ++i) {
                prev[i] *= activate_grad_from_out(tr.pre[l - 1][i], tr.act[l - 1][i],
                                                  m.activation);
            }
        }
        delta = std::move(prev);
    }
    return delta;
}

ModelDelta client_local_train(const MlpModel& m, const LocalDataset& data,
                              const OptimizerConfig& opt, std::uint64_t seed, int client_id) {
    if (data.size() == 0) throw EmptyDatasetError("client_local_train: empty dataset");

    MlpModel local = m;
    const ParameterVector before = flatten(m);
    ParameterVector theta = before;

    // Fresh Adam state per call: clients restart from the cluster model each
    // round and carry no optimizer memory across rounds.
    ParameterVector m1(theta.size(), 0.0);
    ParameterVector m2(theta.size(), 0.0);
    std::size_t adam_t = 0;

    Rng rng(seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t bs = std::max<std::size_t>(1, opt.batch_size);
    LocalDataset batch;
    batch.feature_dim = data.feature_dim;

    for (std::size_t epoch = 0; epoch < opt.local_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            batch.features.clear();
            batch.labels.clear();
            for (std::size_t idx = start; idx < end; ++idx) {
                batch.push_row(data.row(order[idx]), data.labels[order[idx]]);
            }
            const LossGrad lg = loss_and_gradient(local, batch, opt.weight_decay);
            if (opt.kind == OptimizerKind::SGD) {
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    theta[i] -= opt.learning_rate * lg.grad[i];
                }
            } else {
                ++adam_t;
                const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(adam_t));
                const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(adam_t));
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    m1[i] = opt.beta1 * m1[i] + (1.0 - opt.beta1) * lg.grad[i];
                    m2[i] = opt.beta2 * m2[i] + (1.0 - opt.beta2) * lg.grad[i] * lg.grad[i];
                    const double mhat = m1[i] / bc1;
                    const double vhat = m2[i] / bc2;
                    theta[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
                }
            }
            unflatten(local, theta);
        }
    }

    ModelDelta d;
    d.client_id = client_id;
    d.sample_count = data.size();
    d.delta.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) d.delta[i] = theta[i] - before[i];
    return d;
}

ParameterVector fedopt_aggregate(const ParameterVector& current,
                                 const std::vector<ModelDelta>& deltas,
                                 const OptimizerConfig& server_opt) {
    if (deltas.empty()) {
        throw DimensionMismatchError("fedopt_aggregate: need at least one delta");
    }
    for (const auto& d : deltas) {
        if (d.delta.size() != current.size()) {
            throw DimensionMismatchError("fedopt_aggregate: delta dim " +
                                         std::to_string(d.delta.size()) +
                                         " != parameter dim " + std::to_string(current.size()));
        }
    }
    // Uniform mean over the cluster's clients regardless of sample counts;
    // summation in client order keeps aggregation deterministic.
    ParameterVector mean(current.size(), 0.0);
    for (const auto& d : deltas) {
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += d.delta[i];
    }
    const double inv = 1.0 / static_cast<double>(deltas.size());
    ParameterVector out(current.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = current[i] + server_opt.learning_rate * mean[i] * inv;
    }
    return out;
}

}  // namespace ocfl
