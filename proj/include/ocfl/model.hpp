#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ocfl/dataset.hpp"
#include "ocfl/numkit.hpp"

namespace ocfl {

enum class Activation { ReLU, Tanh };

// Feed-forward classifier with manually implemented gradients. Layer l maps
// layer_dims[l] inputs to layer_dims[l+1] outputs; every layer but the last
// applies the configured activation, the last feeds a softmax.
struct MlpModel {
    std::vector<std::size_t> layer_dims;       // [input, hidden..., classes]
    Activation activation = Activation::ReLU;
    std::vector<std::vector<double>> weights;  // per layer, out x in, row-major
    std::vector<std::vector<double>> biases;   // per layer, out

    static MlpModel init(const std::vector<std::size_t>& layer_dims, Activation activation,
                         std::uint64_t seed);

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t class_count() const { return layer_dims.back(); }
    std::size_t param_count() const;
};

// Flatten/unflatten are exact inverses; the flat layout is layer-major:
// layer 0 weights, layer 0 biases, layer 1 weights, ...
ParameterVector flatten(const MlpModel& m);
void unflatten(MlpModel& m, const ParameterVector& params);

// Softmax class probabilities for every row of the batch. Output is
// row-major n x class_count.
std::vector<double> forward(const MlpModel& m, const LocalDataset& batch);

// Class probabilities for a single feature vector.
std::vector<double> forward_one(const MlpModel& m, const std::vector<double>& x);

// Predicted class per row (argmax probability; ties to the lower class id).
std::vector<int> predict(const MlpModel& m, const LocalDataset& batch);

struct LossGrad {
    double loss = 0.0;
    ParameterVector grad;
};

// Mean cross-entropy over the batch plus, when weight_decay > 0 is passed to
// the optimizer, an L2 penalty added by the caller; here the penalty weight
// is explicit so the returned gradient is always the exact gradient of the
// returned loss.
LossGrad loss_and_gradient(const MlpModel& m, const LocalDataset& batch, double weight_decay = 0.0);

// Gradient of logit[target] with respect to the input features of x.
std::vector<double> input_logit_gradient(const MlpModel& m, const std::vector<double>& x,
                                         int target);

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::SGD;
    double learning_rate = 0.01;
    double weight_decay = 0.0;
    double beta1 = 0.9;    // Adam only
    double beta2 = 0.999;  // Adam only
    double eps = 1e-8;     // Adam only
    std::size_t batch_size = 32;
    std::size_t local_epochs = 3;  // K, full passes over the local training set
};

struct ModelDelta {
    int client_id = -1;
    ParameterVector delta;  // theta_after - theta_before
    std::size_t sample_count = 0;
};

// Runs local_epochs seeded-shuffle mini-batch epochs from a copy of the model
// and returns the parameter movement. Optimizer state (Adam moments) is
// created fresh for the call, so clients are stateless between rounds.
ModelDelta client_local_train(const MlpModel& m, const LocalDataset& data,
                              const OptimizerConfig& opt, std::uint64_t seed,
                              int client_id = -1);

// Server step: current + learning_rate * mean(deltas). With a server learning
// rate of 1 this is exactly the average of client end states.
ParameterVector fedopt_aggregate(const ParameterVector& current,
                                 const std::vector<ModelDelta>& deltas,
                                 const OptimizerConfig& server_opt);

}  // namespace ocfl
