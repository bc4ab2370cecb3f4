#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "emrg/parameter_set.hpp"
#include "emrg/types.hpp"

namespace emrg {

enum class Activation { relu, tanh };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

/// Architecture of a classifier: input -> hidden blocks -> linear head.
/// Needs at least one hidden block; every width must be positive.
struct ModelSpec {
    int input_dim = 0;
    std::vector<int> hidden_dims;
    int class_count = 0;
    Activation activation = Activation::relu;

    int feature_dim() const { return hidden_dims.empty() ? input_dim : hidden_dims.back(); }
};

void validate(const ModelSpec& spec);

/// Encoder weights use He initialization for relu and Xavier for tanh;
/// the head is N(0, 1) scaled by 1e-2 and all biases start at zero.
ParameterSet init_model(const ModelSpec& spec, std::uint64_t seed);

/// True iff `params` matches the architecture in `spec`.
bool matches_spec(const ParameterSet& params, const ModelSpec& spec);

struct Prediction {
    MatX logits;        // N x C
    MatX probabilities; // N x C rows on the simplex, softmax(logits / tau)
    std::vector<int> predicted_class;
};

/// Row-wise temperature softmax with max-subtraction; temperature must be
/// positive.
MatX softmax(const MatX& logits, double temperature = 1.0);

/// Row argmax with ties resolved to the lowest index.
std::vector<int> argmax_labels(const MatX& scores);

/// Forward pass over a batch (rows are samples). Probabilities are the
/// temperature-scaled softmax of the logits. Throws shape_error when the
/// batch width disagrees with the model input and invalid_parameter_error
/// for a non-positive temperature.
Prediction forward(const ParameterSet& params, Activation activation, const MatX& X,
                   double temperature = 1.0);

/// Shannon entropy (nats) of each probability row, with 0 log 0 = 0.
/// Entries below -1e-9 throw invalid_distribution_error; tiny negative
/// rounding noise is clipped to zero.
std::vector<double> row_entropies(const MatX& probabilities);

/// Mean of row_entropies; lies in [0, ln C].
double mean_entropy(const MatX& probabilities);

/// Mean negative log-probability of the true class; labels must be in
/// [0, C) or label_error is thrown.
double cross_entropy_loss(const MatX& probabilities, const std::vector<int>& labels);
double cross_entropy_loss(const Prediction& pred, const std::vector<int>& labels);

/// Fraction of predictions equal to the labels.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

/// Gradients of mean cross-entropy loss at temperature 1, shaped exactly
/// like the model. Intermediate accumulation happens in 64-bit and is
/// rounded once at the end.
ParameterSet backward(const ParameterSet& params, Activation activation, const MatX& X,
                      const std::vector<int>& labels);

/// Process-wide number of backward() invocations so far. Lets callers
/// assert that a test-time code path never touched gradients.
std::uint64_t backward_call_count();

/// In-place SGD step with momentum and L2 weight decay; `velocity` must be
/// zero-initialized to the model's shapes on the first call.
void sgd_step(ParameterSet& params, ParameterSet& velocity, const ParameterSet& grads,
              double learning_rate, double momentum, double weight_decay = 0.0);

/// Zero-filled clone used as the initial SGD velocity.
ParameterSet zeros_like(const ParameterSet& p);

struct AugmentConfig {
    double jitter_scale = 0.05; // stddev multiplier on per-feature spread
    double dropout_rate = 0.1;  // probability a feature is zeroed
};

/// One stochastic view of a batch: Gaussian jitter proportional to each
/// feature's standard deviation, then feature dropout.
MatX augment_batch(const MatX& X, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Prediction stability under augmentation: the fraction, over samples and
/// `views` augmented copies, of view predictions that agree with the
/// prediction on the clean batch. Lies in [0, 1]; `views` must be >= 1.
double augmentation_consistency(const ParameterSet& params, Activation activation,
                                const MatX& X, int views, const AugmentConfig& cfg,
                                std::mt19937_64& rng);

} // namespace emrg
