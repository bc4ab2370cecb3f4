#include "emrg/nn.hpp"

#include <atomic>
#include <cmath>

namespace emrg {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw config_error("unknown activation '" + s + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void validate(const ModelSpec& spec) {
    if (spec.input_dim < 1) throw invalid_parameter_error("input_dim must be >= 1");
    if (spec.class_count < 1) throw invalid_parameter_error("class_count must be >= 1");
    if (spec.hidden_dims.empty()) {
        throw invalid_parameter_error("at least one hidden block is required");
    }
    for (int d : spec.hidden_dims) {
        if (d < 1) throw invalid_parameter_error("hidden widths must be >= 1");
    }
}

ParameterSet init_model(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    std::mt19937_64 rng(mix_seed(seed, 0x1a17));
    std::normal_distribution<double> normal(0.0, 1.0);

    ParameterSet p;
    int fan_in = spec.input_dim;
    for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
        int fan_out = spec.hidden_dims[i];
        double scale = spec.activation == Activation::relu
                           ? std::sqrt(2.0 / fan_in)
                           : std::sqrt(2.0 / (fan_in + fan_out));
        EncoderLayer layer;
        layer.name = "enc" + std::to_string(i);
        layer.weights = MatX(fan_in, fan_out);
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = static_cast<Scalar>(normal(rng) * scale);
            }
        }
        layer.bias = VecX::Zero(fan_out);
        p.encoder_layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    p.head_weights = MatX(fan_in, spec.class_count);
    for (Eigen::Index r = 0; r < p.head_weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.head_weights.cols(); ++c) {
            p.head_weights(r, c) = static_cast<Scalar>(normal(rng) * 1e-2);
        }
    }
    p.head_bias = VecX::Zero(spec.class_count);
    return p;
}

bool matches_spec(const ParameterSet& params, const ModelSpec& spec) {
    if (params.depth() != static_cast<int>(spec.hidden_dims.size())) return false;
    int fan_in = spec.input_dim;
    for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
        const EncoderLayer& l = params.encoder_layers[i];
        if (l.weights.rows() != fan_in || l.weights.cols() != spec.hidden_dims[i]) return false;
        if (l.bias.size() != spec.hidden_dims[i]) return false;
        fan_in = spec.hidden_dims[i];
    }
    return params.head_weights.rows() == fan_in &&
           params.head_weights.cols() == spec.class_count && params.head_bias.has_value() &&
           params.head_bias->size() == spec.class_count;
}

MatX softmax(const MatX& logits, double temperature) {
    if (!(temperature > 0.0)) throw invalid_parameter_error("temperature must be positive");
    MatX out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double max_z = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            max_z = std::max(max_z, static_cast<double>(logits(r, c)));
        }
        double sum = 0.0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            sum += std::exp((static_cast<double>(logits(r, c)) - max_z) / temperature);
        }
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            double e = std::exp((static_cast<double>(logits(r, c)) - max_z) / temperature);
            out(r, c) = static_cast<Scalar>(e / sum);
        }
    }
    return out;
}

std::vector<int> argmax_labels(const MatX& scores) {
    std::vector<int> labels(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        int best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c) {
            if (scores(r, c) > scores(r, best)) best = static_cast<int>(c);
        }
        labels[static_cast<std::size_t>(r)] = best;
    }
    return labels;
}

namespace {

MatX encode(const ParameterSet& params, Activation activation, const MatX& X) {
    if (X.cols() != params.input_dim()) {
        throw shape_error("batch width " + std::to_string(X.cols()) + " vs model input " +
                          std::to_string(params.input_dim()));
    }
    MatX h = X;
    for (const EncoderLayer& l : params.encoder_layers) {
        MatX a = (h * l.weights).rowwise() + l.bias.transpose();
        h = activation == Activation::relu ? a.cwiseMax(Scalar(0)) : MatX(a.array().tanh());
    }
    return h;
}

void check_labels(Eigen::Index rows, Eigen::Index classes, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != rows) {
        throw shape_error("got " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(rows) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || y >= classes) {
            throw label_error("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
        }
    }
}

} // namespace

Prediction forward(const ParameterSet& params, Activation activation, const MatX& X,
                   double temperature) {
    Prediction pred;
    MatX features = encode(params, activation, X);
    pred.logits = features * params.head_weights;
    if (params.head_bias) pred.logits.rowwise() += params.head_bias->transpose();
    pred.probabilities = softmax(pred.logits, temperature);
    pred.predicted_class = argmax_labels(pred.probabilities);
    return pred;
}

std::vector<double> row_entropies(const MatX& probabilities) {
    std::vector<double> out(static_cast<std::size_t>(probabilities.rows()));
    for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
        double h = 0.0;
        for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
            double p = probabilities(r, c);
            if (p < -1e-9) {
                throw invalid_distribution_error("probability " + std::to_string(p) + " at row " +
                                                 std::to_string(r));
            }
            if (p > 0.0) h -= p * std::log(p);
        }
        out[static_cast<std::size_t>(r)] = h;
    }
    return out;
}

double mean_entropy(const MatX& probabilities) {
    if (probabilities.rows() == 0) throw invalid_parameter_error("entropy of an empty batch");
    std::vector<double> h = row_entropies(probabilities);
    double sum = 0.0;
    for (double v : h) sum += v;
    return sum / static_cast<double>(h.size());
}

double cross_entropy_loss(const MatX& probabilities, const std::vector<int>& labels) {
    check_labels(probabilities.rows(), probabilities.cols(), labels);
    if (labels.empty()) throw invalid_parameter_error("loss of an empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sum -= std::log(static_cast<double>(
            probabilities(static_cast<Eigen::Index>(i), labels[i])));
    }
    return sum / static_cast<double>(labels.size());
}

double cross_entropy_loss(const Prediction& pred, const std::vector<int>& labels) {
    return cross_entropy_loss(pred.probabilities, labels);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
    if (predicted.size() != labels.size()) {
        throw shape_error("prediction/label count mismatch");
    }
    if (predicted.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

namespace {
std::atomic<std::uint64_t> g_backward_calls{0};
} // namespace

std::uint64_t backward_call_count() { return g_backward_calls.load(); }

ParameterSet backward(const ParameterSet& params, Activation activation, const MatX& X,
                      const std::vector<int>& labels) {
    g_backward_calls.fetch_add(1, std::memory_order_relaxed);
    if (X.cols() != params.input_dim()) {
        throw shape_error("batch width " + std::to_string(X.cols()) + " vs model input " +
                          std::to_string(params.input_dim()));
    }
    check_labels(X.rows(), params.class_count(), labels);
    const Eigen::Index n = X.rows();

    // Forward in 64-bit, keeping pre- and post-activation values per block.
    std::vector<MatXd> acts;
    acts.reserve(params.encoder_layers.size() + 1);
    acts.push_back(X.cast<double>());
    std::vector<MatXd> pre;
    pre.reserve(params.encoder_layers.size());
    for (const EncoderLayer& l : params.encoder_layers) {
        MatXd a = (acts.back() * l.weights.cast<double>()).rowwise() +
                  l.bias.cast<double>().transpose();
        pre.push_back(a);
        acts.push_back(activation == Activation::relu
                           ? MatXd(a.cwiseMax(0.0))
                           : MatXd(a.array().tanh()));
    }
    MatXd logits = acts.back() * params.head_weights.cast<double>();
    if (params.head_bias) logits.rowwise() += params.head_bias->cast<double>().transpose();

    MatXd delta(n, params.class_count());
    for (Eigen::Index r = 0; r < n; ++r) {
        double max_z = logits.row(r).maxCoeff();
        double sum = (logits.row(r).array() - max_z).exp().sum();
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            delta(r, c) = std::exp(logits(r, c) - max_z) / sum;
        }
        delta(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
    }
    delta /= static_cast<double>(n);

    ParameterSet grads = zeros_like(params);
    grads.head_weights = (acts.back().transpose() * delta).cast<Scalar>();
    if (params.head_bias) *grads.head_bias = delta.colwise().sum().transpose().cast<Scalar>();

    MatXd upstream = delta * params.head_weights.cast<double>().transpose();
    for (int l = params.depth() - 1; l >= 0; --l) {
        const std::size_t li = static_cast<std::size_t>(l);
        MatXd local;
        if (activation == Activation::relu) {
            local = upstream.array() * (pre[li].array() > 0.0).cast<double>();
        } else {
            local = upstream.array() * (1.0 - acts[li + 1].array().square());
        }
        grads.encoder_layers[li].weights = (acts[li].transpose() * local).cast<Scalar>();
        grads.encoder_layers[li].bias = local.colwise().sum().transpose().cast<Scalar>();
        if (l > 0) upstream = local * params.encoder_layers[li].weights.cast<double>().transpose();
    }
    return grads;
}

void sgd_step(ParameterSet& params, ParameterSet& velocity, const ParameterSet& grads,
              double learning_rate, double momentum, double weight_decay) {
    require_compatible(params, grads);
    require_compatible(params, velocity);
    if (learning_rate == 0.0) return; // zero-velocity start stays zero: exact no-op
    const Scalar lr = static_cast<Scalar>(learning_rate);
    const Scalar mu = static_cast<Scalar>(momentum);
    const Scalar wd = static_cast<Scalar>(weight_decay);
    auto step = [&](auto& theta, auto& vel, const auto& grad) {
        vel = mu * vel - lr * (grad + wd * theta);
        theta += vel;
    };
    for (std::size_t i = 0; i < params.encoder_layers.size(); ++i) {
        step(params.encoder_layers[i].weights, velocity.encoder_layers[i].weights,
             grads.encoder_layers[i].weights);
        step(params.encoder_layers[i].bias, velocity.encoder_layers[i].bias,
             grads.encoder_layers[i].bias);
    }
    step(params.head_weights, velocity.head_weights, grads.head_weights);
    if (params.head_bias) step(*params.head_bias, *velocity.head_bias, *grads.head_bias);
}

ParameterSet zeros_like(const ParameterSet& p) {
    ParameterSet out = p;
    for (EncoderLayer& l : out.encoder_layers) {
        l.weights.setZero();
        l.bias.setZero();
    }
    out.head_weights.setZero();
    if (out.head_bias) out.head_bias->setZero();
    return out;
}

MatX augment_batch(const MatX& X, const AugmentConfig& cfg, std::mt19937_64& rng) {
    MatX out = X;
    if (cfg.jitter_scale > 0.0 && X.rows() > 1) {
        VecXd mean = X.cast<double>().colwise().mean().transpose();
        VecXd var = (X.cast<double>().rowwise() - mean.transpose())
                        .array()
                        .square()
                        .colwise()
                        .mean()
                        .transpose();
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            for (Eigen::Index c = 0; c < out.cols(); ++c) {
                double sigma = cfg.jitter_scale * std::sqrt(var(c));
                out(r, c) += static_cast<Scalar>(normal(rng) * sigma);
            }
        }
    }
    if (cfg.dropout_rate > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            for (Eigen::Index c = 0; c < out.cols(); ++c) {
                if (unif(rng) < cfg.dropout_rate) out(r, c) = Scalar(0);
            }
        }
    }
    return out;
}

double augmentation_consistency(const ParameterSet& params, Activation activation,
                                const MatX& X, int views, const AugmentConfig& cfg,
                                std::mt19937_64& rng) {
    if (views < 1) throw invalid_parameter_error("views must be >= 1");
    if (X.rows() == 0) throw invalid_parameter_error("consistency of an empty batch");
    std::vector<int> clean = forward(params, activation, X).predicted_class;
    std::size_t agree = 0;
    for (int v = 0; v < views; ++v) {
        MatX view = augment_batch(X, cfg, rng);
        std::vector<int> predicted = forward(params, activation, view).predicted_class;
        for (std::size_t i = 0; i < clean.size(); ++i) {
            if (predicted[i] == clean[i]) ++agree;
        }
    }
    return static_cast<double>(agree) /
           (static_cast<double>(views) * static_cast<double>(clean.size()));
}

} // namespace emrg
