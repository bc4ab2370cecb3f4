#include "emrg/parameter_set.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace emrg {

namespace {

std::string shape_string(long rows, long cols) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(%ld x %ld)", rows, cols);
    return buf;
}

// Weight lists feeding a convex combination must sit on the simplex.
void check_simplex(const std::vector<double>& weights, std::size_t expected) {
    if (weights.size() != expected) {
        throw invalid_weights_error("expected " + std::to_string(expected) + " weights, got " +
                                    std::to_string(weights.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0)) {
            throw invalid_weights_error("weight " + std::to_string(i) + " is negative or NaN");
        }
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw invalid_weights_error("weights sum to " + std::to_string(sum) + ", not 1");
    }
}

MatX combine(const std::vector<const ParameterSet*>& models, const std::vector<double>& weights,
             const MatX& (*pick)(const ParameterSet&, int), int layer) {
    MatXd acc = MatXd::Zero(pick(*models[0], layer).rows(), pick(*models[0], layer).cols());
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (weights[k] == 0.0) continue; // keeps one-hot weights bitwise exact
        acc += weights[k] * pick(*models[k], layer).cast<double>();
    }
    return acc.cast<Scalar>();
}

const MatX& pick_layer_weights(const ParameterSet& p, int layer) {
    return p.encoder_layers[static_cast<std::size_t>(layer)].weights;
}
const MatX& pick_head_weights(const ParameterSet& p, int) { return p.head_weights; }

VecX combine_vec(const std::vector<const ParameterSet*>& models,
                 const std::vector<double>& weights,
                 const VecX& (*pick)(const ParameterSet&, int), int layer) {
    VecXd acc = VecXd::Zero(pick(*models[0], layer).size());
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (weights[k] == 0.0) continue;
        acc += weights[k] * pick(*models[k], layer).cast<double>();
    }
    return acc.cast<Scalar>();
}

const VecX& pick_layer_bias(const ParameterSet& p, int layer) {
    return p.encoder_layers[static_cast<std::size_t>(layer)].bias;
}
const VecX& pick_head_bias(const ParameterSet& p, int) { return *p.head_bias; }

ParameterSet combine_all(const std::vector<const ParameterSet*>& models,
                         const std::vector<double>& encoder_weights,
                         const std::vector<double>& head_weights) {
    if (models.empty()) throw empty_pool_error("weighted_sum needs at least one model");
    for (const ParameterSet* m : models) require_compatible(*models[0], *m);
    check_simplex(encoder_weights, models.size());
    check_simplex(head_weights, models.size());

    const ParameterSet& first = *models[0];
    ParameterSet out;
    out.encoder_layers.reserve(first.encoder_layers.size());
    for (int l = 0; l < first.depth(); ++l) {
        EncoderLayer layer;
        layer.name = first.encoder_layers[static_cast<std::size_t>(l)].name;
        layer.weights = combine(models, encoder_weights, pick_layer_weights, l);
        layer.bias = combine_vec(models, encoder_weights, pick_layer_bias, l);
        out.encoder_layers.push_back(std::move(layer));
    }
    out.head_weights = combine(models, head_weights, pick_head_weights, 0);
    if (first.head_bias) out.head_bias = combine_vec(models, head_weights, pick_head_bias, 0);
    return out;
}

} // namespace

bool shape_compatible(const ParameterSet& a, const ParameterSet& b) {
    if (a.encoder_layers.size() != b.encoder_layers.size()) return false;
    for (std::size_t i = 0; i < a.encoder_layers.size(); ++i) {
        const EncoderLayer& la = a.encoder_layers[i];
        const EncoderLayer& lb = b.encoder_layers[i];
        if (la.name != lb.name) return false;
        if (la.weights.rows() != lb.weights.rows() || la.weights.cols() != lb.weights.cols())
            return false;
        if (la.bias.size() != lb.bias.size()) return false;
    }
    if (a.head_weights.rows() != b.head_weights.rows() ||
        a.head_weights.cols() != b.head_weights.cols())
        return false;
    if (a.head_bias.has_value() != b.head_bias.has_value()) return false;
    if (a.head_bias && a.head_bias->size() != b.head_bias->size()) return false;
    return true;
}

void require_compatible(const ParameterSet& a, const ParameterSet& b) {
    if (shape_compatible(a, b)) return;
    if (a.encoder_layers.size() != b.encoder_layers.size()) {
        throw incompatible_models_error("encoder depth " +
                                        std::to_string(a.encoder_layers.size()) + " vs " +
                                        std::to_string(b.encoder_layers.size()));
    }
    for (std::size_t i = 0; i < a.encoder_layers.size(); ++i) {
        const EncoderLayer& la = a.encoder_layers[i];
        const EncoderLayer& lb = b.encoder_layers[i];
        if (la.name != lb.name) {
            throw incompatible_models_error("layer " + std::to_string(i) + " named '" + la.name +
                                            "' vs '" + lb.name + "'");
        }
        if (la.weights.rows() != lb.weights.rows() || la.weights.cols() != lb.weights.cols() ||
            la.bias.size() != lb.bias.size()) {
            throw incompatible_models_error(
                "layer '" + la.name + "' shapes " +
                shape_string(la.weights.rows(), la.weights.cols()) + " vs " +
                shape_string(lb.weights.rows(), lb.weights.cols()));
        }
    }
    throw incompatible_models_error(
        "head shapes " + shape_string(a.head_weights.rows(), a.head_weights.cols()) +
        (a.head_bias ? "+bias" : "") + " vs " +
        shape_string(b.head_weights.rows(), b.head_weights.cols()) +
        (b.head_bias ? "+bias" : ""));
}

std::size_t parameter_count(const ParameterSet& p) {
    std::size_t n = 0;
    for (const EncoderLayer& l : p.encoder_layers) {
        n += static_cast<std::size_t>(l.weights.size()) + static_cast<std::size_t>(l.bias.size());
    }
    n += static_cast<std::size_t>(p.head_weights.size());
    if (p.head_bias) n += static_cast<std::size_t>(p.head_bias->size());
    return n;
}

ParameterSet weighted_sum(const std::vector<const ParameterSet*>& models,
                          const std::vector<double>& weights) {
    return combine_all(models, weights, weights);
}

ParameterSet weighted_sum(const std::vector<ParameterSet>& models,
                          const std::vector<double>& weights) {
    std::vector<const ParameterSet*> ptrs;
    ptrs.reserve(models.size());
    for (const ParameterSet& m : models) ptrs.push_back(&m);
    return weighted_sum(ptrs, weights);
}

ParameterSet weighted_sum_decoupled(const std::vector<const ParameterSet*>& models,
                                    const std::vector<double>& encoder_weights,
                                    const std::vector<double>& head_weights) {
    return combine_all(models, encoder_weights, head_weights);
}

VecX flatten_layer(const ParameterSet& model, const std::string& selector) {
    const MatX* weights = nullptr;
    const VecX* bias = nullptr;
    if (selector == kHeadSelector) {
        weights = &model.head_weights;
        if (model.head_bias) bias = &*model.head_bias;
    } else {
        for (const EncoderLayer& l : model.encoder_layers) {
            if (l.name == selector) {
                weights = &l.weights;
                bias = &l.bias;
                break;
            }
        }
        if (!weights) throw not_found_error("no layer named '" + selector + "'");
    }
    VecX flat(weights->size() + (bias ? bias->size() : 0));
    // MatX is row-major, so its storage order is already the flatten order.
    std::copy(weights->data(), weights->data() + weights->size(), flat.data());
    if (bias) std::copy(bias->data(), bias->data() + bias->size(), flat.data() + weights->size());
    return flat;
}

std::vector<std::string> layer_selectors(const ParameterSet& model) {
    std::vector<std::string> out;
    out.reserve(model.encoder_layers.size() + 1);
    for (const EncoderLayer& l : model.encoder_layers) out.push_back(l.name);
    out.push_back(kHeadSelector);
    return out;
}

VecX to_flat(const ParameterSet& p) {
    VecX flat(static_cast<Eigen::Index>(parameter_count(p)));
    Eigen::Index offset = 0;
    for (const std::string& sel : layer_selectors(p)) {
        VecX piece = flatten_layer(p, sel);
        flat.segment(offset, piece.size()) = piece;
        offset += piece.size();
    }
    return flat;
}

ParameterSet from_flat(const ParameterSet& reference, const VecX& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count(reference))) {
        throw shape_error("flat vector length " + std::to_string(flat.size()) +
                          " does not match parameter count " +
                          std::to_string(parameter_count(reference)));
    }
    ParameterSet out = reference;
    Eigen::Index offset = 0;
    auto take_matrix = [&](MatX& m) {
        std::copy(flat.data() + offset, flat.data() + offset + m.size(), m.data());
        offset += m.size();
    };
    auto take_vector = [&](VecX& v) {
        std::copy(flat.data() + offset, flat.data() + offset + v.size(), v.data());
        offset += v.size();
    };
    for (EncoderLayer& l : out.encoder_layers) {
        take_matrix(l.weights);
        take_vector(l.bias);
    }
    take_matrix(out.head_weights);
    if (out.head_bias) take_vector(*out.head_bias);
    return out;
}

double dot(const VecX& a, const VecX& b) {
    if (a.size() != b.size()) {
        throw shape_error("dot of lengths " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()));
    }
    return a.cast<double>().dot(b.cast<double>());
}

double norm(const VecX& a) { return std::sqrt(a.cast<double>().squaredNorm()); }

double cosine(const VecX& a, const VecX& b) {
    double na = norm(a);
    double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw degenerate_vector_error("cosine of a zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

} // namespace emrg
