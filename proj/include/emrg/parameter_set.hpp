#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emrg/errors.hpp"
#include "emrg/types.hpp"

namespace emrg {

/// One affine encoder block: `weights` maps (in x out), `bias` has length out.
struct EncoderLayer {
    std::string name;
    MatX weights;
    VecX bias;
};

/// Named parameters of one model: ordered encoder blocks followed by a
/// linear head of shape (feature_dim x class_count) with optional bias.
/// Value-like and immutable by convention once built; every merge produces
/// a fresh ParameterSet.
struct ParameterSet {
    std::vector<EncoderLayer> encoder_layers;
    MatX head_weights;
    std::optional<VecX> head_bias;

    int input_dim() const {
        return encoder_layers.empty() ? static_cast<int>(head_weights.rows())
                                      : static_cast<int>(encoder_layers.front().weights.rows());
    }
    int feature_dim() const { return static_cast<int>(head_weights.rows()); }
    int class_count() const { return static_cast<int>(head_weights.cols()); }
    int depth() const { return static_cast<int>(encoder_layers.size()); }
};

/// Selector for flatten_layer & friends: an encoder layer name, or "head".
inline constexpr const char* kHeadSelector = "head";

/// True iff names, order and all tensor shapes match (head bias presence
/// included). This is the compatibility contract every merger requires.
bool shape_compatible(const ParameterSet& a, const ParameterSet& b);

/// Throws incompatible_models_error with a description if not compatible.
void require_compatible(const ParameterSet& a, const ParameterSet& b);

/// Total number of scalar parameters.
std::size_t parameter_count(const ParameterSet& p);

/// Convex combination of models. Weights must be nonnegative and sum to one
/// within 1e-9. Zero-weight terms are skipped, so a one-hot weight vector
/// returns a bitwise copy of the selected model.
ParameterSet weighted_sum(const std::vector<const ParameterSet*>& models,
                          const std::vector<double>& weights);
ParameterSet weighted_sum(const std::vector<ParameterSet>& models,
                          const std::vector<double>& weights);

/// Like weighted_sum but with separate simplex weights for the encoder
/// blocks and for the head.
ParameterSet weighted_sum_decoupled(const std::vector<const ParameterSet*>& models,
                                    const std::vector<double>& encoder_weights,
                                    const std::vector<double>& head_weights);

/// 1-D view of one layer: weights in row-major order, then bias.
/// `selector` is a layer name or "head"; unknown selectors throw not_found.
VecX flatten_layer(const ParameterSet& model, const std::string& selector);

/// All selectors of a model in canonical order: encoder layer names, "head".
std::vector<std::string> layer_selectors(const ParameterSet& model);

/// Whole parameter vector (all layers flattened in canonical order) and its
/// inverse; `from_flat` takes shapes from `reference`.
VecX to_flat(const ParameterSet& p);
ParameterSet from_flat(const ParameterSet& reference, const VecX& flat);

/// Euclidean primitives with 64-bit accumulation.
double dot(const VecX& a, const VecX& b);
double norm(const VecX& a);
/// Cosine clamped to [-1, 1]; zero-norm inputs throw degenerate_vector.
double cosine(const VecX& a, const VecX& b);

} // namespace emrg
