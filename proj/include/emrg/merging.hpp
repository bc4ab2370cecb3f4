#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "emrg/nn.hpp"
#include "emrg/training.hpp"

namespace emrg {

/// Per-expert mixing weights; both vectors live on the probability simplex.
/// `step` is the batch index the weights were produced at.
struct MergeCoefficients {
    std::vector<double> encoder;
    std::vector<double> head;
    int step = 0;
};

struct EngineConfig {
    double epsilon = 1e-6;          // guards inverse entropies
    double entropy_temperature = 1.0;
    double head_temperature = 10.0; // sharpness of the entropy-gap weighting
    double ema_momentum = 0.9;
    bool ema_head_only = false;     // smooth only the head list, encoder stays raw
    int views = 4;                  // augmented views per consistency score
    AugmentConfig augment;
};

/// Carries the smoothed coefficients across batches of a stream. The expert
/// pool itself is passed alongside and never mutated.
struct EngineState {
    int step = 0;
    MergeCoefficients ema_coeffs; // uniform before the first batch
    int last_head_expert = -1;

    static EngineState initial(int num_experts);
};

/// Mean softmax entropy of each expert on the batch. Lower means the expert
/// is more confident there. Values lie in [0, ln C].
std::vector<double> batch_entropy_scores(const ExpertPool& pool, const MatX& X,
                                         double temperature);

/// Normalized inverse entropies: (E_k + eps)^-1 / sum_j (E_j + eps)^-1.
/// Scores must be finite and nonnegative.
std::vector<double> inverse_entropy_coefficients(const std::vector<double>& entropies,
                                                 double epsilon);

/// argmax_k (1 / (E_k + eps)) * (1 + C_k); ties resolve to the lowest index.
/// Every shifted entropy must be strictly positive.
int select_head_expert(const std::vector<double>& entropies,
                       const std::vector<double>& consistencies, double epsilon = 0.0);

/// softmax over experts of -temperature * |E_k - E_selected|; the selected
/// expert always carries the largest weight.
std::vector<double> head_coefficients(const std::vector<double>& entropies, int selected,
                                      double temperature);

/// momentum * previous + (1 - momentum) * current, renormalized to sum one.
std::vector<double> ema_update(const std::vector<double>& previous,
                               const std::vector<double>& current, double momentum);

/// Applies the smoothing to the encoder and head lists independently.
MergeCoefficients ema_update(const MergeCoefficients& previous, const MergeCoefficients& current,
                             double momentum);

/// Which parts of the adaptive rule are active: the full decoupled rule,
/// entropy weights shared by encoder and head, or the adaptive head over a
/// uniform encoder.
enum class AdaptiveRule { full, entropy_only, head_only };

/// Everything one adaptation step produces. `coefficients` are the smoothed
/// values actually used for the merge; raw values are kept for logging.
struct MergeStepResult {
    ParameterSet merged;
    MergeCoefficients coefficients;
    std::vector<double> raw_encoder;
    std::vector<double> raw_head;
    std::vector<double> entropies;
    std::vector<double> consistencies; // empty under AdaptiveRule::entropy_only
    int head_expert = -1;              // -1 when no head expert is selected
    Prediction prediction;
};

/// One forward-only adaptation step on an unlabeled batch: score entropies,
/// form inverse-entropy encoder weights, pick the head expert by confidence
/// and augmentation stability, weight heads by entropy gap, smooth both
/// coefficient lists, merge with the smoothed decoupled weights and predict.
/// Mutates `state`; never touches the pool.
MergeStepResult merge_step(const ExpertPool& pool, EngineState& state, const MatX& X,
                           const EngineConfig& cfg, std::mt19937_64& rng,
                           AdaptiveRule rule = AdaptiveRule::full);

enum class MergeMethod {
    entropy_adaptive,    // the adaptive engine
    entropy_only,        // ablation: inverse-entropy weights for encoder and head
    decoupled_head_only, // ablation: uniform encoder, adaptive head
    mean,
    ensemble,
    task_arithmetic,
    ties,
    fisher,
    single_expert,
};

/// A method plus its argument: single_expert carries the expert index,
/// spelled "single_expert:k".
struct MethodSpec {
    MergeMethod kind = MergeMethod::entropy_adaptive;
    int expert = -1;
};

MethodSpec merge_method_from_string(const std::string& s);
std::string to_string(const MethodSpec& m);
std::vector<std::string> merge_method_names();

/// Uniform average of all experts.
ParameterSet mean_merge(const ExpertPool& pool);

/// Averages the experts' temperature-scaled probability rows; logits are log
/// probabilities, so the prediction is self-consistent at temperature 1.
Prediction ensemble_predict(const ExpertPool& pool, const MatX& X, double temperature = 1.0);

/// anchor + lambda * sum_k (expert_k - anchor), evaluated in a form that is
/// exact for a single expert at lambda = 1.
ParameterSet task_arithmetic_merge(const ExpertPool& pool, double lambda = 0.3);

struct TiesConfig {
    double lambda = 0.3;
    double trim_fraction = 0.2; // keep this top share of entries by magnitude
};

/// Trim-elect-merge on task vectors: per expert keep the largest-magnitude
/// share of entries (global over the whole vector), elect each coordinate's
/// sign by summed surviving mass, average the survivors that match the
/// elected sign, scale by lambda around the anchor.
ParameterSet ties_merge(const ExpertPool& pool, const TiesConfig& cfg = {});

/// Empirical diagonal Fisher at the observed labels, averaged over at most
/// `max_samples` rows, normalized to unit mean and floored at `min_weight`.
ParameterSet fisher_diagonal(const ParameterSet& params, Activation activation,
                             const LabeledSet& data, int max_samples,
                             double min_weight = 1e-6);

/// Fisher-weighted average: sum_k F_k . theta_k / sum_k F_k, elementwise.
/// Combines whatever diagonals it is given; no rescaling happens here.
ParameterSet fisher_merge(const ExpertPool& pool, const std::vector<ParameterSet>& fishers);

/// Convenience: estimates each expert's Fisher on its own source train split.
ParameterSet fisher_merge(const ExpertPool& pool, const std::vector<DomainDataset>& sources,
                          int max_samples = 500, double min_weight = 1e-6);

} // namespace emrg
