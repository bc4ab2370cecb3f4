#include "emrg/merging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace emrg {

EngineState EngineState::initial(int num_experts) {
    if (num_experts < 1) throw empty_pool_error("engine needs at least one expert");
    EngineState s;
    double u = 1.0 / static_cast<double>(num_experts);
    s.ema_coeffs.encoder.assign(static_cast<std::size_t>(num_experts), u);
    s.ema_coeffs.head.assign(static_cast<std::size_t>(num_experts), u);
    return s;
}

std::vector<double> batch_entropy_scores(const ExpertPool& pool, const MatX& X,
                                         double temperature) {
    if (pool.size() == 0) throw empty_pool_error("entropy scores of an empty pool");
    if (X.rows() == 0) throw invalid_parameter_error("entropy scores of an empty batch");
    std::vector<double> scores;
    scores.reserve(pool.experts.size());
    for (const Expert& e : pool.experts) {
        Prediction pred = forward(e.params, pool.spec.activation, X, temperature);
        scores.push_back(mean_entropy(pred.probabilities));
    }
    return scores;
}

std::vector<double> inverse_entropy_coefficients(const std::vector<double>& entropies,
                                                 double epsilon) {
    if (entropies.empty()) throw empty_pool_error("no entropy scores");
    if (!(epsilon > 0.0)) throw invalid_parameter_error("epsilon must be positive");
    std::vector<double> weights(entropies.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < entropies.size(); ++k) {
        if (!std::isfinite(entropies[k]) || entropies[k] < 0.0) {
            throw invalid_score_error("entropy score " + std::to_string(entropies[k]) +
                                      " at expert " + std::to_string(k));
        }
        weights[k] = 1.0 / (entropies[k] + epsilon);
        sum += weights[k];
    }
    for (double& w : weights) w /= sum;
    return weights;
}

int select_head_expert(const std::vector<double>& entropies,
                       const std::vector<double>& consistencies, double epsilon) {
    if (entropies.empty()) throw empty_pool_error("no entropy scores");
    if (entropies.size() != consistencies.size()) {
        throw invalid_parameter_error("entropy/consistency length mismatch");
    }
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < entropies.size(); ++k) {
        double shifted = entropies[k] + epsilon;
        if (!(shifted > 0.0) || !std::isfinite(shifted)) {
            throw invalid_score_error("entropy score must be positive after the epsilon shift");
        }
        if (!std::isfinite(consistencies[k])) {
            throw invalid_score_error("non-finite consistency at expert " + std::to_string(k));
        }
        double score = (1.0 + consistencies[k]) / shifted;
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(k);
        }
    }
    return best;
}

std::vector<double> head_coefficients(const std::vector<double>& entropies, int selected,
                                      double temperature) {
    if (entropies.empty()) throw empty_pool_error("no entropy scores");
    if (selected < 0 || selected >= static_cast<int>(entropies.size())) {
        throw invalid_parameter_error("selected expert out of range");
    }
    if (!(temperature > 0.0)) throw invalid_parameter_error("temperature must be positive");
    const double pivot = entropies[static_cast<std::size_t>(selected)];
    std::vector<double> weights(entropies.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < entropies.size(); ++k) {
        weights[k] = std::exp(-temperature * std::abs(entropies[k] - pivot));
        sum += weights[k];
    }
    for (double& w : weights) w /= sum;
    return weights;
}

std::vector<double> ema_update(const std::vector<double>& previous,
                               const std::vector<double>& current, double momentum) {
    if (previous.size() != current.size()) {
        throw invalid_parameter_error("EMA length mismatch");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw invalid_parameter_error("momentum must lie in [0, 1)");
    }
    std::vector<double> out(previous.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = momentum * previous[k] + (1.0 - momentum) * current[k];
        sum += out[k];
    }
    if (!(sum > 0.0)) throw invalid_weights_error("EMA output has no mass to renormalize");
    for (double& w : out) w /= sum;
    return out;
}

MergeCoefficients ema_update(const MergeCoefficients& previous, const MergeCoefficients& current,
                             double momentum) {
    MergeCoefficients out;
    out.encoder = ema_update(previous.encoder, current.encoder, momentum);
    out.head = ema_update(previous.head, current.head, momentum);
    out.step = current.step;
    return out;
}

MergeStepResult merge_step(const ExpertPool& pool, EngineState& state, const MatX& X,
                           const EngineConfig& cfg, std::mt19937_64& rng, AdaptiveRule rule) {
    const int K = pool.size();
    if (K == 0) throw empty_pool_error("merge_step on an empty pool");
    if (static_cast<int>(state.ema_coeffs.encoder.size()) != K ||
        static_cast<int>(state.ema_coeffs.head.size()) != K) {
        throw invalid_parameter_error("engine state sized for a different pool");
    }

    MergeStepResult r;
    r.entropies = batch_entropy_scores(pool, X, cfg.entropy_temperature);

    switch (rule) {
    case AdaptiveRule::full: {
        r.raw_encoder = inverse_entropy_coefficients(r.entropies, cfg.epsilon);
        r.consistencies.reserve(static_cast<std::size_t>(K));
        for (const Expert& e : pool.experts) {
            r.consistencies.push_back(augmentation_consistency(
                e.params, pool.spec.activation, X, cfg.views, cfg.augment, rng));
        }
        r.head_expert = select_head_expert(r.entropies, r.consistencies, cfg.epsilon);
        r.raw_head = head_coefficients(r.entropies, r.head_expert, cfg.head_temperature);
        break;
    }
    case AdaptiveRule::entropy_only: {
        r.raw_encoder = inverse_entropy_coefficients(r.entropies, cfg.epsilon);
        r.raw_head = r.raw_encoder;
        break;
    }
    case AdaptiveRule::head_only: {
        r.raw_encoder.assign(static_cast<std::size_t>(K), 1.0 / static_cast<double>(K));
        r.consistencies.reserve(static_cast<std::size_t>(K));
        for (const Expert& e : pool.experts) {
            r.consistencies.push_back(augmentation_consistency(
                e.params, pool.spec.activation, X, cfg.views, cfg.augment, rng));
        }
        r.head_expert = select_head_expert(r.entropies, r.consistencies, cfg.epsilon);
        r.raw_head = head_coefficients(r.entropies, r.head_expert, cfg.head_temperature);
        break;
    }
    }

    MergeCoefficients raw;
    raw.encoder = r.raw_encoder;
    raw.head = r.raw_head;
    raw.step = state.step;
    MergeCoefficients used = ema_update(state.ema_coeffs, raw, cfg.ema_momentum);
    if (cfg.ema_head_only) used.encoder = raw.encoder;

    r.coefficients = used;
    r.merged = weighted_sum_decoupled(pool.expert_params(), used.encoder, used.head);
    r.prediction = forward(r.merged, pool.spec.activation, X, cfg.entropy_temperature);

    state.ema_coeffs = used;
    state.step += 1;
    state.last_head_expert = r.head_expert;
    return r;
}

MethodSpec merge_method_from_string(const std::string& s) {
    MethodSpec m;
    if (s == "entropy_adaptive") {
        m.kind = MergeMethod::entropy_adaptive;
    } else if (s == "entropy_only") {
        m.kind = MergeMethod::entropy_only;
    } else if (s == "decoupled_head_only") {
        m.kind = MergeMethod::decoupled_head_only;
    } else if (s == "mean") {
        m.kind = MergeMethod::mean;
    } else if (s == "ensemble") {
        m.kind = MergeMethod::ensemble;
    } else if (s == "task_arithmetic") {
        m.kind = MergeMethod::task_arithmetic;
    } else if (s == "ties") {
        m.kind = MergeMethod::ties;
    } else if (s == "fisher") {
        m.kind = MergeMethod::fisher;
    } else if (s.rfind("single_expert:", 0) == 0) {
        m.kind = MergeMethod::single_expert;
        const std::string arg = s.substr(14);
        char* end = nullptr;
        long idx = std::strtol(arg.c_str(), &end, 10);
        if (arg.empty() || end == arg.c_str() || *end != '\0' || idx < 0) {
            throw config_error("bad expert index in '" + s + "'");
        }
        m.expert = static_cast<int>(idx);
    } else {
        throw config_error("unknown method '" + s + "'");
    }
    return m;
}

std::string to_string(const MethodSpec& m) {
    switch (m.kind) {
    case MergeMethod::entropy_adaptive: return "entropy_adaptive";
    case MergeMethod::entropy_only: return "entropy_only";
    case MergeMethod::decoupled_head_only: return "decoupled_head_only";
    case MergeMethod::mean: return "mean";
    case MergeMethod::ensemble: return "ensemble";
    case MergeMethod::task_arithmetic: return "task_arithmetic";
    case MergeMethod::ties: return "ties";
    case MergeMethod::fisher: return "fisher";
    case MergeMethod::single_expert: return "single_expert:" + std::to_string(m.expert);
    }
    return "unknown";
}

std::vector<std::string> merge_method_names() {
    return {"entropy_adaptive", "entropy_only", "decoupled_head_only", "mean",
            "ensemble",         "task_arithmetic", "ties",            "fisher",
            "single_expert:<k>"};
}

ParameterSet mean_merge(const ExpertPool& pool) {
    if (pool.size() == 0) throw empty_pool_error("mean merge of an empty pool");
    std::vector<double> uniform(static_cast<std::size_t>(pool.size()),
                                1.0 / static_cast<double>(pool.size()));
    return weighted_sum(pool.expert_params(), uniform);
}

Prediction ensemble_predict(const ExpertPool& pool, const MatX& X, double temperature) {
    if (pool.size() == 0) throw empty_pool_error("ensemble over an empty pool");
    MatXd acc = MatXd::Zero(X.rows(), pool.spec.class_count);
    for (const Expert& e : pool.experts) {
        Prediction pred = forward(e.params, pool.spec.activation, X, temperature);
        acc += pred.probabilities.cast<double>();
    }
    acc /= static_cast<double>(pool.size());
    Prediction out;
    out.probabilities = acc.cast<Scalar>();
    out.logits = acc.array().log().cast<Scalar>(); // softmax at temperature 1 recovers the mean
    out.predicted_class = argmax_labels(out.probabilities);
    return out;
}

namespace {

// coeffs[0] scales the anchor, coeffs[k+1] scales expert k; terms with an
// exactly-zero coefficient are skipped so degenerate cases stay bitwise.
ParameterSet anchored_combination(const ExpertPool& pool, const std::vector<double>& coeffs) {
    VecXd acc = VecXd::Zero(static_cast<Eigen::Index>(parameter_count(pool.init)));
    if (coeffs[0] != 0.0) acc = coeffs[0] * to_flat(pool.init).cast<double>();
    for (int k = 0; k < pool.size(); ++k) {
        double c = coeffs[static_cast<std::size_t>(k) + 1];
        if (c == 0.0) continue;
        acc += c * to_flat(pool.experts[static_cast<std::size_t>(k)].params).cast<double>();
    }
    return from_flat(pool.init, acc.cast<Scalar>());
}

} // namespace

ParameterSet task_arithmetic_merge(const ExpertPool& pool, double lambda) {
    if (pool.size() == 0) throw empty_pool_error("task arithmetic on an empty pool");
    for (const Expert& e : pool.experts) require_compatible(pool.init, e.params);
    std::vector<double> coeffs(static_cast<std::size_t>(pool.size()) + 1, lambda);
    coeffs[0] = 1.0 - lambda * static_cast<double>(pool.size());
    return anchored_combination(pool, coeffs);
}

ParameterSet ties_merge(const ExpertPool& pool, const TiesConfig& cfg) {
    if (pool.size() == 0) throw empty_pool_error("ties merge of an empty pool");
    if (!(cfg.trim_fraction > 0.0) || cfg.trim_fraction > 1.0) {
        throw config_error("trim_fraction must lie in (0, 1]");
    }
    for (const Expert& e : pool.experts) require_compatible(pool.init, e.params);

    const Eigen::Index n = static_cast<Eigen::Index>(parameter_count(pool.init));
    VecXd anchor = to_flat(pool.init).cast<double>();
    Eigen::Index keep = static_cast<Eigen::Index>(
        std::ceil(cfg.trim_fraction * static_cast<double>(n)));
    keep = std::clamp<Eigen::Index>(keep, 1, n);

    std::vector<VecXd> trimmed;
    trimmed.reserve(pool.experts.size());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (const Expert& e : pool.experts) {
        VecXd task = to_flat(e.params).cast<double>() - anchor;
        std::iota(order.begin(), order.end(), 0);
        // Magnitude ties resolve by index, so the kept set is deterministic.
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return std::abs(task(a)) > std::abs(task(b));
        });
        VecXd kept = VecXd::Zero(n);
        for (Eigen::Index i = 0; i < keep; ++i) {
            kept(order[static_cast<std::size_t>(i)]) = task(order[static_cast<std::size_t>(i)]);
        }
        trimmed.push_back(std::move(kept));
    }

    VecXd merged = VecXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double sum = 0.0;
        for (const VecXd& t : trimmed) sum += t(j);
        if (sum == 0.0) continue;
        const double sign = sum > 0.0 ? 1.0 : -1.0;
        double mass = 0.0;
        int count = 0;
        for (const VecXd& t : trimmed) {
            if (t(j) * sign > 0.0) {
                mass += t(j);
                ++count;
            }
        }
        if (count > 0) merged(j) = mass / static_cast<double>(count);
    }

    return from_flat(pool.init, (anchor + cfg.lambda * merged).cast<Scalar>());
}

ParameterSet fisher_diagonal(const ParameterSet& params, Activation activation,
                             const LabeledSet& data, int max_samples, double min_weight) {
    if (data.size() == 0) throw config_error("fisher estimation needs samples");
    if (max_samples < 1) throw config_error("max_samples must be >= 1");
    if (!(min_weight > 0.0)) throw invalid_parameter_error("min_weight must be positive");

    const int n = std::min(max_samples, data.size());
    VecXd acc = VecXd::Zero(static_cast<Eigen::Index>(parameter_count(params)));
    for (int i = 0; i < n; ++i) {
        MatX row = data.X.row(i);
        std::vector<int> label = {data.y[static_cast<std::size_t>(i)]};
        VecXd g = to_flat(backward(params, activation, row, label)).cast<double>();
        acc += g.array().square().matrix();
    }
    acc /= static_cast<double>(n);

    double mean = acc.mean();
    if (mean > 0.0) acc /= mean; // unit-mean normalization per expert
    acc = acc.cwiseMax(min_weight);
    return from_flat(params, acc.cast<Scalar>());
}

ParameterSet fisher_merge(const ExpertPool& pool, const std::vector<ParameterSet>& fishers) {
    if (pool.size() == 0) throw empty_pool_error("fisher merge of an empty pool");
    if (static_cast<int>(fishers.size()) != pool.size()) {
        throw invalid_parameter_error("one Fisher diagonal per expert required");
    }
    for (const Expert& e : pool.experts) require_compatible(pool.init, e.params);
    for (const ParameterSet& f : fishers) require_compatible(pool.init, f);

    const Eigen::Index n = static_cast<Eigen::Index>(parameter_count(pool.init));
    VecXd numer = VecXd::Zero(n);
    VecXd denom = VecXd::Zero(n);
    for (int k = 0; k < pool.size(); ++k) {
        VecXd f = to_flat(fishers[static_cast<std::size_t>(k)]).cast<double>();
        VecXd theta =
            to_flat(pool.experts[static_cast<std::size_t>(k)].params).cast<double>();
        numer += f.cwiseProduct(theta);
        denom += f;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(denom(j) > 0.0)) {
            throw invalid_weights_error("zero Fisher mass at coordinate " + std::to_string(j));
        }
    }
    return from_flat(pool.init, (numer.array() / denom.array()).cast<Scalar>());
}

ParameterSet fisher_merge(const ExpertPool& pool, const std::vector<DomainDataset>& sources,
                          int max_samples, double min_weight) {
    if (static_cast<int>(sources.size()) != pool.size()) {
        throw invalid_parameter_error("one source domain per expert required");
    }
    std::vector<ParameterSet> fishers;
    fishers.reserve(sources.size());
    for (int k = 0; k < pool.size(); ++k) {
        fishers.push_back(fisher_diagonal(pool.experts[static_cast<std::size_t>(k)].params,
                                          pool.spec.activation,
                                          sources[static_cast<std::size_t>(k)].train,
                                          max_samples, min_weight));
    }
    return fisher_merge(pool, fishers);
}

} // namespace emrg
