#include "emrg/training.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace emrg {

std::vector<HyperConfig> default_sweep() {
    std::vector<HyperConfig> sweep(3);
    sweep[0].learning_rate = 0.01;
    sweep[0].seed = 0;
    sweep[1].learning_rate = 0.003;
    sweep[1].seed = 1;
    sweep[2].learning_rate = 0.01;
    sweep[2].seed = 2;
    return sweep;
}

namespace {

void validate_hyper(const HyperConfig& h) {
    if (h.learning_rate < 0.0) throw invalid_parameter_error("learning_rate must be >= 0");
    if (h.momentum < 0.0 || h.momentum >= 1.0) {
        throw invalid_parameter_error("momentum must lie in [0, 1)");
    }
    if (h.epochs < 1) throw invalid_parameter_error("epochs must be >= 1");
    if (h.batch_size < 1) throw invalid_parameter_error("batch_size must be >= 1");
    if (h.weight_decay < 0.0) throw invalid_parameter_error("weight_decay must be >= 0");
}

} // namespace

TrainedCandidate train_candidate(const ModelSpec& spec, const ParameterSet& init,
                                 const LabeledSet& train, const LabeledSet& val,
                                 const HyperConfig& hyper, std::uint64_t salt) {
    validate_hyper(hyper);
    if (!matches_spec(init, spec)) {
        throw incompatible_models_error("init does not match the model spec");
    }
    if (train.size() == 0) throw empty_dataset_error("empty train split");
    if (val.size() == 0) throw empty_dataset_error("empty validation split");

    std::mt19937_64 rng(mix_seed(mix_seed(salt, 0x7a11), hyper.seed));
    TrainedCandidate out;
    out.params = init;
    ParameterSet velocity = zeros_like(init);

    std::vector<int> order(static_cast<std::size_t>(train.size()));
    for (int i = 0; i < train.size(); ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (int i = train.size() - 1; i > 0; --i) {
            std::uniform_int_distribution<int> pick(0, i);
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(pick(rng))]);
        }
        for (int start = 0; start < train.size(); start += hyper.batch_size) {
            int count = std::min(hyper.batch_size, train.size() - start);
            MatX X(count, train.X.cols());
            std::vector<int> y(static_cast<std::size_t>(count));
            for (int i = 0; i < count; ++i) {
                int row = order[static_cast<std::size_t>(start + i)];
                X.row(i) = train.X.row(row);
                y[static_cast<std::size_t>(i)] = train.y[static_cast<std::size_t>(row)];
            }
            ParameterSet grads = backward(out.params, spec.activation, X, y);
            sgd_step(out.params, velocity, grads, hyper.learning_rate, hyper.momentum,
                     hyper.weight_decay);
        }
    }

    Prediction pred = forward(out.params, spec.activation, val.X);
    double loss = cross_entropy_loss(pred, val.y);
    if (!std::isfinite(loss)) {
        char cfg[96];
        std::snprintf(cfg, sizeof(cfg), "learning_rate=%g momentum=%g seed=%llu",
                      hyper.learning_rate, hyper.momentum,
                      static_cast<unsigned long long>(hyper.seed));
        throw divergence_error("candidate diverged (non-finite validation loss) at " +
                               std::string(cfg));
    }
    out.val_loss = loss;
    out.val_accuracy = accuracy(pred.predicted_class, val.y);
    return out;
}

int select_expert(const std::vector<TrainedCandidate>& candidates) {
    if (candidates.empty()) throw empty_pool_error("no candidates to select from");
    int best = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!std::isfinite(candidates[i].val_loss)) continue;
        if (best < 0 || candidates[i].val_loss < candidates[static_cast<std::size_t>(best)].val_loss) {
            best = static_cast<int>(i);
        }
    }
    if (best < 0) throw divergence_error("every candidate diverged (non-finite val loss)");
    return best;
}

std::vector<const ParameterSet*> ExpertPool::expert_params() const {
    std::vector<const ParameterSet*> out;
    out.reserve(experts.size());
    for (const Expert& e : experts) out.push_back(&e.params);
    return out;
}

std::vector<std::string> ExpertPool::domain_names() const {
    std::vector<std::string> out;
    out.reserve(experts.size());
    for (const Expert& e : experts) out.push_back(e.domain);
    return out;
}

ExpertPool build_pool(const std::vector<DomainDataset>& domains, const ModelSpec& spec,
                      const std::vector<HyperConfig>& sweep, std::uint64_t init_seed) {
    if (domains.size() < 2) throw invalid_parameter_error("build_pool needs >= 2 domains");
    if (sweep.empty()) throw config_error("hyperparameter sweep is empty");

    ExpertPool pool;
    pool.spec = spec;
    pool.init = init_model(spec, init_seed);
    pool.experts.reserve(domains.size());
    for (std::size_t k = 0; k < domains.size(); ++k) {
        std::vector<TrainedCandidate> candidates;
        candidates.reserve(sweep.size());
        for (std::size_t m = 0; m < sweep.size(); ++m) {
            std::uint64_t salt = mix_seed(mix_seed(init_seed, k), m);
            candidates.push_back(
                train_candidate(spec, pool.init, domains[k].train, domains[k].val, sweep[m],
                                salt));
        }
        int idx;
        try {
            idx = select_expert(candidates);
        } catch (const divergence_error&) {
            throw divergence_error("every candidate diverged for " + domains[k].name);
        }
        Expert e;
        e.domain = domains[k].name;
        e.params = std::move(candidates[static_cast<std::size_t>(idx)].params);
        e.val_loss = candidates[static_cast<std::size_t>(idx)].val_loss;
        e.val_accuracy = candidates[static_cast<std::size_t>(idx)].val_accuracy;
        pool.experts.push_back(std::move(e));
    }
    return pool;
}

} // namespace emrg
