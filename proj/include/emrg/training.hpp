#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emrg/data.hpp"
#include "emrg/nn.hpp"
#include "emrg/parameter_set.hpp"

namespace emrg {

/// Optimization settings for one candidate run. The architecture is fixed
/// per pool (a ModelSpec), so merged experts stay shape-compatible; the
/// sweep varies only how candidates are optimized. `seed` diversifies
/// batch shuffling between otherwise identical entries.
struct HyperConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int epochs = 30;
    int batch_size = 32;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
};

/// Small grid used when a config names no explicit sweep.
std::vector<HyperConfig> default_sweep();

struct TrainedCandidate {
    ParameterSet params;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

/// Mini-batch SGD with momentum from the given starting point. Batches are
/// reshuffled each epoch; all randomness flows from hyper.seed mixed with
/// `salt`. A non-finite validation loss throws divergence_error naming the
/// offending hyperparameters.
TrainedCandidate train_candidate(const ModelSpec& spec, const ParameterSet& init,
                                 const LabeledSet& train, const LabeledSet& val,
                                 const HyperConfig& hyper, std::uint64_t salt = 0);

/// Index of the candidate with minimal validation loss; ties resolve to the
/// lowest index. Throws divergence_error when every loss is non-finite and
/// empty_pool_error when there are no candidates.
int select_expert(const std::vector<TrainedCandidate>& candidates);

struct Expert {
    std::string domain;
    ParameterSet params;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

/// One expert per source domain, all fine-tuned from a single shared random
/// initialization so their parameters stay mergeable.
struct ExpertPool {
    ModelSpec spec;
    ParameterSet init; // the shared starting point (used as the merge anchor)
    std::vector<Expert> experts;

    int size() const { return static_cast<int>(experts.size()); }
    std::vector<const ParameterSet*> expert_params() const;
    std::vector<std::string> domain_names() const;
};

/// Trains the full pool: one shared init, a hyperparameter sweep per domain,
/// argmin-validation-loss selection. Needs >= 2 domains and a non-empty
/// sweep.
ExpertPool build_pool(const std::vector<DomainDataset>& domains, const ModelSpec& spec,
                      const std::vector<HyperConfig>& sweep, std::uint64_t init_seed);

} // namespace emrg
