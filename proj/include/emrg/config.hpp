#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emrg/data.hpp"
#include "emrg/merging.hpp"
#include "emrg/min_toml.hpp"
#include "emrg/nn.hpp"
#include "emrg/training.hpp"

namespace emrg {

struct DataConfig {
    int num_domains = 4;
    int num_classes = 7;
    int input_dim = 16;
    int train_size = 512;
    int val_size = 128;
    int test_size = 512;
    ShiftConfig shift;
};

struct ModelConfig {
    std::vector<int> hidden_dims = {32, 32};
    Activation activation = Activation::relu;

    ModelSpec spec(const DataConfig& data) const;
};

enum class StreamKind { iid, dirichlet, temporal };

/// Stream selector: "iid", "dirichlet:<alpha>", or "temporal:<stay_prob>".
struct StreamSpec {
    StreamKind kind = StreamKind::dirichlet;
    double param = 0.05; // alpha or stay probability
    int batch_size = 32;
    int num_batches = 100;
};

StreamSpec parse_stream_spec(const std::string& text);
std::string to_string(const StreamSpec& s);

/// Builds the plan from a pool of held-out samples.
StreamPlan make_stream(const LabeledSet& pool, const StreamSpec& spec, std::uint64_t seed);

struct ExperimentConfig {
    DataConfig data;
    ModelConfig model;
    std::vector<HyperConfig> sweep = default_sweep();
    EngineConfig engine;
    StreamSpec stream;
    std::vector<MethodSpec> methods;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string output_dir = "out";

    ExperimentConfig(); // fills the default method list
};

/// Reads a TOML document into a config; absent keys keep their defaults.
/// Throws config_error on invalid values (empty methods, batch_size < 1,
/// fewer than 3 domains, unknown method or stream names).
ExperimentConfig config_from_document(const toml::Document& doc);
ExperimentConfig load_experiment_config(const std::string& path);

/// Validation shared by file loading and CLI overrides.
void validate(const ExperimentConfig& cfg);

} // namespace emrg
