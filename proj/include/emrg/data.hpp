#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emrg/types.hpp"

namespace emrg {

/// Features paired with integer class labels; rows are samples.
struct LabeledSet {
    MatX X;
    std::vector<int> y;

    int size() const { return static_cast<int>(X.rows()); }
};

struct DomainDataset {
    std::string name;
    LabeledSet train;
    LabeledSet val;
    LabeledSet test;
};

/// Knobs for how strongly the synthetic domains disagree. Class anchors are
/// shared across domains; each domain applies its own random rotation,
/// per-axis scaling, mean shift and class-prior skew on top of them.
struct ShiftConfig {
    double anchor_spread = 6.0;      // distance scale between class anchors
    double cluster_std = 1.0;        // within-class noise
    double rotation_max_degrees = 60.0;
    double scale_min = 0.5;
    double scale_max = 2.0;
    double mean_shift_scale = 2.0;
    double prior_alpha = 1.0;        // Dirichlet concentration of class priors
    double label_noise = 0.0;        // probability a training label is resampled

    /// No covariate or prior shift at all; domains become i.i.d. copies.
    static ShiftConfig identity();
};

/// K heterogeneous domains over the same C classes and input width.
/// Split sizes are per domain; all randomness flows from `seed`.
std::vector<DomainDataset> gen_domains(int num_domains, int num_classes, int input_dim,
                                       int train_size, int val_size, int test_size,
                                       const ShiftConfig& shift, std::uint64_t seed);

/// Features of one stream step; labels ride along for post-hoc scoring but
/// are never handed to a merger.
struct Batch {
    MatX X;
    std::vector<int> y;
};

struct StreamPlan {
    std::string kind; // "iid", "dirichlet" or "temporal"
    std::uint64_t seed = 0;
    std::vector<Batch> batches;
    /// Realized per-batch class proportions; each row sums to one.
    std::vector<std::vector<double>> mixture_trace;
};

/// Batches drawn uniformly with replacement from the pool.
StreamPlan iid_stream(const LabeledSet& pool, int batch_size, int num_batches,
                      std::uint64_t seed);

/// Class-skewed batches: per batch, proportions drawn from Dirichlet with
/// symmetric concentration `alpha`, counts by largest-remainder apportionment
/// of proportions * batch_size, and samples taken from the pool's class
/// buckets, without replacement inside a batch while a bucket lasts. Small
/// alpha concentrates batches on few classes. batch_size larger than the
/// pool throws config_error.
StreamPlan dirichlet_stream(const LabeledSet& pool, double alpha, int batch_size,
                            int num_batches, std::uint64_t seed);

/// Sticky-Markov stream: the dominant class persists with probability
/// `stickiness`, otherwise resamples uniformly over all classes. Each batch
/// holds 80% dominant-class samples, remainder uniform over the other
/// classes. `stickiness` must lie in [0, 1).
StreamPlan temporal_stream(const LabeledSet& pool, double stickiness, int batch_size,
                           int num_batches, std::uint64_t seed);

/// Union of several labeled sets (used to pool held-out tests).
LabeledSet concat_sets(const std::vector<LabeledSet>& sets);

struct CsvSchema {
    std::string label_column = "label";
    bool standardize = false; // per-feature zero mean, unit variance
};

/// Header row then one sample per line; the label column holds nonnegative
/// integers, every other column is a feature. Malformed rows report their
/// line number; a file with no data rows throws empty_dataset_error.
LabeledSet load_csv(const std::string& path, const CsvSchema& schema = {});

/// Inverse of load_csv up to float formatting; features print with enough
/// digits to round-trip exactly.
void save_csv(const std::string& path, const LabeledSet& set,
              const std::string& label_column = "label");

} // namespace emrg
