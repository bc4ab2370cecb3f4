#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emrg/config.hpp"
#include "emrg/merging.hpp"

namespace emrg {

/// One (held-out domain, method, seed) evaluation cell.
struct RunCell {
    std::string domain;
    std::string method;
    std::uint64_t seed = 0;
    std::vector<double> batch_accuracies;
    double mean_accuracy = 0.0;
    std::vector<MergeCoefficients> coefficient_trace; // adaptive methods only
    double wall_seconds = 0.0;
};

struct MethodAggregate {
    std::string method;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0; // population std over cells
    double total_seconds = 0.0;
};

struct RunReport {
    std::vector<RunCell> cells;
    std::vector<MethodAggregate> aggregates; // in first-appearance method order
};

/// Accuracies and, for adaptive methods, the coefficient trace of one
/// method over one stream. Labels are consulted only after each batch's
/// prediction is fixed.
struct StreamEvalResult {
    std::vector<double> batch_accuracies;
    std::vector<MergeCoefficients> coefficient_trace;
};

/// Evaluates one method batch-by-batch. `sources` are the pool's training
/// domains in expert order (Fisher estimates draw on them); static merges
/// are built once and reused across batches.
StreamEvalResult evaluate_stream(const ExpertPool& pool,
                                 const std::vector<DomainDataset>& sources,
                                 const MethodSpec& method, const StreamPlan& stream,
                                 const EngineConfig& engine, std::uint64_t seed);

/// Full protocol: per seed, generate domains, and for every held-out domain
/// train a pool on the rest, stream the held-out test split, and score each
/// configured method. Requires at least 3 domains.
RunReport run_leave_one_out(const ExperimentConfig& cfg);

/// Recomputes the per-method aggregates from the cells.
std::vector<MethodAggregate> aggregate(const std::vector<RunCell>& cells);

/// Writes results.csv (domain,method,seed,batch_idx,accuracy), summary.json
/// (per-method aggregates plus run dimensions) and coeffs.csv
/// (domain,method,seed,t,expert,alpha_enc,alpha_head). results.csv and
/// coeffs.csv are byte-deterministic for a fixed config and seeds; timing
/// lives only in summary.json.
void emit_report(const RunReport& report, const std::string& dir);

} // namespace emrg
