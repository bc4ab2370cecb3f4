#include "emrg/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "emrg/errors.hpp"

namespace emrg {

namespace {

AdaptiveRule rule_for(MergeMethod kind) {
    switch (kind) {
    case MergeMethod::entropy_adaptive: return AdaptiveRule::full;
    case MergeMethod::entropy_only: return AdaptiveRule::entropy_only;
    case MergeMethod::decoupled_head_only: return AdaptiveRule::head_only;
    default: throw config_error("method has no adaptive rule");
    }
}

bool is_adaptive(MergeMethod kind) {
    return kind == MergeMethod::entropy_adaptive || kind == MergeMethod::entropy_only ||
           kind == MergeMethod::decoupled_head_only;
}

} // namespace

StreamEvalResult evaluate_stream(const ExpertPool& pool,
                                 const std::vector<DomainDataset>& sources,
                                 const MethodSpec& method, const StreamPlan& stream,
                                 const EngineConfig& engine, std::uint64_t seed) {
    if (pool.size() < 1) throw empty_pool_error("cannot evaluate an empty pool");
    StreamEvalResult result;
    result.batch_accuracies.reserve(stream.batches.size());
    Activation act = pool.spec.activation;

    if (is_adaptive(method.kind)) {
        AdaptiveRule rule = rule_for(method.kind);
        EngineState state = EngineState::initial(pool.size());
        std::mt19937_64 rng(mix_seed(seed, 0xc0ef));
        for (const Batch& batch : stream.batches) {
            MergeStepResult step = merge_step(pool, state, batch.X, engine, rng, rule);
            result.batch_accuracies.push_back(
                accuracy(step.prediction.predicted_class, batch.y));
            result.coefficient_trace.push_back(step.coefficients);
        }
        return result;
    }

    if (method.kind == MergeMethod::ensemble) {
        for (const Batch& batch : stream.batches) {
            Prediction pred = ensemble_predict(pool, batch.X);
            result.batch_accuracies.push_back(accuracy(pred.predicted_class, batch.y));
        }
        return result;
    }

    // The remaining methods merge once up front and reuse the result.
    ParameterSet merged;
    switch (method.kind) {
    case MergeMethod::mean:
        merged = mean_merge(pool);
        break;
    case MergeMethod::task_arithmetic:
        merged = task_arithmetic_merge(pool);
        break;
    case MergeMethod::ties:
        merged = ties_merge(pool);
        break;
    case MergeMethod::fisher:
        merged = fisher_merge(pool, sources);
        break;
    case MergeMethod::single_expert:
        if (method.expert < 0 || method.expert >= pool.size()) {
            throw config_error("single_expert index " + std::to_string(method.expert) +
                               " out of range for a pool of " + std::to_string(pool.size()));
        }
        merged = pool.experts[method.expert].params;
        break;
    default:
        throw config_error("unhandled merge method");
    }
    for (const Batch& batch : stream.batches) {
        Prediction pred = forward(merged, act, batch.X);
        result.batch_accuracies.push_back(accuracy(pred.predicted_class, batch.y));
    }
    return result;
}

RunReport run_leave_one_out(const ExperimentConfig& cfg) {
    validate(cfg);
    RunReport report;
    for (std::uint64_t seed : cfg.seeds) {
        std::vector<DomainDataset> domains =
            gen_domains(cfg.data.num_domains, cfg.data.num_classes, cfg.data.input_dim,
                        cfg.data.train_size, cfg.data.val_size, cfg.data.test_size,
                        cfg.data.shift, mix_seed(seed, 0xda7a));
        ModelSpec spec = cfg.model.spec(cfg.data);
        for (std::size_t held = 0; held < domains.size(); ++held) {
            std::vector<DomainDataset> train_domains;
            for (std::size_t k = 0; k < domains.size(); ++k) {
                if (k != held) train_domains.push_back(domains[k]);
            }
            ExpertPool pool = build_pool(train_domains, spec, cfg.sweep,
                                         mix_seed(mix_seed(seed, 0x9001), held));
            StreamPlan stream = make_stream(domains[held].test, cfg.stream,
                                            mix_seed(mix_seed(seed, 0x57e0), held));
            for (const MethodSpec& method : cfg.methods) {
                auto started = std::chrono::steady_clock::now();
                StreamEvalResult eval =
                    evaluate_stream(pool, train_domains, method, stream, cfg.engine,
                                    mix_seed(mix_seed(seed, 0xe7a1), held));
                auto elapsed = std::chrono::steady_clock::now() - started;

                RunCell cell;
                cell.domain = domains[held].name;
                cell.method = to_string(method);
                cell.seed = seed;
                cell.batch_accuracies = std::move(eval.batch_accuracies);
                double total = 0.0;
                for (double a : cell.batch_accuracies) total += a;
                cell.mean_accuracy =
                    cell.batch_accuracies.empty()
                        ? 0.0
                        : total / static_cast<double>(cell.batch_accuracies.size());
                cell.coefficient_trace = std::move(eval.coefficient_trace);
                cell.wall_seconds = std::chrono::duration<double>(elapsed).count();
                report.cells.push_back(std::move(cell));
            }
        }
    }
    report.aggregates = aggregate(report.cells);
    return report;
}

std::vector<MethodAggregate> aggregate(const std::vector<RunCell>& cells) {
    std::vector<MethodAggregate> out;
    std::vector<double> counts;
    auto slot = [&](const std::string& method) -> std::size_t {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].method == method) return i;
        }
        out.push_back(MethodAggregate{method, 0.0, 0.0, 0.0});
        counts.push_back(0.0);
        return out.size() - 1;
    };
    // Mean over every batch row of the method, then population variance over
    // the same rows.
    for (const RunCell& cell : cells) {
        std::size_t i = slot(cell.method);
        for (double a : cell.batch_accuracies) {
            out[i].mean_accuracy += a;
            counts[i] += 1.0;
        }
        out[i].total_seconds += cell.wall_seconds;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (counts[i] > 0.0) out[i].mean_accuracy /= counts[i];
    }
    for (const RunCell& cell : cells) {
        std::size_t i = slot(cell.method);
        for (double a : cell.batch_accuracies) {
            double d = a - out[i].mean_accuracy;
            out[i].std_accuracy += d * d;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].std_accuracy = counts[i] > 0.0 ? std::sqrt(out[i].std_accuracy / counts[i]) : 0.0;
    }
    return out;
}

void emit_report(const RunReport& report, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create '" + dir + "': " + ec.message());

    auto open = [&](const char* name) {
        std::ofstream out(std::filesystem::path(dir) / name,
                          std::ios::binary | std::ios::trunc);
        if (!out) throw io_error(std::string("cannot write '") + name + "' in '" + dir + "'");
        return out;
    };
    char buf[64];
    // %.17g round-trips doubles, so consumers can recompute aggregates to
    // the digit and the file stays byte-identical across runs.
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };

    {
        std::ofstream out = open("results.csv");
        out << "domain,method,seed,batch_idx,accuracy\n";
        for (const RunCell& cell : report.cells) {
            for (std::size_t b = 0; b < cell.batch_accuracies.size(); ++b) {
                out << cell.domain << ',' << cell.method << ',' << cell.seed << ',' << b
                    << ',' << fmt(cell.batch_accuracies[b]) << '\n';
            }
        }
    }

    {
        std::ofstream out = open("coeffs.csv");
        out << "domain,method,seed,t,expert,alpha_enc,alpha_head\n";
        for (const RunCell& cell : report.cells) {
            for (const MergeCoefficients& c : cell.coefficient_trace) {
                for (std::size_t k = 0; k < c.encoder.size(); ++k) {
                    out << cell.domain << ',' << cell.method << ',' << cell.seed << ','
                        << c.step << ',' << k << ',' << fmt(c.encoder[k]) << ','
                        << fmt(c.head[k]) << '\n';
                }
            }
        }
    }

    nlohmann::json summary;
    summary["num_cells"] = report.cells.size();
    nlohmann::json methods = nlohmann::json::array();
    for (const MethodAggregate& a : report.aggregates) {
        methods.push_back({{"method", a.method},
                           {"mean_accuracy", a.mean_accuracy},
                           {"std_accuracy", a.std_accuracy},
                           {"total_seconds", a.total_seconds}});
    }
    summary["methods"] = methods;
    nlohmann::json cells = nlohmann::json::array();
    for (const RunCell& cell : report.cells) {
        cells.push_back({{"domain", cell.domain},
                         {"method", cell.method},
                         {"seed", cell.seed},
                         {"mean_accuracy", cell.mean_accuracy},
                         {"wall_seconds", cell.wall_seconds}});
    }
    summary["cells"] = cells;
    std::ofstream out = open("summary.json");
    out << summary.dump(2) << '\n';
}

} // namespace emrg
