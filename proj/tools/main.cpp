#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "emrg/checkpoint.hpp"
#include "emrg/config.hpp"
#include "emrg/diagnostics.hpp"
#include "emrg/errors.hpp"
#include "emrg/harness.hpp"

namespace fs = std::filesystem;
using namespace emrg;

namespace {

ExperimentConfig load_or_default(const std::string& path) {
    return path.empty() ? ExperimentConfig{} : load_experiment_config(path);
}

std::vector<DomainDataset> domains_for(const ExperimentConfig& cfg, std::uint64_t seed) {
    // Same derivation the evaluation harness uses, so `gen-data --seed N`
    // shows exactly the data an eval run with seed N trains on.
    return gen_domains(cfg.data.num_domains, cfg.data.num_classes, cfg.data.input_dim,
                       cfg.data.train_size, cfg.data.val_size, cfg.data.test_size,
                       cfg.data.shift, mix_seed(seed, 0xda7a));
}

void print_aggregates(const std::vector<MethodAggregate>& aggregates) {
    std::printf("%-24s %12s %12s %10s\n", "method", "mean_acc", "std_acc", "seconds");
    for (const MethodAggregate& a : aggregates) {
        std::printf("%-24s %12.4f %12.4f %10.2f\n", a.method.c_str(), a.mean_accuracy,
                    a.std_accuracy, a.total_seconds);
    }
}

int cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out) {
    std::vector<DomainDataset> domains = domains_for(cfg, seed);
    fs::create_directories(out);
    for (const DomainDataset& d : domains) {
        save_csv((fs::path(out) / (d.name + ".train.csv")).string(), d.train);
        save_csv((fs::path(out) / (d.name + ".val.csv")).string(), d.val);
        save_csv((fs::path(out) / (d.name + ".test.csv")).string(), d.test);
        std::printf("%s: train=%d val=%d test=%d\n", d.name.c_str(), d.train.size(),
                    d.val.size(), d.test.size());
    }
    std::printf("wrote %zu domains to %s\n", domains.size(), out.c_str());
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out) {
    std::vector<DomainDataset> domains = domains_for(cfg, seed);
    ExpertPool pool = build_pool(domains, cfg.model.spec(cfg.data), cfg.sweep,
                                 mix_seed(seed, 0x9001));
    fs::create_directories(out);
    std::string path = (fs::path(out) / "pool.emrg").string();
    save_checkpoint(path, pool, {{"seed", std::to_string(seed)}});
    for (const Expert& e : pool.experts) {
        std::printf("%-12s val_loss=%.4f val_acc=%.4f\n", e.domain.c_str(), e.val_loss,
                    e.val_accuracy);
    }
    std::printf("saved %d experts to %s\n", pool.size(), path.c_str());
    return 0;
}

int cmd_eval(ExperimentConfig cfg) {
    RunReport report = run_leave_one_out(cfg);
    emit_report(report, cfg.output_dir);
    print_aggregates(report.aggregates);
    std::printf("report written to %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& out,
                 const std::string& pool_path) {
    ExpertPool pool;
    if (!pool_path.empty()) {
        pool = load_checkpoint(pool_path).pool;
    } else {
        std::vector<DomainDataset> domains = domains_for(cfg, seed);
        pool = build_pool(domains, cfg.model.spec(cfg.data), cfg.sweep,
                          mix_seed(seed, 0x9001));
    }
    DriftReport drift = compute_drift(pool.expert_params());
    fs::create_directories(out);
    std::string path = (fs::path(out) / "drift.csv").string();
    export_heatmap_csv(path, pool.expert_params());
    std::printf("%-8s %14s %14s\n", "layer", "mean_angle_deg", "signal_loss_%");
    for (const LayerDrift& l : drift.layers) {
        std::printf("%-8s %14.3f %14.3f\n", l.selector.c_str(), l.mean_angle_degrees,
                    l.signal_loss_percent);
    }
    std::printf("pairwise angles written to %s\n", path.c_str());
    return 0;
}

int cmd_report(const std::string& dir) {
    std::string path = (fs::path(dir) / "results.csv").string();
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "domain,method,seed,batch_idx,accuracy") {
        throw format_error("'" + path + "' lacks the results.csv header");
    }
    std::vector<RunCell> cells;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string domain, method, seed_s, batch_s, acc_s;
        if (!std::getline(row, domain, ',') || !std::getline(row, method, ',') ||
            !std::getline(row, seed_s, ',') || !std::getline(row, batch_s, ',') ||
            !std::getline(row, acc_s)) {
            throw format_error(path + ":" + std::to_string(line_no) + ": short row");
        }
        char* end = nullptr;
        double acc = std::strtod(acc_s.c_str(), &end);
        if (end == acc_s.c_str() || *end != '\0') {
            throw format_error(path + ":" + std::to_string(line_no) + ": bad accuracy '" +
                               acc_s + "'");
        }
        std::uint64_t seed = std::strtoull(seed_s.c_str(), nullptr, 10);
        if (cells.empty() || cells.back().domain != domain || cells.back().method != method ||
            cells.back().seed != seed) {
            RunCell cell;
            cell.domain = domain;
            cell.method = method;
            cell.seed = seed;
            cells.push_back(std::move(cell));
        }
        cells.back().batch_accuracies.push_back(acc);
    }
    if (cells.empty()) throw empty_dataset_error("'" + path + "' holds no result rows");
    print_aggregates(aggregate(cells));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"train per-domain experts, merge them per unlabeled batch, evaluate streams"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string method_name;
    std::string stream_name;
    std::string pool_path;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "TOML experiment config");
        cmd->add_option("--seed", seed, "run seed (default: first config seed)");
        cmd->add_option("--out", out_dir, "output directory (default: config output_dir)");
        return cmd;
    };

    CLI::App* gen = add_common(app.add_subcommand("gen-data", "write synthetic domain CSVs"));
    CLI::App* train =
        add_common(app.add_subcommand("train", "train one expert per domain, save the pool"));
    CLI::App* eval =
        add_common(app.add_subcommand("eval", "leave-one-domain-out stream evaluation"));
    eval->add_option("--method", method_name, "evaluate only this merge method");
    eval->add_option("--stream", stream_name, "iid, dirichlet:<alpha> or temporal:<stay>");
    CLI::App* diagnose =
        add_common(app.add_subcommand("diagnose", "pairwise parameter geometry of a pool"));
    diagnose->add_option("--pool", pool_path, "pool checkpoint (default: train one fresh)");
    CLI::App* report =
        add_common(app.add_subcommand("report", "re-aggregate results.csv into a table"));

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_or_default(config_path);
        CLI::App* sub = app.get_subcommands().front();
        std::uint64_t run_seed = sub->count("--seed") ? seed : cfg.seeds.front();
        std::string out = sub->count("--out") ? out_dir : cfg.output_dir;

        if (sub == gen) return cmd_gen_data(cfg, run_seed, out);
        if (sub == train) return cmd_train(cfg, run_seed, out);
        if (sub == eval) {
            if (sub->count("--seed")) cfg.seeds = {seed};
            if (sub->count("--out")) cfg.output_dir = out_dir;
            if (!method_name.empty()) cfg.methods = {merge_method_from_string(method_name)};
            if (!stream_name.empty()) {
                StreamSpec parsed = parse_stream_spec(stream_name);
                cfg.stream.kind = parsed.kind;
                cfg.stream.param = parsed.param;
            }
            validate(cfg);
            return cmd_eval(cfg);
        }
        if (sub == diagnose) return cmd_diagnose(cfg, run_seed, out, pool_path);
        if (sub == report) return cmd_report(out);
        throw config_error("unknown subcommand");
    } catch (const error& e) {
        std::cerr << "error [" << e.category() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << "\n";
        return 2;
    }
}
