#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "emrg/harness.hpp"
#include "emrg/errors.hpp"
#include "test_helpers.hpp"

using namespace emrg;

namespace {

struct Fixture {
    std::vector<DomainDataset> domains;
    std::vector<DomainDataset> sources; // training domains, expert order
    ExpertPool pool;
    StreamPlan stream; // from the held-out domain's test split
};

const Fixture& fix() {
    static Fixture f = [] {
        Fixture x;
        ShiftConfig shift;
        x.domains = gen_domains(3, 3, 8, 64, 32, 128, shift, 11);
        x.sources = {x.domains[1], x.domains[2]};
        HyperConfig h;
        h.epochs = 5;
        x.pool = build_pool(x.sources, testutil::tiny_spec(8, 8, 3), {h}, 21);
        x.stream = iid_stream(x.domains[0].test, 16, 6, 31);
        return x;
    }();
    return f;
}

MethodSpec method(const char* name) { return merge_method_from_string(name); }

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    const std::string& expect_header) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == expect_header);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        rows.push_back(std::move(fields));
    }
    return rows;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig tiny_experiment() {
    ExperimentConfig cfg;
    cfg.data.num_domains = 3;
    cfg.data.num_classes = 3;
    cfg.data.input_dim = 6;
    cfg.data.train_size = 48;
    cfg.data.val_size = 24;
    cfg.data.test_size = 64;
    cfg.model.hidden_dims = {8};
    HyperConfig h;
    h.epochs = 3;
    cfg.sweep = {h};
    cfg.stream = parse_stream_spec("iid");
    cfg.stream.batch_size = 16;
    cfg.stream.num_batches = 4;
    cfg.methods = {method("mean"), method("entropy_adaptive")};
    cfg.seeds = {1, 2};
    return cfg;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("evaluate_stream scores every batch for every method") {
    const Fixture& f = fix();
    EngineConfig engine;
    const char* names[] = {"entropy_adaptive", "entropy_only", "decoupled_head_only",
                           "mean", "ensemble", "task_arithmetic", "ties",
                           "fisher", "single_expert:0"};
    for (const char* name : names) {
        CAPTURE(name);
        MethodSpec m = method(name);
        StreamEvalResult r = evaluate_stream(f.pool, f.sources, m, f.stream, engine, 5);
        REQUIRE(r.batch_accuracies.size() == f.stream.batches.size());
        for (double a : r.batch_accuracies) {
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }
        bool adaptive = m.kind == MergeMethod::entropy_adaptive ||
                        m.kind == MergeMethod::entropy_only ||
                        m.kind == MergeMethod::decoupled_head_only;
        if (adaptive) {
            REQUIRE(r.coefficient_trace.size() == f.stream.batches.size());
            for (std::size_t t = 0; t < r.coefficient_trace.size(); ++t) {
                const MergeCoefficients& c = r.coefficient_trace[t];
                CHECK(c.step == static_cast<int>(t)); // 0-based batch index
                REQUIRE(c.encoder.size() == 2);
                REQUIRE(c.head.size() == 2);
                double enc_sum = c.encoder[0] + c.encoder[1];
                double head_sum = c.head[0] + c.head[1];
                CHECK(enc_sum == doctest::Approx(1.0).epsilon(1e-9));
                CHECK(head_sum == doctest::Approx(1.0).epsilon(1e-9));
            }
        } else {
            CHECK(r.coefficient_trace.empty());
        }
    }
}

TEST_CASE("static merges match scoring the merged model directly") {
    const Fixture& f = fix();
    EngineConfig engine;
    Activation act = f.pool.spec.activation;

    StreamEvalResult via_mean =
        evaluate_stream(f.pool, f.sources, method("mean"), f.stream, engine, 5);
    ParameterSet merged = mean_merge(f.pool);
    for (std::size_t t = 0; t < f.stream.batches.size(); ++t) {
        const Batch& b = f.stream.batches[t];
        double direct = accuracy(forward(merged, act, b.X).predicted_class, b.y);
        CHECK(via_mean.batch_accuracies[t] == direct);
    }

    StreamEvalResult via_ens =
        evaluate_stream(f.pool, f.sources, method("ensemble"), f.stream, engine, 5);
    for (std::size_t t = 0; t < f.stream.batches.size(); ++t) {
        const Batch& b = f.stream.batches[t];
        double direct = accuracy(ensemble_predict(f.pool, b.X).predicted_class, b.y);
        CHECK(via_ens.batch_accuracies[t] == direct);
    }

    StreamEvalResult via_single =
        evaluate_stream(f.pool, f.sources, method("single_expert:1"), f.stream, engine, 5);
    for (std::size_t t = 0; t < f.stream.batches.size(); ++t) {
        const Batch& b = f.stream.batches[t];
        double direct =
            accuracy(forward(f.pool.experts[1].params, act, b.X).predicted_class, b.y);
        CHECK(via_single.batch_accuracies[t] == direct);
    }
}

TEST_CASE("adaptive evaluation is deterministic in the seed") {
    const Fixture& f = fix();
    EngineConfig engine;
    StreamEvalResult a =
        evaluate_stream(f.pool, f.sources, method("entropy_adaptive"), f.stream, engine, 9);
    StreamEvalResult b =
        evaluate_stream(f.pool, f.sources, method("entropy_adaptive"), f.stream, engine, 9);
    CHECK(a.batch_accuracies == b.batch_accuracies);
    REQUIRE(a.coefficient_trace.size() == b.coefficient_trace.size());
    for (std::size_t t = 0; t < a.coefficient_trace.size(); ++t) {
        CHECK(a.coefficient_trace[t].encoder == b.coefficient_trace[t].encoder);
        CHECK(a.coefficient_trace[t].head == b.coefficient_trace[t].head);
    }
}

TEST_CASE("evaluate_stream input validation") {
    const Fixture& f = fix();
    EngineConfig engine;
    ExpertPool empty;
    empty.spec = f.pool.spec;
    empty.init = f.pool.init;
    CHECK_THROWS_AS(evaluate_stream(empty, f.sources, method("mean"), f.stream, engine, 5),
                    empty_pool_error);

    MethodSpec oob = method("single_expert:2"); // pool only holds experts 0 and 1
    CHECK_THROWS_WITH_AS(evaluate_stream(f.pool, f.sources, oob, f.stream, engine, 5),
                         doctest::Contains("out of range"), config_error);
}

TEST_CASE("run_leave_one_out fills seeds x domains x methods") {
    ExperimentConfig cfg = tiny_experiment();
    RunReport report = run_leave_one_out(cfg);
    REQUIRE(report.cells.size() == 2 * 3 * 2);

    std::size_t at = 0;
    for (std::uint64_t seed : cfg.seeds) {
        for (int held = 0; held < 3; ++held) {
            for (const MethodSpec& m : cfg.methods) {
                const RunCell& cell = report.cells[at++];
                CHECK(cell.seed == seed);
                CHECK(cell.domain == "domain" + std::to_string(held));
                CHECK(cell.method == to_string(m));
                REQUIRE(cell.batch_accuracies.size() == 4);
                double total = 0.0;
                for (double a : cell.batch_accuracies) total += a;
                CHECK(cell.mean_accuracy == doctest::Approx(total / 4.0).epsilon(1e-12));
                CHECK(cell.wall_seconds >= 0.0);
                if (m.kind == MergeMethod::entropy_adaptive) {
                    CHECK(cell.coefficient_trace.size() == 4);
                } else {
                    CHECK(cell.coefficient_trace.empty());
                }
            }
        }
    }

    REQUIRE(report.aggregates.size() == 2);
    CHECK(report.aggregates[0].method == "mean");
    CHECK(report.aggregates[1].method == "entropy_adaptive");
    std::vector<MethodAggregate> again = aggregate(report.cells);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(report.aggregates[i].method == again[i].method);
        CHECK(report.aggregates[i].mean_accuracy == again[i].mean_accuracy);
        CHECK(report.aggregates[i].std_accuracy == again[i].std_accuracy);
    }

    ExperimentConfig bad = cfg;
    bad.data.num_domains = 2;
    CHECK_THROWS_AS(run_leave_one_out(bad), config_error);
}

TEST_CASE("aggregate pools batch rows per method with population std") {
    RunCell c1;
    c1.method = "m";
    c1.batch_accuracies = {1.0, 0.0};
    c1.wall_seconds = 1.5;
    RunCell c2;
    c2.method = "m";
    c2.batch_accuracies = {1.0, 1.0};
    c2.wall_seconds = 2.5;
    RunCell c3;
    c3.method = "z";
    c3.batch_accuracies = {0.5};
    c3.wall_seconds = 0.25;

    std::vector<MethodAggregate> out = aggregate({c1, c2, c3});
    REQUIRE(out.size() == 2);
    CHECK(out[0].method == "m"); // first appearance wins
    CHECK(out[0].mean_accuracy == 0.75);
    CHECK(out[0].std_accuracy == std::sqrt(0.1875));
    CHECK(out[0].total_seconds == 4.0);
    CHECK(out[1].method == "z");
    CHECK(out[1].mean_accuracy == 0.5);
    CHECK(out[1].std_accuracy == 0.0);
    CHECK(out[1].total_seconds == 0.25);

    CHECK(aggregate({}).empty());

    RunCell hollow;
    hollow.method = "empty";
    std::vector<MethodAggregate> h = aggregate({hollow});
    REQUIRE(h.size() == 1);
    CHECK(h[0].mean_accuracy == 0.0);
    CHECK(h[0].std_accuracy == 0.0);
}

TEST_CASE("emit_report writes consistent, deterministic files") {
    RunReport report;
    RunCell plain;
    plain.domain = "domain0";
    plain.method = "mean";
    plain.seed = 3;
    plain.batch_accuracies = {0.25, 0.5};
    plain.mean_accuracy = 0.375;
    plain.wall_seconds = 0.125;
    RunCell adaptive;
    adaptive.domain = "domain0";
    adaptive.method = "entropy_adaptive";
    adaptive.seed = 3;
    adaptive.batch_accuracies = {0.75, 1.0};
    adaptive.mean_accuracy = 0.875;
    adaptive.wall_seconds = 0.25;
    for (int t = 1; t <= 2; ++t) {
        MergeCoefficients c;
        c.encoder = {0.625, 0.375};
        c.head = {1.0, 0.0};
        c.step = t;
        adaptive.coefficient_trace.push_back(c);
    }
    report.cells = {plain, adaptive};
    report.aggregates = aggregate(report.cells);

    std::string dir_a = "/tmp/emrg_report_a";
    std::string dir_b = "/tmp/emrg_report_b";
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    emit_report(report, dir_a);
    emit_report(report, dir_b);

    auto rows = read_csv_rows(dir_a + "/results.csv", "domain,method,seed,batch_idx,accuracy");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == std::vector<std::string>{"domain0", "mean", "3", "0", "0.25"});
    CHECK(rows[3][1] == "entropy_adaptive");
    CHECK(rows[3][3] == "1");
    double mean_sum = 0.0;
    double ea_sum = 0.0;
    for (const auto& r : rows) {
        double v = std::strtod(r[4].c_str(), nullptr);
        (r[1] == "mean" ? mean_sum : ea_sum) += v;
    }
    CHECK(mean_sum / 2.0 == report.aggregates[0].mean_accuracy);
    CHECK(ea_sum / 2.0 == report.aggregates[1].mean_accuracy);

    auto coeff_rows =
        read_csv_rows(dir_a + "/coeffs.csv", "domain,method,seed,t,expert,alpha_enc,alpha_head");
    REQUIRE(coeff_rows.size() == 4); // 2 batches x 2 experts, adaptive cell only
    for (const auto& r : coeff_rows) CHECK(r[1] == "entropy_adaptive");
    CHECK(coeff_rows[0] ==
          std::vector<std::string>{"domain0", "entropy_adaptive", "3", "1", "0", "0.625", "1"});
    CHECK(coeff_rows[1][4] == "1");
    CHECK(coeff_rows[1][5] == "0.375");
    CHECK(coeff_rows[1][6] == "0");

    // unlike summary.json, the csv outputs carry no timing and must be stable
    CHECK(slurp(dir_a + "/results.csv") == slurp(dir_b + "/results.csv"));
    CHECK(slurp(dir_a + "/coeffs.csv") == slurp(dir_b + "/coeffs.csv"));

    nlohmann::json summary = nlohmann::json::parse(slurp(dir_a + "/summary.json"));
    CHECK(summary.at("num_cells").get<std::size_t>() == 2);
    REQUIRE(summary.at("methods").size() == 2);
    CHECK(summary["methods"][0].at("method").get<std::string>() == "mean");
    CHECK(summary["methods"][0].at("mean_accuracy").get<double>() ==
          report.aggregates[0].mean_accuracy);
    CHECK(summary["methods"][1].at("std_accuracy").get<double>() ==
          report.aggregates[1].std_accuracy);
    CHECK(summary["methods"][1].at("total_seconds").get<double>() == 0.25);
    REQUIRE(summary.at("cells").size() == 2);
    CHECK(summary["cells"][1].at("mean_accuracy").get<double>() == 0.875);
    CHECK(summary["cells"][1].at("wall_seconds").get<double>() == 0.25);

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);

    std::string blocker = "/tmp/emrg_report_blocker";
    std::ofstream(blocker) << "x";
    CHECK_THROWS_AS(emit_report(report, blocker), io_error);
    std::remove(blocker.c_str());
}

} // TEST_SUITE

