#include "emrg/config.hpp"

#include <cstdio>
#include <cstdlib>

#include "emrg/errors.hpp"

namespace emrg {

ModelSpec ModelConfig::spec(const DataConfig& data) const {
    ModelSpec s;
    s.input_dim = data.input_dim;
    s.hidden_dims = hidden_dims;
    s.class_count = data.num_classes;
    s.activation = activation;
    return s;
}

StreamSpec parse_stream_spec(const std::string& text) {
    StreamSpec spec;
    std::string name = text;
    std::string arg;
    std::size_t colon = text.find(':');
    if (colon != std::string::npos) {
        name = text.substr(0, colon);
        arg = text.substr(colon + 1);
    }
    auto parse_param = [&](const char* what) {
        if (arg.empty()) throw config_error("stream '" + name + "' needs a " + what);
        char* end = nullptr;
        double v = std::strtod(arg.c_str(), &end);
        if (end == arg.c_str() || *end != '\0') {
            throw config_error("bad stream parameter '" + arg + "'");
        }
        return v;
    };
    if (name == "iid") {
        if (!arg.empty()) throw config_error("iid stream takes no parameter");
        spec.kind = StreamKind::iid;
        spec.param = 0.0;
    } else if (name == "dirichlet") {
        spec.kind = StreamKind::dirichlet;
        spec.param = parse_param("concentration");
    } else if (name == "temporal") {
        spec.kind = StreamKind::temporal;
        spec.param = parse_param("stay probability");
    } else {
        throw config_error("unknown stream '" + text +
                           "' (expected iid, dirichlet:<alpha> or temporal:<stay>)");
    }
    return spec;
}

std::string to_string(const StreamSpec& s) {
    char buf[64];
    switch (s.kind) {
    case StreamKind::iid:
        return "iid";
    case StreamKind::dirichlet:
        std::snprintf(buf, sizeof buf, "dirichlet:%g", s.param);
        return buf;
    case StreamKind::temporal:
        std::snprintf(buf, sizeof buf, "temporal:%g", s.param);
        return buf;
    }
    throw config_error("unhandled stream kind");
}

StreamPlan make_stream(const LabeledSet& pool, const StreamSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
    case StreamKind::iid:
        return iid_stream(pool, spec.batch_size, spec.num_batches, seed);
    case StreamKind::dirichlet:
        return dirichlet_stream(pool, spec.param, spec.batch_size, spec.num_batches, seed);
    case StreamKind::temporal:
        return temporal_stream(pool, spec.param, spec.batch_size, spec.num_batches, seed);
    }
    throw config_error("unhandled stream kind");
}

ExperimentConfig::ExperimentConfig() {
    for (const char* name : {"entropy_adaptive", "mean", "ensemble", "task_arithmetic",
                             "ties", "fisher"}) {
        methods.push_back(merge_method_from_string(name));
    }
}

namespace {

int get_pos_int(const toml::Document& doc, const std::string& sec, const std::string& key,
                int fallback) {
    std::int64_t v = doc.get_int(sec, key, fallback);
    if (v < 1) throw config_error("'" + sec + "." + key + "' must be positive");
    return static_cast<int>(v);
}

} // namespace

ExperimentConfig config_from_document(const toml::Document& doc) {
    ExperimentConfig cfg;

    cfg.data.num_domains = get_pos_int(doc, "data", "num_domains", cfg.data.num_domains);
    cfg.data.num_classes = get_pos_int(doc, "data", "num_classes", cfg.data.num_classes);
    cfg.data.input_dim = get_pos_int(doc, "data", "input_dim", cfg.data.input_dim);
    cfg.data.train_size = get_pos_int(doc, "data", "train_size", cfg.data.train_size);
    cfg.data.val_size = get_pos_int(doc, "data", "val_size", cfg.data.val_size);
    cfg.data.test_size = get_pos_int(doc, "data", "test_size", cfg.data.test_size);

    ShiftConfig& sh = cfg.data.shift;
    sh.anchor_spread = doc.get_double("shift", "anchor_spread", sh.anchor_spread);
    sh.cluster_std = doc.get_double("shift", "cluster_std", sh.cluster_std);
    sh.rotation_max_degrees =
        doc.get_double("shift", "rotation_max_degrees", sh.rotation_max_degrees);
    sh.scale_min = doc.get_double("shift", "scale_min", sh.scale_min);
    sh.scale_max = doc.get_double("shift", "scale_max", sh.scale_max);
    sh.mean_shift_scale = doc.get_double("shift", "mean_shift_scale", sh.mean_shift_scale);
    sh.prior_alpha = doc.get_double("shift", "prior_alpha", sh.prior_alpha);
    sh.label_noise = doc.get_double("shift", "label_noise", sh.label_noise);

    if (doc.has("model", "hidden_dims")) {
        cfg.model.hidden_dims.clear();
        for (std::int64_t d : doc.get_int_array("model", "hidden_dims", {})) {
            if (d < 1) throw config_error("hidden layer widths must be positive");
            cfg.model.hidden_dims.push_back(static_cast<int>(d));
        }
    }
    cfg.model.activation =
        activation_from_string(doc.get_string("model", "activation", "relu"));

    EngineConfig& en = cfg.engine;
    en.epsilon = doc.get_double("engine", "epsilon", en.epsilon);
    en.entropy_temperature =
        doc.get_double("engine", "entropy_temperature", en.entropy_temperature);
    en.head_temperature = doc.get_double("engine", "head_temperature", en.head_temperature);
    en.ema_momentum = doc.get_double("engine", "ema_momentum", en.ema_momentum);
    en.ema_head_only = doc.get_bool("engine", "ema_head_only", en.ema_head_only);
    en.views = get_pos_int(doc, "engine", "views", en.views);
    en.augment.jitter_scale = doc.get_double("engine", "jitter_scale", en.augment.jitter_scale);
    en.augment.dropout_rate = doc.get_double("engine", "dropout_rate", en.augment.dropout_rate);

    cfg.stream = parse_stream_spec(doc.get_string("stream", "spec", "dirichlet:0.05"));
    cfg.stream.batch_size = get_pos_int(doc, "stream", "batch_size", cfg.stream.batch_size);
    cfg.stream.num_batches = get_pos_int(doc, "stream", "num_batches", cfg.stream.num_batches);

    if (doc.has("run", "methods")) {
        cfg.methods.clear();
        for (const std::string& name : doc.get_string_array("run", "methods", {})) {
            cfg.methods.push_back(merge_method_from_string(name));
        }
    }
    if (doc.has("run", "seeds")) {
        cfg.seeds.clear();
        for (std::int64_t s : doc.get_int_array("run", "seeds", {})) {
            if (s < 0) throw config_error("seeds must be nonnegative");
            cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        }
    }
    cfg.output_dir = doc.get_string("run", "output_dir", cfg.output_dir);

    if (doc.has("sweep", "learning_rates")) {
        std::vector<double> rates = doc.get_double_array("sweep", "learning_rates", {});
        std::vector<std::int64_t> fallback_seeds(rates.size());
        for (std::size_t i = 0; i < rates.size(); ++i) fallback_seeds[i] = i;
        std::vector<std::int64_t> seeds =
            doc.get_int_array("sweep", "seeds", fallback_seeds);
        if (seeds.size() != rates.size()) {
            throw config_error("sweep.seeds must match sweep.learning_rates in length");
        }
        HyperConfig base;
        base.momentum = doc.get_double("sweep", "momentum", base.momentum);
        base.epochs = get_pos_int(doc, "sweep", "epochs", base.epochs);
        base.batch_size = get_pos_int(doc, "sweep", "batch_size", base.batch_size);
        base.weight_decay = doc.get_double("sweep", "weight_decay", base.weight_decay);
        cfg.sweep.clear();
        for (std::size_t i = 0; i < rates.size(); ++i) {
            HyperConfig h = base;
            h.learning_rate = rates[i];
            h.seed = static_cast<std::uint64_t>(seeds[i]);
            cfg.sweep.push_back(h);
        }
    } else {
        for (HyperConfig& h : cfg.sweep) {
            h.momentum = doc.get_double("sweep", "momentum", h.momentum);
            h.epochs = get_pos_int(doc, "sweep", "epochs", h.epochs);
            h.batch_size = get_pos_int(doc, "sweep", "batch_size", h.batch_size);
            h.weight_decay = doc.get_double("sweep", "weight_decay", h.weight_decay);
        }
    }

    validate(cfg);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return config_from_document(toml::parse_file(path));
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.data.num_domains < 3) {
        throw config_error("leave-one-out needs at least 3 domains");
    }
    if (cfg.data.num_classes < 2) throw config_error("need at least 2 classes");
    if (cfg.methods.empty()) throw config_error("no methods configured");
    if (cfg.seeds.empty()) throw config_error("no seeds configured");
    if (cfg.sweep.empty()) throw config_error("hyperparameter sweep is empty");
    if (cfg.stream.batch_size < 1) throw config_error("stream batch_size must be positive");
    if (cfg.stream.num_batches < 1) throw config_error("stream num_batches must be positive");
    for (const MethodSpec& m : cfg.methods) {
        if (m.kind == MergeMethod::single_expert &&
            (m.expert < 0 || m.expert >= cfg.data.num_domains - 1)) {
            throw config_error("single_expert index out of range for pool size");
        }
    }
}

} // namespace emrg
