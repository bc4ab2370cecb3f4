#include "emrg/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>

namespace emrg {

double layer_angle(const ParameterSet& a, const ParameterSet& b, const std::string& selector) {
    double c = cosine(flatten_layer(a, selector), flatten_layer(b, selector));
    return std::acos(c) * 180.0 / std::numbers::pi;
}

double norm_ratio(const ParameterSet& a, const ParameterSet& b, const std::string& selector) {
    double denom = norm(flatten_layer(b, selector));
    if (denom == 0.0) throw degenerate_vector_error("norm ratio against a zero layer");
    return norm(flatten_layer(a, selector)) / denom;
}

double mean_angular_drift(const std::vector<const ParameterSet*>& models,
                          const std::string& selector) {
    if (models.size() < 2) throw invalid_parameter_error("drift needs at least two models");
    for (const ParameterSet* m : models) require_compatible(*models[0], *m);
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            sum += layer_angle(*models[i], *models[j], selector);
            ++pairs;
        }
    }
    return sum / pairs;
}

double mean_angular_drift(const std::vector<ParameterSet>& models, const std::string& selector) {
    std::vector<const ParameterSet*> ptrs;
    ptrs.reserve(models.size());
    for (const ParameterSet& m : models) ptrs.push_back(&m);
    return mean_angular_drift(ptrs, selector);
}

std::vector<double> mean_angular_drift(const std::vector<ParameterSet>& models) {
    if (models.empty()) throw invalid_parameter_error("drift needs at least two models");
    std::vector<double> out;
    for (const std::string& sel : layer_selectors(models[0])) {
        out.push_back(mean_angular_drift(models, sel));
    }
    return out;
}

double signal_loss(double angle_degrees) {
    if (angle_degrees < 0.0 || angle_degrees > 180.0) {
        throw domain_error("angle " + std::to_string(angle_degrees) + " outside [0, 180]");
    }
    return 100.0 * (1.0 - std::cos(angle_degrees * std::numbers::pi / 360.0));
}

const LayerDrift& DriftReport::at(const std::string& selector) const {
    for (const LayerDrift& l : layers) {
        if (l.selector == selector) return l;
    }
    throw not_found_error("no drift entry for layer '" + selector + "'");
}

DriftReport compute_drift(const std::vector<const ParameterSet*>& models) {
    if (models.size() < 2) throw invalid_parameter_error("drift needs at least two models");
    for (const ParameterSet* m : models) require_compatible(*models[0], *m);

    DriftReport report;
    for (const std::string& sel : layer_selectors(*models[0])) {
        LayerDrift layer;
        layer.selector = sel;
        double sum = 0.0;
        int pairs = 0;
        for (std::size_t i = 0; i < models.size(); ++i) {
            for (std::size_t j = i + 1; j < models.size(); ++j) {
                PairAngle pa;
                pa.selector = sel;
                pa.model_i = static_cast<int>(i);
                pa.model_j = static_cast<int>(j);
                pa.angle_degrees = layer_angle(*models[i], *models[j], sel);
                pa.norm_ratio = norm_ratio(*models[i], *models[j], sel);
                sum += pa.angle_degrees;
                ++pairs;
                report.pairs.push_back(std::move(pa));
            }
        }
        layer.mean_angle_degrees = sum / pairs;
        layer.signal_loss_percent = signal_loss(layer.mean_angle_degrees);
        report.layers.push_back(std::move(layer));
    }
    return report;
}

DriftReport compute_drift(const std::vector<ParameterSet>& models) {
    std::vector<const ParameterSet*> ptrs;
    ptrs.reserve(models.size());
    for (const ParameterSet& m : models) ptrs.push_back(&m);
    return compute_drift(ptrs);
}

void export_heatmap_csv(const std::string& path,
                        const std::vector<const ParameterSet*>& models) {
    DriftReport report = compute_drift(models);
    std::ofstream out(path);
    if (!out) throw io_error("cannot write '" + path + "'");
    out << "layer,expert_i,expert_j,angle_deg,norm_ratio\n";
    char buf[96];
    for (const PairAngle& p : report.pairs) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f", p.model_i, p.model_j,
                      p.angle_degrees, p.norm_ratio);
        out << p.selector << "," << buf << "\n";
    }
    if (!out) throw io_error("failed while writing '" + path + "'");
}

void export_heatmap_csv(const std::string& path, const std::vector<ParameterSet>& models) {
    std::vector<const ParameterSet*> ptrs;
    ptrs.reserve(models.size());
    for (const ParameterSet& m : models) ptrs.push_back(&m);
    export_heatmap_csv(path, ptrs);
}

std::vector<PairAngle> import_heatmap_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "layer,expert_i,expert_j,angle_deg,norm_ratio") {
        throw parse_error("'" + path + "' is not a drift heatmap file");
    }
    std::vector<PairAngle> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        PairAngle p;
        std::size_t at = line.find(',');
        if (at == std::string::npos) {
            throw parse_error("line " + std::to_string(line_no) + ": malformed row");
        }
        p.selector = line.substr(0, at);
        const char* rest = line.c_str() + at + 1;
        char* end = nullptr;
        p.model_i = static_cast<int>(std::strtol(rest, &end, 10));
        if (*end != ',') throw parse_error("line " + std::to_string(line_no) + ": bad expert_i");
        p.model_j = static_cast<int>(std::strtol(end + 1, &end, 10));
        if (*end != ',') throw parse_error("line " + std::to_string(line_no) + ": bad expert_j");
        p.angle_degrees = std::strtod(end + 1, &end);
        if (*end != ',') throw parse_error("line " + std::to_string(line_no) + ": bad angle");
        p.norm_ratio = std::strtod(end + 1, &end);
        if (*end != '\0') throw parse_error("line " + std::to_string(line_no) + ": bad ratio");
        rows.push_back(std::move(p));
    }
    return rows;
}

} // namespace emrg
