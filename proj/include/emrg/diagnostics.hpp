#pragma once

#include <string>
#include <vector>

#include "emrg/parameter_set.hpp"

namespace emrg {

/// Angle in degrees between one layer of two models, measured on the
/// flattened parameter vectors. Range [0, 180].
double layer_angle(const ParameterSet& a, const ParameterSet& b, const std::string& selector);

/// ||layer of a|| / ||layer of b||; a zero denominator throws.
double norm_ratio(const ParameterSet& a, const ParameterSet& b, const std::string& selector);

/// Mean layer angle over all unordered model pairs. Needs at least two
/// models; all must be shape compatible.
double mean_angular_drift(const std::vector<const ParameterSet*>& models,
                          const std::string& selector);
double mean_angular_drift(const std::vector<ParameterSet>& models, const std::string& selector);

/// Per-depth drift in canonical layer order (encoder blocks, then head).
std::vector<double> mean_angular_drift(const std::vector<ParameterSet>& models);

/// Worst-case interpolation signal retention for two equal-norm directions
/// that disagree by `angle_degrees`: their midpoint keeps cos(angle/2) of
/// either norm, so the loss is 100 * (1 - cos(angle/2)) percent. The angle
/// must lie in [0, 180].
double signal_loss(double angle_degrees);

/// One unordered model pair at one layer.
struct PairAngle {
    std::string selector;
    int model_i = 0;
    int model_j = 0;
    double angle_degrees = 0.0;
    double norm_ratio = 1.0;
};

struct LayerDrift {
    std::string selector;
    double mean_angle_degrees = 0.0;
    double signal_loss_percent = 0.0; // at the mean angle
};

/// Pairwise geometry of a model pool plus per-depth means, layers in
/// canonical order and pairs ordered (layer, i, j) with i < j.
struct DriftReport {
    std::vector<PairAngle> pairs;
    std::vector<LayerDrift> layers;

    const LayerDrift& at(const std::string& selector) const;
};

DriftReport compute_drift(const std::vector<const ParameterSet*>& models);
DriftReport compute_drift(const std::vector<ParameterSet>& models);

/// Long-format CSV, header "layer,expert_i,expert_j,angle_deg,norm_ratio",
/// one row per unordered pair per layer in report order, angles and ratios
/// at six decimal places. Re-exporting the same models is byte-identical.
void export_heatmap_csv(const std::string& path,
                        const std::vector<const ParameterSet*>& models);
void export_heatmap_csv(const std::string& path, const std::vector<ParameterSet>& models);

/// Parses a file written by export_heatmap_csv back into pair rows.
std::vector<PairAngle> import_heatmap_csv(const std::string& path);

} // namespace emrg
