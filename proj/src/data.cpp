#include "emrg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <utility>

#include "emrg/errors.hpp"

namespace emrg {

ShiftConfig ShiftConfig::identity() {
    ShiftConfig c;
    c.rotation_max_degrees = 0.0;
    c.scale_min = 1.0;
    c.scale_max = 1.0;
    c.mean_shift_scale = 0.0;
    c.prior_alpha = 0.0; // exact uniform priors
    c.label_noise = 0.0;
    return c;
}

namespace {

void validate_shift(const ShiftConfig& s) {
    if (!(s.cluster_std > 0.0)) throw config_error("cluster_std must be positive");
    if (s.anchor_spread < 0.0) throw config_error("anchor_spread must be nonnegative");
    if (s.rotation_max_degrees < 0.0) throw config_error("rotation_max_degrees negative");
    if (!(s.scale_min > 0.0) || s.scale_max < s.scale_min) {
        throw config_error("scale range must satisfy 0 < scale_min <= scale_max");
    }
    if (s.mean_shift_scale < 0.0) throw config_error("mean_shift_scale negative");
    if (s.prior_alpha < 0.0) throw config_error("prior_alpha negative");
    if (s.label_noise < 0.0 || s.label_noise >= 1.0) {
        throw config_error("label_noise must lie in [0, 1)");
    }
}

// Class priors for one domain; prior_alpha of zero means exactly uniform.
std::vector<double> draw_priors(int num_classes, double alpha, std::mt19937_64& rng) {
    std::vector<double> pi(static_cast<std::size_t>(num_classes),
                           1.0 / static_cast<double>(num_classes));
    if (alpha <= 0.0) return pi;
    std::gamma_distribution<double> gamma(alpha, 1.0);
    double sum = 0.0;
    for (double& p : pi) {
        p = gamma(rng);
        sum += p;
    }
    if (sum <= 0.0) return draw_priors(num_classes, alpha, rng); // underflow redraw
    for (double& p : pi) p /= sum;
    return pi;
}

struct DomainTransform {
    std::vector<std::pair<int, int>> planes;
    std::vector<double> angles; // radians, one per plane
    VecXd scale;
    VecXd offset;
    std::vector<double> priors;
};

// Rotation realized as Givens rotations on disjoint random coordinate
// planes, so the maximum angle knob directly bounds the distortion.
DomainTransform draw_transform(int dim, int num_classes, const ShiftConfig& shift,
                               std::mt19937_64& rng) {
    DomainTransform t;
    std::vector<int> perm(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = dim - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double max_rad = shift.rotation_max_degrees * std::numbers::pi / 180.0;
    for (int i = 0; i + 1 < dim; i += 2) {
        t.planes.emplace_back(perm[static_cast<std::size_t>(i)],
                              perm[static_cast<std::size_t>(i + 1)]);
        t.angles.push_back(unit(rng) * max_rad);
    }
    t.scale = VecXd(dim);
    for (int i = 0; i < dim; ++i) {
        t.scale(i) = shift.scale_min + unit(rng) * (shift.scale_max - shift.scale_min);
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    t.offset = VecXd(dim);
    for (int i = 0; i < dim; ++i) t.offset(i) = normal(rng) * shift.mean_shift_scale;
    t.priors = draw_priors(num_classes, shift.prior_alpha, rng);
    return t;
}

VecXd apply_transform(const DomainTransform& t, VecXd z) {
    z.array() *= t.scale.array();
    for (std::size_t p = 0; p < t.planes.size(); ++p) {
        double c = std::cos(t.angles[p]);
        double s = std::sin(t.angles[p]);
        double a = z(t.planes[p].first);
        double b = z(t.planes[p].second);
        z(t.planes[p].first) = c * a - s * b;
        z(t.planes[p].second) = s * a + c * b;
    }
    return z + t.offset;
}

LabeledSet sample_split(const MatXd& anchors, const DomainTransform& t,
                        const ShiftConfig& shift, int n, bool noisy_labels,
                        std::mt19937_64& rng) {
    const int dim = static_cast<int>(anchors.cols());
    const int num_classes = static_cast<int>(anchors.rows());
    LabeledSet set;
    set.X = MatX(n, dim);
    set.y.resize(static_cast<std::size_t>(n));
    std::discrete_distribution<int> label_dist(t.priors.begin(), t.priors.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> any_class(0, num_classes - 1);
    for (int i = 0; i < n; ++i) {
        int y = label_dist(rng);
        VecXd z = anchors.row(y).transpose();
        for (int d = 0; d < dim; ++d) z(d) += normal(rng) * shift.cluster_std;
        set.X.row(i) = apply_transform(t, std::move(z)).cast<Scalar>().transpose();
        if (noisy_labels && shift.label_noise > 0.0 && unit(rng) < shift.label_noise) {
            y = any_class(rng);
        }
        set.y[static_cast<std::size_t>(i)] = y;
    }
    return set;
}

} // namespace

std::vector<DomainDataset> gen_domains(int num_domains, int num_classes, int input_dim,
                                       int train_size, int val_size, int test_size,
                                       const ShiftConfig& shift, std::uint64_t seed) {
    if (num_domains < 2) throw invalid_parameter_error("need at least 2 domains");
    if (num_classes < 2) throw invalid_parameter_error("need at least 2 classes");
    if (input_dim < 1) throw invalid_parameter_error("input_dim must be >= 1");
    if (train_size < 1 || val_size < 1 || test_size < 1) {
        throw invalid_parameter_error("every split needs at least one sample");
    }
    validate_shift(shift);

    // Class anchors shared by every domain: directions on the sphere scaled
    // by anchor_spread.
    std::mt19937_64 anchor_rng(mix_seed(seed, 0xa2c4));
    std::normal_distribution<double> normal(0.0, 1.0);
    MatXd anchors(num_classes, input_dim);
    for (int c = 0; c < num_classes; ++c) {
        VecXd dir(input_dim);
        do {
            for (int d = 0; d < input_dim; ++d) dir(d) = normal(anchor_rng);
        } while (dir.norm() == 0.0);
        anchors.row(c) = (shift.anchor_spread / dir.norm()) * dir.transpose();
    }

    std::vector<DomainDataset> domains;
    domains.reserve(static_cast<std::size_t>(num_domains));
    for (int k = 0; k < num_domains; ++k) {
        std::mt19937_64 rng(mix_seed(seed, 0xd000 + static_cast<std::uint64_t>(k)));
        DomainTransform t = draw_transform(input_dim, num_classes, shift, rng);
        DomainDataset d;
        d.name = "domain" + std::to_string(k);
        d.train = sample_split(anchors, t, shift, train_size, true, rng);
        d.val = sample_split(anchors, t, shift, val_size, false, rng);
        d.test = sample_split(anchors, t, shift, test_size, false, rng);
        domains.push_back(std::move(d));
    }
    return domains;
}

namespace {

struct ClassBuckets {
    std::vector<std::vector<int>> by_class; // pool row indices per label
    int num_classes = 0;
};

ClassBuckets bucket_pool(const LabeledSet& pool) {
    if (pool.size() == 0) throw empty_dataset_error("stream pool is empty");
    ClassBuckets b;
    for (int y : pool.y) {
        if (y < 0) throw label_error("negative label in stream pool");
        b.num_classes = std::max(b.num_classes, y + 1);
    }
    b.by_class.resize(static_cast<std::size_t>(b.num_classes));
    for (int i = 0; i < pool.size(); ++i) {
        b.by_class[static_cast<std::size_t>(pool.y[static_cast<std::size_t>(i)])].push_back(i);
    }
    return b;
}

void validate_stream_args(const LabeledSet& pool, int batch_size, int num_batches) {
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (num_batches < 1) throw config_error("num_batches must be >= 1");
    if (batch_size > pool.size()) {
        throw config_error("batch_size " + std::to_string(batch_size) + " exceeds pool size " +
                           std::to_string(pool.size()));
    }
}

// Draws `count` rows of the class bucket, without replacement while the
// bucket lasts, then with replacement; empty buckets fall back to the whole
// pool. Appends pool row indices.
void draw_from_class(const ClassBuckets& buckets, int cls, int count, int pool_size,
                     std::mt19937_64& rng, std::vector<int>& out) {
    const std::vector<int>& bucket = buckets.by_class[static_cast<std::size_t>(cls)];
    if (bucket.empty()) {
        std::uniform_int_distribution<int> any(0, pool_size - 1);
        for (int i = 0; i < count; ++i) out.push_back(any(rng));
        return;
    }
    std::vector<int> local = bucket;
    int unique = std::min<int>(count, static_cast<int>(local.size()));
    for (int i = 0; i < unique; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(local.size()) - 1);
        std::swap(local[static_cast<std::size_t>(i)], local[static_cast<std::size_t>(pick(rng))]);
        out.push_back(local[static_cast<std::size_t>(i)]);
    }
    std::uniform_int_distribution<int> any(0, static_cast<int>(local.size()) - 1);
    for (int i = unique; i < count; ++i) {
        out.push_back(local[static_cast<std::size_t>(any(rng))]);
    }
}

Batch gather_batch(const LabeledSet& pool, std::vector<int>& rows, std::mt19937_64& rng) {
    for (int i = static_cast<int>(rows.size()) - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
    }
    Batch b;
    b.X = MatX(static_cast<Eigen::Index>(rows.size()), pool.X.cols());
    b.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        b.X.row(static_cast<Eigen::Index>(i)) = pool.X.row(rows[i]);
        b.y[i] = pool.y[static_cast<std::size_t>(rows[i])];
    }
    return b;
}

std::vector<double> realized_proportions(const Batch& b, int num_classes) {
    std::vector<double> trace(static_cast<std::size_t>(num_classes), 0.0);
    for (int y : b.y) trace[static_cast<std::size_t>(y)] += 1.0;
    for (double& v : trace) v /= static_cast<double>(b.y.size());
    return trace;
}

} // namespace

StreamPlan iid_stream(const LabeledSet& pool, int batch_size, int num_batches,
                      std::uint64_t seed) {
    validate_stream_args(pool, batch_size, num_batches);
    ClassBuckets buckets = bucket_pool(pool);
    std::mt19937_64 rng(mix_seed(seed, 0x11d0));
    StreamPlan plan;
    plan.kind = "iid";
    plan.seed = seed;
    std::uniform_int_distribution<int> any(0, pool.size() - 1);
    for (int t = 0; t < num_batches; ++t) {
        std::vector<int> rows;
        rows.reserve(static_cast<std::size_t>(batch_size));
        for (int i = 0; i < batch_size; ++i) rows.push_back(any(rng));
        Batch b = gather_batch(pool, rows, rng);
        plan.mixture_trace.push_back(realized_proportions(b, buckets.num_classes));
        plan.batches.push_back(std::move(b));
    }
    return plan;
}

StreamPlan dirichlet_stream(const LabeledSet& pool, double alpha, int batch_size,
                            int num_batches, std::uint64_t seed) {
    if (!(alpha > 0.0)) throw invalid_parameter_error("alpha must be positive");
    validate_stream_args(pool, batch_size, num_batches);
    ClassBuckets buckets = bucket_pool(pool);
    std::mt19937_64 rng(mix_seed(seed, 0xd161));
    StreamPlan plan;
    plan.kind = "dirichlet";
    plan.seed = seed;
    std::gamma_distribution<double> gamma(alpha, 1.0);
    for (int t = 0; t < num_batches; ++t) {
        std::vector<double> pi(static_cast<std::size_t>(buckets.num_classes));
        double sum = 0.0;
        for (double& p : pi) {
            p = gamma(rng);
            sum += p;
        }
        if (sum <= 0.0) { // gamma underflow at tiny alpha: fall back to one-hot
            std::uniform_int_distribution<int> cls(0, buckets.num_classes - 1);
            pi.assign(pi.size(), 0.0);
            pi[static_cast<std::size_t>(cls(rng))] = 1.0;
        } else {
            for (double& p : pi) p /= sum;
        }
        // Largest-remainder apportionment: counts stay within one sample of
        // batch_size * pi_c, so a huge alpha really yields uniform batches.
        std::vector<int> counts(static_cast<std::size_t>(buckets.num_classes), 0);
        std::vector<std::pair<double, int>> remainders;
        int assigned = 0;
        for (std::size_t c = 0; c < pi.size(); ++c) {
            double ideal = pi[c] * batch_size;
            counts[c] = static_cast<int>(ideal);
            assigned += counts[c];
            remainders.emplace_back(ideal - counts[c], static_cast<int>(c));
        }
        std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t i = 0; assigned < batch_size; ++assigned, ++i) {
            ++counts[static_cast<std::size_t>(remainders[i % remainders.size()].second)];
        }
        std::vector<int> rows;
        rows.reserve(static_cast<std::size_t>(batch_size));
        for (int c = 0; c < buckets.num_classes; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                draw_from_class(buckets, c, counts[static_cast<std::size_t>(c)], pool.size(),
                                rng, rows);
            }
        }
        Batch b = gather_batch(pool, rows, rng);
        plan.mixture_trace.push_back(realized_proportions(b, buckets.num_classes));
        plan.batches.push_back(std::move(b));
    }
    return plan;
}

StreamPlan temporal_stream(const LabeledSet& pool, double stickiness, int batch_size,
                           int num_batches, std::uint64_t seed) {
    if (stickiness < 0.0 || stickiness >= 1.0) {
        throw invalid_parameter_error("stickiness must lie in [0, 1)");
    }
    validate_stream_args(pool, batch_size, num_batches);
    ClassBuckets buckets = bucket_pool(pool);
    std::mt19937_64 rng(mix_seed(seed, 0x7e41));
    StreamPlan plan;
    plan.kind = "temporal";
    plan.seed = seed;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> any_class(0, buckets.num_classes - 1);
    int dominant = any_class(rng);
    int dominant_count = static_cast<int>(std::lround(0.8 * batch_size));
    dominant_count = std::clamp(dominant_count, 1, batch_size);
    for (int t = 0; t < num_batches; ++t) {
        if (t > 0 && unit(rng) >= stickiness) dominant = any_class(rng); // uniform over all
        std::vector<int> counts(static_cast<std::size_t>(buckets.num_classes), 0);
        counts[static_cast<std::size_t>(dominant)] = dominant_count;
        if (buckets.num_classes > 1) {
            std::uniform_int_distribution<int> other(0, buckets.num_classes - 2);
            for (int i = dominant_count; i < batch_size; ++i) {
                int c = other(rng);
                if (c >= dominant) ++c;
                ++counts[static_cast<std::size_t>(c)];
            }
        } else {
            counts[0] = batch_size;
        }
        std::vector<int> rows;
        rows.reserve(static_cast<std::size_t>(batch_size));
        for (int c = 0; c < buckets.num_classes; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                draw_from_class(buckets, c, counts[static_cast<std::size_t>(c)], pool.size(),
                                rng, rows);
            }
        }
        Batch b = gather_batch(pool, rows, rng);
        plan.mixture_trace.push_back(realized_proportions(b, buckets.num_classes));
        plan.batches.push_back(std::move(b));
    }
    return plan;
}

LabeledSet concat_sets(const std::vector<LabeledSet>& sets) {
    LabeledSet out;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const LabeledSet& s : sets) {
        rows += s.X.rows();
        if (s.X.rows() > 0) cols = s.X.cols();
    }
    out.X = MatX(rows, cols);
    out.y.reserve(static_cast<std::size_t>(rows));
    Eigen::Index at = 0;
    for (const LabeledSet& s : sets) {
        if (s.X.rows() == 0) continue;
        if (s.X.cols() != cols) throw shape_error("concat of mismatched feature widths");
        out.X.middleRows(at, s.X.rows()) = s.X;
        out.y.insert(out.y.end(), s.y.begin(), s.y.end());
        at += s.X.rows();
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell += ch;
        }
    }
    cells.push_back(cell);
    return cells;
}

} // namespace

LabeledSet load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw empty_dataset_error("'" + path + "' has no header");
    std::vector<std::string> header = split_csv_line(line);
    int label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == schema.label_column) label_col = static_cast<int>(i);
    }
    if (label_col < 0) {
        throw parse_error("label column '" + schema.label_column + "' not in header of '" +
                          path + "'");
    }
    const int dim = static_cast<int>(header.size()) - 1;
    if (dim < 1) throw parse_error("'" + path + "' has no feature columns");

    std::vector<std::vector<Scalar>> rows;
    std::vector<int> labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw parse_error("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, got " +
                              std::to_string(cells.size()));
        }
        std::vector<Scalar> feats;
        feats.reserve(static_cast<std::size_t>(dim));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const char* text = cells[i].c_str();
            char* end = nullptr;
            if (static_cast<int>(i) == label_col) {
                long y = std::strtol(text, &end, 10);
                if (end == text || *end != '\0') {
                    throw parse_error("line " + std::to_string(line_no) + ": bad label '" +
                                      cells[i] + "'");
                }
                if (y < 0) throw label_error("line " + std::to_string(line_no) +
                                             ": negative label " + std::to_string(y));
                labels.push_back(static_cast<int>(y));
            } else {
                double v = std::strtod(text, &end);
                if (end == text || *end != '\0') {
                    throw parse_error("line " + std::to_string(line_no) + ": bad number '" +
                                      cells[i] + "'");
                }
                feats.push_back(static_cast<Scalar>(v));
            }
        }
        rows.push_back(std::move(feats));
    }
    if (rows.empty()) throw empty_dataset_error("'" + path + "' has a header but no rows");

    LabeledSet set;
    set.X = MatX(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < dim; ++c) {
            set.X(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
        }
    }
    set.y = std::move(labels);
    if (schema.standardize) {
        for (Eigen::Index c = 0; c < set.X.cols(); ++c) {
            double mean = set.X.col(c).cast<double>().mean();
            double var = (set.X.col(c).cast<double>().array() - mean).square().mean();
            double denom = var > 0.0 ? std::sqrt(var) : 1.0;
            set.X.col(c) =
                ((set.X.col(c).cast<double>().array() - mean) / denom).cast<Scalar>();
        }
    }
    return set;
}

void save_csv(const std::string& path, const LabeledSet& set,
              const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write '" + path + "'");
    for (Eigen::Index c = 0; c < set.X.cols(); ++c) out << "f" << c << ",";
    out << label_column << "\n";
    char buf[48];
    for (Eigen::Index r = 0; r < set.X.rows(); ++r) {
        for (Eigen::Index c = 0; c < set.X.cols(); ++c) {
            // %.9g round-trips any binary32 value exactly
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(set.X(r, c)));
            out << buf << ",";
        }
        out << set.y[static_cast<std::size_t>(r)] << "\n";
    }
    if (!out) throw io_error("failed while writing '" + path + "'");
}

} // namespace emrg
