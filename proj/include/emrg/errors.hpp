#pragma once

#include <stdexcept>
#include <string>

namespace emrg {

/// Base of every error this library throws. `category()` is the stable
/// machine-readable tag the CLI prints next to the message.
class error : public std::runtime_error {
public:
    error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct incompatible_models_error : error {
    explicit incompatible_models_error(const std::string& m) : error("incompatible-models", m) {}
};

struct invalid_weights_error : error {
    explicit invalid_weights_error(const std::string& m) : error("invalid-weights", m) {}
};

struct shape_error : error {
    explicit shape_error(const std::string& m) : error("shape", m) {}
};

struct not_found_error : error {
    explicit not_found_error(const std::string& m) : error("not-found", m) {}
};

struct degenerate_vector_error : error {
    explicit degenerate_vector_error(const std::string& m) : error("degenerate-vector", m) {}
};

struct invalid_parameter_error : error {
    explicit invalid_parameter_error(const std::string& m) : error("invalid-parameter", m) {}
};

struct invalid_distribution_error : error {
    explicit invalid_distribution_error(const std::string& m) : error("invalid-distribution", m) {}
};

struct label_error : error {
    explicit label_error(const std::string& m) : error("label", m) {}
};

struct invalid_score_error : error {
    explicit invalid_score_error(const std::string& m) : error("invalid-score", m) {}
};

struct numeric_error : error {
    explicit numeric_error(const std::string& m) : error("numeric", m) {}
};

struct domain_error : error {
    explicit domain_error(const std::string& m) : error("domain", m) {}
};

struct config_error : error {
    explicit config_error(const std::string& m) : error("config", m) {}
};

struct divergence_error : error {
    explicit divergence_error(const std::string& m) : error("divergence", m) {}
};

struct empty_pool_error : error {
    explicit empty_pool_error(const std::string& m) : error("empty-pool", m) {}
};

struct empty_dataset_error : error {
    explicit empty_dataset_error(const std::string& m) : error("empty-dataset", m) {}
};

struct parse_error : error {
    explicit parse_error(const std::string& m) : error("parse", m) {}
};

struct format_error : error {
    explicit format_error(const std::string& m) : error("format", m) {}
};

struct io_error : error {
    explicit io_error(const std::string& m) : error("io", m) {}
};

} // namespace emrg
