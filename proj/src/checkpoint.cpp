#include "emrg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "json.hpp"

#include "emrg/errors.hpp"

namespace emrg {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'R', 'G'};

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t take_u32(const std::string& buf, std::size_t at) {
    auto b = [&](std::size_t i) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i]));
    };
    return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
}

void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

float take_f32(const std::string& buf, std::size_t at) {
    return std::bit_cast<float>(take_u32(buf, at));
}

std::uint32_t payload_crc(const std::string& payload) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()),
                static_cast<uInt>(payload.size()));
    return static_cast<std::uint32_t>(crc);
}

// Zero-valued model with the canonical layer names, used as the shape
// reference when deserializing.
ParameterSet skeleton(const ModelSpec& spec) {
    validate(spec);
    ParameterSet p;
    int fan_in = spec.input_dim;
    for (std::size_t i = 0; i < spec.hidden_dims.size(); ++i) {
        EncoderLayer layer;
        layer.name = "enc" + std::to_string(i);
        layer.weights = MatX::Zero(fan_in, spec.hidden_dims[i]);
        layer.bias = VecX::Zero(spec.hidden_dims[i]);
        p.encoder_layers.push_back(std::move(layer));
        fan_in = spec.hidden_dims[i];
    }
    p.head_weights = MatX::Zero(fan_in, spec.class_count);
    p.head_bias = VecX::Zero(spec.class_count);
    return p;
}

void append_model(std::string& payload, const ParameterSet& p) {
    VecX flat = to_flat(p);
    for (Eigen::Index i = 0; i < flat.size(); ++i) put_f32(payload, flat[i]);
}

} // namespace

void save_checkpoint(const std::string& path, const ExpertPool& pool,
                     const std::map<std::string, std::string>& metadata) {
    validate(pool.spec);
    if (!matches_spec(pool.init, pool.spec)) {
        throw incompatible_models_error("pool init does not match its spec");
    }
    for (const Expert& e : pool.experts) {
        if (!matches_spec(e.params, pool.spec)) {
            throw incompatible_models_error("expert '" + e.domain +
                                            "' does not match the pool spec");
        }
    }

    std::string payload;
    payload.reserve((pool.experts.size() + 1) * parameter_count(pool.init) * 4);
    append_model(payload, pool.init);
    for (const Expert& e : pool.experts) append_model(payload, e.params);

    nlohmann::json header;
    header["arch"] = {{"input_dim", pool.spec.input_dim},
                      {"hidden_dims", pool.spec.hidden_dims},
                      {"class_count", pool.spec.class_count},
                      {"activation", to_string(pool.spec.activation)}};
    nlohmann::json experts = nlohmann::json::array();
    for (const Expert& e : pool.experts) {
        experts.push_back({{"domain", e.domain},
                           {"val_loss", e.val_loss},
                           {"val_accuracy", e.val_accuracy}});
    }
    header["experts"] = experts;
    header["metadata"] = metadata;
    header["payload_crc32"] = payload_crc(payload);
    header["payload_floats"] = payload.size() / 4;
    std::string header_text = header.dump();

    std::string blob;
    blob.append(kMagic, 4);
    put_u32(blob, kCheckpointVersion);
    put_u32(blob, static_cast<std::uint32_t>(header_text.size()));
    blob += header_text;
    blob += payload;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw io_error("short write to '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string blob = buf.str();

    if (blob.size() < 12 || blob.compare(0, 4, kMagic, 4) != 0) {
        throw format_error("'" + path + "' is not a pool checkpoint (bad magic at offset 0)");
    }
    std::uint32_t version = take_u32(blob, 4);
    if (version != kCheckpointVersion) {
        throw format_error("unsupported checkpoint version " + std::to_string(version) +
                           " at offset 4");
    }
    std::uint32_t header_len = take_u32(blob, 8);
    if (blob.size() < 12 + static_cast<std::size_t>(header_len)) {
        throw format_error("checkpoint header truncated: need " + std::to_string(header_len) +
                           " bytes at offset 12, file has " + std::to_string(blob.size() - 12));
    }

    nlohmann::json header =
        nlohmann::json::parse(blob.substr(12, header_len), nullptr, false);
    if (header.is_discarded()) throw format_error("checkpoint header is not valid JSON");

    LoadedCheckpoint loaded;
    try {
        const nlohmann::json& arch = header.at("arch");
        loaded.pool.spec.input_dim = arch.at("input_dim").get<int>();
        loaded.pool.spec.hidden_dims = arch.at("hidden_dims").get<std::vector<int>>();
        loaded.pool.spec.class_count = arch.at("class_count").get<int>();
        loaded.pool.spec.activation =
            activation_from_string(arch.at("activation").get<std::string>());
        if (header.contains("metadata")) {
            loaded.metadata =
                header.at("metadata").get<std::map<std::string, std::string>>();
        }
        for (const nlohmann::json& e : header.at("experts")) {
            Expert expert;
            expert.domain = e.at("domain").get<std::string>();
            expert.val_loss = e.at("val_loss").get<double>();
            expert.val_accuracy = e.at("val_accuracy").get<double>();
            loaded.pool.experts.push_back(std::move(expert));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw format_error(std::string("bad checkpoint header: ") + ex.what());
    }

    std::string payload = blob.substr(12 + header_len);
    std::size_t expected_floats = header.value("payload_floats", std::size_t{0});
    if (payload.size() != expected_floats * 4) {
        throw format_error("checkpoint payload at offset " + std::to_string(12 + header_len) +
                           " holds " + std::to_string(payload.size()) + " bytes, expected " +
                           std::to_string(expected_floats * 4));
    }
    if (payload_crc(payload) != header.value("payload_crc32", std::uint32_t{0})) {
        throw format_error("checkpoint payload fails its checksum");
    }

    ParameterSet reference = skeleton(loaded.pool.spec);
    std::size_t per_model = parameter_count(reference);
    std::size_t models = loaded.pool.experts.size() + 1;
    if (expected_floats != per_model * models) {
        throw format_error("checkpoint float count disagrees with the architecture");
    }

    auto read_model = [&](std::size_t index) {
        VecX flat(per_model);
        std::size_t base = index * per_model * 4;
        for (std::size_t i = 0; i < per_model; ++i) {
            flat[static_cast<Eigen::Index>(i)] = take_f32(payload, base + i * 4);
        }
        return from_flat(reference, flat);
    };
    loaded.pool.init = read_model(0);
    for (std::size_t k = 0; k < loaded.pool.experts.size(); ++k) {
        loaded.pool.experts[k].params = read_model(k + 1);
    }
    return loaded;
}

} // namespace emrg
