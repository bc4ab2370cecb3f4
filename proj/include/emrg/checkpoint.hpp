#pragma once

#include <map>
#include <string>

#include "emrg/training.hpp"

namespace emrg {

/// Binary pool checkpoint. Layout: magic "EMRG", little-endian u32 format
/// version, u32 header byte length, UTF-8 JSON header, then all tensors as
/// raw little-endian f32 in canonical order (init first, then each expert).
/// The header records the architecture, domain names, free-form metadata
/// and a CRC32 of the payload; load verifies magic, version and checksum.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ExpertPool& pool,
                     const std::map<std::string, std::string>& metadata = {});

struct LoadedCheckpoint {
    ExpertPool pool;
    std::map<std::string, std::string> metadata;
};

/// Throws format_error on bad magic, version or checksum and io_error when
/// the file cannot be read.
LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace emrg
