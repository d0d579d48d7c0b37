#pragma once

// On-disk model format. `member-0.ckpt` holds the raw parameters as 64-bit
// little-endian IEEE doubles; `member-0.ckpt.json` is the header:
//
//   {
//     "format": "pfge-checkpoint", "format_version": 1,
//     "layer_spec": {"sizes": [...], "activation": "relu"},
//     "standardization": {"mean": [...], "scale": [...]},
//     "payload": {"file": "member-0.ckpt", "count": N, "encoding": "float64-le"},
//     "digest": {"algorithm": "sha256", "value": "<hex of the payload bytes>"},
//     "metadata": {...}
//   }

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pfge/data.hpp"
#include "pfge/nn.hpp"

namespace pfge::harness {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    ModelWeights weights;
    Standardizer standardizer;
    nlohmann::json metadata = nlohmann::json::object();
};

std::vector<unsigned char> encode_payload(const ModelWeights& w);
std::vector<double> decode_payload(std::span<const unsigned char> bytes);

std::string sha256_hex(std::span<const unsigned char> bytes);

std::filesystem::path header_path(const std::filesystem::path& payload_path);

/// Writes the payload and its header sidecar, creating parent directories.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws IoError if a file is missing, FormatError on a malformed header,
/// wrong payload length or digest mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pfge::harness
