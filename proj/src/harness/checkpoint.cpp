#include "pfge/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "pfge/error.hpp"

namespace pfge::harness {

using nlohmann::json;

std::vector<unsigned char> encode_payload(const ModelWeights& w) {
    std::vector<unsigned char> out;
    out.reserve(w.size() * 8);
    for (double v : w.values()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
    return out;
}

std::vector<double> decode_payload(std::span<const unsigned char> bytes) {
    if (bytes.size() % 8 != 0) throw FormatError("checkpoint payload length is not a multiple of 8");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[8 * k + static_cast<std::size_t>(b)]} << (8 * b);
        out[k] = std::bit_cast<double>(bits);
    }
    return out;
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    std::ostringstream hex;
    hex << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
    return hex.str();
}

std::filesystem::path header_path(const std::filesystem::path& payload_path) {
    return payload_path.string() + ".json";
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto payload = encode_payload(ckpt.weights);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + path.string());
        out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
        if (!out) throw IoError("failed writing checkpoint " + path.string());
    }
    const LayerSpec& spec = ckpt.weights.spec();
    json header = {
        {"format", "pfge-checkpoint"},
        {"format_version", kCheckpointFormatVersion},
        {"layer_spec", {{"sizes", spec.sizes}, {"activation", std::string(to_string(spec.activation))}}},
        {"standardization", {{"mean", ckpt.standardizer.mean}, {"scale", ckpt.standardizer.scale}}},
        {"payload", {{"file", path.filename().string()}, {"count", ckpt.weights.size()}, {"encoding", "float64-le"}}},
        {"digest", {{"algorithm", "sha256"}, {"value", sha256_hex(payload)}}},
        {"metadata", ckpt.metadata},
    };
    std::ofstream out(header_path(path), std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint header " + header_path(path).string());
    out << header.dump(2) << '\n';
    if (!out) throw IoError("failed writing checkpoint header " + header_path(path).string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto hpath = header_path(path);
    std::ifstream hin(hpath);
    if (!hin) throw IoError("cannot open checkpoint header " + hpath.string());
    std::ifstream pin(path, std::ios::binary);
    if (!pin) throw IoError("cannot open checkpoint payload " + path.string());
    const std::vector<unsigned char> payload{std::istreambuf_iterator<char>(pin), std::istreambuf_iterator<char>()};

    try {
        const json header = json::parse(hin);
        if (header.at("format") != "pfge-checkpoint") throw FormatError("not a pfge checkpoint: " + hpath.string());
        if (header.at("format_version").get<int>() != kCheckpointFormatVersion) {
            throw FormatError("unsupported checkpoint version in " + hpath.string());
        }
        if (header.at("payload").at("encoding") != "float64-le") {
            throw FormatError("unsupported payload encoding in " + hpath.string());
        }
        const json& digest = header.at("digest");
        if (digest.at("algorithm") != "sha256" || digest.at("value").get<std::string>() != sha256_hex(payload)) {
            throw FormatError("checkpoint digest mismatch for " + path.string());
        }
        LayerSpec spec;
        spec.sizes = header.at("layer_spec").at("sizes").get<std::vector<std::size_t>>();
        spec.activation = parse_activation(header.at("layer_spec").at("activation").get<std::string>());
        spec.validate();
        const auto count = header.at("payload").at("count").get<std::size_t>();
        auto values = decode_payload(payload);
        if (values.size() != count || count != spec.param_count()) {
            throw FormatError("checkpoint " + path.string() + " holds " + std::to_string(values.size()) +
                              " values, header says " + std::to_string(count) + ", spec needs " +
                              std::to_string(spec.param_count()));
        }
        Checkpoint ckpt{ModelWeights(std::move(spec), std::move(values)), {}, header.value("metadata", json::object())};
        ckpt.standardizer.mean = header.at("standardization").at("mean").get<std::vector<double>>();
        ckpt.standardizer.scale = header.at("standardization").at("scale").get<std::vector<double>>();
        if (ckpt.standardizer.mean.size() != ckpt.standardizer.scale.size()) {
            throw FormatError("checkpoint " + hpath.string() + ": standardization mean/scale lengths differ");
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw FormatError("malformed checkpoint header " + hpath.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw FormatError("checkpoint " + hpath.string() + ": " + e.what());
    }
}

}  // namespace pfge::harness
