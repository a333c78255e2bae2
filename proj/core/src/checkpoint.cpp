#include "detnas/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "detnas/errors.hpp"

namespace detnas {

namespace {

// All scalar fields are written little-endian. x86-64 is little-endian; the
// byte-swapping helpers keep the format pinned on other hosts.

template <typename T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    T out = 0;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
}

template <typename T>
void write_scalar(std::ostream& out, T v) {
    const T le = to_le(v);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
T read_scalar(std::istream& in, const std::string& what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("checkpoint: truncated while reading " + what);
    return to_le(v);
}

void write_f32_array(std::ostream& out, const float* data, size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
    } else {
        for (size_t i = 0; i < count; ++i) write_scalar(out, data[i]);
    }
}

void read_f32_array(std::istream& in, float* data, size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 4));
        if (!in) throw IoError("checkpoint: truncated tensor data");
    } else {
        for (size_t i = 0; i < count; ++i) data[i] = read_scalar<float>(in, "tensor data");
    }
}

constexpr char kMagic[4] = {'D', 'N', 'A', 'S'};

}  // namespace

void save_checkpoint(const std::string& path, SupernetWeights& weights) {
    if (weights.phase() != Phase::kPretrained && weights.phase() != Phase::kFinetuned)
        throw ConfigError("checkpoint: only pretrained or finetuned weights can be saved, got phase '" +
                          std::string(phase_name(weights.phase())) + "'");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");

    out.write(kMagic, 4);
    write_scalar<uint32_t>(out, kCheckpointVersion);
    write_scalar<uint8_t>(out, static_cast<uint8_t>(weights.phase()));
    write_scalar<uint64_t>(out, weights.step());
    write_scalar<uint64_t>(out, weights.seed());

    auto tensors = weights.named_tensors();
    write_scalar<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_scalar<uint16_t>(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_scalar<uint8_t>(out, static_cast<uint8_t>(tensor->rank()));
        for (int d = 0; d < tensor->rank(); ++d)
            write_scalar<uint32_t>(out, static_cast<uint32_t>(tensor->dim(d)));
        write_f32_array(out, tensor->data(), tensor->numel());
    }
    if (!out) throw IoError("checkpoint: write to '" + path + "' failed");
}

namespace {

struct Header {
    Phase phase;
    uint64_t step;
    uint64_t seed;
    uint32_t tensor_count;
};

Header read_header(std::istream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: '" + path + "' is not a DNAS checkpoint");
    const uint32_t version = read_scalar<uint32_t>(in, "version");
    if (version != kCheckpointVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    const uint8_t tag = read_scalar<uint8_t>(in, "phase tag");
    if (tag != static_cast<uint8_t>(Phase::kPretrained) &&
        tag != static_cast<uint8_t>(Phase::kFinetuned))
        throw IoError("checkpoint: unknown phase tag " + std::to_string(tag));
    Header h;
    h.phase = static_cast<Phase>(tag);
    h.step = read_scalar<uint64_t>(in, "step counter");
    h.seed = read_scalar<uint64_t>(in, "rng seed");
    h.tensor_count = read_scalar<uint32_t>(in, "tensor count");
    return h;
}

}  // namespace

SupernetWeights load_checkpoint(const std::string& path, const SearchSpaceSpec& space, int classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    const Header header = read_header(in, path);

    SupernetWeights weights(space, classes, header.seed);
    weights.set_phase(header.phase);
    weights.set_step(header.step);

    auto tensors = weights.named_tensors();
    if (header.tensor_count != tensors.size())
        throw ConfigError("checkpoint: has " + std::to_string(header.tensor_count) +
                          " tensors but the configured space expects " +
                          std::to_string(tensors.size()));
    for (auto& [name, tensor] : tensors) {
        const uint16_t name_len = read_scalar<uint16_t>(in, "tensor name length");
        std::string stored(name_len, '\0');
        in.read(stored.data(), name_len);
        if (!in) throw IoError("checkpoint: truncated tensor name");
        if (stored != name)
            throw ConfigError("checkpoint: tensor '" + stored + "' where '" + name +
                              "' was expected; space/classes mismatch");
        const uint8_t rank = read_scalar<uint8_t>(in, "tensor rank");
        if (rank != tensor->rank())
            throw ConfigError("checkpoint: tensor '" + name + "' rank mismatch");
        for (int d = 0; d < tensor->rank(); ++d) {
            const uint32_t dim = read_scalar<uint32_t>(in, "tensor dim");
            if (dim != static_cast<uint32_t>(tensor->dim(d)))
                throw ConfigError("checkpoint: tensor '" + name + "' shape mismatch");
        }
        read_f32_array(in, tensor->data(), tensor->numel());
    }
    return weights;
}

Phase peek_checkpoint_phase(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    return read_header(in, path).phase;
}

}  // namespace detnas
