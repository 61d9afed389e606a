#include "simicl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "simicl/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace simicl {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'M', 'I', 'C', 'L', 'V', '1'};
constexpr uint32_t kFlagOptimizer = 1u;

template <class V>
void write_pod(std::ostream& out, const V& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <class V>
V read_pod(std::istream& in) {
    V value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(V));
    if (!in) {
        throw Error(ErrorCode::ParseError, "truncated checkpoint");
    }
    return value;
}

void write_tensors(std::ostream& out, std::vector<TensorRef<float>> refs, const std::string& prefix) {
    write_pod(out, static_cast<uint32_t>(refs.size()));
    for (const auto& t : refs) {
        const std::string name = prefix + t.name;
        write_pod(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<uint8_t>(t.shape.size()));
        for (int dim : t.shape) {
            write_pod(out, static_cast<uint32_t>(dim));
        }
        out.write(reinterpret_cast<const char*>(t.data),
                  static_cast<std::streamsize>(t.size * sizeof(float)));
    }
}

void read_tensors(std::istream& in, std::vector<TensorRef<float>> refs, const std::string& prefix) {
    const uint32_t count = read_pod<uint32_t>(in);
    if (count != refs.size()) {
        throw Error(ErrorCode::ConfigMismatch, "checkpoint tensor count does not match config");
    }
    for (auto& t : refs) {
        const uint16_t name_len = read_pod<uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (name != prefix + t.name) {
            throw Error(ErrorCode::ConfigMismatch, "unexpected tensor in checkpoint: " + name);
        }
        const uint8_t ndim = read_pod<uint8_t>(in);
        if (ndim != t.shape.size()) {
            throw Error(ErrorCode::ConfigMismatch, "tensor rank mismatch for " + name);
        }
        for (int dim : t.shape) {
            if (read_pod<uint32_t>(in) != static_cast<uint32_t>(dim)) {
                throw Error(ErrorCode::ConfigMismatch, "tensor shape mismatch for " + name);
            }
        }
        in.read(reinterpret_cast<char*>(t.data), static_cast<std::streamsize>(t.size * sizeof(float)));
        if (!in) {
            throw Error(ErrorCode::ParseError, "truncated tensor data for " + name);
        }
    }
}

void write_config(std::ostream& out, const ModelConfig& cfg) {
    write_pod(out, static_cast<int32_t>(cfg.depth));
    write_pod(out, static_cast<int32_t>(cfg.embed_dim));
    write_pod(out, static_cast<int32_t>(cfg.n_heads));
    write_pod(out, cfg.mlp_ratio);
    write_pod(out, static_cast<int32_t>(cfg.patch_side));
    write_pod(out, static_cast<int32_t>(cfg.image_side));
    write_pod(out, cfg.layer_norm_eps);
}

ModelConfig read_config(std::istream& in) {
    ModelConfig cfg;
    cfg.depth = read_pod<int32_t>(in);
    cfg.embed_dim = read_pod<int32_t>(in);
    cfg.n_heads = read_pod<int32_t>(in);
    cfg.mlp_ratio = read_pod<float>(in);
    cfg.patch_side = read_pod<int32_t>(in);
    cfg.image_side = read_pod<int32_t>(in);
    cfg.layer_norm_eps = read_pod<float>(in);
    return cfg;
}

} // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const OptimizerState<float>* optimizer) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open checkpoint for writing: " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, optimizer ? kFlagOptimizer : 0u);
    write_config(out, params.config);
    // collect_tensors needs mutable access; serialization does not modify.
    auto& mutable_params = const_cast<ModelParams<float>&>(params);
    write_tensors(out, collect_tensors(mutable_params), "");
    if (optimizer) {
        write_pod(out, static_cast<uint64_t>(optimizer->step));
        auto& opt = const_cast<OptimizerState<float>&>(*optimizer);
        write_tensors(out, collect_tensors(opt.m), "adam_m.");
        write_tensors(out, collect_tensors(opt.v), "adam_v.");
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "short checkpoint write: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open checkpoint for reading: " + path);
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorCode::ParseError, "not a checkpoint file: " + path);
    }
    const uint32_t flags = read_pod<uint32_t>(in);
    const ModelConfig cfg = read_config(in);
    cfg.validate();

    Checkpoint ckpt{zero_params<float>(cfg), std::nullopt};
    read_tensors(in, collect_tensors(ckpt.params), "");
    if (flags & kFlagOptimizer) {
        OptimizerState<float> opt = make_optimizer_state<float>(cfg);
        opt.step = static_cast<int64_t>(read_pod<uint64_t>(in));
        read_tensors(in, collect_tensors(opt.m), "adam_m.");
        read_tensors(in, collect_tensors(opt.v), "adam_v.");
        ckpt.optimizer = std::move(opt);
    }
    return ckpt;
}

uint64_t file_fnv1a(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot hash missing file: " + path);
    }
    uint64_t hash = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<uint8_t>(buf[i]);
            hash *= 1099511628211ULL;
        }
        if (!in) {
            break;
        }
    }
    return hash;
}

} // namespace simicl
