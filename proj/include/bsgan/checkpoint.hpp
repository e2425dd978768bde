#pragma once

// Binary checkpoint, little-endian throughout:
//   "BSGANCK1"
//   u64 config length, config text (the RunConfig file format)
//   u32 parameter count, then per parameter:
//     u32 name length, name, u32 rank, rank x u64 extents, float64 payload

#include <bit>
#include <cstring>
#include <fstream>

#include "bsgan/config.hpp"

namespace bsgan {

inline constexpr std::string_view kCheckpointMagic = "BSGANCK1";

struct Checkpoint {
    RunConfig config;
    std::vector<NamedTensor> parameters;

    bool operator==(const Checkpoint&) const = default;
};

namespace detail {

template <class U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(std::string_view buf, std::string origin) : buf_(buf), origin_(std::move(origin)) {}

    template <class U>
    U get() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::string_view bytes(std::size_t n) {
        need(n);
        const auto s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == buf_.size(); }

    DataError error(const std::string& what) const { return DataError(origin_ + ": " + what); }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) throw error("truncated checkpoint");
    }

    std::string_view buf_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    std::string out(kCheckpointMagic);
    const std::string cfg = format_config(ck.config);
    detail::put_le<std::uint64_t>(out, cfg.size());
    out += cfg;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.parameters.size()));
    for (const auto& p : ck.parameters) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
        for (auto e : p.value.shape()) detail::put_le<std::uint64_t>(out, e);
        for (double v : p.value.values()) detail::put_le(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view buf, const std::string& origin = "checkpoint") {
    detail::Reader r(buf, origin);
    if (buf.size() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic)
        throw r.error("not a checkpoint (bad magic)");
    Checkpoint ck;
    const auto cfg_len = r.get<std::uint64_t>();
    try {
        ck.config = parse_config(r.bytes(cfg_len));
    } catch (const ConfigError& e) {
        throw r.error(std::string("bad config block: ") + e.what());
    }
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) {
        NamedTensor p;
        p.name = std::string(r.bytes(r.get<std::uint32_t>()));
        Shape shape(r.get<std::uint32_t>());
        for (auto& e : shape) e = r.get<std::uint64_t>();
        const std::size_t n = shape_numel(shape);
        std::vector<double> data(n);
        for (auto& v : data) v = std::bit_cast<double>(r.get<std::uint64_t>());
        p.value = Tensor(std::move(shape), std::move(data));
        ck.parameters.push_back(std::move(p));
    }
    if (!r.done()) throw r.error("trailing bytes after the last parameter");
    return ck;
}

inline void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const std::string bytes = serialize_checkpoint(ck);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str(), path.string());
}

/// Copies named values into a parameter set; every parameter must be present with its shape.
inline void load_parameters(const ParamRefs& params, const std::vector<NamedTensor>& values) {
    std::map<std::string_view, const Tensor*> by_name;
    for (const auto& v : values) by_name[v.name] = &v.value;
    for (auto* p : params) {
        const auto it = by_name.find(p->name);
        if (it == by_name.end()) throw DataError("checkpoint has no parameter " + p->name);
        if (it->second->shape() != p->value.shape())
            throw DataError("checkpoint parameter " + p->name + " has shape " + shape_str(it->second->shape()) +
                            ", expected " + shape_str(p->value.shape()));
        p->value = *it->second;
    }
}

inline Generator generator_from(const Checkpoint& ck) {
    Rng scratch = make_rng(0, "init");
    Generator g(ck.config.train.generator_config(), scratch);
    load_parameters(g.parameters(), ck.parameters);
    return g;
}

inline Checkpoint make_checkpoint(const RunConfig& cfg, const TrainResult& res) {
    return Checkpoint{cfg, res.best_parameters};
}

}  // namespace bsgan
