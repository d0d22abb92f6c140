#pragma once

// Binary containers, all integers and floats little-endian.
//
// Encoded light field (.lfae), version 1:
//   off  size  field
//     0     4  magic "LFAE"
//     4     2  u16 format version
//     6     1  u8  grid rows
//     7     1  u8  grid cols
//     8     4  u32 spatial size S
//    12     4  u32 latent channels L
//    16     4  u32 latent spatial size (must equal S / 32)
//    20     8  u64 architecture fingerprint
//    28        f32[L * (S/32)^2] latent, (channel, row, col) order
//              f32[S * S * 3]     center view, (row, col, rgb) order
//
// Checkpoint (.lfck), version 1:
//   magic "LFCK", u16 version, u8 scalar width in bytes (4 or 8), u8 flags
//   (bit 0: optimizer state present), model config (u32 rows, u32 cols,
//   u32 spatial, u32 schedule length, u32 entries..., u32 decoder width,
//   u64 init seed), u64 fingerprint, u64 completed epochs, u64 Adam step,
//   u32 manifest length, then per entry: u16 name length, name bytes,
//   u32 dims[4], u64 byte offset into payload, u64 element count;
//   finally u64 payload length and the payload itself.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lfae/errors.hpp"
#include "lfae/model.hpp"
#include "lfae/optimizer.hpp"

namespace lfae {

inline constexpr std::array<char, 4> kEncodedMagic{'L', 'F', 'A', 'E'};
inline constexpr std::array<char, 4> kCheckpointMagic{'L', 'F', 'C', 'K'};
inline constexpr std::uint16_t kEncodedVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::size_t kEncodedHeaderBytes = 28;

namespace detail {

// Upper bounds that keep a corrupted header from requesting absurd allocations.
inline constexpr std::uint64_t kMaxSpatial = 1u << 16;
inline constexpr std::uint64_t kMaxChannels = 1u << 20;
inline constexpr std::uint64_t kMaxManifest = 1u << 16;

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    template <class T>
    void scalar(T v)
    {
        if constexpr (sizeof(T) == 4) {
            f32(static_cast<float>(v));
        } else {
            f64(static_cast<double>(v));
        }
    }

    std::size_t size() const noexcept { return bytes_.size(); }
    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

    void flush_to(std::ostream& os, const char* what)
    {
        os.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
        if (!os) {
            throw IoError(std::string("failed writing ") + what);
        }
        bytes_.clear();
    }

private:
    void put(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> bytes_;
};

/// Sequential reader that turns every short read into a CorruptionError
/// naming the expected and available byte counts.
class ByteReader {
public:
    explicit ByteReader(std::istream& is) : is_(is) {}

    std::uint64_t offset() const noexcept { return offset_; }

    std::vector<std::uint8_t> take(std::uint64_t n, const char* what)
    {
        std::vector<std::uint8_t> out;
        constexpr std::uint64_t kChunk = 1u << 20;
        while (out.size() < n) {
            const std::uint64_t want = std::min<std::uint64_t>(kChunk, n - out.size());
            const std::size_t before = out.size();
            out.resize(before + want);
            is_.read(reinterpret_cast<char*>(out.data() + before), static_cast<std::streamsize>(want));
            const auto got = static_cast<std::uint64_t>(is_.gcount());
            if (got < want) {
                const std::uint64_t have = before + got;
                throw CorruptionError(std::string("truncated ") + what + " at byte offset " +
                                      std::to_string(offset_) + ": expected " + std::to_string(n) +
                                      " bytes, got " + std::to_string(have));
            }
        }
        offset_ += n;
        return out;
    }

    std::uint64_t uint(int n, const char* what)
    {
        const auto b = take(static_cast<std::uint64_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
        }
        return v;
    }
    std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(uint(1, what)); }
    std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(uint(2, what)); }
    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(uint(4, what)); }
    std::uint64_t u64(const char* what) { return uint(8, what); }

private:
    std::istream& is_;
    std::uint64_t offset_ = 0;
};

inline std::uint64_t load_le(const std::uint8_t* p, int n)
{
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

inline float load_f32(const std::uint8_t* p) { return std::bit_cast<float>(static_cast<std::uint32_t>(load_le(p, 4))); }
inline double load_f64(const std::uint8_t* p) { return std::bit_cast<double>(load_le(p, 8)); }

inline void expect_magic(ByteReader& r, const std::array<char, 4>& magic, const char* kind)
{
    const auto b = r.take(4, "magic");
    if (!std::equal(magic.begin(), magic.end(), b.begin(), [](char m, std::uint8_t v) {
            return static_cast<std::uint8_t>(m) == v;
        })) {
        throw UnsupportedFormatError(std::string("not a ") + kind + " file (bad magic)");
    }
}

template <class Fn>
void with_output_file(const std::filesystem::path& path, Fn&& fn)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    fn(os);
    os.flush();
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

inline std::ifstream open_input_file(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return is;
}

} // namespace detail

/// Exact byte size of an encoded file for the given geometry.
inline std::uint64_t encoded_file_bytes(std::uint64_t spatial, std::uint64_t latent_channels)
{
    const std::uint64_t ls = spatial / kDownsample;
    return kEncodedHeaderBytes + (latent_channels * ls * ls + spatial * spatial * kRgb) * 4;
}

inline void write_encoded(const EncodedLightField& enc, std::ostream& os)
{
    const Shape& ls = enc.latent.shape();
    if (enc.grid_rows == 0 || enc.grid_rows > 255 || enc.grid_cols == 0 || enc.grid_cols > 255) {
        throw ShapeError("write_encoded: grid " + std::to_string(enc.grid_rows) + "x" +
                         std::to_string(enc.grid_cols) + " does not fit the header");
    }
    if (ls.n != 1 || ls.h != enc.spatial / kDownsample || ls.w != ls.h || enc.spatial % kDownsample != 0) {
        throw ShapeError("write_encoded: latent " + to_string(ls) + " inconsistent with spatial size " +
                         std::to_string(enc.spatial));
    }
    if (enc.center.height != enc.spatial || enc.center.width != enc.spatial ||
        enc.center.pixels.size() != enc.spatial * enc.spatial * kRgb) {
        throw ShapeError("write_encoded: center view does not match spatial size " + std::to_string(enc.spatial));
    }
    detail::ByteWriter w;
    w.raw(kEncodedMagic.data(), 4);
    w.u16(kEncodedVersion);
    w.u8(static_cast<std::uint8_t>(enc.grid_rows));
    w.u8(static_cast<std::uint8_t>(enc.grid_cols));
    w.u32(static_cast<std::uint32_t>(enc.spatial));
    w.u32(static_cast<std::uint32_t>(ls.c));
    w.u32(static_cast<std::uint32_t>(ls.h));
    w.u64(enc.fingerprint);
    for (float v : enc.latent.values()) {
        w.f32(v);
    }
    for (float v : enc.center.pixels) {
        w.f32(v);
    }
    w.flush_to(os, "encoded light field");
}

inline EncodedLightField read_encoded(std::istream& is)
{
    detail::ByteReader r(is);
    detail::expect_magic(r, kEncodedMagic, "encoded light field");
    const std::uint16_t version = r.u16("version");
    if (version != kEncodedVersion) {
        throw UnsupportedFormatError("unsupported encoded light field version " + std::to_string(version));
    }
    EncodedLightField enc;
    enc.grid_rows = r.u8("grid rows");
    enc.grid_cols = r.u8("grid cols");
    enc.spatial = r.u32("spatial size");
    const std::uint64_t channels = r.u32("latent channels");
    const std::uint64_t latent_spatial = r.u32("latent spatial size");
    enc.fingerprint = r.u64("fingerprint");
    if (enc.grid_rows == 0 || enc.grid_cols == 0) {
        throw CorruptionError("encoded header declares an empty view grid");
    }
    if (enc.spatial == 0 || enc.spatial > detail::kMaxSpatial || enc.spatial % kDownsample != 0 ||
        latent_spatial != enc.spatial / kDownsample) {
        throw CorruptionError("encoded header sizes inconsistent: spatial " + std::to_string(enc.spatial) +
                              ", latent spatial " + std::to_string(latent_spatial));
    }
    if (channels == 0 || channels > detail::kMaxChannels) {
        throw CorruptionError("encoded header declares " + std::to_string(channels) + " latent channels");
    }
    const std::uint64_t latent_count = channels * latent_spatial * latent_spatial;
    const std::uint64_t center_count = static_cast<std::uint64_t>(enc.spatial) * enc.spatial * kRgb;
    const auto payload = r.take((latent_count + center_count) * 4, "payload");
    enc.latent = Tensor<float>({1, channels, latent_spatial, latent_spatial});
    for (std::uint64_t i = 0; i < latent_count; ++i) {
        enc.latent[i] = detail::load_f32(payload.data() + 4 * i);
    }
    enc.center = Image(enc.spatial, enc.spatial);
    const std::uint8_t* center = payload.data() + 4 * latent_count;
    for (std::uint64_t i = 0; i < center_count; ++i) {
        enc.center.pixels[i] = detail::load_f32(center + 4 * i);
    }
    return enc;
}

inline void write_encoded_file(const EncodedLightField& enc, const std::filesystem::path& path)
{
    detail::with_output_file(path, [&](std::ostream& os) { write_encoded(enc, os); });
}

inline EncodedLightField read_encoded_file(const std::filesystem::path& path)
{
    auto is = detail::open_input_file(path);
    return read_encoded(is);
}

/// A model plus optional optimizer state and training progress.
template <class T>
struct Checkpoint {
    Model<T> model;
    std::optional<AdamState<T>> optimizer;
    std::uint64_t completed_epochs = 0;
};

namespace detail {

struct ManifestEntry {
    std::string name;
    std::array<std::uint32_t, 4> dims{};
    std::uint64_t offset = 0;
    std::uint64_t count = 0;
};

/// Every named block the checkpoint of `m` holds, in write order.
template <class T, class F>
void for_each_block(Model<T>& m, std::optional<AdamState<T>>* optimizer, F&& f)
{
    std::vector<std::string> names;
    for_each_parameter(m, [&](const std::string& name, std::span<T> v) {
        names.push_back(name);
        f(name, v);
    });
    for_each_buffer(m, [&](const std::string& name, std::span<T> v) { f(name, v); });
    if (optimizer != nullptr && optimizer->has_value()) {
        AdamState<T>& s = **optimizer;
        if (s.first_moment.size() != names.size() || s.second_moment.size() != names.size()) {
            throw ShapeError("checkpoint: optimizer state does not match the model parameter list");
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            f("adam.m." + names[i], std::span(s.first_moment[i]));
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            f("adam.v." + names[i], std::span(s.second_moment[i]));
        }
    }
}

template <class T>
std::array<std::uint32_t, 4> block_dims(const Model<T>& m, const std::string& name, std::size_t count)
{
    const auto tensor_dims = [](const Tensor<T>& t) {
        const Shape& s = t.shape();
        return std::array<std::uint32_t, 4>{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                            static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    };
    const std::string base = name.rfind("adam.", 0) == 0 ? name.substr(7) : name;
    if (base.ends_with(".weight")) {
        if (base == "merge.weight") {
            return tensor_dims(m.merge.weights);
        }
        const bool enc = base.rfind("encoder.", 0) == 0;
        const std::size_t idx = std::stoul(base.substr(8));
        return tensor_dims(enc ? m.encoder[idx].conv.weights : m.decoder[idx].conv.weights);
    }
    return {static_cast<std::uint32_t>(count), 1, 1, 1};
}

} // namespace detail

template <class T>
void write_checkpoint(const Model<T>& model, const AdamState<T>* optimizer, std::uint64_t completed_epochs,
                      std::ostream& os)
{
    validate(model.config);
    Model<T> m = model;
    std::optional<AdamState<T>> opt;
    if (optimizer != nullptr) {
        opt = *optimizer;
    }
    std::vector<detail::ManifestEntry> manifest;
    std::vector<std::span<T>> blocks;
    std::uint64_t offset = 0;
    detail::for_each_block(m, &opt, [&](const std::string& name, std::span<T> v) {
        manifest.push_back({name, detail::block_dims(m, name, v.size()), offset, v.size()});
        blocks.push_back(v);
        offset += v.size() * sizeof(T);
    });

    const ModelConfig& cfg = m.config;
    detail::ByteWriter w;
    w.raw(kCheckpointMagic.data(), 4);
    w.u16(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(sizeof(T)));
    w.u8(opt ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(cfg.grid_rows));
    w.u32(static_cast<std::uint32_t>(cfg.grid_cols));
    w.u32(static_cast<std::uint32_t>(cfg.spatial));
    w.u32(static_cast<std::uint32_t>(cfg.channel_schedule.size()));
    for (std::size_t c : cfg.channel_schedule) {
        w.u32(static_cast<std::uint32_t>(c));
    }
    w.u32(static_cast<std::uint32_t>(cfg.decoder_out_channels));
    w.u64(cfg.init_seed);
    w.u64(fingerprint(cfg));
    w.u64(completed_epochs);
    w.u64(opt ? opt->step : 0);
    w.u32(static_cast<std::uint32_t>(manifest.size()));
    for (const auto& e : manifest) {
        w.u16(static_cast<std::uint16_t>(e.name.size()));
        w.raw(e.name.data(), e.name.size());
        for (std::uint32_t d : e.dims) {
            w.u32(d);
        }
        w.u64(e.offset);
        w.u64(e.count);
    }
    w.u64(offset);
    w.flush_to(os, "checkpoint header");
    for (const auto& block : blocks) {
        for (T v : block) {
            w.scalar(v);
        }
        w.flush_to(os, "checkpoint payload");
    }
}

template <class T>
void write_checkpoint(const Checkpoint<T>& ckpt, std::ostream& os)
{
    write_checkpoint(ckpt.model, ckpt.optimizer ? &*ckpt.optimizer : nullptr, ckpt.completed_epochs, os);
}

template <class T = float>
Checkpoint<T> read_checkpoint(std::istream& is)
{
    detail::ByteReader r(is);
    detail::expect_magic(r, kCheckpointMagic, "checkpoint");
    const std::uint16_t version = r.u16("version");
    if (version != kCheckpointVersion) {
        throw UnsupportedFormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint8_t width = r.u8("scalar width");
    if (width != 4 && width != 8) {
        throw CorruptionError("checkpoint declares scalar width " + std::to_string(width));
    }
    const std::uint8_t flags = r.u8("flags");
    ModelConfig cfg;
    cfg.grid_rows = r.u32("grid rows");
    cfg.grid_cols = r.u32("grid cols");
    cfg.spatial = r.u32("spatial size");
    const std::uint32_t schedule_len = r.u32("schedule length");
    if (schedule_len > 64) {
        throw CorruptionError("checkpoint declares a channel schedule of length " + std::to_string(schedule_len));
    }
    cfg.channel_schedule.resize(schedule_len);
    for (auto& c : cfg.channel_schedule) {
        c = r.u32("channel schedule");
    }
    cfg.decoder_out_channels = r.u32("decoder width");
    cfg.init_seed = r.u64("init seed");
    const std::uint64_t stored_fingerprint = r.u64("fingerprint");
    const std::uint64_t completed_epochs = r.u64("completed epochs");
    const std::uint64_t adam_step = r.u64("optimizer step");
    try {
        validate(cfg);
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("checkpoint holds an invalid model config: ") + e.what());
    }
    if (cfg.spatial > detail::kMaxSpatial || cfg.latent_channels() > detail::kMaxChannels ||
        *std::max_element(cfg.channel_schedule.begin(), cfg.channel_schedule.end()) > detail::kMaxChannels) {
        throw CorruptionError("checkpoint model config exceeds supported sizes");
    }
    if (stored_fingerprint != fingerprint(cfg)) {
        throw CorruptionError("checkpoint fingerprint does not match its model config");
    }
    const std::uint32_t entries = r.u32("manifest length");
    if (entries > detail::kMaxManifest) {
        throw CorruptionError("checkpoint manifest declares " + std::to_string(entries) + " entries");
    }
    std::map<std::string, detail::ManifestEntry> manifest;
    for (std::uint32_t i = 0; i < entries; ++i) {
        detail::ManifestEntry e;
        const std::uint16_t len = r.u16("manifest name length");
        const auto name = r.take(len, "manifest name");
        e.name.assign(name.begin(), name.end());
        for (auto& d : e.dims) {
            d = r.u32("manifest dims");
        }
        e.offset = r.u64("manifest offset");
        e.count = r.u64("manifest count");
        if (!manifest.emplace(e.name, e).second) {
            throw CorruptionError("checkpoint manifest repeats entry '" + e.name + "'");
        }
    }
    const std::uint64_t payload_bytes = r.u64("payload length");

    Checkpoint<T> ckpt{build_model<T>(cfg), std::nullopt, completed_epochs};
    if ((flags & 1u) != 0) {
        AdamState<T> s;
        s.step = adam_step;
        for_each_parameter(ckpt.model, [&s](const std::string&, std::span<T> v) {
            s.first_moment.emplace_back(v.size(), T(0));
            s.second_moment.emplace_back(v.size(), T(0));
        });
        ckpt.optimizer = std::move(s);
    }

    // Every expected block must be present, in bounds and disjoint from the others.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> extents;
    std::size_t expected = 0;
    std::vector<std::pair<const detail::ManifestEntry*, std::span<T>>> plan;
    detail::for_each_block(ckpt.model, &ckpt.optimizer, [&](const std::string& name, std::span<T> v) {
        ++expected;
        const auto it = manifest.find(name);
        if (it == manifest.end()) {
            throw CorruptionError("checkpoint manifest lacks entry '" + name + "'");
        }
        const detail::ManifestEntry& e = it->second;
        if (e.count != v.size()) {
            throw CorruptionError("checkpoint entry '" + name + "' holds " + std::to_string(e.count) +
                                  " values, expected " + std::to_string(v.size()));
        }
        const std::uint64_t bytes = e.count * width;
        if (e.offset > payload_bytes || bytes > payload_bytes - e.offset) {
            throw CorruptionError("checkpoint entry '" + name + "' lies outside the payload");
        }
        extents.emplace_back(e.offset, e.offset + bytes);
        plan.emplace_back(&e, v);
    });
    if (expected != manifest.size()) {
        throw CorruptionError("checkpoint manifest has " + std::to_string(manifest.size()) + " entries, expected " +
                              std::to_string(expected));
    }
    std::sort(extents.begin(), extents.end());
    for (std::size_t i = 1; i < extents.size(); ++i) {
        if (extents[i].first < extents[i - 1].second) {
            throw CorruptionError("checkpoint manifest entries overlap");
        }
    }

    const auto payload = r.take(payload_bytes, "checkpoint payload");
    for (auto& [entry, values] : plan) {
        const std::uint8_t* src = payload.data() + entry->offset;
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] = width == 4 ? static_cast<T>(detail::load_f32(src + 4 * i))
                                   : static_cast<T>(detail::load_f64(src + 8 * i));
        }
    }
    ckpt.model.mode = Mode::eval;
    return ckpt;
}

template <class T>
void write_checkpoint_file(const Checkpoint<T>& ckpt, const std::filesystem::path& path)
{
    detail::with_output_file(path, [&](std::ostream& os) { write_checkpoint(ckpt, os); });
}

template <class T = float>
Checkpoint<T> read_checkpoint_file(const std::filesystem::path& path)
{
    auto is = detail::open_input_file(path);
    return read_checkpoint<T>(is);
}

} // namespace lfae
