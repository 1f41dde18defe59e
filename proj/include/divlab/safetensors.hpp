#pragma once

// safetensors container: [u64 LE header length][UTF-8 JSON header][raw buffer].
// Writing is canonical (sorted names, tight contiguous offsets, header padded
// with spaces to a multiple of 8), so equal logical content gives equal bytes.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "divlab/digest.hpp"
#include "divlab/half.hpp"
#include "divlab/numfmt.hpp"

namespace divlab::st {

static_assert(std::endian::native == std::endian::little, "safetensors I/O assumes a little-endian host");

enum class CheckpointErrc {
    io,
    malformed_prefix,
    invalid_header,
    unknown_dtype,
    offsets_out_of_bounds,
    overlapping_offsets,
    size_mismatch,
    name_set_mismatch,
    shape_mismatch,
    dtype_mismatch,
    non_float_mismatch,
};

inline std::string_view to_string(CheckpointErrc e) {
    switch (e) {
        case CheckpointErrc::io: return "io";
        case CheckpointErrc::malformed_prefix: return "malformed_prefix";
        case CheckpointErrc::invalid_header: return "invalid_header";
        case CheckpointErrc::unknown_dtype: return "unknown_dtype";
        case CheckpointErrc::offsets_out_of_bounds: return "offsets_out_of_bounds";
        case CheckpointErrc::overlapping_offsets: return "overlapping_offsets";
        case CheckpointErrc::size_mismatch: return "size_mismatch";
        case CheckpointErrc::name_set_mismatch: return "name_set_mismatch";
        case CheckpointErrc::shape_mismatch: return "shape_mismatch";
        case CheckpointErrc::dtype_mismatch: return "dtype_mismatch";
        case CheckpointErrc::non_float_mismatch: return "non_float_mismatch";
    }
    return "unknown";
}

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(CheckpointErrc kind, const std::string& what)
        : std::runtime_error(fmt::format("{}: {}", to_string(kind), what)), kind_(kind) {}

    [[nodiscard]] CheckpointErrc kind() const noexcept { return kind_; }

private:
    CheckpointErrc kind_;
};

enum class DType { BOOL, U8, I8, I16, U16, F16, BF16, I32, U32, F32, I64, U64, F64 };

struct DTypeInfo {
    DType dtype;
    std::string_view name;
    std::size_t size;
    bool is_float;
};

inline constexpr DTypeInfo kDTypes[] = {
    {DType::BOOL, "BOOL", 1, false}, {DType::U8, "U8", 1, false},   {DType::I8, "I8", 1, false},
    {DType::I16, "I16", 2, false},   {DType::U16, "U16", 2, false}, {DType::F16, "F16", 2, true},
    {DType::BF16, "BF16", 2, true},  {DType::I32, "I32", 4, false}, {DType::U32, "U32", 4, false},
    {DType::F32, "F32", 4, true},    {DType::I64, "I64", 8, false}, {DType::U64, "U64", 8, false},
    {DType::F64, "F64", 8, true},
};

inline const DTypeInfo& info(DType d) {
    for (const auto& i : kDTypes)
        if (i.dtype == d) return i;
    throw std::logic_error("unhandled dtype");
}

inline std::string_view dtype_name(DType d) { return info(d).name; }
inline std::size_t dtype_size(DType d) { return info(d).size; }
inline bool is_float(DType d) { return info(d).is_float; }

inline DType parse_dtype(std::string_view name) {
    for (const auto& i : kDTypes)
        if (i.name == name) return i.dtype;
    throw CheckpointError(CheckpointErrc::unknown_dtype, fmt::format("dtype '{}' is not supported", name));
}

struct TensorInfo {
    DType dtype = DType::F32;
    std::vector<std::uint64_t> shape;
    std::uint64_t begin = 0;  ///< byte offset into the data buffer
    std::uint64_t end = 0;    ///< one past the last byte

    [[nodiscard]] std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    [[nodiscard]] std::uint64_t byte_size() const { return element_count() * dtype_size(dtype); }
};

using Metadata = std::map<std::string, std::string>;

class TensorFile {
public:
    std::map<std::string, TensorInfo> tensors;
    std::optional<Metadata> metadata;
    std::vector<std::byte> buffer;

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(tensors.size());
        for (const auto& [name, _] : tensors) out.push_back(name);
        return out;
    }

    [[nodiscard]] const TensorInfo& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::out_of_range("no tensor named '" + name + "'");
        return it->second;
    }

    [[nodiscard]] std::span<const std::byte> data(const std::string& name) const {
        const auto& t = at(name);
        return std::span<const std::byte>(buffer).subspan(t.begin, t.end - t.begin);
    }

    /// Appends a tensor at the end of the buffer.
    void add(const std::string& name, DType dtype, std::vector<std::uint64_t> shape, std::span<const std::byte> bytes) {
        if (name == "__metadata__") throw std::invalid_argument("'__metadata__' is reserved");
        TensorInfo t{dtype, std::move(shape), buffer.size(), buffer.size() + bytes.size()};
        if (t.byte_size() != bytes.size())
            throw CheckpointError(CheckpointErrc::size_mismatch,
                                  fmt::format("tensor '{}': {} bytes given, shape needs {}", name, bytes.size(), t.byte_size()));
        buffer.insert(buffer.end(), bytes.begin(), bytes.end());
        tensors.insert_or_assign(name, std::move(t));
    }

    void add_f32(const std::string& name, std::vector<std::uint64_t> shape, std::span<const float> values) {
        add(name, DType::F32, std::move(shape), std::as_bytes(values));
    }

    /// Elements of a floating tensor widened to double.
    [[nodiscard]] std::vector<double> to_doubles(const std::string& name) const;

    /// Checks the structural invariants; throws CheckpointError on the first violation.
    void validate() const {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
        for (const auto& [name, t] : tensors) {
            if (t.end < t.begin || t.end > buffer.size())
                throw CheckpointError(CheckpointErrc::offsets_out_of_bounds,
                                      fmt::format("tensor '{}': data_offsets [{}, {}) exceed buffer of {} bytes", name,
                                                  t.begin, t.end, buffer.size()));
            if (t.end - t.begin != t.byte_size())
                throw CheckpointError(CheckpointErrc::size_mismatch,
                                      fmt::format("tensor '{}': {} bytes stored, shape and dtype need {}", name,
                                                  t.end - t.begin, t.byte_size()));
            if (t.end > t.begin) ranges.emplace_back(t.begin, t.end);
        }
        std::sort(ranges.begin(), ranges.end());
        for (std::size_t i = 1; i < ranges.size(); ++i) {
            if (ranges[i].first < ranges[i - 1].second)
                throw CheckpointError(CheckpointErrc::overlapping_offsets,
                                      fmt::format("byte ranges [{}, {}) and [{}, {}) overlap", ranges[i - 1].first,
                                                  ranges[i - 1].second, ranges[i].first, ranges[i].second));
        }
    }
};

namespace detail {

inline std::uint64_t load_le64(std::span<const std::byte> b) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]);
    return v;
}

inline void store_le64(std::uint64_t v, std::byte* out) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFF);
}

inline std::uint64_t header_uint(const nlohmann::json& j, const std::string& name, const char* field) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        throw CheckpointError(CheckpointErrc::invalid_header,
                              fmt::format("tensor '{}': {} must hold non-negative integers", name, field));
    return j.get<std::uint64_t>();
}

inline double load_element(const std::byte* p, DType d) {
    switch (d) {
        case DType::F64: {
            double v;
            std::memcpy(&v, p, sizeof v);
            return v;
        }
        case DType::F32: {
            float v;
            std::memcpy(&v, p, sizeof v);
            return v;
        }
        case DType::F16:
        case DType::BF16: {
            std::uint16_t bits;
            std::memcpy(&bits, p, sizeof bits);
            return d == DType::F16 ? f16_to_double(bits) : bf16_to_double(bits);
        }
        default: throw std::logic_error("load_element: not a floating dtype");
    }
}

inline void store_element(double v, std::byte* p, DType d) {
    switch (d) {
        case DType::F64: std::memcpy(p, &v, sizeof v); return;
        case DType::F32: {
            const auto f = static_cast<float>(v);
            std::memcpy(p, &f, sizeof f);
            return;
        }
        case DType::F16:
        case DType::BF16: {
            const std::uint16_t bits = d == DType::F16 ? double_to_f16(v) : double_to_bf16(v);
            std::memcpy(p, &bits, sizeof bits);
            return;
        }
        default: throw std::logic_error("store_element: not a floating dtype");
    }
}

}  // namespace detail

inline std::vector<double> TensorFile::to_doubles(const std::string& name) const {
    const auto& t = at(name);
    if (!is_float(t.dtype)) throw std::invalid_argument("tensor '" + name + "' is not a floating tensor");
    const auto bytes = data(name);
    const std::size_t width = dtype_size(t.dtype);
    std::vector<double> out(static_cast<std::size_t>(t.element_count()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::load_element(bytes.data() + i * width, t.dtype);
    return out;
}

inline TensorFile parse_checkpoint(std::span<const std::byte> file) {
    if (file.size() < 8)
        throw CheckpointError(CheckpointErrc::malformed_prefix,
                              fmt::format("file has {} bytes, shorter than the 8-byte length prefix", file.size()));
    const std::uint64_t header_len = detail::load_le64(file.first(8));
    if (header_len > file.size() - 8)
        throw CheckpointError(CheckpointErrc::malformed_prefix,
                              fmt::format("header length {} exceeds the {} bytes that follow the prefix", header_len,
                                          file.size() - 8));

    const auto* header_begin = reinterpret_cast<const char*>(file.data() + 8);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_begin, header_begin + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointErrc::invalid_header, std::string("header is not valid JSON: ") + e.what());
    }
    if (!header.is_object()) throw CheckpointError(CheckpointErrc::invalid_header, "header must be a JSON object");

    TensorFile tf;
    const auto data = file.subspan(8 + static_cast<std::size_t>(header_len));
    tf.buffer.assign(data.begin(), data.end());

    for (const auto& [name, entry] : header.items()) {
        if (name == "__metadata__") {
            if (!entry.is_object()) throw CheckpointError(CheckpointErrc::invalid_header, "__metadata__ must be an object");
            Metadata md;
            for (const auto& [k, v] : entry.items()) {
                if (!v.is_string())
                    throw CheckpointError(CheckpointErrc::invalid_header, "__metadata__ values must be strings");
                md.emplace(k, v.get<std::string>());
            }
            tf.metadata = std::move(md);
            continue;
        }
        if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") || !entry.contains("data_offsets"))
            throw CheckpointError(CheckpointErrc::invalid_header,
                                  fmt::format("tensor '{}' needs dtype, shape and data_offsets", name));
        const auto& dt = entry.at("dtype");
        const auto& shape = entry.at("shape");
        const auto& offs = entry.at("data_offsets");
        if (!dt.is_string()) throw CheckpointError(CheckpointErrc::invalid_header, fmt::format("tensor '{}': dtype must be a string", name));
        if (!shape.is_array()) throw CheckpointError(CheckpointErrc::invalid_header, fmt::format("tensor '{}': shape must be an array", name));
        if (!offs.is_array() || offs.size() != 2)
            throw CheckpointError(CheckpointErrc::invalid_header, fmt::format("tensor '{}': data_offsets must be [begin, end]", name));

        TensorInfo t;
        t.dtype = parse_dtype(dt.get<std::string>());
        for (const auto& d : shape) t.shape.push_back(detail::header_uint(d, name, "shape"));
        t.begin = detail::header_uint(offs[0], name, "data_offsets");
        t.end = detail::header_uint(offs[1], name, "data_offsets");
        tf.tensors.emplace(name, std::move(t));
    }
    tf.validate();
    return tf;
}

inline TensorFile read_checkpoint(const std::filesystem::path& path) {
    std::vector<std::byte> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const IoError& e) {
        throw CheckpointError(CheckpointErrc::io, e.what());
    }
    return parse_checkpoint(bytes);
}

inline std::vector<std::byte> serialize_checkpoint(const TensorFile& tf) {
    tf.validate();
    nlohmann::json header = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tf.tensors) {
        const std::uint64_t size = t.end - t.begin;
        header[name] = {{"dtype", std::string(dtype_name(t.dtype))},
                        {"shape", t.shape},
                        {"data_offsets", {offset, offset + size}}};
        offset += size;
    }
    if (tf.metadata) header["__metadata__"] = *tf.metadata;

    std::string text = header.dump();
    text.append((8 - text.size() % 8) % 8, ' ');

    std::vector<std::byte> out(8 + text.size() + offset);
    detail::store_le64(text.size(), out.data());
    std::memcpy(out.data() + 8, text.data(), text.size());
    std::byte* cursor = out.data() + 8 + text.size();
    for (const auto& [name, t] : tf.tensors) {
        const auto bytes = tf.data(name);
        if (!bytes.empty()) std::memcpy(cursor, bytes.data(), bytes.size());
        cursor += bytes.size();
    }
    return out;
}

inline void write_checkpoint(const TensorFile& tf, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(tf);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointErrc::io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointErrc::io, "write to '" + path.string() + "' failed");
}

/// SHA-256 of the canonical serialization.
inline std::string content_digest(const TensorFile& tf) { return sha256_hex(serialize_checkpoint(tf)); }

struct MergeOptions {
    /// Tensors whose names match are copied from the later checkpoint unchanged.
    std::optional<std::regex> exclude;
};

/// Weight-space interpolation delta * early + (1 - delta) * late, per element.
///
/// Arithmetic is done in double and rounded once (nearest-even) to the stored
/// dtype. The two operands are always combined with the smaller weight first,
/// so swapping the checkpoints and replacing delta by 1 - delta gives the same
/// bits. At delta 0 or 1 the selected checkpoint's bytes are copied verbatim.
inline TensorFile interpolate_checkpoints(const TensorFile& early, const TensorFile& late, double delta,
                                          const MergeOptions& options = {}) {
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("interpolate_checkpoints: delta must lie in [0, 1]");
    early.validate();
    late.validate();

    if (early.names() != late.names()) {
        std::vector<std::string> only_early, only_late;
        const auto a = early.names(), b = late.names();
        std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_early));
        std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_late));
        throw CheckpointError(CheckpointErrc::name_set_mismatch,
                              fmt::format("tensor names differ: only in early [{}], only in late [{}]",
                                          fmt::join(only_early, ", "), fmt::join(only_late, ", ")));
    }

    TensorFile out;
    for (const auto& [name, ta] : early.tensors) {
        const auto& tb = late.at(name);
        if (ta.shape != tb.shape)
            throw CheckpointError(CheckpointErrc::shape_mismatch, fmt::format("tensor '{}': shapes differ", name));
        if (ta.dtype != tb.dtype)
            throw CheckpointError(CheckpointErrc::dtype_mismatch,
                                  fmt::format("tensor '{}': {} vs {}", name, dtype_name(ta.dtype), dtype_name(tb.dtype)));

        const auto bytes_a = early.data(name);
        const auto bytes_b = late.data(name);
        if (!is_float(ta.dtype)) {
            if (!std::equal(bytes_a.begin(), bytes_a.end(), bytes_b.begin(), bytes_b.end()))
                throw CheckpointError(CheckpointErrc::non_float_mismatch,
                                      fmt::format("tensor '{}' ({}) differs between checkpoints and cannot be interpolated",
                                                  name, dtype_name(ta.dtype)));
            out.add(name, ta.dtype, ta.shape, bytes_b);
            continue;
        }
        if ((options.exclude && std::regex_search(name, *options.exclude)) || delta == 0.0) {
            out.add(name, ta.dtype, ta.shape, bytes_b);
            continue;
        }
        if (delta == 1.0) {
            out.add(name, ta.dtype, ta.shape, bytes_a);
            continue;
        }

        // mix(x, y, w) = w x + (1 - w) y with w <= 1/2. w is derived from the larger
        // weight s so that 1 - w == s exactly and swapping operands gives identical bits.
        const bool early_small = delta <= 0.5;
        const double s = early_small ? 1.0 - delta : delta;
        const double w = 1.0 - s;
        const std::byte* x = (early_small ? bytes_a : bytes_b).data();
        const std::byte* y = (early_small ? bytes_b : bytes_a).data();

        std::vector<std::byte> merged(bytes_a.size());
        const std::size_t width = dtype_size(ta.dtype);
        const auto count = static_cast<std::size_t>(ta.element_count());
        for (std::size_t i = 0; i < count; ++i) {
            const double xv = detail::load_element(x + i * width, ta.dtype);
            const double yv = detail::load_element(y + i * width, ta.dtype);
            detail::store_element(w * xv + (1.0 - w) * yv, merged.data() + i * width, ta.dtype);
        }
        out.add(name, ta.dtype, ta.shape, merged);
    }

    Metadata md = late.metadata.value_or(Metadata{});
    md["wiseft_delta"] = format_real(delta);
    md["wiseft_early_sha256"] = content_digest(early);
    md["wiseft_late_sha256"] = content_digest(late);
    out.metadata = std::move(md);
    return out;
}

}  // namespace divlab::st
