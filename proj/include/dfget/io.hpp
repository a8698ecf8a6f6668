#pragma once

// On-disk formats.
//
//   Map files    binary PGM (P5). Written with maxval 65535; read with any
//                maxval in [1, 65535]. Samples are big-endian when two bytes
//                wide, as P5 requires.
//   Field files  raw little-endian float32, row-major, the row-displacement
//                plane followed by the column-displacement plane, plus a JSON
//                sidecar at <path>.json: {"h", "w", "planes": 2, "dtype": "f32le"}.
//   Param files  JSON manifest naming each tensor (name, shape, offset in
//                floats) and a little-endian float32 payload file.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfget/displacement.hpp"
#include "dfget/getconv.hpp"

namespace dfget {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

namespace detail {

inline std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spill(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

inline void put_f32le(std::vector<unsigned char>& out, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((u >> (8 * b)) & 0xffu));
}

inline float get_f32le(const unsigned char* p) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

class HeaderReader {
public:
    HeaderReader(const std::vector<unsigned char>& bytes, std::size_t start) : b_(bytes), pos_(start) {}

    std::size_t pos() const { return pos_; }
    std::size_t last_start() const { return last_; }

    long number(const char* what) {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
        const std::size_t start = pos_;
        last_ = start;
        long v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_] - '0');
            if (v > 1'000'000'000L) throw ParseError(std::string(what) + " is too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("expected ") + what, start);
        return v;
    }

    // Exactly one whitespace byte separates the header from the raster.
    void raster_separator() {
        if (pos_ >= b_.size() || !std::isspace(b_[pos_]))
            throw ParseError("expected whitespace before raster data", pos_);
        ++pos_;
    }

private:
    const std::vector<unsigned char>& b_;
    std::size_t pos_;
    std::size_t last_ = 0;
};

}  // namespace detail

inline LabelMap decode_map(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("missing P5 magic", 0);
    detail::HeaderReader hdr(bytes, 2);
    const long w = hdr.number("width");
    if (w < 1) throw ParseError("width must be at least 1", hdr.last_start());
    const long h = hdr.number("height");
    if (h < 1) throw ParseError("height must be at least 1", hdr.last_start());
    const long maxval = hdr.number("maxval");
    if (maxval < 1 || maxval > 65535)
        throw ParseError("maxval " + std::to_string(maxval) + " outside [1, 65535]", hdr.last_start());
    hdr.raster_separator();

    const std::size_t sample = maxval < 256 ? 1 : 2;
    const GridShape shape(static_cast<int>(h), static_cast<int>(w));
    const std::size_t need = shape.size() * sample;
    const std::size_t at = hdr.pos();
    if (bytes.size() - at < need)
        throw ParseError("truncated raster: need " + std::to_string(need) + " bytes, have " +
                             std::to_string(bytes.size() - at),
                         bytes.size());

    LabelMap out(shape);
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const unsigned char* p = bytes.data() + at + i * sample;
        const Label v = sample == 1 ? p[0] : static_cast<Label>((p[0] << 8) | p[1]);
        if (v > static_cast<Label>(maxval))
            throw ParseError("sample exceeds maxval", at + i * sample);
        out[i] = v;
    }
    return out;
}

inline std::vector<unsigned char> encode_map(const LabelMap& map) {
    const std::string header =
        "P5\n" + std::to_string(map.shape.w) + " " + std::to_string(map.shape.h) + "\n65535\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(out.size() + 2 * map.size());
    for (Label v : map.data) {
        if (v > 65535) throw std::invalid_argument("label " + std::to_string(v) + " does not fit 16 bits");
        out.push_back(static_cast<unsigned char>(v >> 8));
        out.push_back(static_cast<unsigned char>(v & 0xffu));
    }
    return out;
}

inline LabelMap read_map(const std::filesystem::path& path) { return decode_map(detail::slurp(path)); }
inline void write_map(const std::filesystem::path& path, const LabelMap& map) {
    detail::spill(path, encode_map(map));
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& payload) {
    return payload.string() + ".json";
}

inline void write_field(const std::filesystem::path& path, const DisplacementField& f) {
    std::vector<unsigned char> bytes;
    bytes.reserve(f.size() * 8);
    for (const Vec2& v : f.data) detail::put_f32le(bytes, static_cast<float>(v.row));
    for (const Vec2& v : f.data) detail::put_f32le(bytes, static_cast<float>(v.col));
    detail::spill(path, bytes);
    const nlohmann::json meta = {{"h", f.shape.h}, {"w", f.shape.w}, {"planes", 2}, {"dtype", "f32le"}};
    const std::string text = meta.dump(2) + "\n";
    detail::spill(sidecar_path(path), {text.begin(), text.end()});
}

inline DisplacementField read_field(const std::filesystem::path& path) {
    const auto side = detail::slurp(sidecar_path(path));
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(side.begin(), side.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("field sidecar: ") + e.what(), e.byte);
    }
    if (!meta.contains("h") || !meta.contains("w") || meta.value("planes", 0) != 2 ||
        meta.value("dtype", std::string()) != "f32le")
        throw ParseError("field sidecar must carry h, w, planes = 2, dtype = \"f32le\"", 0);
    const GridShape shape(meta.at("h").get<int>(), meta.at("w").get<int>());
    const auto bytes = detail::slurp(path);
    const std::size_t need = shape.size() * 8;
    if (bytes.size() != need)
        throw ParseError("field payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                             std::to_string(need),
                         std::min(bytes.size(), need));
    DisplacementField f(shape);
    const std::size_t plane = shape.size() * 4;
    for (std::size_t i = 0; i < shape.size(); ++i)
        f[i] = {detail::get_f32le(bytes.data() + 4 * i), detail::get_f32le(bytes.data() + plane + 4 * i)};
    return f;
}

// Layer parameters -----------------------------------------------------------

namespace detail {

struct TensorRef {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double>* values;
};

inline std::vector<TensorRef> tensors_of(LayerParams& p) {
    const std::size_t k2 = static_cast<std::size_t>(p.kernel * p.kernel);
    return {
        {"mlp.w1", {p.mlp.w1.rows(), p.mlp.w1.cols()}, &p.mlp.w1.values()},
        {"mlp.b1", {p.mlp.b1.size()}, &p.mlp.b1},
        {"mlp.w2", {p.mlp.w2.rows(), p.mlp.w2.cols()}, &p.mlp.w2.values()},
        {"mlp.b2", {p.mlp.b2.size()}, &p.mlp.b2},
        {"norm.gamma", {p.norm.gamma.size()}, &p.norm.gamma},
        {"norm.beta", {p.norm.beta.size()}, &p.norm.beta},
        {"dwconv.weight", {p.dw.rows(), k2}, &p.dw.values()},
        {"pwconv.weight", {p.pw.rows(), p.pw.cols()}, &p.pw.values()},
        {"pwconv.bias", {p.pw_bias.size()}, &p.pw_bias},
    };
}

}  // namespace detail

/// Writes <manifest> and its payload <manifest stem>.bin next to it.
inline void write_params(const std::filesystem::path& manifest, const LayerParams& params) {
    LayerParams p = params;
    const auto data_path = std::filesystem::path(manifest).replace_extension(".bin");
    std::vector<unsigned char> bytes;
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& t : detail::tensors_of(p)) {
        tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        for (double v : *t.values) detail::put_f32le(bytes, static_cast<float>(v));
        offset += t.values->size();
    }
    const nlohmann::json meta = {{"dtype", "f32le"},
                                 {"channels", p.channels()},
                                 {"queries", p.queries()},
                                 {"kernel", p.kernel},
                                 {"norm_eps", p.norm.eps},
                                 {"data", data_path.filename().string()},
                                 {"tensors", tensors}};
    detail::spill(data_path, bytes);
    const std::string text = meta.dump(2) + "\n";
    detail::spill(manifest, {text.begin(), text.end()});
}

inline LayerParams read_params(const std::filesystem::path& manifest) {
    const auto text = detail::slurp(manifest);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("parameter manifest: ") + e.what(), e.byte);
    }
    if (meta.value("dtype", std::string()) != "f32le")
        throw ParseError("parameter manifest must declare dtype \"f32le\"", 0);
    const auto c = meta.at("channels").get<std::size_t>();
    const auto n = meta.at("queries").get<std::size_t>();
    const int kernel = meta.at("kernel").get<int>();
    LayerParams p = LayerParams::neutral(c, n, kernel);
    p.norm.eps = meta.value("norm_eps", 1e-5);

    const auto bytes = detail::slurp(manifest.parent_path() / meta.at("data").get<std::string>());
    for (const auto& t : detail::tensors_of(p)) {
        const auto it = std::find_if(meta.at("tensors").begin(), meta.at("tensors").end(),
                                     [&](const nlohmann::json& e) { return e.at("name") == t.name; });
        if (it == meta.at("tensors").end()) throw ParseError("manifest lacks tensor " + t.name, 0);
        if (it->at("shape").get<std::vector<std::size_t>>() != t.shape)
            throw ParseError("tensor " + t.name + " has unexpected shape", 0);
        const auto offset = it->at("offset").get<std::size_t>();
        const std::size_t end = (offset + t.values->size()) * 4;
        if (end > bytes.size()) throw ParseError("tensor " + t.name + " runs past the payload", bytes.size());
        for (std::size_t k = 0; k < t.values->size(); ++k)
            (*t.values)[k] = detail::get_f32le(bytes.data() + (offset + k) * 4);
    }
    return p;
}

}  // namespace dfget
