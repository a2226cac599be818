#pragma once

// JSON documents for parameter bundles. Each array is stored as
// {"shape": [...], "dtype": "f64", "data": "<base64 of little-endian f64>"};
// see docs/params_format.md.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "hyla/array_io.hpp"
#include "hyla/attention.hpp"
#include "hyla/rwkv.hpp"
#include "hyla/ssm.hpp"

namespace hyla {

inline constexpr std::string_view kParamsFormat = "hyla-params";
inline constexpr int kParamsVersion = 1;

inline std::string base64_encode(std::span<const unsigned char> bytes) {
    static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        for (int s : {18, 12, 6, 0}) out += table[(v >> s) & 63];
    }
    if (const std::size_t rest = bytes.size() - i) {
        std::uint32_t v = bytes[i] << 16;
        if (rest == 2) v |= bytes[i + 1] << 8;
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += rest == 2 ? table[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view text) {
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw IoError("base64: length not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int pad = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=' && i + 4 == text.size() && j >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = value(c);
            if (d < 0 || pad) throw IoError("base64: invalid character");
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<unsigned char>(v >> 16));
        if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xff));
    }
    return out;
}

inline nlohmann::json array_to_json(const Array& a) {
    std::vector<unsigned char> bytes(a.size() * 8);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::uint64_t bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(a[i]));
        std::memcpy(bytes.data() + 8 * i, &bits, 8);
    }
    return {{"shape", a.shape()}, {"dtype", "f64"}, {"data", base64_encode(bytes)}};
}

inline Array array_from_json(const nlohmann::json& j) {
    try {
        if (j.at("dtype").get<std::string>() != "f64") throw IoError("params: unsupported dtype");
        const Shape shape = j.at("shape").get<Shape>();
        const auto bytes = base64_decode(j.at("data").get<std::string>());
        if (bytes.size() != shape_size(shape) * 8) throw IoError("params: data length disagrees with shape");
        Array out(shape);
        for (std::size_t i = 0; i < out.size(); ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, bytes.data() + 8 * i, 8);
            out[i] = std::bit_cast<double>(detail::to_little_endian(bits));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("params: malformed array entry: ") + e.what());
    }
}

namespace detail {

inline nlohmann::json params_envelope(std::string_view kind) {
    return {{"format", kParamsFormat}, {"version", kParamsVersion}, {"kind", kind}, {"arrays", nlohmann::json::object()}};
}

inline const nlohmann::json& params_arrays(const nlohmann::json& doc, std::string_view kind) {
    if (doc.value("format", "") != kParamsFormat || doc.value("version", 0) != kParamsVersion)
        throw IoError("params: not a hyla-params v1 document");
    if (doc.value("kind", "") != kind) throw IoError("params: expected kind '" + std::string(kind) + "'");
    if (!doc.contains("arrays") || !doc["arrays"].is_object()) throw IoError("params: missing arrays");
    return doc["arrays"];
}

inline Array named_array(const nlohmann::json& arrays, const char* name) {
    if (!arrays.contains(name)) throw IoError(std::string("params: missing array '") + name + "'");
    return array_from_json(arrays[name]);
}

} // namespace detail

inline nlohmann::json to_json(const ProjectionWeights& w) {
    auto doc = detail::params_envelope("projection");
    doc["arrays"]["W_Q"] = array_to_json(w.w_q);
    doc["arrays"]["W_K"] = array_to_json(w.w_k);
    doc["arrays"]["W_V"] = array_to_json(w.w_v);
    return doc;
}

inline ProjectionWeights projection_from_json(const nlohmann::json& doc) {
    const auto& a = detail::params_arrays(doc, "projection");
    return {detail::named_array(a, "W_Q"), detail::named_array(a, "W_K"), detail::named_array(a, "W_V")};
}

inline nlohmann::json to_json(const RWKVParams& p) {
    auto doc = detail::params_envelope("rwkv");
    auto& a = doc["arrays"];
    a["mu_r"] = array_to_json(p.mu_r);
    a["mu_k"] = array_to_json(p.mu_k);
    a["mu_v"] = array_to_json(p.mu_v);
    a["mu_g"] = array_to_json(p.mu_g);
    a["W_r"] = array_to_json(p.w_r);
    a["W_k"] = array_to_json(p.w_k);
    a["W_v"] = array_to_json(p.w_v);
    a["W_g"] = array_to_json(p.w_g);
    a["w"] = array_to_json(p.w);
    a["u"] = array_to_json(p.u);
    return doc;
}

inline RWKVParams rwkv_from_json(const nlohmann::json& doc) {
    const auto& a = detail::params_arrays(doc, "rwkv");
    using detail::named_array;
    RWKVParams p{named_array(a, "mu_r"), named_array(a, "mu_k"), named_array(a, "mu_v"), named_array(a, "mu_g"),
                 named_array(a, "W_r"),  named_array(a, "W_k"),  named_array(a, "W_v"),  named_array(a, "W_g"),
                 named_array(a, "w"),    named_array(a, "u")};
    p.validate();
    return p;
}

inline nlohmann::json to_json(const SSMParams& p) {
    auto doc = detail::params_envelope("ssm");
    doc["arrays"]["A"] = array_to_json(p.a);
    doc["arrays"]["B"] = array_to_json(p.b);
    doc["arrays"]["C"] = array_to_json(p.c);
    doc["delta"] = p.delta;
    return doc;
}

inline SSMParams ssm_from_json(const nlohmann::json& doc) {
    const auto& a = detail::params_arrays(doc, "ssm");
    if (!doc.contains("delta") || !doc["delta"].is_number()) throw IoError("params: missing delta");
    SSMParams p{detail::named_array(a, "A"), detail::named_array(a, "B"), detail::named_array(a, "C"),
                doc["delta"].get<double>()};
    p.validate();
    return p;
}

} // namespace hyla
