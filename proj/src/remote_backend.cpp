/*
 * Copyright (C) 2026 The Relitex Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <relitex/guidance.hpp>

#include <relitex/error.hpp>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <bit>

namespace relitex {

using nlohmann::json;

std::string base64_encode(std::span<const uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
            int(bytes.size()));
    out.resize(size_t(written));
    return out;
}

std::vector<uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw BackendError(BackendErrorKind::Schema, "base64 payload length is not a multiple of 4");
    }
    std::vector<uint8_t> out(3 * (text.size() / 4));
    const int written = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
            int(text.size()));
    if (written < 0) {
        throw BackendError(BackendErrorKind::Schema, "invalid base64 payload");
    }
    size_t padding = 0;
    if (!text.empty() && text.back() == '=') {
        padding = (text.size() >= 2 && text[text.size() - 2] == '=') ? 2 : 1;
    }
    out.resize(size_t(written) - padding);
    return out;
}

namespace {

json png_field(const Image& image) {
    return {{"format", "png"}, {"data", base64_encode(encode_png(image, 8))}};
}

json array_field(const Image& image) {
    std::vector<uint8_t> bytes;
    bytes.reserve(image.pixels.size() * 4);
    for (float v : image.pixels) {
        const uint32_t bits = std::bit_cast<uint32_t>(v);
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(uint8_t(bits >> (8 * i)));
        }
    }
    return {{"shape", {image.height, image.width, image.channels}}, {"dtype", "float32"},
            {"data", base64_encode(bytes)}};
}

[[noreturn]] void schema_error(const std::string& message) {
    throw BackendError(BackendErrorKind::Schema, message);
}

const json& member(const json& object, const char* key) {
    if (!object.is_object() || !object.contains(key)) {
        schema_error(std::string("missing field '") + key + "'");
    }
    return object.at(key);
}

std::string string_member(const json& object, const char* key) {
    const json& v = member(object, key);
    if (!v.is_string()) {
        schema_error(std::string("field '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

double number_member(const json& object, const char* key) {
    const json& v = member(object, key);
    if (!v.is_number()) {
        schema_error(std::string("field '") + key + "' must be a number");
    }
    return v.get<double>();
}

Image parse_png_field(const json& field) {
    if (string_member(field, "format") != "png") {
        schema_error("image payloads must be PNG");
    }
    const std::vector<uint8_t> bytes = base64_decode(string_member(field, "data"));
    Image decoded;
    try {
        decoded = decode_png(bytes);
    } catch (const ImageError& e) {
        schema_error(std::string("undecodable PNG payload: ") + e.what());
    }
    if (decoded.channels < 3) {
        schema_error("image payload must be RGB");
    }
    if (decoded.channels == 3) {
        return decoded;
    }
    Image rgb(decoded.width, decoded.height, 3);
    for (size_t i = 0; i < rgb.pixel_count(); ++i) {
        std::copy_n(decoded.pixel(i), 3, rgb.pixel(i));
    }
    return rgb;
}

Image parse_array_field(const json& field) {
    if (string_member(field, "dtype") != "float32") {
        schema_error("arrays must have dtype float32");
    }
    const json& shape = member(field, "shape");
    if (!shape.is_array() || shape.size() != 3) {
        schema_error("array shape must be [height, width, channels]");
    }
    for (const json& d : shape) {
        if (!d.is_number_integer() || d.get<int64_t>() <= 0 || d.get<int64_t>() > (1 << 16)) {
            schema_error("array dimensions must be positive integers");
        }
    }
    const int h = shape[0].get<int>();
    const int w = shape[1].get<int>();
    const int c = shape[2].get<int>();
    const std::vector<uint8_t> bytes = base64_decode(string_member(field, "data"));
    Image image(w, h, c);
    if (bytes.size() != image.pixels.size() * 4) {
        schema_error("array payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                std::to_string(image.pixels.size() * 4));
    }
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) {
            bits |= uint32_t(bytes[i * 4 + size_t(k)]) << (8 * k);
        }
        image.pixels[i] = std::bit_cast<float>(bits);
    }
    return image;
}

json parse_json(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) {
        schema_error("body is not valid JSON");
    }
    if (!j.is_object()) {
        schema_error("body must be a JSON object");
    }
    return j;
}

} // namespace

std::string serialize_request(const GuidanceRequest& request) {
    json j = {
            {"mode", to_string(request.mode)},
            {"prompt", request.prompt},
            {"negative_prompt", request.negative_prompt},
            {"cond_image", png_field(request.cond_image)},
            {"strength", request.strength},
            {"cfg_scale", request.cfg_scale},
            {"seed", request.seed},
    };
    if (request.mode == GuidanceMode::Score) {
        j["noisy_image"] = array_field(request.noisy_image);
        j["t"] = request.t;
    }
    return j.dump();
}

GuidanceRequest parse_request(std::string_view body) {
    const json j = parse_json(body);
    GuidanceRequest request;
    const std::string mode = string_member(j, "mode");
    if (mode == "generate") {
        request.mode = GuidanceMode::Generate;
    } else if (mode == "score") {
        request.mode = GuidanceMode::Score;
    } else {
        schema_error("unknown mode '" + mode + "'");
    }
    request.prompt = string_member(j, "prompt");
    request.negative_prompt = j.contains("negative_prompt") ? string_member(j, "negative_prompt") : "";
    request.cond_image = parse_png_field(member(j, "cond_image"));
    request.strength = number_member(j, "strength");
    request.cfg_scale = number_member(j, "cfg_scale");
    const json& seed = member(j, "seed");
    if (!seed.is_number_integer()) {
        schema_error("field 'seed' must be an integer");
    }
    request.seed = seed.get<uint64_t>();
    if (request.mode == GuidanceMode::Score) {
        request.noisy_image = parse_array_field(member(j, "noisy_image"));
        request.t = number_member(j, "t");
    }
    return request;
}

std::string serialize_response(const GuidanceResponse& response, GuidanceMode mode) {
    json j;
    if (mode == GuidanceMode::Generate) {
        j["image"] = png_field(response.image);
    } else {
        j["noise"] = array_field(response.image);
    }
    return j.dump();
}

GuidanceResponse parse_response(std::string_view body, const GuidanceRequest& request) {
    const json j = parse_json(body);
    GuidanceResponse response;
    if (request.mode == GuidanceMode::Generate) {
        response.image = parse_png_field(member(j, "image"));
        if (response.image.width != request.cond_image.width ||
                response.image.height != request.cond_image.height) {
            schema_error("generated image is " + std::to_string(response.image.width) + "x" +
                    std::to_string(response.image.height) + ", expected " +
                    std::to_string(request.cond_image.width) + "x" +
                    std::to_string(request.cond_image.height));
        }
    } else {
        response.image = parse_array_field(member(j, "noise"));
        if (!response.image.same_shape(request.noisy_image)) {
            schema_error("predicted noise shape does not match the noisy image");
        }
    }
    for (float v : response.image.pixels) {
        if (!std::isfinite(v)) {
            schema_error("response contains non-finite values");
        }
    }
    return response;
}

struct RemoteBackend::Impl {
    std::string origin;   // scheme://host:port
    std::string prefix;   // path prefix without a trailing slash
    std::chrono::milliseconds timeout;
};

RemoteBackend::RemoteBackend(std::string url, std::chrono::milliseconds timeout)
        : mUrl(std::move(url)), mImpl(std::make_unique<Impl>()) {
    const std::string_view scheme = "http://";
    if (mUrl.rfind(scheme, 0) != 0) {
        throw ConfigError("backend URL must start with http://, got '" + mUrl + "'");
    }
    const size_t slash = mUrl.find('/', scheme.size());
    mImpl->origin = mUrl.substr(0, slash);
    mImpl->prefix = slash == std::string::npos ? "" : mUrl.substr(slash);
    while (!mImpl->prefix.empty() && mImpl->prefix.back() == '/') {
        mImpl->prefix.pop_back();
    }
    if (mImpl->origin.size() <= scheme.size()) {
        throw ConfigError("backend URL has no host: '" + mUrl + "'");
    }
    mImpl->timeout = timeout;
}

RemoteBackend::~RemoteBackend() = default;

GuidanceResponse RemoteBackend::request(const GuidanceRequest& request) {
    request.validate();
    httplib::Client client(mImpl->origin);
    client.set_connection_timeout(mImpl->timeout);
    client.set_read_timeout(mImpl->timeout);
    client.set_write_timeout(mImpl->timeout);
    const std::string path = mImpl->prefix + "/v1/" + to_string(request.mode);
    const httplib::Result result = client.Post(path, serialize_request(request), "application/json");
    if (!result) {
        const httplib::Error error = result.error();
        const std::string detail = mUrl + path.substr(mImpl->prefix.size()) + ": " + httplib::to_string(error);
        switch (error) {
        case httplib::Error::Connection:
            throw BackendError(BackendErrorKind::ConnectionRefused, detail);
        case httplib::Error::ConnectionTimeout:
        case httplib::Error::Read:
        case httplib::Error::Write:
            throw BackendError(BackendErrorKind::Timeout, detail);
        default:
            throw BackendError(BackendErrorKind::Unreachable, detail);
        }
    }
    if (result->status != 200) {
        std::string message = result->body.substr(0, 200);
        const json j = json::parse(result->body, nullptr, false);
        if (j.is_object() && j.contains("code") && j.contains("message")) {
            message = j["code"].dump() + ": " + (j["message"].is_string()
                                                                ? j["message"].get<std::string>()
                                                                : j["message"].dump());
        }
        throw BackendError(BackendErrorKind::Server,
                "HTTP " + std::to_string(result->status) + " from " + path + ": " + message);
    }
    return parse_response(result->body, request);
}

} // namespace relitex
