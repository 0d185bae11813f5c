#include "bgreplace/remote.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>

#include <httplib.h>

namespace bgreplace {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

constexpr std::array<int, 256> make_decode_table() {
    std::array<int, 256> t{};
    for (int& v : t) v = -1;
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = i;
    return t;
}

constexpr auto kDecode = make_decode_table();

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += kAlphabet[(n >> 6) & 63];
        out += kAlphabet[n & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t n = bytes[i] << 16;
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += kAlphabet[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw_invalid("base64: length is not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        const bool last = i + 4 == text.size();
        int pad = 0;
        std::uint32_t n = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char ch = text[i + k];
            int v;
            if (ch == '=') {
                if (!last || k < 2) throw_invalid("base64: misplaced padding");
                ++pad;
                v = 0;
            } else {
                if (pad) throw_invalid("base64: data after padding");
                v = kDecode[static_cast<unsigned char>(ch)];
                if (v < 0) throw_invalid("base64: invalid character");
            }
            n = (n << 6) | static_cast<std::uint32_t>(v);
        }
        out.push_back(static_cast<std::uint8_t>(n >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
    }
    return out;
}

std::size_t WireTensor::element_count() const {
    if (shape.empty()) return 0;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string encode_f32(std::span<const float> values) {
    std::vector<std::uint8_t> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t v = to_le(std::bit_cast<std::uint32_t>(values[i]));
        std::memcpy(&bytes[i * 4], &v, 4);
    }
    return base64_encode(bytes);
}

std::vector<float> decode_f32(std::string_view b64) {
    const std::vector<std::uint8_t> bytes = base64_decode(b64);
    if (bytes.size() % 4 != 0) throw_invalid("f32 payload length is not a multiple of 4 bytes");
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t v;
        std::memcpy(&v, &bytes[i * 4], 4);
        out[i] = std::bit_cast<float>(to_le(v));
    }
    return out;
}

namespace {

WireTensor tensor_from_json(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("shape") || !body.contains("data_b64")) {
        throw_invalid("wire tensor needs 'shape' and 'data_b64'");
    }
    if (body.contains("dtype") && body["dtype"] != "f32") throw_invalid("wire tensor dtype must be f32");
    WireTensor t;
    const auto& shape = body["shape"];
    if (!shape.is_array() || shape.empty()) throw_invalid("wire tensor shape must be a non-empty array");
    for (const auto& d : shape) {
        if (!d.is_number_unsigned()) throw_invalid("wire tensor shape entries must be non-negative integers");
        t.shape.push_back(d.get<std::size_t>());
    }
    if (!body["data_b64"].is_string()) throw_invalid("wire tensor data_b64 must be a string");
    t.data = decode_f32(body["data_b64"].get<std::string>());
    if (t.data.size() != t.element_count()) {
        throw_invalid("wire tensor payload holds " + std::to_string(t.data.size()) + " values, shape needs " +
                      std::to_string(t.element_count()));
    }
    return t;
}

}  // namespace

nlohmann::json make_request(const std::string& op, const WireTensor& tensor, nlohmann::json params) {
    return {{"op", op}, {"shape", tensor.shape}, {"dtype", "f32"}, {"data_b64", encode_f32(tensor.data)},
            {"params", std::move(params)}};
}

WireTensor parse_request_tensor(const nlohmann::json& body) { return tensor_from_json(body); }

nlohmann::json make_response(const WireTensor& tensor) {
    return {{"shape", tensor.shape}, {"data_b64", encode_f32(tensor.data)}};
}

WireTensor parse_response(const nlohmann::json& body) {
    if (body.is_object() && body.contains("error")) {
        throw_backend("remote model error: " +
                      (body["error"].is_string() ? body["error"].get<std::string>() : body["error"].dump()));
    }
    try {
        return tensor_from_json(body);
    } catch (const Error& e) {
        throw_backend(std::string("malformed remote response: ") + e.what());
    }
}

WireTensor to_wire(const Array4<float>& a) {
    const Shape4& s = a.shape();
    return {{s.frames, s.height, s.width, s.channels}, a.vector()};
}

WireTensor to_wire(const Array4<double>& a) { return to_wire(a.cast<float>()); }

Array4<float> from_wire(const WireTensor& t) {
    if (t.shape.size() != 4) throw_backend("expected a 4-D tensor from the remote model");
    return Array4<float>(Shape4{t.shape[0], t.shape[1], t.shape[2], t.shape[3]}, t.data);
}

Array4<float> from_wire_slice(const WireTensor& t, std::size_t index) {
    if (t.shape.size() != 5 || index >= t.shape[0]) throw_backend("expected a stacked 5-D tensor from the remote model");
    const Shape4 s{t.shape[1], t.shape[2], t.shape[3], t.shape[4]};
    const auto begin = t.data.begin() + static_cast<std::ptrdiff_t>(index * s.size());
    return Array4<float>(s, std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(s.size())));
}

WireTensor stack(const std::vector<WireTensor>& parts) {
    if (parts.empty()) throw_invalid("stack: no tensors");
    WireTensor out;
    out.shape.push_back(parts.size());
    out.shape.insert(out.shape.end(), parts[0].shape.begin(), parts[0].shape.end());
    for (const WireTensor& p : parts) {
        if (p.shape != parts[0].shape) throw_invalid("stack: tensors differ in shape");
        out.data.insert(out.data.end(), p.data.begin(), p.data.end());
    }
    return out;
}

// ---------------------------------------------------------------------------

RemoteClient::RemoteClient(std::string url, double timeout_s) : m_url(std::move(url)), m_timeout(timeout_s) {
    const std::string scheme = "http://";
    if (m_url.rfind(scheme, 0) != 0) throw_config("remote backend url must start with http:// (got '" + m_url + "')");
    const std::size_t slash = m_url.find('/', scheme.size());
    m_host = m_url.substr(0, slash);
    if (slash != std::string::npos) m_prefix = m_url.substr(slash);
    while (!m_prefix.empty() && m_prefix.back() == '/') m_prefix.pop_back();
    if (m_host.size() == scheme.size()) throw_config("remote backend url has no host: '" + m_url + "'");
}

WireTensor RemoteClient::call(const std::string& endpoint, const WireTensor& tensor, const nlohmann::json& params) {
    httplib::Client cli(m_host);
    const auto secs = static_cast<time_t>(m_timeout);
    const auto usecs = static_cast<time_t>((m_timeout - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    const std::string op = endpoint.size() && endpoint[0] == '/' ? endpoint.substr(1) : endpoint;
    const std::string body = make_request(op, tensor, params).dump();
    auto res = cli.Post(m_prefix + "/" + op, body, "application/json");
    if (!res) throw_backend("remote " + m_url + "/" + op + ": " + httplib::to_string(res.error()));
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (res->status != 200) {
        std::string msg = "HTTP " + std::to_string(res->status);
        if (reply.is_object() && reply.contains("error") && reply["error"].is_string()) {
            msg += ": " + reply["error"].get<std::string>();
        }
        throw_backend("remote " + m_url + "/" + op + " failed with " + msg);
    }
    if (reply.is_discarded()) throw_backend("remote " + m_url + "/" + op + " returned invalid JSON");
    return parse_response(reply);
}

RemoteCodec::RemoteCodec(std::shared_ptr<RemoteClient> client, double sigma_min)
    : LatentCodec(sigma_min), m_client(std::move(client)) {}

Posterior RemoteCodec::encode_impl(const VideoClip& clip) {
    const WireTensor out = m_client->call("encode", to_wire(clip.pixels()));
    if (out.shape.size() != 5 || out.shape[0] != 2) throw_backend("/encode must return a [2, f, h, w, c] tensor");
    return {LatentTensor(from_wire_slice(out, 0).cast<double>()), LatentTensor(from_wire_slice(out, 1).cast<double>())};
}

VideoClip RemoteCodec::decode_impl(const LatentTensor& latent) {
    return VideoClip(from_wire(m_client->call("decode", to_wire(latent.data()))));
}

LatentTensor RemoteDenoiser::eps_impl(const LatentTensor& x_t, const Conditioning& c, int t) {
    const nlohmann::json params = {{"t", t}, {"prompt", c.prompt}, {"aux_b64", base64_encode(c.aux)}};
    return LatentTensor(from_wire(m_client->call("eps", to_wire(x_t.data()), params)).cast<double>());
}

VideoClip RemoteRelighter::relight_image_guided_impl(const VideoClip& fg, const VideoClip& bg) {
    return VideoClip(from_wire(m_client->call("relight_img", stack({to_wire(fg.pixels()), to_wire(bg.pixels())}))),
                     fg.fps());
}

VideoClip RemoteRelighter::relight_text_guided_denoise_impl(const VideoClip& noisy, const VideoClip& fg,
                                                            const std::string& prompt, int steps, bool cross_frame) {
    const nlohmann::json params = {{"prompt", prompt}, {"steps", steps}, {"cross_frame", cross_frame}};
    return VideoClip(
        from_wire(m_client->call("relight_txt", stack({to_wire(noisy.pixels()), to_wire(fg.pixels())}), params)),
        fg.fps());
}

VideoClip RemoteInpainter::fill_impl(const VideoClip& clip, const MaskClip& mask) {
    const Shape4& s = clip.shape();
    WireTensor t;
    t.shape = {s.frames, s.height, s.width, 4};
    t.data.resize(s.frames * s.height * s.width * 4);
    for (std::size_t p = 0; p < s.frames * s.height * s.width; ++p) {
        for (std::size_t c = 0; c < 3; ++c) t.data[p * 4 + c] = clip.pixels()[p * 3 + c];
        t.data[p * 4 + 3] = mask.values()[p];
    }
    return VideoClip(from_wire(m_client->call("inpaint", t)), clip.fps());
}

VideoClip RemoteBackground::generate_impl(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                                          const MaskClip* foreground) {
    const Shape4& s = input.shape();
    WireTensor t;
    if (!foreground) {
        t.shape = {s.frames + 1, s.height, s.width, s.channels};
        t.data = first_frame.pixels().vector();
        t.data.insert(t.data.end(), input.pixels().vector().begin(), input.pixels().vector().end());
    } else {
        // foreground mask rides along as an extra channel; zero on the leading frame
        t.shape = {s.frames + 1, s.height, s.width, s.channels + 1};
        t.data.reserve((s.frames + 1) * s.height * s.width * (s.channels + 1));
        const std::size_t plane = s.height * s.width;
        for (std::size_t p = 0; p < plane; ++p) {
            for (std::size_t c = 0; c < s.channels; ++c) t.data.push_back(first_frame.pixels()[p * s.channels + c]);
            t.data.push_back(0.0f);
        }
        for (std::size_t p = 0; p < s.frames * plane; ++p) {
            for (std::size_t c = 0; c < s.channels; ++c) t.data.push_back(input.pixels()[p * s.channels + c]);
            t.data.push_back(foreground->values()[p]);
        }
    }
    return VideoClip(from_wire(m_client->call("background", t, {{"seed", seed}})), input.fps());
}

}  // namespace bgreplace
