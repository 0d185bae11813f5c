#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bgreplace/backends.hpp"

namespace bgreplace {

// ---------------------------------------------------------------------------
// Wire format
//
// Request:  {"op", "shape", "dtype": "f32", "data_b64", "params"}
// Response: {"shape", "data_b64"} or {"error"}
// Tensors are row-major little-endian float32, base64 encoded (RFC 4648, padded).

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws Error(kInvalidArgument) on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct WireTensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    std::size_t element_count() const;
};

std::string encode_f32(std::span<const float> values);
std::vector<float> decode_f32(std::string_view b64);

nlohmann::json make_request(const std::string& op, const WireTensor& tensor, nlohmann::json params = nlohmann::json::object());
/// Validates dtype, shape and payload length.
WireTensor parse_request_tensor(const nlohmann::json& body);
nlohmann::json make_response(const WireTensor& tensor);
/// Throws Error(kBackend) for {"error": ...} bodies or malformed payloads.
WireTensor parse_response(const nlohmann::json& body);

WireTensor to_wire(const Array4<float>& a);
WireTensor to_wire(const Array4<double>& a);
/// Interprets a 4-D wire tensor, or the slice `index` of a 5-D one.
Array4<float> from_wire(const WireTensor& t);
Array4<float> from_wire_slice(const WireTensor& t, std::size_t index);
/// Stacks equally shaped tensors along a new leading axis.
WireTensor stack(const std::vector<WireTensor>& parts);

// ---------------------------------------------------------------------------
// Client

class RemoteClient {
public:
    /// `url` is "http://host:port" with an optional path prefix.
    explicit RemoteClient(std::string url, double timeout_s = 300.0);

    WireTensor call(const std::string& endpoint, const WireTensor& tensor,
                    const nlohmann::json& params = nlohmann::json::object());

    const std::string& url() const { return m_url; }

private:
    std::string m_url;
    std::string m_host;
    std::string m_prefix;
    double m_timeout;
};

class RemoteCodec final : public LatentCodec {
public:
    RemoteCodec(std::shared_ptr<RemoteClient> client, double sigma_min = kDefaultSigmaMin);

protected:
    Posterior encode_impl(const VideoClip& clip) override;
    VideoClip decode_impl(const LatentTensor& latent) override;

private:
    std::shared_ptr<RemoteClient> m_client;
};

class RemoteDenoiser final : public Denoiser {
public:
    explicit RemoteDenoiser(std::shared_ptr<RemoteClient> client) : m_client(std::move(client)) {}

protected:
    LatentTensor eps_impl(const LatentTensor& x_t, const Conditioning& c, int t) override;

private:
    std::shared_ptr<RemoteClient> m_client;
};

class RemoteRelighter final : public Relighter {
public:
    explicit RemoteRelighter(std::shared_ptr<RemoteClient> client) : m_client(std::move(client)) {}

protected:
    VideoClip relight_image_guided_impl(const VideoClip& fg, const VideoClip& bg) override;
    VideoClip relight_text_guided_denoise_impl(const VideoClip& noisy, const VideoClip& fg, const std::string& prompt,
                                               int steps, bool cross_frame) override;

private:
    std::shared_ptr<RemoteClient> m_client;
};

class RemoteInpainter final : public Inpainter {
public:
    explicit RemoteInpainter(std::shared_ptr<RemoteClient> client) : m_client(std::move(client)) {}

protected:
    VideoClip fill_impl(const VideoClip& clip, const MaskClip& mask) override;

private:
    std::shared_ptr<RemoteClient> m_client;
};

class RemoteBackground final : public BackgroundProvider {
public:
    explicit RemoteBackground(std::shared_ptr<RemoteClient> client) : m_client(std::move(client)) {}

protected:
    VideoClip generate_impl(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                            const MaskClip* foreground) override;

private:
    std::shared_ptr<RemoteClient> m_client;
};

}  // namespace bgreplace
