#include "bgreplace/clip_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace bgreplace {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kRawMagic = {'R', 'P', 'A', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw_io("short write to " + path.string());
}

FrameFile decode_raw32(const std::vector<unsigned char>& bytes, const fs::path& path) {
    if (bytes.size() < 16) throw_io(path.string() + ": truncated raw32 header");
    const std::uint32_t h = get_u32(bytes.data() + 4);
    const std::uint32_t w = get_u32(bytes.data() + 8);
    const std::uint32_t c = get_u32(bytes.data() + 12);
    const std::size_t n = static_cast<std::size_t>(h) * w * c;
    if (bytes.size() != 16 + 4 * n) {
        throw_io(path.string() + ": raw32 payload length does not match header " + std::to_string(h) + "x" +
                 std::to_string(w) + "x" + std::to_string(c));
    }
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
    return {Array4<float>({1, h, w, c}, std::move(values)), PixelFormat::kRaw32};
}

FrameFile decode_png(const fs::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw_io(path.string() + ": unsupported pixel format (" + image.message + ")");
    }
    const bool wide = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    image.format = wide ? PNG_FORMAT_LINEAR_RGB : PNG_FORMAT_RGB;
    const std::size_t h = image.height;
    const std::size_t w = image.width;
    std::vector<float> values(h * w * 3);
    if (wide) {
        std::vector<png_uint_16> buf(PNG_IMAGE_SIZE(image) / sizeof(png_uint_16));
        if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
            throw_io(path.string() + ": " + image.message);
        }
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(buf[i] / 65535.0);
    } else {
        std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
        if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
            throw_io(path.string() + ": " + image.message);
        }
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(buf[i] / 255.0);
    }
    png_image_free(&image);
    return {Array4<float>({1, h, w, 3}, std::move(values)), wide ? PixelFormat::kRaster16 : PixelFormat::kRaster8};
}

void encode_png(const fs::path& path, std::span<const float> values, std::size_t h, std::size_t w, std::size_t c,
                PixelFormat format) {
    if (c != 1 && c != 3) throw_io(path.string() + ": raster frames need 1 or 3 channels");
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    int ok = 0;
    if (format == PixelFormat::kRaster16) {
        image.format = c == 3 ? PNG_FORMAT_LINEAR_RGB : PNG_FORMAT_LINEAR_Y;
        std::vector<png_uint_16> buf(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<png_uint_16>(quantize(values[i], 65535));
        ok = png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr);
    } else {
        image.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
        std::vector<png_byte> buf(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<png_byte>(quantize(values[i], 255));
        ok = png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr);
    }
    if (!ok) throw_io(path.string() + ": " + image.message);
}

std::string frame_name(std::size_t i, PixelFormat format) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04zu.%s", i, format == PixelFormat::kRaw32 ? "r32" : "png");
    return buf;
}

// Loads all manifest frames; returns arrays with the stored channel count.
std::vector<Array4<float>> load_frames(const fs::path& manifest_path, ClipManifest& manifest) {
    manifest = read_manifest(manifest_path);
    const fs::path dir = manifest_path.parent_path();
    std::vector<Array4<float>> frames;
    frames.reserve(manifest.frames.size());
    for (const auto& name : manifest.frames) {
        const fs::path file = dir / name;
        FrameFile ff = read_frame_file(file);
        if (ff.format != manifest.format) {
            throw_io(file.string() + ": unsupported pixel format " + to_string(ff.format) + " in a " +
                     to_string(manifest.format) + " manifest");
        }
        const Shape4& s = ff.values.shape();
        if (s.height != manifest.height || s.width != manifest.width) {
            throw_io(file.string() + ": dimension mismatch, frame is " + std::to_string(s.height) + "x" +
                     std::to_string(s.width) + " but manifest declares " + std::to_string(manifest.height) + "x" +
                     std::to_string(manifest.width));
        }
        frames.push_back(std::move(ff.values));
    }
    if (frames.empty()) throw_io(manifest_path.string() + ": manifest lists no frames");
    return frames;
}

}  // namespace

std::string to_string(PixelFormat format) {
    switch (format) {
        case PixelFormat::kRaster8: return "raster8";
        case PixelFormat::kRaster16: return "raster16";
        case PixelFormat::kRaw32: return "raw32";
    }
    return "unknown";
}

PixelFormat parse_pixel_format(const std::string& tag) {
    if (tag == "raster8") return PixelFormat::kRaster8;
    if (tag == "raster16") return PixelFormat::kRaster16;
    if (tag == "raw32") return PixelFormat::kRaw32;
    throw_io("unsupported pixel format tag '" + tag + "'");
}

unsigned quantize(float value, unsigned max_code) {
    const double v = std::clamp(static_cast<double>(value), 0.0, 1.0);
    return static_cast<unsigned>(std::lround(v * max_code));
}

ClipManifest read_manifest(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw_io("cannot open manifest " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
        ClipManifest m;
        m.frames = j.at("frames").get<std::vector<std::string>>();
        m.width = j.at("width").get<std::size_t>();
        m.height = j.at("height").get<std::size_t>();
        m.count = j.at("count").get<std::size_t>();
        m.fps = j.at("fps").get<double>();
        m.format = parse_pixel_format(j.at("format").get<std::string>());
        if (m.count != m.frames.size()) {
            throw_io(manifest_path.string() + ": count " + std::to_string(m.count) + " but " +
                     std::to_string(m.frames.size()) + " frames listed");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw_io(manifest_path.string() + ": malformed manifest: " + e.what());
    }
}

void write_manifest(const ClipManifest& m, const fs::path& manifest_path) {
    nlohmann::json j = {{"frames", m.frames}, {"width", m.width},   {"height", m.height},
                        {"count", m.count},   {"fps", m.fps},       {"format", to_string(m.format)}};
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw_io("cannot write manifest " + manifest_path.string());
    out << j.dump(2) << "\n";
}

FrameFile read_frame_file(const fs::path& path) {
    if (!fs::exists(path)) throw_io("missing frame file " + path.string());
    std::vector<unsigned char> bytes = read_bytes(path);
    if (bytes.size() >= 4 && std::equal(kRawMagic.begin(), kRawMagic.end(), bytes.begin())) {
        return decode_raw32(bytes, path);
    }
    static constexpr unsigned char kPngMagic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
        return decode_png(path);
    }
    throw_io(path.string() + ": unsupported pixel format (neither PNG nor raw32)");
}

void write_frame_file(const fs::path& path, std::span<const float> values, std::size_t h, std::size_t w,
                      std::size_t c, PixelFormat format) {
    if (values.size() != h * w * c) throw_invalid("write_frame_file: value count does not match dimensions");
    if (format != PixelFormat::kRaw32) {
        encode_png(path, values, h, w, c, format);
        return;
    }
    std::vector<unsigned char> bytes(kRawMagic.begin(), kRawMagic.end());
    bytes.reserve(16 + 4 * values.size());
    put_u32(bytes, static_cast<std::uint32_t>(h));
    put_u32(bytes, static_cast<std::uint32_t>(w));
    put_u32(bytes, static_cast<std::uint32_t>(c));
    for (float v : values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
    write_bytes(path, bytes);
}

VideoClip load_clip(const fs::path& manifest_path) {
    ClipManifest manifest;
    std::vector<Array4<float>> frames = load_frames(manifest_path, manifest);
    const std::size_t h = manifest.height;
    const std::size_t w = manifest.width;
    std::vector<float> data;
    data.reserve(frames.size() * h * w * 3);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Array4<float>& fr = frames[i];
        const std::size_t c = fr.shape().channels;
        if (c != 1 && c != 3) {
            throw_io((manifest_path.parent_path() / manifest.frames[i]).string() + ": unsupported pixel format with " +
                     std::to_string(c) + " channels");
        }
        for (std::size_t p = 0; p < h * w; ++p)
            for (std::size_t k = 0; k < 3; ++k) data.push_back(fr[p * c + (c == 1 ? 0 : k)]);
    }
    return VideoClip(Array4<float>({frames.size(), h, w, 3}, std::move(data)), manifest.fps);
}

MaskClip load_mask(const fs::path& manifest_path) {
    ClipManifest manifest;
    std::vector<Array4<float>> frames = load_frames(manifest_path, manifest);
    const std::size_t h = manifest.height;
    const std::size_t w = manifest.width;
    std::vector<float> data;
    data.reserve(frames.size() * h * w);
    for (const auto& fr : frames) {
        const std::size_t c = fr.shape().channels;
        for (std::size_t p = 0; p < h * w; ++p) {
            double acc = 0.0;
            for (std::size_t k = 0; k < c; ++k) acc += fr[p * c + k];
            data.push_back(static_cast<float>(acc / static_cast<double>(c)));
        }
    }
    return MaskClip(Array4<float>({frames.size(), h, w, 1}, std::move(data)));
}

namespace {

ClipManifest save_frames(const Array4<float>& values, const fs::path& out_dir, PixelFormat format, double fps) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw_io("cannot create " + out_dir.string() + ": " + ec.message());
    const Shape4& s = values.shape();
    ClipManifest m;
    m.width = s.width;
    m.height = s.height;
    m.count = s.frames;
    m.fps = fps;
    m.format = format;
    for (std::size_t f = 0; f < s.frames; ++f) {
        m.frames.push_back(frame_name(f, format));
        write_frame_file(out_dir / m.frames.back(), values.frame(f), s.height, s.width, s.channels, format);
    }
    write_manifest(m, out_dir / "manifest.json");
    return m;
}

}  // namespace

ClipManifest save_clip(const VideoClip& clip, const fs::path& out_dir, PixelFormat format) {
    return save_frames(clip.pixels(), out_dir, format, clip.fps());
}

ClipManifest save_mask(const MaskClip& mask, const fs::path& out_dir, PixelFormat format, double fps) {
    return save_frames(mask.values(), out_dir, format, fps);
}

VideoClip load_image(const fs::path& path) {
    FrameFile ff = read_frame_file(path);
    const Shape4& s = ff.values.shape();
    if (s.channels == 3) return VideoClip(std::move(ff.values));
    if (s.channels != 1) throw_io(path.string() + ": unsupported pixel format with " + std::to_string(s.channels) + " channels");
    std::vector<float> data;
    data.reserve(s.height * s.width * 3);
    for (float v : ff.values.data())
        for (int k = 0; k < 3; ++k) data.push_back(v);
    return VideoClip(Array4<float>({1, s.height, s.width, 3}, std::move(data)));
}

}  // namespace bgreplace
