#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pearl {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Longest side allowed for any stored page image.
inline constexpr int kMaxImageSide = 2048;

struct Dimensions {
    int width = 0;
    int height = 0;
    bool operator==(const Dimensions&) const = default;
};

// Decoded 8-bit pixels, row-major, `channels` interleaved (1 = gray, 3 = RGB).
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;
};

// An encoded page image. The payload is shared so project snapshots stay cheap.
struct ImageAsset {
    std::filesystem::path source_path;
    int width = 0;
    int height = 0;
    std::string media_type = "image/jpeg";
    std::shared_ptr<const std::vector<std::uint8_t>> bytes;

    std::span<const std::uint8_t> data() const {
        return bytes ? std::span<const std::uint8_t>(*bytes) : std::span<const std::uint8_t>();
    }
};

// Strict JPEG decode: truncated or corrupt streams are rejected, not padded.
RasterImage decode_jpeg(std::span<const std::uint8_t> jpeg);
std::vector<std::uint8_t> encode_jpeg(const RasterImage& image, int quality = 92);

// Reads just the frame header. Throws ImageError if the data is not a complete JPEG.
Dimensions probe_jpeg(std::span<const std::uint8_t> jpeg);

// Size after the max-side rule: longest side clamped to `max_side`, the other
// scaled with round-half-up and a floor of 1. Never upscales.
Dimensions fitted_dimensions(Dimensions in, int max_side = kMaxImageSide);

RasterImage resize_area(const RasterImage& image, Dimensions target);

// Downscale an asset so that no side exceeds kMaxImageSide. Assets already
// within bounds are returned unchanged (same payload).
ImageAsset prepare_image(const ImageAsset& image);

// Same rule applied to an already-decoded raster (used for rendered PDF pages).
RasterImage fit_raster(RasterImage image);

ImageAsset load_image_file(const std::filesystem::path& path);
ImageAsset make_asset(const RasterImage& image, std::filesystem::path source = {});

}  // namespace pearl
