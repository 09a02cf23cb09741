#include "pearl/core/image.hpp"

#include <jpeglib.h>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>

namespace pearl {
namespace {

struct StrictErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void on_error(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<StrictErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

// libjpeg reports a truncated stream as a warning and fills the rest with grey.
void on_warning(j_common_ptr cinfo, int level) {
    if (level < 0) on_error(cinfo);
}

void silence(j_common_ptr) {}

class Decompressor {
public:
    explicit Decompressor(std::span<const std::uint8_t> data) {
        if (data.size() < 4) throw ImageError("not a JPEG stream: too short");
        info_.err = jpeg_std_error(&err_.base);
        err_.base.error_exit = on_error;
        err_.base.emit_message = on_warning;
        err_.base.output_message = silence;
        err_.message[0] = '\0';
        jpeg_create_decompress(&info_);
        jpeg_mem_src(&info_, data.data(), static_cast<unsigned long>(data.size()));
    }
    ~Decompressor() { jpeg_destroy_decompress(&info_); }
    Decompressor(const Decompressor&) = delete;
    Decompressor& operator=(const Decompressor&) = delete;

    jpeg_decompress_struct& info() { return info_; }
    StrictErrorManager& err() { return err_; }

private:
    jpeg_decompress_struct info_{};
    StrictErrorManager err_{};
};

}  // namespace

RasterImage decode_jpeg(std::span<const std::uint8_t> jpeg) {
    Decompressor d(jpeg);
    auto& info = d.info();
    RasterImage out;
    if (setjmp(d.err().jump)) {
        throw ImageError(std::string("JPEG decode failed: ") + d.err().message);
    }
    jpeg_read_header(&info, TRUE);
    info.out_color_space = info.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&info);
    out.width = static_cast<int>(info.output_width);
    out.height = static_cast<int>(info.output_height);
    out.channels = info.output_components;
    if (out.width <= 0 || out.height <= 0) throw ImageError("JPEG has zero dimension");
    const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
    out.pixels.resize(stride * out.height);
    while (info.output_scanline < info.output_height) {
        JSAMPROW row = out.pixels.data() + stride * info.output_scanline;
        jpeg_read_scanlines(&info, &row, 1);
    }
    jpeg_finish_decompress(&info);
    return out;
}

Dimensions probe_jpeg(std::span<const std::uint8_t> jpeg) {
    // A full decode is the only reliable way to reject truncated files.
    RasterImage img = decode_jpeg(jpeg);
    return {img.width, img.height};
}

std::vector<std::uint8_t> encode_jpeg(const RasterImage& image, int quality) {
    if (image.width <= 0 || image.height <= 0) throw ImageError("cannot encode zero-dimension image");
    if (image.channels != 1 && image.channels != 3) throw ImageError("unsupported channel count");
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    if (image.pixels.size() != stride * image.height) throw ImageError("pixel buffer size mismatch");

    jpeg_compress_struct info{};
    StrictErrorManager err{};
    info.err = jpeg_std_error(&err.base);
    err.base.error_exit = on_error;
    err.base.output_message = silence;
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    jpeg_create_compress(&info);
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&info);
        std::free(buffer);
        throw ImageError(std::string("JPEG encode failed: ") + err.message);
    }
    jpeg_mem_dest(&info, &buffer, &size);
    info.image_width = static_cast<JDIMENSION>(image.width);
    info.image_height = static_cast<JDIMENSION>(image.height);
    info.input_components = image.channels;
    info.in_color_space = image.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&info);
    jpeg_set_quality(&info, quality, TRUE);
    jpeg_start_compress(&info, TRUE);
    while (info.next_scanline < info.image_height) {
        auto* row = const_cast<JSAMPLE*>(image.pixels.data() + stride * info.next_scanline);
        jpeg_write_scanlines(&info, &row, 1);
    }
    jpeg_finish_compress(&info);
    std::vector<std::uint8_t> out(buffer, buffer + size);
    jpeg_destroy_compress(&info);
    std::free(buffer);
    return out;
}

Dimensions fitted_dimensions(Dimensions in, int max_side) {
    if (in.width <= 0 || in.height <= 0) throw ImageError("image has zero dimension");
    const long long longest = std::max(in.width, in.height);
    if (longest <= max_side) return in;
    // round-half-up(side * max / longest) in exact integer arithmetic
    auto scale = [&](long long side) {
        long long v = (2 * side * max_side + longest) / (2 * longest);
        return static_cast<int>(std::max(1LL, v));
    };
    if (in.width >= in.height) return {max_side, scale(in.height)};
    return {scale(in.width), max_side};
}

RasterImage resize_area(const RasterImage& image, Dimensions target) {
    const int type = image.channels == 1 ? CV_8UC1 : CV_8UC3;
    cv::Mat src(image.height, image.width, type, const_cast<std::uint8_t*>(image.pixels.data()));
    cv::Mat dst;
    const int interp = (target.width < image.width || target.height < image.height) ? cv::INTER_AREA
                                                                                   : cv::INTER_CUBIC;
    cv::resize(src, dst, cv::Size(target.width, target.height), 0, 0, interp);
    RasterImage out;
    out.width = target.width;
    out.height = target.height;
    out.channels = image.channels;
    out.pixels.assign(dst.datastart, dst.dataend);
    return out;
}

ImageAsset make_asset(const RasterImage& image, std::filesystem::path source) {
    ImageAsset asset;
    asset.source_path = std::move(source);
    asset.width = image.width;
    asset.height = image.height;
    asset.bytes = std::make_shared<const std::vector<std::uint8_t>>(encode_jpeg(image));
    return asset;
}

ImageAsset prepare_image(const ImageAsset& image) {
    if (image.width <= 0 || image.height <= 0) throw ImageError("image has zero dimension");
    const Dimensions target = fitted_dimensions({image.width, image.height});
    if (target == Dimensions{image.width, image.height}) return image;
    RasterImage raster = decode_jpeg(image.data());
    return make_asset(resize_area(raster, target), image.source_path);
}

RasterImage fit_raster(RasterImage image) {
    const Dimensions target = fitted_dimensions({image.width, image.height});
    if (target == Dimensions{image.width, image.height}) return image;
    return resize_area(image, target);
}

ImageAsset load_image_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const Dimensions dims = probe_jpeg(bytes);
    ImageAsset asset;
    asset.source_path = path;
    asset.width = dims.width;
    asset.height = dims.height;
    asset.bytes = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
    return asset;
}

}  // namespace pearl
