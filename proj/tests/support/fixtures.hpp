#pragma once

#include "pearl/core/image.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace pearl::testing {

// Gradient test card so resized output is not trivially uniform.
inline RasterImage test_raster(int width, int height, int channels = 3, std::uint8_t tint = 0) {
    RasterImage img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.resize(static_cast<std::size_t>(width) * height * channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.pixels[(static_cast<std::size_t>(y) * width + x) * channels + c] =
                    static_cast<std::uint8_t>((x * 7 + y * 3 + c * 50 + tint) & 0xFF);
            }
        }
    }
    return img;
}

inline std::vector<std::uint8_t> test_jpeg(int width, int height, std::uint8_t tint = 0) {
    return encode_jpeg(test_raster(width, height, 3, tint), 85);
}

inline ImageAsset test_asset(int width = 64, int height = 48) {
    return make_asset(test_raster(width, height), "fixture.jpg");
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

struct PdfPageSpec {
    double width_pt = 612;
    double height_pt = 792;
    std::vector<std::uint8_t> jpeg;  // empty: page without an image
    int image_width = 0;
    int image_height = 0;
};

// Minimal but well-formed PDF: one DCT image per page drawn over the MediaBox,
// with a correct xref table.
inline std::vector<std::uint8_t> build_pdf(const std::vector<PdfPageSpec>& pages) {
    std::string out = "%PDF-1.4\n%\xE2\xE3\xCF\xD3\n";
    std::vector<std::size_t> offsets;
    auto begin_obj = [&](int id) {
        if (static_cast<std::size_t>(id) >= offsets.size()) offsets.resize(id + 1);
        offsets[id] = out.size();
        out += std::to_string(id) + " 0 obj\n";
    };
    const int n = static_cast<int>(pages.size());
    // 1 catalog, 2 pages, then per page: page, content, image.
    std::string kids;
    for (int i = 0; i < n; ++i) kids += std::to_string(3 + 3 * i) + " 0 R ";
    begin_obj(1);
    out += "<< /Type /Catalog /Pages 2 0 R >>\nendobj\n";
    begin_obj(2);
    out += "<< /Type /Pages /Kids [" + kids + "] /Count " + std::to_string(n) + " >>\nendobj\n";
    for (int i = 0; i < n; ++i) {
        const auto& p = pages[i];
        const int page_id = 3 + 3 * i, content_id = page_id + 1, image_id = page_id + 2;
        const std::string w = std::to_string(p.width_pt), h = std::to_string(p.height_pt);
        begin_obj(page_id);
        out += "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + w + " " + h + "] /Contents " +
               std::to_string(content_id) + " 0 R";
        if (!p.jpeg.empty()) out += " /Resources << /XObject << /Im0 " + std::to_string(image_id) + " 0 R >> >>";
        out += " >>\nendobj\n";
        const std::string content = p.jpeg.empty() ? "" : "q " + w + " 0 0 " + h + " 0 0 cm /Im0 Do Q";
        begin_obj(content_id);
        out += "<< /Length " + std::to_string(content.size()) + " >>\nstream\n" + content + "\nendstream\nendobj\n";
        begin_obj(image_id);
        if (p.jpeg.empty()) {
            out += "null\nendobj\n";
        } else {
            out += "<< /Type /XObject /Subtype /Image /Width " + std::to_string(p.image_width) + " /Height " +
                   std::to_string(p.image_height) + " /ColorSpace /DeviceRGB /BitsPerComponent 8 /Filter /DCTDecode /Length " +
                   std::to_string(p.jpeg.size()) + " >>\nstream\n";
            out.append(reinterpret_cast<const char*>(p.jpeg.data()), p.jpeg.size());
            out += "\nendstream\nendobj\n";
        }
    }
    const std::size_t xref = out.size();
    const int count = n == 0 ? 3 : 3 + 3 * n;
    offsets.resize(count);
    out += "xref\n0 " + std::to_string(count) + "\n0000000000 65535 f \n";
    char line[32];
    for (int id = 1; id < count; ++id) {
        std::snprintf(line, sizeof line, "%010zu 00000 n \n", offsets[id]);
        out += line;
    }
    out += "trailer\n<< /Size " + std::to_string(count) + " /Root 1 0 R >>\nstartxref\n" + std::to_string(xref) +
           "\n%%EOF\n";
    return {out.begin(), out.end()};
}

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("pearl_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace pearl::testing
