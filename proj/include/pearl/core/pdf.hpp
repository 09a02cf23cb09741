#pragma once

#include "pearl/core/image.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pearl {

class PdfError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Minimal reader for scanned-document PDFs: walks the page tree and paints the
// largest image XObject of each page over its MediaBox. Supports DCTDecode and
// 8-bit FlateDecode images (DeviceGray / DeviceRGB), classic xref tables,
// cross-reference streams and object streams. Vector content is not drawn.
class PdfDocument {
public:
    static PdfDocument parse(std::vector<std::uint8_t> bytes);
    static PdfDocument open(const std::filesystem::path& path);

    PdfDocument(PdfDocument&&) noexcept;
    PdfDocument& operator=(PdfDocument&&) noexcept;
    ~PdfDocument();

    std::size_t page_count() const;
    // Page size in PDF points (1/72 inch).
    std::pair<double, double> page_size(std::size_t page) const;
    // Page rendered at `dpi`; pages without images render white.
    RasterImage render_page(std::size_t page, int dpi) const;

private:
    struct Impl;
    explicit PdfDocument(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

}  // namespace pearl
