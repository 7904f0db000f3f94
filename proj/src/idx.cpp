#include "cfl/model.hpp"

#include <fstream>
#include <iterator>

namespace cfl {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    if (bytes.size() < offset + 4) throw IdxError("idx: truncated header");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IdxError("idx: cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
    const auto magic = read_be32(bytes, 0);
    if (magic != idx_images_magic) throw IdxError("idx: bad image magic " + std::to_string(magic));
    IdxImages img;
    img.count = read_be32(bytes, 4);
    img.rows = read_be32(bytes, 8);
    img.cols = read_be32(bytes, 12);
    const std::size_t need = img.count * img.rows * img.cols;
    if (bytes.size() - 16 < need) throw IdxError("idx: truncated image data");
    img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
    return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    const auto magic = read_be32(bytes, 0);
    if (magic != idx_labels_magic) throw IdxError("idx: bad label magic " + std::to_string(magic));
    const std::size_t count = read_be32(bytes, 4);
    if (bytes.size() - 8 < count) throw IdxError("idx: truncated label data");
    return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto img_bytes = read_file(images_path);
    const auto lbl_bytes = read_file(labels_path);
    const IdxImages img = parse_idx_images(img_bytes);
    const auto labels = parse_idx_labels(lbl_bytes);
    if (labels.size() != img.count) {
        throw IdxError("idx: " + std::to_string(img.count) + " images but " + std::to_string(labels.size()) +
                       " labels");
    }
    std::vector<double> features(img.pixels.size());
    for (std::size_t k = 0; k < features.size(); ++k) features[k] = img.pixels[k] / 255.0;
    std::vector<std::uint32_t> l;
    l.reserve(labels.size());
    for (auto y : labels) {
        if (y > 9) throw IdxError("idx: label " + std::to_string(y) + " outside 0-9");
        l.push_back(y);
    }
    return Dataset(img.rows * img.cols, 10, std::move(features), std::move(l));
}

}  // namespace cfl
