#include "tadc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "tadc/error.hpp"

namespace tadc {

namespace fs = std::filesystem;

Tensor to_tensor(std::span<const Image> images) {
    if (images.empty()) throw DimensionError("to_tensor: no images");
    const Image& first = images.front();
    std::vector<float> values;
    values.reserve(images.size() * first.data.size());
    for (const Image& im : images) {
        if (im.channels != first.channels || im.height != first.height || im.width != first.width) {
            throw DimensionError("to_tensor: images differ in size");
        }
        values.insert(values.end(), im.data.begin(), im.data.end());
    }
    return Tensor::from({images.size(), first.channels, first.height, first.width}, std::move(values));
}

Tensor to_tensor(const Image& image) { return to_tensor(std::span<const Image>(&image, 1)); }

Image image_from_tensor(const Tensor& t, std::size_t index) {
    Shape s = t.shape();
    if (s.size() == 3) s.insert(s.begin(), 1);
    if (s.size() != 4 || index >= s[0]) {
        throw DimensionError("image_from_tensor: cannot take sample " + std::to_string(index) + " of " +
                             to_string(t.shape()));
    }
    Image im(s[1], s[2], s[3]);
    const std::size_t n = im.data.size();
    std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(index * n), n, im.data.begin());
    return im;
}

std::uint8_t from_unit_range(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

float to_unit_range(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

Image quantize8(const Image& image) {
    Image out = image;
    for (float& v : out.data) v = to_unit_range(from_unit_range(v));
    return out;
}

namespace {

// Overlap weights of source cells with each destination cell along one axis.
struct AxisWeights {
    std::vector<std::size_t> first;  // first source index per destination
    std::vector<std::vector<double>> weights;
};

AxisWeights area_weights(std::size_t src, std::size_t dst) {
    AxisWeights w;
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    for (std::size_t o = 0; o < dst; ++o) {
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        const auto first = static_cast<std::size_t>(std::floor(lo));
        const auto last = std::min(src - 1, static_cast<std::size_t>(std::ceil(hi) - 1));
        std::vector<double> ws;
        for (std::size_t i = first; i <= last; ++i) {
            const double overlap = std::min(hi, double(i + 1)) - std::max(lo, double(i));
            ws.push_back(std::max(0.0, overlap) / scale);
        }
        w.first.push_back(first);
        w.weights.push_back(std::move(ws));
    }
    return w;
}

}  // namespace

Image resize_area(const Image& image, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) throw DimensionError("resize_area: empty target size");
    if (image.height == height && image.width == width) return image;
    const AxisWeights wy = area_weights(image.height, height);
    const AxisWeights wx = area_weights(image.width, width);
    Image out(image.channels, height, width);
    for (std::size_t c = 0; c < image.channels; ++c) {
        // Horizontal pass into a temporary [H_src, width] plane.
        std::vector<double> tmp(image.height * width, 0.0);
        for (std::size_t y = 0; y < image.height; ++y) {
            for (std::size_t ox = 0; ox < width; ++ox) {
                double acc = 0.0;
                for (std::size_t t = 0; t < wx.weights[ox].size(); ++t) {
                    acc += wx.weights[ox][t] * image.at(c, y, wx.first[ox] + t);
                }
                tmp[y * width + ox] = acc;
            }
        }
        for (std::size_t oy = 0; oy < height; ++oy) {
            for (std::size_t ox = 0; ox < width; ++ox) {
                double acc = 0.0;
                for (std::size_t t = 0; t < wy.weights[oy].size(); ++t) {
                    acc += wy.weights[oy][t] * tmp[(wy.first[oy] + t) * width + ox];
                }
                out.at(c, oy, ox) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Image binarize(const Image& image) {
    Image out = image;
    for (float& v : out.data) v = v >= 0.5f ? 1.0f : 0.0f;
    return out;
}

Image read_png(const fs::path& path, std::size_t channels) {
    if (channels != 1 && channels != 3) throw DecodeError(path.string() + ": unsupported channel count");
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!fs::is_regular_file(path)) throw IoError(path.string() + ": cannot open");
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw DecodeError(path.string() + ": " + png.message);
    }
    png.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw DecodeError(path.string() + ": " + msg);
    }
    Image im(channels, png.height, png.width);
    for (std::size_t y = 0; y < im.height; ++y) {
        for (std::size_t x = 0; x < im.width; ++x) {
            for (std::size_t c = 0; c < channels; ++c) {
                im.at(c, y, x) = to_unit_range(buffer[(y * im.width + x) * channels + c]);
            }
        }
    }
    return im;
}

namespace {

fs::path temp_sibling(const fs::path& path) {
    fs::path tmp = path;
    tmp += ".tmp";
    return tmp;
}

}  // namespace

void write_png(const fs::path& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw IoError(path.string() + ": PNG output needs 1 or 3 channels");
    }
    std::vector<std::uint8_t> buffer(image.data.size());
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            for (std::size_t c = 0; c < image.channels; ++c) {
                buffer[(y * image.width + x) * image.channels + c] = from_unit_range(image.at(c, y, x));
            }
        }
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, buffer.data(), 0, nullptr)) {
        throw IoError(path.string() + ": " + png.message);
    }
    std::vector<std::uint8_t> encoded(size);
    if (!png_image_write_to_memory(&png, encoded.data(), &size, 0, buffer.data(), 0, nullptr)) {
        throw IoError(path.string() + ": " + png.message);
    }
    encoded.resize(size);
    atomic_write(path, encoded);
}

namespace {

std::string next_token(std::istream& in, const fs::path& path) {
    std::string tok;
    char ch = 0;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string ignored;
            std::getline(in, ignored);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(ch);
    }
    if (tok.empty()) throw DecodeError(path.string() + ": truncated PGM header");
    return tok;
}

}  // namespace

Image read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open");
    if (next_token(in, path) != "P5") throw DecodeError(path.string() + ": not a binary PGM (P5)");
    std::size_t width = 0, height = 0;
    unsigned long maxval = 0;
    try {
        width = std::stoul(next_token(in, path));
        height = std::stoul(next_token(in, path));
        maxval = std::stoul(next_token(in, path));
    } catch (const std::logic_error&) {
        throw DecodeError(path.string() + ": malformed PGM header");
    }
    if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
        throw DecodeError(path.string() + ": invalid PGM dimensions or maxval");
    }
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    std::vector<std::uint8_t> raw(width * height * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw DecodeError(path.string() + ": truncated PGM data");
    Image im(1, height, width);
    for (std::size_t i = 0; i < width * height; ++i) {
        const unsigned v = bytes_per == 2 ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        im.data[i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
    return im;
}

void write_pgm(const fs::path& path, const Image& image, int bits) {
    if (image.channels != 1) throw IoError(path.string() + ": PGM output needs a single channel");
    if (bits != 8 && bits != 16) throw IoError(path.string() + ": PGM depth must be 8 or 16");
    const unsigned maxval = bits == 8 ? 255u : 65535u;
    std::string header = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n" +
                         std::to_string(maxval) + "\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (float v : image.data) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0f, 1.0f) * static_cast<float>(maxval)));
        if (bits == 16) bytes.push_back(static_cast<std::uint8_t>(q >> 8));
        bytes.push_back(static_cast<std::uint8_t>(q & 0xFF));
    }
    atomic_write(path, bytes);
}

Image read_image(const fs::path& path, std::size_t channels) {
    const std::string ext = path.extension().string();
    if (ext == ".pgm") {
        Image im = read_pgm(path);
        if (channels == 1) return im;
        Image rgb(channels, im.height, im.width);
        for (std::size_t c = 0; c < channels; ++c) std::copy(im.data.begin(), im.data.end(), rgb.data.begin() + c * im.plane());
        return rgb;
    }
    if (ext == ".png") return read_png(path, channels);
    throw DecodeError(path.string() + ": unsupported image extension");
}

void write_image(const fs::path& path, const Image& image) {
    const std::string ext = path.extension().string();
    if (ext == ".pgm") return write_pgm(path, image);
    if (ext == ".png") return write_png(path, image);
    throw IoError(path.string() + ": unsupported image extension");
}

void atomic_write(const fs::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path.string() + ": cannot create parent directory: " + ec.message());
    }
    const fs::path tmp = temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(path.string() + ": cannot open for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw IoError(path.string() + ": write failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError(path.string() + ": rename failed: " + ec.message());
    }
}

void atomic_write(const fs::path& path, const std::string& text) {
    atomic_write(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace tadc
