// SPDX-License-Identifier: Apache-2.0
#include "binoise/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace binoise {

namespace {

[[noreturn]] void parse_error(std::size_t offset, const std::string& what) {
    throw std::runtime_error("malformed image at byte " + std::to_string(offset) + ": " + what);
}

class HeaderReader {
public:
    explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long number(const char* what) {
        skip_space_and_comments();
        if (pos_ >= bytes_.size()) parse_error(pos_, std::string("truncated before ") + what);
        if (!std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) parse_error(pos_, std::string("expected ") + what);
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000) parse_error(pos_, std::string(what) + " too large");
            ++pos_;
        }
        return v;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_image(const Tensor& image) {
    const ImageDims d = image_dims(image);
    if (d.channels != 1 && d.channels != 3) {
        throw std::invalid_argument("images must have 1 or 3 channels, got " + std::to_string(d.channels));
    }
    const ValueRange r = image.range();
    std::ostringstream out;
    out << (d.channels == 1 ? "P5" : "P6") << '\n' << d.width << ' ' << d.height << "\n255\n";
    std::string body(d.channels * d.height * d.width, '\0');
    std::size_t k = 0;
    for (std::size_t y = 0; y < d.height; ++y) {
        for (std::size_t x = 0; x < d.width; ++x) {
            for (std::size_t c = 0; c < d.channels; ++c) {
                const double v = image.at(c, y, x);
                if (!(v >= r.lo && v <= r.hi)) {
                    std::ostringstream msg;
                    msg << "pixel value " << v << " outside [" << r.lo << ", " << r.hi << "]";
                    throw std::domain_error(msg.str());
                }
                const double scaled = (v - r.lo) / r.width() * 255.0;
                body[k++] = static_cast<char>(static_cast<int>(std::floor(scaled + 0.5)));
            }
        }
    }
    return out.str() + body;
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
    const std::string bytes = encode_image(image);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

Tensor decode_image(const std::string& bytes, ValueRange range) {
    if (bytes.size() < 2) parse_error(bytes.size(), "truncated magic");
    if (bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) parse_error(0, "not a binary PGM/PPM");
    const std::size_t channels = bytes[1] == '5' ? 1 : 3;
    HeaderReader h(bytes);
    h.advance(2);
    const long width = h.number("width");
    const long height = h.number("height");
    const long maxval = h.number("maxval");
    if (width <= 0 || height <= 0) parse_error(h.pos(), "empty image");
    if (maxval < 1 || maxval > 255) parse_error(h.pos(), "maxval must be in 1..255");
    if (h.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[h.pos()]))) {
        parse_error(h.pos(), "expected whitespace after header");
    }
    h.advance(1);
    const std::size_t need = channels * static_cast<std::size_t>(width * height);
    if (bytes.size() - h.pos() < need) {
        parse_error(bytes.size(), "truncated pixel data (" + std::to_string(bytes.size() - h.pos()) + " of " +
                                      std::to_string(need) + " bytes)");
    }
    Tensor img({channels, static_cast<std::size_t>(height), static_cast<std::size_t>(width)}, 0.0, range);
    std::size_t k = h.pos();
    for (std::size_t y = 0; y < static_cast<std::size_t>(height); ++y) {
        for (std::size_t x = 0; x < static_cast<std::size_t>(width); ++x) {
            for (std::size_t c = 0; c < channels; ++c) {
                const auto code = static_cast<unsigned char>(bytes[k]);
                if (code > maxval) parse_error(k, "sample exceeds maxval");
                img.at(c, y, x) = range.lo + range.width() * static_cast<double>(code) / static_cast<double>(maxval);
                ++k;
            }
        }
    }
    return img;
}

Tensor read_image(const std::filesystem::path& path, ValueRange range) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    try {
        return decode_image(buf.str(), range);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace binoise
