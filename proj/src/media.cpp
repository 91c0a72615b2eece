#include "shotweave/media.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "shotweave/error.hpp"

namespace shotweave {

namespace {

// Parses one P6 image starting at `pos`, advancing `pos` past it.
Image parse_one_ppm(std::string_view bytes, std::size_t& pos) {
    auto skip_ws_and_comments = [&] {
        while (pos < bytes.size()) {
            if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() {
        skip_ws_and_comments();
        int value = 0;
        std::size_t digits = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            value = value * 10 + (bytes[pos] - '0');
            ++pos;
            ++digits;
            if (value > 1 << 20) {
                throw ValidationError("ppm: header value too large");
            }
        }
        if (digits == 0) {
            throw ValidationError("ppm: malformed header");
        }
        return value;
    };

    if (bytes.size() < pos + 2 || bytes[pos] != 'P' || bytes[pos + 1] != '6') {
        throw ValidationError("ppm: missing P6 magic");
    }
    pos += 2;
    const int w = read_int();
    const int h = read_int();
    const int maxval = read_int();
    if (maxval != 255 || w <= 0 || h <= 0) {
        throw ValidationError("ppm: only 8-bit images with positive size are supported");
    }
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw ValidationError("ppm: malformed header");
    }
    ++pos;
    Image img(w, h);
    if (bytes.size() - pos < img.rgb.size()) {
        throw ValidationError("ppm: truncated pixel data");
    }
    std::copy_n(bytes.data() + pos, img.rgb.size(), reinterpret_cast<char*>(img.rgb.data()));
    pos += img.rgb.size();
    return img;
}

std::uint8_t hex_byte(std::string_view hex, std::size_t i) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return 0;
    };
    i = (i * 2) % (hex.size() - hex.size() % 2);
    return static_cast<std::uint8_t>(nib(hex[i]) * 16 + nib(hex[i + 1]));
}

}  // namespace

std::string encode_ppm(const Image& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
    return out;
}

Image decode_ppm(std::string_view bytes) {
    std::size_t pos = 0;
    return parse_one_ppm(bytes, pos);
}

std::string encode_clip(const Clip& clip) {
    std::string out;
    for (const auto& frame : clip) {
        out += encode_ppm(frame);
    }
    return out;
}

Clip decode_clip(std::string_view bytes) {
    Clip clip;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        clip.push_back(parse_one_ppm(bytes, pos));
    }
    return clip;
}

Image blend(const Image& from, const Image& to, double alpha) {
    if (from.width != to.width || from.height != to.height) {
        throw PreconditionError("blend: image sizes differ");
    }
    if (alpha <= 0.0) {
        return from;
    }
    if (alpha >= 1.0) {
        return to;
    }
    Image out(from.width, from.height);
    for (std::size_t i = 0; i < out.rgb.size(); ++i) {
        const double v = (1.0 - alpha) * from.rgb[i] + alpha * to.rgb[i];
        out.rgb[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return out;
}

Clip crossfade(const Image& first, const Image& last, int frames) {
    if (frames < 2) {
        throw PreconditionError("crossfade: need at least two frames");
    }
    Clip clip;
    clip.reserve(static_cast<std::size_t>(frames));
    for (int i = 0; i < frames; ++i) {
        clip.push_back(blend(first, last, static_cast<double>(i) / (frames - 1)));
    }
    return clip;
}

Image render_procedural(int width, int height, std::string_view digest_hex) {
    if (width <= 0 || height <= 0 || digest_hex.size() < 2) {
        throw PreconditionError("render_procedural: bad size or digest");
    }
    Image img(width, height);
    // Four colour fields split at a digest-chosen point.
    const int split_x = width / 4 + hex_byte(digest_hex, 12) % std::max(1, width / 2);
    const int split_y = height / 4 + hex_byte(digest_hex, 13) % std::max(1, height / 2);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t field = (x >= split_x ? 1 : 0) + (y >= split_y ? 2 : 0);
            auto* px = img.at(x, y);
            px[0] = hex_byte(digest_hex, field * 3);
            px[1] = hex_byte(digest_hex, field * 3 + 1);
            px[2] = hex_byte(digest_hex, field * 3 + 2);
        }
    }
    // Corner fiducials: black square with a white core.
    const int r = std::max(1, std::min(width, height) / 16);
    const double cx[] = {r + 1.0, width - r - 2.0, r + 1.0, width - r - 2.0};
    const double cy[] = {r + 1.0, r + 1.0, height - r - 2.0, height - r - 2.0};
    for (int i = 0; i < 4; ++i) {
        draw_marker(img, cx[i], cy[i], r, 0, 0, 0);
        draw_marker(img, cx[i], cy[i], std::max(0, r / 2), 255, 255, 255);
    }
    return img;
}

void draw_marker(Image& image, double x, double y, int radius, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int cx = static_cast<int>(std::lround(x));
    const int cy = static_cast<int>(std::lround(y));
    for (int py = std::max(0, cy - radius); py <= std::min(image.height - 1, cy + radius); ++py) {
        for (int px = std::max(0, cx - radius); px <= std::min(image.width - 1, cx + radius); ++px) {
            auto* p = image.at(px, py);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
    }
}

std::string encode_bmp(const Image& image) {
    const std::size_t row = (static_cast<std::size_t>(image.width) * 3 + 3) & ~std::size_t{3};
    const std::size_t pixels = row * static_cast<std::size_t>(image.height);
    std::string out(54 + pixels, '\0');
    auto put32 = [&](std::size_t at, std::uint32_t v) {
        for (int b = 0; b < 4; ++b) {
            out[at + b] = static_cast<char>((v >> (8 * b)) & 0xff);
        }
    };
    out[0] = 'B';
    out[1] = 'M';
    put32(2, static_cast<std::uint32_t>(out.size()));
    put32(10, 54);
    put32(14, 40);
    put32(18, static_cast<std::uint32_t>(image.width));
    put32(22, static_cast<std::uint32_t>(image.height));
    out[26] = 1;
    out[28] = 24;
    put32(34, static_cast<std::uint32_t>(pixels));
    for (int y = 0; y < image.height; ++y) {
        // Rows run bottom-up, pixels in BGR order.
        char* dst = out.data() + 54 + row * static_cast<std::size_t>(image.height - 1 - y);
        for (int x = 0; x < image.width; ++x) {
            const std::uint8_t* px = image.at(x, y);
            dst[3 * x] = static_cast<char>(px[2]);
            dst[3 * x + 1] = static_cast<char>(px[1]);
            dst[3 * x + 2] = static_cast<char>(px[0]);
        }
    }
    return out;
}

}  // namespace shotweave
