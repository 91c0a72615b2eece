#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace shotweave {

// 8-bit RGB raster.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* at(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// A clip is an ordered frame sequence. On disk it is a stream of binary PPM
// (P6) images back to back, which netpbm tools read natively.
using Clip = std::vector<Image>;

std::string encode_ppm(const Image& image);
Image decode_ppm(std::string_view bytes);

std::string encode_clip(const Clip& clip);

// 24-bit uncompressed BMP, for viewing in a browser.
std::string encode_bmp(const Image& image);
Clip decode_clip(std::string_view bytes);

// Per-channel (1-a)*from + a*to, rounded to nearest.
Image blend(const Image& from, const Image& to, double alpha);

// frames >= 2; first frame equals `first`, last equals `last`.
Clip crossfade(const Image& first, const Image& last, int frames);

// Procedural stand-in for a generated image: colour fields and corner
// fiducials derived from a hex digest.
Image render_procedural(int width, int height, std::string_view digest_hex);

// Small filled square centred at (x, y), clipped to the raster.
void draw_marker(Image& image, double x, double y, int radius, std::uint8_t r, std::uint8_t g, std::uint8_t b);

}  // namespace shotweave
