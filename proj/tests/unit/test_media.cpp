#include <doctest.h>

#include <cstdint>
#include <string>

#include "shotweave/error.hpp"
#include "shotweave/hashing.hpp"
#include "shotweave/media.hpp"
#include "shotweave/rng.hpp"

using namespace shotweave;

namespace {

Image random_image(Rng& rng, int w, int h) {
    Image img(w, h);
    for (auto& v : img.rgb) {
        v = static_cast<std::uint8_t>(rng.below(256));
    }
    return img;
}

std::uint32_t le32(const std::string& s, std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) {
        v = (v << 8) | static_cast<unsigned char>(s[at + b]);
    }
    return v;
}

}  // namespace

TEST_SUITE("media") {
    TEST_CASE("ppm header is netpbm P6") {
        Image img(3, 2);
        const std::string bytes = encode_ppm(img);
        CHECK(bytes.rfind("P6\n3 2\n255\n", 0) == 0);
        CHECK(bytes.size() == std::string("P6\n3 2\n255\n").size() + 18);
    }

    TEST_CASE("ppm and clip streams round-trip") {
        Rng rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const int w = 1 + static_cast<int>(rng.below(20));
            const int h = 1 + static_cast<int>(rng.below(20));
            Clip clip;
            for (int f = 0; f < 1 + static_cast<int>(rng.below(5)); ++f) {
                clip.push_back(random_image(rng, w, h));
            }
            REQUIRE(decode_ppm(encode_ppm(clip.front())) == clip.front());
            REQUIRE(decode_clip(encode_clip(clip)) == clip);
        }
    }

    TEST_CASE("ppm decoder accepts comments and rejects damage") {
        const std::string with_comment = "P6\n# made by hand\n1 1\n255\n\x01\x02\x03";
        const Image img = decode_ppm(with_comment);
        CHECK(img.width == 1);
        CHECK(img.rgb == std::vector<std::uint8_t>{1, 2, 3});
        CHECK_THROWS_AS(decode_ppm("P3\n1 1\n255\n1 2 3"), ValidationError);
        CHECK_THROWS_AS(decode_ppm("P6\n2 2\n255\n\x01"), ValidationError);
        CHECK_THROWS_AS(decode_ppm("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06"), ValidationError);
    }

    TEST_CASE("crossfade endpoints equal the inputs and blend is per channel") {
        Rng rng(11);
        const Image a = random_image(rng, 8, 5);
        const Image b = random_image(rng, 8, 5);
        const Clip clip = crossfade(a, b, 6);
        REQUIRE(clip.size() == 6);
        CHECK(clip.front() == a);
        CHECK(clip.back() == b);
        const Image mid = blend(a, b, 0.4);
        for (std::size_t i = 0; i < a.rgb.size(); ++i) {
            const double expect = 0.6 * a.rgb[i] + 0.4 * b.rgb[i];
            REQUIRE(std::abs(mid.rgb[i] - expect) <= 0.5 + 1e-9);
        }
        CHECK_THROWS_AS(crossfade(a, b, 1), PreconditionError);
        CHECK_THROWS_AS(blend(a, Image(2, 2), 0.5), PreconditionError);
    }

    TEST_CASE("procedural images are a function of the digest") {
        const std::string d1 = sha256_hex("one");
        const std::string d2 = sha256_hex("two");
        CHECK(render_procedural(32, 18, d1) == render_procedural(32, 18, d1));
        CHECK(render_procedural(32, 18, d1) != render_procedural(32, 18, d2));
        CHECK_THROWS_AS(render_procedural(0, 18, d1), PreconditionError);
    }

    TEST_CASE("bmp layout: header fields and bottom-up BGR rows") {
        Image img(3, 2);
        img.at(0, 0)[0] = 10;  // top-left red
        img.at(2, 1)[2] = 20;  // bottom-right blue
        const std::string bmp = encode_bmp(img);
        const std::size_t row = 12;  // 9 bytes padded to 4
        CHECK(bmp.substr(0, 2) == "BM");
        CHECK(le32(bmp, 2) == bmp.size());
        CHECK(bmp.size() == 54 + row * 2);
        CHECK(le32(bmp, 18) == 3);
        CHECK(le32(bmp, 22) == 2);
        // First stored row is the bottom image row; pixel 2 blue is byte 0 of BGR.
        CHECK(static_cast<unsigned char>(bmp[54 + 2 * 3 + 0]) == 20);
        // Second stored row is the top row; pixel 0 red is byte 2.
        CHECK(static_cast<unsigned char>(bmp[54 + row + 2]) == 10);
    }
}
