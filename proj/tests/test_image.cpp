#include <doctest.h>

#include <cstdio>

#include <jpeglib.h>

#include "helpers.hpp"
#include "kneexnet/data/image.hpp"
#include "kneexnet/random.hpp"

using namespace kneexnet;
using namespace kneexnet::data;
using test_support::scratch_dir;
using test_support::write_file;

namespace {

RawImage random_image(int w, int h, int c, std::uint64_t seed) {
    RawImage img{w, h, c, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * c)};
    Rng rng(seed);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

void write_jpeg(const std::filesystem::path& path, const RawImage& img) {
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f != nullptr);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = img.channels;
    cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, 95, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPLE*>(img.pixels.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width * img.channels);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

}  // namespace

TEST_CASE("PNG round trip is lossless") {
    const auto dir = scratch_dir("png_roundtrip");
    for (int c : {1, 3}) {
        const auto img = random_image(31, 17, c, static_cast<std::uint64_t>(c));
        const auto path = dir / ("img" + std::to_string(c) + ".png");
        write_png(path, img);
        const auto back = read_image(path);
        CHECK(back.width == 31);
        CHECK(back.height == 17);
        CHECK(back.channels == c);
        CHECK(back.pixels == img.pixels);
    }
}

TEST_CASE("JPEG decoding") {
    const auto dir = scratch_dir("jpeg_decode");
    RawImage flat{40, 24, 1, std::vector<std::uint8_t>(40 * 24, 128)};
    write_jpeg(dir / "flat.jpg", flat);
    const auto back = read_image(dir / "flat.jpg");
    CHECK(back.width == 40);
    CHECK(back.height == 24);
    CHECK(back.channels == 1);
    for (auto p : back.pixels) CHECK(std::abs(static_cast<int>(p) - 128) <= 1);

    write_jpeg(dir / "rgb.jpg", random_image(16, 16, 3, 4));
    CHECK(read_image(dir / "rgb.jpg").channels == 3);
}

TEST_CASE("undecodable images raise ImageError") {
    const auto dir = scratch_dir("bad_images");
    write_file(dir / "junk.png", "not an image at all");
    CHECK_THROWS_AS(read_image(dir / "junk.png"), ImageError);
    write_file(dir / "trunc.png", std::string("\x89PNG\r\n\x1a\n", 8) + "xx");
    CHECK_THROWS_AS(read_image(dir / "trunc.png"), ImageError);
    write_file(dir / "trunc.jpg", std::string("\xFF\xD8\xFF\xE0", 4));
    CHECK_THROWS_AS(read_image(dir / "trunc.jpg"), ImageError);
    CHECK_THROWS_AS(read_image(dir / "absent.png"), ImageError);
    CHECK_THROWS_AS(preprocess(RawImage{0, 0, 1, {}}), ImageError);
}

TEST_CASE("preprocess output shape and range") {
    const auto out = preprocess(random_image(448, 448, 1, 1));
    CHECK(out.channels() == 3);
    CHECK(out.height() == 224);
    CHECK(out.width() == 224);
    for (float v : out.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    // Gray is replicated.
    for (int y = 0; y < 224; y += 37) {
        for (int x = 0; x < 224; x += 29) {
            CHECK(out.at(0, y, x) == out.at(1, y, x));
            CHECK(out.at(0, y, x) == out.at(2, y, x));
        }
    }
    const auto odd = preprocess(random_image(301, 97, 3, 2));
    CHECK(odd.height() == 224);
    CHECK(odd.width() == 224);
}

TEST_CASE("constant image stays constant") {
    RawImage flat{300, 200, 1, std::vector<std::uint8_t>(300 * 200, 77)};
    const auto out = preprocess(flat);
    const float expected = 77.0f / 255.0f;
    for (float v : out.data()) CHECK(v == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("224x224 input is only rescaled") {
    const auto img = random_image(224, 224, 3, 3);
    const auto out = preprocess(img);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 224; ++y) {
            for (int x = 0; x < 224; ++x) {
                CHECK(out.at(c, y, x) == doctest::Approx(img.at(y, x, c) / 255.0f).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("bilinear downscale by two averages pixel pairs") {
    const std::vector<float> plane = {0, 2, 4, 6, 10, 12, 14, 16};  // 2 x 4
    const auto out = resize_bilinear(plane, 2, 4, 1, 2);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == doctest::Approx((0 + 2 + 10 + 12) / 4.0));
    CHECK(out[1] == doctest::Approx((4 + 6 + 14 + 16) / 4.0));
}

TEST_CASE("tensor to 8-bit conversion") {
    ImageTensor t(3, 2, 2, 0.5f);
    t.at(0, 0, 0) = 1.0f;
    const auto rgb = to_rgb_raw(t);
    CHECK(rgb.channels == 3);
    CHECK(rgb.at(0, 0, 0) == 255);
    CHECK(rgb.at(1, 1, 2) == 128);
    const auto gray = to_gray_raw(ImageTensor(3, 2, 2, 1.0f));
    CHECK(gray.channels == 1);
    CHECK(gray.at(0, 0, 0) == 255);
}
