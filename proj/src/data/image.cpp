#include "kneexnet/data/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <jpeglib.h>
#include <png.h>

namespace kneexnet::data {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    return FilePtr(std::fopen(path.c_str(), mode), &std::fclose);
}

RawImage decode_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw ImageError(fmt::format("'{}': {}", path.string(), img.message));
    }
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    RawImage out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    out.channels = color ? 3 : 1;
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw ImageError(fmt::format("'{}': {}", path.string(), msg));
    }
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    std::array<char, JMSG_LENGTH_MAX> message;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message.data());
    std::longjmp(err->jump, 1);
}

RawImage decode_jpeg(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    if (!file) throw ImageError(fmt::format("cannot open image '{}'", path.string()));

    jpeg_decompress_struct cinfo{};
    JpegErrorManager jerr{};
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    RawImage out;
    // No objects with non-trivial destructors may be created between setjmp and longjmp.
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageError(fmt::format("'{}': {}", path.string(), jerr.message.data()));
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.channels = cinfo.output_components;
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * out.channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

}  // namespace

RawImage read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError(fmt::format("cannot open image '{}'", path.string()));
    std::array<unsigned char, 8> sig{};
    in.read(reinterpret_cast<char*>(sig.data()), sig.size());
    const auto got = in.gcount();
    in.close();

    RawImage img;
    if (got >= 8 && png_sig_cmp(sig.data(), 0, 8) == 0) {
        img = decode_png(path);
    } else if (got >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) {
        img = decode_jpeg(path);
    } else {
        throw ImageError(fmt::format("'{}': not a PNG or JPEG file", path.string()));
    }
    if (img.width <= 0 || img.height <= 0) throw ImageError(fmt::format("'{}': zero-sized image", path.string()));
    return img;
}

void write_png(const std::filesystem::path& path, const RawImage& image) {
    if (image.width <= 0 || image.height <= 0 || (image.channels != 1 && image.channels != 3) ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw ImageError(fmt::format("cannot encode '{}': inconsistent image buffer", path.string()));
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
        throw ImageError(fmt::format("'{}': {}", path.string(), img.message));
    }
}

std::vector<float> resize_bilinear(const std::vector<float>& plane, int height, int width, int out_height,
                                   int out_width) {
    std::vector<float> out(static_cast<std::size_t>(out_height) * out_width);
    const double sy = static_cast<double>(height) / out_height;
    const double sx = static_cast<double>(width) / out_width;

    struct Tap {
        int i0, i1;
        double w1;
    };
    auto taps = [](int n_out, int n_in, double scale) {
        std::vector<Tap> t(static_cast<std::size_t>(n_out));
        for (int o = 0; o < n_out; ++o) {
            double src = (o + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
            const int i0 = static_cast<int>(std::floor(src));
            const int i1 = std::min(i0 + 1, n_in - 1);
            t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
        }
        return t;
    };
    const auto ty = taps(out_height, height, sy);
    const auto tx = taps(out_width, width, sx);
    for (int y = 0; y < out_height; ++y) {
        const auto& a = ty[static_cast<std::size_t>(y)];
        const float* r0 = plane.data() + static_cast<std::size_t>(a.i0) * width;
        const float* r1 = plane.data() + static_cast<std::size_t>(a.i1) * width;
        for (int x = 0; x < out_width; ++x) {
            const auto& b = tx[static_cast<std::size_t>(x)];
            const double top = r0[b.i0] + (r0[b.i1] - r0[b.i0]) * b.w1;
            const double bottom = r1[b.i0] + (r1[b.i1] - r1[b.i0]) * b.w1;
            out[static_cast<std::size_t>(y) * out_width + x] = static_cast<float>(top + (bottom - top) * a.w1);
        }
    }
    return out;
}

ImageTensor preprocess(const RawImage& image, int size) {
    if (image.width <= 0 || image.height <= 0 || image.pixels.empty()) {
        throw ImageError("cannot preprocess a zero-sized image");
    }
    if (image.channels != 1 && image.channels != 3) {
        throw ImageError(fmt::format("unsupported channel count {}", image.channels));
    }
    ImageTensor out(3, size, size);
    const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
    for (int c = 0; c < image.channels; ++c) {
        std::vector<float> src(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            src[i] = static_cast<float>(image.pixels[i * image.channels + c]) / 255.0f;
        }
        auto resized = resize_bilinear(src, image.height, image.width, size, size);
        for (auto& v : resized) v = std::clamp(v, 0.0f, 1.0f);
        std::copy(resized.begin(), resized.end(), out.data().begin() + static_cast<std::ptrdiff_t>(c * out.plane_size()));
    }
    if (image.channels == 1) {
        auto& d = out.data();
        std::copy_n(d.begin(), out.plane_size(), d.begin() + static_cast<std::ptrdiff_t>(out.plane_size()));
        std::copy_n(d.begin(), out.plane_size(), d.begin() + static_cast<std::ptrdiff_t>(2 * out.plane_size()));
    }
    return out;
}

namespace {
std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }
}  // namespace

RawImage to_gray_raw(const ImageTensor& image) {
    RawImage out{image.width(), image.height(), 1, {}};
    out.pixels.resize(image.plane_size());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            double sum = 0.0;
            for (int c = 0; c < image.channels(); ++c) sum += image.at(c, y, x);
            out.pixels[static_cast<std::size_t>(y) * image.width() + x] = quantize(sum / image.channels());
        }
    }
    return out;
}

RawImage to_rgb_raw(const ImageTensor& image) {
    RawImage out{image.width(), image.height(), 3, {}};
    out.pixels.resize(image.plane_size() * 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const int src_c = image.channels() == 3 ? c : 0;
                out.pixels[(static_cast<std::size_t>(y) * image.width() + x) * 3 + c] = quantize(image.at(src_c, y, x));
            }
        }
    }
    return out;
}

}  // namespace kneexnet::data
