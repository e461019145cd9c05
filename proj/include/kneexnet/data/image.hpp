#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace kneexnet::data {

inline constexpr int kInputSize = 224;

/// Decoded 8-bit image, interleaved channels (1 = gray, 3 = RGB).
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/// Planar float image (C x H x W), values nominally in [0,1].
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int channels, int height, int width, float fill = 0.0f)
        : channels_(channels), height_(height), width_(width),
          data_(static_cast<std::size_t>(channels) * height * width, fill) {}

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }

    float& at(int c, int y, int x) { return data_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }
    float at(int c, int y, int x) const { return data_[(c * plane_size()) + static_cast<std::size_t>(y) * width_ + x]; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    int channels_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Decodes PNG or JPEG, detected from the file signature.
RawImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& image);

/// Half-pixel-centred bilinear resize of one float plane (edge clamped).
std::vector<float> resize_bilinear(const std::vector<float>& plane, int height, int width,
                                   int out_height, int out_width);

/// Bilinear resize to size x size, scale to [0,1], replicate gray to 3 channels.
ImageTensor preprocess(const RawImage& image, int size = kInputSize);

/// Mean of the channels, quantized to 8 bits.
RawImage to_gray_raw(const ImageTensor& image);
RawImage to_rgb_raw(const ImageTensor& image);

}  // namespace kneexnet::data
