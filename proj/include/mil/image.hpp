#ifndef MIL_IMAGE_HPP
#define MIL_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mil {

// 8-bit RGB image, row-major, channels interleaved.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // size = width * height * 3

    std::size_t byte_count() const { return pixels.size(); }
    const std::uint8_t* row(int y) const {
        return pixels.data() + static_cast<std::size_t>(y) * width * 3;
    }
    std::uint8_t* row(int y) {
        return pixels.data() + static_cast<std::size_t>(y) * width * 3;
    }
};

// Reads a PNG (8-bit RGB, RGBA with alpha dropped, grayscale or palette
// expanded) or a binary PPM (P6). Throws IngestError naming the file.
ImageU8 load_image(const std::string& path);

void save_png_rgb(const std::string& path, const ImageU8& image);
void save_png_gray(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& gray);
void save_ppm(const std::string& path, const ImageU8& image);

}  // namespace mil

#endif
