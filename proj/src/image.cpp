#include "mil/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "mil/errors.hpp"

namespace mil {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageU8 load_png(const std::string& path, std::FILE* fp) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             nullptr, nullptr);
    if (!png) throw IngestError("libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IngestError("libpng init failed for " + path);
    }
    std::vector<png_bytep> row_ptrs;
    ImageU8 img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestError("failed to decode PNG " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_set_strip_alpha(png);  // alpha ignored by contract
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestError("unsupported PNG layout in " + path);
    }
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    row_ptrs.resize(img.height);
    for (int y = 0; y < img.height; ++y) row_ptrs[y] = img.row(y);
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

ImageU8 load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw IngestError(path + " is not a binary PPM (P6)");
    auto next_int = [&]() {
        // skip whitespace and '#' comment lines between header fields
        int c = in.peek();
        while (c == '#' || std::isspace(c)) {
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else {
                in.get();
            }
            c = in.peek();
        }
        int v = -1;
        in >> v;
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (w <= 0 || h <= 0 || maxval != 255 || !in) {
        throw IngestError("unsupported PPM header in " + path);
    }
    in.get();  // single whitespace after maxval
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw IngestError("truncated PPM data in " + path);
    }
    return img;
}

void write_png(const std::string& path, int width, int height, int channels,
               const std::uint8_t* data) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IngestError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              nullptr, nullptr);
    if (!png) throw IngestError("libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IngestError("libpng init failed for " + path);
    }
    std::vector<png_bytep> row_ptrs(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IngestError("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    // fixed encoder settings keep output byte-stable across runs
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_SUB);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        row_ptrs[y] = const_cast<png_bytep>(
            data + static_cast<std::size_t>(y) * width * channels);
    }
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageU8 load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IngestError("cannot open " + path);
    unsigned char sig[8] = {0};
    const std::size_t got = std::fread(sig, 1, 8, fp.get());
    if (got >= 2 && sig[0] == 'P' && sig[1] == '6') {
        fp.reset();
        return load_ppm(path);
    }
    if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) {
        std::rewind(fp.get());
        return load_png(path, fp.get());
    }
    throw IngestError(path + " is neither PNG nor binary PPM");
}

void save_png_rgb(const std::string& path, const ImageU8& image) {
    if (image.byte_count() !=
        static_cast<std::size_t>(image.width) * image.height * 3) {
        throw InternalError("save_png_rgb: pixel buffer does not match size");
    }
    write_png(path, image.width, image.height, 3, image.pixels.data());
}

void save_png_gray(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& gray) {
    if (gray.size() != static_cast<std::size_t>(width) * height) {
        throw InternalError("save_png_gray: pixel buffer does not match size");
    }
    write_png(path, width, height, 1, gray.data());
}

void save_ppm(const std::string& path, const ImageU8& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot write " + path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.byte_count()));
}

}  // namespace mil
