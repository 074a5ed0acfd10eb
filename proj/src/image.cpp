#include "lrbench/image.hpp"

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

#include <png.h>

#include "lrbench/errors.hpp"

namespace lrbench {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

unsigned char to_byte(double v) {
    if (v <= 0.0) {
        return 0;
    }
    if (v >= 1.0) {
        return 255;
    }
    return static_cast<unsigned char>(std::lround(v * 255.0));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_png(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        throw IoError("cannot open " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed for " + path);
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<unsigned char> data;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    // Normalize every input layout to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    data.resize(stride * height);
    row_ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        row_ptrs[y] = data.data() + y * stride;
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(height), static_cast<int>(width));
    for (png_uint_32 y = 0; y < height; ++y) {
        const unsigned char* row = data.data() + y * stride;
        for (png_uint_32 x = 0; x < width; ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                img.at(static_cast<int>(y), static_cast<int>(x), c) =
                    static_cast<double>(row[x * 3 + c]) / 255.0;
            }
        }
    }
    return img;
}

void save_png(const Image& img, const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw IoError("cannot write " + path);
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed for " + path);
    }
    std::vector<unsigned char> data(static_cast<std::size_t>(img.height) * img.width * 3);
    std::vector<png_bytep> row_ptrs(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    for (int y = 0; y < img.height; ++y) {
        unsigned char* row = data.data() + static_cast<std::size_t>(y) * img.width * 3;
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < Image::kChannels; ++c) {
                row[x * 3 + c] = to_byte(img.at(y, x, c));
            }
        }
        row_ptrs[y] = row;
    }
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    std::string magic;
    in >> magic;
    if (magic != "P6") {
        throw IoError(path + ": not a binary PPM (P6)");
    }
    const auto next_value = [&in, &path]() {
        // Skips whitespace and '#' comments between header fields.
        int value = -1;
        while (!(in >> value)) {
            in.clear();
            char c = 0;
            if (!in.get(c)) {
                throw IoError(path + ": truncated PPM header");
            }
            if (c == '#') {
                std::string comment;
                std::getline(in, comment);
            }
        }
        return value;
    };
    const int width = next_value();
    const int height = next_value();
    const int maxval = next_value();
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
        throw IoError(path + ": unsupported PPM header");
    }
    in.get();  // single whitespace before pixel data
    std::vector<unsigned char> data(static_cast<std::size_t>(width) * height * 3);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (static_cast<std::size_t>(in.gcount()) != data.size()) {
        throw IoError(path + ": truncated PPM pixel data");
    }
    Image img(height, width);
    for (std::size_t i = 0; i < data.size(); ++i) {
        img.pixels[i] = static_cast<double>(data[i]) / static_cast<double>(maxval);
    }
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<unsigned char> data(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        data[i] = to_byte(img.pixels[i]);
    }
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

}  // namespace

Image load_image(const std::string& path) {
    if (ends_with(path, ".png")) {
        return load_png(path);
    }
    if (ends_with(path, ".ppm")) {
        return load_ppm(path);
    }
    throw IoError(path + ": unsupported image format (want .png or .ppm)");
}

void save_image(const Image& img, const std::string& path) {
    if (img.height <= 0 || img.width <= 0) {
        throw ValidationError("cannot save an empty image");
    }
    if (ends_with(path, ".png")) {
        save_png(img, path);
        return;
    }
    if (ends_with(path, ".ppm")) {
        save_ppm(img, path);
        return;
    }
    throw IoError(path + ": unsupported image format (want .png or .ppm)");
}

double psnr(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width) {
        throw ValidationError("psnr: image shapes differ");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.pixels.size());
    if (mse <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -10.0 * std::log10(mse);
}

}  // namespace lrbench
