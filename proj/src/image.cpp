#include "lvgpt/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "lvgpt/error.hpp"

namespace lvgpt {

namespace {

// Reads the next whitespace-delimited header field, skipping '#' comments.
std::string next_header_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    if (next_header_token(in) != "P6") throw DataError(path.string() + ": not a binary PPM (P6)");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(next_header_token(in));
        h = std::stoul(next_header_token(in));
        maxval = std::stoul(next_header_token(in));
    } catch (const std::exception&) {
        throw DataError(path.string() + ": malformed PPM header");
    }
    if (maxval != 255) throw DataError(path.string() + ": only 8-bit PPM (maxval 255) is supported");
    RgbImage img(w, h);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.rgb.size()) {
        throw DataError(path.string() + ": truncated pixel data");
    }
    return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image " + path.string());
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
    if (!out) throw DataError("failed writing image " + path.string());
}

template <typename T>
Tensor<T> image_to_tensor(const RgbImage& image) {
    const std::size_t hw = image.width * image.height;
    std::vector<T> data(3 * hw);
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t c = 0; c < 3; ++c) data[c * hw + p] = T(image.rgb[p * 3 + c]) / T(255);
    return Tensor<T>::from_data({3, image.height, image.width}, std::move(data));
}

template Tensor<float> image_to_tensor<float>(const RgbImage&);
template Tensor<double> image_to_tensor<double>(const RgbImage&);

}  // namespace lvgpt
