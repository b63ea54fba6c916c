#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "commands.hpp"
#include "sparseview/errors.hpp"

namespace svct {

void write_png(const std::filesystem::path& path, const sv::Image& img, double lo_hu, double hi_hu, double mu_water)
{
    if (!(hi_hu > lo_hu)) throw sv::ConfigError("png: empty display window");
    const int w = img.grid.width, h = img.grid.height;
    std::vector<png_byte> pixels(std::size_t(w) * std::size_t(h));
    const double scale = 1000.0 / mu_water;
    for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
            const double hu = img.at(ix, iy) * scale;
            const double t = std::clamp((hu - lo_hu) / (hi_hu - lo_hu), 0.0, 1.0);
            pixels[std::size_t(h - 1 - iy) * std::size_t(w) + std::size_t(ix)] = png_byte(std::lround(255 * t));
        }

    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(w);
    image.height = png_uint_32(h);
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), w, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw sv::ConfigError("png: cannot write " + path.string() + ": " + msg);
    }
}

} // namespace svct
