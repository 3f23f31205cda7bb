#include "rfdn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

namespace rfdn {

Tensor<float> load_image(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read '" + path + "': " + image.message);

  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode '" + path + "': " + image.message);
  }

  const index_t h = image.height, w = image.width;
  Tensor<float> out(1, 3, h, w);
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < w; ++x)
      for (index_t c = 0; c < 3; ++c)
        out(0, c, y, x) = buffer[static_cast<std::size_t>((y * w + x) * 3 + c)];
  return out;
}

void save_image(const Tensor<float>& img, const std::string& path) {
  if (img.n() != 1 || img.c() != 3)
    throw FormatError("save_image expects a (1,3,h,w) tensor, got " +
                      img.shape().str());
  const index_t h = img.h(), w = img.w();
  std::vector<png_byte> buffer(static_cast<std::size_t>(h * w * 3));
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < w; ++x)
      for (index_t c = 0; c < 3; ++c)
        buffer[static_cast<std::size_t>((y * w + x) * 3 + c)] =
            static_cast<png_byte>(std::clamp<long>(
                std::lround(static_cast<double>(img(0, c, y, x))), 0, 255));

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0,
                               nullptr))
    throw IoError("cannot write '" + path + "': " + image.message);
}

std::vector<std::string> list_images(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw IoError("not a directory: '" + dir + "'");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace rfdn
