#include "gradlab/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "gradlab/rng.hpp"

namespace gradlab {

Eigen::MatrixXd synthetic_bump_images(int side, int count, std::uint64_t seed) {
  if (side < 2 || count < 1)
    throw std::invalid_argument("synthetic images: side must be >= 2, count >= 1");
  Rng rng(seed);
  Eigen::MatrixXd images(side * side, count);
  for (int n = 0; n < count; ++n) {
    const int bumps = 1 + static_cast<int>(rng.below(3));
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(side, side);
    for (int b = 0; b < bumps; ++b) {
      const double cx = rng.uniform(0.0, side);
      const double cy = rng.uniform(0.0, side);
      const double sx = rng.uniform(0.06 * side, 0.18 * side);
      const double sy = rng.uniform(0.06 * side, 0.18 * side);
      const double amp = rng.uniform(0.5, 1.0);
      for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
          const double dx = (i - cx) / sx;
          const double dy = (j - cy) / sy;
          img(i, j) += amp * std::exp(-0.5 * (dx * dx + dy * dy));
        }
      }
    }
    images.col(n) =
        Eigen::Map<Eigen::VectorXd>(img.data(), side * side).cwiseMin(1.0).cwiseMax(0.0);
  }
  return images;
}

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("idx: truncated header in " + path);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Eigen::MatrixXd read_idx_images(const std::string& path, int crop_border, int max_images) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path);

  const std::uint32_t magic = read_be_u32(in, path);
  if (magic != 0x00000803u)
    throw std::runtime_error("idx: bad magic in " + path + " (expected 0x00000803)");
  const int count = static_cast<int>(read_be_u32(in, path));
  const int rows = static_cast<int>(read_be_u32(in, path));
  const int cols = static_cast<int>(read_be_u32(in, path));
  if (count < 1 || rows < 1 || cols < 1) throw std::runtime_error("idx: bad dimensions in " + path);
  if (crop_border < 0 || 2 * crop_border >= rows || 2 * crop_border >= cols)
    throw std::invalid_argument("idx: crop_border too large for " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " images");

  const int keep = max_images >= 0 ? std::min(max_images, count) : count;
  const int out_rows = rows - 2 * crop_border;
  const int out_cols = cols - 2 * crop_border;
  Eigen::MatrixXd images(out_rows * out_cols, keep);

  std::vector<unsigned char> buffer(static_cast<std::size_t>(rows) * cols);
  for (int n = 0; n < keep; ++n) {
    if (!in.read(reinterpret_cast<char*>(buffer.data()), buffer.size()))
      throw std::runtime_error("idx: truncated image data in " + path);
    int k = 0;
    for (int j = crop_border; j < cols - crop_border; ++j) {
      for (int i = crop_border; i < rows - crop_border; ++i) {
        images(k++, n) = buffer[static_cast<std::size_t>(i) * cols + j] / 255.0;
      }
    }
  }
  return images;
}

}  // namespace gradlab
