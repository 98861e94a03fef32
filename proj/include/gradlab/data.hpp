#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace gradlab {

// Seeded synthetic images: each example mixes a few axis-aligned Gaussian
// bumps on a side x side pixel grid, clamped to [0, 1]. One example per
// column; dim = side * side rows.
Eigen::MatrixXd synthetic_bump_images(int side, int count, std::uint64_t seed);

// IDX image file reader (big-endian magic 0x00000803, then dims, then
// unsigned bytes scaled to [0, 1]). With crop_border > 0, that many pixels
// are removed from every side of each image. One image per column.
Eigen::MatrixXd read_idx_images(const std::string& path, int crop_border = 0,
                                int max_images = -1);

}  // namespace gradlab
