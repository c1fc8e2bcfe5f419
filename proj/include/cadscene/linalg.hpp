#pragma once

#include <Eigen/Dense>

namespace cadscene {

// Feature tables are stored one row per point/voxel.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

}  // namespace cadscene
