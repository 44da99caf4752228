#pragma once

#include <Eigen/Dense>

namespace tsproto {

using Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using IntMatrix = Eigen::MatrixXi;

}  // namespace tsproto
