#pragma once

#include <Eigen/Dense>

namespace pbs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace pbs
