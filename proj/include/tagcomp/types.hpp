#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace tagcomp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Seed = std::uint64_t;

}  // namespace tagcomp
