#pragma once

#include <Eigen/Dense>

namespace mildlab {

// State vector on the d-dimensional truncation of H.
using HVector = Eigen::VectorXd;

// One sample path: row k is the state at grid time t_k.
using DiscretePath = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace mildlab
