#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace locrobust {

/// One data point: outcome vector y and (possibly empty) covariates x.
struct Observation {
  Eigen::VectorXd y;
  Eigen::VectorXd x;
};

/// FNV-1a over the raw bytes of every y and x.
std::uint64_t dataset_hash(const std::vector<Observation>& data);

}  // namespace locrobust
