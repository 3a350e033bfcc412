#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace vrsa {

/// Dense row-major matrix used for every parameter and activation.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// A named float64 tensor as stored in a checkpoint.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  bool operator==(const Tensor&) const = default;
};

/// Ordered name -> tensor map; the serialized form of a model.
using ParamSet = std::map<std::string, Tensor>;

/// Mutable view of one parameter inside a typed model struct.
struct ParamView {
  std::string name;
  Mat* value;
  std::vector<std::uint32_t> dims;
};

}  // namespace vrsa
