#pragma once

#include <string>
#include <vector>

#include "peps/tensor.hpp"

namespace peps {

/// A linear map given as an uncontracted tensor network.  Open labels are
/// partitioned into row labels (codomain) and column labels (domain); labels
/// appearing twice among the inputs are internal bonds.  The map is applied
/// to blocks of vectors without ever materializing the full operator; the
/// contraction order is chosen greedily to keep intermediates small.
class ImplicitOperator {
 public:
  ImplicitOperator(std::vector<Tensor> tensors, std::vector<std::string> labels,
                   std::string row_labels, std::string col_labels);

  const Shape& row_shape() const { return row_shape_; }
  const Shape& col_shape() const { return col_shape_; }
  std::size_t row_extent() const;
  std::size_t col_extent() const;

  /// q has shape (col_shape..., p); returns (row_shape..., p).
  Tensor apply(const Tensor& q) const;
  /// p has shape (row_shape..., p); returns A^* p with shape (col_shape..., p).
  Tensor adjoint_apply(const Tensor& p) const;
  /// Contracts the whole network into (row_shape..., col_shape...).
  Tensor materialize() const;

  const std::vector<Tensor>& tensors() const { return tensors_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& row_labels() const { return row_labels_; }
  const std::string& col_labels() const { return col_labels_; }

 private:
  char fresh_label() const;

  std::vector<Tensor> tensors_;
  std::vector<std::string> labels_;
  std::string row_labels_, col_labels_;
  Shape row_shape_, col_shape_;
};

}  // namespace peps
