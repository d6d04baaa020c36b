#pragma once

#include <span>
#include <string>
#include <vector>

#include "peps/tensor.hpp"

namespace peps {

/// Labelled contraction in Einstein convention: labels shared between inputs
/// (and absent from the output) are summed.  Example: "abc,cd->abd".
struct ContractionSpec {
  std::vector<std::string> inputs;
  std::string output;

  /// Parses "ij,jk->ik".  The arrow and output are mandatory.
  static ContractionSpec parse(const std::string& text);
};

/// Contracts a tensor network.  Multi-tensor networks are reduced pairwise in
/// greedy minimum-intermediate-size order (ties broken by smaller flop count,
/// then input position); each pairwise step is lowered to GEMM and reports
/// 2 * (product of its bound and free extents) flops.
Tensor contract(const ContractionSpec& spec, std::span<const Tensor> tensors);
Tensor contract(const std::string& spec, std::span<const Tensor> tensors);
Tensor contract(const std::string& spec, const Tensor& a);
Tensor contract(const std::string& spec, const Tensor& a, const Tensor& b);
Tensor contract(const std::string& spec, const Tensor& a, const Tensor& b, const Tensor& c);

namespace detail {

/// One pairwise contraction step: sums labels shared by a and b that are not
/// in `keep`, pre-reduces labels unique to one tensor that are not in `keep`,
/// and returns the result with its label string (keep-shared labels first,
/// then remaining a-labels, then b-labels).
std::pair<Tensor, std::string> pairwise_contract(const Tensor& a, const std::string& la,
                                                 const Tensor& b, const std::string& lb,
                                                 const std::string& keep);

/// Reduces a single tensor to exactly the labels of `out` in order: takes
/// diagonals of repeated labels, sums labels absent from `out`, permutes.
Tensor reduce_single(const Tensor& t, const std::string& labels, const std::string& out);

/// Greedy pairwise contraction of a labelled network to `output` label order.
Tensor contract_network(std::vector<Tensor> tensors, std::vector<std::string> labels,
                        const std::string& output);

}  // namespace detail

}  // namespace peps
