#include "peps/implicit.hpp"

#include <map>

#include "peps/einsum.hpp"
#include "peps/errors.hpp"

namespace peps {

ImplicitOperator::ImplicitOperator(std::vector<Tensor> tensors, std::vector<std::string> labels,
                                   std::string row_labels, std::string col_labels)
    : tensors_(std::move(tensors)),
      labels_(std::move(labels)),
      row_labels_(std::move(row_labels)),
      col_labels_(std::move(col_labels)) {
  if (tensors_.size() != labels_.size()) throw ShapeError("one label string per tensor required");
  std::map<char, std::size_t> ext;
  std::map<char, int> count;
  for (std::size_t t = 0; t < tensors_.size(); ++t) {
    if (labels_[t].size() != tensors_[t].order()) {
      throw ShapeError("label string '" + labels_[t] + "' does not match tensor order");
    }
    for (std::size_t a = 0; a < labels_[t].size(); ++a) {
      char c = labels_[t][a];
      auto [it, inserted] = ext.emplace(c, tensors_[t].extent(a));
      if (!inserted && it->second != tensors_[t].extent(a)) {
        throw ShapeError(std::string("extent mismatch on label '") + c + "'");
      }
      ++count[c];
    }
  }
  for (char c : row_labels_) {
    if (col_labels_.find(c) != std::string::npos) {
      throw ShapeError(std::string("label '") + c + "' in both row and column groups");
    }
  }
  auto check_open = [&](const std::string& group) {
    for (char c : group) {
      auto it = count.find(c);
      if (it == count.end() || it->second != 1) {
        throw ShapeError(std::string("open label '") + c + "' must appear exactly once");
      }
    }
  };
  check_open(row_labels_);
  check_open(col_labels_);
  for (char c : row_labels_) row_shape_.push_back(ext[c]);
  for (char c : col_labels_) col_shape_.push_back(ext[c]);
}

std::size_t ImplicitOperator::row_extent() const { return shape_size(row_shape_); }
std::size_t ImplicitOperator::col_extent() const { return shape_size(col_shape_); }

char ImplicitOperator::fresh_label() const {
  std::string used = row_labels_ + col_labels_;
  for (const auto& l : labels_) used += l;
  for (char c = 'A'; c <= 'Z'; ++c) {
    if (used.find(c) == std::string::npos) return c;
  }
  for (char c = 'a'; c <= 'z'; ++c) {
    if (used.find(c) == std::string::npos) return c;
  }
  throw ShapeError("no free label available");
}

Tensor ImplicitOperator::apply(const Tensor& q) const {
  if (q.order() != col_shape_.size() + 1) {
    throw ShapeError("probe order must be column order + 1");
  }
  for (std::size_t a = 0; a < col_shape_.size(); ++a) {
    if (q.extent(a) != col_shape_[a]) {
      throw ShapeError("probe shape mismatch on column axis " + std::to_string(a));
    }
  }
  char free = fresh_label();
  std::vector<Tensor> net = tensors_;
  std::vector<std::string> lbl = labels_;
  net.push_back(q);
  lbl.push_back(col_labels_ + free);
  return detail::contract_network(std::move(net), std::move(lbl), row_labels_ + free);
}

Tensor ImplicitOperator::adjoint_apply(const Tensor& p) const {
  if (p.order() != row_shape_.size() + 1) {
    throw ShapeError("probe order must be row order + 1");
  }
  for (std::size_t a = 0; a < row_shape_.size(); ++a) {
    if (p.extent(a) != row_shape_[a]) {
      throw ShapeError("probe shape mismatch on row axis " + std::to_string(a));
    }
  }
  char free = fresh_label();
  std::vector<Tensor> net;
  net.reserve(tensors_.size() + 1);
  std::vector<std::string> lbl = labels_;
  for (const auto& t : tensors_) net.push_back(t.conj());
  net.push_back(p);
  lbl.push_back(row_labels_ + free);
  return detail::contract_network(std::move(net), std::move(lbl), col_labels_ + free);
}

Tensor ImplicitOperator::materialize() const {
  return detail::contract_network(tensors_, labels_, row_labels_ + col_labels_);
}

}  // namespace peps
