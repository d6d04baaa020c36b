#include "peps/einsum.hpp"

#include <cblas.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>

#include "peps/backend.hpp"
#include "peps/errors.hpp"
#include "peps/instrument.hpp"

namespace peps {

namespace {

using detail::reduce_single;

std::map<char, std::size_t> label_extents(std::span<const Tensor> tensors,
                                          const std::vector<std::string>& labels) {
  std::map<char, std::size_t> ext;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    if (labels[t].size() != tensors[t].order()) {
      throw ShapeError("label string '" + labels[t] + "' does not match tensor order " +
                       std::to_string(tensors[t].order()));
    }
    for (std::size_t a = 0; a < labels[t].size(); ++a) {
      char c = labels[t][a];
      std::size_t e = tensors[t].extent(a);
      auto [it, inserted] = ext.emplace(c, e);
      if (!inserted && it->second != e) {
        throw ShapeError(std::string("extent mismatch on label '") + c + "': " +
                         std::to_string(it->second) + " vs " + std::to_string(e));
      }
    }
  }
  return ext;
}

void gemm(const cplx* a, const cplx* b, cplx* c, std::size_t m, std::size_t k, std::size_t n) {
  if (backend().strict_deterministic) {
    // Serial reduction: fixed summation order independent of BLAS threading.
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        cplx s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
        c[i * n + j] = s;
      }
    }
    return;
  }
  const cplx one(1.0, 0.0), zero(0.0, 0.0);
  cblas_zgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), &one, a, static_cast<int>(k), b, static_cast<int>(n), &zero, c,
              static_cast<int>(n));
}

}  // namespace

ContractionSpec ContractionSpec::parse(const std::string& text) {
  auto arrow = text.find("->");
  if (arrow == std::string::npos) throw ShapeError("contraction spec needs '->': " + text);
  ContractionSpec spec;
  spec.output = text.substr(arrow + 2);
  std::string lhs = text.substr(0, arrow);
  std::string cur;
  for (char c : lhs) {
    if (c == ',') {
      spec.inputs.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  spec.inputs.push_back(cur);
  return spec;
}

namespace detail {

Tensor reduce_single(const Tensor& t, const std::string& labels, const std::string& out) {
  Tensor cur = t;
  std::string cur_labels = labels;

  // Diagonal of repeated labels.
  for (std::size_t i = 0; i < cur_labels.size(); ++i) {
    for (std::size_t j = i + 1; j < cur_labels.size(); ++j) {
      if (cur_labels[i] != cur_labels[j]) continue;
      // Extract diagonal over axes i and j (j removed).
      Shape shape = cur.shape();
      Shape out_shape;
      std::string out_labels;
      for (std::size_t a = 0; a < shape.size(); ++a) {
        if (a == j) continue;
        out_shape.push_back(shape[a]);
        out_labels += cur_labels[a];
      }
      Tensor next(out_shape);
      std::vector<std::size_t> idx(out_shape.size(), 0);
      std::vector<std::size_t> src_idx(shape.size(), 0);
      const std::size_t total = next.size();
      for (std::size_t lin = 0; lin < total; ++lin) {
        for (std::size_t a = 0, o = 0; a < shape.size(); ++a) {
          if (a == j) continue;
          src_idx[a] = idx[o++];
        }
        src_idx[j] = src_idx[i];
        next.data()[lin] = cur(std::span<const std::size_t>(src_idx));
        for (std::size_t a = out_shape.size(); a-- > 0;) {
          if (++idx[a] < out_shape[a]) break;
          idx[a] = 0;
        }
      }
      cur = std::move(next);
      cur_labels = out_labels;
      j = i;  // rescan for further repeats of this label
    }
  }

  // Sum over labels not requested.
  std::string summed;
  for (char c : cur_labels) {
    if (out.find(c) == std::string::npos) summed += c;
  }
  if (!summed.empty()) {
    std::vector<std::size_t> perm;
    Shape kept_shape;
    std::string kept_labels;
    for (std::size_t a = 0; a < cur_labels.size(); ++a) {
      if (out.find(cur_labels[a]) != std::string::npos) {
        perm.push_back(a);
        kept_shape.push_back(cur.extent(a));
        kept_labels += cur_labels[a];
      }
    }
    std::size_t sum_size = 1;
    for (std::size_t a = 0; a < cur_labels.size(); ++a) {
      if (out.find(cur_labels[a]) == std::string::npos) {
        perm.push_back(a);
        sum_size *= cur.extent(a);
      }
    }
    Tensor p = cur.permute(std::span<const std::size_t>(perm));
    Tensor next(kept_shape);
    const std::size_t kept = next.size();
    auto src = p.data();
    for (std::size_t i = 0; i < kept; ++i) {
      cplx s = 0.0;
      for (std::size_t l = 0; l < sum_size; ++l) s += src[i * sum_size + l];
      next.data()[i] = s;
    }
    instr::add_flops(kept * sum_size);
    cur = std::move(next);
    cur_labels = kept_labels;
  }

  // Final permutation into the requested order.
  if (cur_labels != out) {
    std::vector<std::size_t> perm;
    for (char c : out) {
      auto pos = cur_labels.find(c);
      if (pos == std::string::npos) throw ShapeError(std::string("output label '") + c + "' missing");
      perm.push_back(pos);
    }
    cur = cur.permute(std::span<const std::size_t>(perm));
  }
  return cur;
}

std::pair<Tensor, std::string> pairwise_contract(const Tensor& a, const std::string& la,
                                                 const Tensor& b, const std::string& lb,
                                                 const std::string& keep) {
  // Pre-reduce each side: diagonals and labels nobody needs.
  auto wanted = [&](const std::string& self, const std::string& other) {
    std::string w;
    for (char c : self) {
      if (w.find(c) != std::string::npos) continue;
      if (other.find(c) != std::string::npos || keep.find(c) != std::string::npos) w += c;
    }
    return w;
  };
  std::string ra_labels = wanted(la, lb);
  std::string rb_labels = wanted(lb, la);
  Tensor ra = (ra_labels == la) ? a : reduce_single(a, la, ra_labels);
  Tensor rb = (rb_labels == lb) ? b : reduce_single(b, lb, rb_labels);

  std::string batch, con, free_a, free_b;
  for (char c : ra_labels) {
    if (rb_labels.find(c) != std::string::npos) {
      if (keep.find(c) != std::string::npos) batch += c;
      else con += c;
    } else {
      free_a += c;
    }
  }
  for (char c : rb_labels) {
    if (ra_labels.find(c) == std::string::npos) free_b += c;
  }

  Tensor pa = reduce_single(ra, ra_labels, batch + free_a + con);
  Tensor pb = reduce_single(rb, rb_labels, batch + con + free_b);

  auto extent_of = [&](const Tensor& t, const std::string& lbl, const std::string& group) {
    std::size_t e = 1;
    for (char c : group) e *= t.extent(lbl.find(c));
    return e;
  };
  const std::size_t nb = extent_of(pa, batch + free_a + con, batch);
  const std::size_t m = extent_of(pa, batch + free_a + con, free_a);
  const std::size_t k = extent_of(pa, batch + free_a + con, con);
  const std::size_t n = extent_of(pb, batch + con + free_b, free_b);

  Shape out_shape;
  std::string out_labels = batch + free_a + free_b;
  for (char c : batch) out_shape.push_back(pa.extent((batch + free_a + con).find(c)));
  for (char c : free_a) out_shape.push_back(pa.extent((batch + free_a + con).find(c)));
  for (char c : free_b) out_shape.push_back(pb.extent((batch + con + free_b).find(c)));

  Tensor out(out_shape);
  const cplx* pad = pa.data().data();
  const cplx* pbd = pb.data().data();
  cplx* pod = out.data().data();
  for (std::size_t bi = 0; bi < nb; ++bi) {
    gemm(pad + bi * m * k, pbd + bi * k * n, pod + bi * m * n, m, k, n);
  }
  instr::add_flops(2ull * nb * m * k * n);
  instr::record_intermediate(out.size());
  return {std::move(out), std::move(out_labels)};
}

namespace {

/// Exact contraction-order search over subsets for small networks: minimizes
/// the total pairwise flop count (ties broken by the largest intermediate).
/// The networks arising in this library have at most six tensors, so the
/// 3^n subset scan is negligible.
struct PlanEntry {
  std::uint64_t flops = 0;
  std::uint64_t peak = 0;
  unsigned left = 0, right = 0;  // subset masks; 0 = leaf
};

std::vector<PlanEntry> plan_order(const std::vector<std::string>& labels,
                                  const std::vector<std::map<char, std::size_t>>& extents,
                                  const std::string& output, std::size_t n) {
  // Result labels of a subset: labels used outside it or in the output.
  std::vector<std::map<char, std::size_t>> sub_labels(1u << n);
  auto result_of = [&](unsigned mask) {
    std::map<char, std::size_t> inside;
    for (std::size_t t = 0; t < n; ++t) {
      if (mask & (1u << t)) {
        for (auto [c, e] : extents[t]) inside[c] = e;
      }
    }
    std::map<char, std::size_t> res;
    for (auto [c, e] : inside) {
      bool needed = output.find(c) != std::string::npos;
      for (std::size_t t = 0; t < n && !needed; ++t) {
        if (!(mask & (1u << t))) needed = labels[t].find(c) != std::string::npos;
      }
      if (needed) res[c] = e;
    }
    return res;
  };
  for (unsigned mask = 1; mask < (1u << n); ++mask) sub_labels[mask] = result_of(mask);

  std::vector<PlanEntry> best(1u << n);
  std::vector<bool> done(1u << n, false);
  for (std::size_t t = 0; t < n; ++t) done[1u << t] = true;

  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    if (done[mask]) continue;
    PlanEntry b;
    b.flops = UINT64_MAX;
    for (unsigned left = (mask - 1) & mask; left; left = (left - 1) & mask) {
      unsigned right = mask ^ left;
      if (left > right) continue;  // each split once
      // Step cost: 2 * product of the union of the two results' labels.
      std::map<char, std::size_t> uni = sub_labels[left];
      for (auto [c, e] : sub_labels[right]) uni[c] = e;
      // Labels of the pair that are internal to `mask` but present in both
      // halves get contracted; they are part of the union already via the
      // halves' result label sets.  Labels internal to a half were summed in
      // an earlier step.
      std::uint64_t step = 2;
      std::uint64_t out_size = 1;
      for (auto [c, e] : uni) {
        step *= e;
        if (sub_labels[mask].count(c)) out_size *= e;
      }
      std::uint64_t flops = step;
      std::uint64_t peak = out_size;
      if (__builtin_popcount(left) > 1) {
        flops += best[left].flops;
        peak = std::max(peak, best[left].peak);
      }
      if (__builtin_popcount(right) > 1) {
        flops += best[right].flops;
        peak = std::max(peak, best[right].peak);
      }
      if (flops < b.flops || (flops == b.flops && peak < b.peak)) {
        b.flops = flops;
        b.peak = peak;
        b.left = left;
        b.right = right;
      }
    }
    best[mask] = b;
    done[mask] = true;
  }
  return best;
}

Tensor execute_plan(const std::vector<PlanEntry>& plan, unsigned mask,
                    const std::vector<Tensor>& tensors, const std::vector<std::string>& labels,
                    const std::string& output, std::string& out_labels) {
  if (__builtin_popcount(mask) == 1) {
    std::size_t t = static_cast<std::size_t>(__builtin_ctz(mask));
    out_labels = labels[t];
    return tensors[t];
  }
  std::string ll, rl;
  Tensor lt = execute_plan(plan, plan[mask].left, tensors, labels, output, ll);
  Tensor rt = execute_plan(plan, plan[mask].right, tensors, labels, output, rl);
  // Keep set: output labels plus labels of tensors outside this subset.
  std::string keep = output;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!(mask & (1u << t))) {
      for (char c : labels[t]) {
        if (keep.find(c) == std::string::npos) keep += c;
      }
    }
  }
  auto [res, res_labels] = pairwise_contract(lt, ll, rt, rl, keep);
  out_labels = res_labels;
  return res;
}

}  // namespace

Tensor contract_network(std::vector<Tensor> tensors, std::vector<std::string> labels,
                        const std::string& output) {
  if (tensors.empty()) throw ShapeError("empty tensor network");

  if (tensors.size() > 1 && tensors.size() <= 10) {
    const std::size_t n = tensors.size();
    std::vector<std::map<char, std::size_t>> extents(n);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t a = 0; a < labels[t].size(); ++a) extents[t][labels[t][a]] = tensors[t].extent(a);
    }
    auto plan = plan_order(labels, extents, output, n);
    std::string got_labels;
    Tensor res = execute_plan(plan, (1u << n) - 1, tensors, labels, output, got_labels);
    Tensor out = reduce_single(res, got_labels, output);
    instr::record_intermediate(out.size());
    return out;
  }

  while (tensors.size() > 1) {
    // Greedy fallback: smallest intermediate first, ties by flop count.
    auto keep_for = [&](std::size_t i, std::size_t j) {
      std::string keep = output;
      for (std::size_t t = 0; t < tensors.size(); ++t) {
        if (t == i || t == j) continue;
        for (char c : labels[t]) {
          if (keep.find(c) == std::string::npos) keep += c;
        }
      }
      return keep;
    };

    std::size_t best_i = 0, best_j = 1;
    std::uint64_t best_size = UINT64_MAX, best_flops = UINT64_MAX;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      for (std::size_t j = i + 1; j < tensors.size(); ++j) {
        std::string keep = keep_for(i, j);
        std::map<char, std::size_t> ext;
        for (std::size_t a = 0; a < labels[i].size(); ++a) ext[labels[i][a]] = tensors[i].extent(a);
        for (std::size_t a = 0; a < labels[j].size(); ++a) ext[labels[j][a]] = tensors[j].extent(a);
        std::uint64_t size = 1, flops = 2;
        for (auto [c, e] : ext) {
          flops *= e;
          if (keep.find(c) != std::string::npos) size *= e;
        }
        if (size < best_size || (size == best_size && flops < best_flops)) {
          best_size = size;
          best_flops = flops;
          best_i = i;
          best_j = j;
        }
      }
    }

    std::string keep = keep_for(best_i, best_j);
    auto [res, res_labels] =
        pairwise_contract(tensors[best_i], labels[best_i], tensors[best_j], labels[best_j], keep);
    tensors.erase(tensors.begin() + best_j);
    labels.erase(labels.begin() + best_j);
    tensors[best_i] = std::move(res);
    labels[best_i] = std::move(res_labels);
  }
  Tensor out = reduce_single(tensors[0], labels[0], output);
  instr::record_intermediate(out.size());
  return out;
}

}  // namespace detail

Tensor contract(const ContractionSpec& spec, std::span<const Tensor> tensors) {
  if (spec.inputs.size() != tensors.size()) {
    throw ShapeError("spec lists " + std::to_string(spec.inputs.size()) + " inputs, got " +
                     std::to_string(tensors.size()) + " tensors");
  }
  auto ext = label_extents(tensors, spec.inputs);
  std::set<char> seen;
  for (char c : spec.output) {
    if (ext.find(c) == ext.end()) {
      throw ShapeError(std::string("output label '") + c + "' appears in no input");
    }
    if (!seen.insert(c).second) {
      throw ShapeError(std::string("output label '") + c + "' repeated");
    }
  }
  if (tensors.size() == 1) {
    Tensor out = detail::reduce_single(tensors[0], spec.inputs[0], spec.output);
    instr::record_intermediate(out.size());
    // Single-tensor reductions still count their summation work via reduce_single.
    return out;
  }
  return detail::contract_network(std::vector<Tensor>(tensors.begin(), tensors.end()), spec.inputs,
                                  spec.output);
}

Tensor contract(const std::string& spec, std::span<const Tensor> tensors) {
  return contract(ContractionSpec::parse(spec), tensors);
}

Tensor contract(const std::string& spec, const Tensor& a) {
  std::vector<Tensor> v{a};
  return contract(spec, std::span<const Tensor>(v));
}

Tensor contract(const std::string& spec, const Tensor& a, const Tensor& b) {
  std::vector<Tensor> v{a, b};
  return contract(spec, std::span<const Tensor>(v));
}

Tensor contract(const std::string& spec, const Tensor& a, const Tensor& b, const Tensor& c) {
  std::vector<Tensor> v{a, b, c};
  return contract(spec, std::span<const Tensor>(v));
}

}  // namespace peps
