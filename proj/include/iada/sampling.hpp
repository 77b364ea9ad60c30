// Class-balanced batch construction.
//
// ClassIndex keeps one order-statistic tree (Fenwick tree over presence
// flags) per class, so rank selection and removal are logarithmic in class
// size. Batches draw without replacement within a batch (when the class is
// large enough) and with replacement across batches.
//
// allocate_batches implements the trade-off rule
//   b_i = B * sqrt(min(pi_s_i, pi_t_i) / sum_j min(pi_s_j, pi_t_j))
// in two modes: raw (the formula verbatim, whose sum generally differs from
// B) and normalized (rescaled so the realized integers sum to B exactly,
// with a floor of one sample per class).
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "iada/errors.hpp"
#include "iada/rng.hpp"

namespace iada {

namespace detail {

// Fenwick tree over 0/1 presence flags with rank selection.
class PresenceTree {
 public:
  explicit PresenceTree(std::size_t n) : n_(n), tree_(n + 1, 0) {
    for (std::size_t i = 1; i <= n_; ++i) {
      tree_[i] += 1;
      const std::size_t parent = i + (i & (~i + 1));
      if (parent <= n_) tree_[parent] += tree_[i];
    }
    count_ = n_;
  }

  std::size_t count() const { return count_; }

  void remove(std::size_t idx) {  // idx in [0, n)
    update(idx + 1, -1);
    --count_;
  }

  void restore(std::size_t idx) {
    update(idx + 1, +1);
    ++count_;
  }

  // Position (0-based) of the k-th present element, k in [0, count).
  std::size_t select(std::size_t k) const {
    std::size_t pos = 0;
    std::size_t rem = k + 1;
    std::size_t mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask > 0; mask >>= 1) {
      const std::size_t next = pos + mask;
      if (next <= n_ && static_cast<std::size_t>(tree_[next]) < rem) {
        pos = next;
        rem -= static_cast<std::size_t>(tree_[next]);
      }
    }
    return pos;  // pos is the 0-based index whose 1-based position is pos+1
  }

 private:
  void update(std::size_t i, int delta) {
    for (; i <= n_; i += i & (~i + 1)) tree_[i] += delta;
  }

  std::size_t n_;
  std::size_t count_ = 0;
  std::vector<int> tree_;
};

}  // namespace detail

// Per-class ordered index over sample positions.
class ClassIndex {
 public:
  ClassIndex(const std::vector<int>& labels, std::size_t num_classes)
      : positions_(num_classes) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int label = labels[i];
      if (label < 1 || label > static_cast<int>(num_classes))
        throw ValueError("ClassIndex: label " + std::to_string(label) +
                         " out of range");
      positions_[static_cast<std::size_t>(label - 1)].push_back(i);
    }
  }

  std::size_t num_classes() const { return positions_.size(); }

  long class_count(std::size_t c) const {
    return static_cast<long>(positions_[c].size());
  }

  const std::vector<std::size_t>& class_positions(std::size_t c) const {
    return positions_[c];
  }

 private:
  std::vector<std::vector<std::size_t>> positions_;
};

struct BatchAllocation {
  std::vector<double> b;   // ideal allocation
  std::vector<long> b_int; // realized integers (normalized mode only)
  long B = 0;
  bool normalized = false;

  double raw_sum() const {
    return std::accumulate(b.begin(), b.end(), 0.0);
  }
};

inline void validate_proportions(const std::vector<double>& pi,
                                 const std::string& name) {
  if (pi.empty()) throw ValueError(name + ": empty proportion vector");
  double s = 0.0;
  for (double p : pi) {
    if (p <= 0.0 || p >= 1.0)
      throw ValueError(name + ": proportions must lie strictly in (0,1)");
    s += p;
  }
  if (std::fabs(s - 1.0) > 1e-9)
    throw ValueError(name + ": proportions must sum to 1");
}

inline BatchAllocation allocate_batches(const std::vector<double>& pi_s,
                                        const std::vector<double>& pi_t,
                                        long B, bool normalized) {
  validate_proportions(pi_s, "allocate_batches pi_s");
  validate_proportions(pi_t, "allocate_batches pi_t");
  if (pi_s.size() != pi_t.size())
    throw ValueError("allocate_batches: proportion vectors differ in length");
  const std::size_t C = pi_s.size();
  if (B < static_cast<long>(C))
    throw ValueError("allocate_batches: budget B=" + std::to_string(B) +
                     " below class count C=" + std::to_string(C));

  double wsum = 0.0;
  std::vector<double> w(C);
  for (std::size_t i = 0; i < C; ++i) {
    w[i] = std::min(pi_s[i], pi_t[i]);
    wsum += w[i];
  }

  BatchAllocation alloc;
  alloc.B = B;
  alloc.normalized = normalized;
  alloc.b.resize(C);
  for (std::size_t i = 0; i < C; ++i)
    alloc.b[i] = static_cast<double>(B) * std::sqrt(w[i] / wsum);

  if (normalized) {
    const double raw_sum = alloc.raw_sum();
    std::vector<double> rescaled(C);
    for (std::size_t i = 0; i < C; ++i)
      rescaled[i] = alloc.b[i] * static_cast<double>(B) / raw_sum;
    alloc.b_int = largest_remainder_min_one(rescaled, B);
  }
  return alloc;
}

// Stateful sampler bound to one ClassIndex. Keeps one presence tree per
// class across batches: a draw removes b_int[c] entries (without
// replacement within the batch) and restores them afterwards, so every
// selection and removal stays logarithmic in class size.
class BatchSampler {
 public:
  explicit BatchSampler(const ClassIndex& idx) : idx_(idx) {
    trees_.reserve(idx.num_classes());
    for (std::size_t c = 0; c < idx.num_classes(); ++c)
      trees_.emplace_back(idx.class_positions(c).size());
  }

  std::vector<std::size_t> draw(const BatchAllocation& alloc, Rng& rng) {
    if (!alloc.normalized || alloc.b_int.empty())
      throw ValueError("BatchSampler: allocation must be normalized");
    if (alloc.b_int.size() != idx_.num_classes())
      throw ValueError("BatchSampler: allocation class count mismatch");

    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(alloc.B));
    std::vector<std::size_t> removed;
    for (std::size_t c = 0; c < idx_.num_classes(); ++c) {
      const long need = alloc.b_int[c];
      const long have = idx_.class_count(c);
      if (need > 0 && have == 0)
        throw ValueError("BatchSampler: class " + std::to_string(c + 1) +
                         " is empty but allocated " + std::to_string(need));
      const auto& pos = idx_.class_positions(c);
      if (need <= have) {
        removed.clear();
        for (long k = 0; k < need; ++k) {
          const std::size_t r =
              static_cast<std::size_t>(rng.uniform_int(trees_[c].count()));
          const std::size_t local = trees_[c].select(r);
          trees_[c].remove(local);
          removed.push_back(local);
          batch.push_back(pos[local]);
        }
        for (std::size_t local : removed) trees_[c].restore(local);
      } else {
        // Class smaller than its allocation: fall back to with-replacement.
        for (long k = 0; k < need; ++k)
          batch.push_back(
              pos[static_cast<std::size_t>(rng.uniform_int(pos.size()))]);
      }
    }
    return batch;
  }

 private:
  const ClassIndex& idx_;
  std::vector<detail::PresenceTree> trees_;
};

// One-shot convenience form of BatchSampler::draw.
inline std::vector<std::size_t> sample_balanced_batch(const ClassIndex& idx,
                                                      const BatchAllocation& alloc,
                                                      Rng& rng) {
  BatchSampler sampler(idx);
  return sampler.draw(alloc, rng);
}

}  // namespace iada
