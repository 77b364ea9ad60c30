// Synthetic paired source/target datasets with controllable covariate,
// label, and concept shift.
//
// Data are Gaussian mixtures: class c of a domain draws from
//   N(rotate(class_mean_c) + mean_shift, (class_scale_c + noise_scale)^2 I)
// where rotate() applies the concept-shift angle in the first two feature
// dimensions. Class counts follow deterministic largest-remainder rounding
// of n * pi, so empirical proportions are exact by construction.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "iada/array.hpp"
#include "iada/csv.hpp"
#include "iada/errors.hpp"
#include "iada/rng.hpp"

namespace iada {

struct DomainSpec {
  long n = 0;
  std::size_t d = 0;
  std::size_t C = 0;
  std::vector<double> pi;                  // class proportions, length C
  std::vector<std::vector<double>> class_means;  // C x d
  std::vector<double> class_scales;        // length C, positive
  std::vector<double> mean_shift;          // length d (covariate shift)
  double noise_scale = 0.0;                // quality degradation
  double concept_rotation = 0.0;           // radians, applied to class means
  std::uint64_t seed = 0;

  void validate() const {
    if (C == 0 || d == 0) throw ValueError("DomainSpec: C and d must be positive");
    if (n < static_cast<long>(C))
      throw ValueError("DomainSpec: n must be at least C");
    if (pi.size() != C) throw ValueError("DomainSpec: pi length != C");
    double s = 0.0;
    for (double p : pi) {
      if (p <= 0.0 || p >= 1.0)
        throw ValueError("DomainSpec: pi entries must lie strictly in (0,1)");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9)
      throw ValueError("DomainSpec: pi must sum to 1 (got " + fmt17(s) + ")");
    if (class_means.size() != C) throw ValueError("DomainSpec: class_means rows != C");
    for (const auto& m : class_means)
      if (m.size() != d) throw ValueError("DomainSpec: class_means cols != d");
    if (class_scales.size() != C) throw ValueError("DomainSpec: class_scales length != C");
    for (double cs : class_scales)
      if (cs <= 0.0) throw ValueError("DomainSpec: class_scales must be positive");
    if (mean_shift.size() != d) throw ValueError("DomainSpec: mean_shift length != d");
    if (noise_scale < 0.0) throw ValueError("DomainSpec: negative noise_scale");
    if (concept_rotation != 0.0 && d < 2)
      throw ValueError("DomainSpec: concept_rotation requires d >= 2");
  }
};

struct LabeledDomain {
  Array X;                        // n x d
  std::vector<int> y;             // labels in {1..C}
  std::vector<long> class_counts; // length C
  std::vector<double> pi_empirical;
  std::size_t num_classes = 0;

  long n() const { return static_cast<long>(y.size()); }
  std::size_t d() const { return X.cols(); }

  void refresh_counts(std::size_t C) {
    num_classes = C;
    class_counts.assign(C, 0);
    for (int label : y) {
      if (label < 1 || label > static_cast<int>(C))
        throw ValueError("LabeledDomain: label " + std::to_string(label) +
                         " out of range 1.." + std::to_string(C));
      ++class_counts[static_cast<std::size_t>(label - 1)];
    }
    pi_empirical.assign(C, 0.0);
    for (std::size_t c = 0; c < C; ++c)
      pi_empirical[c] = static_cast<double>(class_counts[c]) /
                        static_cast<double>(y.size());
  }
};

// Target domain as seen by training code: features only. The generating
// labels are retained behind an explicit evaluation-only accessor.
class UnlabeledDomain {
 public:
  UnlabeledDomain() = default;
  UnlabeledDomain(Array X, std::vector<int> hidden_y, std::vector<double> pi_true,
                  std::size_t C)
      : X(std::move(X)), pi_true(std::move(pi_true)), num_classes(C),
        hidden_y_(std::move(hidden_y)) {}

  Array X;                      // n x d, training-visible
  std::vector<double> pi_true;  // generating proportions
  std::size_t num_classes = 0;

  long n() const { return static_cast<long>(X.rows()); }

  // Quarantined labels: for the evaluation harness only. Training-path code
  // must not call this; the trainer API accepts only X.
  LabeledDomain evaluation_view() const {
    LabeledDomain dom;
    dom.X = X;
    dom.y = hidden_y_;
    dom.refresh_counts(num_classes);
    return dom;
  }

  const std::vector<int>& hidden_labels_for_eval() const { return hidden_y_; }

 private:
  std::vector<int> hidden_y_;
};

namespace detail {

inline std::vector<double> rotated_mean(const std::vector<double>& mean,
                                        double angle) {
  std::vector<double> m = mean;
  if (angle != 0.0 && m.size() >= 2) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double x0 = m[0], x1 = m[1];
    m[0] = c * x0 - s * x1;
    m[1] = s * x0 + c * x1;
  }
  return m;
}

struct GeneratedRows {
  Array X;
  std::vector<int> y;
  std::vector<long> counts;
};

inline GeneratedRows generate_domain(const DomainSpec& spec) {
  spec.validate();
  std::vector<double> ideal(spec.C);
  for (std::size_t c = 0; c < spec.C; ++c) ideal[c] = spec.pi[c];
  const std::vector<long> counts = largest_remainder(ideal, spec.n);
  for (std::size_t c = 0; c < spec.C; ++c)
    if (counts[c] == 0)
      throw ValueError("generate_pair: class " + std::to_string(c + 1) +
                       " rounds to zero samples (n=" + std::to_string(spec.n) +
                       ", pi=" + fmt17(spec.pi[c]) + ")");

  Rng rng(spec.seed);
  GeneratedRows out;
  out.counts = counts;
  out.X = Array(Shape{static_cast<std::size_t>(spec.n), spec.d}, 0.0);
  out.y.resize(static_cast<std::size_t>(spec.n));

  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.C; ++c) {
    const std::vector<double> mu = rotated_mean(spec.class_means[c],
                                                spec.concept_rotation);
    const double sd = spec.class_scales[c] + spec.noise_scale;
    for (long k = 0; k < counts[c]; ++k, ++row) {
      for (std::size_t j = 0; j < spec.d; ++j)
        out.X.at(row, j) = mu[j] + spec.mean_shift[j] + sd * rng.normal();
      out.y[row] = static_cast<int>(c + 1);
    }
  }

  // Seeded shuffle so rows are not class-blocked.
  std::vector<std::size_t> perm(static_cast<std::size_t>(spec.n));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Array Xs(out.X.shape(), 0.0);
  std::vector<int> ys(out.y.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    ys[i] = out.y[perm[i]];
    for (std::size_t j = 0; j < spec.d; ++j) Xs.at(i, j) = out.X.at(perm[i], j);
  }
  out.X = std::move(Xs);
  out.y = std::move(ys);
  return out;
}

}  // namespace detail

inline std::pair<LabeledDomain, UnlabeledDomain> generate_pair(
    const DomainSpec& src, const DomainSpec& tgt) {
  if (src.d != tgt.d)
    throw ValueError("generate_pair: feature dims differ (" +
                     std::to_string(src.d) + " vs " + std::to_string(tgt.d) + ")");
  if (src.C != tgt.C)
    throw ValueError("generate_pair: class counts differ (" +
                     std::to_string(src.C) + " vs " + std::to_string(tgt.C) + ")");

  detail::GeneratedRows s = detail::generate_domain(src);
  detail::GeneratedRows t = detail::generate_domain(tgt);

  LabeledDomain source;
  source.X = std::move(s.X);
  source.y = std::move(s.y);
  source.refresh_counts(src.C);

  std::vector<double> pi_true(tgt.C);
  for (std::size_t c = 0; c < tgt.C; ++c)
    pi_true[c] = static_cast<double>(t.counts[c]) / static_cast<double>(tgt.n);
  UnlabeledDomain target(std::move(t.X), std::move(t.y), std::move(pi_true),
                         tgt.C);
  return {std::move(source), std::move(target)};
}

// Stratified split by per-class largest-remainder apportionment. Per-class
// proportions of each split match the input within one sample per class.
inline std::vector<LabeledDomain> stratified_split(
    const LabeledDomain& dom, const std::vector<double>& fractions) {
  if (fractions.empty()) throw ValueError("stratified_split: no fractions");
  double fsum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw ValueError("stratified_split: fractions must be positive");
    fsum += f;
  }
  if (std::fabs(fsum - 1.0) > 1e-9)
    throw ValueError("stratified_split: fractions must sum to 1");

  const std::size_t C = dom.num_classes;
  const std::size_t k = fractions.size();
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < dom.y.size(); ++i)
    by_class[static_cast<std::size_t>(dom.y[i] - 1)].push_back(i);
  for (std::size_t c = 0; c < C; ++c)
    if (by_class[c].size() < k)
      throw ValueError("stratified_split: class " + std::to_string(c + 1) +
                       " has fewer samples (" + std::to_string(by_class[c].size()) +
                       ") than splits (" + std::to_string(k) + ")");

  std::vector<std::vector<std::size_t>> split_rows(k);
  for (std::size_t c = 0; c < C; ++c) {
    const std::vector<long> counts =
        largest_remainder(fractions, static_cast<long>(by_class[c].size()));
    std::size_t pos = 0;
    for (std::size_t s = 0; s < k; ++s)
      for (long j = 0; j < counts[s]; ++j)
        split_rows[s].push_back(by_class[c][pos++]);
  }

  std::vector<LabeledDomain> out(k);
  for (std::size_t s = 0; s < k; ++s) {
    std::sort(split_rows[s].begin(), split_rows[s].end());
    LabeledDomain part;
    part.X = Array(Shape{split_rows[s].size(), dom.d()}, 0.0);
    part.y.resize(split_rows[s].size());
    for (std::size_t i = 0; i < split_rows[s].size(); ++i) {
      part.y[i] = dom.y[split_rows[s][i]];
      for (std::size_t j = 0; j < dom.d(); ++j)
        part.X.at(i, j) = dom.X.at(split_rows[s][i], j);
    }
    part.refresh_counts(C);
    out[s] = std::move(part);
  }
  return out;
}

// Second view for consistency regularization: additive zero-mean Gaussian
// noise, deterministic under the caller's random stream.
inline Array augment_view(const Array& X, double noise_std, Rng& rng) {
  Array out = X;
  if (noise_std == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += noise_std * rng.normal();
  return out;
}

// ---------------------------------------------------------------------------
// CSV interchange. Header: f1..fd,label,domain. Labels are empty for
// unlabeled rows; hidden labels live in a sibling .labels.csv.
// ---------------------------------------------------------------------------

inline void save_labeled_csv(const LabeledDomain& dom, const std::string& path,
                             const std::string& domain_tag) {
  CsvWriter w(path);
  std::vector<std::string> header;
  for (std::size_t j = 0; j < dom.d(); ++j)
    header.push_back("f" + std::to_string(j + 1));
  header.push_back("label");
  header.push_back("domain");
  w.row(header);
  for (long i = 0; i < dom.n(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < dom.d(); ++j)
      row.push_back(fmt17(dom.X.at(static_cast<std::size_t>(i), j)));
    row.push_back(std::to_string(dom.y[static_cast<std::size_t>(i)]));
    row.push_back(domain_tag);
    w.row(row);
  }
}

inline void save_unlabeled_csv(const UnlabeledDomain& dom,
                               const std::string& path,
                               const std::string& labels_path,
                               const std::string& domain_tag) {
  CsvWriter w(path);
  std::vector<std::string> header;
  const std::size_t d = dom.X.cols();
  for (std::size_t j = 0; j < d; ++j) header.push_back("f" + std::to_string(j + 1));
  header.push_back("label");
  header.push_back("domain");
  w.row(header);
  for (long i = 0; i < dom.n(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < d; ++j)
      row.push_back(fmt17(dom.X.at(static_cast<std::size_t>(i), j)));
    row.emplace_back();  // unlabeled in the training-visible file
    row.push_back(domain_tag);
    w.row(row);
  }
  CsvWriter lw(labels_path);
  lw.row({"label"});
  for (int label : dom.hidden_labels_for_eval())
    lw.row({std::to_string(label)});
}

inline LabeledDomain load_labeled_csv(const std::string& path,
                                      std::size_t num_classes) {
  const auto rows = read_csv(path);
  if (rows.size() < 2) throw IoError("dataset file has no data rows: " + path);
  const std::size_t ncols = rows[0].size();
  if (ncols < 3) throw IoError("dataset header too short: " + path);
  const std::size_t d = ncols - 2;
  LabeledDomain dom;
  dom.X = Array(Shape{rows.size() - 1, d}, 0.0);
  dom.y.resize(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != ncols)
      throw IoError("ragged row " + std::to_string(i + 1) + " in " + path);
    for (std::size_t j = 0; j < d; ++j)
      dom.X.at(i - 1, j) = parse_double(rows[i][j]);
    dom.y[i - 1] = static_cast<int>(parse_long(rows[i][d]));
  }
  dom.refresh_counts(num_classes);
  return dom;
}

inline UnlabeledDomain load_unlabeled_csv(const std::string& path,
                                          const std::string& labels_path,
                                          std::size_t num_classes) {
  const auto rows = read_csv(path);
  if (rows.size() < 2) throw IoError("dataset file has no data rows: " + path);
  const std::size_t ncols = rows[0].size();
  if (ncols < 3) throw IoError("dataset header too short: " + path);
  const std::size_t d = ncols - 2;
  Array X(Shape{rows.size() - 1, d}, 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != ncols)
      throw IoError("ragged row " + std::to_string(i + 1) + " in " + path);
    for (std::size_t j = 0; j < d; ++j)
      X.at(i - 1, j) = parse_double(rows[i][j]);
    if (!rows[i][d].empty())
      throw IoError("unlabeled file carries labels: " + path);
  }

  const auto lrows = read_csv(labels_path);
  if (lrows.size() != rows.size())
    throw IoError("label sidecar row count mismatch: " + labels_path);
  std::vector<int> hidden(rows.size() - 1);
  std::vector<long> counts(num_classes, 0);
  for (std::size_t i = 1; i < lrows.size(); ++i) {
    hidden[i - 1] = static_cast<int>(parse_long(lrows[i][0]));
    if (hidden[i - 1] < 1 || hidden[i - 1] > static_cast<int>(num_classes))
      throw IoError("label out of range in " + labels_path);
    ++counts[static_cast<std::size_t>(hidden[i - 1] - 1)];
  }
  std::vector<double> pi(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c)
    pi[c] = static_cast<double>(counts[c]) / static_cast<double>(hidden.size());
  return UnlabeledDomain(std::move(X), std::move(hidden), std::move(pi),
                         num_classes);
}

}  // namespace iada
