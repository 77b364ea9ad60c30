// The three-part IADA network.
//
//   Feature extractor F_theta: shared two-layer backbone g, one adaptation
//     head h_c per class, and attention weights alpha_c(x) =
//     softmax_c(w_c^T g(x)); fused feature z = sum_c alpha_c h_c(g(x)).
//   Domain discriminator D_phi: two affine layers behind a gradient
//     reversal, sigmoid output.
//   Classifier C_psi: affine layer to class logits, decided through
//     class-adaptive thresholds tau_c = beta log(n_c / min_k n_k) + gamma,
//     with post-hoc temperature scaling for calibrated probabilities.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "iada/autodiff.hpp"
#include "iada/csv.hpp"
#include "iada/errors.hpp"
#include "iada/rng.hpp"

namespace iada {

struct ModelSizes {
  std::size_t d = 0;  // input feature dimension
  std::size_t h = 32; // hidden width
  std::size_t C = 2;  // classes

  std::size_t h2() const { return std::max<std::size_t>(1, h / 2); }
};

struct IadaParams {
  ModelSizes sizes;

  // backbone g: d -> h -> h
  ad::NodePtr W1, b1, W2, b2;
  // class heads h_c: h -> h
  std::vector<ad::NodePtr> head_W, head_b;
  // attention vectors w_c, stored as columns of an h x C matrix
  ad::NodePtr attn;
  // discriminator D_phi: h -> h/2 -> 1
  ad::NodePtr disc_W1, disc_b1, disc_W2, disc_b2;
  // classifier C_psi: h -> C
  ad::NodePtr cls_W, cls_b;
  // threshold parameters
  ad::NodePtr beta, gamma;
  // calibration temperature (fitted post-hoc, not part of the graph)
  double T = 1.0;

  static constexpr double kTemperatureFloor = 1e-3;

  std::vector<ad::NodePtr> all_arrays() const {
    std::vector<ad::NodePtr> v{W1, b1, W2, b2};
    for (const auto& w : head_W) v.push_back(w);
    for (const auto& b : head_b) v.push_back(b);
    v.push_back(attn);
    v.insert(v.end(), {disc_W1, disc_b1, disc_W2, disc_b2, cls_W, cls_b, beta, gamma});
    return v;
  }

  // Feature-extractor parameters theta (the L2-regularized set).
  std::vector<ad::NodePtr> theta() const {
    std::vector<ad::NodePtr> v{W1, b1, W2, b2};
    for (const auto& w : head_W) v.push_back(w);
    for (const auto& b : head_b) v.push_back(b);
    v.push_back(attn);
    return v;
  }

  std::vector<ad::NodePtr> discriminator_params() const {
    return {disc_W1, disc_b1, disc_W2, disc_b2};
  }

  std::vector<std::pair<std::string, ad::NodePtr>> named_arrays() const {
    std::vector<std::pair<std::string, ad::NodePtr>> v;
    v.emplace_back("backbone.W1", W1);
    v.emplace_back("backbone.b1", b1);
    v.emplace_back("backbone.W2", W2);
    v.emplace_back("backbone.b2", b2);
    for (std::size_t c = 0; c < head_W.size(); ++c) {
      v.emplace_back("head" + std::to_string(c + 1) + ".W", head_W[c]);
      v.emplace_back("head" + std::to_string(c + 1) + ".b", head_b[c]);
    }
    v.emplace_back("attention.w", attn);
    v.emplace_back("disc.W1", disc_W1);
    v.emplace_back("disc.b1", disc_b1);
    v.emplace_back("disc.W2", disc_W2);
    v.emplace_back("disc.b2", disc_b2);
    v.emplace_back("classifier.W", cls_W);
    v.emplace_back("classifier.b", cls_b);
    v.emplace_back("threshold.beta", beta);
    v.emplace_back("threshold.gamma", gamma);
    return v;
  }

  void check_finite() const {
    for (const auto& p : all_arrays())
      if (!p->value.all_finite())
        throw NumericError("IadaParams: non-finite parameter array");
  }
};

namespace detail {

inline Array uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Array a(std::move(shape), 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = bound * (2.0 * rng.uniform() - 1.0);
  return a;
}

}  // namespace detail

// Bounded fan-in initialization; beta/gamma start at the given values, T at 1.
inline IadaParams init_params(const ModelSizes& sizes, Rng& rng,
                              double beta_init = 1.0, double gamma_init = 0.0) {
  if (sizes.d == 0 || sizes.h == 0 || sizes.C == 0)
    throw ValueError("init_params: sizes must be positive");
  IadaParams p;
  p.sizes = sizes;
  const std::size_t d = sizes.d, h = sizes.h, C = sizes.C, h2 = sizes.h2();
  p.W1 = ad::leaf(detail::uniform_init(Shape{d, h}, d, rng));
  p.b1 = ad::leaf(detail::uniform_init(Shape{h}, d, rng));
  p.W2 = ad::leaf(detail::uniform_init(Shape{h, h}, h, rng));
  p.b2 = ad::leaf(detail::uniform_init(Shape{h}, h, rng));
  for (std::size_t c = 0; c < C; ++c) {
    p.head_W.push_back(ad::leaf(detail::uniform_init(Shape{h, h}, h, rng)));
    p.head_b.push_back(ad::leaf(detail::uniform_init(Shape{h}, h, rng)));
  }
  p.attn = ad::leaf(detail::uniform_init(Shape{h, C}, h, rng));
  p.disc_W1 = ad::leaf(detail::uniform_init(Shape{h, h2}, h, rng));
  p.disc_b1 = ad::leaf(detail::uniform_init(Shape{h2}, h, rng));
  p.disc_W2 = ad::leaf(detail::uniform_init(Shape{h2, 1}, h2, rng));
  p.disc_b2 = ad::leaf(detail::uniform_init(Shape{1}, h2, rng));
  p.cls_W = ad::leaf(detail::uniform_init(Shape{h, C}, h, rng));
  p.cls_b = ad::leaf(detail::uniform_init(Shape{C}, h, rng));
  p.beta = ad::leaf(Array::scalar(beta_init));
  p.gamma = ad::leaf(Array::scalar(gamma_init));
  p.T = 1.0;
  return p;
}

// ---------------------------------------------------------------------------
// Forward passes.
// ---------------------------------------------------------------------------

struct Features {
  ad::NodePtr Z;      // n x h fused features
  ad::NodePtr alpha;  // n x C attention rows
  std::vector<ad::NodePtr> head_outputs;  // per class, n x h
};

// Imbalance-aware feature extraction: per-class adaptation heads fused by
// attention over the backbone output. With use_attention=false the whole
// class-specific block is bypassed (the no-attention ablation): Z = g(x),
// attention reported as uniform, no head outputs.
inline Features extract_features(const IadaParams& p, const Array& X,
                                 bool use_attention = true) {
  if (X.rank() != 2 || X.cols() != p.sizes.d)
    throw ShapeError("extract_features: input shape " + shape_str(X.shape()) +
                     " does not match d=" + std::to_string(p.sizes.d));
  const std::size_t n = X.rows(), C = p.sizes.C;
  auto x = ad::constant(X);
  auto g1 = ad::relu(ad::affine(x, p.W1, p.b1));
  auto g2 = ad::relu(ad::affine(g1, p.W2, p.b2));

  Features out;
  if (!use_attention) {
    out.alpha = ad::constant(Array(Shape{n, C}, 1.0 / static_cast<double>(C)));
    out.Z = g2;
    if (!out.Z->value.all_finite())
      throw NumericError("extract_features: non-finite fused features");
    return out;
  }

  out.alpha = ad::softmax(ad::matmul(g2, p.attn));
  out.head_outputs.reserve(C);
  ad::NodePtr z;
  for (std::size_t c = 0; c < C; ++c) {
    auto hc = ad::relu(ad::affine(g2, p.head_W[c], p.head_b[c]));
    out.head_outputs.push_back(hc);
    auto weighted = ad::mul(hc, ad::slice_cols(out.alpha, c, c + 1));
    z = c == 0 ? weighted : ad::add(z, weighted);
  }
  out.Z = z;
  if (!out.Z->value.all_finite())
    throw NumericError("extract_features: non-finite fused features");
  return out;
}

// Domain probabilities in (0,1). The gradient-reversal scale is the caller's
// choice: the trainer passes 1 and schedules lambda_adv as the in-graph
// multiplier of the adversarial term.
inline ad::NodePtr discriminate(const IadaParams& p, const ad::NodePtr& Z,
                                double lambda_adv) {
  if (lambda_adv < 0.0)
    throw ValueError("discriminate: lambda_adv must be nonnegative");
  auto r = ad::grad_reverse(Z, lambda_adv);
  auto a1 = ad::relu(ad::affine(r, p.disc_W1, p.disc_b1));
  auto logit = ad::affine(a1, p.disc_W2, p.disc_b2);
  return ad::sigmoid(logit);
}

inline ad::NodePtr classifier_logits(const IadaParams& p, const ad::NodePtr& Z) {
  return ad::affine(Z, p.cls_W, p.cls_b);
}

// ---------------------------------------------------------------------------
// Adaptive thresholds: tau_c = beta * log(n_c / min_k n_k) + gamma.
// ---------------------------------------------------------------------------

inline std::vector<double> compute_thresholds(const std::vector<long>& counts,
                                              double beta, double gamma) {
  if (counts.empty()) throw ValueError("compute_thresholds: empty counts");
  long min_count = counts[0];
  for (long c : counts) {
    if (c < 1)
      throw ValueError("compute_thresholds: class count below 1");
    min_count = std::min(min_count, c);
  }
  std::vector<double> tau(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    tau[i] = beta * std::log(static_cast<double>(counts[i]) /
                             static_cast<double>(min_count)) +
             gamma;
  return tau;
}

// Differentiable threshold row (1 x C) as a function of the beta/gamma leaves.
inline ad::NodePtr threshold_node(const IadaParams& p,
                                  const std::vector<long>& counts) {
  const std::vector<double> logratio = compute_thresholds(counts, 1.0, 0.0);
  Array lr(Shape{1, counts.size()}, logratio);
  return ad::add(ad::mul(ad::constant(lr), p.beta), p.gamma);
}

// ---------------------------------------------------------------------------
// Decisions and calibration.
// ---------------------------------------------------------------------------

// argmax_c (logit_c - tau_c); ties break toward the smaller class index.
inline std::vector<int> classify(const Array& logits,
                                 const std::vector<double>& tau) {
  if (logits.rank() != 2 || logits.cols() != tau.size())
    throw ShapeError("classify: logits shape " + shape_str(logits.shape()) +
                     " vs tau length " + std::to_string(tau.size()));
  std::vector<int> labels(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    double best_v = logits.at(i, 0) - tau[0];
    for (std::size_t c = 1; c < tau.size(); ++c) {
      const double v = logits.at(i, c) - tau[c];
      if (v > best_v) {
        best = c;
        best_v = v;
      }
    }
    labels[i] = static_cast<int>(best + 1);
  }
  return labels;
}

// softmax(logits / T) row-wise.
inline Array calibrated_probs(const Array& logits, double T) {
  if (T <= 0.0) throw ValueError("calibrated_probs: T must be positive");
  Array out = logits;
  const std::size_t cols = out.cols();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.data() + i * cols;
    double m = row[0] / T;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] /= T;
      m = std::max(m, row[c]);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - m);
      s += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= s;
  }
  return out;
}

// Negative log-likelihood of calibrated probabilities.
inline double calibration_nll(const Array& logits, const std::vector<int>& y,
                              double T) {
  const Array p = calibrated_probs(logits, T);
  double nll = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pv =
        std::max(p.at(i, static_cast<std::size_t>(y[i] - 1)), 1e-300);
    nll -= std::log(pv);
  }
  return nll / static_cast<double>(y.size());
}

// Golden-section search for T on log T in [log 0.05, log 20], tolerance 1e-4.
inline double fit_temperature(const Array& val_logits,
                              const std::vector<int>& val_labels) {
  if (val_labels.empty())
    throw ValueError("fit_temperature: empty validation set");
  if (val_logits.rows() != val_labels.size())
    throw ValueError("fit_temperature: logits/labels length mismatch");
  const double lo = std::log(0.05), hi = std::log(20.0);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  auto f = [&](double x) {
    return calibration_nll(val_logits, val_labels, std::exp(x));
  };
  double fc = f(c), fd = f(d);
  while (b - a > 1e-4) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double T = std::exp(0.5 * (a + b));
  return std::max(T, IadaParams::kTemperatureFloor);
}

// ---------------------------------------------------------------------------
// Checkpointing: raw little-endian doubles plus a CSV manifest carrying
// name, shape, and an FNV-1a checksum per array. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv1a(const unsigned char* bytes, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string shape_manifest(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

}  // namespace detail

inline void save_checkpoint(const IadaParams& p, const std::string& bin_path,
                            const std::string& manifest_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bin_path);
  CsvWriter manifest(manifest_path);
  manifest.row({"name", "shape", "count", "checksum"});
  auto named = p.named_arrays();
  for (const auto& [name, node] : named) {
    const auto& v = node->value;
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    const std::size_t nbytes = v.size() * sizeof(double);
    bin.write(reinterpret_cast<const char*>(bytes),
              static_cast<std::streamsize>(nbytes));
    manifest.row({name, detail::shape_manifest(v.shape()),
                  std::to_string(v.size()),
                  detail::hex64(detail::fnv1a(bytes, nbytes))});
  }
  // temperature rides along as a named scalar
  const auto* tb = reinterpret_cast<const unsigned char*>(&p.T);
  bin.write(reinterpret_cast<const char*>(tb), sizeof(double));
  manifest.row({"temperature", "scalar", "1",
                detail::hex64(detail::fnv1a(tb, sizeof(double)))});
  if (!bin) throw IoError("write failed on " + bin_path);
}

inline void load_checkpoint(IadaParams& p, const std::string& bin_path,
                            const std::string& manifest_path) {
  const auto manifest = read_csv(manifest_path);
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path);
  auto named = p.named_arrays();
  if (manifest.size() != named.size() + 2)
    throw IoError("checkpoint manifest row count mismatch: " + manifest_path);
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& row = manifest[i + 1];
    auto& [name, node] = named[i];
    if (row.size() != 4 || row[0] != name)
      throw IoError("checkpoint manifest: expected array '" + name + "', got '" +
                    (row.empty() ? "" : row[0]) + "'");
    if (row[1] != detail::shape_manifest(node->value.shape()))
      throw IoError("checkpoint shape mismatch for '" + name + "'");
    auto& v = node->value;
    bin.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!bin) throw IoError("checkpoint truncated at '" + name + "'");
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    if (detail::hex64(detail::fnv1a(bytes, v.size() * sizeof(double))) != row[3])
      throw IoError("checkpoint checksum mismatch for '" + name + "'");
  }
  const auto& trow = manifest.back();
  if (trow.size() != 4 || trow[0] != "temperature")
    throw IoError("checkpoint manifest missing temperature row");
  bin.read(reinterpret_cast<char*>(&p.T), sizeof(double));
  if (!bin) throw IoError("checkpoint truncated at temperature");
  const auto* tb = reinterpret_cast<const unsigned char*>(&p.T);
  if (detail::hex64(detail::fnv1a(tb, sizeof(double))) != trow[3])
    throw IoError("checkpoint checksum mismatch for temperature");
}

}  // namespace iada
