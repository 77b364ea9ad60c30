// Numeric evaluation and empirical validation of the theory: the
// generalization bound with class imbalance, the class-weighted gradient
// norm bound, the SGD convergence bound and its balanced special case, the
// complexity estimates, and the batch-allocation trade-off (the latter lives
// in sampling.hpp).
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iada/domains.hpp"
#include "iada/errors.hpp"
#include "iada/rng.hpp"
#include "iada/sampling.hpp"

namespace iada {

// ---------------------------------------------------------------------------
// Generalization bound:
//   eps_t <= eps_s + sum_i |pi_s_i - pi_t_i|
//                  + sum_i min(pi_s_i, pi_t_i) d_i(H) + lambda
// ---------------------------------------------------------------------------

struct GenBoundReport {
  double eps_s = 0.0;
  double proportion_gap = 0.0;
  double discrepancy_term = 0.0;
  double lambda_joint = 0.0;
  double bound = 0.0;
  double eps_t_observed = 0.0;  // filled by the harness when available
};

inline GenBoundReport generalization_bound(double eps_s,
                                           const std::vector<double>& pi_s,
                                           const std::vector<double>& pi_t,
                                           const std::vector<double>& d_per_class,
                                           double lambda_joint,
                                           double eps_t_observed = 0.0) {
  validate_proportions(pi_s, "generalization_bound pi_s");
  validate_proportions(pi_t, "generalization_bound pi_t");
  if (pi_s.size() != pi_t.size() || d_per_class.size() != pi_s.size())
    throw ValueError("generalization_bound: vector lengths disagree");
  if (eps_s < 0.0 || lambda_joint < 0.0)
    throw ValueError("generalization_bound: error terms must be nonnegative");
  for (double dv : d_per_class)
    if (dv < 0.0 || dv > 2.0)
      throw ValueError("generalization_bound: d_i must lie in [0,2]");

  GenBoundReport r;
  r.eps_s = eps_s;
  r.lambda_joint = lambda_joint;
  r.eps_t_observed = eps_t_observed;
  for (std::size_t i = 0; i < pi_s.size(); ++i) {
    r.proportion_gap += std::fabs(pi_s[i] - pi_t[i]);
    r.discrepancy_term += std::min(pi_s[i], pi_t[i]) * d_per_class[i];
  }
  r.bound = r.eps_s + r.proportion_gap + r.discrepancy_term + r.lambda_joint;
  return r;
}

// Class proportion factor C_pi = sum_i max(pi_s_i, pi_t_i).
inline double cpi(const std::vector<double>& pi_s,
                  const std::vector<double>& pi_t) {
  validate_proportions(pi_s, "cpi pi_s");
  validate_proportions(pi_t, "cpi pi_t");
  if (pi_s.size() != pi_t.size())
    throw ValueError("cpi: proportion vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < pi_s.size(); ++i)
    s += std::max(pi_s[i], pi_t[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Softmax-regression probe used for the H-divergence proxy and the ideal
// joint error estimate. Deliberately plain full-batch gradient descent.
// ---------------------------------------------------------------------------

struct ProbeConfig {
  long iterations = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

namespace detail {

struct Probe {
  std::vector<double> W;  // (d+1) x C, bias in the last row
  std::size_t d = 0, C = 0;
  std::vector<double> feat_mean, feat_scale;

  std::vector<double> scores(const std::vector<double>& x) const {
    std::vector<double> s(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      double v = W[d * C + c];
      for (std::size_t j = 0; j < d; ++j)
        v += W[j * C + c] * (x[j] - feat_mean[j]) / feat_scale[j];
      s[c] = v;
    }
    return s;
  }

  int predict(const std::vector<double>& x) const {
    const auto s = scores(x);
    return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
  }
};

// rows: flattened n x d; labels in [0, C); weights per sample.
inline Probe train_probe(const std::vector<std::vector<double>>& rows,
                         const std::vector<int>& labels,
                         const std::vector<double>& weights, std::size_t C,
                         const ProbeConfig& cfg) {
  const std::size_t n = rows.size();
  const std::size_t d = rows.empty() ? 0 : rows[0].size();
  Probe p;
  p.d = d;
  p.C = C;
  p.feat_mean.assign(d, 0.0);
  p.feat_scale.assign(d, 1.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) p.feat_mean[j] += r[j];
  for (std::size_t j = 0; j < d; ++j) p.feat_mean[j] /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - p.feat_mean[j];
      var[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j)
    p.feat_scale[j] = std::max(std::sqrt(var[j] / static_cast<double>(n)), 1e-9);

  p.W.assign((d + 1) * C, 0.0);
  std::vector<double> grad((d + 1) * C, 0.0);
  std::vector<double> xs(d, 0.0);
  for (long it = 0; it < cfg.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j)
        xs[j] = (rows[i][j] - p.feat_mean[j]) / p.feat_scale[j];
      std::vector<double> s(C, 0.0);
      double m = -1e300;
      for (std::size_t c = 0; c < C; ++c) {
        double v = p.W[d * C + c];
        for (std::size_t j = 0; j < d; ++j) v += p.W[j * C + c] * xs[j];
        s[c] = v;
        m = std::max(m, v);
      }
      double z = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        s[c] = std::exp(s[c] - m);
        z += s[c];
      }
      for (std::size_t c = 0; c < C; ++c) {
        const double delta =
            (s[c] / z - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0)) *
            weights[i];
        for (std::size_t j = 0; j < d; ++j) grad[j * C + c] += delta * xs[j];
        grad[d * C + c] += delta;
      }
    }
    for (std::size_t k = 0; k < p.W.size(); ++k)
      p.W[k] -= cfg.learning_rate * (grad[k] + cfg.l2 * p.W[k]);
  }
  return p;
}

}  // namespace detail

// H-divergence proxy for one class: train a domain probe on the class-c rows
// of both domains (even indices), measure balanced error on the held-out odd
// indices, and map it to d_c = 2 (1 - 2 err) clamped to [0, 2].
inline double estimate_class_discrepancy(const LabeledDomain& src,
                                         const LabeledDomain& tgt_eval, int c,
                                         const ProbeConfig& cfg = {}) {
  std::vector<std::vector<double>> train_rows, eval_src, eval_tgt;
  std::vector<int> train_labels;
  auto collect = [&](const LabeledDomain& dom, int domain_label,
                     std::vector<std::vector<double>>& eval_rows) {
    long seen = 0;
    for (long i = 0; i < dom.n(); ++i) {
      if (dom.y[static_cast<std::size_t>(i)] != c) continue;
      std::vector<double> row(dom.d());
      for (std::size_t j = 0; j < dom.d(); ++j)
        row[j] = dom.X.at(static_cast<std::size_t>(i), j);
      if (seen % 2 == 0) {
        train_rows.push_back(std::move(row));
        train_labels.push_back(domain_label);
      } else {
        eval_rows.push_back(std::move(row));
      }
      ++seen;
    }
    return seen;
  };
  const long n_src = collect(src, 0, eval_src);
  const long n_tgt = collect(tgt_eval, 1, eval_tgt);
  if (n_src < 2 || n_tgt < 2)
    throw ValueError("estimate_class_discrepancy: class " + std::to_string(c) +
                     " missing or too small on one side");

  // Balance the probe objective across domains.
  long n0 = 0, n1 = 0;
  for (int l : train_labels) (l == 0 ? n0 : n1)++;
  std::vector<double> weights(train_labels.size());
  for (std::size_t i = 0; i < train_labels.size(); ++i)
    weights[i] = train_labels[i] == 0 ? 0.5 / static_cast<double>(n0)
                                      : 0.5 / static_cast<double>(n1);

  const detail::Probe probe =
      detail::train_probe(train_rows, train_labels, weights, 2, cfg);
  auto err_on = [&](const std::vector<std::vector<double>>& rows, int truth) {
    if (rows.empty()) return 0.0;
    long wrong = 0;
    for (const auto& r : rows)
      if (probe.predict(r) != truth) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(rows.size());
  };
  const double balanced_err = 0.5 * (err_on(eval_src, 0) + err_on(eval_tgt, 1));
  return std::clamp(2.0 * (1.0 - 2.0 * balanced_err), 0.0, 2.0);
}

// Ideal-joint-error estimate: one probe trained on pooled labeled data from
// both domains (even rows), evaluated on the held-out halves of each domain.
// Returns eps_s + eps_t of that single hypothesis. Harness-side only: it
// reads the quarantined target labels.
inline double estimate_joint_error(const LabeledDomain& src,
                                   const LabeledDomain& tgt_eval,
                                   std::size_t num_classes,
                                   const ProbeConfig& cfg = {}) {
  std::vector<std::vector<double>> train_rows;
  std::vector<int> train_labels;
  std::vector<std::vector<double>> eval_src_rows, eval_tgt_rows;
  std::vector<int> eval_src_labels, eval_tgt_labels;
  auto collect = [&](const LabeledDomain& dom,
                     std::vector<std::vector<double>>& eval_rows,
                     std::vector<int>& eval_labels) {
    for (long i = 0; i < dom.n(); ++i) {
      std::vector<double> row(dom.d());
      for (std::size_t j = 0; j < dom.d(); ++j)
        row[j] = dom.X.at(static_cast<std::size_t>(i), j);
      if (i % 2 == 0) {
        train_rows.push_back(std::move(row));
        train_labels.push_back(dom.y[static_cast<std::size_t>(i)] - 1);
      } else {
        eval_rows.push_back(std::move(row));
        eval_labels.push_back(dom.y[static_cast<std::size_t>(i)] - 1);
      }
    }
  };
  collect(src, eval_src_rows, eval_src_labels);
  collect(tgt_eval, eval_tgt_rows, eval_tgt_labels);
  if (train_rows.empty())
    throw ValueError("estimate_joint_error: no training rows");
  std::vector<double> weights(train_rows.size(),
                              1.0 / static_cast<double>(train_rows.size()));
  const detail::Probe probe =
      detail::train_probe(train_rows, train_labels, weights, num_classes, cfg);
  auto err_on = [&](const std::vector<std::vector<double>>& rows,
                    const std::vector<int>& labels) {
    if (rows.empty()) return 0.0;
    long wrong = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (probe.predict(rows[i]) != labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(rows.size());
  };
  return err_on(eval_src_rows, eval_src_labels) +
         err_on(eval_tgt_rows, eval_tgt_labels);
}

// ---------------------------------------------------------------------------
// Class-weighted quadratic test problems.
//
// L(w) = sum_c [ pi_s_c mean_x ~ S_c  0.5 (w-x)' H_s_c (w-x)
//              + pi_t_c mean_x ~ T_c  0.5 (w-x)' H_t_c (w-x) ]
// with diagonal curvatures, so mu, beta, and w* are available analytically.
// The stochastic gradient draws one sample per (class, domain) component and
// is projected onto the G-ball, which enforces the gradient-bound assumption
// by construction.
// ---------------------------------------------------------------------------

struct QuadComponent {
  std::vector<double> hdiag;                 // length dim, positive
  std::vector<std::vector<double>> samples;  // each length dim
};

struct QuadraticProblem {
  std::size_t dim = 1;
  std::vector<double> pi_s, pi_t;
  std::vector<QuadComponent> src, tgt;  // one component per class
  std::vector<double> w0;
  double G = 0.0;

  std::size_t num_classes() const { return pi_s.size(); }

  void validate() const {
    validate_proportions(pi_s, "QuadraticProblem pi_s");
    validate_proportions(pi_t, "QuadraticProblem pi_t");
    if (pi_s.size() != pi_t.size() || src.size() != pi_s.size() ||
        tgt.size() != pi_s.size())
      throw ValueError("QuadraticProblem: class count mismatch");
    if (w0.size() != dim) throw ValueError("QuadraticProblem: w0 length != dim");
    if (G <= 0.0) throw ValueError("QuadraticProblem: G must be positive");
    auto check = [&](const QuadComponent& comp) {
      if (comp.hdiag.size() != dim)
        throw ValueError("QuadraticProblem: curvature length != dim");
      for (double h : comp.hdiag)
        if (h <= 0.0) throw ValueError("QuadraticProblem: curvature must be positive");
      if (comp.samples.empty())
        throw ValueError("QuadraticProblem: component without samples");
      for (const auto& s : comp.samples)
        if (s.size() != dim)
          throw ValueError("QuadraticProblem: sample length != dim");
    };
    for (const auto& comp : src) check(comp);
    for (const auto& comp : tgt) check(comp);
  }

  std::vector<double> hessian_diag() const {
    std::vector<double> H(dim, 0.0);
    for (std::size_t c = 0; c < num_classes(); ++c)
      for (std::size_t j = 0; j < dim; ++j)
        H[j] += pi_s[c] * src[c].hdiag[j] + pi_t[c] * tgt[c].hdiag[j];
    return H;
  }

  double mu() const {
    const auto H = hessian_diag();
    return *std::min_element(H.begin(), H.end());
  }

  double beta_smooth() const {
    const auto H = hessian_diag();
    return *std::max_element(H.begin(), H.end());
  }

  std::vector<double> component_mean(const QuadComponent& comp) const {
    std::vector<double> m(dim, 0.0);
    for (const auto& s : comp.samples)
      for (std::size_t j = 0; j < dim; ++j) m[j] += s[j];
    for (std::size_t j = 0; j < dim; ++j)
      m[j] /= static_cast<double>(comp.samples.size());
    return m;
  }

  std::vector<double> w_star() const {
    std::vector<double> rhs(dim, 0.0);
    for (std::size_t c = 0; c < num_classes(); ++c) {
      const auto ms = component_mean(src[c]);
      const auto mt = component_mean(tgt[c]);
      for (std::size_t j = 0; j < dim; ++j)
        rhs[j] += pi_s[c] * src[c].hdiag[j] * ms[j] +
                  pi_t[c] * tgt[c].hdiag[j] * mt[j];
    }
    const auto H = hessian_diag();
    for (std::size_t j = 0; j < dim; ++j) rhs[j] /= H[j];
    return rhs;
  }

  double loss(const std::vector<double>& w) const {
    double total = 0.0;
    auto comp_loss = [&](const QuadComponent& comp) {
      double s = 0.0;
      for (const auto& x : comp.samples)
        for (std::size_t j = 0; j < dim; ++j) {
          const double dlt = w[j] - x[j];
          s += 0.5 * comp.hdiag[j] * dlt * dlt;
        }
      return s / static_cast<double>(comp.samples.size());
    };
    for (std::size_t c = 0; c < num_classes(); ++c)
      total += pi_s[c] * comp_loss(src[c]) + pi_t[c] * comp_loss(tgt[c]);
    return total;
  }

  // Stochastic gradient: one uniformly drawn sample per (class, domain)
  // component; the sum is projected onto the G-ball. Returns true when the
  // projection actually clipped.
  bool stochastic_gradient(const std::vector<double>& w, Rng& rng,
                           std::vector<double>& g) const {
    g.assign(dim, 0.0);
    auto add_component = [&](const QuadComponent& comp, double pi) {
      const auto& x =
          comp.samples[static_cast<std::size_t>(rng.uniform_int(comp.samples.size()))];
      for (std::size_t j = 0; j < dim; ++j)
        g[j] += pi * comp.hdiag[j] * (w[j] - x[j]);
    };
    for (std::size_t c = 0; c < num_classes(); ++c) {
      add_component(src[c], pi_s[c]);
      add_component(tgt[c], pi_t[c]);
    }
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    if (norm2 > G * G) {
      const double scale = G / std::sqrt(norm2);
      for (double& v : g) v *= scale;
      return true;
    }
    return false;
  }
};

// Fixture factory: class-structured sample clouds around per-class anchors,
// curvatures in a moderate range, w0 away from the optimum, and G set
// analytically so the projection stays inactive on the visited region.
inline QuadraticProblem make_quadratic_problem(std::size_t dim,
                                               const std::vector<double>& pi_s,
                                               const std::vector<double>& pi_t,
                                               std::uint64_t seed,
                                               double spread = 0.1) {
  validate_proportions(pi_s, "make_quadratic_problem pi_s");
  QuadraticProblem p;
  p.dim = dim;
  p.pi_s = pi_s;
  p.pi_t = pi_t;
  Rng rng(seed);
  const std::size_t C = pi_s.size();
  const int samples_per_component = 3;
  for (std::size_t c = 0; c < C; ++c) {
    for (int side = 0; side < 2; ++side) {
      QuadComponent comp;
      comp.hdiag.resize(dim);
      for (std::size_t j = 0; j < dim; ++j)
        comp.hdiag[j] = 0.5 + 2.5 * rng.uniform();
      std::vector<double> anchor(dim);
      for (std::size_t j = 0; j < dim; ++j)
        anchor[j] = (c % 2 == 0 ? -1.0 : 1.0) + 0.4 * (rng.uniform() - 0.5);
      for (int k = 0; k < samples_per_component; ++k) {
        std::vector<double> s(dim);
        for (std::size_t j = 0; j < dim; ++j)
          s[j] = anchor[j] + spread * rng.normal();
        comp.samples.push_back(std::move(s));
      }
      (side == 0 ? p.src : p.tgt).push_back(std::move(comp));
    }
  }
  p.w0.assign(dim, 2.0);

  // G: bound on the total stochastic gradient norm over the region the
  // iterates can visit (a ball around w* containing w0 and every sample),
  // with a 1.5x safety factor.
  const auto ws = p.w_star();
  double r0 = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double dlt = p.w0[j] - ws[j];
    r0 += dlt * dlt;
  }
  r0 = std::sqrt(r0);
  auto comp_reach = [&](const QuadComponent& comp) {
    double worst = 0.0;
    for (const auto& x : comp.samples) {
      double dsq = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double dlt = x[j] - ws[j];
        dsq += dlt * dlt;
      }
      worst = std::max(worst, std::sqrt(dsq));
    }
    return worst;
  };
  double gsum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double hs = *std::max_element(p.src[c].hdiag.begin(), p.src[c].hdiag.end());
    const double ht = *std::max_element(p.tgt[c].hdiag.begin(), p.tgt[c].hdiag.end());
    gsum += pi_s[c] * hs * (r0 + comp_reach(p.src[c]));
    gsum += pi_t[c] * ht * (r0 + comp_reach(p.tgt[c]));
  }
  p.G = 1.5 * gsum;
  p.validate();
  return p;
}

// Noiseless 1-D quadratic L(w) = mu/2 w^2 realized as one class with a
// single sample at the origin in both domains.
inline QuadraticProblem make_noiseless_1d(double mu_target, double w0) {
  QuadraticProblem p;
  p.dim = 1;
  p.pi_s = {0.999999999999};  // single class; proportions must be in (0,1)
  p.pi_t = {0.999999999999};
  QuadComponent comp;
  comp.hdiag = {mu_target / 2.0};
  comp.samples = {{0.0}};
  p.src = {comp};
  p.tgt = {comp};
  p.w0 = {w0};
  p.G = mu_target * (std::fabs(w0) + 1.0);
  return p;
}

// ---------------------------------------------------------------------------
// Convergence verification: SGD with eta_t = 2 / (mu (t + gamma)),
// gamma = max{4 beta / mu, 1}, checked against the bound
//   2 beta Delta0 / (mu t + 4 beta) + C_pi G^2 / (2 mu^2 t).
// ---------------------------------------------------------------------------

struct ConvergencePoint {
  long t = 0;
  double mean_suboptimality = 0.0;
  double bound = 0.0;
};

struct ConvergenceReport {
  double mu = 0.0;
  double beta_smooth = 0.0;
  double G = 0.0;
  double gamma_lr = 0.0;
  double c_pi = 0.0;
  double delta0 = 0.0;
  std::vector<ConvergencePoint> trajectory;
  long violations = 0;
  long projection_events = 0;
};

inline double convergence_bound(double mu, double beta, double c_pi, double G,
                                double delta0, long t) {
  return 2.0 * beta * delta0 / (mu * static_cast<double>(t) + 4.0 * beta) +
         c_pi * G * G / (2.0 * mu * mu * static_cast<double>(t));
}

inline std::vector<long> log_spaced_points(long T) {
  std::vector<long> pts;
  long t = 1;
  while (t < T) {
    pts.push_back(t);
    const long next = static_cast<long>(std::ceil(static_cast<double>(t) * 1.35));
    t = std::max(next, t + 1);
  }
  if (T >= 1) pts.push_back(T);
  return pts;
}

inline ConvergenceReport verify_convergence(const QuadraticProblem& problem,
                                            int num_seeds, long T_iters,
                                            std::uint64_t base_seed = 1000) {
  problem.validate();
  ConvergenceReport rep;
  rep.mu = problem.mu();
  rep.beta_smooth = problem.beta_smooth();
  if (rep.mu <= 0.0 || rep.beta_smooth < rep.mu)
    throw ValueError("verify_convergence: need 0 < mu <= beta");
  rep.G = problem.G;
  rep.gamma_lr = std::max(4.0 * rep.beta_smooth / rep.mu, 1.0);
  rep.c_pi = cpi(problem.pi_s, problem.pi_t);
  const auto ws = problem.w_star();
  const double l_star = problem.loss(ws);
  for (std::size_t j = 0; j < problem.dim; ++j) {
    const double dlt = problem.w0[j] - ws[j];
    rep.delta0 += dlt * dlt;
  }

  const std::vector<long> pts = log_spaced_points(T_iters);
  std::vector<double> mean_subopt(pts.size(), 0.0);

  std::vector<double> w(problem.dim), g(problem.dim);
  for (int s = 0; s < num_seeds; ++s) {
    Rng rng(base_seed + static_cast<std::uint64_t>(s));
    w = problem.w0;
    std::size_t next_pt = 0;
    for (long t = 1; t <= T_iters; ++t) {
      const double eta =
          2.0 / (rep.mu * (static_cast<double>(t) + rep.gamma_lr));
      if (problem.stochastic_gradient(w, rng, g)) ++rep.projection_events;
      for (std::size_t j = 0; j < problem.dim; ++j) w[j] -= eta * g[j];
      if (next_pt < pts.size() && pts[next_pt] == t) {
        mean_subopt[next_pt] += problem.loss(w) - l_star;
        ++next_pt;
      }
    }
  }

  for (std::size_t i = 0; i < pts.size(); ++i) {
    ConvergencePoint cp;
    cp.t = pts[i];
    cp.mean_suboptimality = mean_subopt[i] / static_cast<double>(num_seeds);
    cp.bound = convergence_bound(rep.mu, rep.beta_smooth, rep.c_pi, rep.G,
                                 rep.delta0, pts[i]);
    if (cp.mean_suboptimality > cp.bound) ++rep.violations;
    rep.trajectory.push_back(cp);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient-norm lemma:  E ||grad L_t(w)||^2 <= C_pi G^2.
// ---------------------------------------------------------------------------

struct GradNormReport {
  double max_exact = 0.0;       // max over sampled w of the exact expectation
  double mc_estimate = 0.0;     // Monte-Carlo estimate at the worst w
  double mc_stderr = 0.0;
  double bound = 0.0;           // C_pi G^2
  long w_samples = 0;
};

// Exact E||g(w)||^2 by enumeration over the finite product of per-component
// sample choices (projection applied per outcome, as in the SGD path).
inline double exact_expected_sq_gradnorm(const QuadraticProblem& problem,
                                         const std::vector<double>& w) {
  problem.validate();
  const std::size_t C = problem.num_classes();
  std::vector<const QuadComponent*> comps;
  std::vector<double> pis;
  for (std::size_t c = 0; c < C; ++c) {
    comps.push_back(&problem.src[c]);
    pis.push_back(problem.pi_s[c]);
    comps.push_back(&problem.tgt[c]);
    pis.push_back(problem.pi_t[c]);
  }
  double total_outcomes = 1.0;
  for (const auto* comp : comps)
    total_outcomes *= static_cast<double>(comp->samples.size());
  if (total_outcomes > 2e6)
    throw ValueError("exact_expected_sq_gradnorm: outcome space too large");

  std::vector<std::size_t> choice(comps.size(), 0);
  double acc = 0.0;
  const double prob =
      1.0 / total_outcomes;  // choices are uniform and independent
  std::vector<double> g(problem.dim);
  for (;;) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const auto& x = comps[k]->samples[choice[k]];
      for (std::size_t j = 0; j < problem.dim; ++j)
        g[j] += pis[k] * comps[k]->hdiag[j] * (w[j] - x[j]);
    }
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    if (norm2 > problem.G * problem.G) norm2 = problem.G * problem.G;
    acc += prob * norm2;

    std::size_t k = 0;
    while (k < choice.size()) {
      if (++choice[k] < comps[k]->samples.size()) break;
      choice[k] = 0;
      ++k;
    }
    if (k == choice.size()) break;
  }
  return acc;
}

inline GradNormReport gradient_norm_check(const QuadraticProblem& problem,
                                          int w_samples,
                                          std::uint64_t seed = 77,
                                          int mc_draws = 20000) {
  problem.validate();
  GradNormReport rep;
  rep.bound = cpi(problem.pi_s, problem.pi_t) * problem.G * problem.G;
  rep.w_samples = w_samples;
  Rng rng(seed);
  const auto ws = problem.w_star();
  double r0 = 0.0;
  for (std::size_t j = 0; j < problem.dim; ++j) {
    const double dlt = problem.w0[j] - ws[j];
    r0 += dlt * dlt;
  }
  const double R = std::sqrt(r0);

  std::vector<double> worst_w = ws;
  for (int s = 0; s < w_samples; ++s) {
    std::vector<double> w(problem.dim);
    for (std::size_t j = 0; j < problem.dim; ++j)
      w[j] = ws[j] + R * (2.0 * rng.uniform() - 1.0);
    const double e = exact_expected_sq_gradnorm(problem, w);
    if (e > rep.max_exact) {
      rep.max_exact = e;
      worst_w = w;
    }
  }

  // Monte-Carlo estimate at the worst sampled w.
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> g(problem.dim);
  for (int k = 0; k < mc_draws; ++k) {
    problem.stochastic_gradient(worst_w, rng, g);
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    sum += norm2;
    sum_sq += norm2 * norm2;
  }
  const double n = static_cast<double>(mc_draws);
  rep.mc_estimate = sum / n;
  const double var = std::max(sum_sq / n - rep.mc_estimate * rep.mc_estimate, 0.0);
  rep.mc_stderr = std::sqrt(var / n);
  return rep;
}

// ---------------------------------------------------------------------------
// Complexity results.
// ---------------------------------------------------------------------------

struct ComplexityReport {
  double time_raw = 0.0;        // C max_i{pi} (n_s + n_t) d + C^2 log C
  double time_balanced = 0.0;   // (n_s + n_t) d / C + C log C (corollary form)
  double space_raw = 0.0;       // sum_i (pi_s_i n_s + pi_t_i n_t) d + C^2
};

inline ComplexityReport complexity_estimate(long n_s, long n_t, std::size_t d,
                                            std::size_t C,
                                            const std::vector<double>& pi_s,
                                            const std::vector<double>& pi_t) {
  if (n_s < 0 || n_t < 0 || d == 0 || C == 0)
    throw ValueError("complexity_estimate: sizes must be nonnegative (d, C positive)");
  validate_proportions(pi_s, "complexity_estimate pi_s");
  validate_proportions(pi_t, "complexity_estimate pi_t");
  double max_pi = 0.0;
  for (std::size_t i = 0; i < pi_s.size(); ++i)
    max_pi = std::max({max_pi, pi_s[i], pi_t[i]});
  ComplexityReport r;
  const double nd = static_cast<double>(n_s + n_t) * static_cast<double>(d);
  const double Cd = static_cast<double>(C);
  r.time_raw = Cd * max_pi * nd + Cd * Cd * std::log(Cd);
  r.time_balanced = nd / Cd + Cd * std::log(Cd);
  r.space_raw = 0.0;
  for (std::size_t i = 0; i < pi_s.size(); ++i)
    r.space_raw += (pi_s[i] * static_cast<double>(n_s) +
                    pi_t[i] * static_cast<double>(n_t)) *
                   static_cast<double>(d);
  r.space_raw += Cd * Cd;
  return r;
}

// ---------------------------------------------------------------------------
// Timing scaling: least-squares slope of log(epoch time) vs log(n * d).
// The epoch runner is injected so tests can use synthetic timers.
// ---------------------------------------------------------------------------

struct TimingPoint {
  long n = 0;
  std::size_t d = 0;
  double seconds = 0.0;
};

struct TimingReport {
  std::vector<TimingPoint> points;
  double slope = 0.0;
};

inline TimingReport timing_scaling_check(
    const std::vector<std::pair<long, std::size_t>>& sizes,
    const std::function<double(long, std::size_t)>& epoch_seconds) {
  if (sizes.size() < 4)
    throw ValueError("timing_scaling_check: need at least 4 sizes");
  double min_nd = 1e300, max_nd = 0.0;
  for (const auto& [n, d] : sizes) {
    const double nd = static_cast<double>(n) * static_cast<double>(d);
    min_nd = std::min(min_nd, nd);
    max_nd = std::max(max_nd, nd);
  }
  if (min_nd <= 0.0 || max_nd == min_nd)
    throw ValueError("timing_scaling_check: slope undefined for repeated identical sizes");
  if (max_nd / min_nd < 8.0)
    throw ValueError("timing_scaling_check: size span must reach 8x in n*d");

  TimingReport rep;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [n, d] : sizes) {
    const double secs = epoch_seconds(n, d);
    if (secs < 1e-6)
      throw ValueError("timing_scaling_check: timer resolution insufficient; use larger sizes");
    rep.points.push_back({n, d, secs});
    const double x = std::log(static_cast<double>(n) * static_cast<double>(d));
    const double y = std::log(secs);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(sizes.size());
  rep.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return rep;
}

}  // namespace iada
