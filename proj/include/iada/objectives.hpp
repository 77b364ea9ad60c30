// Loss terms and schedules of the training objective:
//   J = L_cls - lambda_adv * L_adv + lambda_reg * R
// with
//   L_cls  = weighted focal loss,
//   L_adv  = E_s[w(y) log D] + E_t[log(1 - D)]  (class-weighted adversarial),
//   R      = l1 * ||theta||^2 + l2 * L_cons + l3 * L_div,
//   lambda_adv(t) = lambda0 * min(1, t / warmup_tau).
//
// Each term exists as a plain scalar function (used for fixtures and for
// logging) and, where the trainer differentiates through it, as a graph
// builder over autodiff nodes. grad_reverse inside the discriminator path
// turns the min-max step into a single minimization.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "iada/autodiff.hpp"
#include "iada/errors.hpp"
#include "iada/sampling.hpp"

namespace iada {

struct LossConfig {
  double focal_gamma = 2.0;   // focusing exponent of the focal loss
  double lambda0 = 0.01;      // base adversarial weight
  long warmup_tau = 1000;     // warm-up iterations for lambda_adv
  double lambda1 = 5e-4;      // L2 weight inside R (the weight-decay term)
  double lambda2 = 1.0;       // consistency weight inside R
  double lambda3 = 0.1;       // diversity weight inside R
  double lambda_reg = 1.0;    // overall regularization coefficient

  void validate() const {
    if (focal_gamma < 0 || lambda0 < 0 || lambda1 < 0 || lambda2 < 0 ||
        lambda3 < 0 || lambda_reg < 0)
      throw ValueError("LossConfig: weights must be nonnegative");
    if (warmup_tau < 1) throw ValueError("LossConfig: warmup_tau must be >= 1");
  }
};

struct ClassWeights {
  std::vector<double> omega;  // omega[c] = 1 / (C * pi_c)
};

inline ClassWeights class_weights(const std::vector<double>& pi_s) {
  if (pi_s.empty()) throw ValueError("class_weights: empty proportions");
  ClassWeights w;
  const double C = static_cast<double>(pi_s.size());
  w.omega.reserve(pi_s.size());
  for (double p : pi_s) {
    if (p <= 0.0 || p >= 1.0)
      throw ValueError("class_weights: proportions must lie strictly in (0,1)");
    w.omega.push_back(1.0 / (C * p));
  }
  return w;
}

inline constexpr double kProbFloor = 1e-12;

// ---------------------------------------------------------------------------
// Focal loss: -(1/n) sum_i omega_i (1 - p_i)^gamma log(p_i)
// ---------------------------------------------------------------------------

inline double focal_loss(const std::vector<double>& p_true,
                         const std::vector<double>& omega, double gamma) {
  if (p_true.empty()) throw ValueError("focal_loss: empty batch");
  if (p_true.size() != omega.size())
    throw ValueError("focal_loss: weight/probability length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p_true.size(); ++i) {
    const double p = std::max(p_true[i], kProbFloor);
    s += omega[i] * std::pow(1.0 - p_true[i], gamma) * std::log(p);
  }
  return -s / static_cast<double>(p_true.size());
}

// Graph form. p_true is an (n x 1) node of true-class probabilities; omega
// is a constant per-sample weight column.
inline ad::NodePtr focal_loss_node(const ad::NodePtr& p_true,
                                   const std::vector<double>& omega,
                                   double gamma) {
  const std::size_t n = p_true->value.size();
  if (n == 0) throw ValueError("focal_loss: empty batch");
  if (omega.size() != n)
    throw ValueError("focal_loss: weight/probability length mismatch");
  auto w = ad::constant(Array(p_true->value.shape(), omega));
  auto p_safe = ad::clamp_min(p_true, kProbFloor);
  auto modulator = ad::pow(ad::add(ad::neg(p_true), ad::constant(1.0)), gamma);
  auto terms = ad::mul(ad::mul(w, modulator), ad::log(p_safe));
  return ad::neg(ad::mean(terms));
}

// ---------------------------------------------------------------------------
// Adversarial loss: E_s[omega log D] + E_t[log(1 - D)]
// ---------------------------------------------------------------------------

inline double adversarial_loss(const std::vector<double>& d_src,
                               const std::vector<double>& d_tgt,
                               const std::vector<double>& omega_src) {
  if (d_src.empty() || d_tgt.empty())
    throw ValueError("adversarial_loss: empty batch");
  if (d_src.size() != omega_src.size())
    throw ValueError("adversarial_loss: weight length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < d_src.size(); ++i) {
    const double d = std::clamp(d_src[i], kProbFloor, 1.0 - kProbFloor);
    s += omega_src[i] * std::log(d);
  }
  s /= static_cast<double>(d_src.size());
  double t = 0.0;
  for (double dval : d_tgt) {
    const double d = std::clamp(dval, kProbFloor, 1.0 - kProbFloor);
    t += std::log(1.0 - d);
  }
  t /= static_cast<double>(d_tgt.size());
  return s + t;
}

inline ad::NodePtr adversarial_loss_node(const ad::NodePtr& d_src,
                                         const ad::NodePtr& d_tgt,
                                         const std::vector<double>& omega_src) {
  if (d_src->value.size() == 0 || d_tgt->value.size() == 0)
    throw ValueError("adversarial_loss: empty batch");
  if (omega_src.size() != d_src->value.size())
    throw ValueError("adversarial_loss: weight length mismatch");
  auto w = ad::constant(Array(d_src->value.shape(), omega_src));
  auto ds = ad::clamp_max(ad::clamp_min(d_src, kProbFloor), 1.0 - kProbFloor);
  auto dt = ad::clamp_max(ad::clamp_min(d_tgt, kProbFloor), 1.0 - kProbFloor);
  auto src_term = ad::mean(ad::mul(w, ad::log(ds)));
  auto tgt_term = ad::mean(ad::log(ad::add(ad::neg(dt), ad::constant(1.0))));
  return ad::add(src_term, tgt_term);
}

// ---------------------------------------------------------------------------
// Regularizer: l1 ||theta||^2 + l2 L_cons + l3 L_div
//   L_cons = mean over rows of the squared distance between the two views.
//   L_div  = mean squared off-diagonal of the Gram matrix of batch-averaged,
//            unit-normalized class-head outputs.
// ---------------------------------------------------------------------------

inline ad::NodePtr l2_penalty_node(const std::vector<ad::NodePtr>& theta) {
  ad::NodePtr acc = ad::constant(0.0);
  for (const auto& p : theta)
    acc = ad::add(acc, ad::sum(ad::mul(p, p)));
  return acc;
}

inline ad::NodePtr consistency_node(const ad::NodePtr& z_clean,
                                    const ad::NodePtr& z_aug) {
  if (!z_clean->value.same_shape(z_aug->value))
    throw ShapeError("regularizer: view shapes " +
                     shape_str(z_clean->value.shape()) + " vs " +
                     shape_str(z_aug->value.shape()));
  auto diff = ad::sub(z_clean, z_aug);
  // mean over rows of the squared row distance = mean(sq) * cols
  return ad::scale(ad::mean(ad::mul(diff, diff)),
                   static_cast<double>(z_clean->value.cols()));
}

inline ad::NodePtr diversity_node(const std::vector<ad::NodePtr>& head_outputs) {
  const std::size_t C = head_outputs.size();
  if (C < 2) return ad::constant(0.0);
  const std::size_t n = head_outputs[0]->value.rows();
  Array ones_row(Shape{1, n}, 1.0 / static_cast<double>(n));
  auto avg = ad::constant(ones_row);
  std::vector<ad::NodePtr> unit_means;
  unit_means.reserve(C);
  for (const auto& h : head_outputs) {
    auto m = ad::matmul(avg, h);  // 1 x h batch mean
    auto norm_sq = ad::sum(ad::mul(m, m));
    auto inv_norm = ad::pow(ad::add(norm_sq, ad::constant(1e-12)), -0.5);
    unit_means.push_back(ad::mul(m, inv_norm));
  }
  ad::NodePtr acc = ad::constant(0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = c + 1; k < C; ++k) {
      auto g = ad::sum(ad::mul(unit_means[c], unit_means[k]));
      acc = ad::add(acc, ad::scale(ad::mul(g, g), 2.0));
    }
  return ad::scale(acc, 1.0 / static_cast<double>(C * (C - 1)));
}

inline ad::NodePtr regularizer_node(const std::vector<ad::NodePtr>& theta,
                                    const ad::NodePtr& z_clean,
                                    const ad::NodePtr& z_aug,
                                    const std::vector<ad::NodePtr>& head_outputs,
                                    double lambda1, double lambda2,
                                    double lambda3) {
  auto l2 = ad::scale(l2_penalty_node(theta), lambda1);
  auto cons = ad::scale(consistency_node(z_clean, z_aug), lambda2);
  auto div = ad::scale(diversity_node(head_outputs), lambda3);
  return ad::add(ad::add(l2, cons), div);
}

// ---------------------------------------------------------------------------
// Adversarial warm-up schedule: lambda_adv = lambda0 * min(1, t / tau).
// ---------------------------------------------------------------------------

inline double lambda_schedule(long t, double lambda0, long warmup_tau) {
  if (t < 0) throw ValueError("lambda_schedule: negative iteration");
  if (warmup_tau < 1) throw ValueError("lambda_schedule: warmup_tau must be >= 1");
  const double ramp = std::min(1.0, static_cast<double>(t) /
                                        static_cast<double>(warmup_tau));
  return lambda0 * ramp;
}

// ---------------------------------------------------------------------------
// Total objective.
// ---------------------------------------------------------------------------

struct ObjectiveParts {
  double l_cls = 0.0;
  double l_adv = 0.0;
  double lambda_adv = 0.0;
  double reg = 0.0;
  double lambda_reg = 0.0;
};

// Scalar combination per the training objective; used for reporting and for
// fixture tests. Errors name the offending component.
inline double total_objective(const ObjectiveParts& parts) {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v))
      throw NumericError(std::string("total_objective: non-finite component ") +
                         name);
  };
  check(parts.l_cls, "l_cls");
  check(parts.l_adv, "l_adv");
  check(parts.lambda_adv, "lambda_adv");
  check(parts.reg, "reg");
  check(parts.lambda_reg, "lambda_reg");
  return parts.l_cls - parts.lambda_adv * parts.l_adv +
         parts.lambda_reg * parts.reg;
}

// Graph combination used by the trainer. The adversarial node must have been
// built with grad_reverse(Z, lambda_adv) inside the discriminator path; the
// lambda_adv schedule therefore lives inside the graph as the reversal
// scale. Negating the node makes one minimization step drive the
// discriminator toward separating the domains at full rate while the
// reversal drives the feature extractor, scaled by lambda_adv, toward mixing
// them. With lambda_adv == 0 the adversarial term is left out of the graph
// entirely, so neither player receives gradient from it.
inline ad::NodePtr assemble_objective(const ad::NodePtr& cls,
                                      const ad::NodePtr& adv,
                                      const ad::NodePtr& reg,
                                      double lambda_adv, double lambda_reg) {
  ad::NodePtr j = cls;
  if (adv && lambda_adv > 0.0)
    j = ad::add(j, ad::neg(adv));
  if (reg && lambda_reg > 0.0)
    j = ad::add(j, ad::scale(reg, lambda_reg));
  return j;
}

}  // namespace iada
