// Shared model fixtures: a fully wired composite objective on a tiny,
// frozen instance, used by both the unit tests and the acceptance suite to
// validate gradients end to end.
#pragma once

#include <vector>

#include "iada/domains.hpp"
#include "iada/model.hpp"
#include "iada/objectives.hpp"
#include "iada/rng.hpp"

namespace fixtures {

struct CompositeInstance {
  iada::IadaParams params;
  iada::Array X_src, X_tgt, X_aug;
  std::vector<int> y_src;
  std::vector<double> omega;
  std::vector<long> class_counts;
  double lambda_adv = 0.02;
  double lambda_reg = 0.1;
  double focal_gamma = 2.0;
  double lambda1 = 1e-3, lambda2 = 1.0, lambda3 = 0.1;
  bool margin_mode = true;
};

inline CompositeInstance make_composite_instance(std::uint64_t seed = 99) {
  using namespace iada;
  CompositeInstance inst;
  const ModelSizes sizes{3, 4, 2};
  Rng rng(seed);
  inst.params = init_params(sizes, rng, 1.0, 0.1);
  auto randm = [&](std::size_t r, std::size_t c) {
    Array a(Shape{r, c}, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 2.0 * rng.uniform() - 1.0;
    return a;
  };
  inst.X_src = randm(4, 3);
  inst.X_tgt = randm(4, 3);
  inst.X_aug = inst.X_src;
  for (std::size_t i = 0; i < inst.X_aug.size(); ++i)
    inst.X_aug[i] += 0.05 * rng.normal();
  inst.y_src = {1, 2, 2, 1};
  inst.omega = {1.3, 0.8, 0.8, 1.3};
  inst.class_counts = {5, 9};
  return inst;
}

// Builds the full objective as a plain mathematical function of the
// parameters: L_cls - lambda_adv L_adv + lambda_reg R, with the adversarial
// branch wired through the discriminator directly (no gradient reversal),
// so central finite differences are valid for every parameter. The reversal
// itself is validated against its exact contract in the op tests; the
// training graph composes these two verified pieces.
inline iada::ad::NodePtr build_composite_objective(const CompositeInstance& inst) {
  using namespace iada;
  const Features f_s = extract_features(inst.params, inst.X_src, true);
  const Features f_t = extract_features(inst.params, inst.X_tgt, true);
  const Features f_a = extract_features(inst.params, inst.X_aug, true);

  ad::NodePtr logits = classifier_logits(inst.params, f_s.Z);
  if (inst.margin_mode)
    logits = ad::add(logits,
                     ad::neg(threshold_node(inst.params, inst.class_counts)));
  const ad::NodePtr probs = ad::softmax(logits);

  const std::size_t n = inst.y_src.size(), C = 2;
  Array mask(Shape{n, C}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    mask.at(i, static_cast<std::size_t>(inst.y_src[i] - 1)) = 1.0;
  const ad::NodePtr p_true = ad::matmul(ad::mul(probs, ad::constant(mask)),
                                        ad::constant(Array(Shape{C, 1}, 1.0)));

  const ad::NodePtr l_cls = focal_loss_node(p_true, inst.omega, inst.focal_gamma);
  auto discriminator = [&](const ad::NodePtr& z) {
    auto a1 = ad::relu(ad::affine(z, inst.params.disc_W1, inst.params.disc_b1));
    return ad::sigmoid(ad::affine(a1, inst.params.disc_W2, inst.params.disc_b2));
  };
  const ad::NodePtr l_adv =
      adversarial_loss_node(discriminator(f_s.Z), discriminator(f_t.Z), inst.omega);
  const ad::NodePtr reg =
      regularizer_node(inst.params.theta(), f_s.Z, f_a.Z, f_s.head_outputs,
                       inst.lambda1, inst.lambda2, inst.lambda3);
  return ad::add(ad::add(l_cls, ad::scale(l_adv, -inst.lambda_adv)),
                 ad::scale(reg, inst.lambda_reg));
}

}  // namespace fixtures
