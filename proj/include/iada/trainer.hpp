// End-to-end training loop: balanced source batches, adversarial alignment
// with warm-up, dynamic class weights, adaptive thresholds, post-hoc
// temperature fit, multi-seed repetition with mean / %CV aggregation.
#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iada/autodiff.hpp"
#include "iada/csv.hpp"
#include "iada/domains.hpp"
#include "iada/errors.hpp"
#include "iada/metrics.hpp"
#include "iada/model.hpp"
#include "iada/objectives.hpp"
#include "iada/sampling.hpp"

namespace iada {

enum class ThresholdMode { margin, frozen };
enum class AllocHint { source, uniform };

struct TrainConfig {
  double learning_rate = 0.001;
  long batch_budget = 32;      // the full-scale protocol value 2 is selectable
  double weight_decay = 5e-4;  // realized as the lambda1 (L2) term
  long iterations = 5000;      // full-scale protocol: 50000
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  LossConfig loss;
  ThresholdMode threshold_mode = ThresholdMode::margin;
  long eval_every = 500;
  std::size_t hidden_dim = 32;
  double augment_std = 0.1;    // consistency-view noise
  bool use_attention = true;
  bool use_class_weights = true;
  double beta_init = 1.0;
  double gamma_init = 0.0;
  AllocHint alloc_hint = AllocHint::source;  // stand-in pi_t for allocation

  void validate() const {
    if (learning_rate <= 0.0) throw ValueError("TrainConfig: learning_rate must be positive");
    if (iterations < 0) throw ValueError("TrainConfig: negative iterations");
    if (seeds.empty()) throw ValueError("TrainConfig: at least one seed required");
    if (eval_every < 1) throw ValueError("TrainConfig: eval_every must be >= 1");
    if (batch_budget < 1) throw ValueError("TrainConfig: batch_budget must be >= 1");
    if (hidden_dim == 0) throw ValueError("TrainConfig: hidden_dim must be positive");
    if (augment_std < 0.0) throw ValueError("TrainConfig: negative augment_std");
    loss.validate();
  }
};

struct EvalMetrics {
  double accuracy = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct MetricsRow {
  std::uint64_t seed = 0;
  long iteration = 0;
  std::string split;
  EvalMetrics m;
  double loss_total = 0.0;
  double loss_cls = 0.0;
  double loss_adv = 0.0;
  double loss_reg = 0.0;
  double lambda_adv = 0.0;
};

struct RunRecord {
  std::vector<MetricsRow> rows;
  // Final metric values per seed and split.
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> splits;
  std::map<std::pair<std::uint64_t, std::string>, EvalMetrics> finals;

  void write_metrics_csv(const std::string& path) const {
    CsvWriter w(path);
    w.row({"seed", "iteration", "split", "accuracy", "auc", "f1", "precision",
           "recall", "loss_total", "loss_cls", "loss_adv", "loss_reg",
           "lambda_adv"});
    for (const auto& r : rows)
      w.row({std::to_string(r.seed), std::to_string(r.iteration), r.split,
             fmt17(r.m.accuracy), fmt17(r.m.auc), fmt17(r.m.f1),
             fmt17(r.m.precision), fmt17(r.m.recall), fmt17(r.loss_total),
             fmt17(r.loss_cls), fmt17(r.loss_adv), fmt17(r.loss_reg),
             fmt17(r.lambda_adv)});
  }

  std::vector<double> final_values(const std::string& split,
                                   double EvalMetrics::* field) const {
    std::vector<double> v;
    for (auto seed : seeds) {
      auto it = finals.find({seed, split});
      if (it != finals.end()) v.push_back(it->second.*field);
    }
    return v;
  }

  // One row per seed (final metrics), then `mean` and `cv_percent` rows,
  // repeated per split.
  void write_summary_csv(const std::string& path) const {
    CsvWriter w(path);
    w.row({"seed", "split", "accuracy", "auc", "f1", "precision", "recall"});
    for (const auto& split : splits) {
      for (auto seed : seeds) {
        auto it = finals.find({seed, split});
        if (it == finals.end()) continue;
        const EvalMetrics& m = it->second;
        w.row({std::to_string(seed), split, fmt17(m.accuracy), fmt17(m.auc),
               fmt17(m.f1), fmt17(m.precision), fmt17(m.recall)});
      }
      std::vector<double EvalMetrics::*> fields = {
          &EvalMetrics::accuracy, &EvalMetrics::auc, &EvalMetrics::f1,
          &EvalMetrics::precision, &EvalMetrics::recall};
      std::vector<std::string> mean_row{"mean", split};
      std::vector<std::string> cv_row{"cv_percent", split};
      for (auto field : fields) {
        const auto vals = final_values(split, field);
        if (vals.empty()) {
          mean_row.push_back("");
          cv_row.push_back("");
          continue;
        }
        const SeedAggregate agg = seed_aggregate(vals);
        mean_row.push_back(fmt17(agg.mean));
        cv_row.push_back(agg.cv_defined ? fmt17(agg.cv_percent) : "");
      }
      w.row(mean_row);
      w.row(cv_row);
    }
  }
};

struct TrainOutput {
  std::vector<IadaParams> seed_params;  // final parameters, one per seed
  RunRecord record;

  const IadaParams& params() const { return seed_params.front(); }
};

namespace detail {

inline Array gather_rows(const Array& X, const std::vector<std::size_t>& idx) {
  Array out(Shape{idx.size(), X.cols()}, 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j)
      out.at(i, j) = X.at(idx[i], j);
  return out;
}

// (n x 1) node of true-class probabilities, via a one-hot mask and a
// column-of-ones matmul (row reduction).
inline ad::NodePtr pick_true_class(const ad::NodePtr& probs,
                                   const std::vector<int>& y) {
  const std::size_t n = probs->value.rows(), C = probs->value.cols();
  Array mask(Shape{n, C}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    mask.at(i, static_cast<std::size_t>(y[i] - 1)) = 1.0;
  Array ones(Shape{C, 1}, 1.0);
  return ad::matmul(ad::mul(probs, ad::constant(mask)), ad::constant(ones));
}

}  // namespace detail

// Metrics on a labeled set: decisions through the adaptive thresholds,
// scores through temperature-calibrated probabilities (class 1 positive).
inline EvalMetrics evaluate(const IadaParams& params, const LabeledDomain& dom,
                            const std::vector<double>& tau,
                            bool use_attention = true) {
  if (dom.n() == 0) throw ValueError("evaluate: empty domain");
  const Features f = extract_features(params, dom.X, use_attention);
  const Array logits = classifier_logits(params, f.Z)->value;
  const std::vector<int> pred = classify(logits, tau);
  const Array probs = calibrated_probs(logits, params.T);
  std::vector<double> scores(dom.y.size());
  std::vector<bool> positive(dom.y.size());
  for (std::size_t i = 0; i < dom.y.size(); ++i) {
    scores[i] = probs.at(i, 0);  // class 1 probability
    positive[i] = dom.y[i] == 1;
  }
  EvalMetrics m;
  const ConfusionMetrics cm = confusion_metrics(pred, dom.y, 1);
  m.accuracy = cm.accuracy;
  m.precision = cm.precision;
  m.recall = cm.recall;
  m.f1 = cm.f1;
  m.auc = auc_roc(scores, positive);
  return m;
}

// Decision thresholds for evaluation under the given config and parameters.
inline std::vector<double> eval_thresholds(const IadaParams& params,
                                           const std::vector<long>& counts,
                                           const TrainConfig& cfg) {
  if (cfg.threshold_mode == ThresholdMode::margin)
    return compute_thresholds(counts, params.beta->value.item(),
                              params.gamma->value.item());
  return compute_thresholds(counts, cfg.beta_init, cfg.gamma_init);
}

inline TrainOutput train(const LabeledDomain& src_train,
                         const LabeledDomain& src_val,
                         const UnlabeledDomain& tgt, const TrainConfig& cfg,
                         const std::vector<std::pair<std::string, LabeledDomain>>&
                             eval_sets = {}) {
  cfg.validate();
  if (src_train.n() == 0) throw ValueError("train: empty source training set");
  const std::size_t C = src_train.num_classes;
  const std::size_t d = src_train.d();
  if (tgt.X.cols() != d)
    throw ValueError("train: source and target feature dimensions differ");
  for (std::size_t c = 0; c < C; ++c)
    if (src_train.class_counts[c] == 0)
      throw ValueError("train: source class " + std::to_string(c + 1) +
                       " is missing");

  TrainOutput out;
  out.record.seeds = cfg.seeds;
  for (const auto& [name, dom] : eval_sets) out.record.splits.push_back(name);

  const ModelSizes sizes{d, cfg.hidden_dim, C};
  const long B = cfg.batch_budget;
  const long n_t = tgt.n();
  if (n_t == 0) throw ValueError("train: empty target set");

  std::vector<double> alloc_pi_t;
  if (cfg.alloc_hint == AllocHint::source) alloc_pi_t = src_train.pi_empirical;
  else alloc_pi_t.assign(C, 1.0 / static_cast<double>(C));
  const BatchAllocation alloc =
      allocate_batches(src_train.pi_empirical, alloc_pi_t, B, true);

  const ClassIndex idx(src_train.y, C);

  for (std::uint64_t seed : cfg.seeds) {
    Rng rng(seed);
    IadaParams params = init_params(sizes, rng, cfg.beta_init, cfg.gamma_init);
    BatchSampler sampler(idx);

    std::vector<double> omega(C, 1.0);
    if (cfg.use_class_weights)
      omega = class_weights(src_train.pi_empirical).omega;
    std::vector<long> window_counts(C, 0);

    const std::vector<double> frozen_tau =
        compute_thresholds(src_train.class_counts, cfg.beta_init, cfg.gamma_init);

    double last_cls = 0.0, last_adv = 0.0, last_reg = 0.0, last_lambda = 0.0;

    const auto model_params = params.all_arrays();
    for (long t = 0; t < cfg.iterations; ++t) {
      const double lambda_t =
          lambda_schedule(t, cfg.loss.lambda0, cfg.loss.warmup_tau);
      try {
        const std::vector<std::size_t> batch = sampler.draw(alloc, rng);
        // Per-batch class counts must equal the allocation exactly.
        {
          std::vector<long> counts(C, 0);
          for (std::size_t i : batch)
            ++counts[static_cast<std::size_t>(src_train.y[i] - 1)];
          for (std::size_t c = 0; c < C; ++c)
            if (counts[c] != alloc.b_int[c])
              throw std::logic_error("train: batch class counts deviate from allocation");
        }
        std::vector<int> y_batch(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
          y_batch[i] = src_train.y[batch[i]];
        for (std::size_t i = 0; i < batch.size(); ++i)
          ++window_counts[static_cast<std::size_t>(y_batch[i] - 1)];

        const Array X_s = detail::gather_rows(src_train.X, batch);
        std::vector<std::size_t> tgt_idx(static_cast<std::size_t>(B));
        for (auto& v : tgt_idx)
          v = static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(n_t)));
        const Array X_t = detail::gather_rows(tgt.X, tgt_idx);
        const Array X_s_aug = augment_view(X_s, cfg.augment_std, rng);

        const Features f_s = extract_features(params, X_s, cfg.use_attention);
        const Features f_t = extract_features(params, X_t, cfg.use_attention);
        const Features f_aug = extract_features(params, X_s_aug, cfg.use_attention);

        ad::NodePtr logits = classifier_logits(params, f_s.Z);
        ad::NodePtr adjusted = logits;
        if (cfg.threshold_mode == ThresholdMode::margin) {
          adjusted = ad::add(logits,
                             ad::neg(threshold_node(params, src_train.class_counts)));
        }
        const ad::NodePtr probs = ad::softmax(adjusted);
        const ad::NodePtr p_true = detail::pick_true_class(probs, y_batch);

        std::vector<double> omega_batch(batch.size(), 1.0);
        if (cfg.use_class_weights)
          for (std::size_t i = 0; i < batch.size(); ++i)
            omega_batch[i] = omega[static_cast<std::size_t>(y_batch[i] - 1)];

        const ad::NodePtr l_cls =
            focal_loss_node(p_true, omega_batch, cfg.loss.focal_gamma);
        const ad::NodePtr d_s = discriminate(params, f_s.Z, lambda_t);
        const ad::NodePtr d_t = discriminate(params, f_t.Z, lambda_t);
        const ad::NodePtr l_adv = adversarial_loss_node(d_s, d_t, omega_batch);
        const ad::NodePtr reg = regularizer_node(
            params.theta(), f_s.Z, f_aug.Z, f_s.head_outputs, cfg.weight_decay,
            cfg.loss.lambda2, cfg.loss.lambda3);
        const ad::NodePtr objective =
            assemble_objective(l_cls, l_adv, reg, lambda_t, cfg.loss.lambda_reg);

        last_cls = l_cls->value.item();
        last_adv = l_adv->value.item();
        last_reg = reg->value.item();
        last_lambda = lambda_t;

        ad::backward(objective);
        for (const auto& p : model_params) {
          for (std::size_t i = 0; i < p->value.size(); ++i)
            p->value[i] -= cfg.learning_rate * p->grad[i];
          p->zero_grad();
        }
        params.check_finite();
      } catch (const NumericError& e) {
        throw TrainingDiverged(t, "training diverged at iteration " +
                                      std::to_string(t) + ": " + e.what());
      }

      const bool eval_now =
          (t + 1) % cfg.eval_every == 0 || (t + 1) == cfg.iterations;
      if (eval_now) {
        if (cfg.use_class_weights) {
          long total = 0;
          for (long cnt : window_counts) total += cnt;
          if (total > 0) {
            for (std::size_t c = 0; c < C; ++c) {
              const double freq = static_cast<double>(window_counts[c]) /
                                  static_cast<double>(total);
              omega[c] = freq > 0.0 ? 1.0 / (static_cast<double>(C) * freq)
                                    : omega[c];
            }
          }
          window_counts.assign(C, 0);
        }
        const std::vector<double> tau =
            eval_thresholds(params, src_train.class_counts, cfg);
        for (const auto& [name, dom] : eval_sets) {
          MetricsRow row;
          row.seed = seed;
          row.iteration = t + 1;
          row.split = name;
          row.m = evaluate(params, dom, tau, cfg.use_attention);
          row.loss_cls = last_cls;
          row.loss_adv = last_adv;
          row.loss_reg = last_reg;
          row.lambda_adv = last_lambda;
          row.loss_total = total_objective(
              {last_cls, last_adv, last_lambda, last_reg, cfg.loss.lambda_reg});
          out.record.rows.push_back(row);
          if ((t + 1) == cfg.iterations)
            out.record.finals[{seed, name}] = row.m;
        }
      }
    }

    if (cfg.iterations > 0) {
      const Features f_val = extract_features(params, src_val.X, cfg.use_attention);
      const Array val_logits = classifier_logits(params, f_val.Z)->value;
      params.T = fit_temperature(val_logits, src_val.y);
    }
    out.seed_params.push_back(std::move(params));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation sweep over lambda_reg or lambda_adv (target-domain AUC).
// ---------------------------------------------------------------------------

enum class SweepAxis { lambda_reg, lambda_adv };

struct SweepRow {
  double value = 0.0;
  double auc_mean = 0.0;
  double auc_cv_percent = 0.0;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::lambda_reg;
  std::vector<SweepRow> rows;

  void write_csv(const std::string& path) const {
    CsvWriter w(path);
    w.row({axis == SweepAxis::lambda_reg ? "lambda_reg" : "lambda_adv",
           "target_auc_mean", "target_auc_cv_percent"});
    for (const auto& r : rows)
      w.row({fmt17(r.value), fmt17(r.auc_mean), fmt17(r.auc_cv_percent)});
  }
};

// Wall time of one training epoch (ceil(2n/B) full training steps over a
// generated pair with n samples per domain and d features). Data generation
// and model setup are excluded from the timed region. Used by the
// complexity-scaling check; the hidden width stays small so the per-sample
// cost is dominated by the d-linear term.
inline double time_training_epoch(long n, std::size_t d, std::size_t h = 8,
                                  long B = 64) {
  DomainSpec spec;
  spec.n = n;
  spec.d = d;
  spec.C = 2;
  spec.pi = {0.4, 0.6};
  spec.class_means.assign(2, std::vector<double>(d, 0.0));
  spec.class_means[0][0] = -1.0;
  spec.class_means[1][0] = 1.0;
  spec.class_scales = {1.0, 1.0};
  spec.mean_shift.assign(d, 0.0);
  spec.seed = 9001;
  DomainSpec tgt_spec = spec;
  tgt_spec.seed = 9002;
  auto [src, tgt] = generate_pair(spec, tgt_spec);

  Rng rng(7);
  IadaParams params = init_params({d, h, 2}, rng);
  const ClassIndex idx(src.y, 2);
  BatchSampler sampler(idx);
  const BatchAllocation alloc =
      allocate_batches(src.pi_empirical, src.pi_empirical, B, true);
  const std::vector<double> omega = class_weights(src.pi_empirical).omega;
  const auto model_params = params.all_arrays();
  const long iters = (2 * n + B - 1) / B;

  const auto start = std::chrono::steady_clock::now();
  for (long t = 0; t < iters; ++t) {
    const std::vector<std::size_t> batch = sampler.draw(alloc, rng);
    std::vector<int> y_batch(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) y_batch[i] = src.y[batch[i]];
    const Array X_s = detail::gather_rows(src.X, batch);
    std::vector<std::size_t> tgt_idx(static_cast<std::size_t>(B));
    for (auto& v : tgt_idx)
      v = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::uint64_t>(tgt.n())));
    const Array X_t = detail::gather_rows(tgt.X, tgt_idx);

    const Features f_s = extract_features(params, X_s);
    const Features f_t = extract_features(params, X_t);
    const ad::NodePtr probs =
        ad::softmax(classifier_logits(params, f_s.Z));
    const ad::NodePtr p_true = detail::pick_true_class(probs, y_batch);
    std::vector<double> omega_batch(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      omega_batch[i] = omega[static_cast<std::size_t>(y_batch[i] - 1)];
    const ad::NodePtr l_cls = focal_loss_node(p_true, omega_batch, 2.0);
    const ad::NodePtr d_s = discriminate(params, f_s.Z, 0.01);
    const ad::NodePtr d_t = discriminate(params, f_t.Z, 0.01);
    const ad::NodePtr l_adv = adversarial_loss_node(d_s, d_t, omega_batch);
    const ad::NodePtr objective =
        assemble_objective(l_cls, l_adv, nullptr, 0.01, 0.0);
    ad::backward(objective);
    for (const auto& p : model_params) {
      for (std::size_t i = 0; i < p->value.size(); ++i)
        p->value[i] -= 1e-3 * p->grad[i];
      p->zero_grad();
    }
  }
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(end - start).count();
}

inline SweepTable ablation_sweep(const TrainConfig& cfg_base, SweepAxis axis,
                                 const std::vector<double>& grid,
                                 const LabeledDomain& src_train,
                                 const LabeledDomain& src_val,
                                 const UnlabeledDomain& tgt) {
  if (grid.empty()) throw ValueError("ablation_sweep: empty grid");
  SweepTable table;
  table.axis = axis;
  const LabeledDomain tgt_eval = tgt.evaluation_view();
  for (double v : grid) {
    TrainConfig cfg = cfg_base;
    if (axis == SweepAxis::lambda_reg) cfg.loss.lambda_reg = v;
    else cfg.loss.lambda0 = v;
    const TrainOutput run =
        train(src_train, src_val, tgt, cfg, {{"target", tgt_eval}});
    const std::vector<double> aucs =
        run.record.final_values("target", &EvalMetrics::auc);
    const SeedAggregate agg = seed_aggregate(aucs);
    table.rows.push_back({v, agg.mean, agg.cv_defined ? agg.cv_percent : 0.0});
  }
  return table;
}

}  // namespace iada
