#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "medcbr/corpus/image_ops.hpp"
#include "medcbr/corpus/manifest.hpp"
#include "medcbr/corpus/splits.hpp"
#include "medcbr/encoder/checkpoint.hpp"
#include "medcbr/encoder/model.hpp"
#include "medcbr/metrics/classification.hpp"
#include "medcbr/training/optim.hpp"
#include "medcbr/training/variant.hpp"
#include "medcbr/util/digest.hpp"
#include "medcbr/util/error.hpp"
#include "medcbr/util/log.hpp"
#include "medcbr/util/seed.hpp"

namespace medcbr {

struct EarlyStopConfig {
  std::string metric = "val_loss";
  int patience = 10;
  double min_delta = 0.0;
};

struct TrainConfig {
  double lr = 1e-5;
  int epochs = 150;
  int warmup_epochs = 10;
  std::string schedule = "cosine";
  AdamWConfig optimizer;
  int batch_size = 32;
  EarlyStopConfig early_stop;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augment_config;

  void validate() const {
    if (!(lr > 0)) throw ValidationError("train.lr must be > 0");
    if (epochs <= 0) throw ValidationError("train.epochs must be > 0");
    if (warmup_epochs < 0 || warmup_epochs >= epochs) throw ValidationError("train.warmup_epochs must be in [0, epochs)");
    if (schedule != "cosine") throw ValidationError("train.schedule: only 'cosine' is supported");
    if (batch_size <= 0) throw ValidationError("train.batch_size must be > 0");
    if (early_stop.metric != "val_loss") throw ValidationError("train.early_stop.metric: only 'val_loss' is supported");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"epochs", c.epochs},
          {"warmup_epochs", c.warmup_epochs},
          {"schedule", c.schedule},
          {"optimizer",
           {{"name", "adamw"},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"eps", c.optimizer.eps},
            {"weight_decay", c.optimizer.weight_decay}}},
          {"batch_size", c.batch_size},
          {"early_stop",
           {{"metric", c.early_stop.metric}, {"patience", c.early_stop.patience}, {"min_delta", c.early_stop.min_delta}}},
          {"seed", c.seed},
          {"augment", c.augment},
          {"augment_config",
           {{"max_translate_frac", c.augment_config.max_translate_frac},
            {"max_rotate_deg", c.augment_config.max_rotate_deg},
            {"hflip_prob", c.augment_config.hflip_prob}}}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.schedule = j.value("schedule", c.schedule);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    if (o.value("name", std::string("adamw")) != "adamw") throw ValidationError("train.optimizer.name: only 'adamw' is supported");
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.value("eps", c.optimizer.eps);
    c.optimizer.weight_decay = o.value("weight_decay", c.optimizer.weight_decay);
  }
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("early_stop")) {
    const auto& e = j.at("early_stop");
    c.early_stop.metric = e.value("metric", c.early_stop.metric);
    c.early_stop.patience = e.value("patience", c.early_stop.patience);
    c.early_stop.min_delta = e.value("min_delta", c.early_stop.min_delta);
  }
  c.seed = j.value("seed", c.seed);
  c.augment = j.value("augment", c.augment);
  if (j.contains("augment_config")) {
    const auto& a = j.at("augment_config");
    c.augment_config.max_translate_frac = a.value("max_translate_frac", c.augment_config.max_translate_frac);
    c.augment_config.max_rotate_deg = a.value("max_rotate_deg", c.augment_config.max_rotate_deg);
    c.augment_config.hflip_prob = a.value("hflip_prob", c.augment_config.hflip_prob);
  }
  return c;
}

using ReportMap = std::unordered_map<std::string, std::string>;

// Images decoded once, cropped to 224x224, with their un-augmented stem features.
struct PreparedCorpus {
  const DatasetManifest* manifest = nullptr;
  ImageStem stem;
  std::vector<cv::Mat> images;
  Matrix features;

  std::size_t size() const { return images.size(); }
};

inline PreparedCorpus prepare_corpus(const DatasetManifest& m, const EncoderConfig& enc) {
  PreparedCorpus pc;
  pc.manifest = &m;
  pc.stem = enc.image_stem();
  pc.features.resize(static_cast<Eigen::Index>(m.records.size()), pc.stem.dim());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    pc.images.push_back(crop_and_resize(load_image(m.image_file(m.records[i]))));
    pc.features.row(static_cast<Eigen::Index>(i)) = pc.stem(pc.images.back()).transpose();
  }
  return pc;
}

inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline Matrix concept_matrix(const DatasetManifest& m, const std::vector<std::size_t>& idx) {
  const auto n_c = idx.empty() ? 0 : m.records[idx[0]].concepts.size();
  Matrix c(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(n_c));
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < n_c; ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.records[idx[i]].concepts[j];
  return c;
}

inline std::vector<int> label_vector(const DatasetManifest& m, const std::vector<std::size_t>& idx) {
  std::vector<int> y;
  for (auto i : idx) y.push_back(m.records[i].label);
  return y;
}

// Text paired with each sample for the contrastive term: its enriched report
// or, with guideline text off, the label caption.
inline std::string contrastive_text(const VariantSpec& spec, const DatasetManifest& m, const SampleRecord& r,
                                    const ReportMap* reports) {
  if (!spec.use_guideline_text) return label_caption(m.labels.name(r.label));
  if (!reports) throw LookupError("no enriched report for sample '" + r.sample_id + "' (no report cache given)");
  auto it = reports->find(r.sample_id);
  if (it == reports->end()) throw LookupError("no enriched report for sample '" + r.sample_id + "'");
  return it->second;
}

struct EpochRecord {
  int epoch = 0;
  double lr = 0, tau = 0;
  double train_loss = 0, train_clip = 0, train_diag = 0, train_concept = 0;
  double val_loss = 0;
  std::optional<double> val_auroc, val_concept_auroc;
  double seconds = 0;
};

inline nlohmann::json to_json(const EpochRecord& e) {
  nlohmann::json j = {{"epoch", e.epoch},           {"lr", e.lr},
                      {"tau", e.tau},               {"train_loss", e.train_loss},
                      {"train_clip", e.train_clip}, {"train_diag", e.train_diag},
                      {"train_concept", e.train_concept}, {"val_loss", e.val_loss},
                      {"seconds", e.seconds}};
  j["val_auroc"] = e.val_auroc ? nlohmann::json(*e.val_auroc) : nlohmann::json(nullptr);
  j["val_concept_auroc"] = e.val_concept_auroc ? nlohmann::json(*e.val_concept_auroc) : nlohmann::json(nullptr);
  return j;
}

struct FoldResult {
  int fold = 0;
  int epochs_run = 0;
  int best_epoch = -1;
  bool stopped_early = false;
  double best_val_loss = 0;
  std::optional<double> val_auroc, val_concept_auroc;
  std::size_t batches_audited = 0;
  std::filesystem::path checkpoint;
  std::vector<EpochRecord> history;
};

inline nlohmann::json to_json(const FoldResult& r) {
  nlohmann::json j = {{"fold", r.fold},
                      {"epochs_run", r.epochs_run},
                      {"best_epoch", r.best_epoch},
                      {"stopped_early", r.stopped_early},
                      {"best_val_loss", r.best_val_loss},
                      {"batches_audited", r.batches_audited},
                      {"test_samples_in_training_batches", 0},
                      {"checkpoint", r.checkpoint.filename().string()}};
  j["val_auroc"] = r.val_auroc ? nlohmann::json(*r.val_auroc) : nlohmann::json(nullptr);
  j["val_concept_auroc"] = r.val_concept_auroc ? nlohmann::json(*r.val_concept_auroc) : nlohmann::json(nullptr);
  return j;
}

inline PredictionSet predict_indices(const ModelParams& p, HeadKind head, const PreparedCorpus& pc,
                                     const std::vector<std::size_t>& idx, const ConceptBank& bank) {
  PredictionSet ps;
  for (const auto& e : bank.entries()) ps.concept_keys.push_back(e.key);
  if (idx.empty()) return ps;
  const auto preds = predict_features(p, head, gather_rows(pc.features, idx));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& r = pc.manifest->records[idx[i]];
    ps.records.push_back({r.sample_id, r.label, preds[i].y_hat, r.concepts, preds[i].c_hat});
  }
  return ps;
}

struct Evaluation {
  double loss = 0;
  std::optional<double> auroc, concept_auroc;
};

// Weighted loss over an index set in fixed-size chunks, plus ranking metrics.
inline Evaluation evaluate_indices(const ModelParams& p, const ModelAssembly& a, const PreparedCorpus& pc,
                                   const std::vector<std::size_t>& idx, const Matrix* text_features,
                                   const ConceptBank& bank, int batch_size) {
  Evaluation ev;
  if (idx.empty()) return ev;
  double total = 0;
  for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(s),
                                   idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), s + static_cast<std::size_t>(batch_size))));
    Batch b;
    b.image_features = gather_rows(pc.features, chunk);
    if (text_features) b.text_features = gather_rows(*text_features, chunk);
    b.labels = label_vector(*pc.manifest, chunk);
    b.concepts = concept_matrix(*pc.manifest, chunk);
    total += loss_and_grad(p, a, b, false, nullptr).total * static_cast<double>(chunk.size());
  }
  ev.loss = total / static_cast<double>(idx.size());
  const auto ps = predict_indices(p, a.head, pc, idx, bank);
  try {
    ev.auroc = auroc(ps.y_scores(), ps.y_true());
  } catch (const UndefinedMetricError&) {
  }
  ev.concept_auroc = mean_present(per_concept_auroc(ps));
  return ev;
}

inline constexpr double kMinTau = 0.01;

// Trains one cross-validation round and writes fold_dir/{metrics.jsonl,
// checkpoint.bin, summary.json}.
inline FoldResult fit_fold(const VariantSpec& spec, const EncoderConfig& enc, const TrainConfig& cfg,
                           const PreparedCorpus& pc, const ConceptBank& bank, const ReportMap* reports,
                           const FoldSplit& split, const std::filesystem::path& fold_dir) {
  cfg.validate();
  const ModelAssembly assembly = build_variant(spec, enc);
  const DatasetManifest& m = *pc.manifest;
  if (split.train.empty()) throw ValidationError("fold " + std::to_string(split.test_fold) + " has no training samples");
  if (static_cast<std::size_t>(enc.n_concepts) != bank.size())
    throw ValidationError("encoder.n_concepts (" + std::to_string(enc.n_concepts) + ") does not match bank '" +
                          bank.id() + "' (" + std::to_string(bank.size()) + ")");

  std::unordered_set<std::string> test_ids;
  for (auto i : split.test) test_ids.insert(m.records[i].sample_id);

  const TextStem text_stem = enc.text_stem();
  Matrix text_features;
  const bool text = assembly.use_text && assembly.weights.lambda > 0;
  if (text) {
    text_features = Matrix::Zero(static_cast<Eigen::Index>(m.records.size()), text_stem.dim());
    for (const auto* part : {&split.train, &split.val})
      for (auto i : *part)
        text_features.row(static_cast<Eigen::Index>(i)) = text_stem(contrastive_text(spec, m, m.records[i], reports)).transpose();
  }

  EncoderConfig init_cfg = enc;
  init_cfg.init_seed = derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(split.test_fold)});
  ModelParams params = init_params(init_cfg, assembly.head);
  if (!enc.pretrained_checkpoint.empty()) load_pretrained_encoder(params, enc.pretrained_checkpoint);
  ModelParams best = params;
  std::vector<std::string> frozen;
  if (!enc.temperature_learnable) frozen.push_back("log_tau");

  AdamW opt(cfg.optimizer);
  EarlyStopper stopper(cfg.early_stop.patience, cfg.early_stop.min_delta);
  const long bs = cfg.batch_size;
  const long steps_per_epoch = (static_cast<long>(split.train.size()) + bs - 1) / bs;
  const long total_steps = steps_per_epoch * cfg.epochs;
  const long warmup_steps = steps_per_epoch * cfg.warmup_epochs;

  std::filesystem::create_directories(fold_dir);
  const auto metrics_path = fold_dir / "metrics.jsonl";
  std::ofstream metrics_out(metrics_path, std::ios::app);

  FoldResult result;
  result.fold = split.test_fold;
  long step = 0;
  std::vector<std::size_t> order = split.train;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(split.test_fold), static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double seen = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(bs)) {
      std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(s),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + static_cast<std::size_t>(bs))));
      for (auto i : chunk)
        if (test_ids.count(m.records[i].sample_id))
          throw ProtocolError("test sample '" + m.records[i].sample_id + "' reached a training batch");
      ++result.batches_audited;
      Batch b;
      b.image_features.resize(static_cast<Eigen::Index>(chunk.size()), pc.stem.dim());
      for (std::size_t k = 0; k < chunk.size(); ++k) {
        const auto i = chunk[k];
        if (cfg.augment) {
          const auto seed = derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(epoch), i});
          b.image_features.row(static_cast<Eigen::Index>(k)) =
              pc.stem(augment(pc.images[i], seed, cfg.augment_config)).transpose();
        } else {
          b.image_features.row(static_cast<Eigen::Index>(k)) = pc.features.row(static_cast<Eigen::Index>(i));
        }
      }
      if (text) b.text_features = gather_rows(text_features, chunk);
      b.labels = label_vector(m, chunk);
      b.concepts = concept_matrix(m, chunk);
      ModelParams grads;
      const auto l = loss_and_grad(params, assembly, b, enc.temperature_learnable, &grads);
      const double lr = lr_schedule(step, total_steps, warmup_steps, cfg.lr);
      opt.step(params, grads, lr, frozen);
      params.log_tau = std::max(params.log_tau, std::log(kMinTau));
      ++step;
      const double w = static_cast<double>(chunk.size());
      rec.train_loss += l.total * w;
      rec.train_clip += l.clip * w;
      rec.train_diag += l.diag * w;
      rec.train_concept += l.concepts * w;
      seen += w;
      rec.lr = lr;
    }
    rec.train_loss /= seen;
    rec.train_clip /= seen;
    rec.train_diag /= seen;
    rec.train_concept /= seen;
    rec.tau = params.tau();

    const bool has_val = !split.val.empty();
    const auto& monitor_idx = has_val ? split.val : split.train;
    const auto ev = evaluate_indices(params, assembly, pc, monitor_idx, text ? &text_features : nullptr, bank, cfg.batch_size);
    rec.val_loss = ev.loss;
    rec.val_auroc = ev.auroc;
    rec.val_concept_auroc = ev.concept_auroc;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    metrics_out << to_json(rec).dump() << '\n';
    metrics_out.flush();
    result.history.push_back(rec);
    result.epochs_run = epoch + 1;

    const bool stop = stopper.update(epoch, ev.loss);
    if (stopper.improved_at(epoch)) {
      best = params;
      result.best_val_loss = ev.loss;
      result.val_auroc = ev.auroc;
      result.val_concept_auroc = ev.concept_auroc;
    }
    if (stop) {
      result.stopped_early = true;
      log::info("fold " + std::to_string(split.test_fold) + ": early stop at epoch " + std::to_string(epoch));
      break;
    }
  }
  if (split.val.empty()) log::warn("fold " + std::to_string(split.test_fold) + " has no validation split; monitoring training loss");
  result.best_epoch = stopper.best_epoch();

  Checkpoint ck;
  ck.encoder = enc;
  ck.assembly = assembly;
  ck.variant = to_string(spec.kind);
  ck.params = best;
  ck.metadata = to_json(result);
  ck.metadata["variant_spec"] = to_json(spec);
  ck.metadata["train_config"] = to_json(cfg);
  ck.metadata["bank_id"] = bank.id();
  result.checkpoint = fold_dir / "checkpoint.bin";
  save_checkpoint(result.checkpoint, ck);
  write_file(fold_dir / "summary.json", to_json(result).dump(2) + "\n");
  return result;
}

struct FitResult {
  std::vector<FoldResult> folds;
};

// Runs the requested folds (all when `folds` is empty) under run_dir/fold_<i>.
inline FitResult fit(const VariantSpec& spec, const EncoderConfig& enc, const TrainConfig& cfg, const DatasetManifest& m,
                     const ConceptBank& bank, const ReportMap* reports, const SplitPlan& plan,
                     const std::filesystem::path& run_dir, std::vector<int> folds = {}) {
  if (folds.empty())
    for (int f = 0; f < plan.k; ++f) folds.push_back(f);
  // Surface a missing report before any image is decoded.
  if (spec.uses_text() && spec.use_guideline_text && spec.loss_weights.lambda > 0)
    for (int f : folds) {
      const auto split = split_for_fold(m, plan, f);
      for (const auto* part : {&split.train, &split.val})
        for (auto i : *part) contrastive_text(spec, m, m.records[i], reports);
    }
  const PreparedCorpus pc = prepare_corpus(m, enc);
  std::filesystem::create_directories(run_dir);
  save_split_plan(plan, run_dir / "folds.json");
  FitResult out;
  nlohmann::json summary = {{"variant", to_json(spec)}, {"folds", nlohmann::json::array()}};
  for (int f : folds) {
    const auto split = split_for_fold(m, plan, f);
    out.folds.push_back(fit_fold(spec, enc, cfg, pc, bank, reports, split, run_dir / ("fold_" + std::to_string(f))));
    summary["folds"].push_back(to_json(out.folds.back()));
    log::info("fold " + std::to_string(f) + " done: val_auroc=" +
              (out.folds.back().val_auroc ? std::to_string(*out.folds.back().val_auroc) : std::string("n/a")));
  }
  write_file(run_dir / "summary.json", summary.dump(2) + "\n");
  return out;
}

}  // namespace medcbr
