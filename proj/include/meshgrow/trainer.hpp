#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "meshgrow/adam.hpp"
#include "meshgrow/checkpoint.hpp"
#include "meshgrow/gan.hpp"
#include "meshgrow/losses.hpp"
#include "meshgrow/metrics.hpp"
#include "meshgrow/rng.hpp"
#include "meshgrow/synth.hpp"

namespace meshgrow {

enum class ReconMode { kL1, kCd };
enum class Precision { kF32, kF64 };

std::string to_string(ReconMode m);
ReconMode recon_from_string(const std::string& s);
std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

// Training setup. Optimizer constants follow the paper (alpha 2e-4, beta1
// 0.5, batch size 1); loss weights and the backbone/loss switches cover the
// ablation grid.
struct TrainConfig {
  int epochs = 100;
  int batch_size = 1;  // fixed at 1
  uint64_t seed = 1;
  double alpha = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lambda_rec = 100.0;
  double lambda_adv = 1.0;
  ReconMode recon = ReconMode::kL1;
  bool adversarial = true;
  Backbone backbone = Backbone::kKcnGcn;
  bool use_condition = true;
  Precision precision = Precision::kF32;
  int k_neighbors = 8;
  int checkpoint_every = 25;
  int eval_every = 1;
  int eval_max_pairs = 128;

  void validate() const;
  std::string to_json_string() const;
  // Rejects unknown keys by name; missing keys keep their defaults.
  static TrainConfig from_json_string(const std::string& text);
  static TrainConfig from_json_file(const std::filesystem::path& path);
};

// One supervised pair resolved to meshes. The meshes must outlive the set.
struct TrainSample {
  std::string id;
  const Mesh* source = nullptr;
  const Mesh* target = nullptr;
  ClinicalCondition condition;
};

// Training/validation samples over one shared topology.
struct SampleSet {
  GraphTopology topology;
  int32_t n_rings = 0;
  int32_t ring_size = 0;
  std::vector<TrainSample> train;
  std::vector<TrainSample> val;
};

// Resolves a dataset split into samples backed by the dataset's mesh cache.
SampleSet samples_from_dataset(const Dataset& ds);
std::vector<TrainSample> resolve_pairs(const Dataset& ds,
                                       const std::vector<TrainingPair>& pairs);

struct StepStats {
  double recon = 0.0;   // reconstruction term, mm
  double g_loss = 0.0;  // full generator objective
  double d_loss = 0.0;  // discriminator objective (0 when adversarial off)
};

struct EpochLogRow {
  int epoch = 0;
  std::string split;
  double l1 = 0.0, cd = 0.0, hd = 0.0, mis_err = 0.0;
};

// Alternating GAN loop: per pair one discriminator update (when adversarial
// is enabled) followed by one generator update. Deterministic for a fixed
// seed and config.
template <typename T>
class Trainer {
 public:
  Trainer(const SampleSet& samples, TrainConfig config)
      : samples_(samples), config_(std::move(config)), rng_(config_.seed) {
    config_.validate();
    if (samples_.train.empty()) {
      throw ContractError("trainer: no training pairs");
    }
    generator_ = GeneratorParams<T>::init(rng_, config_.backbone,
                                          config_.use_condition,
                                          config_.k_neighbors);
    if (config_.adversarial) {
      discriminator_ = DiscriminatorParams<T>::init(rng_);
    }
    const AdamConfig<T> adam_cfg{
        static_cast<T>(config_.alpha), static_cast<T>(config_.beta1),
        static_cast<T>(config_.beta2), static_cast<T>(config_.eps)};
    adam_g_.emplace(generator_.parameters(), adam_cfg);
    if (config_.adversarial) {
      adam_d_.emplace(discriminator_->parameters(), adam_cfg);
    }
    // Fixed evaluation subsets keep the per-epoch metric pass affordable on
    // large pair sets while staying deterministic and resume-stable.
    eval_train_idx_ = pick_eval_subset(samples_.train.size());
    eval_val_idx_ = pick_eval_subset(samples_.val.size());
  }

  const TrainConfig& config() const { return config_; }
  GeneratorParams<T>& generator() { return generator_; }
  DiscriminatorParams<T>& discriminator() { return *discriminator_; }
  bool has_discriminator() const { return discriminator_.has_value(); }
  int epoch() const { return epoch_; }
  const std::vector<EpochLogRow>& log() const { return log_; }

  // One optimization step on one pair. Numeric faults are annotated with the
  // global step index.
  StepStats step(const TrainSample& sample) {
    try {
      return step_impl(sample);
    } catch (const NumericFault& e) {
      throw NumericFault(std::string(e.what()) + " at step " +
                         std::to_string(global_step_));
    }
  }

  // Runs the remaining epochs, appending the metric log and writing
  // epoch-stamped checkpoints plus ckpt_final.mgan under out_dir.
  void train(const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto log_path = out_dir / "training_log.csv";
    const bool fresh_log = epoch_ == 0 || !std::filesystem::exists(log_path);
    std::ofstream log_out(log_path,
                          fresh_log ? std::ios::out : std::ios::app);
    if (!log_out) throw IoError("trainer: cannot write " + log_path.string());
    if (fresh_log) log_out << "epoch,split,l1,cd,hd,mis_err\n";

    std::vector<size_t> order(samples_.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    while (epoch_ < config_.epochs) {
      rng_.shuffle(order.begin(), order.end());
      for (size_t idx : order) step(samples_.train[idx]);
      ++epoch_;
      if (epoch_ % config_.eval_every == 0 || epoch_ == config_.epochs) {
        for (const auto& row : evaluate_epoch()) {
          log_.push_back(row);
          char buf[192];
          std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.9g\n",
                        row.epoch, row.split.c_str(), row.l1, row.cd, row.hd,
                        row.mis_err);
          log_out << buf;
          log_out.flush();
        }
      }
      if (epoch_ % config_.checkpoint_every == 0 && epoch_ < config_.epochs) {
        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_epoch_%04d.mgan", epoch_);
        save_checkpoint(out_dir / name);
      }
    }
    save_checkpoint(out_dir / "ckpt_final.mgan");
  }

  Mesh predict(const Mesh& source, const ClinicalCondition& cond) {
    return predict_mesh(source, samples_.topology, encode_condition(cond),
                        generator_);
  }

  void save_checkpoint(const std::filesystem::path& path) {
    CheckpointFile ckpt;
    ckpt.add(TensorBlob::from_i64("meta.epoch", epoch_));
    ckpt.add(TensorBlob::from_i64("meta.step", global_step_));
    ckpt.add(TensorBlob::from_string("meta.config", config_.to_json_string()));
    ckpt.add(TensorBlob::from_values<int64_t>(
        "meta.grid", {2},
        {samples_.n_rings, samples_.ring_size}));
    ckpt.add(TensorBlob::from_string("meta.rng", rng_.state()));
    visit_all([&](const std::string& name, ad::Tensor<T>& t) {
      std::vector<uint64_t> extents(t.shape().begin(), t.shape().end());
      ckpt.add(TensorBlob::from_values<T>(name, std::move(extents),
                                          t.values()));
    });
    save_adam(ckpt, "adam_g", *adam_g_, generator_.parameters().size());
    if (discriminator_) {
      save_adam(ckpt, "adam_d", *adam_d_, discriminator_->parameters().size());
    }
    ckpt.save(path);
  }

  // Restores parameters, optimizer state, epoch counter and RNG stream; the
  // checkpoint must have been written with an equivalent config.
  void load_checkpoint(const std::filesystem::path& path) {
    const CheckpointFile ckpt = CheckpointFile::load(path);
    const TrainConfig stored =
        TrainConfig::from_json_string(ckpt.get("meta.config").as_string());
    if (stored.backbone != config_.backbone ||
        stored.use_condition != config_.use_condition ||
        stored.precision != config_.precision ||
        stored.k_neighbors != config_.k_neighbors) {
      throw IoError("trainer: checkpoint config mismatch");
    }
    epoch_ = static_cast<int>(ckpt.get("meta.epoch").as_i64());
    global_step_ = ckpt.get("meta.step").as_i64();
    rng_.restore(ckpt.get("meta.rng").as_string());
    visit_all([&](const std::string& name, ad::Tensor<T>& t) {
      load_into(ckpt, name, t);
    });
    load_adam(ckpt, "adam_g", *adam_g_);
    if (discriminator_) load_adam(ckpt, "adam_d", *adam_d_);
  }

 private:
  StepStats step_impl(const TrainSample& sample) {
    StepStats stats;
    const auto cond = encode_condition(sample.condition);
    auto vs = vertices_tensor<T>(*sample.source);
    auto vt = vertices_tensor<T>(*sample.target);
    auto predicted =
        generator_forward(vs, samples_.topology, cond, generator_);

    if (config_.adversarial) {
      auto d_real =
          discriminator_forward(vt, samples_.topology, cond, *discriminator_);
      auto d_fake_detached = discriminator_forward(
          predicted.detached(), samples_.topology, cond, *discriminator_);
      auto d_loss = lsgan_d_loss(d_real, d_fake_detached);
      // Clear gradients the previous generator update pushed through D.
      for (auto& p : discriminator_->parameters()) p.zero_grad();
      ad::backward(d_loss);
      adam_d_->step();
      stats.d_loss = static_cast<double>(d_loss.item());
    }

    auto recon = config_.recon == ReconMode::kL1 ? l1_recon(predicted, vt)
                                                 : chamfer_loss(predicted, vt);
    auto g_loss = ad::scale(recon, config_.lambda_rec);
    if (config_.adversarial && config_.lambda_adv > 0.0) {
      auto d_fake = discriminator_forward(predicted, samples_.topology, cond,
                                          *discriminator_);
      g_loss = ad::add(g_loss,
                       ad::scale(lsgan_g_loss(d_fake), config_.lambda_adv));
    }
    for (auto& p : generator_.parameters()) p.zero_grad();
    ad::backward(g_loss);
    adam_g_->step();

    stats.recon = static_cast<double>(recon.item());
    stats.g_loss = static_cast<double>(g_loss.item());
    ++global_step_;
    return stats;
  }

  std::vector<size_t> pick_eval_subset(size_t n) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    if (static_cast<int>(n) > config_.eval_max_pairs) {
      Rng pick(config_.seed ^ 0xe7a15ab5e7ULL);
      pick.shuffle(idx.begin(), idx.end());
      idx.resize(config_.eval_max_pairs);
      std::sort(idx.begin(), idx.end());
    }
    return idx;
  }

  std::vector<EpochLogRow> evaluate_epoch() {
    std::vector<EpochLogRow> rows;
    const struct {
      const char* name;
      const std::vector<TrainSample>* samples;
      const std::vector<size_t>* subset;
    } splits[] = {{"train", &samples_.train, &eval_train_idx_},
                  {"val", &samples_.val, &eval_val_idx_}};
    for (const auto& sp : splits) {
      if (sp.subset->empty()) continue;
      EpochLogRow row;
      row.epoch = epoch_;
      row.split = sp.name;
      for (size_t idx : *sp.subset) {
        const auto& s = (*sp.samples)[idx];
        const Mesh predicted = predict(*s.source, s.condition);
        row.l1 += mae(predicted, *s.target);
        row.cd += chamfer_distance(predicted, *s.target);
        row.hd += hausdorff(predicted, *s.target);
        row.mis_err += std::abs(
            mis_diameter(predicted, samples_.n_rings, samples_.ring_size) -
            mis_diameter(*s.target, samples_.n_rings, samples_.ring_size));
      }
      const double n = static_cast<double>(sp.subset->size());
      row.l1 /= n;
      row.cd /= n;
      row.hd /= n;
      row.mis_err /= n;
      rows.push_back(std::move(row));
    }
    return rows;
  }

  template <typename Fn>
  void visit_all(Fn&& fn) {
    generator_.visit("g", fn);
    if (discriminator_) discriminator_->visit("d", fn);
  }

  void save_adam(CheckpointFile& ckpt, const std::string& prefix,
                 Adam<T>& adam, size_t n_params) {
    ckpt.add(TensorBlob::from_i64("meta." + prefix + ".t", adam.step_count()));
    for (size_t i = 0; i < n_params; ++i) {
      ckpt.add(TensorBlob::from_values<T>(
          prefix + ".m." + std::to_string(i),
          {adam.first_moment(i).size()}, adam.first_moment(i)));
      ckpt.add(TensorBlob::from_values<T>(
          prefix + ".v." + std::to_string(i),
          {adam.second_moment(i).size()}, adam.second_moment(i)));
    }
  }

  void load_adam(const CheckpointFile& ckpt, const std::string& prefix,
                 Adam<T>& adam) {
    adam.set_step_count(ckpt.get("meta." + prefix + ".t").as_i64());
    for (size_t i = 0; i < adam.size(); ++i) {
      auto m = ckpt.get(prefix + ".m." + std::to_string(i)).values<T>();
      auto v = ckpt.get(prefix + ".v." + std::to_string(i)).values<T>();
      if (m.size() != adam.first_moment(i).size() ||
          v.size() != adam.second_moment(i).size()) {
        throw IoError("trainer: optimizer state shape mismatch");
      }
      adam.first_moment(i) = std::move(m);
      adam.second_moment(i) = std::move(v);
    }
  }

  void load_into(const CheckpointFile& ckpt, const std::string& name,
                 ad::Tensor<T>& t) {
    const auto& blob = ckpt.get(name);
    auto values = blob.values<T>();
    if (static_cast<int64_t>(values.size()) != t.numel()) {
      throw IoError("trainer: shape mismatch loading " + name);
    }
    t.values() = std::move(values);
  }

  const SampleSet& samples_;
  TrainConfig config_;
  Rng rng_;
  GeneratorParams<T> generator_;
  std::optional<DiscriminatorParams<T>> discriminator_;
  std::optional<Adam<T>> adam_g_;
  std::optional<Adam<T>> adam_d_;
  std::vector<size_t> eval_train_idx_;
  std::vector<size_t> eval_val_idx_;
  std::vector<EpochLogRow> log_;
  int epoch_ = 0;
  int64_t global_step_ = 0;
};

// Generator restored from a checkpoint for inference, plus the config echo
// and the ring grid it was trained on.
template <typename T>
struct LoadedGenerator {
  TrainConfig config;
  GeneratorParams<T> params;
  int32_t n_rings = 0;
  int32_t ring_size = 0;
};

// Reads the stored precision without committing to a scalar type.
inline TrainConfig peek_checkpoint_config(const std::filesystem::path& path) {
  return TrainConfig::from_json_string(
      CheckpointFile::load(path).get("meta.config").as_string());
}

template <typename T>
LoadedGenerator<T> load_generator(const std::filesystem::path& path) {
  const CheckpointFile ckpt = CheckpointFile::load(path);
  LoadedGenerator<T> out;
  out.config =
      TrainConfig::from_json_string(ckpt.get("meta.config").as_string());
  const Precision want =
      std::is_same_v<T, float> ? Precision::kF32 : Precision::kF64;
  if (out.config.precision != want) {
    throw IoError("checkpoint: stored precision is " +
                  to_string(out.config.precision));
  }
  Rng init_rng(out.config.seed);
  out.params = GeneratorParams<T>::init(init_rng, out.config.backbone,
                                        out.config.use_condition,
                                        out.config.k_neighbors);
  out.params.visit("g", [&](const std::string& name, ad::Tensor<T>& t) {
    auto values = ckpt.get(name).values<T>();
    if (static_cast<int64_t>(values.size()) != t.numel()) {
      throw IoError("checkpoint: shape mismatch loading " + name);
    }
    t.values() = std::move(values);
  });
  const auto grid = ckpt.get("meta.grid").values<int64_t>();
  out.n_rings = static_cast<int32_t>(grid.at(0));
  out.ring_size = static_cast<int32_t>(grid.at(1));
  return out;
}

// Test pairs of a split resolved for metrics::evaluate. Meshes are resolved
// eagerly so the evaluation loop can fan out across workers.
std::vector<EvalPair> eval_pairs_for_split(const Dataset& ds,
                                           const std::string& split);

}  // namespace meshgrow
