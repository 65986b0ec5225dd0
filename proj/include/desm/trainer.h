#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "desm/checkpoint.h"
#include "desm/model.h"

namespace desm {

struct ParallelPair;

/// Hyperparameters for one training run. Loadable from a flat JSON object;
/// unknown keys are rejected.
struct TrainConfig {
  // model shape
  size_t d_c = 64;
  size_t d_w = 32;
  size_t layers = 2;
  size_t heads = 2;
  size_t d_ff = 0;
  size_t max_len = 512;
  bool use_copy = true;
  GateActivation gate_activation = GateActivation::kGelu;
  double init_scale = 0.1;
  double copy_bias_init = 2.0;
  // features
  size_t m_max = kDefaultMMax;
  LatticeMode lattice_mode = LatticeMode::kDesm;
  // optimization
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW)
  double clip_norm = 1.0;  // 0 disables clipping
  size_t batch_size = 32;
  size_t epochs = 10;
  size_t max_steps = 0;  // 0 = no limit
  uint64_t seed = 1;

  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Adam over every tensor of ModelParams<float>.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelConfig& cfg, double lr, double beta1, double beta2,
                double eps, double weight_decay = 0.0);
  void step(ModelParams<float>& params, const ModelParams<float>& grads);
  size_t steps() const { return t_; }

 private:
  ModelParams<float> m_, v_;
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  size_t t_ = 0;
};

struct EpochLog {
  size_t epoch = 0;
  size_t steps = 0;
  double mean_loss = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch training. Shuffling, batching and accumulation order depend
/// only on `cfg.seed`, so a run is bit-reproducible.
std::vector<EpochLog> train_model(CorrectionModel<float>& model,
                                  const std::vector<Example>& data,
                                  const TrainConfig& cfg,
                                  const EpochCallback& on_epoch = {});

/// Builds the vocabulary from the corpus and the lexicon, then trains.
Checkpoint train_corrector(const std::vector<ParallelPair>& corpus,
                           const Lexicon& lex, const PinyinTable& ptable,
                           const TrainConfig& cfg,
                           const EpochCallback& on_epoch = {});

/// Model, vocabulary and features for a checkpoint; lexicon is verified.
Corrector make_corrector(const Checkpoint& ckpt, const Lexicon& lex,
                         const PinyinTable& ptable);

}  // namespace desm
