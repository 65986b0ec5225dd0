#include "desm/trainer.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "desm/corpus.h"
#include "desm/errors.h"
#include "desm/random.h"

namespace desm {

namespace {

GateActivation parse_activation(const std::string& s) {
  if (s == "gelu") return GateActivation::kGelu;
  if (s == "tanh") return GateActivation::kTanh;
  throw DataError("train config: unknown gate_activation '" + s + "'");
}

}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "d_c") c.d_c = v.get<size_t>();
      else if (key == "d_w") c.d_w = v.get<size_t>();
      else if (key == "layers") c.layers = v.get<size_t>();
      else if (key == "heads") c.heads = v.get<size_t>();
      else if (key == "d_ff") c.d_ff = v.get<size_t>();
      else if (key == "max_len") c.max_len = v.get<size_t>();
      else if (key == "use_copy") c.use_copy = v.get<bool>();
      else if (key == "gate_activation") c.gate_activation = parse_activation(v.get<std::string>());
      else if (key == "init_scale") c.init_scale = v.get<double>();
      else if (key == "copy_bias_init") c.copy_bias_init = v.get<double>();
      else if (key == "m_max") c.m_max = v.get<size_t>();
      else if (key == "lattice_mode") c.lattice_mode = parse_lattice_mode(v.get<std::string>());
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "adam_eps") c.adam_eps = v.get<double>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "clip_norm") c.clip_norm = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<size_t>();
      else if (key == "epochs") c.epochs = v.get<size_t>();
      else if (key == "max_steps") c.max_steps = v.get<size_t>();
      else if (key == "seed") c.seed = v.get<uint64_t>();
      else throw DataError("train config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
  if (c.batch_size == 0 || c.m_max == 0) {
    throw DataError("train config: batch_size and m_max must be positive");
  }
  if (!(c.lr > 0)) throw DataError("train config: lr must be positive");
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open train config: " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"d_c", d_c},
          {"d_w", d_w},
          {"layers", layers},
          {"heads", heads},
          {"d_ff", d_ff},
          {"max_len", max_len},
          {"use_copy", use_copy},
          {"gate_activation", gate_activation == GateActivation::kGelu ? "gelu" : "tanh"},
          {"init_scale", init_scale},
          {"copy_bias_init", copy_bias_init},
          {"m_max", m_max},
          {"lattice_mode", std::string(to_string(lattice_mode))},
          {"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"seed", seed}};
}

AdamOptimizer::AdamOptimizer(const ModelConfig& cfg, double lr, double beta1,
                             double beta2, double eps, double weight_decay)
    : m_(ModelParams<float>::zeros(cfg)),
      v_(ModelParams<float>::zeros(cfg)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {}

void AdamOptimizer::step(ModelParams<float>& params, const ModelParams<float>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto step = static_cast<float>(lr_ * std::sqrt(c2) / c1);
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  const auto eps = static_cast<float>(eps_ * std::sqrt(c2));
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  const auto decay = static_cast<float>(1.0 - lr_ * weight_decay_);
  for (size_t k = 0; k < p.size(); ++k) {
    if (weight_decay_ > 0) *p[k].second *= decay;
    auto ga = g[k].second->array();
    m[k].second->array() = b1 * m[k].second->array() + (1 - b1) * ga;
    v[k].second->array() = b2 * v[k].second->array() + (1 - b2) * ga.square();
    p[k].second->array() -=
        step * m[k].second->array() / (v[k].second->array().sqrt() + eps);
  }
}

std::vector<EpochLog> train_model(CorrectionModel<float>& model,
                                  const std::vector<Example>& data,
                                  const TrainConfig& cfg,
                                  const EpochCallback& on_epoch) {
  std::vector<EpochLog> logs;
  if (data.empty()) return logs;
  AdamOptimizer opt(model.config(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps,
                    cfg.weight_decay);
  auto grads = ModelParams<float>::zeros(model.config());
  Rng rng(derive_seed(cfg.seed, 0xda7a));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0;
    size_t positions_seen = 0;
    for (size_t b = 0; b < order.size(); b += cfg.batch_size) {
      if (cfg.max_steps && opt.steps() >= cfg.max_steps) break;
      size_t e = std::min(order.size(), b + cfg.batch_size);
      size_t positions = 0;
      for (size_t k = b; k < e; ++k) positions += data[order[k]].char_ids.size();
      if (positions == 0) continue;
      grads.set_zero();
      const float scale = 1.0f / static_cast<float>(positions);
      for (size_t k = b; k < e; ++k) {
        loss_sum += model.accumulate_gradients(data[order[k]], grads, scale);
      }
      positions_seen += positions;
      if (cfg.clip_norm > 0) {
        double sq = 0;
        for (const auto& [name, t] : std::as_const(grads).tensors()) {
          sq += t->template cast<double>().squaredNorm();
        }
        double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
          auto f = static_cast<float>(cfg.clip_norm / norm);
          for (auto& [name, t] : grads.tensors()) *t *= f;
        }
      }
      opt.step(model.params(), grads);
    }
    EpochLog log{epoch, opt.steps(),
                 positions_seen ? loss_sum / static_cast<double>(positions_seen) : 0.0};
    if (!std::isfinite(log.mean_loss)) {
      throw std::runtime_error("training diverged (non-finite loss)");
    }
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (cfg.max_steps && opt.steps() >= cfg.max_steps) break;
  }
  return logs;
}

Checkpoint train_corrector(const std::vector<ParallelPair>& corpus,
                           const Lexicon& lex, const PinyinTable& ptable,
                           const TrainConfig& cfg, const EpochCallback& on_epoch) {
  std::vector<char32_t> chars;
  for (const auto& p : corpus) {
    chars.insert(chars.end(), p.source.begin(), p.source.end());
    chars.insert(chars.end(), p.target.begin(), p.target.end());
  }
  for (const auto& e : lex.entries()) {
    chars.insert(chars.end(), e.surface.begin(), e.surface.end());
  }

  Checkpoint ckpt;
  ckpt.vocab = CharVocab::from_chars(std::move(chars));
  ckpt.features = {cfg.lattice_mode, cfg.m_max};
  ckpt.lexicon_crc = lexicon_fingerprint(lex);

  ModelConfig& mc = ckpt.config;
  mc.char_vocab_size = ckpt.vocab.size();
  mc.word_vocab_size = lex.size() + kFirstRealId;
  mc.d_c = cfg.d_c;
  mc.d_w = cfg.d_w;
  mc.layers = cfg.layers;
  mc.heads = cfg.heads;
  mc.d_ff = cfg.d_ff;
  mc.m_max = cfg.m_max;
  mc.max_len = cfg.max_len;
  mc.seed = cfg.seed;
  mc.use_copy = cfg.use_copy;
  mc.gate_activation = cfg.gate_activation;
  mc.copy_bias_init = cfg.copy_bias_init;
  mc.init_scale = cfg.init_scale;
  mc.validate();

  std::vector<Example> data;
  data.reserve(corpus.size());
  for (const auto& p : corpus) {
    if (p.source.size() > cfg.max_len) throw SequenceTooLong(p.source.size(), cfg.max_len);
    data.push_back(make_example(ckpt.vocab, lex, ptable, ckpt.features, p.source, p.target));
  }

  CorrectionModel<float> model(mc);
  train_model(model, data, cfg, on_epoch);
  ckpt.params = std::move(model.params());
  return ckpt;
}

Corrector make_corrector(const Checkpoint& ckpt, const Lexicon& lex,
                         const PinyinTable& ptable) {
  check_lexicon(ckpt, lex);
  return Corrector(CorrectionModel<float>(ckpt.config, ckpt.params), ckpt.vocab, lex,
                   ptable, ckpt.features);
}

}  // namespace desm
