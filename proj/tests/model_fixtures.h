#pragma once

// Random model inputs and the central-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "desm/model.h"

namespace desm::testing {

inline ModelConfig tiny_config(uint64_t seed = 3) {
  ModelConfig c;
  c.char_vocab_size = 20;
  c.word_vocab_size = 12;
  c.d_c = 8;
  c.d_w = 8;
  c.layers = 1;
  c.heads = 2;
  c.m_max = 3;
  c.max_len = 16;
  c.seed = seed;
  c.init_scale = 0.5;
  return c;
}

/// Random ids with a random mask; slot 0..k-1 real, rest PAD.
inline Example random_example(std::mt19937_64& rng, const ModelConfig& cfg, size_t n,
                              double empty_prob = 0.25) {
  Example ex;
  std::uniform_int_distribution<int32_t> ch(2, static_cast<int32_t>(cfg.char_vocab_size) - 1);
  std::uniform_int_distribution<int32_t> wd(2, static_cast<int32_t>(cfg.word_vocab_size) - 1);
  std::uniform_int_distribution<size_t> cnt(1, cfg.m_max);
  std::bernoulli_distribution empty(empty_prob);
  std::bernoulli_distribution same(0.6);
  ex.words.n = n;
  ex.words.m_max = cfg.m_max;
  ex.words.ids.assign(n * cfg.m_max, kPadId);
  ex.words.mask.assign(n * cfg.m_max, 0);
  for (size_t i = 0; i < n; ++i) {
    ex.char_ids.push_back(ch(rng));
    ex.gold_ids.push_back(same(rng) ? ex.char_ids.back() : ch(rng));
    if (empty(rng)) continue;
    size_t k = cnt(rng);
    for (size_t j = 0; j < k; ++j) {
      ex.words.ids[i * cfg.m_max + j] = wd(rng);
      ex.words.mask[i * cfg.m_max + j] = 1;
    }
  }
  return ex;
}

struct GradCheckResult {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
};

/// Mean loss of one example, evaluated from scratch.
inline double mean_loss(const CorrectionModel<double>& m, const Example& ex) {
  auto out = m.forward(ex);
  return correction_loss<double>(out.prob, ex.gold_ids);
}

/// Compares accumulate_gradients against central differences at `samples`
/// parameters drawn from tensors that influence the loss. `must_include`
/// tensors are always sampled at least `per_required` times.
inline std::vector<GradCheckResult> gradient_check(
    CorrectionModel<double>& model, const Example& ex, size_t samples, uint64_t seed,
    const std::vector<std::string>& must_include, size_t per_required = 5,
    double h = 1e-5) {
  auto grads = ModelParams<double>::zeros(model.config());
  model.accumulate_gradients(ex, grads, 1.0 / static_cast<double>(ex.char_ids.size()));
  auto ptensors = model.params().tensors();
  auto gtensors = grads.tensors();

  std::mt19937_64 rng(seed);
  // Rows actually touched by this example for the lookup tables.
  std::vector<Eigen::Index> char_rows(ex.char_ids.begin(), ex.char_ids.end());
  std::vector<Eigen::Index> word_rows;
  for (size_t k = 0; k < ex.words.ids.size(); ++k) {
    if (ex.words.mask[k]) word_rows.push_back(ex.words.ids[k]);
  }
  auto pick_index = [&](const std::string& name, const Mat<double>& m) -> Eigen::Index {
    std::uniform_int_distribution<Eigen::Index> col(0, m.cols() - 1);
    if (name == "char_emb") return char_rows[rng() % char_rows.size()] * m.cols() + col(rng);
    if (name == "word_emb") return word_rows[rng() % word_rows.size()] * m.cols() + col(rng);
    if (name == "pos_emb") {
      return static_cast<Eigen::Index>(rng() % ex.char_ids.size()) * m.cols() + col(rng);
    }
    return static_cast<Eigen::Index>(rng() % static_cast<uint64_t>(m.size()));
  };

  std::vector<std::pair<size_t, Eigen::Index>> picks;
  for (const auto& req : must_include) {
    for (size_t t = 0; t < ptensors.size(); ++t) {
      if (ptensors[t].first != req) continue;
      for (size_t k = 0; k < per_required; ++k) {
        picks.emplace_back(t, pick_index(req, *ptensors[t].second));
      }
    }
  }
  while (picks.size() < samples) {
    size_t t = rng() % ptensors.size();
    const auto& name = ptensors[t].first;
    if (name == "word_emb" && word_rows.empty()) continue;
    // Softmax is invariant to a key bias, so its gradient is identically zero
    // and differences there only measure round-off.
    if (name.ends_with(".bk")) continue;
    picks.emplace_back(t, pick_index(name, *ptensors[t].second));
  }

  std::vector<GradCheckResult> results;
  for (auto [t, idx] : picks) {
    double& w = ptensors[t].second->data()[idx];
    double saved = w;
    w = saved + h;
    double up = mean_loss(model, ex);
    w = saved - h;
    double down = mean_loss(model, ex);
    w = saved;
    double numeric = (up - down) / (2 * h);
    double analytic = gtensors[t].second->data()[idx];
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    results.push_back({ptensors[t].first, idx, analytic, numeric,
                       std::abs(analytic - numeric) / denom});
  }
  return results;
}

}  // namespace desm::testing
