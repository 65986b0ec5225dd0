#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "desm/lattice.h"

namespace desm {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class GateActivation : uint8_t { kGelu, kTanh };

struct ModelConfig {
  size_t char_vocab_size = 0;
  size_t word_vocab_size = 0;
  size_t d_c = 64;
  size_t d_w = 32;
  size_t layers = 2;
  size_t heads = 2;
  size_t d_ff = 0;  // 0 -> 4 * d_c
  size_t d_g = 0;   // 0 -> d_c
  size_t m_max = kDefaultMMax;
  size_t max_len = 512;
  uint64_t seed = 1;
  bool use_copy = true;
  GateActivation gate_activation = GateActivation::kGelu;
  /// Initial copy-gate bias; +2 starts the model copy-dominant.
  double copy_bias_init = 2.0;
  double init_scale = 0.1;

  size_t ff_dim() const { return d_ff ? d_ff : 4 * d_c; }
  size_t gate_dim() const { return d_g ? d_g : d_c; }

  /// Throws DataError for non-positive dims or heads not dividing d_c.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class T>
struct EncoderLayer {
  Mat<T> ln1_g, ln1_b;
  Mat<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Mat<T> ln2_g, ln2_b;
  Mat<T> w1, b1, w2, b2;
};

/// Every trainable tensor. Vectors are stored as 1 x k matrices so that all
/// tensors share one type for the optimizer and checkpoint code.
template <class T>
struct ModelParams {
  Mat<T> char_emb;  // [v x d_c]
  Mat<T> pos_emb;   // [max_len x d_c]
  std::vector<EncoderLayer<T>> layers;
  Mat<T> lnf_g, lnf_b;
  Mat<T> word_emb;  // [word_vocab x d_w]
  Mat<T> w_attn;    // [d_c x d_c]
  Mat<T> w_word;    // [d_c x d_w]
  Mat<T> b_word;    // [1 x d_c]
  Mat<T> w_gen;     // [v x d_c]
  Mat<T> b_gen;     // [1 x v]
  Mat<T> gate_w1;   // [d_g x d_c]
  Mat<T> gate_b1;
  Mat<T> gate_ln_g, gate_ln_b;
  Mat<T> gate_w2;   // [1 x d_g]
  Mat<T> gate_b2;   // [1 x 1]

  /// Shapes from the config, all zeros.
  static ModelParams zeros(const ModelConfig& cfg);
  /// Seeded random initialization.
  static ModelParams init(const ModelConfig& cfg);

  /// Tensors in declared (checkpoint) order.
  std::vector<std::pair<std::string, Mat<T>*>> tensors();
  std::vector<std::pair<std::string, const Mat<T>*>> tensors() const;

  void set_zero();
  size_t scalar_count() const;

  template <class U>
  ModelParams<U> cast() const;
};

/// Model-side view of one sentence.
struct Example {
  std::vector<int32_t> char_ids;
  LatticeFeatures words;
  std::vector<int32_t> gold_ids;  // empty at inference
};

template <class T>
struct OutputDistribution {
  Mat<T> prob;     // [n x v], rows sum to 1
  Mat<T> gen;      // [n x v]
  RowVec<T> omega; // [n]
};

template <class T>
struct ForwardCache;

/// Character encoder + char-word attention fusion + copy/generate head.
template <class T>
class CorrectionModel {
 public:
  CorrectionModel() = default;
  explicit CorrectionModel(const ModelConfig& cfg);
  CorrectionModel(const ModelConfig& cfg, ModelParams<T> params);

  const ModelConfig& config() const { return cfg_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  /// [n x d_c]. Throws SequenceTooLong past max_len.
  Mat<T> encode(std::span<const int32_t> char_ids) const;

  /// h~ = h + sum_j a_ij tanh(W_w e_ij + b_w). Fills `attention` with the
  /// [n x m_max] weights (zeros at masked slots) when given.
  Mat<T> char_word_attention(const Mat<T>& h_c, const LatticeFeatures& words,
                             Mat<T>* attention = nullptr) const;

  /// Mixture of the copy one-hot and the generator softmax. `force_omega`
  /// clamps the gate for every position.
  OutputDistribution<T> output_distribution(const Mat<T>& fused,
                                            std::span<const int32_t> char_ids,
                                            std::optional<T> force_omega = {}) const;

  OutputDistribution<T> forward(const Example& ex) const;

  /// Adds d(loss_sum * scale)/d(params) into `grads` and returns the summed
  /// (unscaled) per-position loss.
  T accumulate_gradients(const Example& ex, ModelParams<T>& grads, T scale) const;

 private:
  OutputDistribution<T> run(const Example& ex, ForwardCache<T>* cache) const;

  ModelConfig cfg_;
  ModelParams<T> params_;
};

inline constexpr double kLogFloor = 1e-12;

/// Mean over positions of -log(max(P[i][gold_i], 1e-12)).
template <class T>
double correction_loss(const Mat<T>& prob, std::span<const int32_t> gold_ids);

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;
extern template class CorrectionModel<float>;
extern template class CorrectionModel<double>;

}  // namespace desm
