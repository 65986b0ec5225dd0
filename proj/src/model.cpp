#include "desm/model.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "desm/errors.h"

namespace desm {

void ModelConfig::validate() const {
  auto positive = [](size_t v, const char* name) {
    if (v == 0) throw DataError(std::string("model config: ") + name + " must be positive");
  };
  positive(char_vocab_size, "char_vocab_size");
  positive(word_vocab_size, "word_vocab_size");
  positive(d_c, "d_c");
  positive(d_w, "d_w");
  positive(heads, "heads");
  positive(m_max, "m_max");
  positive(max_len, "max_len");
  if (d_c % heads != 0) throw DataError("model config: heads must divide d_c");
  if (char_vocab_size < 2 || word_vocab_size < 2) {
    throw DataError("model config: vocabularies must hold the UNK and PAD ids");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"char_vocab_size", char_vocab_size},
          {"word_vocab_size", word_vocab_size},
          {"d_c", d_c},
          {"d_w", d_w},
          {"layers", layers},
          {"heads", heads},
          {"d_ff", d_ff},
          {"d_g", d_g},
          {"m_max", m_max},
          {"max_len", max_len},
          {"seed", seed},
          {"use_copy", use_copy},
          {"gate_activation", gate_activation == GateActivation::kGelu ? "gelu" : "tanh"},
          {"copy_bias_init", copy_bias_init},
          {"init_scale", init_scale}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.char_vocab_size = j.at("char_vocab_size").get<size_t>();
    c.word_vocab_size = j.at("word_vocab_size").get<size_t>();
    c.d_c = j.at("d_c").get<size_t>();
    c.d_w = j.at("d_w").get<size_t>();
    c.layers = j.at("layers").get<size_t>();
    c.heads = j.at("heads").get<size_t>();
    c.d_ff = j.at("d_ff").get<size_t>();
    c.d_g = j.at("d_g").get<size_t>();
    c.m_max = j.at("m_max").get<size_t>();
    c.max_len = j.at("max_len").get<size_t>();
    c.seed = j.at("seed").get<uint64_t>();
    c.use_copy = j.at("use_copy").get<bool>();
    auto act = j.at("gate_activation").get<std::string>();
    if (act == "gelu") {
      c.gate_activation = GateActivation::kGelu;
    } else if (act == "tanh") {
      c.gate_activation = GateActivation::kTanh;
    } else {
      throw DataError("model config: unknown gate_activation '" + act + "'");
    }
    c.copy_bias_init = j.at("copy_bias_init").get<double>();
    c.init_scale = j.at("init_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

template <class T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(cfg.d_c);
  const auto dw = static_cast<Eigen::Index>(cfg.d_w);
  const auto ff = static_cast<Eigen::Index>(cfg.ff_dim());
  const auto dg = static_cast<Eigen::Index>(cfg.gate_dim());
  const auto v = static_cast<Eigen::Index>(cfg.char_vocab_size);
  auto z = [](Eigen::Index r, Eigen::Index c) { return Mat<T>::Zero(r, c); };
  ModelParams p;
  p.char_emb = z(v, d);
  p.pos_emb = z(static_cast<Eigen::Index>(cfg.max_len), d);
  for (size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayer<T> L;
    L.ln1_g = z(1, d);
    L.ln1_b = z(1, d);
    L.wq = z(d, d);
    L.bq = z(1, d);
    L.wk = z(d, d);
    L.bk = z(1, d);
    L.wv = z(d, d);
    L.bv = z(1, d);
    L.wo = z(d, d);
    L.bo = z(1, d);
    L.ln2_g = z(1, d);
    L.ln2_b = z(1, d);
    L.w1 = z(ff, d);
    L.b1 = z(1, ff);
    L.w2 = z(d, ff);
    L.b2 = z(1, d);
    p.layers.push_back(std::move(L));
  }
  p.lnf_g = z(1, d);
  p.lnf_b = z(1, d);
  p.word_emb = z(static_cast<Eigen::Index>(cfg.word_vocab_size), dw);
  p.w_attn = z(d, d);
  p.w_word = z(d, dw);
  p.b_word = z(1, d);
  p.w_gen = z(v, d);
  p.b_gen = z(1, v);
  p.gate_w1 = z(dg, d);
  p.gate_b1 = z(1, dg);
  p.gate_ln_g = z(1, dg);
  p.gate_ln_b = z(1, dg);
  p.gate_w2 = z(1, dg);
  p.gate_b2 = z(1, 1);
  return p;
}

template <class T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& cfg) {
  ModelParams p = zeros(cfg);
  std::mt19937_64 rng(cfg.seed);
  auto fill = [&](Mat<T>& m, double stddev) {
    std::normal_distribution<double> nd(0.0, stddev);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(nd(rng));
  };
  auto linear = [&](Mat<T>& w) { fill(w, 1.0 / std::sqrt(static_cast<double>(w.cols()))); };
  fill(p.char_emb, cfg.init_scale);
  fill(p.pos_emb, cfg.init_scale);
  for (auto& L : p.layers) {
    L.ln1_g.setOnes();
    L.ln2_g.setOnes();
    linear(L.wq);
    linear(L.wk);
    linear(L.wv);
    linear(L.wo);
    linear(L.w1);
    linear(L.w2);
  }
  p.lnf_g.setOnes();
  fill(p.word_emb, cfg.init_scale);
  linear(p.w_attn);
  linear(p.w_word);
  linear(p.w_gen);
  linear(p.gate_w1);
  p.gate_ln_g.setOnes();
  linear(p.gate_w2);
  p.gate_b2(0, 0) = static_cast<T>(cfg.copy_bias_init);
  return p;
}

template <class T>
std::vector<std::pair<std::string, Mat<T>*>> ModelParams<T>::tensors() {
  std::vector<std::pair<std::string, Mat<T>*>> out = {{"char_emb", &char_emb},
                                                     {"pos_emb", &pos_emb}};
  for (size_t l = 0; l < layers.size(); ++l) {
    auto& L = layers[l];
    auto pre = "layer" + std::to_string(l) + ".";
    for (auto [name, m] : std::initializer_list<std::pair<const char*, Mat<T>*>>{
             {"ln1_g", &L.ln1_g}, {"ln1_b", &L.ln1_b}, {"wq", &L.wq}, {"bq", &L.bq},
             {"wk", &L.wk},       {"bk", &L.bk},       {"wv", &L.wv}, {"bv", &L.bv},
             {"wo", &L.wo},       {"bo", &L.bo},       {"ln2_g", &L.ln2_g},
             {"ln2_b", &L.ln2_b}, {"w1", &L.w1},       {"b1", &L.b1}, {"w2", &L.w2},
             {"b2", &L.b2}}) {
      out.emplace_back(pre + name, m);
    }
  }
  out.insert(out.end(), {{"lnf_g", &lnf_g},
                         {"lnf_b", &lnf_b},
                         {"word_emb", &word_emb},
                         {"w_attn", &w_attn},
                         {"w_word", &w_word},
                         {"b_word", &b_word},
                         {"w_gen", &w_gen},
                         {"b_gen", &b_gen},
                         {"gate_w1", &gate_w1},
                         {"gate_b1", &gate_b1},
                         {"gate_ln_g", &gate_ln_g},
                         {"gate_ln_b", &gate_ln_b},
                         {"gate_w2", &gate_w2},
                         {"gate_b2", &gate_b2}});
  return out;
}

template <class T>
std::vector<std::pair<std::string, const Mat<T>*>> ModelParams<T>::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  std::vector<std::pair<std::string, const Mat<T>*>> out;
  out.reserve(mut.size());
  for (auto& [n, m] : mut) out.emplace_back(std::move(n), m);
  return out;
}

template <class T>
void ModelParams<T>::set_zero() {
  for (auto& [name, m] : tensors()) m->setZero();
}

template <class T>
size_t ModelParams<T>::scalar_count() const {
  size_t n = 0;
  for (const auto& [name, m] : tensors()) n += static_cast<size_t>(m->size());
  return n;
}

template <class T>
template <class U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.layers.resize(layers.size());
  auto src = tensors();
  auto dst = out.tensors();
  for (size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
  return out;
}

// ---------------------------------------------------------------------------
// Building blocks

namespace {

constexpr double kLnEps = 1e-5;

template <class T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b) {
  Mat<T> y = x * w.transpose();
  y.rowwise() += b.row(0);
  return y;
}

template <class T>
void linear_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& w, Mat<T>& dw,
                     Mat<T>& db, Mat<T>* dx) {
  dw.noalias() += dy.transpose() * x;
  db.row(0) += dy.colwise().sum();
  if (dx) dx->noalias() += dy * w;
}

template <class T>
struct LnCache {
  Mat<T> xhat;
  ColVec<T> rstd;
};

template <class T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, LnCache<T>* cache) {
  const auto n = x.rows();
  const auto d = static_cast<T>(x.cols());
  ColVec<T> mean = x.rowwise().sum() / d;
  Mat<T> xc = x.colwise() - mean;
  ColVec<T> var = xc.array().square().rowwise().sum() / d;
  ColVec<T> rstd = (var.array() + static_cast<T>(kLnEps)).rsqrt();
  Mat<T> xhat(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) xhat.row(i) = xc.row(i) * rstd(i);
  Mat<T> y = xhat.array().rowwise() * g.row(0).array();
  y.rowwise() += b.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <class T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LnCache<T>& c, const Mat<T>& g,
                           Mat<T>& dg, Mat<T>& db) {
  dg.row(0) += (dy.array() * c.xhat.array()).matrix().colwise().sum();
  db.row(0) += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * g.row(0).array();
  const auto d = static_cast<T>(dy.cols());
  ColVec<T> m1 = dxhat.rowwise().sum() / d;
  ColVec<T> m2 = (dxhat.array() * c.xhat.array()).matrix().rowwise().sum() / d;
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    dx.row(i) = c.rstd(i) *
                (dxhat.row(i).array() - m1(i) - c.xhat.row(i).array() * m2(i)).matrix();
  }
  return dx;
}

template <class T>
void softmax_rows(Mat<T>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    T mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp();
    s.row(i) /= s.row(i).sum();
  }
}

// dS = A * (dA - rowsum(dA * A))
template <class T>
Mat<T> softmax_backward(const Mat<T>& a, const Mat<T>& da) {
  ColVec<T> dot = (a.array() * da.array()).matrix().rowwise().sum();
  Mat<T> ds = da.colwise() - dot;
  return a.array() * ds.array();
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;

template <class T>
T gelu(T x) {
  T t = std::tanh(static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluK) * x * x * x));
  return static_cast<T>(0.5) * x * (1 + t);
}

template <class T>
T gelu_grad(T x) {
  T t = std::tanh(static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluK) * x * x * x));
  return static_cast<T>(0.5) * (1 + t) +
         static_cast<T>(0.5) * x * (1 - t * t) * static_cast<T>(kGeluC) *
             (1 + 3 * static_cast<T>(kGeluK) * x * x);
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward cache

template <class T>
struct LayerCache {
  Mat<T> x_in;
  LnCache<T> ln1;
  Mat<T> a_in, q, k, v;
  std::vector<Mat<T>> attn;  // per head [n x n]
  Mat<T> o;
  Mat<T> x1;
  LnCache<T> ln2;
  Mat<T> f_in, u, g;
};

template <class T>
struct WordSlotCache {
  std::vector<int32_t> ids;  // real word ids at this position
  Mat<T> e;                  // [m x d_w] word embeddings
  Mat<T> u;                  // [m x d_c] tanh(W_w e + b_w)
  RowVec<T> a;               // [m]
};

template <class T>
struct ForwardCache {
  std::vector<LayerCache<T>> layers;
  LnCache<T> lnf;
  Mat<T> h_c;
  std::vector<WordSlotCache<T>> slots;
  Mat<T> fused;
  Mat<T> gate_pre, gate_act, gate_nrm;
  LnCache<T> gate_ln;
};

// ---------------------------------------------------------------------------
// Model

template <class T>
CorrectionModel<T>::CorrectionModel(const ModelConfig& cfg)
    : cfg_(cfg), params_(ModelParams<T>::init(cfg)) {}

template <class T>
CorrectionModel<T>::CorrectionModel(const ModelConfig& cfg, ModelParams<T> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  auto reference = ModelParams<T>::zeros(cfg_);
  auto expect = reference.tensors();
  auto got = params_.tensors();
  if (expect.size() != got.size()) throw DataError("parameter count does not match config");
  for (size_t i = 0; i < got.size(); ++i) {
    if (got[i].second->rows() != expect[i].second->rows() ||
        got[i].second->cols() != expect[i].second->cols()) {
      throw DataError("parameter '" + got[i].first + "' has the wrong shape");
    }
  }
}

namespace {

template <class T>
Mat<T> encode_impl(const ModelConfig& cfg, const ModelParams<T>& p,
                   std::span<const int32_t> ids, ForwardCache<T>* cache) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (ids.size() > cfg.max_len) throw SequenceTooLong(ids.size(), cfg.max_len);
  const auto d = static_cast<Eigen::Index>(cfg.d_c);
  if (n == 0) return Mat<T>(0, d);
  Mat<T> x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto id = ids[static_cast<size_t>(i)];
    if (id < 0 || static_cast<size_t>(id) >= cfg.char_vocab_size) {
      throw std::out_of_range("character id out of range");
    }
    x.row(i) = p.char_emb.row(id) + p.pos_emb.row(i);
  }
  const auto heads = static_cast<Eigen::Index>(cfg.heads);
  const auto dh = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  if (cache) cache->layers.resize(p.layers.size());
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    LayerCache<T>* lc = cache ? &cache->layers[l] : nullptr;
    if (lc) lc->x_in = x;
    Mat<T> a_in = layer_norm(x, L.ln1_g, L.ln1_b, lc ? &lc->ln1 : nullptr);
    Mat<T> q = linear(a_in, L.wq, L.bq);
    Mat<T> k = linear(a_in, L.wk, L.bk);
    Mat<T> v = linear(a_in, L.wv, L.bv);
    Mat<T> o(n, d);
    if (lc) lc->attn.resize(static_cast<size_t>(heads));
    for (Eigen::Index h = 0; h < heads; ++h) {
      Mat<T> s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
      softmax_rows(s);
      o.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
      if (lc) lc->attn[static_cast<size_t>(h)] = std::move(s);
    }
    Mat<T> x1 = x + linear(o, L.wo, L.bo);
    Mat<T> f_in = layer_norm(x1, L.ln2_g, L.ln2_b, lc ? &lc->ln2 : nullptr);
    Mat<T> u = linear(f_in, L.w1, L.b1);
    Mat<T> g = u.unaryExpr([](T z) { return gelu(z); });
    x = x1 + linear(g, L.w2, L.b2);
    if (lc) {
      lc->a_in = std::move(a_in);
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->o = std::move(o);
      lc->x1 = std::move(x1);
      lc->f_in = std::move(f_in);
      lc->u = std::move(u);
      lc->g = std::move(g);
    }
  }
  return layer_norm(x, p.lnf_g, p.lnf_b, cache ? &cache->lnf : nullptr);
}

template <class T>
Mat<T> attention_impl(const ModelConfig& cfg, const ModelParams<T>& p, const Mat<T>& h_c,
                      const LatticeFeatures& words, Mat<T>* weights,
                      ForwardCache<T>* cache) {
  const auto n = h_c.rows();
  if (static_cast<size_t>(n) != words.n && !(n == 0 && words.n == 0)) {
    throw std::invalid_argument("lattice length does not match the sentence");
  }
  Mat<T> fused = h_c;
  if (weights) *weights = Mat<T>::Zero(n, static_cast<Eigen::Index>(words.m_max));
  if (cache) cache->slots.assign(static_cast<size_t>(n), {});
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<int32_t> ids;
    std::vector<Eigen::Index> slots;
    for (size_t j = 0; j < words.m_max; ++j) {
      if (!words.real(static_cast<size_t>(i), j)) continue;
      auto id = words.id(static_cast<size_t>(i), j);
      if (id < 0 || static_cast<size_t>(id) >= cfg.word_vocab_size) {
        throw std::out_of_range("word id out of range");
      }
      ids.push_back(id);
      slots.push_back(static_cast<Eigen::Index>(j));
    }
    if (ids.empty()) continue;
    const auto m = static_cast<Eigen::Index>(ids.size());
    Mat<T> e(m, p.word_emb.cols());
    for (Eigen::Index j = 0; j < m; ++j) e.row(j) = p.word_emb.row(ids[static_cast<size_t>(j)]);
    Mat<T> u = linear(e, p.w_word, p.b_word).array().tanh();
    RowVec<T> hw = h_c.row(i) * p.w_attn;
    RowVec<T> s = (u * hw.transpose()).transpose();
    T mx = s.maxCoeff();
    RowVec<T> a = (s.array() - mx).exp();
    a /= a.sum();
    fused.row(i) += a * u;
    if (weights) {
      for (Eigen::Index j = 0; j < m; ++j) (*weights)(i, slots[static_cast<size_t>(j)]) = a(j);
    }
    if (cache) {
      auto& sc = cache->slots[static_cast<size_t>(i)];
      sc.ids = std::move(ids);
      sc.e = std::move(e);
      sc.u = std::move(u);
      sc.a = std::move(a);
    }
  }
  return fused;
}

template <class T>
OutputDistribution<T> head_impl(const ModelConfig& cfg, const ModelParams<T>& p,
                                const Mat<T>& fused, std::span<const int32_t> ids,
                                std::optional<T> force_omega, ForwardCache<T>* cache) {
  const auto n = fused.rows();
  if (static_cast<size_t>(n) != ids.size()) {
    throw std::invalid_argument("fused states and ids disagree in length");
  }
  OutputDistribution<T> out;
  out.gen = linear(fused, p.w_gen, p.b_gen);
  softmax_rows(out.gen);
  out.omega = RowVec<T>::Zero(n);
  if (cfg.use_copy && n > 0) {
    Mat<T> pre = linear(fused, p.gate_w1, p.gate_b1);
    Mat<T> act = cfg.gate_activation == GateActivation::kGelu
                     ? Mat<T>(pre.unaryExpr([](T z) { return gelu(z); }))
                     : Mat<T>(pre.array().tanh());
    Mat<T> nrm = layer_norm(act, p.gate_ln_g, p.gate_ln_b, cache ? &cache->gate_ln : nullptr);
    ColVec<T> t = nrm * p.gate_w2.row(0).transpose();
    t.array() += p.gate_b2(0, 0);
    out.omega = (T(1) + (-t.array()).exp()).inverse().matrix().transpose();
    if (cache) {
      cache->gate_pre = std::move(pre);
      cache->gate_act = std::move(act);
      cache->gate_nrm = std::move(nrm);
    }
  }
  if (force_omega) out.omega.setConstant(*force_omega);
  out.prob = out.gen;
  for (Eigen::Index i = 0; i < n; ++i) {
    T w = out.omega(i);
    out.prob.row(i) *= (1 - w);
    out.prob(i, ids[static_cast<size_t>(i)]) += w;
  }
  return out;
}

}  // namespace

template <class T>
Mat<T> CorrectionModel<T>::encode(std::span<const int32_t> char_ids) const {
  return encode_impl<T>(cfg_, params_, char_ids, nullptr);
}

template <class T>
Mat<T> CorrectionModel<T>::char_word_attention(const Mat<T>& h_c,
                                               const LatticeFeatures& words,
                                               Mat<T>* attention) const {
  return attention_impl<T>(cfg_, params_, h_c, words, attention, nullptr);
}

template <class T>
OutputDistribution<T> CorrectionModel<T>::output_distribution(
    const Mat<T>& fused, std::span<const int32_t> char_ids,
    std::optional<T> force_omega) const {
  return head_impl<T>(cfg_, params_, fused, char_ids, force_omega, nullptr);
}

template <class T>
OutputDistribution<T> CorrectionModel<T>::run(const Example& ex,
                                              ForwardCache<T>* cache) const {
  Mat<T> h = encode_impl<T>(cfg_, params_, ex.char_ids, cache);
  Mat<T> fused = attention_impl<T>(cfg_, params_, h, ex.words, nullptr, cache);
  auto out = head_impl<T>(cfg_, params_, fused, ex.char_ids, std::nullopt, cache);
  if (cache) {
    cache->h_c = std::move(h);
    cache->fused = std::move(fused);
  }
  return out;
}

template <class T>
OutputDistribution<T> CorrectionModel<T>::forward(const Example& ex) const {
  return run(ex, nullptr);
}

template <class T>
T CorrectionModel<T>::accumulate_gradients(const Example& ex, ModelParams<T>& grads,
                                           T scale) const {
  const auto& p = params_;
  ForwardCache<T> c;
  auto out = run(ex, &c);
  const auto n = static_cast<Eigen::Index>(ex.char_ids.size());
  if (ex.gold_ids.size() != ex.char_ids.size()) {
    throw std::invalid_argument("gold ids must match the input length");
  }
  if (n == 0) return 0;

  // Head: P = w * onehot(x) + (1 - w) * softmax(logits).
  T loss = 0;
  Mat<T> dlogits = Mat<T>::Zero(n, out.gen.cols());
  ColVec<T> domega = ColVec<T>::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto gold = ex.gold_ids[static_cast<size_t>(i)];
    T prob = out.prob(i, gold);
    if (prob > static_cast<T>(kLogFloor)) {
      loss -= std::log(prob);
      T dp = -scale / prob;
      T w = out.omega(i);
      T g_gold = out.gen(i, gold);
      T copy_hit = gold == ex.char_ids[static_cast<size_t>(i)] ? 1 : 0;
      domega(i) = dp * (copy_hit - g_gold);
      T dg = dp * (1 - w) * g_gold;
      dlogits.row(i) = -dg * out.gen.row(i);
      dlogits(i, gold) += dg;
    } else {
      loss -= static_cast<T>(std::log(kLogFloor));
    }
  }
  Mat<T> dfused = Mat<T>::Zero(n, c.fused.cols());
  linear_backward<T>(dlogits, c.fused, p.w_gen, grads.w_gen, grads.b_gen, &dfused);

  if (cfg_.use_copy) {
    ColVec<T> omega = out.omega.transpose();
    ColVec<T> dt = domega.array() * omega.array() * (T(1) - omega.array());
    grads.gate_w2.row(0) += dt.transpose() * c.gate_nrm;
    grads.gate_b2(0, 0) += dt.sum();
    Mat<T> dnrm = dt * p.gate_w2.row(0);
    Mat<T> dact = layer_norm_backward<T>(dnrm, c.gate_ln, p.gate_ln_g, grads.gate_ln_g,
                                         grads.gate_ln_b);
    Mat<T> dpre;
    if (cfg_.gate_activation == GateActivation::kGelu) {
      dpre = dact.array() * c.gate_pre.unaryExpr([](T z) { return gelu_grad(z); }).array();
    } else {
      dpre = dact.array() * (T(1) - c.gate_act.array().square());
    }
    linear_backward<T>(dpre, c.fused, p.gate_w1, grads.gate_w1, grads.gate_b1, &dfused);
  }

  // Char-word attention: fused = h + sum_j a_j u_j.
  Mat<T> dh = dfused;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& sc = c.slots[static_cast<size_t>(i)];
    if (sc.ids.empty()) continue;
    RowVec<T> dz = dfused.row(i);
    RowVec<T> h = c.h_c.row(i);
    RowVec<T> da = (sc.u * dz.transpose()).transpose();
    T dot = (da.array() * sc.a.array()).sum();
    RowVec<T> ds = sc.a.array() * (da.array() - dot);
    RowVec<T> dsu = ds * sc.u;              // sum_j ds_j u_j
    dh.row(i) += dsu * p.w_attn.transpose();
    grads.w_attn.noalias() += h.transpose() * dsu;
    RowVec<T> hw = h * p.w_attn;
    Mat<T> du = sc.a.transpose() * dz + ds.transpose() * hw;
    Mat<T> dpre = du.array() * (T(1) - sc.u.array().square());
    Mat<T> de = Mat<T>::Zero(sc.e.rows(), sc.e.cols());
    linear_backward<T>(dpre, sc.e, p.w_word, grads.w_word, grads.b_word, &de);
    for (size_t j = 0; j < sc.ids.size(); ++j) {
      grads.word_emb.row(sc.ids[j]) += de.row(static_cast<Eigen::Index>(j));
    }
  }

  // Encoder.
  Mat<T> dx = layer_norm_backward<T>(dh, c.lnf, p.lnf_g, grads.lnf_g, grads.lnf_b);
  const auto d = static_cast<Eigen::Index>(cfg_.d_c);
  const auto heads = static_cast<Eigen::Index>(cfg_.heads);
  const auto dhd = d / heads;
  const T scl = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dhd)));
  for (size_t l = p.layers.size(); l-- > 0;) {
    const auto& L = p.layers[l];
    auto& G = grads.layers[l];
    const auto& lc = c.layers[l];
    // x2 = x1 + W2 gelu(W1 LN2(x1) + b1) + b2
    Mat<T> dg = Mat<T>::Zero(n, lc.g.cols());
    linear_backward<T>(dx, lc.g, L.w2, G.w2, G.b2, &dg);
    Mat<T> du = dg.array() * lc.u.unaryExpr([](T z) { return gelu_grad(z); }).array();
    Mat<T> df_in = Mat<T>::Zero(n, d);
    linear_backward<T>(du, lc.f_in, L.w1, G.w1, G.b1, &df_in);
    Mat<T> dx1 = dx + layer_norm_backward<T>(df_in, lc.ln2, L.ln2_g, G.ln2_g, G.ln2_b);
    // x1 = x + Wo MHA(LN1(x)) + bo
    Mat<T> dout = Mat<T>::Zero(n, d);
    linear_backward<T>(dx1, lc.o, L.wo, G.wo, G.bo, &dout);
    Mat<T> dq(n, d), dk(n, d), dv(n, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto& a = lc.attn[static_cast<size_t>(h)];
      Mat<T> doh = dout.middleCols(h * dhd, dhd);
      Mat<T> dA = doh * lc.v.middleCols(h * dhd, dhd).transpose();
      dv.middleCols(h * dhd, dhd) = a.transpose() * doh;
      Mat<T> dS = softmax_backward<T>(a, dA) * scl;
      dq.middleCols(h * dhd, dhd) = dS * lc.k.middleCols(h * dhd, dhd);
      dk.middleCols(h * dhd, dhd) = dS.transpose() * lc.q.middleCols(h * dhd, dhd);
    }
    Mat<T> da_in = Mat<T>::Zero(n, d);
    linear_backward<T>(dq, lc.a_in, L.wq, G.wq, G.bq, &da_in);
    linear_backward<T>(dk, lc.a_in, L.wk, G.wk, G.bk, &da_in);
    linear_backward<T>(dv, lc.a_in, L.wv, G.wv, G.bv, &da_in);
    dx = dx1 + layer_norm_backward<T>(da_in, lc.ln1, L.ln1_g, G.ln1_g, G.ln1_b);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    grads.char_emb.row(ex.char_ids[static_cast<size_t>(i)]) += dx.row(i);
    grads.pos_emb.row(i) += dx.row(i);
  }
  return loss;
}

template <class T>
double correction_loss(const Mat<T>& prob, std::span<const int32_t> gold_ids) {
  if (static_cast<size_t>(prob.rows()) != gold_ids.size()) {
    throw std::invalid_argument("gold ids must match the distribution rows");
  }
  if (gold_ids.empty()) return 0.0;
  double total = 0;
  for (size_t i = 0; i < gold_ids.size(); ++i) {
    double p = static_cast<double>(prob(static_cast<Eigen::Index>(i), gold_ids[i]));
    total -= std::log(std::max(p, kLogFloor));
  }
  return total / static_cast<double>(gold_ids.size());
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;
template class CorrectionModel<float>;
template class CorrectionModel<double>;
template double correction_loss<float>(const Mat<float>&, std::span<const int32_t>);
template double correction_loss<double>(const Mat<double>&, std::span<const int32_t>);

}  // namespace desm
