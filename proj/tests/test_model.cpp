#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "desm/errors.h"
#include "desm/model.h"
#include "model_fixtures.h"

using namespace desm;
using namespace desm::testing;

namespace {

LatticeFeatures features(size_t n, size_t m_max,
                         const std::vector<std::vector<int32_t>>& per_pos) {
  LatticeFeatures f;
  f.n = n;
  f.m_max = m_max;
  f.ids.assign(n * m_max, kPadId);
  f.mask.assign(n * m_max, 0);
  for (size_t i = 0; i < per_pos.size(); ++i) {
    for (size_t j = 0; j < per_pos[i].size(); ++j) {
      f.ids[i * m_max + j] = per_pos[i][j];
      f.mask[i * m_max + j] = 1;
    }
  }
  return f;
}

}  // namespace

TEST_CASE("config validation and JSON") {
  auto c = tiny_config();
  CHECK(ModelConfig::from_json(c.to_json()) == c);
  auto bad = c;
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = c;
  bad.d_c = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("encode shapes and determinism") {
  auto cfg = tiny_config();
  CorrectionModel<float> m(cfg);
  CHECK(m.encode({}).rows() == 0);
  std::vector<int32_t> ids = {2, 3, 4, 5, 6, 7, 8};
  auto h = m.encode(ids);
  CHECK(h.rows() == 7);
  CHECK(h.cols() == static_cast<Eigen::Index>(cfg.d_c));
  CHECK(h.allFinite());
  CorrectionModel<float> again(cfg);
  CHECK(again.encode(ids) == h);
  std::vector<int32_t> too_long(cfg.max_len + 1, 2);
  CHECK_THROWS_AS(m.encode(too_long), SequenceTooLong);
}

TEST_CASE("char-word attention special cases") {
  auto cfg = tiny_config();
  CorrectionModel<double> m(cfg);
  std::vector<int32_t> ids = {2, 3, 4};
  auto h = m.encode(ids);
  const auto& p = m.params();

  auto f = features(3, cfg.m_max, {{5}, {}, {6, 7}});
  Mat<double> a;
  auto fused = m.char_word_attention(h, f, &a);
  CHECK(a(0, 0) == doctest::Approx(1.0));
  RowVec<double> u = (p.word_emb.row(5) * p.w_word.transpose() + p.b_word.row(0)).array().tanh();
  CHECK((fused.row(0) - (h.row(0) + u)).norm() < 1e-12);
  CHECK(fused.row(1) == h.row(1));  // exact fallback
  CHECK(a.row(1).sum() == 0.0);
  CHECK(a.row(2).sum() == doctest::Approx(1.0));

  // Identical embeddings split attention evenly.
  auto p2 = m.params();
  p2.word_emb.row(7) = p2.word_emb.row(6);
  CorrectionModel<double> twin(cfg, p2);
  twin.char_word_attention(h, f, &a);
  CHECK(a(2, 0) == doctest::Approx(0.5));
  CHECK(a(2, 1) == doctest::Approx(0.5));
}

TEST_CASE("candidate order does not change the fused state") {
  auto cfg = tiny_config();
  cfg.m_max = 5;
  CorrectionModel<double> m(cfg);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    std::vector<int32_t> cands;
    for (int k = 0; k < 4; ++k) cands.push_back(2 + static_cast<int32_t>(rng() % 10));
    auto shuffled = cands;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto h = m.encode(std::vector<int32_t>{3});
    auto a = m.char_word_attention(h, features(1, 5, {cands}));
    auto b = m.char_word_attention(h, features(1, 5, {shuffled}));
    CHECK((a - b).norm() < 1e-12);
  }
}

TEST_CASE("output distribution: copy, generate, normalization") {
  auto cfg = tiny_config();
  CorrectionModel<double> m(cfg);
  std::mt19937_64 rng(1);
  auto ex = random_example(rng, cfg, 6);
  auto h = m.encode(ex.char_ids);
  auto fused = m.char_word_attention(h, ex.words);

  auto copy = m.output_distribution(fused, ex.char_ids, 1.0);
  for (Eigen::Index i = 0; i < 6; ++i) {
    Eigen::Index arg;
    copy.prob.row(i).maxCoeff(&arg);
    CHECK(arg == ex.char_ids[static_cast<size_t>(i)]);
  }
  auto gen = m.output_distribution(fused, ex.char_ids, 0.0);
  CHECK(gen.prob == gen.gen);

  auto mixed = m.output_distribution(fused, ex.char_ids);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(std::abs(mixed.prob.row(i).sum() - 1.0) < 1e-12);
    CHECK(mixed.omega(i) >= 0.0);
    CHECK(mixed.omega(i) <= 1.0);
  }
  // The +2 bias makes an untrained model copy.
  CHECK(mixed.omega.minCoeff() > 0.5);

  auto no_copy_cfg = cfg;
  no_copy_cfg.use_copy = false;
  CorrectionModel<double> nc(no_copy_cfg);
  auto out = nc.forward(ex);
  CHECK(out.omega.isZero());
  CHECK(out.prob == out.gen);
}

TEST_CASE("correction loss values") {
  Mat<double> perfect = Mat<double>::Zero(2, 3);
  perfect(0, 1) = 1;
  perfect(1, 2) = 1;
  std::vector<int32_t> gold = {1, 2};
  CHECK(correction_loss<double>(perfect, gold) == 0.0);

  Mat<double> uniform = Mat<double>::Constant(4, 20, 1.0 / 20);
  std::vector<int32_t> g4 = {0, 5, 7, 19};
  CHECK(correction_loss<double>(uniform, g4) == doctest::Approx(2.995732273553991).epsilon(1e-12));

  Mat<double> hand(2, 3);
  hand << 0.2, 0.5, 0.3, 0.1, 0.1, 0.8;
  CHECK(correction_loss<double>(hand, gold) == doctest::Approx(0.458145).epsilon(1e-6));

  Mat<double> zero = Mat<double>::Zero(1, 3);
  zero(0, 0) = 1;
  std::vector<int32_t> g1 = {2};
  CHECK(correction_loss<double>(zero, g1) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("analytic gradients match central differences") {
  auto cfg = tiny_config();
  for (uint64_t seed : {1u, 2u, 3u}) {
    cfg.seed = seed;
    for (auto act : {GateActivation::kGelu, GateActivation::kTanh}) {
      cfg.gate_activation = act;
      CorrectionModel<double> m(cfg);
      std::mt19937_64 rng(seed * 17);
      auto ex = random_example(rng, cfg, 5);
      auto results = gradient_check(m, ex, 60, seed,
                                    {"w_attn", "w_word", "word_emb", "gate_w1", "layer0.wq"});
      for (const auto& r : results) {
        INFO(r.tensor << "[" << r.index << "] analytic=" << r.analytic
                      << " numeric=" << r.numeric);
        CHECK(r.rel_error < 1e-4);
      }
    }
  }
}

TEST_CASE("masked word slots receive no gradient") {
  auto cfg = tiny_config();
  CorrectionModel<double> m(cfg);
  std::mt19937_64 rng(4);
  auto ex = random_example(rng, cfg, 5, 0.0);
  auto grads = ModelParams<double>::zeros(cfg);
  m.accumulate_gradients(ex, grads, 1.0);
  CHECK(grads.word_emb.row(kPadId).isZero());
  CHECK(grads.word_emb.row(kUnkId).isZero());
  std::vector<bool> used(cfg.word_vocab_size, false);
  for (size_t k = 0; k < ex.words.ids.size(); ++k) {
    if (ex.words.mask[k]) used[static_cast<size_t>(ex.words.ids[k])] = true;
  }
  for (size_t w = 0; w < used.size(); ++w) {
    if (!used[w]) CHECK(grads.word_emb.row(static_cast<Eigen::Index>(w)).isZero());
  }
}

TEST_CASE("float and double agree through cast") {
  auto cfg = tiny_config();
  CorrectionModel<double> md(cfg);
  CorrectionModel<float> mf(cfg, md.params().cast<float>());
  std::mt19937_64 rng(8);
  auto ex = random_example(rng, cfg, 7);
  auto a = md.forward(ex).prob;
  Mat<double> b = mf.forward(ex).prob.cast<double>();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-5);
}
