#include "desm/corrector.h"

#include <algorithm>
#include <numeric>

#include "desm/errors.h"

namespace desm {

Example make_example(const CharVocab& vocab, const Lexicon& lex,
                     const PinyinTable& ptable, const FeatureSpec& spec,
                     std::u32string_view source, std::u32string_view target) {
  if (!target.empty() && target.size() != source.size()) {
    throw LengthMismatch("example", 0);
  }
  Example ex;
  ex.char_ids = vocab.encode(source);
  auto lat = build_lattice(lex, ptable, source, spec.m_max, spec.mode);
  ex.words = lattice_to_feature_ids(lat, spec.m_max);
  if (!target.empty()) ex.gold_ids = vocab.encode(target);
  return ex;
}

Corrector::Corrector(CorrectionModel<float> model, CharVocab vocab,
                     const Lexicon& lex, const PinyinTable& ptable,
                     FeatureSpec spec)
    : model_(std::move(model)),
      vocab_(std::move(vocab)),
      lex_(&lex),
      ptable_(&ptable),
      spec_(spec) {
  if (model_.config().char_vocab_size != vocab_.size()) {
    throw DataError("model and character vocabulary disagree on size");
  }
  if (model_.config().word_vocab_size != lex.size() + kFirstRealId) {
    throw DataError("model and lexicon disagree on word vocabulary size");
  }
  if (spec_.m_max != model_.config().m_max) {
    throw DataError("m_max differs from the model's");
  }
}

CorrectionResult Corrector::correct(std::u32string_view sentence,
                                    size_t top_k) const {
  CorrectionResult res;
  if (sentence.empty()) return res;
  auto ex = make_example(vocab_, *lex_, *ptable_, spec_, sentence);
  auto out = model_.forward(ex);
  res.output.resize(sentence.size());
  res.omega.resize(sentence.size());
  for (size_t i = 0; i < sentence.size(); ++i) {
    auto row = out.prob.row(static_cast<Eigen::Index>(i));
    Eigen::Index best;
    row.maxCoeff(&best);
    auto id = static_cast<int32_t>(best);
    res.output[i] = vocab_.is_real(id) ? vocab_.character(id) : sentence[i];
    res.omega[i] = out.omega(static_cast<Eigen::Index>(i));
    if (top_k > 0) {
      std::vector<int32_t> order(static_cast<size_t>(row.size()));
      std::iota(order.begin(), order.end(), 0);
      size_t k = std::min(top_k, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                        [&](int32_t a, int32_t b) {
                          if (row(a) != row(b)) return row(a) > row(b);
                          return a < b;
                        });
      auto& t = res.top.emplace_back();
      for (size_t j = 0; j < k; ++j) t.emplace_back(order[j], row(order[j]));
    }
  }
  return res;
}

}  // namespace desm
