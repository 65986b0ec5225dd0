#pragma once

#include <string>
#include <utility>
#include <vector>

#include "desm/lattice.h"
#include "desm/model.h"
#include "desm/vocab.h"

namespace desm {

/// How sentences become model inputs: which lattice to build and how wide.
struct FeatureSpec {
  LatticeMode mode = LatticeMode::kDesm;
  size_t m_max = kDefaultMMax;
};

/// Builds the lattice for `source` and packs it with the char ids. `target`
/// may be empty (inference); otherwise it must match `source` in length.
Example make_example(const CharVocab& vocab, const Lexicon& lex,
                     const PinyinTable& ptable, const FeatureSpec& spec,
                     std::u32string_view source, std::u32string_view target = {});

struct CorrectionResult {
  std::u32string output;
  std::vector<double> omega;
  /// Highest-probability (character id, probability) pairs per position.
  std::vector<std::vector<std::pair<int32_t, double>>> top;
};

/// Inference pipeline: lattice, fusion, argmax decode. Read-only, so one
/// instance may serve concurrent callers.
class Corrector {
 public:
  Corrector(CorrectionModel<float> model, CharVocab vocab, const Lexicon& lex,
            const PinyinTable& ptable, FeatureSpec spec);

  /// Output has the input's length. A position whose argmax is UNK or PAD
  /// keeps the input character.
  CorrectionResult correct(std::u32string_view sentence, size_t top_k = 0) const;

  const CorrectionModel<float>& model() const { return model_; }
  const CharVocab& vocab() const { return vocab_; }
  const FeatureSpec& spec() const { return spec_; }

 private:
  CorrectionModel<float> model_;
  CharVocab vocab_;
  const Lexicon* lex_;
  const PinyinTable* ptable_;
  FeatureSpec spec_;
};

}  // namespace desm
