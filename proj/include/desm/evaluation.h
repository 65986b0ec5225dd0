#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "desm/corpus.h"
#include "desm/trainer.h"

namespace desm {

struct PrfScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool precision_undefined = false;  // zero denominator, reported as 0
  bool recall_undefined = false;
};

/// Character-level scores, micro-averaged over the whole set.
struct EvalReport {
  std::string tag;
  PrfScore detection;
  PrfScore correction;
  size_t characters = 0;
  size_t detection_tp = 0;       // changed and actually wrong
  size_t predicted_positive = 0; // changed
  size_t actual_positive = 0;    // actually wrong
  size_t corrected = 0;          // changed to the gold character

  bool any_undefined() const {
    return detection.precision_undefined || detection.recall_undefined ||
           correction.precision_undefined || correction.recall_undefined;
  }
};

struct ScoredTriple {
  std::u32string source;
  std::u32string gold;
  std::u32string prediction;
};

/// Detection: position i is predicted positive iff prediction differs from
/// source, actually positive iff gold differs from source.
/// Correction precision is corrected / true detections; correction recall
/// is corrected / actual positives. Throws LengthMismatch.
EvalReport score(const std::vector<ScoredTriple>& triples);

/// F = 2PR/(P+R), or 0 when P+R = 0.
double f1_score(double p, double r);

nlohmann::json report_to_json(const EvalReport& r);
std::string format_report(const EvalReport& r);

/// Predictions for every pair of `test` from a trained corrector.
std::vector<ScoredTriple> predict(const Corrector& corrector,
                                  const std::vector<ParallelPair>& test);

struct AblationVariant {
  std::string name;
  bool use_copy = true;
  LatticeMode mode = LatticeMode::kDesm;
};

/// plain, copy, ttm+copy, desm+copy.
std::vector<AblationVariant> standard_variants();
AblationVariant parse_variant(const nlohmann::json& j);

struct AblationRun {
  std::string variant;
  uint64_t seed = 0;
  EvalReport report;
  std::string error;  // non-empty if this run failed
  double final_loss = 0;
};

struct AblationSummary {
  std::string variant;
  size_t runs = 0;  // successful runs averaged
  PrfScore detection;
  PrfScore correction;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::vector<AblationSummary> summary;  // one per variant, input order

  const AblationSummary* find(const std::string& variant) const;
};

using AblationProgress = std::function<void(const AblationRun&)>;

/// Trains every variant once per seed with identical settings except the
/// toggled components, then scores on `test`. A failing run is recorded
/// and the remaining runs continue.
AblationResult run_ablation(const std::vector<AblationVariant>& variants,
                            const std::vector<ParallelPair>& train,
                            const std::vector<ParallelPair>& test,
                            const Lexicon& lex, const PinyinTable& ptable,
                            const TrainConfig& base, const std::vector<uint64_t>& seeds,
                            const AblationProgress& progress = {});

nlohmann::json ablation_to_json(const AblationResult& r);
std::string format_ablation(const AblationResult& r);

}  // namespace desm
