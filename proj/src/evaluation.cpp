#include "desm/evaluation.h"

#include <cstdio>
#include <sstream>

#include "desm/errors.h"

namespace desm {

double f1_score(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

namespace {

PrfScore make_prf(size_t num_p, size_t den_p, size_t num_r, size_t den_r) {
  PrfScore s;
  s.precision_undefined = den_p == 0;
  s.recall_undefined = den_r == 0;
  s.precision = den_p ? static_cast<double>(num_p) / static_cast<double>(den_p) : 0.0;
  s.recall = den_r ? static_cast<double>(num_r) / static_cast<double>(den_r) : 0.0;
  s.f1 = f1_score(s.precision, s.recall);
  return s;
}

nlohmann::json prf_json(const PrfScore& s) {
  return {{"precision", s.precision},
          {"recall", s.recall},
          {"f1", s.f1},
          {"precision_undefined", s.precision_undefined},
          {"recall_undefined", s.recall_undefined}};
}

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace

EvalReport score(const std::vector<ScoredTriple>& triples) {
  EvalReport r;
  for (size_t k = 0; k < triples.size(); ++k) {
    const auto& t = triples[k];
    if (t.source.size() != t.gold.size() || t.source.size() != t.prediction.size()) {
      throw LengthMismatch("score", k + 1);
    }
    for (size_t i = 0; i < t.source.size(); ++i) {
      bool changed = t.prediction[i] != t.source[i];
      bool wrong = t.gold[i] != t.source[i];
      r.characters++;
      r.predicted_positive += changed;
      r.actual_positive += wrong;
      r.detection_tp += changed && wrong;
      r.corrected += wrong && t.prediction[i] == t.gold[i];
    }
  }
  r.detection = make_prf(r.detection_tp, r.predicted_positive, r.detection_tp,
                         r.actual_positive);
  r.correction = make_prf(r.corrected, r.detection_tp, r.corrected, r.actual_positive);
  return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
  return {{"tag", r.tag},
          {"detection", prf_json(r.detection)},
          {"correction", prf_json(r.correction)},
          {"counts",
           {{"characters", r.characters},
            {"detection_tp", r.detection_tp},
            {"predicted_positive", r.predicted_positive},
            {"actual_positive", r.actual_positive},
            {"corrected", r.corrected}}}};
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  if (!r.tag.empty()) os << r.tag << '\n';
  os << "                 P       R       F\n";
  os << "detection  " << pct(r.detection.precision) << "  " << pct(r.detection.recall)
     << "  " << pct(r.detection.f1) << '\n';
  os << "correction " << pct(r.correction.precision) << "  " << pct(r.correction.recall)
     << "  " << pct(r.correction.f1) << '\n';
  os << "chars=" << r.characters << " changed=" << r.predicted_positive
     << " wrong=" << r.actual_positive << " detected=" << r.detection_tp
     << " corrected=" << r.corrected << '\n';
  if (r.any_undefined()) os << "warning: zero denominator in at least one metric\n";
  return os.str();
}

std::vector<ScoredTriple> predict(const Corrector& corrector,
                                  const std::vector<ParallelPair>& test) {
  std::vector<ScoredTriple> out;
  out.reserve(test.size());
  for (const auto& p : test) {
    out.push_back({p.source, p.target, corrector.correct(p.source).output});
  }
  return out;
}

std::vector<AblationVariant> standard_variants() {
  return {{"plain", false, LatticeMode::kNone},
          {"copy", true, LatticeMode::kNone},
          {"ttm+copy", true, LatticeMode::kTrieOnly},
          {"desm+copy", true, LatticeMode::kDesm}};
}

AblationVariant parse_variant(const nlohmann::json& j) {
  try {
    AblationVariant v;
    v.use_copy = j.at("copy").get<bool>();
    v.mode = parse_lattice_mode(j.at("lattice").get<std::string>());
    v.name = j.contains("name") ? j.at("name").get<std::string>()
                                : std::string(to_string(v.mode)) + (v.use_copy ? "+copy" : "");
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("ablation variant: ") + e.what());
  }
}

const AblationSummary* AblationResult::find(const std::string& variant) const {
  for (const auto& s : summary) {
    if (s.variant == variant) return &s;
  }
  return nullptr;
}

AblationResult run_ablation(const std::vector<AblationVariant>& variants,
                            const std::vector<ParallelPair>& train,
                            const std::vector<ParallelPair>& test,
                            const Lexicon& lex, const PinyinTable& ptable,
                            const TrainConfig& base, const std::vector<uint64_t>& seeds,
                            const AblationProgress& progress) {
  if (seeds.empty()) throw DataError("ablation needs at least one seed");
  AblationResult result;
  for (const auto& v : variants) {
    AblationSummary sum;
    sum.variant = v.name;
    for (uint64_t seed : seeds) {
      AblationRun run;
      run.variant = v.name;
      run.seed = seed;
      try {
        auto cfg = base;
        cfg.use_copy = v.use_copy;
        cfg.lattice_mode = v.mode;
        cfg.seed = seed;
        auto ckpt = train_corrector(train, lex, ptable, cfg, [&](const EpochLog& log) {
          run.final_loss = log.mean_loss;
        });
        auto corrector = make_corrector(ckpt, lex, ptable);
        run.report = score(predict(corrector, test));
        run.report.tag = v.name;
        sum.runs++;
        sum.detection.precision += run.report.detection.precision;
        sum.detection.recall += run.report.detection.recall;
        sum.detection.f1 += run.report.detection.f1;
        sum.correction.precision += run.report.correction.precision;
        sum.correction.recall += run.report.correction.recall;
        sum.correction.f1 += run.report.correction.f1;
      } catch (const std::exception& e) {
        run.error = e.what();
      }
      if (progress) progress(run);
      result.runs.push_back(std::move(run));
    }
    if (sum.runs > 0) {
      auto n = static_cast<double>(sum.runs);
      for (auto* s : {&sum.detection, &sum.correction}) {
        s->precision /= n;
        s->recall /= n;
        s->f1 /= n;
      }
    }
    result.summary.push_back(sum);
  }
  return result;
}

nlohmann::json ablation_to_json(const AblationResult& r) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json x = {{"variant", run.variant},
                        {"seed", run.seed},
                        {"final_loss", run.final_loss}};
    if (run.error.empty()) {
      x["report"] = report_to_json(run.report);
    } else {
      x["error"] = run.error;
    }
    j["runs"].push_back(x);
  }
  j["summary"] = nlohmann::json::array();
  for (const auto& s : r.summary) {
    j["summary"].push_back({{"variant", s.variant},
                            {"runs", s.runs},
                            {"detection", prf_json(s.detection)},
                            {"correction", prf_json(s.correction)}});
  }
  return j;
}

std::string format_ablation(const AblationResult& r) {
  std::ostringstream os;
  os << "variant          runs |  det P   det R   det F |  cor P   cor R   cor F\n";
  for (const auto& s : r.summary) {
    char row[160];
    std::snprintf(row, sizeof(row), "%-16s %4zu | %6.2f  %6.2f  %6.2f | %6.2f  %6.2f  %6.2f\n",
                  s.variant.c_str(), s.runs, 100 * s.detection.precision,
                  100 * s.detection.recall, 100 * s.detection.f1, 100 * s.correction.precision,
                  100 * s.correction.recall, 100 * s.correction.f1);
    os << row;
  }
  for (const auto& run : r.runs) {
    if (!run.error.empty()) {
      os << "failed: " << run.variant << " seed " << run.seed << ": " << run.error << '\n';
    }
  }
  return os.str();
}

}  // namespace desm
