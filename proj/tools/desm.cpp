// desm: lexicon building, lattice matching, synthetic data, training,
// correction, evaluation and ablation from one binary.
//
// Exit codes: 0 ok, 1 usage, 2 bad input data, 3 undefined metric
// (zero denominator) in evaluate, 4 internal failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "desm/checkpoint.h"
#include "desm/corpus.h"
#include "desm/errors.h"
#include "desm/evaluation.h"
#include "desm/lattice.h"
#include "desm/text.h"
#include "desm/trainer.h"
#include "log.h"

namespace {

using namespace desm;
using cli::Level;
using cli::log;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitUndefinedMetric = 3;
constexpr int kExitInternal = 4;

/// Output sink: a file when --out is given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw DataError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!path.empty() && path != "-") {
    file.open(path, std::ios::binary);
    if (!file) throw DataError("cannot open " + path);
    in = &file;
  }
  std::string line;
  while (std::getline(*in, line)) lines.emplace_back(strip_cr(line));
  return lines;
}

std::u32string decode_line(const std::string& line, size_t line_no) {
  try {
    return decode_utf8(line);
  } catch (const Utf8Error& e) {
    throw MalformedLine("input", line_no, e.what());
  }
}

struct Common {
  std::string lexicon;
  std::string pinyin_table;
  std::string fuzzy_table;
  std::string checkpoint;
  std::string config;
  std::string out;
  std::string format = "text";
  size_t m_max = kDefaultMMax;
  uint64_t seed = 1;
};

void add_format(CLI::App* app, Common& c) {
  app->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"text", "json"}));
}

// --- build-lexicon -------------------------------------------------------

int cmd_build_lexicon(const Common& c, const std::string& words) {
  auto ptable = PinyinTable::load(c.pinyin_table);
  auto fuzzy = c.fuzzy_table.empty() ? FuzzyClassTable::defaults()
                                     : FuzzyClassTable::load(c.fuzzy_table);
  auto lex = Lexicon::build_from_file(words, ptable, fuzzy);
  Output out(c.out);
  out.stream() << lex.serialize();
  log(Level::kInfo, "lexicon: ", lex.size(), " words, ", lex.pinyin_index().size(),
      " pinyin 2-gram keys");
  return 0;
}

// --- match ---------------------------------------------------------------

int cmd_match(const Common& c, const std::vector<std::string>& sentences,
              const std::string& input, const std::string& mode) {
  auto lex = Lexicon::load(c.lexicon);
  auto ptable = PinyinTable::load(c.pinyin_table);
  auto lines = sentences.empty() ? read_lines(input) : sentences;
  Output out(c.out);
  for (size_t k = 0; k < lines.size(); ++k) {
    auto s = decode_line(lines[k], k + 1);
    auto lat = build_lattice(lex, ptable, s, c.m_max, parse_lattice_mode(mode));
    if (lines.size() == 1) {
      out.stream() << lattice_to_jsonl(lat, lex);
      continue;
    }
    // Tag records with their sentence when matching several.
    std::istringstream records(lattice_to_jsonl(lat, lex));
    std::string rec;
    while (std::getline(records, rec)) {
      auto j = nlohmann::json::parse(rec);
      j["sentence"] = k;
      out.stream() << j.dump() << '\n';
    }
  }
  return 0;
}

// --- gen-data ------------------------------------------------------------

struct GenArgs {
  size_t n = 1000;
  size_t min_len = 6;
  size_t max_len = 16;
  double error_rate = 0.15;
  double fuzzy_prob = 0.3;
};

int cmd_gen_data(const Common& c, const GenArgs& g) {
  auto lex = Lexicon::load(c.lexicon);
  auto ptable = PinyinTable::load(c.pinyin_table);
  NoiseSpec noise{g.error_rate, g.fuzzy_prob, c.seed};
  auto corpus = generate_synthetic(lex, ptable, g.n, g.min_len, g.max_len, noise);
  Output out(c.out);
  write_parallel_tsv(out.stream(), corpus.pairs);
  auto stats = corpus_stats(corpus.pairs);
  log(Level::kInfo, "generated ", stats.sentences, " sentences with ", stats.error_chars,
      " erroneous characters");
  if (corpus.unsubstitutable > 0) {
    log(Level::kWarn, corpus.unsubstitutable,
        " characters selected for corruption had no homophone and were kept");
  }
  for (size_t k = 0; k < corpus.error_positions.size(); ++k) {
    std::ostringstream pos;
    for (size_t p : corpus.error_positions[k]) pos << ' ' << p;
    log(Level::kDebug, "sentence ", k, " errors at:", pos.str());
  }
  return 0;
}

// --- train ---------------------------------------------------------------

int cmd_train(const Common& c, const std::string& corpus_path, bool seed_set,
              bool m_max_set) {
  auto lex = Lexicon::load(c.lexicon);
  auto ptable = PinyinTable::load(c.pinyin_table);
  auto corpus = load_parallel_tsv(corpus_path);
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : TrainConfig::load(c.config);
  if (seed_set) cfg.seed = c.seed;
  if (m_max_set) cfg.m_max = c.m_max;
  auto stats = corpus_stats(corpus);
  log(Level::kInfo, "training on ", stats.sentences, " pairs (", stats.error_chars,
      " erroneous characters), lattice=", to_string(cfg.lattice_mode),
      " copy=", cfg.use_copy ? "on" : "off");
  auto ckpt = train_corrector(corpus, lex, ptable, cfg, [](const EpochLog& l) {
    log(Level::kInfo, "epoch ", l.epoch, " steps ", l.steps, " loss ", l.mean_loss);
  });
  save_checkpoint(c.checkpoint, ckpt);
  log(Level::kInfo, "wrote ", c.checkpoint);
  return 0;
}

// --- correct -------------------------------------------------------------

int cmd_correct(const Common& c, const std::string& input, size_t top_k) {
  auto lex = Lexicon::load(c.lexicon);
  auto ptable = PinyinTable::load(c.pinyin_table);
  auto corrector = make_corrector(load_checkpoint(c.checkpoint), lex, ptable);
  auto lines = read_lines(input);
  Output out(c.out);
  for (size_t k = 0; k < lines.size(); ++k) {
    auto s = decode_line(lines[k], k + 1);
    if (s.size() > corrector.model().config().max_len) {
      throw SequenceTooLong(s.size(), corrector.model().config().max_len);
    }
    auto res = corrector.correct(s, c.format == "json" ? top_k : 0);
    if (c.format == "text") {
      out.stream() << encode_utf8(res.output) << '\n';
      continue;
    }
    nlohmann::json j;
    j["input"] = encode_utf8(s);
    j["output"] = encode_utf8(res.output);
    j["omega"] = res.omega;
    if (!res.top.empty()) {
      auto& top = j["top"] = nlohmann::json::array();
      for (const auto& pos : res.top) {
        auto& row = top.emplace_back(nlohmann::json::array());
        for (auto [id, p] : pos) {
          std::string ch = corrector.vocab().is_real(id)
                               ? encode_utf8(corrector.vocab().character(id))
                               : (id == kUnkId ? "<unk>" : "<pad>");
          row.push_back({{"char", ch}, {"p", p}});
        }
      }
    }
    out.stream() << j.dump() << '\n';
  }
  return 0;
}

// --- evaluate ------------------------------------------------------------

int cmd_evaluate(const Common& c, const std::string& test_path,
                 const std::string& predictions, bool allow_undefined) {
  auto test = load_parallel_tsv(test_path);
  std::vector<ScoredTriple> triples;
  if (!predictions.empty()) {
    auto lines = read_lines(predictions);
    if (lines.size() != test.size()) {
      throw DataError("predictions file has " + std::to_string(lines.size()) +
                      " lines, test set has " + std::to_string(test.size()));
    }
    for (size_t k = 0; k < test.size(); ++k) {
      triples.push_back({test[k].source, test[k].target, decode_line(lines[k], k + 1)});
    }
  } else {
    if (c.checkpoint.empty() || c.lexicon.empty() || c.pinyin_table.empty()) {
      throw CLI::ValidationError(
          "evaluate needs --checkpoint, --lexicon and --pinyin-table unless "
          "--predictions is given");
    }
    auto lex = Lexicon::load(c.lexicon);
    auto ptable = PinyinTable::load(c.pinyin_table);
    auto corrector = make_corrector(load_checkpoint(c.checkpoint), lex, ptable);
    triples = predict(corrector, test);
  }
  auto report = score(triples);
  report.tag = test_path;
  Output out(c.out);
  if (c.format == "json") {
    out.stream() << report_to_json(report).dump(2) << '\n';
  } else {
    out.stream() << format_report(report);
  }
  if (report.any_undefined() && !allow_undefined) {
    log(Level::kError, "a metric had a zero denominator (use --allow-undefined to accept)");
    return kExitUndefinedMetric;
  }
  return 0;
}

// --- ablate --------------------------------------------------------------

int cmd_ablate(const Common& c, const std::string& train_path, const std::string& test_path,
               bool seed_set) {
  auto lex = Lexicon::load(c.lexicon);
  auto ptable = PinyinTable::load(c.pinyin_table);
  auto train = load_parallel_tsv(train_path);
  auto test = load_parallel_tsv(test_path);

  TrainConfig base;
  std::vector<AblationVariant> variants = standard_variants();
  std::vector<uint64_t> seeds = {c.seed};
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw DataError("cannot open " + c.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(c.config + ": " + e.what());
    }
    for (const auto& [key, v] : j.items()) {
      if (key != "train" && key != "variants" && key != "seeds") {
        throw DataError("ablation config: unknown key '" + key + "'");
      }
    }
    if (j.contains("train")) base = TrainConfig::from_json(j["train"]);
    if (j.contains("variants")) {
      variants.clear();
      for (const auto& v : j["variants"]) variants.push_back(parse_variant(v));
    }
    if (j.contains("seeds") && !seed_set) {
      try {
        seeds = j["seeds"].get<std::vector<uint64_t>>();
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("ablation config: seeds: ") + e.what());
      }
    }
  }
  auto result = run_ablation(variants, train, test, lex, ptable, base, seeds,
                             [](const AblationRun& r) {
                               if (!r.error.empty()) {
                                 log(Level::kError, r.variant, " seed ", r.seed, ": ", r.error);
                                 return;
                               }
                               log(Level::kInfo, r.variant, " seed ", r.seed,
                                   " det F ", r.report.detection.f1, " cor F ",
                                   r.report.correction.f1);
                             });
  Output out(c.out);
  if (c.format == "json") {
    out.stream() << ablation_to_json(result).dump(2) << '\n';
  } else {
    out.stream() << format_ablation(result);
  }
  for (const auto& r : result.runs) {
    if (!r.error.empty()) return kExitData;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phonetic error detection and correction for Chinese text"};
  app.require_subcommand(1);
  Common c;

  auto existing = CLI::ExistingFile;

  auto* build = app.add_subcommand("build-lexicon", "Word file -> serialized lexicon");
  std::string words;
  build->add_option("words", words, "Word file (surface[TAB]frequency)")->required()->check(existing);
  build->add_option("--pinyin-table", c.pinyin_table)->required()->check(existing);
  build->add_option("--fuzzy-table", c.fuzzy_table, "Fuzzy classes (default: built-in)")->check(existing);
  build->add_option("--out", c.out, "Output path (default stdout)");

  auto* match = app.add_subcommand("match", "Print the char-word lattice as JSON lines");
  std::vector<std::string> sentences;
  std::string input;
  std::string mode = "desm";
  match->add_option("sentences", sentences, "Sentences (default: read --input)");
  match->add_option("--input", input, "Input file, one sentence per line (default stdin)");
  match->add_option("--lexicon", c.lexicon)->required()->check(existing);
  match->add_option("--pinyin-table", c.pinyin_table)->required()->check(existing);
  match->add_option("--m-max", c.m_max)->check(CLI::PositiveNumber);
  match->add_option("--mode", mode)->check(CLI::IsMember({"desm", "ttm", "none"}));
  match->add_option("--out", c.out);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic parallel corpus");
  GenArgs g;
  gen->add_option("--lexicon", c.lexicon)->required()->check(existing);
  gen->add_option("--pinyin-table", c.pinyin_table)->required()->check(existing);
  gen->add_option("--n", g.n, "Number of sentences")->check(CLI::NonNegativeNumber);
  gen->add_option("--min-len", g.min_len)->check(CLI::PositiveNumber);
  gen->add_option("--max-len", g.max_len)->check(CLI::PositiveNumber);
  gen->add_option("--error-rate", g.error_rate)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--fuzzy-prob", g.fuzzy_prob)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", c.seed);
  gen->add_option("--out", c.out);

  auto* train = app.add_subcommand("train", "Train a corrector and write a checkpoint");
  std::string corpus;
  train->add_option("--corpus", corpus, "Parallel TSV")->required()->check(existing);
  train->add_option("--lexicon", c.lexicon)->required()->check(existing);
  train->add_option("--pinyin-table", c.pinyin_table)->required()->check(existing);
  train->add_option("--config", c.config, "Training config JSON")->check(existing);
  train->add_option("--checkpoint", c.checkpoint, "Output checkpoint")->required();
  auto* train_seed = train->add_option("--seed", c.seed, "Overrides the config seed");
  auto* train_mmax = train->add_option("--m-max", c.m_max)->check(CLI::PositiveNumber);

  auto* correct = app.add_subcommand("correct", "Correct text, one sentence per line");
  size_t top_k = 0;
  correct->add_option("--checkpoint", c.checkpoint)->required()->check(existing);
  correct->add_option("--lexicon", c.lexicon)->required()->check(existing);
  correct->add_option("--pinyin-table", c.pinyin_table)->required()->check(existing);
  correct->add_option("--input", input, "Input file (default stdin)");
  correct->add_option("--top-k", top_k, "Per-position alternatives in JSON output");
  correct->add_option("--out", c.out);
  add_format(correct, c);

  auto* evaluate = app.add_subcommand("evaluate", "Character-level P/R/F on a test TSV");
  std::string test;
  std::string predictions;
  bool allow_undefined = false;
  evaluate->add_option("--test", test, "Parallel TSV")->required()->check(existing);
  evaluate->add_option("--checkpoint", c.checkpoint)->check(existing);
  evaluate->add_option("--lexicon", c.lexicon)->check(existing);
  evaluate->add_option("--pinyin-table", c.pinyin_table)->check(existing);
  evaluate->add_option("--predictions", predictions,
                       "Score these predictions (one line per test pair) instead of a model")
      ->check(existing);
  evaluate->add_flag("--allow-undefined", allow_undefined,
                     "Exit 0 even if a metric has a zero denominator");
  evaluate->add_option("--out", c.out);
  add_format(evaluate, c);

  auto* ablate = app.add_subcommand("ablate", "Train and score every ablation variant");
  ablate->add_option("--corpus", corpus, "Training TSV")->required()->check(existing);
  ablate->add_option("--test", test, "Test TSV")->required()->check(existing);
  ablate->add_option("--lexicon", c.lexicon)->required()->check(existing);
  ablate->add_option("--pinyin-table", c.pinyin_table)->required()->check(existing);
  ablate->add_option("--config", c.config,
                     "JSON with optional 'train', 'variants' and 'seeds'")
      ->check(existing);
  auto* ablate_seed = ablate->add_option("--seed", c.seed, "Single seed, overrides the config");
  ablate->add_option("--out", c.out);
  add_format(ablate, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (build->parsed()) return cmd_build_lexicon(c, words);
    if (match->parsed()) return cmd_match(c, sentences, input, mode);
    if (gen->parsed()) return cmd_gen_data(c, g);
    if (train->parsed()) {
      return cmd_train(c, corpus, train_seed->count() > 0, train_mmax->count() > 0);
    }
    if (correct->parsed()) return cmd_correct(c, input, top_k);
    if (evaluate->parsed()) return cmd_evaluate(c, test, predictions, allow_undefined);
    if (ablate->parsed()) return cmd_ablate(c, corpus, test, ablate_seed->count() > 0);
  } catch (const CLI::ValidationError& e) {
    log(Level::kError, e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    log(Level::kError, e.what());
    return kExitData;
  } catch (const Utf8Error& e) {
    log(Level::kError, e.what());
    return kExitData;
  } catch (const std::exception& e) {
    log(Level::kError, "internal error: ", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}
