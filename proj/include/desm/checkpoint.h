#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "desm/corrector.h"
#include "desm/lexicon.h"
#include "desm/model.h"
#include "desm/vocab.h"

namespace desm {

inline constexpr uint32_t kCheckpointVersion = 1;

/// Everything needed to rebuild a Corrector next to its lexicon.
struct Checkpoint {
  ModelConfig config;
  FeatureSpec features;
  CharVocab vocab;
  /// CRC32 of the serialized lexicon the model was trained against.
  uint32_t lexicon_crc = 0;
  ModelParams<float> params;
};

uint32_t lexicon_fingerprint(const Lexicon& lex);

/// Layout (little-endian):
///   "DESMCKPT" | u32 version | u32 crc32(payload) | u64 payload size | payload
/// payload = u32 meta size | meta JSON (config, features, vocab, lexicon crc)
///         | u32 tensor count | per tensor: u16 name size, name, u32 rows,
///           u32 cols, rows*cols float32
std::string serialize_checkpoint(const Checkpoint& ckpt);

/// Rejects bad magic, version, checksum, tensor names or shapes.
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws DataError unless `lex` is the lexicon the checkpoint was trained on.
void check_lexicon(const Checkpoint& ckpt, const Lexicon& lex);

}  // namespace desm
