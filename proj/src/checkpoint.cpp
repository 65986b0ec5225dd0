#include "desm/checkpoint.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "desm/errors.h"

namespace desm {
namespace {

constexpr char kMagic[8] = {'D', 'E', 'S', 'M', 'C', 'K', 'P', 'T'};

uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  size_t left = bytes.size();
  while (left > 0) {
    auto n = static_cast<uInt>(std::min<size_t>(left, 1u << 30));
    crc = crc32(crc, p, n);
    p += n;
    left -= n;
  }
  return static_cast<uint32_t>(crc);
}

template <class U>
void put(std::string& out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xFF));
  }
}

void put_f32(std::string& out, float f) { put(out, std::bit_cast<uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <class U>
  U get() {
    need(sizeof(U));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  float get_f32() { return std::bit_cast<float>(get<uint32_t>()); }
  std::string_view bytes(size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError("checkpoint truncated");
  }
  std::string_view b_;
  size_t pos_ = 0;
};

}  // namespace

uint32_t lexicon_fingerprint(const Lexicon& lex) { return crc_of(lex.serialize()); }

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta;
  meta["config"] = ckpt.config.to_json();
  meta["lattice_mode"] = std::string(to_string(ckpt.features.mode));
  meta["m_max"] = ckpt.features.m_max;
  std::vector<uint32_t> cps(ckpt.vocab.chars().begin(), ckpt.vocab.chars().end());
  meta["vocab"] = cps;
  meta["lexicon_crc"] = ckpt.lexicon_crc;
  std::string meta_text = meta.dump();

  std::string payload;
  put<uint32_t>(payload, static_cast<uint32_t>(meta_text.size()));
  payload += meta_text;
  auto tensors = ckpt.params.tensors();
  put<uint32_t>(payload, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<uint16_t>(payload, static_cast<uint16_t>(name.size()));
    payload += name;
    put<uint32_t>(payload, static_cast<uint32_t>(m->rows()));
    put<uint32_t>(payload, static_cast<uint32_t>(m->cols()));
    for (Eigen::Index k = 0; k < m->size(); ++k) put_f32(payload, m->data()[k]);
  }

  std::string out(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kCheckpointVersion);
  put<uint32_t>(out, crc_of(payload));
  put<uint64_t>(out, payload.size());
  out += payload;
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader head(bytes);
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  head.bytes(sizeof(kMagic));
  auto version = head.get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  auto crc = head.get<uint32_t>();
  auto size = head.get<uint64_t>();
  auto payload = head.bytes(size);
  if (!head.done()) throw FormatError("trailing bytes after checkpoint payload");
  if (crc_of(payload) != crc) throw FormatError("checkpoint checksum mismatch");

  Reader r(payload);
  auto meta_size = r.get<uint32_t>();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.bytes(meta_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = ModelConfig::from_json(meta.at("config"));
    ckpt.features.mode = parse_lattice_mode(meta.at("lattice_mode").get<std::string>());
    ckpt.features.m_max = meta.at("m_max").get<size_t>();
    auto cps = meta.at("vocab").get<std::vector<uint32_t>>();
    ckpt.vocab = CharVocab::from_chars(std::vector<char32_t>(cps.begin(), cps.end()));
    ckpt.lexicon_crc = meta.at("lexicon_crc").get<uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  ckpt.config.validate();
  if (ckpt.vocab.size() != ckpt.config.char_vocab_size) {
    throw FormatError("checkpoint vocabulary does not match its config");
  }

  ckpt.params = ModelParams<float>::zeros(ckpt.config);
  auto tensors = ckpt.params.tensors();
  auto count = r.get<uint32_t>();
  if (count != tensors.size()) throw FormatError("checkpoint tensor count mismatch");
  for (auto& [name, m] : tensors) {
    auto len = r.get<uint16_t>();
    auto got = r.bytes(len);
    if (got != name) {
      throw FormatError("expected tensor '" + name + "', found '" + std::string(got) + "'");
    }
    auto rows = r.get<uint32_t>();
    auto cols = r.get<uint32_t>();
    if (rows != m->rows() || cols != m->cols()) {
      throw FormatError("shape mismatch for tensor '" + name + "'");
    }
    for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = r.get_f32();
    if (!m->allFinite()) throw FormatError("non-finite values in tensor '" + name + "'");
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  auto bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

void check_lexicon(const Checkpoint& ckpt, const Lexicon& lex) {
  if (lexicon_fingerprint(lex) != ckpt.lexicon_crc ||
      ckpt.config.word_vocab_size != lex.size() + kFirstRealId) {
    throw DataError("lexicon does not match the one the checkpoint was trained with");
  }
}

}  // namespace desm
