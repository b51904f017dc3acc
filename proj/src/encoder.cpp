#include "hvaudit/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"

namespace hvaudit {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one code point starting at text[pos]; malformed sequences yield
// U+FFFD and consume a single byte.
char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  const unsigned char b0 = byte(pos);
  int len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++pos;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + static_cast<std::size_t>(len) > text.size()) {
    ++pos;
    return kReplacement;
  }
  for (int i = 1; i < len; ++i) {
    const unsigned char b = byte(pos + static_cast<std::size_t>(i));
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += static_cast<std::size_t>(len);
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;          // Latin-1
  // Latin Extended-A upper/lower pairs; the parity flips at 0x139 and 0x179.
  if ((cp >= 0x100 && cp <= 0x137 && cp % 2 == 0 && cp != 0x130) || (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) ||
      (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) || (cp >= 0x179 && cp <= 0x17E && cp % 2 == 1))
    return cp + 1;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;       // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;                       // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

bool is_space(char32_t cp) {
  return cp <= 0x20 || cp == 0x7F || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000 || cp == 0xFEFF;
}

bool is_word(char32_t cp) {
  if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || cp == '_';
  if (cp == 0xAA || cp == 0xB5 || cp == 0xBA) return true;
  if (cp < 0xC0 || cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;    // punctuation, arrows, math, symbols
  if (cp >= 0x3000 && cp <= 0x303F) return false;    // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE6F) return false;    // compatibility forms
  if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
      (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65))
    return false;                                    // fullwidth punctuation
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
  return cp != kReplacement;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

TokenSequence tokenize(std::string_view text, std::size_t max_len) {
  TokenSequence seq;
  std::string word;
  std::size_t pos = 0;
  bool full = false;
  const auto push = [&](std::string token) {
    if (seq.tokens.size() == max_len) {
      full = true;
      seq.truncated = true;
      return;
    }
    seq.tokens.push_back(std::move(token));
  };
  while (pos < text.size() && !full) {
    const char32_t cp = decode_utf8(text, pos);
    if (is_word(cp)) {
      append_utf8(word, to_lower(cp));
      continue;
    }
    if (!word.empty()) push(std::exchange(word, {}));
    if (full || is_space(cp)) continue;
    std::string mark;
    append_utf8(mark, to_lower(cp));
    push(std::move(mark));
  }
  if (!full && !word.empty()) push(std::move(word));
  return seq;
}

double FeatureVector::norm() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.weight * e.weight;
  return std::sqrt(sum);
}

FeatureVector from_dense(std::span<const double> values) {
  FeatureVector v;
  v.dimension = static_cast<std::uint32_t>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] != 0.0) v.entries.push_back({static_cast<std::uint32_t>(i), values[i]});
  return v;
}

void EncoderSpec::validate() const {
  if (dimension == 0) throw Error(ErrorCode::kConfigInvalid, "encoder dimension must be positive");
  if (max_sequence_length == 0)
    throw Error(ErrorCode::kConfigInvalid, "max_sequence_length must be at least 1");
  if (kind == EncoderKind::kHashedNgram) {
    if (ngram_orders.empty()) throw Error(ErrorCode::kConfigInvalid, "ngram orders must be non-empty");
    for (int k : ngram_orders)
      if (k < 1) throw Error(ErrorCode::kConfigInvalid, fmt::format("invalid ngram order {}", k));
  }
}

nlohmann::json EncoderSpec::to_json() const {
  return {{"kind", kind == EncoderKind::kHashedNgram ? "hashed_ngram" : "external_embedding"},
          {"dimension", dimension},
          {"ngram_orders", ngram_orders},
          {"max_sequence_length", max_sequence_length},
          {"use_idf", use_idf},
          {"dropout_eligible", dropout_eligible},
          {"hash_seed", io::hex64(hash_seed)}};
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
  EncoderSpec s;
  try {
    const auto kind = j.value("kind", std::string{"hashed_ngram"});
    if (kind == "hashed_ngram") s.kind = EncoderKind::kHashedNgram;
    else if (kind == "external_embedding") s.kind = EncoderKind::kExternalEmbedding;
    else throw Error(ErrorCode::kConfigInvalid, "unknown encoder kind '" + kind + "'");
    s.dimension = j.value("dimension", s.dimension);
    s.ngram_orders = j.value("ngram_orders", s.ngram_orders);
    s.max_sequence_length = j.value("max_sequence_length", s.max_sequence_length);
    s.use_idf = j.value("use_idf", s.use_idf);
    s.dropout_eligible = j.value("dropout_eligible", s.dropout_eligible);
    if (j.contains("hash_seed")) s.hash_seed = std::stoull(j["hash_seed"].get<std::string>(), nullptr, 16);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("invalid encoder spec: ") + e.what());
  }
  s.validate();
  return s;
}

IdfTable::IdfTable(std::size_t document_count, std::vector<std::uint32_t> document_frequency)
    : document_count_(document_count), df_(std::move(document_frequency)), idf_(df_.size()) {
  const double n = static_cast<double>(document_count_);
  for (std::size_t i = 0; i < df_.size(); ++i)
    idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df_[i]))) + 1.0;
}

std::uint32_t hash_ngram(std::span<const std::string> tokens, const EncoderSpec& spec) {
  char seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>((spec.hash_seed >> (8 * i)) & 0xFF);
  std::uint64_t h = io::fnv1a64(std::string_view(seed_bytes, 8));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) h = io::fnv1a64("\x1f", h);
    h = io::fnv1a64(tokens[i], h);
  }
  return static_cast<std::uint32_t>(mix64(h) % spec.dimension);
}

std::vector<std::uint32_t> feature_indices(std::string_view text, const EncoderSpec& spec) {
  const TokenSequence seq = tokenize(text, spec.max_sequence_length);
  const std::span<const std::string> tokens(seq.tokens);
  std::vector<std::uint32_t> out;
  for (int order : spec.ngram_orders) {
    const auto k = static_cast<std::size_t>(order);
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) out.push_back(hash_ngram(tokens.subspan(i, k), spec));
  }
  return out;
}

IdfTable fit_idf(std::span<const std::string> documents, const EncoderSpec& spec) {
  spec.validate();
  if (documents.empty()) throw Error(ErrorCode::kEmptyCorpus, "cannot fit idf on an empty corpus");
  std::vector<std::uint32_t> df(spec.dimension, 0);
  for (const auto& doc : documents) {
    auto idx = feature_indices(doc, spec);
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    for (std::uint32_t i : idx) ++df[i];
  }
  return IdfTable(documents.size(), std::move(df));
}

IdfTable fit_idf(const Corpus& c, const EncoderSpec& spec) {
  std::vector<std::string> docs;
  docs.reserve(c.size());
  for (const auto& p : c.items) docs.push_back(p.text);
  return fit_idf(docs, spec);
}

FeatureVector encode(std::string_view text, const EncoderSpec& spec, const IdfTable* idf) {
  FeatureVector v;
  v.dimension = spec.dimension;
  auto idx = feature_indices(text, spec);
  std::sort(idx.begin(), idx.end());
  const bool weight_idf = spec.use_idf && idf != nullptr;
  if (weight_idf && idf->dimension() != spec.dimension)
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("idf table has dimension {}, encoder {}", idf->dimension(), spec.dimension));
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && idx[j] == idx[i]) ++j;
    double w = static_cast<double>(j - i);
    if (weight_idf) w *= idf->idf(idx[i]);
    v.entries.push_back({idx[i], w});
    i = j;
  }
  const double norm = v.norm();
  if (norm > 0.0)
    for (auto& e : v.entries) e.weight /= norm;
  return v;
}

std::map<std::string, FeatureVector> load_external_embeddings(const std::filesystem::path& path,
                                                              const Corpus& c) {
  std::map<std::string, FeatureVector> all;
  std::optional<std::size_t> dim;
  io::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    std::string id;
    std::vector<double> values;
    try {
      const auto j = nlohmann::json::parse(line);
      id = j.at("pref_id").get<std::string>();
      values = j.at("values").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
    if (!dim) dim = values.size();
    if (values.size() != *dim || values.empty())
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("{}:{}: embedding for '{}' has dimension {}, expected {}", path.string(),
                              line_no, id, values.size(), *dim));
    for (double x : values)
      if (!std::isfinite(x))
        throw Error(ErrorCode::kMalformedRecord, fmt::format("{}:{}: non-finite value", path.string(), line_no));
    all[id] = from_dense(values);
    all[id].dimension = static_cast<std::uint32_t>(*dim);
  });
  std::map<std::string, FeatureVector> out;
  std::vector<std::string> missing;
  for (const auto& p : c.items) {
    auto it = all.find(p.pref_id);
    if (it == all.end()) missing.push_back(p.pref_id);
    else out.emplace(p.pref_id, it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += fmt::format(", ... ({} total)", missing.size());
    throw Error(ErrorCode::kMissingEmbedding, "missing embeddings for: " + list);
  }
  return out;
}

}  // namespace hvaudit
