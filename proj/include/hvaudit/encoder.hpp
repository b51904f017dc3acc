#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "hvaudit/corpus.hpp"

namespace hvaudit {

struct TokenSequence {
  std::vector<std::string> tokens;
  bool truncated = false;
};

// Lowercases and splits UTF-8 text into word runs and single punctuation
// marks, keeping the first max_len tokens.
TokenSequence tokenize(std::string_view text, std::size_t max_len);

struct FeatureEntry {
  std::uint32_t index = 0;
  double weight = 0.0;

  bool operator==(const FeatureEntry&) const = default;
};

// Sparse vector; entries sorted by strictly increasing index.
struct FeatureVector {
  std::uint32_t dimension = 0;
  std::vector<FeatureEntry> entries;

  double norm() const;
  bool operator==(const FeatureVector&) const = default;
};

// Builds a FeatureVector from a dense array, dropping exact zeros.
FeatureVector from_dense(std::span<const double> values);

enum class EncoderKind { kHashedNgram, kExternalEmbedding };

struct EncoderSpec {
  static constexpr std::uint32_t kDefaultDimension = 1u << 18;
  static constexpr std::uint64_t kDefaultHashSeed = 0x9e3779b97f4a7c15ULL;

  EncoderKind kind = EncoderKind::kHashedNgram;
  std::uint32_t dimension = kDefaultDimension;
  std::vector<int> ngram_orders = {1, 2};
  std::size_t max_sequence_length = 128;
  bool use_idf = true;
  bool dropout_eligible = true;
  std::uint64_t hash_seed = kDefaultHashSeed;

  // Throws Error(kConfigInvalid).
  void validate() const;

  nlohmann::json to_json() const;
  static EncoderSpec from_json(const nlohmann::json& j);

  bool operator==(const EncoderSpec&) const = default;
};

// Document frequencies over hashed feature indices.
class IdfTable {
 public:
  IdfTable() = default;
  IdfTable(std::size_t document_count, std::vector<std::uint32_t> document_frequency);

  std::size_t document_count() const { return document_count_; }
  std::uint32_t dimension() const { return static_cast<std::uint32_t>(df_.size()); }
  const std::vector<std::uint32_t>& document_frequency() const { return df_; }

  // ln((1 + N) / (1 + df)) + 1
  double idf(std::uint32_t index) const { return idf_[index]; }

  bool operator==(const IdfTable& other) const {
    return document_count_ == other.document_count_ && df_ == other.df_;
  }

 private:
  std::size_t document_count_ = 0;
  std::vector<std::uint32_t> df_;
  std::vector<double> idf_;
};

// Hashed feature index of one n-gram (tokens joined by U+001F).
std::uint32_t hash_ngram(std::span<const std::string> tokens, const EncoderSpec& spec);

// Feature indices (with repetition) of all configured n-grams.
std::vector<std::uint32_t> feature_indices(std::string_view text, const EncoderSpec& spec);

IdfTable fit_idf(std::span<const std::string> documents, const EncoderSpec& spec);
IdfTable fit_idf(const Corpus& c, const EncoderSpec& spec);

// tf (or tf-idf when spec.use_idf and idf is supplied) weights, L2-normalized.
FeatureVector encode(std::string_view text, const EncoderSpec& spec, const IdfTable* idf = nullptr);

// One {pref_id, values: [d reals]} per line; every corpus id must resolve.
std::map<std::string, FeatureVector> load_external_embeddings(const std::filesystem::path& path,
                                                              const Corpus& c);

}  // namespace hvaudit
