#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hvaudit {

using LabelId = int;

struct ValueLabel {
  LabelId id = 0;
  std::string name;
  std::vector<std::string> aliases;
  std::string description;
  std::vector<std::string> sub_values;
};

// The seven human-value categories used as classification targets.
// Ids follow the ground-truth findings ordering (0 = Information Seeking).
class Taxonomy {
 public:
  static constexpr std::size_t kCanonicalSize = 7;

  Taxonomy() = default;
  explicit Taxonomy(std::vector<ValueLabel> labels) : labels_(std::move(labels)) {}

  const std::vector<ValueLabel>& labels() const { return labels_; }
  std::vector<ValueLabel>& mutable_labels() { return labels_; }
  std::size_t size() const { return labels_.size(); }

  const ValueLabel& at(LabelId id) const;
  bool contains(LabelId id) const { return id >= 0 && static_cast<std::size_t>(id) < labels_.size(); }

  // Case-insensitive, whitespace-trimmed match on names and aliases.
  // Throws Error(kUnknownLabel).
  const ValueLabel& label_from_name(std::string_view name) const;

  // Identifies the label vocabulary (ids and names only).
  std::uint64_t fingerprint() const;

  nlohmann::json to_json() const;
  static Taxonomy from_json(const nlohmann::json& j);
  static Taxonomy load(const std::filesystem::path& path);

 private:
  std::vector<ValueLabel> labels_;
};

const Taxonomy& canonical_taxonomy();

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationResult validate_taxonomy(const Taxonomy& t,
                                   std::size_t expected_size = Taxonomy::kCanonicalSize);

// Lowercase ASCII and strip surrounding whitespace; used for name matching.
std::string fold_label_name(std::string_view name);

}  // namespace hvaudit
