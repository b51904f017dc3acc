#include "hvaudit/taxonomy.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"

namespace hvaudit {

// Generated from resources/taxonomy.json at configure time.
extern const char* const kEmbeddedTaxonomyJson;

std::string fold_label_name(std::string_view name) {
  const auto first = name.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = name.find_last_not_of(" \t\r\n");
  std::string out(name.substr(first, last - first + 1));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  });
  return out;
}

const ValueLabel& Taxonomy::at(LabelId id) const {
  if (!contains(id)) throw Error(ErrorCode::kUnknownLabel, fmt::format("unknown label id {}", id));
  return labels_[static_cast<std::size_t>(id)];
}

const ValueLabel& Taxonomy::label_from_name(std::string_view name) const {
  const std::string key = fold_label_name(name);
  for (const auto& label : labels_) {
    if (fold_label_name(label.name) == key) return label;
    for (const auto& alias : label.aliases)
      if (fold_label_name(alias) == key) return label;
  }
  throw Error(ErrorCode::kUnknownLabel, fmt::format("unknown label name '{}'", name));
}

std::uint64_t Taxonomy::fingerprint() const {
  std::uint64_t h = io::kFnvOffset;
  for (const auto& label : labels_) h = io::fnv1a64(fmt::format("{}\t{}\n", label.id, label.name), h);
  return h;
}

nlohmann::json Taxonomy::to_json() const {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& l : labels_) {
    labels.push_back({{"id", l.id},
                      {"name", l.name},
                      {"aliases", l.aliases},
                      {"description", l.description},
                      {"sub_values", l.sub_values}});
  }
  return {{"format", "hvaudit.taxonomy"}, {"version", 1}, {"labels", labels}};
}

Taxonomy Taxonomy::from_json(const nlohmann::json& j) {
  try {
    std::vector<ValueLabel> labels;
    for (const auto& e : j.at("labels")) {
      ValueLabel l;
      l.id = e.at("id").get<LabelId>();
      l.name = e.at("name").get<std::string>();
      l.aliases = e.value("aliases", std::vector<std::string>{});
      l.description = e.value("description", std::string{});
      l.sub_values = e.value("sub_values", std::vector<std::string>{});
      labels.push_back(std::move(l));
    }
    return Taxonomy(std::move(labels));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("invalid taxonomy document: ") + e.what());
  }
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
  return from_json(j);
}

const Taxonomy& canonical_taxonomy() {
  static const Taxonomy t = Taxonomy::from_json(nlohmann::json::parse(kEmbeddedTaxonomyJson));
  return t;
}

ValidationResult validate_taxonomy(const Taxonomy& t, std::size_t expected_size) {
  ValidationResult r;
  const auto& labels = t.labels();
  if (labels.size() != expected_size)
    r.violations.push_back(fmt::format("expected {} labels, found {}", expected_size, labels.size()));

  std::set<LabelId> ids;
  std::vector<LabelId> repeated;
  for (const auto& l : labels)
    if (!ids.insert(l.id).second) repeated.push_back(l.id);
  for (LabelId id : repeated) r.violations.push_back(fmt::format("label id {} used more than once", id));
  const bool contiguous = !ids.empty() && *ids.begin() == 0 &&
                          *ids.rbegin() == static_cast<LabelId>(ids.size()) - 1 &&
                          ids.size() == labels.size();
  if (!labels.empty() && repeated.empty() && !contiguous)
    r.violations.push_back(fmt::format("label ids are not contiguous from 0 to {}", labels.size() - 1));

  // Every spelling (name or alias) must resolve to exactly one label.
  std::map<std::string, LabelId> owner;
  for (const auto& l : labels) {
    const std::string key = fold_label_name(l.name);
    if (key.empty()) {
      r.violations.push_back(fmt::format("label {} has an empty name", l.id));
      continue;
    }
    auto [it, inserted] = owner.emplace(key, l.id);
    if (!inserted) r.violations.push_back(fmt::format("duplicate label name '{}'", l.name));
  }
  for (const auto& l : labels) {
    for (const auto& alias : l.aliases) {
      auto [it, inserted] = owner.emplace(fold_label_name(alias), l.id);
      if (!inserted && it->second != l.id)
        r.violations.push_back(
            fmt::format("alias '{}' of label {} collides with label {}", alias, l.id, it->second));
    }
  }
  for (const auto& l : labels) {
    if (l.description.empty()) r.violations.push_back(fmt::format("label {} has no description", l.id));
    if (l.sub_values.empty()) r.violations.push_back(fmt::format("label {} has no sub-values", l.id));
  }
  return r;
}

}  // namespace hvaudit
