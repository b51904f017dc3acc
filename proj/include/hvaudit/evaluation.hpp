#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "hvaudit/taxonomy.hpp"

namespace hvaudit {

// Rows are gold labels, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0)
      : n_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const { return n_; }
  std::int64_t at(LabelId gold, LabelId pred) const { return counts_[index(gold, pred)]; }
  void add(LabelId gold, LabelId pred, std::int64_t count = 1) { counts_[index(gold, pred)] += count; }

  std::int64_t total() const;
  std::int64_t support(LabelId gold) const;
  std::int64_t predicted(LabelId pred) const;

  nlohmann::json to_json() const;

 private:
  std::size_t index(LabelId gold, LabelId pred) const;

  std::size_t n_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const LabelId> golds, std::span<const LabelId> preds,
                          std::size_t num_classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  std::int64_t total = 0;

  nlohmann::json to_json(const Taxonomy* taxonomy = nullptr) const;
};

// Undefined ratios are reported as 0 unless `strict`, which throws
// Error(kInsufficientData) instead.
MetricsReport metrics(const ConfusionMatrix& cm, bool strict = false);

struct ReviewRow {
  std::string pref_id;
  std::string text;
  std::string predicted_label;
  std::optional<bool> correct;  // verdict; empty until a reviewer fills it in
};

struct ReviewSheet {
  std::vector<ReviewRow> rows;
};

struct ClassifiedItem {
  std::string pref_id;
  LabelId label = 0;
};

// Uniform seeded sample of k rows in draw order.
ReviewSheet sample_for_human_review(std::span<const ClassifiedItem> classified,
                                    const std::map<std::string, std::string>& texts,
                                    const Taxonomy& taxonomy, std::size_t k, std::uint64_t seed);

// Fraction of rows marked correct. Throws Error(kIncompleteSheet).
double score_human_review(const ReviewSheet& sheet);

// Tab-separated with header pref_id, text, predicted_label, verdict.
// Backslash, tab, CR and LF inside fields are backslash-escaped.
void write_review_sheet(const std::filesystem::path& path, const ReviewSheet& sheet);
ReviewSheet read_review_sheet(const std::filesystem::path& path);

}  // namespace hvaudit
