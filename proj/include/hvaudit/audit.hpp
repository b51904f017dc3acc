#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvaudit/classifier.hpp"
#include "hvaudit/corpus.hpp"
#include "hvaudit/taxonomy.hpp"

namespace hvaudit {

struct ClassifiedRecord {
  std::string pref_id;
  Source source = Source::kFixture;
  Role role = Role::kSingle;
  LabelId label = 0;
  double probability = 0.0;
};

struct ClassifiedCorpus {
  std::uint64_t taxonomy_fingerprint = 0;
  std::vector<ClassifiedRecord> records;
};

// Throws kFingerprintMismatch when the model was trained against a different
// label vocabulary.
ClassifiedCorpus classify_corpus(const LinearSoftmaxModel& model, const Corpus& c, const Taxonomy& taxonomy,
                                 const std::map<std::string, FeatureVector>* embeddings = nullptr);

// First line is a header record {format, version, taxonomy_fingerprint};
// then one {pref_id, source, role, label, prob} per preference.
void write_classified(const std::filesystem::path& path, const ClassifiedCorpus& cc);
ClassifiedCorpus read_classified(const std::filesystem::path& path);

struct RecordFilter {
  std::optional<Source> source;
  std::optional<Role> role;

  bool matches(const ClassifiedRecord& r) const {
    return (!source || r.source == *source) && (!role || r.role == *role);
  }
};

struct DistributionReport {
  std::string dataset_id;
  std::vector<std::string> label_names;
  std::uint64_t taxonomy_fingerprint = 0;
  std::vector<std::int64_t> counts;
  std::vector<double> percentages;
  std::int64_t total = 0;
};

// Throws kEmptyAfterFilter.
DistributionReport distribution(const ClassifiedCorpus& cc, const Taxonomy& taxonomy, std::string dataset_id,
                                const RecordFilter& filter = {});

struct ComparisonMatrix {
  std::vector<std::string> datasets;
  std::vector<std::string> label_names;
  std::vector<std::vector<double>> cells;  // [dataset][label] percentages
};

// Needs at least two reports over the same taxonomy (kTaxonomyMismatch).
ComparisonMatrix compare(std::span<const DistributionReport> reports);

// Distribution table: comment lines (# dataset, # taxonomy, # total) then a
// tab-separated table with header label_id, label, count, percent.
void write_distribution(const std::filesystem::path& path, const DistributionReport& r);
DistributionReport read_distribution(const std::filesystem::path& path);

std::string render_comparison_tsv(const ComparisonMatrix& m);
std::string render_heatmap_svg(const ComparisonMatrix& m);
std::string render_summary(const ComparisonMatrix& m, std::span<const DistributionReport> reports);

// Writes comparison.tsv, distributions/<dataset>.tsv, heatmap.svg and
// summary.txt under out_dir. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const ComparisonMatrix& m,
                                               std::span<const DistributionReport> reports,
                                               const std::filesystem::path& out_dir);

}  // namespace hvaudit
