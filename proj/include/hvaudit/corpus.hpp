#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "hvaudit/taxonomy.hpp"

namespace hvaudit {

enum class Source { kAnthropicHh, kWebGpt, kAlpacaGpt4, kFixture };
enum class Role { kChosen, kRejected, kSingle };

std::string_view to_string(Source s);
std::string_view to_string(Role r);
Source source_from_string(std::string_view s);
Role role_from_string(std::string_view s);

// One preference text unit. `text` is the complete conversation transcript
// or the concatenated prompt/response pair.
struct Preference {
  std::string pref_id;
  Source source = Source::kFixture;
  Role role = Role::kSingle;
  std::string text;
  std::map<std::string, std::string> meta;

  bool operator==(const Preference&) const = default;
};

struct Corpus {
  std::vector<Preference> items;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

struct SkipEntry {
  std::size_t line_no = 0;
  std::string reason;
};

struct IngestResult {
  Corpus corpus;
  std::vector<SkipEntry> skips;
};

struct IngestOptions {
  std::string separator = "\n";
};

// hh-rlhf: every row yields a chosen and a rejected preference; train rows
// precede test rows.
IngestResult ingest_hh_rlhf(const std::filesystem::path& train_path,
                            const std::filesystem::path& test_path,
                            const IngestOptions& options = {});

// WebGPT comparisons: question.full_text + separator + answer_0.
IngestResult ingest_webgpt(const std::filesystem::path& path, const IngestOptions& options = {});

// Alpaca GPT-4: instruction + separator + output; `input` is ignored.
IngestResult ingest_alpaca(const std::filesystem::path& path, const IngestOptions& options = {});

// Canonical corpus file: one {pref_id, source, role, text, meta} per line.
void write_corpus(const std::filesystem::path& path, const Corpus& c);
Corpus read_corpus(const std::filesystem::path& path);

void write_skip_report(const std::filesystem::path& path, const std::vector<SkipEntry>& skips);

// Rewrites a column-oriented export ({"col": [v0, v1, ...], ...}) or a JSON
// array of records as line-delimited records. Returns the row count.
std::size_t convert_columns_to_jsonl(const std::filesystem::path& in, const std::filesystem::path& out);

// Uniform sample of k items without replacement; original order preserved.
Corpus sample_corpus(const Corpus& c, std::size_t k, std::uint64_t seed);

enum class Provenance { kHuman, kModel, kAdjudicated };
std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct LabeledExample {
  std::string pref_id;
  LabelId label = 0;
  std::string annotator_id;
  Provenance provenance = Provenance::kHuman;

  bool operator==(const LabeledExample&) const = default;
};

nlohmann::json to_json(const LabeledExample& e, const Taxonomy& taxonomy);
// Accepts `label` as an integer id or a label name.
LabeledExample labeled_example_from_json(const nlohmann::json& j, const Taxonomy& taxonomy);
std::vector<LabeledExample> read_labels(const std::filesystem::path& path, const Taxonomy& taxonomy);
void write_labels(const std::filesystem::path& path, const std::vector<LabeledExample>& labels,
                  const Taxonomy& taxonomy);

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

// Seeded shuffle, then |train| = round(ratio * m). With `stratified`, the
// rounding is applied per label.
Split<LabeledExample> split_train_test(const std::vector<LabeledExample>& examples, double ratio,
                                       std::uint64_t seed, bool stratified = false);

// Index-level split shared with the classifier; returns (train, test) indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t m, double ratio, std::uint64_t seed, const std::vector<LabelId>* stratify_by = nullptr);

}  // namespace hvaudit
