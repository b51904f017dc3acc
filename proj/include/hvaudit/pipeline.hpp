#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "hvaudit/audit.hpp"
#include "hvaudit/classifier.hpp"
#include "hvaudit/corpus.hpp"
#include "hvaudit/encoder.hpp"
#include "hvaudit/evaluation.hpp"
#include "hvaudit/taxonomy.hpp"

namespace hvaudit {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance record written next to every output.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  // Records the SHA-256 of an input file.
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }
  void finish(bool complete, const std::string& error = {});

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::uint64_t seed_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::vector<std::string> outputs_;
  std::string started_at_;
  std::string finished_at_;
  std::string status_ = "running";
  std::string error_;
};

// Ground-truth labels joined to their preference texts.
struct LabeledTexts {
  std::vector<LabeledExample> labels;
  std::vector<std::string> texts;
};

// Throws kMalformedRecord naming the first label whose pref_id has no text.
LabeledTexts join_labels(const std::vector<LabeledExample>& labels, const Corpus& corpus);

struct TrainOutputs {
  TrainResult result;
  MetricsReport test_metrics;
  ConfusionMatrix test_confusion;
  std::vector<LabeledExample> test_split;
};

// Fits idf on the labeled texts, encodes, trains, and scores the held-out
// split. With out_dir set, writes model.bin, history.json, metrics.json and
// test_split.jsonl there. Given embeddings, those replace the hashed features.
TrainOutputs train_on_labels(const LabeledTexts& data, const Taxonomy& taxonomy, const TrainConfig& cfg,
                             EncoderSpec spec, const std::optional<std::filesystem::path>& out_dir,
                             const std::map<std::string, FeatureVector>* embeddings = nullptr);

struct EvaluationOutputs {
  MetricsReport metrics;
  ConfusionMatrix confusion;
};

EvaluationOutputs evaluate_model(const LinearSoftmaxModel& model, const LabeledTexts& data,
                                 const std::map<std::string, FeatureVector>* embeddings = nullptr);

nlohmann::json metrics_json(const MetricsReport& m, const ConfusionMatrix& cm, const Taxonomy& taxonomy);

struct PipelineConfig {
  struct CorpusInput {
    std::string id;
    std::filesystem::path path;
  };
  struct Dataset {
    std::string id;
    std::string corpus;
    RecordFilter filter;
  };

  std::filesystem::path labels;
  std::filesystem::path label_corpus;
  std::vector<CorpusInput> corpora;
  std::vector<Dataset> datasets;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> taxonomy;
  TrainConfig train;
  EncoderSpec encoder;

  // Relative paths resolve against base_dir.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  nlohmann::json to_json() const;
};

// train -> evaluate -> classify -> distribution -> compare -> emit_report.
// The manifest is marked incomplete when a stage throws; the error is then
// rethrown.
std::vector<std::filesystem::path> run_pipeline(const PipelineConfig& cfg);

}  // namespace hvaudit
