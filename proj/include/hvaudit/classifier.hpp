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
#include "hvaudit/encoder.hpp"
#include "hvaudit/taxonomy.hpp"

namespace hvaudit {

struct ClassWeights {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](LabelId j) const { return values[static_cast<std::size_t>(j)]; }
};

// Balanced weights w_j = m / (n * count_j). Throws kMissingClass naming every
// class with no occurrences.
ClassWeights class_weights(std::span<const LabelId> labels, std::size_t num_classes);

double log_sum_exp(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

// w_gold * -log softmax(logits)_gold, via log-sum-exp.
double weighted_cross_entropy(std::span<const double> logits, LabelId gold, const ClassWeights& w);

// Multinomial logistic regression over sparse features: logits = W x + b.
class LinearSoftmaxModel {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  LinearSoftmaxModel() = default;
  LinearSoftmaxModel(std::size_t num_classes, std::uint32_t dimension);

  std::size_t num_classes() const { return n_; }
  std::uint32_t dimension() const { return d_; }

  double& weight(std::size_t cls, std::uint32_t feature) { return weights_[cls * d_ + feature]; }
  double weight(std::size_t cls, std::uint32_t feature) const { return weights_[cls * d_ + feature]; }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& biases() { return biases_; }
  const std::vector<double>& biases() const { return biases_; }

  std::vector<double> logits(const FeatureVector& x) const;

  EncoderSpec encoder_spec;
  std::optional<IdfTable> idf;
  std::uint64_t taxonomy_fingerprint = 0;

  // Binary artifact; see docs in classifier.cpp for the byte layout.
  std::string serialize() const;
  static LinearSoftmaxModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static LinearSoftmaxModel load(const std::filesystem::path& path);

  bool operator==(const LinearSoftmaxModel&) const = default;

 private:
  std::size_t n_ = 0;
  std::uint32_t d_ = 0;
  std::vector<double> weights_;  // class-major n x d
  std::vector<double> biases_;
};

struct EncodedExample {
  FeatureVector features;
  LabelId label = 0;
};

struct Gradient {
  std::vector<double> weights;  // same layout as the model
  std::vector<double> biases;
};

// Mean weighted cross-entropy over the batch (no regularizer).
double batch_loss(const LinearSoftmaxModel& model, std::span<const EncodedExample> batch,
                  const ClassWeights& w);

// Exact gradient of batch_loss + (weight_decay / 2) * ||W||^2. Biases are
// not decayed.
Gradient loss_gradient(const LinearSoftmaxModel& model, std::span<const EncodedExample> batch,
                       const ClassWeights& w, double weight_decay = 0.0);

struct TrainConfig {
  int epochs = 8;
  std::size_t batch_size = 64;
  std::size_t max_sequence_length = 128;
  int early_stopping_patience = 2;
  double validation_fraction = 0.1;
  double learning_rate = 0.1;
  std::size_t warmup_steps = 100;
  double weight_decay = 0.01;
  double input_dropout = 0.1;
  std::uint64_t seed = 0;
  double split_ratio = 0.8;

  // Throws Error(kConfigInvalid).
  void validate() const;

  nlohmann::json to_json() const;
  // Fields absent from `j` keep their current values.
  void merge_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_weighted_f1 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;

  nlohmann::json to_json() const;
};

// Patience rule: stop once `patience` consecutive epochs fail to improve on
// the best (lowest) validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when `loss` is a new best.
  bool observe(int epoch, double loss);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
};

struct FeatureSpace {
  EncoderSpec spec;
  std::optional<IdfTable> idf;
  std::size_t num_classes = Taxonomy::kCanonicalSize;
  std::uint64_t taxonomy_fingerprint = 0;
};

struct TrainResult {
  LinearSoftmaxModel model;
  TrainHistory history;
  std::vector<std::size_t> fit_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
};

// Full procedure: held-out test split, validation carve-out, weighted
// sampling, dropout, warm-up, early stopping, best-checkpoint restore.
TrainResult train(std::span<const EncodedExample> examples, const TrainConfig& cfg, const FeatureSpace& space);

// The epoch loop on explicit fit/validation sets.
std::pair<LinearSoftmaxModel, TrainHistory> fit(std::span<const EncodedExample> fit_set,
                                                std::span<const EncodedExample> validation_set,
                                                const TrainConfig& cfg, const FeatureSpace& space);

struct Prediction {
  LabelId label = 0;
  std::vector<double> probabilities;
};

// argmax with ties broken toward the lowest id.
Prediction predict_features(const LinearSoftmaxModel& model, const FeatureVector& x);
Prediction predict(const LinearSoftmaxModel& model, std::string_view text);

struct BatchPrediction {
  std::string pref_id;
  LabelId label = 0;
  double probability = 0.0;
};

// When `embeddings` is given, features come from it instead of the text.
std::vector<BatchPrediction> predict_batch(const LinearSoftmaxModel& model, const Corpus& c,
                                           const std::map<std::string, FeatureVector>* embeddings = nullptr);

}  // namespace hvaudit
