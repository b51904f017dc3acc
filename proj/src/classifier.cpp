#include "hvaudit/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hvaudit/error.hpp"
#include "hvaudit/evaluation.hpp"
#include "hvaudit/io.hpp"
#include "hvaudit/random.hpp"

namespace hvaudit {

ClassWeights class_weights(std::span<const LabelId> labels, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (LabelId y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw Error(ErrorCode::kUnknownLabel, fmt::format("label {} outside {} classes", y, num_classes));
    ++counts[static_cast<std::size_t>(y)];
  }
  std::vector<std::size_t> missing;
  for (std::size_t j = 0; j < num_classes; ++j)
    if (counts[j] == 0) missing.push_back(j);
  if (!missing.empty())
    throw Error(ErrorCode::kMissingClass, fmt::format("classes with no examples: {{{}}}", fmt::join(missing, ", ")));
  ClassWeights w;
  const double m = static_cast<double>(labels.size());
  for (std::size_t j = 0; j < num_classes; ++j)
    w.values.push_back(m / (static_cast<double>(num_classes) * static_cast<double>(counts[j])));
  return w;
}

double log_sum_exp(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  return top + std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) p[j] = std::exp(logits[j] - lse);
  return p;
}

double weighted_cross_entropy(std::span<const double> logits, LabelId gold, const ClassWeights& w) {
  return w[gold] * (log_sum_exp(logits) - logits[static_cast<std::size_t>(gold)]);
}

LinearSoftmaxModel::LinearSoftmaxModel(std::size_t num_classes, std::uint32_t dimension)
    : n_(num_classes), d_(dimension), weights_(num_classes * dimension, 0.0), biases_(num_classes, 0.0) {}

std::vector<double> LinearSoftmaxModel::logits(const FeatureVector& x) const {
  if (x.dimension != d_)
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("feature dimension {} does not match model dimension {}", x.dimension, d_));
  std::vector<double> z(biases_);
  for (std::size_t c = 0; c < n_; ++c) {
    const double* row = weights_.data() + c * d_;
    for (const auto& e : x.entries) z[c] += row[e.index] * e.weight;
  }
  return z;
}

// Artifact layout (all integers and reals little-endian):
//   [0, 8)   magic "HVAMODEL"
//   u32      format version
//   u32      header length H
//   H bytes  UTF-8 JSON header {format_version, taxonomy_fingerprint, n, d,
//            encoder_spec, idf: {present, document_count, entries}}
//   f64[n]   biases
//   f64[n*d] weights, class-major
//   if idf present: u64 document count, u32 entry count E, then E pairs of
//            (u32 feature index, u32 document frequency) for nonzero df
namespace {

constexpr char kMagic[8] = {'H', 'V', 'A', 'M', 'O', 'D', 'E', 'L'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::kMalformedRecord, "model artifact is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t uint(int width) {
    const auto s = take(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string LinearSoftmaxModel::serialize() const {
  std::uint32_t idf_entries = 0;
  if (idf)
    for (auto df : idf->document_frequency()) idf_entries += df > 0 ? 1 : 0;
  nlohmann::json header = {
      {"format_version", kFormatVersion},
      {"taxonomy_fingerprint", io::hex64(taxonomy_fingerprint)},
      {"n", n_},
      {"d", d_},
      {"encoder_spec", encoder_spec.to_json()},
      {"idf", {{"present", idf.has_value()},
               {"document_count", idf ? idf->document_count() : 0},
               {"entries", idf_entries}}}};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  out.reserve(out.size() + 8 + h.size() + 8 * (n_ + weights_.size()) + 8 * idf_entries + 16);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  for (double b : biases_) put_f64(out, b);
  for (double w : weights_) put_f64(out, w);
  if (idf) {
    put_u64(out, idf->document_count());
    put_u32(out, idf_entries);
    const auto& df = idf->document_frequency();
    for (std::uint32_t i = 0; i < df.size(); ++i)
      if (df[i] > 0) {
        put_u32(out, i);
        put_u32(out, df[i]);
      }
  }
  return out;
}

LinearSoftmaxModel LinearSoftmaxModel::deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(8).data(), kMagic, 8) != 0)
    throw Error(ErrorCode::kMalformedRecord, "not a model artifact (bad magic)");
  const auto version = r.uint(4);
  if (version != kFormatVersion)
    throw Error(ErrorCode::kMalformedRecord, fmt::format("unsupported model format version {}", version));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.take(static_cast<std::size_t>(r.uint(4))));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("bad model header: ") + e.what());
  }
  LinearSoftmaxModel m(header.at("n").get<std::size_t>(), header.at("d").get<std::uint32_t>());
  m.encoder_spec = EncoderSpec::from_json(header.at("encoder_spec"));
  m.taxonomy_fingerprint = std::stoull(header.at("taxonomy_fingerprint").get<std::string>(), nullptr, 16);
  for (double& b : m.biases_) b = r.f64();
  for (double& w : m.weights_) w = r.f64();
  if (header.at("idf").at("present").get<bool>()) {
    const auto docs = static_cast<std::size_t>(r.uint(8));
    const auto entries = r.uint(4);
    std::vector<std::uint32_t> df(m.encoder_spec.dimension, 0);
    for (std::uint64_t i = 0; i < entries; ++i) {
      const auto index = r.uint(4);
      const auto count = static_cast<std::uint32_t>(r.uint(4));
      if (index >= df.size()) throw Error(ErrorCode::kMalformedRecord, "idf index out of range");
      df[index] = count;
    }
    m.idf = IdfTable(docs, std::move(df));
  }
  if (!r.done()) throw Error(ErrorCode::kMalformedRecord, "trailing bytes after model artifact");
  return m;
}

void LinearSoftmaxModel::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

LinearSoftmaxModel LinearSoftmaxModel::load(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

namespace {

// Per-example, per-class coefficients dL/dz of the mean weighted loss:
// coef[b * n + c] = w_y (p_c - [c == y]) / B. Returns the mean loss.
double batch_coefficients(const LinearSoftmaxModel& model, std::span<const EncodedExample> batch,
                          const ClassWeights& w, std::vector<double>& coef) {
  const std::size_t n = model.num_classes();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  coef.assign(batch.size() * n, 0.0);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto z = model.logits(batch[b].features);
    const double lse = log_sum_exp(z);
    const auto y = static_cast<std::size_t>(batch[b].label);
    const double wy = w[batch[b].label];
    loss += wy * (lse - z[y]);
    for (std::size_t c = 0; c < n; ++c)
      coef[b * n + c] = wy * (std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0)) * inv_b;
  }
  return loss * inv_b;
}

}  // namespace

double batch_loss(const LinearSoftmaxModel& model, std::span<const EncodedExample> batch, const ClassWeights& w) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  double loss = 0.0;
  for (const auto& ex : batch) loss += weighted_cross_entropy(model.logits(ex.features), ex.label, w);
  return loss / static_cast<double>(batch.size());
}

Gradient loss_gradient(const LinearSoftmaxModel& model, std::span<const EncodedExample> batch,
                       const ClassWeights& w, double weight_decay) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "empty batch");
  const std::size_t n = model.num_classes();
  const std::uint32_t d = model.dimension();
  std::vector<double> coef;
  batch_coefficients(model, batch, w, coef);
  Gradient g;
  g.weights.assign(n * d, 0.0);
  g.biases.assign(n, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t c = 0; c < n; ++c) {
      const double k = coef[b * n + c];
      g.biases[c] += k;
      for (const auto& e : batch[b].features.entries) g.weights[c * d + e.index] += k * e.weight;
    }
  if (weight_decay != 0.0)
    for (std::size_t i = 0; i < g.weights.size(); ++i) g.weights[i] += weight_decay * model.weights()[i];
  return g;
}

void TrainConfig::validate() const {
  const auto bad = [](const std::string& msg) { throw Error(ErrorCode::kConfigInvalid, msg); };
  if (epochs < 1) bad("epochs must be >= 1");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (max_sequence_length < 1) bad("max_sequence_length must be >= 1");
  if (early_stopping_patience < 1) bad("early_stopping_patience must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) bad("validation_fraction must lie in (0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) bad("weight_decay must be >= 0");
  if (!(input_dropout >= 0.0 && input_dropout < 1.0)) bad("input_dropout must lie in [0, 1)");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) bad("split_ratio must lie in (0, 1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"max_sequence_length", max_sequence_length},
          {"early_stopping_patience", early_stopping_patience},
          {"validation_fraction", validation_fraction},
          {"learning_rate", learning_rate},
          {"warmup_steps", warmup_steps},
          {"weight_decay", weight_decay},
          {"input_dropout", input_dropout},
          {"seed", seed},
          {"split_ratio", split_ratio}};
}

void TrainConfig::merge_json(const nlohmann::json& j) {
  try {
    epochs = j.value("epochs", epochs);
    batch_size = j.value("batch_size", batch_size);
    max_sequence_length = j.value("max_sequence_length", max_sequence_length);
    early_stopping_patience = j.value("early_stopping_patience", early_stopping_patience);
    validation_fraction = j.value("validation_fraction", validation_fraction);
    learning_rate = j.value("learning_rate", learning_rate);
    warmup_steps = j.value("warmup_steps", warmup_steps);
    weight_decay = j.value("weight_decay", weight_decay);
    input_dropout = j.value("input_dropout", input_dropout);
    seed = j.value("seed", seed);
    split_ratio = j.value("split_ratio", split_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("invalid train config: ") + e.what());
  }
}

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs)
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"validation_loss", e.validation_loss},
                    {"validation_weighted_f1", e.validation_weighted_f1}});
  return {{"epochs", rows}, {"best_epoch", best_epoch}, {"stopped_early", stopped_early}};
}

bool EarlyStopping::observe(int epoch, double loss) {
  if (best_epoch_ == 0 || loss < best_loss_) {
    best_epoch_ = epoch;
    best_loss_ = loss;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

namespace {

void check_examples(std::span<const EncodedExample> examples, const FeatureSpace& space) {
  for (const auto& ex : examples) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= space.num_classes)
      throw Error(ErrorCode::kUnknownLabel, fmt::format("label {} outside {} classes", ex.label, space.num_classes));
    if (ex.features.dimension != space.spec.dimension)
      throw Error(ErrorCode::kDimensionMismatch,
                  fmt::format("example dimension {} does not match encoder dimension {}", ex.features.dimension,
                              space.spec.dimension));
  }
}

// Inverted dropout: keep each feature with probability 1 - rate, rescaled.
FeatureVector drop_features(const FeatureVector& x, double rate, Rng& rng) {
  FeatureVector out;
  out.dimension = x.dimension;
  const double scale = 1.0 / (1.0 - rate);
  for (const auto& e : x.entries)
    if (rng.unit() >= rate) out.entries.push_back({e.index, e.weight * scale});
  return out;
}

double weighted_f1_of(const LinearSoftmaxModel& model, std::span<const EncodedExample> set) {
  std::vector<LabelId> golds, preds;
  for (const auto& ex : set) {
    golds.push_back(ex.label);
    preds.push_back(predict_features(model, ex.features).label);
  }
  return metrics(confusion(golds, preds, model.num_classes())).weighted_f1;
}

}  // namespace

std::pair<LinearSoftmaxModel, TrainHistory> fit(std::span<const EncodedExample> fit_set,
                                                std::span<const EncodedExample> validation_set,
                                                const TrainConfig& cfg, const FeatureSpace& space) {
  cfg.validate();
  space.spec.validate();
  if (fit_set.empty() || validation_set.empty())
    throw Error(ErrorCode::kEmptyInput, "training and validation sets must be non-empty");
  check_examples(fit_set, space);
  check_examples(validation_set, space);

  std::vector<LabelId> labels;
  for (const auto& ex : fit_set) labels.push_back(ex.label);
  const ClassWeights w = class_weights(labels, space.num_classes);

  LinearSoftmaxModel model(space.num_classes, space.spec.dimension);
  model.encoder_spec = space.spec;
  model.idf = space.idf;
  model.taxonomy_fingerprint = space.taxonomy_fingerprint;

  // Sampling distribution over fit examples, proportional to class weight.
  std::vector<double> cumulative(fit_set.size());
  double total = 0.0;
  for (std::size_t i = 0; i < fit_set.size(); ++i) cumulative[i] = total += w[fit_set[i].label];

  Rng rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  const bool dropout = cfg.input_dropout > 0.0 && space.spec.dropout_eligible;
  const std::size_t n = model.num_classes();
  const std::uint32_t d = model.dimension();

  TrainHistory history;
  EarlyStopping stopper(cfg.early_stopping_patience);
  LinearSoftmaxModel best = model;
  std::size_t step = 0;
  std::vector<double> coef;
  std::vector<EncodedExample> batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> draws(fit_set.size());
    for (auto& idx : draws) {
      const double u = rng.unit() * total;
      idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      idx = std::min(idx, fit_set.size() - 1);
    }

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < draws.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(draws.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = fit_set[draws[i]];
        batch.push_back({dropout ? drop_features(ex.features, cfg.input_dropout, rng) : ex.features, ex.label});
      }
      const double lr = cfg.warmup_steps == 0
                            ? cfg.learning_rate
                            : cfg.learning_rate * std::min(1.0, static_cast<double>(step + 1) /
                                                                    static_cast<double>(cfg.warmup_steps));
      epoch_loss += batch_coefficients(model, batch, w, coef);
      ++batches;

      // W <- W - lr (grad + decay W), expressed as a decay scale followed by
      // the sparse data step.
      if (cfg.weight_decay != 0.0) {
        const double shrink = 1.0 - lr * cfg.weight_decay;
        for (double& x : model.weights()) x *= shrink;
      }
      for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t c = 0; c < n; ++c) {
          const double k = lr * coef[b * n + c];
          model.biases()[c] -= k;
          double* row = model.weights().data() + c * d;
          for (const auto& e : batch[b].features.entries) row[e.index] -= k * e.weight;
        }
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(batches);
    rec.validation_loss = batch_loss(model, validation_set, w);
    rec.validation_weighted_f1 = weighted_f1_of(model, validation_set);
    history.epochs.push_back(rec);
    spdlog::debug("epoch {}: train_loss={:.6f} val_loss={:.6f} val_f1={:.4f}", epoch, rec.train_loss,
                  rec.validation_loss, rec.validation_weighted_f1);

    if (stopper.observe(epoch, rec.validation_loss)) best = model;
    if (stopper.should_stop()) {
      history.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  return {std::move(best), std::move(history)};
}

TrainResult train(std::span<const EncodedExample> examples, const TrainConfig& cfg, const FeatureSpace& space) {
  cfg.validate();
  if (examples.empty()) throw Error(ErrorCode::kEmptyInput, "no training examples");
  check_examples(examples, space);
  {
    std::vector<LabelId> all;
    for (const auto& ex : examples) all.push_back(ex.label);
    class_weights(all, space.num_classes);  // coverage check
  }

  TrainResult result;
  auto [train_idx, test_idx] = split_indices(examples.size(), cfg.split_ratio, cfg.seed);
  auto n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(train_idx.size())));
  n_val = std::max<std::size_t>(n_val, 1);
  if (n_val >= train_idx.size())
    throw Error(ErrorCode::kConfigInvalid,
                fmt::format("{} training examples are too few to carve a validation set", train_idx.size()));
  result.fit_indices.assign(train_idx.begin(), train_idx.end() - static_cast<std::ptrdiff_t>(n_val));
  result.validation_indices.assign(train_idx.end() - static_cast<std::ptrdiff_t>(n_val), train_idx.end());
  result.test_indices = std::move(test_idx);

  std::vector<EncodedExample> fit_set, validation_set;
  for (std::size_t i : result.fit_indices) fit_set.push_back(examples[i]);
  for (std::size_t i : result.validation_indices) validation_set.push_back(examples[i]);
  auto [model, history] = fit(fit_set, validation_set, cfg, space);
  result.model = std::move(model);
  result.history = std::move(history);
  return result;
}

Prediction predict_features(const LinearSoftmaxModel& model, const FeatureVector& x) {
  Prediction p;
  p.probabilities = softmax(model.logits(x));
  // max_element returns the first maximum, i.e. the lowest id on ties.
  p.label = static_cast<LabelId>(std::max_element(p.probabilities.begin(), p.probabilities.end()) -
                                 p.probabilities.begin());
  return p;
}

Prediction predict(const LinearSoftmaxModel& model, std::string_view text) {
  if (model.encoder_spec.kind != EncoderKind::kHashedNgram)
    throw Error(ErrorCode::kConfigInvalid, "model was trained on external embeddings; text input is not supported");
  return predict_features(model, encode(text, model.encoder_spec, model.idf ? &*model.idf : nullptr));
}

std::vector<BatchPrediction> predict_batch(const LinearSoftmaxModel& model, const Corpus& c,
                                           const std::map<std::string, FeatureVector>* embeddings) {
  std::vector<BatchPrediction> out;
  out.reserve(c.size());
  for (const auto& item : c.items) {
    Prediction p;
    if (embeddings != nullptr) {
      auto it = embeddings->find(item.pref_id);
      if (it == embeddings->end())
        throw Error(ErrorCode::kMissingEmbedding, "missing embedding for " + item.pref_id);
      p = predict_features(model, it->second);
    } else {
      p = predict(model, item.text);
    }
    out.push_back({item.pref_id, p.label, p.probabilities[static_cast<std::size_t>(p.label)]});
  }
  return out;
}

}  // namespace hvaudit
