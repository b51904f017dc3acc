#include "hvaudit/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"

namespace hvaudit {

using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_exists(const std::filesystem::path& p, std::string_view what) {
  if (!std::filesystem::exists(p))
    throw Error(ErrorCode::kMissingInput, fmt::format("{} not found: {}", what, p.string()));
}

}  // namespace

RunManifest::RunManifest(std::string command, std::uint64_t seed)
    : command_(std::move(command)), seed_(seed), started_at_(utc_now()) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", io::sha256_file(path)}});
}

void RunManifest::finish(bool complete, const std::string& error) {
  finished_at_ = utc_now();
  status_ = complete ? "complete" : "incomplete";
  error_ = error;
}

json RunManifest::to_json() const {
  json j = {{"command", command_},
            {"tool_version", kToolVersion},
            {"seed", seed_},
            {"config", config_},
            {"inputs", inputs_},
            {"outputs", outputs_},
            {"status", status_},
            {"started_at", started_at_},
            {"finished_at", finished_at_}};
  if (!error_.empty()) j["error"] = error_;
  return j;
}

void RunManifest::write(const std::filesystem::path& path) const { io::write_file(path, to_json().dump(2) + "\n"); }

LabeledTexts join_labels(const std::vector<LabeledExample>& labels, const Corpus& corpus) {
  std::map<std::string_view, const std::string*> text_of;
  for (const auto& p : corpus.items) text_of[p.pref_id] = &p.text;
  LabeledTexts out;
  for (const auto& l : labels) {
    auto it = text_of.find(l.pref_id);
    if (it == text_of.end())
      throw Error(ErrorCode::kMalformedRecord, "labeled preference '" + l.pref_id + "' is not in the corpus");
    out.labels.push_back(l);
    out.texts.push_back(*it->second);
  }
  return out;
}

json metrics_json(const MetricsReport& m, const ConfusionMatrix& cm, const Taxonomy& taxonomy) {
  json j = m.to_json(&taxonomy);
  j["confusion"] = cm.to_json();
  return j;
}

TrainOutputs train_on_labels(const LabeledTexts& data, const Taxonomy& taxonomy, const TrainConfig& cfg,
                             EncoderSpec spec, const std::optional<std::filesystem::path>& out_dir,
                             const std::map<std::string, FeatureVector>* embeddings) {
  cfg.validate();
  spec.max_sequence_length = cfg.max_sequence_length;
  if (embeddings != nullptr) {
    if (embeddings->empty()) throw Error(ErrorCode::kEmptyInput, "no embeddings supplied");
    spec.kind = EncoderKind::kExternalEmbedding;
    spec.dimension = embeddings->begin()->second.dimension;
    spec.use_idf = false;
  }
  spec.validate();
  FeatureSpace space;
  space.num_classes = taxonomy.size();
  space.taxonomy_fingerprint = taxonomy.fingerprint();
  if (spec.kind == EncoderKind::kHashedNgram && spec.use_idf) space.idf = fit_idf(data.texts, spec);
  space.spec = spec;

  std::vector<EncodedExample> encoded;
  encoded.reserve(data.texts.size());
  for (std::size_t i = 0; i < data.texts.size(); ++i) {
    if (embeddings != nullptr) {
      auto it = embeddings->find(data.labels[i].pref_id);
      if (it == embeddings->end())
        throw Error(ErrorCode::kMissingEmbedding, "missing embedding for " + data.labels[i].pref_id);
      encoded.push_back({it->second, data.labels[i].label});
    } else {
      encoded.push_back({encode(data.texts[i], spec, space.idf ? &*space.idf : nullptr), data.labels[i].label});
    }
  }

  TrainOutputs out;
  out.result = train(encoded, cfg, space);
  std::vector<LabelId> golds, preds;
  for (std::size_t i : out.result.test_indices) {
    golds.push_back(encoded[i].label);
    preds.push_back(predict_features(out.result.model, encoded[i].features).label);
    out.test_split.push_back(data.labels[i]);
  }
  if (golds.empty()) throw Error(ErrorCode::kEmptyInput, "held-out test split is empty");
  out.test_confusion = confusion(golds, preds, taxonomy.size());
  out.test_metrics = metrics(out.test_confusion);

  if (out_dir) {
    out.result.model.save(*out_dir / "model.bin");
    io::write_file(*out_dir / "history.json", out.result.history.to_json().dump(2) + "\n");
    io::write_file(*out_dir / "metrics.json",
                   metrics_json(out.test_metrics, out.test_confusion, taxonomy).dump(2) + "\n");
    write_labels(*out_dir / "test_split.jsonl", out.test_split, taxonomy);
  }
  return out;
}

EvaluationOutputs evaluate_model(const LinearSoftmaxModel& model, const LabeledTexts& data,
                                 const std::map<std::string, FeatureVector>* embeddings) {
  std::vector<LabelId> golds, preds;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    golds.push_back(data.labels[i].label);
    if (embeddings != nullptr) {
      auto it = embeddings->find(data.labels[i].pref_id);
      if (it == embeddings->end())
        throw Error(ErrorCode::kMissingEmbedding, "missing embedding for " + data.labels[i].pref_id);
      preds.push_back(predict_features(model, it->second).label);
    } else {
      preds.push_back(predict(model, data.texts[i]).label);
    }
  }
  EvaluationOutputs out;
  out.confusion = confusion(golds, preds, model.num_classes());
  out.metrics = metrics(out.confusion);
  return out;
}

PipelineConfig PipelineConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  PipelineConfig c;
  try {
    c.labels = resolve(j.at("labels").get<std::string>());
    c.label_corpus = resolve(j.at("label_corpus").get<std::string>());
    for (const auto& e : j.at("corpora")) c.corpora.push_back({e.at("id").get<std::string>(), resolve(e.at("path").get<std::string>())});
    for (const auto& e : j.at("datasets")) {
      Dataset d{e.at("id").get<std::string>(), e.at("corpus").get<std::string>(), {}};
      if (e.contains("role")) d.filter.role = role_from_string(e["role"].get<std::string>());
      if (e.contains("source")) d.filter.source = source_from_string(e["source"].get<std::string>());
      c.datasets.push_back(std::move(d));
    }
    c.out_dir = resolve(j.value("out_dir", std::string{"report"}));
    if (j.contains("taxonomy")) c.taxonomy = resolve(j["taxonomy"].get<std::string>());
    if (j.contains("train")) c.train.merge_json(j["train"]);
    if (j.contains("seed")) c.train.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("encoder")) c.encoder = EncoderSpec::from_json(j["encoder"]);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("invalid pipeline config: ") + e.what());
  }
  return c;
}

json PipelineConfig::to_json() const {
  json corpora_json = json::array();
  for (const auto& c : corpora) corpora_json.push_back({{"id", c.id}, {"path", c.path.string()}});
  json datasets_json = json::array();
  for (const auto& d : datasets) {
    json dj = {{"id", d.id}, {"corpus", d.corpus}};
    if (d.filter.role) dj["role"] = to_string(*d.filter.role);
    if (d.filter.source) dj["source"] = to_string(*d.filter.source);
    datasets_json.push_back(dj);
  }
  json j = {{"labels", labels.string()},
            {"label_corpus", label_corpus.string()},
            {"corpora", corpora_json},
            {"datasets", datasets_json},
            {"out_dir", out_dir.string()},
            {"train", train.to_json()},
            {"encoder", encoder.to_json()}};
  if (taxonomy) j["taxonomy"] = taxonomy->string();
  return j;
}

std::vector<std::filesystem::path> run_pipeline(const PipelineConfig& cfg) {
  RunManifest manifest("pipeline", cfg.train.seed);
  manifest.set_config(cfg.to_json());
  const auto manifest_path = cfg.out_dir / "manifest.json";
  std::vector<std::filesystem::path> written;
  std::string stage = "inputs";
  try {
    require_exists(cfg.labels, "labels file");
    require_exists(cfg.label_corpus, "label corpus");
    if (cfg.taxonomy) require_exists(*cfg.taxonomy, "taxonomy file");
    std::map<std::string, std::filesystem::path> corpus_paths;
    for (const auto& c : cfg.corpora) {
      require_exists(c.path, "corpus '" + c.id + "'");
      corpus_paths[c.id] = c.path;
    }
    for (const auto& d : cfg.datasets)
      if (!corpus_paths.contains(d.corpus))
        throw Error(ErrorCode::kConfigInvalid, "dataset '" + d.id + "' names unknown corpus '" + d.corpus + "'");

    const Taxonomy taxonomy = cfg.taxonomy ? Taxonomy::load(*cfg.taxonomy) : canonical_taxonomy();
    if (auto v = validate_taxonomy(taxonomy, taxonomy.size()); !v.ok())
      throw Error(ErrorCode::kConfigInvalid, "invalid taxonomy: " + v.violations.front());
    manifest.add_input(cfg.labels);
    manifest.add_input(cfg.label_corpus);
    for (const auto& c : cfg.corpora) manifest.add_input(c.path);

    stage = "train";
    const auto data = join_labels(read_labels(cfg.labels, taxonomy), read_corpus(cfg.label_corpus));
    const auto model_dir = cfg.out_dir / "model";
    const auto trained = train_on_labels(data, taxonomy, cfg.train, cfg.encoder, model_dir);
    for (const char* f : {"model.bin", "history.json", "metrics.json", "test_split.jsonl"})
      written.push_back(model_dir / f);
    spdlog::info("held-out accuracy {:.4f}, weighted F1 {:.4f}", trained.test_metrics.accuracy,
                 trained.test_metrics.weighted_f1);

    stage = "classify";
    std::map<std::string, ClassifiedCorpus> classified;
    for (const auto& c : cfg.corpora) {
      classified[c.id] = classify_corpus(trained.result.model, read_corpus(c.path), taxonomy);
      const auto p = cfg.out_dir / "classified" / (c.id + ".jsonl");
      write_classified(p, classified[c.id]);
      written.push_back(p);
    }

    stage = "audit";
    std::vector<DistributionReport> reports;
    for (const auto& d : cfg.datasets) reports.push_back(distribution(classified.at(d.corpus), taxonomy, d.id, d.filter));
    const auto matrix = compare(reports);
    for (auto& p : emit_report(matrix, reports, cfg.out_dir)) written.push_back(p);
  } catch (const Error& e) {
    manifest.finish(false, fmt::format("{} stage: {}", stage, e.what()));
    for (const auto& p : written) manifest.add_output(p);
    manifest.write(manifest_path);
    throw;
  }
  for (const auto& p : written) manifest.add_output(p);
  manifest.finish(true);
  manifest.write(manifest_path);
  written.push_back(manifest_path);
  return written;
}

}  // namespace hvaudit
