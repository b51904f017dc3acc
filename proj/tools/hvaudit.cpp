// hvaudit: command-line driver for ingestion, annotation, training and audit.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hvaudit/agreement.hpp"
#include "hvaudit/annotation.hpp"
#include "hvaudit/annotation_server.hpp"
#include "hvaudit/audit.hpp"
#include "hvaudit/classifier.hpp"
#include "hvaudit/corpus.hpp"
#include "hvaudit/encoder.hpp"
#include "hvaudit/error.hpp"
#include "hvaudit/evaluation.hpp"
#include "hvaudit/io.hpp"
#include "hvaudit/pipeline.hpp"
#include "hvaudit/taxonomy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hvaudit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

std::optional<fs::path> env_out_dir() {
  const char* v = std::getenv("HVAUDIT_OUT_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return fs::path(v);
}

// Relative outputs land under $HVAUDIT_OUT_DIR when it is set.
fs::path resolve_out(const fs::path& p) {
  if (auto base = env_out_dir(); base && p.is_relative()) return *base / p;
  return p;
}

fs::path out_dir_or_env(const std::string& flag) {
  if (!flag.empty()) return resolve_out(flag);
  if (auto base = env_out_dir()) return *base;
  throw CLI::RequiredError("--out (or HVAUDIT_OUT_DIR)");
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void require_input(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::kMissingInput, "input not found: " + p.string());
}

Taxonomy load_taxonomy(const std::string& path) {
  if (path.empty()) return canonical_taxonomy();
  require_input(path);
  Taxonomy t = Taxonomy::load(path);
  if (auto v = validate_taxonomy(t, t.size()); !v.ok())
    throw Error(ErrorCode::kConfigInvalid, "invalid taxonomy: " + v.violations.front());
  return t;
}

struct Common {
  std::uint64_t seed = 0;
};

void add_seed(CLI::App* app, Common& c) { app->add_option("--seed", c.seed, "random seed"); }

// ---- ingest / convert / sample ----

struct IngestArgs {
  Common common;
  std::string source;
  std::string in, train, test, out, skips;
  std::string separator = "\n";
};

void run_ingest(const IngestArgs& a) {
  IngestOptions opts{a.separator};
  RunManifest m("ingest", a.common.seed);
  IngestResult r;
  if (a.source == "hh-rlhf") {
    if (a.train.empty() || a.test.empty()) throw CLI::ValidationError("--source hh-rlhf needs --train and --test");
    require_input(a.train);
    require_input(a.test);
    r = ingest_hh_rlhf(a.train, a.test, opts);
    m.add_input(a.train);
    m.add_input(a.test);
  } else {
    if (a.in.empty()) throw CLI::ValidationError("--in is required for --source " + a.source);
    require_input(a.in);
    r = a.source == "webgpt" ? ingest_webgpt(a.in, opts) : ingest_alpaca(a.in, opts);
    m.add_input(a.in);
  }
  const fs::path out = resolve_out(a.out);
  write_corpus(out, r.corpus);
  const fs::path skips = a.skips.empty() ? fs::path(out.string() + ".skips.tsv") : resolve_out(a.skips);
  write_skip_report(skips, r.skips);
  m.set_config({{"source", a.source}, {"separator", a.separator}});
  m.add_output(out);
  m.add_output(skips);
  m.finish(true);
  m.write(sidecar(out));
  spdlog::info("{} preferences written, {} skipped", r.corpus.size(), r.skips.size());
}

// ---- train / evaluate ----

struct TrainArgs {
  Common common;
  bool seed_given = false;
  std::string config, labels, corpus, out, taxonomy, embeddings;
  std::optional<int> epochs, patience;
  std::optional<std::size_t> batch_size, max_len, warmup;
  std::optional<double> lr, weight_decay, dropout, split_ratio, validation_fraction;
  std::optional<std::uint32_t> dimension;
};

void run_train(TrainArgs a) {
  TrainConfig cfg;
  EncoderSpec spec;
  if (!a.config.empty()) {
    require_input(a.config);
    json j;
    try {
      j = json::parse(io::read_file(a.config));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kConfigInvalid, std::string("config is not valid JSON: ") + e.what());
    }
    cfg.merge_json(j);
    if (j.contains("encoder")) spec = EncoderSpec::from_json(j["encoder"]);
    const fs::path base = fs::path(a.config).parent_path();
    auto path_from = [&](const char* key, std::string& dst) {
      if (dst.empty() && j.contains(key)) {
        fs::path p = j[key].get<std::string>();
        dst = (p.is_relative() ? base / p : p).string();
      }
    };
    path_from("labels", a.labels);
    path_from("corpus", a.corpus);
    path_from("taxonomy", a.taxonomy);
    path_from("embeddings", a.embeddings);
    if (a.out.empty() && j.contains("out")) a.out = j["out"].get<std::string>();
  }
  if (a.seed_given) cfg.seed = a.common.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.patience) cfg.early_stopping_patience = *a.patience;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.max_len) cfg.max_sequence_length = *a.max_len;
  if (a.warmup) cfg.warmup_steps = *a.warmup;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.weight_decay) cfg.weight_decay = *a.weight_decay;
  if (a.dropout) cfg.input_dropout = *a.dropout;
  if (a.split_ratio) cfg.split_ratio = *a.split_ratio;
  if (a.validation_fraction) cfg.validation_fraction = *a.validation_fraction;
  if (a.dimension) spec.dimension = *a.dimension;
  if (a.labels.empty() || a.corpus.empty()) throw CLI::RequiredError("--labels and --corpus");
  require_input(a.labels);
  require_input(a.corpus);

  const Taxonomy taxonomy = load_taxonomy(a.taxonomy);
  const fs::path out = out_dir_or_env(a.out);
  RunManifest m("train", cfg.seed);
  m.add_input(a.labels);
  m.add_input(a.corpus);

  const Corpus corpus = read_corpus(a.corpus);
  const auto data = join_labels(read_labels(a.labels, taxonomy), corpus);
  std::optional<std::map<std::string, FeatureVector>> emb;
  if (!a.embeddings.empty()) {
    require_input(a.embeddings);
    emb = load_external_embeddings(a.embeddings, corpus);
    m.add_input(a.embeddings);
  }
  const auto t = train_on_labels(data, taxonomy, cfg, spec, out, emb ? &*emb : nullptr);
  json config = cfg.to_json();
  config["encoder"] = t.result.model.encoder_spec.to_json();
  m.set_config(config);
  for (const char* f : {"model.bin", "history.json", "metrics.json", "test_split.jsonl"}) m.add_output(out / f);
  m.finish(true);
  m.write(out / "manifest.json");
  fmt::print("epochs run: {}  best epoch: {}\nheld-out accuracy: {:.4f}  weighted F1: {:.4f}\n",
             t.result.history.epochs.size(), t.result.history.best_epoch, t.test_metrics.accuracy,
             t.test_metrics.weighted_f1);
}

struct EvalArgs {
  Common common;
  std::string model, labels, corpus, embeddings, taxonomy, out;
};

void run_evaluate(const EvalArgs& a) {
  for (const auto& p : {a.model, a.labels, a.corpus}) require_input(p);
  const Taxonomy taxonomy = load_taxonomy(a.taxonomy);
  const auto model = LinearSoftmaxModel::load(a.model);
  if (model.taxonomy_fingerprint != taxonomy.fingerprint())
    throw Error(ErrorCode::kFingerprintMismatch, "model was trained against a different taxonomy");
  const Corpus corpus = read_corpus(a.corpus);
  const auto data = join_labels(read_labels(a.labels, taxonomy), corpus);
  std::optional<std::map<std::string, FeatureVector>> emb;
  if (!a.embeddings.empty()) {
    require_input(a.embeddings);
    emb = load_external_embeddings(a.embeddings, corpus);
  }
  const auto e = evaluate_model(model, data, emb ? &*emb : nullptr);
  const json report = metrics_json(e.metrics, e.confusion, taxonomy);
  if (!a.out.empty()) {
    const fs::path out = resolve_out(a.out);
    io::write_file(out, report.dump(2) + "\n");
    RunManifest m("evaluate", a.common.seed);
    for (const auto& p : {a.model, a.labels, a.corpus}) m.add_input(p);
    m.add_output(out);
    m.finish(true);
    m.write(sidecar(out));
  }
  fmt::print("accuracy: {:.4f}  weighted F1: {:.4f}  n={}\n", e.metrics.accuracy, e.metrics.weighted_f1,
             e.metrics.total);
  for (std::size_t c = 0; c < e.metrics.per_class.size(); ++c) {
    const auto& pc = e.metrics.per_class[c];
    fmt::print("  {:<32} P={:.4f} R={:.4f} F1={:.4f} support={}\n", taxonomy.at(static_cast<LabelId>(c)).name,
               pc.precision, pc.recall, pc.f1, pc.support);
  }
}

// ---- classify / audit / compare ----

struct ClassifyArgs {
  Common common;
  std::string model, corpus, embeddings, taxonomy, out;
};

void run_classify(const ClassifyArgs& a) {
  require_input(a.model);
  require_input(a.corpus);
  const Taxonomy taxonomy = load_taxonomy(a.taxonomy);
  const auto model = LinearSoftmaxModel::load(a.model);
  const Corpus corpus = read_corpus(a.corpus);
  std::optional<std::map<std::string, FeatureVector>> emb;
  if (!a.embeddings.empty()) {
    require_input(a.embeddings);
    emb = load_external_embeddings(a.embeddings, corpus);
  }
  const auto cc = classify_corpus(model, corpus, taxonomy, emb ? &*emb : nullptr);
  const fs::path out = resolve_out(a.out);
  write_classified(out, cc);
  RunManifest m("classify", a.common.seed);
  m.add_input(a.model);
  m.add_input(a.corpus);
  m.add_output(out);
  m.finish(true);
  m.write(sidecar(out));
  spdlog::info("{} preferences classified", cc.records.size());
}

struct AuditArgs {
  Common common;
  std::string classified, dataset_id, source, role, taxonomy, out;
};

void run_audit(const AuditArgs& a) {
  require_input(a.classified);
  const Taxonomy taxonomy = load_taxonomy(a.taxonomy);
  RecordFilter filter;
  if (!a.source.empty()) filter.source = source_from_string(a.source);
  if (!a.role.empty()) filter.role = role_from_string(a.role);
  const auto r = distribution(read_classified(a.classified), taxonomy,
                              a.dataset_id.empty() ? fs::path(a.classified).stem().string() : a.dataset_id, filter);
  const fs::path out = resolve_out(a.out);
  write_distribution(out, r);
  RunManifest m("audit", a.common.seed);
  m.set_config({{"dataset_id", r.dataset_id}, {"source", a.source}, {"role", a.role}});
  m.add_input(a.classified);
  m.add_output(out);
  m.finish(true);
  m.write(sidecar(out));
}

struct CompareArgs {
  Common common;
  std::vector<std::string> distributions;
  std::string out;
};

void run_compare(const CompareArgs& a) {
  std::vector<DistributionReport> reports;
  for (const auto& p : a.distributions) {
    require_input(p);
    reports.push_back(read_distribution(p));
  }
  const auto matrix = compare(reports);
  const fs::path out = out_dir_or_env(a.out);
  RunManifest m("compare", a.common.seed);
  for (const auto& p : a.distributions) m.add_input(p);
  for (const auto& p : emit_report(matrix, reports, out)) m.add_output(p);
  m.finish(true);
  m.write(out / "manifest.json");
  std::cout << render_comparison_tsv(matrix);
}

// ---- review ----

struct ReviewSampleArgs {
  Common common;
  std::string classified, corpus, taxonomy, out;
  std::size_t k = 100;
};

void run_review_sample(const ReviewSampleArgs& a) {
  require_input(a.classified);
  require_input(a.corpus);
  const Taxonomy taxonomy = load_taxonomy(a.taxonomy);
  const auto cc = read_classified(a.classified);
  std::map<std::string, std::string> texts;
  for (auto& p : read_corpus(a.corpus).items) texts.emplace(p.pref_id, std::move(p.text));
  std::vector<ClassifiedItem> items;
  for (const auto& r : cc.records) items.push_back({r.pref_id, r.label});
  const auto sheet = sample_for_human_review(items, texts, taxonomy, a.k, a.common.seed);
  const fs::path out = resolve_out(a.out);
  write_review_sheet(out, sheet);
  RunManifest m("review-sample", a.common.seed);
  m.set_config({{"k", a.k}});
  m.add_input(a.classified);
  m.add_input(a.corpus);
  m.add_output(out);
  m.finish(true);
  m.write(sidecar(out));
}

struct ReviewScoreArgs {
  Common common;
  std::string sheet, out;
};

void run_review_score(const ReviewScoreArgs& a) {
  require_input(a.sheet);
  const auto sheet = read_review_sheet(a.sheet);
  const double rate = score_human_review(sheet);
  if (!a.out.empty()) {
    const fs::path out = resolve_out(a.out);
    io::write_file(out, json{{"rows", sheet.rows.size()}, {"correct_rate", rate}}.dump(2) + "\n");
    RunManifest m("review-score", a.common.seed);
    m.add_input(a.sheet);
    m.add_output(out);
    m.finish(true);
    m.write(sidecar(out));
  }
  fmt::print("{:.4f}\n", rate);
}

// ---- annotation ----

struct AlphaArgs {
  Common common;
  std::string events, session, out;
};

void run_alpha(const AlphaArgs& a) {
  require_input(a.events);
  std::optional<AssignmentPlan> plan;
  if (!a.session.empty()) {
    require_input(a.session);
    plan = AssignmentPlan::load(a.session);
  }
  const auto r = matrix_from_events(read_event_log(a.events), plan ? &*plan : nullptr);
  json j = {{"units", r.units.size()}, {"annotators", r.annotators}};
  try {
    j["alpha"] = krippendorff_alpha_nominal(r);
    j["percent_agreement"] = percent_agreement(r);
    j["status"] = "ok";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInsufficientData && e.code() != ErrorCode::kDegenerateData) throw;
    j["alpha"] = nullptr;
    j["status"] = e.code() == ErrorCode::kInsufficientData ? "insufficient" : "degenerate";
  }
  j["disagreements"] = disagreement_queue(r);
  if (!a.out.empty()) {
    const fs::path out = resolve_out(a.out);
    io::write_file(out, j.dump(2) + "\n");
    RunManifest m("alpha", a.common.seed);
    m.add_input(a.events);
    m.add_output(out);
    m.finish(true);
    m.write(sidecar(out));
  }
  std::cout << j.dump(2) << "\n";
}

struct ServeArgs {
  Common common;
  std::string corpus, session, events, taxonomy, host = "127.0.0.1";
  std::vector<std::string> roster;
  std::size_t overlap = AssignmentPlan::kDefaultOverlap;
  int port = 8080;
};

void run_serve(const ServeArgs& a) {
  require_input(a.corpus);
  const Taxonomy taxonomy = load_taxonomy(a.taxonomy);
  Corpus corpus = read_corpus(a.corpus);
  AssignmentPlan plan;
  if (fs::exists(a.session)) {
    plan = AssignmentPlan::load(a.session);
  } else {
    if (a.roster.empty()) throw CLI::RequiredError("--roster (no session file yet)");
    plan = create_session(corpus, a.roster, a.overlap, a.common.seed);
    plan.save(a.session);
    spdlog::info("new session written to {}", a.session);
  }
  const fs::path events = a.events.empty() ? fs::path(a.session + ".events.jsonl") : fs::path(a.events);

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  AnnotationStore store(std::move(corpus), std::move(plan), taxonomy, events);
  AnnotationServer server(store);
  const int port = server.start(a.host, a.port);
  fmt::print("listening on {}:{}\n", a.host, port);
  std::fflush(stdout);
  int sig = 0;
  sigwait(&stop_signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  server.stop();
}

// ---- pipeline ----

struct PipelineArgs {
  Common common;
  bool seed_given = false;
  std::string config, out;
};

void run_pipeline_cmd(const PipelineArgs& a) {
  require_input(a.config);
  json j;
  try {
    j = json::parse(io::read_file(a.config));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  auto cfg = PipelineConfig::from_json(j, fs::path(a.config).parent_path());
  if (!a.out.empty()) cfg.out_dir = resolve_out(a.out);
  else if (auto base = env_out_dir()) cfg.out_dir = *base;
  if (a.seed_given) cfg.train.seed = a.common.seed;
  const auto written = run_pipeline(cfg);
  fmt::print("{} files written under {}\n", written.size(), cfg.out_dir.string());
}

int exit_code_for(ErrorCode code) { return code == ErrorCode::kIo ? kExitIo : kExitData; }

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("HVAUDIT_LOG_LEVEL"); lvl != nullptr && *lvl != '\0')
    spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("hvaudit"));
  configure_logging();

  CLI::App app{"hvaudit: human-value audit of RLHF preference datasets"};
  app.require_subcommand(1);
  std::function<void()> action;

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "normalize a source dataset into a corpus file");
  add_seed(c_ingest, ingest.common);
  c_ingest->add_option("--source", ingest.source)->required()->check(CLI::IsMember({"hh-rlhf", "webgpt", "alpaca"}));
  c_ingest->add_option("--in", ingest.in, "input file (webgpt, alpaca)");
  c_ingest->add_option("--train", ingest.train, "hh-rlhf train split");
  c_ingest->add_option("--test", ingest.test, "hh-rlhf test split");
  c_ingest->add_option("--out", ingest.out)->required();
  c_ingest->add_option("--skips", ingest.skips, "skip report path (default <out>.skips.tsv)");
  c_ingest->add_option("--separator", ingest.separator, "prompt/response separator");
  c_ingest->callback([&] { action = [&] { run_ingest(ingest); }; });

  Common convert_common;
  std::string convert_in, convert_out;
  auto* c_convert = app.add_subcommand("convert", "rewrite a columnar or array JSON export as JSONL");
  add_seed(c_convert, convert_common);
  c_convert->add_option("--in", convert_in)->required();
  c_convert->add_option("--out", convert_out)->required();
  c_convert->callback([&] {
    action = [&] {
      require_input(convert_in);
      const fs::path out = resolve_out(convert_out);
      const auto rows = convert_columns_to_jsonl(convert_in, out);
      RunManifest m("convert", convert_common.seed);
      m.add_input(convert_in);
      m.add_output(out);
      m.finish(true);
      m.write(sidecar(out));
      spdlog::info("{} rows written", rows);
    };
  });

  Common sample_common;
  std::string sample_in, sample_out;
  std::size_t sample_k = 0;
  auto* c_sample = app.add_subcommand("sample", "uniform sample of a corpus");
  add_seed(c_sample, sample_common);
  c_sample->add_option("--in", sample_in)->required();
  c_sample->add_option("-k,--count", sample_k)->required();
  c_sample->add_option("--out", sample_out)->required();
  c_sample->callback([&] {
    action = [&] {
      require_input(sample_in);
      const auto s = sample_corpus(read_corpus(sample_in), sample_k, sample_common.seed);
      const fs::path out = resolve_out(sample_out);
      write_corpus(out, s);
      RunManifest m("sample", sample_common.seed);
      m.set_config({{"k", sample_k}});
      m.add_input(sample_in);
      m.add_output(out);
      m.finish(true);
      m.write(sidecar(out));
    };
  });

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "run the annotation server");
  add_seed(c_serve, serve.common);
  c_serve->add_option("--corpus", serve.corpus)->required()->envname("HVAUDIT_CORPUS");
  c_serve->add_option("--session", serve.session, "assignment plan; created if absent")->required()->envname("HVAUDIT_SESSION");
  c_serve->add_option("--events", serve.events, "event log (default <session>.events.jsonl)");
  c_serve->add_option("--roster", serve.roster, "annotator ids")->delimiter(',');
  c_serve->add_option("--overlap", serve.overlap, "items coded by every annotator");
  c_serve->add_option("--host", serve.host)->envname("HVAUDIT_HOST");
  c_serve->add_option("--port", serve.port)->envname("HVAUDIT_PORT");
  c_serve->add_option("--taxonomy", serve.taxonomy);
  c_serve->callback([&] { action = [&] { run_serve(serve); }; });

  AlphaArgs alpha;
  auto* c_alpha = app.add_subcommand("alpha", "agreement on an annotation event log");
  add_seed(c_alpha, alpha.common);
  c_alpha->add_option("--events", alpha.events)->required();
  c_alpha->add_option("--session", alpha.session, "restrict to the plan's overlap items");
  c_alpha->add_option("--out", alpha.out);
  c_alpha->callback([&] { action = [&] { run_alpha(alpha); }; });

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train the value classifier");
  c_train->add_option("--seed", train.common.seed)->each([&](const std::string&) { train.seed_given = true; });
  c_train->add_option("--config", train.config, "JSON file with TrainConfig fields and paths");
  c_train->add_option("--labels", train.labels);
  c_train->add_option("--corpus", train.corpus);
  c_train->add_option("--out", train.out, "model directory");
  c_train->add_option("--taxonomy", train.taxonomy);
  c_train->add_option("--embeddings", train.embeddings, "precomputed vectors instead of hashed n-grams");
  c_train->add_option("--epochs", train.epochs);
  c_train->add_option("--patience", train.patience);
  c_train->add_option("--batch-size", train.batch_size);
  c_train->add_option("--max-len", train.max_len);
  c_train->add_option("--warmup", train.warmup);
  c_train->add_option("--lr", train.lr);
  c_train->add_option("--weight-decay", train.weight_decay);
  c_train->add_option("--dropout", train.dropout);
  c_train->add_option("--split-ratio", train.split_ratio);
  c_train->add_option("--validation-fraction", train.validation_fraction);
  c_train->add_option("--dimension", train.dimension);
  c_train->callback([&] { action = [&] { run_train(train); }; });

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "score a model against labeled preferences");
  add_seed(c_eval, eval.common);
  c_eval->add_option("--model", eval.model)->required();
  c_eval->add_option("--labels", eval.labels)->required();
  c_eval->add_option("--corpus", eval.corpus)->required();
  c_eval->add_option("--embeddings", eval.embeddings);
  c_eval->add_option("--taxonomy", eval.taxonomy);
  c_eval->add_option("--out", eval.out, "metrics JSON");
  c_eval->callback([&] { action = [&] { run_evaluate(eval); }; });

  ClassifyArgs classify;
  auto* c_classify = app.add_subcommand("classify", "label every preference in a corpus");
  add_seed(c_classify, classify.common);
  c_classify->add_option("--model", classify.model)->required();
  c_classify->add_option("--corpus", classify.corpus)->required();
  c_classify->add_option("--embeddings", classify.embeddings);
  c_classify->add_option("--taxonomy", classify.taxonomy);
  c_classify->add_option("--out", classify.out)->required();
  c_classify->callback([&] { action = [&] { run_classify(classify); }; });

  AuditArgs audit;
  auto* c_audit = app.add_subcommand("audit", "value distribution of a classified corpus");
  add_seed(c_audit, audit.common);
  c_audit->add_option("--classified", audit.classified)->required();
  c_audit->add_option("--dataset-id", audit.dataset_id);
  c_audit->add_option("--source", audit.source);
  c_audit->add_option("--role", audit.role);
  c_audit->add_option("--taxonomy", audit.taxonomy);
  c_audit->add_option("--out", audit.out)->required();
  c_audit->callback([&] { action = [&] { run_audit(audit); }; });

  CompareArgs cmp;
  auto* c_compare = app.add_subcommand("compare", "cross-dataset comparison report");
  add_seed(c_compare, cmp.common);
  c_compare->add_option("--dist", cmp.distributions, "distribution table (repeatable)")->required();
  c_compare->add_option("--out", cmp.out, "report directory");
  c_compare->callback([&] { action = [&] { run_compare(cmp); }; });

  ReviewSampleArgs rs;
  auto* c_rs = app.add_subcommand("review-sample", "draw classified rows for human review");
  add_seed(c_rs, rs.common);
  c_rs->add_option("--classified", rs.classified)->required();
  c_rs->add_option("--corpus", rs.corpus)->required();
  c_rs->add_option("-k,--count", rs.k);
  c_rs->add_option("--taxonomy", rs.taxonomy);
  c_rs->add_option("--out", rs.out)->required();
  c_rs->callback([&] { action = [&] { run_review_sample(rs); }; });

  ReviewScoreArgs rsc;
  auto* c_rsc = app.add_subcommand("review-score", "fraction of reviewed rows marked correct");
  add_seed(c_rsc, rsc.common);
  c_rsc->add_option("--sheet", rsc.sheet)->required();
  c_rsc->add_option("--out", rsc.out);
  c_rsc->callback([&] { action = [&] { run_review_score(rsc); }; });

  PipelineArgs pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "train, classify and audit from one config file");
  c_pipe->add_option("--seed", pipe.common.seed)->each([&](const std::string&) { pipe.seed_given = true; });
  c_pipe->add_option("--config", pipe.config)->required();
  c_pipe->add_option("--out", pipe.out, "report directory (overrides the config)");
  c_pipe->callback([&] { action = [&] { run_pipeline_cmd(pipe); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    action();
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    spdlog::error("{}: {}", error_code_name(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("IoError: {}", e.what());
    return kExitIo;
  } catch (const json::exception& e) {
    spdlog::error("MalformedRecord: {}", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitOk;
}
