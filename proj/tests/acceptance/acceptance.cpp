// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hvaudit/agreement.hpp"
#include "hvaudit/annotation_server.hpp"
#include "hvaudit/audit.hpp"
#include "hvaudit/classifier.hpp"
#include "hvaudit/corpus.hpp"
#include "hvaudit/error.hpp"
#include "hvaudit/evaluation.hpp"
#include "hvaudit/io.hpp"
#include "hvaudit/pipeline.hpp"
#include "support/oracles.hpp"
#include "support/session.hpp"
#include "support/workspace.hpp"

using namespace hvaudit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Tolerances and budgets.
constexpr double kAlphaTol = 1e-9;
constexpr double kAlphaBudgetS = 5.0;
constexpr double kGradStep = 1e-5;
constexpr double kGradRelTol = 1e-6;
constexpr double kGradBudgetS = 10.0;
constexpr double kWeightIdentityTol = 1e-12;
constexpr double kTableWeightTol = 1e-4;
constexpr double kLn7Tol = 1e-12;
constexpr double kShiftTol = 1e-9;
constexpr double kScaleTol = 1e-9;
constexpr double kSeparableAccuracy = 0.95;
constexpr double kTrainBudgetS = 30.0;
constexpr double kHandTol = 1e-4;
constexpr double kPercentTol = 1e-6;
constexpr double kPipelineBudgetS = 60.0;

const fs::path kFixtures = HVAUDIT_FIXTURE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

FeatureVector dense(const std::vector<double>& x) { return from_dense(x); }

// 1 -----------------------------------------------------------------------
Outcome agreement_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(20240601);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t units = 1 + gen() % 6, coders = 1 + gen() % 4, cats = 1 + gen() % 3;
    oracle::Cells cells(units, std::vector<std::optional<int>>(coders));
    for (auto& row : cells)
      for (auto& c : row)
        if (gen() % 4 != 0) c = static_cast<int>(gen() % cats);
    std::vector<std::string> u, a;
    for (std::size_t i = 0; i < units; ++i) u.push_back("u" + std::to_string(i));
    for (std::size_t i = 0; i < coders; ++i) a.push_back("a" + std::to_string(i));
    auto m = ReliabilityMatrix::with_shape(u, a);
    m.cells = cells;
    const auto expected = oracle::alpha_by_pairs(cells);
    std::optional<double> got;
    try {
      got = krippendorff_alpha_nominal(m);
    } catch (const Error&) {
    }
    o.require(expected.has_value() == got.has_value(), fmt::format("trial {}: defined-ness differs", trial));
    if (expected && got) {
      ++compared;
      o.require(std::abs(*expected - *got) <= kAlphaTol, fmt::format("trial {}: {} vs {}", trial, *got, *expected));
    }
  }
  auto worked = ReliabilityMatrix::with_shape({"u1", "u2", "u3", "u4"}, {"c1", "c2"});
  worked.cells = {{0, 0}, {1, 1}, {0, 1}, {1, 1}};
  const double w = krippendorff_alpha_nominal(worked);
  o.require(std::abs(w - 16.0 / 30.0) <= kAlphaTol, fmt::format("worked example gave {}", w));
  const double s = seconds_since(t0);
  o.require(s < kAlphaBudgetS, fmt::format("took {:.2f}s", s));
  if (o.pass) o.detail = fmt::format("200 matrices ({} defined) match oracle; worked = {:.10f}; {:.3f}s", compared, w, s);
  return o;
}

// 2 -----------------------------------------------------------------------
Outcome gradient_check() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(77);
  std::normal_distribution<double> nd(0.0, 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint32_t d = 1 + static_cast<std::uint32_t>(gen() % 20);
    LinearSoftmaxModel model(3, d);
    for (auto& x : model.weights()) x = nd(gen);
    for (auto& x : model.biases()) x = nd(gen);
    std::vector<EncodedExample> batch;
    const std::size_t size = 1 + gen() % 10;
    for (std::size_t i = 0; i < size; ++i) {
      std::vector<double> x(d);
      for (auto& v : x) v = gen() % 3 ? nd(gen) * 2.0 : 0.0;
      batch.push_back({dense(x), static_cast<LabelId>(gen() % 3)});
    }
    ClassWeights w{{0.3 + (gen() % 100) / 40.0, 0.3 + (gen() % 100) / 40.0, 0.3 + (gen() % 100) / 40.0}};
    const double lambda = 0.01 + (gen() % 100) / 500.0;
    std::vector<double> theta = model.weights();
    theta.insert(theta.end(), model.biases().begin(), model.biases().end());
    const auto nw = static_cast<std::ptrdiff_t>(model.weights().size());
    const auto f = [&](const std::vector<double>& t) {
      LinearSoftmaxModel m = model;
      std::copy(t.begin(), t.begin() + nw, m.weights().begin());
      std::copy(t.begin() + nw, t.end(), m.biases().begin());
      double sq = 0.0;
      for (double x : m.weights()) sq += x * x;
      return batch_loss(m, batch, w) + 0.5 * lambda * sq;
    };
    const auto numeric = oracle::numeric_gradient(f, theta, kGradStep);
    const auto g = loss_gradient(model, batch, w, lambda);
    auto analytic = g.weights;
    analytic.insert(analytic.end(), g.biases.begin(), g.biases.end());
    worst = std::max(worst, oracle::relative_error(analytic, numeric));
  }
  const double s = seconds_since(t0);
  o.require(worst < kGradRelTol, fmt::format("max relative error {:.3e}", worst));
  o.require(s < kGradBudgetS, fmt::format("took {:.2f}s", s));
  if (o.pass) o.detail = fmt::format("50 instances, max relative error {:.3e}; {:.3f}s", worst, s);
  return o;
}

// 3 -----------------------------------------------------------------------
Outcome class_weight_identity() {
  Outcome o;
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen() % 7;
    std::vector<LabelId> labels;
    for (std::size_t j = 0; j < n; ++j) labels.push_back(static_cast<LabelId>(j));
    const std::size_t extra = gen() % 300;
    for (std::size_t i = 0; i < extra; ++i) labels.push_back(static_cast<LabelId>(gen() % n));
    std::shuffle(labels.begin(), labels.end(), gen);
    std::vector<double> count(n, 0.0);
    for (auto l : labels) count[l] += 1.0;
    const auto w = class_weights(labels, n);
    const double target = static_cast<double>(labels.size()) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j)
      o.require(std::abs(w.values[j] * count[j] - target) <= kWeightIdentityTol * target,
                fmt::format("trial {} class {}", trial, j));
  }
  const std::vector<int> counts{2403, 1999, 619, 495, 396, 386, 203};
  std::vector<LabelId> labels;
  for (int j = 0; j < 7; ++j) labels.insert(labels.end(), counts[j], j);
  const auto w = class_weights(labels, 7);
  // m / (n * count): 6501 / (7 * 2403) and 6501 / (7 * 203)
  o.require(std::abs(w.values[0] - 0.3865) < kTableWeightTol, fmt::format("w0 = {}", w.values[0]));
  o.require(std::abs(w.values[6] - 4.5750) < kTableWeightTol, fmt::format("w6 = {}", w.values[6]));
  for (int j = 0; j < 7; ++j)
    o.require(std::abs(w.values[j] - 6501.0 / (7.0 * counts[j])) < kTableWeightTol, fmt::format("w{}", j));
  if (o.pass) o.detail = fmt::format("100 multisets exact; w0 = {:.4f}, w6 = {:.4f}", w.values[0], w.values[6]);
  return o;
}

// 4 -----------------------------------------------------------------------
Outcome loss_analytics() {
  Outcome o;
  LinearSoftmaxModel zero(7, 4);
  ClassWeights unit{std::vector<double>(7, 1.0)};
  std::vector<EncodedExample> one{{dense({0.5, -1.0, 0.0, 2.0}), 3}};
  const double l0 = batch_loss(zero, one, unit);
  o.require(std::abs(l0 - std::log(7.0)) <= kLn7Tol, fmt::format("zero logits gave {}", l0));

  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  double worst_shift = 0.0, worst_scale = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    LinearSoftmaxModel m(7, 5);
    for (auto& x : m.weights()) x = nd(gen);
    for (auto& x : m.biases()) x = nd(gen);
    std::vector<EncodedExample> batch;
    for (int i = 0; i < 8; ++i) {
      std::vector<double> x(5);
      for (auto& v : x) v = nd(gen);
      batch.push_back({dense(x), static_cast<LabelId>(gen() % 7)});
    }
    ClassWeights w{std::vector<double>(7)};
    for (auto& v : w.values) v = 0.2 + (gen() % 100) / 25.0;
    const double base = batch_loss(m, batch, w);
    // Adding a constant to every logit: shift all biases.
    LinearSoftmaxModel shifted = m;
    const double c = nd(gen) * 10.0;
    for (auto& b : shifted.biases()) b += c;
    worst_shift = std::max(worst_shift, std::abs(batch_loss(shifted, batch, w) - base));
    const double k = 0.1 + (gen() % 100) / 10.0;
    ClassWeights scaled = w;
    for (auto& v : scaled.values) v *= k;
    worst_scale = std::max(worst_scale, std::abs(batch_loss(m, batch, scaled) - k * base));
  }
  o.require(worst_shift <= kShiftTol, fmt::format("shift changed loss by {:.3e}", worst_shift));
  o.require(worst_scale <= kScaleTol, fmt::format("scaling off by {:.3e}", worst_scale));
  if (o.pass)
    o.detail = fmt::format("ln7 err {:.1e}; shift err {:.1e}; scale err {:.1e}", std::abs(l0 - std::log(7.0)),
                           worst_shift, worst_scale);
  return o;
}

// 5 -----------------------------------------------------------------------
FeatureSpace dense_space(std::uint32_t d) {
  FeatureSpace s;
  s.spec.kind = EncoderKind::kExternalEmbedding;
  s.spec.dimension = d;
  s.spec.use_idf = false;
  s.num_classes = 3;
  return s;
}

Outcome training_behavior() {
  Outcome o;
  std::vector<EncodedExample> data;
  for (const auto& p : oracle::separable_three_class(500, 10, 2024)) data.push_back({dense(p.x), p.label});
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig defaults;
  const auto r = train(data, defaults, dense_space(10));
  const double s = seconds_since(t0);
  std::size_t correct = 0;
  for (std::size_t i : r.test_indices) correct += predict_features(r.model, data[i].features).label == data[i].label;
  const double acc = static_cast<double>(correct) / static_cast<double>(r.test_indices.size());
  o.require(acc >= kSeparableAccuracy, fmt::format("held-out accuracy {:.4f}", acc));
  o.require(s < kTrainBudgetS, fmt::format("training took {:.2f}s", s));

  std::vector<EncodedExample> fit_set, val;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> x(3, 0.0);
    x[static_cast<std::size_t>(i % 3)] = 1.0;
    fit_set.push_back({dense(x), i % 3});
    if (i < 9) val.push_back({dense(x), (i + 1) % 3});
  }
  TrainConfig cfg;
  cfg.input_dropout = 0.0;
  const auto [model, history] = fit(fit_set, val, cfg, dense_space(3));
  bool worsening = true;
  for (std::size_t e = 1; e < history.epochs.size(); ++e)
    worsening = worsening && history.epochs[e].validation_loss > history.epochs[e - 1].validation_loss;
  o.require(worsening, "validation loss was not strictly worsening");
  o.require(history.epochs.size() == static_cast<std::size_t>(1 + cfg.early_stopping_patience),
            fmt::format("stopped after {} epochs", history.epochs.size()));
  o.require(history.best_epoch == 1, fmt::format("best_epoch {}", history.best_epoch));

  TrainConfig seeded;
  seeded.seed = 31;
  const auto a = train(data, seeded, dense_space(10)).model.serialize();
  const auto b = train(data, seeded, dense_space(10)).model.serialize();
  o.require(a == b, "same seed produced different artifacts");
  if (o.pass)
    o.detail = fmt::format("accuracy {:.4f} in {:.3f}s; stopped after {} epochs (best 1); artifacts identical ({} bytes)",
                           acc, s, history.epochs.size(), a.size());
  return o;
}

// 6 -----------------------------------------------------------------------
Outcome metrics_oracle() {
  Outcome o;
  std::mt19937_64 gen(606);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 6);
    const std::size_t m = 1 + gen() % 200;
    std::vector<int> g(m), p(m);
    for (std::size_t i = 0; i < m; ++i) {
      g[i] = static_cast<int>(gen() % n);
      p[i] = gen() % 3 ? g[i] : static_cast<int>(gen() % n);
    }
    const auto ref = oracle::tally(g, p, n);
    const auto got = metrics(confusion(g, p, static_cast<std::size_t>(n)));
    bool same = got.accuracy == ref.accuracy && got.weighted_f1 == ref.weighted_f1 &&
                got.weighted_precision == ref.weighted_precision && got.weighted_recall == ref.weighted_recall;
    for (int j = 0; j < n; ++j)
      same = same && got.per_class[j].precision == ref.precision[j] && got.per_class[j].recall == ref.recall[j] &&
             got.per_class[j].f1 == ref.f1[j] && got.per_class[j].support == ref.support[j];
    o.require(same, fmt::format("trial {} differs from tally", trial));
  }
  ConfusionMatrix cm(2);
  cm.add(0, 0, 2);
  cm.add(0, 1, 1);
  cm.add(1, 1, 3);
  const auto hand = metrics(cm);
  o.require(std::abs(hand.accuracy - 0.8333) <= kHandTol, fmt::format("accuracy {}", hand.accuracy));
  o.require(std::abs(hand.weighted_f1 - 0.8286) <= kHandTol, fmt::format("weighted F1 {}", hand.weighted_f1));
  if (o.pass)
    o.detail = fmt::format("100 vectors exact; hand case accuracy {:.4f}, weighted F1 {:.4f}", hand.accuracy,
                           hand.weighted_f1);
  return o;
}

// 7 -----------------------------------------------------------------------
std::optional<fs::path> env_path(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return fs::path(v);
}

Outcome ingestion() {
  Outcome o;
  // Expected texts recomputed from the raw rows.
  // A row lacking one side still contributes the side it has.
  std::vector<std::string> hh_expected;
  std::vector<Role> hh_roles;
  std::size_t rows = 0;
  for (const char* split : {"hh_train.jsonl", "hh_test.jsonl"})
    for (const auto& row : io::read_jsonl(kFixtures / split)) {
      ++rows;
      for (const auto& [field, role] : {std::pair{"chosen", Role::kChosen}, std::pair{"rejected", Role::kRejected}})
        if (row.contains(field)) {
          hh_expected.push_back(row[field].get<std::string>());
          hh_roles.push_back(role);
        }
    }
  const auto hh = ingest_hh_rlhf(kFixtures / "hh_train.jsonl", kFixtures / "hh_test.jsonl");
  o.require(hh.corpus.size() == hh_expected.size(), "hh-rlhf count");
  for (std::size_t i = 0; i < std::min(hh_expected.size(), hh.corpus.size()); ++i) {
    o.require(hh.corpus.items[i].text == hh_expected[i], "hh-rlhf text " + hh.corpus.items[i].pref_id);
    o.require(hh.corpus.items[i].role == hh_roles[i], "hh-rlhf role order");
  }
  o.require(hh.corpus.size() + hh.skips.size() == 2 * rows, "hh-rlhf two per row");

  std::vector<std::string> web_expected;
  for (const auto& row : io::read_jsonl(kFixtures / "webgpt.jsonl")) {
    const auto q = row["question"]["full_text"].get<std::string>();
    const auto a = row["answer_0"].get<std::string>();
    if (!q.empty() && !a.empty()) web_expected.push_back(q + "\n" + a);
  }
  const auto web = ingest_webgpt(kFixtures / "webgpt.jsonl");
  o.require(web.corpus.size() == web_expected.size(), "webgpt count");
  for (std::size_t i = 0; i < std::min(web_expected.size(), web.corpus.size()); ++i)
    o.require(web.corpus.items[i].text == web_expected[i], "webgpt text " + web.corpus.items[i].pref_id);

  std::vector<std::string> alp_expected;
  for (const auto& row : io::read_jsonl(kFixtures / "alpaca.jsonl"))
    alp_expected.push_back(row["instruction"].get<std::string>() + "\n" + row["output"].get<std::string>());
  const auto alp = ingest_alpaca(kFixtures / "alpaca.jsonl");
  o.require(alp.corpus.size() == alp_expected.size(), "alpaca count");
  for (std::size_t i = 0; i < std::min(alp_expected.size(), alp.corpus.size()); ++i)
    o.require(alp.corpus.items[i].text == alp_expected[i], "alpaca text " + alp.corpus.items[i].pref_id);

  std::string real = "real-data totals not checked (set HVAUDIT_HH_TRAIN, HVAUDIT_HH_TEST, HVAUDIT_WEBGPT, HVAUDIT_ALPACA)";
  const auto hh_train = env_path("HVAUDIT_HH_TRAIN"), hh_test = env_path("HVAUDIT_HH_TEST");
  const auto webgpt = env_path("HVAUDIT_WEBGPT"), alpaca = env_path("HVAUDIT_ALPACA");
  std::vector<std::string> checked;
  if (hh_train && hh_test) {
    const auto n = ingest_hh_rlhf(*hh_train, *hh_test).corpus.size();
    o.require(n == 338704, fmt::format("hh-rlhf total {}", n));
    checked.push_back(fmt::format("hh-rlhf {}", n));
  }
  if (webgpt) {
    const auto n = ingest_webgpt(*webgpt).corpus.size();
    o.require(n == 19578, fmt::format("webgpt total {}", n));
    checked.push_back(fmt::format("webgpt {}", n));
  }
  if (alpaca) {
    const auto n = ingest_alpaca(*alpaca).corpus.size();
    o.require(n == 52002, fmt::format("alpaca total {}", n));
    checked.push_back(fmt::format("alpaca {}", n));
  }
  if (!checked.empty()) real = "real totals: " + fmt::format("{}", fmt::join(checked, ", "));
  if (o.pass)
    o.detail = fmt::format("fixtures byte-exact ({} hh, {} webgpt, {} alpaca); {}", hh.corpus.size(),
                           web.corpus.size(), alp.corpus.size(), real);
  return o;
}

// 8 -----------------------------------------------------------------------
Outcome audit_math() {
  Outcome o;
  const auto& t = canonical_taxonomy();
  std::mt19937_64 gen(88);
  ClassifiedCorpus cc;
  cc.taxonomy_fingerprint = t.fingerprint();
  for (int i = 0; i < 2001; ++i)
    cc.records.push_back({"hh:" + std::to_string(i), Source::kAnthropicHh, i % 2 ? Role::kRejected : Role::kChosen,
                          static_cast<LabelId>(gen() % 7), 0.5});
  const auto whole = distribution(cc, t, "hh-rlhf");
  const auto chosen = distribution(cc, t, "hh-rlhf chosen", {std::nullopt, Role::kChosen});
  const auto rejected = distribution(cc, t, "hh-rlhf rejected", {std::nullopt, Role::kRejected});
  for (std::size_t j = 0; j < 7; ++j)
    o.require(chosen.counts[j] + rejected.counts[j] == whole.counts[j], "chosen + rejected != whole");
  std::vector<DistributionReport> reports{chosen, rejected};
  for (int d = 0; d < 30; ++d) {
    ClassifiedCorpus other;
    other.taxonomy_fingerprint = t.fingerprint();
    const int n = 1 + static_cast<int>(gen() % 500);
    for (int i = 0; i < n; ++i)
      other.records.push_back({"x:" + std::to_string(i), Source::kWebGpt, Role::kSingle, static_cast<LabelId>(gen() % (1 + d % 7)), 0.5});
    reports.push_back(distribution(other, t, "set " + std::to_string(d)));
  }
  double worst = 0.0;
  for (const auto& r : reports) {
    double sum = 0.0;
    for (double p : r.percentages) sum += p;
    worst = std::max(worst, std::abs(sum - 100.0));
  }
  o.require(worst <= kPercentTol, fmt::format("percent sum off by {:.3e}", worst));

  const auto dir = workspace::temp_dir("accept_audit");
  const auto m = compare(reports);
  const auto files = emit_report(m, reports, dir / "a");
  emit_report(m, reports, dir / "b");
  for (const auto& f : files)
    o.require(io::read_file(f) == io::read_file(dir / "b" / fs::relative(f, dir / "a")), "report differs: " + f.string());
  fs::remove_all(dir);
  if (o.pass)
    o.detail = fmt::format("{} reports, max |sum - 100| = {:.1e}; chosen + rejected = whole; {} report files identical",
                           reports.size(), worst, files.size());
  return o;
}

// 9 -----------------------------------------------------------------------
Outcome end_to_end() {
  Outcome o;
  const auto r1 = workspace::temp_dir("accept_pipe1");
  const auto r2 = workspace::temp_dir("accept_pipe2");
  const auto p1 = workspace::build(r1, 200);
  const auto p2 = workspace::build(r2, 200);
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run_pipeline(PipelineConfig::from_json(json::parse(io::read_file(p1.config)), r1));
  const double s = seconds_since(t0);
  run_pipeline(PipelineConfig::from_json(json::parse(io::read_file(p2.config)), r2));
  const auto rep = r1 / "report";
  for (const char* f : {"model/model.bin", "model/metrics.json", "comparison.tsv", "heatmap.svg"})
    o.require(fs::exists(rep / f), std::string("missing ") + f);
  std::size_t tables = 0;
  if (fs::exists(rep / "distributions"))
    for (const auto& e : fs::directory_iterator(rep / "distributions")) tables += e.path().extension() == ".tsv";
  o.require(tables == 4, fmt::format("{} distribution tables", tables));
  std::size_t compared = 0;
  for (const auto& f : out) {
    if (f.filename() == "manifest.json") continue;
    ++compared;
    o.require(io::read_file(f) == io::read_file(r2 / "report" / fs::relative(f, rep)), "nondeterministic: " + f.string());
  }
  o.require(s < kPipelineBudgetS, fmt::format("took {:.2f}s", s));
  const auto metrics = json::parse(io::read_file(rep / "model" / "metrics.json"));
  if (o.pass)
    o.detail = fmt::format("{} outputs identical across runs; held-out weighted F1 {:.3f}; {:.2f}s", compared,
                           metrics["weighted_f1"].get<double>(), s);
  fs::remove_all(r1);
  fs::remove_all(r2);
  return o;
}

// 10 ----------------------------------------------------------------------
// Labels every assigned item of both annotators over HTTP. With crash_after,
// the server and store are torn down after that many submissions (leaving a
// half-written record on disk) and brought back up from the event log.
json scripted_session(const fs::path& dir, std::optional<int> crash_after) {
  const auto corpus = session::corpus(16);
  const auto plan = create_session(corpus, {"ann1", "ann2"}, 4, 99);
  const auto log = dir / "events.jsonl";
  auto store = std::make_unique<AnnotationStore>(corpus, plan, canonical_taxonomy(), log);
  auto server = std::make_unique<AnnotationServer>(*store);
  int port = server->start("127.0.0.1", 0);
  int submitted = 0;
  for (const char* who : {"ann1", "ann2"}) {
    while (true) {
      httplib::Client cli("127.0.0.1", port);
      auto r = cli.Get(std::string("/api/tasks/next?annotator=") + who);
      if (!r || r->status != 200) throw std::runtime_error("next task failed");
      const auto body = json::parse(r->body);
      if (body["done"].get<bool>()) break;
      const auto id = body["task"]["pref_id"].get<std::string>();
      const int label = static_cast<int>((std::hash<std::string>{}(id) + (who[3] == '2' && id.back() == '1')) % 7);
      auto ack = cli.Post("/api/annotations", json({{"annotator", who}, {"pref_id", id}, {"label", label}}).dump(),
                          "application/json");
      if (!ack || ack->status != 200) throw std::runtime_error("submit failed");
      if (crash_after && ++submitted == *crash_after) {
        server->stop();
        server.reset();
        store.reset();
        std::ofstream(log, std::ios::app | std::ios::binary) << R"({"event_id":)";
        store = std::make_unique<AnnotationStore>(corpus, plan, canonical_taxonomy(), log);
        server = std::make_unique<AnnotationServer>(*store);
        port = server->start("127.0.0.1", 0);
      }
    }
  }
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Get("/api/export");
  if (!r) throw std::runtime_error("export failed");
  server->stop();
  return json::parse(r->body);
}

Outcome annotation_durability() {
  Outcome o;
  const auto a = workspace::temp_dir("accept_session_a");
  const auto b = workspace::temp_dir("accept_session_b");
  const auto plain = scripted_session(a, std::nullopt);
  const auto restarted = scripted_session(b, 9);
  const auto labels = read_event_log(b / "events.jsonl").size();
  o.require(labels == 20, fmt::format("{} label events", labels));
  o.require(plain == restarted, "export differs after restart");
  fs::remove_all(a);
  fs::remove_all(b);
  if (o.pass)
    o.detail = fmt::format("{} labels over HTTP, restart after 9; exports identical ({} examples, {} unresolved); "
                           "no secondary component built",
                           labels, plain["examples"].size(), plain["unresolved"].size());
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"agreement oracle", agreement_oracle},
      {"gradient check", gradient_check},
      {"class-weight identity", class_weight_identity},
      {"loss analytics", loss_analytics},
      {"training behavior", training_behavior},
      {"metrics oracle", metrics_oracle},
      {"ingestion", ingestion},
      {"audit math", audit_math},
      {"end-to-end pipeline", end_to_end},
      {"annotation durability", annotation_durability},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    fmt::print("[{}] {:2} {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
