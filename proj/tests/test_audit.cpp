#include "doctest.h"

#include <random>

#include "hvaudit/audit.hpp"
#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"
#include "support/workspace.hpp"

using namespace hvaudit;

namespace {

ClassifiedCorpus classified(const std::vector<std::pair<Role, LabelId>>& rows) {
  ClassifiedCorpus cc;
  cc.taxonomy_fingerprint = canonical_taxonomy().fingerprint();
  for (std::size_t i = 0; i < rows.size(); ++i)
    cc.records.push_back({"p" + std::to_string(i), Source::kAnthropicHh, rows[i].first, rows[i].second, 0.5});
  return cc;
}

ClassifiedCorpus random_hh(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<std::pair<Role, LabelId>> rows;
  for (std::size_t i = 0; i < n; ++i)
    rows.push_back({i % 2 ? Role::kRejected : Role::kChosen, static_cast<LabelId>(gen() % 7)});
  return classified(rows);
}

}  // namespace

TEST_CASE("distribution counts and percentages") {
  const auto& t = canonical_taxonomy();
  const auto cc = classified({{Role::kSingle, 0}, {Role::kSingle, 0}, {Role::kSingle, 1}, {Role::kSingle, 2}});
  const auto r = distribution(cc, t, "x");
  CHECK(r.counts == std::vector<std::int64_t>{2, 1, 1, 0, 0, 0, 0});
  CHECK(r.percentages[0] == 50.0);
  CHECK(r.percentages[1] == 25.0);
  CHECK(r.percentages[6] == 0.0);
  CHECK(r.total == 4);
}

TEST_CASE("role filter and chosen + rejected = whole") {
  const auto& t = canonical_taxonomy();
  const auto cc = random_hh(501, 4);
  const auto all = distribution(cc, t, "all");
  const auto chosen = distribution(cc, t, "chosen", {std::nullopt, Role::kChosen});
  const auto rejected = distribution(cc, t, "rejected", {std::nullopt, Role::kRejected});
  CHECK(chosen.total == 251);
  CHECK(rejected.total == 250);
  for (std::size_t j = 0; j < 7; ++j) CHECK(chosen.counts[j] + rejected.counts[j] == all.counts[j]);
  for (const auto* r : {&all, &chosen, &rejected}) {
    double sum = 0.0;
    for (double p : r->percentages) sum += p;
    CHECK(std::abs(sum - 100.0) < 1e-6);
  }
  try {
    distribution(cc, t, "none", {Source::kWebGpt, std::nullopt});
    FAIL("expected EmptyAfterFilter");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyAfterFilter);
  }
}

TEST_CASE("distribution is order-free") {
  const auto& t = canonical_taxonomy();
  auto cc = random_hh(200, 9);
  const auto before = distribution(cc, t, "a");
  std::mt19937_64 gen(1);
  std::shuffle(cc.records.begin(), cc.records.end(), gen);
  CHECK(distribution(cc, t, "a").counts == before.counts);
}

TEST_CASE("compare") {
  const auto& t = canonical_taxonomy();
  const auto r = distribution(random_hh(100, 2), t, "a");
  auto r2 = r;
  r2.dataset_id = "b";
  const std::vector<DistributionReport> two{r, r2};
  const auto m = compare(two);
  CHECK(m.datasets == std::vector<std::string>{"a", "b"});
  CHECK(m.cells[0] == m.cells[1]);
  CHECK_THROWS_AS(compare(std::span<const DistributionReport>(two).first(1)), Error);
  auto other = r2;
  other.taxonomy_fingerprint ^= 1;
  try {
    compare(std::vector<DistributionReport>{r, other});
    FAIL("expected TaxonomyMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTaxonomyMismatch);
  }
}

TEST_CASE("files: classified, distribution tables and report") {
  const auto& t = canonical_taxonomy();
  const auto dir = workspace::temp_dir("audit");
  const auto cc = random_hh(120, 5);
  write_classified(dir / "c.jsonl", cc);
  const auto back = read_classified(dir / "c.jsonl");
  CHECK(back.records.size() == 120);
  CHECK(back.taxonomy_fingerprint == cc.taxonomy_fingerprint);

  ClassifiedCorpus empty;
  empty.taxonomy_fingerprint = t.fingerprint();
  write_classified(dir / "empty.jsonl", empty);
  CHECK(io::read_jsonl(dir / "empty.jsonl").size() == 1);
  CHECK(read_classified(dir / "empty.jsonl").records.empty());

  std::vector<DistributionReport> reports;
  reports.push_back(distribution(cc, t, "hh-rlhf chosen", {std::nullopt, Role::kChosen}));
  reports.push_back(distribution(cc, t, "hh-rlhf rejected", {std::nullopt, Role::kRejected}));
  reports.push_back(distribution(random_hh(77, 6), t, "webgpt"));
  reports.push_back(distribution(random_hh(33, 7), t, "alpaca"));
  write_distribution(dir / "d.tsv", reports[2]);
  const auto rd = read_distribution(dir / "d.tsv");
  CHECK(rd.counts == reports[2].counts);
  CHECK(rd.percentages == reports[2].percentages);
  for (std::size_t j = 0; j < 7; ++j)
    CHECK(std::abs(100.0 * static_cast<double>(rd.counts[j]) / static_cast<double>(rd.total) - rd.percentages[j]) < 1e-6);

  const auto m = compare(reports);
  const auto files = emit_report(m, reports, dir / "r1");
  emit_report(m, reports, dir / "r2");
  for (const auto& f : files) {
    const auto rel = std::filesystem::relative(f, dir / "r1");
    CHECK(io::read_file(f) == io::read_file(dir / "r2" / rel));
  }
  const std::string svg = io::read_file(dir / "r1" / "heatmap.svg");
  std::size_t cells = 0;
  for (auto pos = svg.find("class=\"cell\""); pos != std::string::npos; pos = svg.find("class=\"cell\"", pos + 1)) ++cells;
  CHECK(cells == 28);
  CHECK(svg.find("&amp;") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "r1" / "comparison.tsv"));
  CHECK(std::filesystem::exists(dir / "r1" / "summary.txt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("summary names most and least represented values") {
  DistributionReport w;
  w.dataset_id = "webgpt";
  w.taxonomy_fingerprint = canonical_taxonomy().fingerprint();
  for (const auto& l : canonical_taxonomy().labels()) w.label_names.push_back(l.name);
  w.percentages = {5.67, 78.17, 4.0, 3.0, 5.0, 4.12, 0.04};
  w.counts = {567, 7817, 400, 300, 500, 412, 4};
  w.total = 10000;
  auto a = w;
  a.dataset_id = "alpaca";
  const std::vector<DistributionReport> reports{w, a};
  const auto s = render_summary(compare(reports), reports);
  CHECK(s.find("Wisdom/Knowledge (78.17%)") != std::string::npos);
  CHECK(s.find("Justice/Human & Animal Rights (0.04%)") != std::string::npos);
}

TEST_CASE("classify_corpus checks the taxonomy fingerprint") {
  LinearSoftmaxModel m(7, 64);
  m.encoder_spec.dimension = 64;
  m.taxonomy_fingerprint = 12345;
  Corpus c;
  c.items.push_back({"a", Source::kFixture, Role::kSingle, "hello", {}});
  try {
    classify_corpus(m, c, canonical_taxonomy());
    FAIL("expected FingerprintMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFingerprintMismatch);
  }
  m.taxonomy_fingerprint = canonical_taxonomy().fingerprint();
  const auto cc = classify_corpus(m, c, canonical_taxonomy());
  CHECK(cc.records.size() == 1);
  CHECK(classify_corpus(m, Corpus{}, canonical_taxonomy()).records.empty());
}
