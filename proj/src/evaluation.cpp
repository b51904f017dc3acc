#include "hvaudit/evaluation.hpp"

#include <numeric>

#include <fmt/format.h>

#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"
#include "hvaudit/random.hpp"

namespace hvaudit {

std::size_t ConfusionMatrix::index(LabelId gold, LabelId pred) const {
  if (gold < 0 || pred < 0 || static_cast<std::size_t>(gold) >= n_ || static_cast<std::size_t>(pred) >= n_)
    throw Error(ErrorCode::kUnknownLabel, fmt::format("label pair ({}, {}) outside {} classes", gold, pred, n_));
  return static_cast<std::size_t>(gold) * n_ + static_cast<std::size_t>(pred);
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::support(LabelId gold) const {
  std::int64_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(gold, static_cast<LabelId>(p));
  return s;
}

std::int64_t ConfusionMatrix::predicted(LabelId pred) const {
  std::int64_t s = 0;
  for (std::size_t g = 0; g < n_; ++g) s += at(static_cast<LabelId>(g), pred);
  return s;
}

nlohmann::json ConfusionMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t g = 0; g < n_; ++g) {
    std::vector<std::int64_t> row(counts_.begin() + static_cast<std::ptrdiff_t>(g * n_),
                                  counts_.begin() + static_cast<std::ptrdiff_t>((g + 1) * n_));
    rows.push_back(row);
  }
  return {{"orientation", "rows=gold,cols=predicted"}, {"counts", rows}};
}

ConfusionMatrix confusion(std::span<const LabelId> golds, std::span<const LabelId> preds,
                          std::size_t num_classes) {
  if (golds.size() != preds.size())
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("{} gold labels but {} predictions", golds.size(), preds.size()));
  if (golds.empty()) throw Error(ErrorCode::kEmptyInput, "no examples to score");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < golds.size(); ++i) cm.add(golds[i], preds[i]);
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm, bool strict) {
  MetricsReport r;
  r.total = cm.total();
  if (r.total <= 0) throw Error(ErrorCode::kEmptyInput, "confusion matrix is empty");
  const auto ratio = [strict](std::int64_t num, std::int64_t den, const char* what, std::size_t j) {
    if (den == 0) {
      if (strict) throw Error(ErrorCode::kInsufficientData, fmt::format("{} undefined for class {}", what, j));
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  const double m = static_cast<double>(r.total);
  std::int64_t trace = 0;
  for (std::size_t j = 0; j < cm.num_classes(); ++j) {
    const auto id = static_cast<LabelId>(j);
    const std::int64_t tp = cm.at(id, id);
    trace += tp;
    ClassMetrics c;
    c.support = cm.support(id);
    c.precision = ratio(tp, cm.predicted(id), "precision", j);
    c.recall = ratio(tp, c.support, "recall", j);
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    const double share = static_cast<double>(c.support) / m;
    r.weighted_precision += share * c.precision;
    r.weighted_recall += share * c.recall;
    r.weighted_f1 += share * c.f1;
    r.per_class.push_back(c);
  }
  r.accuracy = static_cast<double>(trace) / m;
  return r;
}

nlohmann::json MetricsReport::to_json(const Taxonomy* taxonomy) const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t j = 0; j < per_class.size(); ++j) {
    nlohmann::json c = {{"id", j},
                        {"precision", per_class[j].precision},
                        {"recall", per_class[j].recall},
                        {"f1", per_class[j].f1},
                        {"support", per_class[j].support}};
    if (taxonomy != nullptr && taxonomy->contains(static_cast<LabelId>(j)))
      c["label"] = taxonomy->at(static_cast<LabelId>(j)).name;
    classes.push_back(c);
  }
  return {{"accuracy", accuracy},
          {"weighted_precision", weighted_precision},
          {"weighted_recall", weighted_recall},
          {"weighted_f1", weighted_f1},
          {"total", total},
          {"per_class", classes}};
}

ReviewSheet sample_for_human_review(std::span<const ClassifiedItem> classified,
                                    const std::map<std::string, std::string>& texts,
                                    const Taxonomy& taxonomy, std::size_t k, std::uint64_t seed) {
  if (k > classified.size())
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("review sample of {} exceeds {} classified rows", k, classified.size()));
  std::vector<std::size_t> idx(classified.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  ReviewSheet sheet;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& item = classified[idx[i]];
    auto t = texts.find(item.pref_id);
    sheet.rows.push_back({item.pref_id, t == texts.end() ? std::string{} : t->second,
                          taxonomy.at(item.label).name, std::nullopt});
  }
  return sheet;
}

double score_human_review(const ReviewSheet& sheet) {
  std::vector<std::string> missing;
  std::size_t correct = 0;
  for (const auto& row : sheet.rows) {
    if (!row.correct) missing.push_back(row.pref_id);
    else if (*row.correct) ++correct;
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw Error(ErrorCode::kIncompleteSheet, fmt::format("{} rows lack a verdict: {}", missing.size(), list));
  }
  if (sheet.rows.empty()) throw Error(ErrorCode::kEmptyInput, "review sheet has no rows");
  return static_cast<double>(correct) / static_cast<double>(sheet.rows.size());
}

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: out += s[i];
    }
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

void write_review_sheet(const std::filesystem::path& path, const ReviewSheet& sheet) {
  std::string buf = "pref_id\ttext\tpredicted_label\tverdict\n";
  for (const auto& row : sheet.rows) {
    const char* verdict = !row.correct ? "" : (*row.correct ? "correct" : "incorrect");
    buf += fmt::format("{}\t{}\t{}\t{}\n", escape_field(row.pref_id), escape_field(row.text),
                       escape_field(row.predicted_label), verdict);
  }
  io::write_file(path, buf);
}

ReviewSheet read_review_sheet(const std::filesystem::path& path) {
  ReviewSheet sheet;
  bool header = true;
  io::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split_tabs(line);
    if (header) {
      header = false;
      if (fields.size() < 4 || fields[0] != "pref_id" || fields[3] != "verdict")
        throw Error(ErrorCode::kMalformedRecord, path.string() + ": missing review sheet header");
      return;
    }
    if (fields.size() < 3 || fields.size() > 4)
      throw Error(ErrorCode::kMalformedRecord, fmt::format("{}:{}: expected 4 columns", path.string(), line_no));
    ReviewRow row{unescape_field(fields[0]), unescape_field(fields[1]), unescape_field(fields[2]), std::nullopt};
    const std::string verdict = fields.size() == 4 ? fold_label_name(fields[3]) : std::string{};
    if (verdict == "correct") row.correct = true;
    else if (verdict == "incorrect") row.correct = false;
    else if (!verdict.empty())
      throw Error(ErrorCode::kMalformedRecord,
                  fmt::format("{}:{}: verdict must be 'correct' or 'incorrect'", path.string(), line_no));
    sheet.rows.push_back(std::move(row));
  });
  return sheet;
}

}  // namespace hvaudit
