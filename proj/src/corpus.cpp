#include "hvaudit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"
#include "hvaudit/random.hpp"

namespace hvaudit {

using nlohmann::json;

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kAnthropicHh: return "anthropic_hh";
    case Source::kWebGpt: return "webgpt";
    case Source::kAlpacaGpt4: return "alpaca_gpt4";
    case Source::kFixture: return "fixture";
  }
  return "fixture";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kChosen: return "chosen";
    case Role::kRejected: return "rejected";
    case Role::kSingle: return "single";
  }
  return "single";
}

Source source_from_string(std::string_view s) {
  for (Source v : {Source::kAnthropicHh, Source::kWebGpt, Source::kAlpacaGpt4, Source::kFixture})
    if (to_string(v) == s) return v;
  throw Error(ErrorCode::kMalformedRecord, fmt::format("unknown source '{}'", s));
}

Role role_from_string(std::string_view s) {
  for (Role v : {Role::kChosen, Role::kRejected, Role::kSingle})
    if (to_string(v) == s) return v;
  throw Error(ErrorCode::kMalformedRecord, fmt::format("unknown role '{}'", s));
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kHuman: return "human";
    case Provenance::kModel: return "model";
    case Provenance::kAdjudicated: return "adjudicated";
  }
  return "human";
}

Provenance provenance_from_string(std::string_view s) {
  for (Provenance v : {Provenance::kHuman, Provenance::kModel, Provenance::kAdjudicated})
    if (to_string(v) == s) return v;
  throw Error(ErrorCode::kMalformedRecord, fmt::format("unknown provenance '{}'", s));
}

namespace {

// Returns the string field or nullptr when absent / not a string.
const std::string* string_field(const json& record, const char* key) {
  if (!record.is_object()) return nullptr;
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) return nullptr;
  return it->get_ptr<const std::string*>();
}

// Parses each line, handing valid objects to `emit`; invalid JSON is
// recorded as a skip.
template <typename Fn>
void scan_records(const std::filesystem::path& path, std::string_view tag,
                  std::vector<SkipEntry>& skips, Fn&& emit) {
  std::size_t index = 0;
  io::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const std::size_t row = index++;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error&) {
      skips.push_back({line_no, fmt::format("{}: invalid JSON", tag)});
      return;
    }
    if (!record.is_object()) {
      skips.push_back({line_no, fmt::format("{}: record is not an object", tag)});
      return;
    }
    emit(line_no, row, record);
  });
}

void log_skips(std::string_view what, const std::vector<SkipEntry>& skips) {
  for (const auto& s : skips) spdlog::warn("{}: line {} skipped: {}", what, s.line_no, s.reason);
}

}  // namespace

IngestResult ingest_hh_rlhf(const std::filesystem::path& train_path,
                            const std::filesystem::path& test_path, const IngestOptions& options) {
  IngestResult result;
  std::size_t rows = 0;
  for (auto [path, split] : {std::pair{train_path, "train"}, std::pair{test_path, "test"}}) {
    scan_records(path, split, result.skips, [&](std::size_t line_no, std::size_t row, const json& r) {
      ++rows;
      for (Role role : {Role::kChosen, Role::kRejected}) {
        const char* field = role == Role::kChosen ? "chosen" : "rejected";
        const std::string* text = string_field(r, field);
        if (text == nullptr) {
          result.skips.push_back({line_no, fmt::format("{}: missing field '{}'", split, field)});
          continue;
        }
        if (text->empty()) {
          result.skips.push_back({line_no, fmt::format("{}: empty field '{}'", split, field)});
          continue;
        }
        Preference p;
        p.pref_id = fmt::format("anthropic_hh:{}:{}:{}", split, row, to_string(role));
        p.source = Source::kAnthropicHh;
        p.role = role;
        p.text = *text;
        result.corpus.items.push_back(std::move(p));
      }
    });
  }
  result.corpus.provenance = {{"source", "anthropic_hh"},
                              {"inputs", {train_path.string(), test_path.string()}},
                              {"separator", options.separator},
                              {"rows", rows},
                              {"skipped", result.skips.size()}};
  log_skips("anthropic_hh", result.skips);
  return result;
}

IngestResult ingest_webgpt(const std::filesystem::path& path, const IngestOptions& options) {
  IngestResult result;
  std::size_t rows = 0;
  scan_records(path, "webgpt", result.skips, [&](std::size_t line_no, std::size_t row, const json& r) {
    ++rows;
    auto q = r.find("question");
    const std::string* question = q == r.end() ? nullptr : string_field(*q, "full_text");
    const std::string* answer = string_field(r, "answer_0");
    if (question == nullptr || answer == nullptr) {
      result.skips.push_back({line_no, question == nullptr ? "missing field 'question.full_text'"
                                                           : "missing field 'answer_0'"});
      return;
    }
    if (question->empty() || answer->empty()) {
      result.skips.push_back({line_no, question->empty() ? "empty field 'question.full_text'"
                                                         : "empty field 'answer_0'"});
      return;
    }
    Preference p;
    p.pref_id = fmt::format("webgpt:{}:single", row);
    p.source = Source::kWebGpt;
    p.role = Role::kSingle;
    p.text = *question + options.separator + *answer;
    const json* id = nullptr;
    if (q->contains("id")) id = &(*q)["id"];
    else if (r.contains("id")) id = &r["id"];
    if (id != nullptr) p.meta["id"] = id->is_string() ? id->get<std::string>() : id->dump();
    result.corpus.items.push_back(std::move(p));
  });
  result.corpus.provenance = {{"source", "webgpt"},
                              {"inputs", {path.string()}},
                              {"separator", options.separator},
                              {"rows", rows},
                              {"skipped", result.skips.size()}};
  log_skips("webgpt", result.skips);
  return result;
}

IngestResult ingest_alpaca(const std::filesystem::path& path, const IngestOptions& options) {
  IngestResult result;
  std::size_t rows = 0;
  scan_records(path, "alpaca", result.skips, [&](std::size_t line_no, std::size_t row, const json& r) {
    ++rows;
    const std::string* instruction = string_field(r, "instruction");
    const std::string* output = string_field(r, "output");
    if (instruction == nullptr || output == nullptr) {
      result.skips.push_back(
          {line_no, instruction == nullptr ? "missing field 'instruction'" : "missing field 'output'"});
      return;
    }
    Preference p;
    p.pref_id = fmt::format("alpaca_gpt4:{}:single", row);
    p.source = Source::kAlpacaGpt4;
    p.role = Role::kSingle;
    p.text = *instruction + options.separator + *output;
    result.corpus.items.push_back(std::move(p));
  });
  result.corpus.provenance = {{"source", "alpaca_gpt4"},
                              {"inputs", {path.string()}},
                              {"separator", options.separator},
                              {"rows", rows},
                              {"skipped", result.skips.size()}};
  log_skips("alpaca_gpt4", result.skips);
  return result;
}

void write_corpus(const std::filesystem::path& path, const Corpus& c) {
  std::string buf;
  for (const auto& p : c.items) {
    json j = {{"pref_id", p.pref_id},
              {"source", to_string(p.source)},
              {"role", to_string(p.role)},
              {"text", p.text},
              {"meta", p.meta}};
    buf += j.dump();
    buf += '\n';
  }
  io::write_file(path, buf);
}

Corpus read_corpus(const std::filesystem::path& path) {
  Corpus c;
  std::set<std::string> seen;
  io::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    try {
      const json j = json::parse(line);
      Preference p;
      p.pref_id = j.at("pref_id").get<std::string>();
      p.source = source_from_string(j.at("source").get<std::string>());
      p.role = role_from_string(j.at("role").get<std::string>());
      p.text = j.at("text").get<std::string>();
      if (j.contains("meta")) p.meta = j["meta"].get<std::map<std::string, std::string>>();
      if (!seen.insert(p.pref_id).second)
        throw Error(ErrorCode::kMalformedRecord, fmt::format("duplicate pref_id '{}'", p.pref_id));
      c.items.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  });
  c.provenance = {{"source", "corpus_file"}, {"inputs", {path.string()}}};
  return c;
}

void write_skip_report(const std::filesystem::path& path, const std::vector<SkipEntry>& skips) {
  std::vector<json> records;
  records.reserve(skips.size());
  for (const auto& s : skips) records.push_back({{"line_no", s.line_no}, {"reason", s.reason}});
  io::write_jsonl(path, records);
}

std::size_t convert_columns_to_jsonl(const std::filesystem::path& in, const std::filesystem::path& out) {
  json doc;
  try {
    doc = json::parse(io::read_file(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, in.string() + ": " + e.what());
  }
  std::vector<json> records;
  if (doc.is_array()) {
    records.assign(doc.begin(), doc.end());
  } else if (doc.is_object()) {
    std::size_t rows = 0;
    bool first = true;
    for (const auto& [name, column] : doc.items()) {
      if (!column.is_array())
        throw Error(ErrorCode::kMalformedRecord, fmt::format("column '{}' is not an array", name));
      if (first) rows = column.size();
      else if (column.size() != rows)
        throw Error(ErrorCode::kMalformedRecord, fmt::format("column '{}' has {} rows, expected {}",
                                                             name, column.size(), rows));
      first = false;
    }
    records.assign(rows, json::object());
    for (const auto& [name, column] : doc.items())
      for (std::size_t i = 0; i < rows; ++i) records[i][name] = column[i];
  } else {
    throw Error(ErrorCode::kMalformedRecord, "expected a JSON array of records or an object of columns");
  }
  io::write_jsonl(out, records);
  return records.size();
}

Corpus sample_corpus(const Corpus& c, std::size_t k, std::uint64_t seed) {
  if (k > c.size())
    throw Error(ErrorCode::kOutOfRange, fmt::format("sample size {} exceeds corpus size {}", k, c.size()));
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates over the first k slots.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  Corpus out;
  out.items.reserve(k);
  for (std::size_t i : idx) out.items.push_back(c.items[i]);
  out.provenance = {{"sampled_from", c.provenance}, {"k", k}, {"seed", seed}};
  return out;
}

json to_json(const LabeledExample& e, const Taxonomy& taxonomy) {
  return {{"pref_id", e.pref_id},
          {"label", e.label},
          {"label_name", taxonomy.at(e.label).name},
          {"annotator_id", e.annotator_id},
          {"provenance", to_string(e.provenance)}};
}

LabeledExample labeled_example_from_json(const json& j, const Taxonomy& taxonomy) {
  LabeledExample e;
  try {
    e.pref_id = j.at("pref_id").get<std::string>();
    const json& label = j.at("label");
    if (label.is_number_integer()) {
      e.label = label.get<LabelId>();
      if (!taxonomy.contains(e.label))
        throw Error(ErrorCode::kUnknownLabel, fmt::format("unknown label id {}", e.label));
    } else {
      e.label = taxonomy.label_from_name(label.get<std::string>()).id;
    }
    e.annotator_id = j.value("annotator_id", std::string{});
    e.provenance = provenance_from_string(j.value("provenance", std::string{"human"}));
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformedRecord, std::string("invalid labeled example: ") + ex.what());
  }
  return e;
}

std::vector<LabeledExample> read_labels(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  std::vector<LabeledExample> out;
  for (const auto& j : io::read_jsonl(path)) out.push_back(labeled_example_from_json(j, taxonomy));
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabeledExample>& labels,
                  const Taxonomy& taxonomy) {
  std::vector<json> records;
  records.reserve(labels.size());
  for (const auto& e : labels) records.push_back(to_json(e, taxonomy));
  io::write_jsonl(path, records);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t m, double ratio, std::uint64_t seed, const std::vector<LabelId>* stratify_by) {
  if (m == 0) throw Error(ErrorCode::kEmptyInput, "cannot split an empty example set");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw Error(ErrorCode::kConfigInvalid, fmt::format("split ratio {} must lie in (0, 1)", ratio));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> train, test;
  if (stratify_by == nullptr) {
    const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(m)));
    train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return {train, test};
  }
  std::map<LabelId, std::vector<std::size_t>> groups;
  for (std::size_t i : order) groups[(*stratify_by)[i]].push_back(i);
  std::map<LabelId, std::size_t> quota, taken;
  for (const auto& [label, members] : groups)
    quota[label] = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(members.size())));
  for (std::size_t i : order) {
    const LabelId label = (*stratify_by)[i];
    if (taken[label] < quota[label]) {
      ++taken[label];
      train.push_back(i);
    } else {
      test.push_back(i);
    }
  }
  return {train, test};
}

Split<LabeledExample> split_train_test(const std::vector<LabeledExample>& examples, double ratio,
                                       std::uint64_t seed, bool stratified) {
  std::vector<LabelId> labels;
  if (stratified)
    for (const auto& e : examples) labels.push_back(e.label);
  auto [train_idx, test_idx] = split_indices(examples.size(), ratio, seed, stratified ? &labels : nullptr);
  Split<LabeledExample> s;
  for (std::size_t i : train_idx) s.train.push_back(examples[i]);
  for (std::size_t i : test_idx) s.test.push_back(examples[i]);
  return s;
}

}  // namespace hvaudit
