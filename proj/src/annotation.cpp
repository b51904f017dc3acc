#include "hvaudit/annotation.hpp"

#include <unistd.h>

#include <chrono>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"
#include "hvaudit/random.hpp"

namespace hvaudit {

using nlohmann::json;

json AnnotationEvent::to_json() const {
  json j = {{"event_id", event_id},
            {"kind", kind == EventKind::kLabel ? "label" : "adjudication"},
            {"annotator_id", annotator_id},
            {"pref_id", pref_id},
            {"label", label},
            {"timestamp_ms", timestamp_ms}};
  if (!note.empty()) j["note"] = note;
  return j;
}

AnnotationEvent AnnotationEvent::from_json(const json& j) {
  AnnotationEvent e;
  try {
    e.event_id = j.at("event_id").get<std::uint64_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "label") e.kind = EventKind::kLabel;
    else if (kind == "adjudication") e.kind = EventKind::kAdjudication;
    else throw Error(ErrorCode::kMalformedRecord, "unknown event kind '" + kind + "'");
    e.annotator_id = j.at("annotator_id").get<std::string>();
    e.pref_id = j.at("pref_id").get<std::string>();
    e.label = j.at("label").get<LabelId>();
    e.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    e.note = j.value("note", std::string{});
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kMalformedRecord, std::string("invalid annotation event: ") + ex.what());
  }
  return e;
}

std::size_t AssignmentPlan::assigned_count(const std::string& annotator) const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [&](const PlanItem& i) { return assigned_to(i, annotator); }));
}

json AssignmentPlan::to_json() const {
  json items_json = json::array();
  for (const auto& i : items) {
    json ij = {{"pref_id", i.pref_id}, {"overlap", i.overlap}};
    if (!i.overlap) ij["annotator"] = i.annotator;
    items_json.push_back(ij);
  }
  return {{"format", "hvaudit.session"},
          {"version", 1},
          {"overlap_size", overlap_size},
          {"seed", seed},
          {"roster", roster},
          {"items", items_json}};
}

AssignmentPlan AssignmentPlan::from_json(const json& j) {
  AssignmentPlan p;
  try {
    p.overlap_size = j.at("overlap_size").get<std::size_t>();
    p.seed = j.value("seed", std::uint64_t{0});
    p.roster = j.at("roster").get<std::vector<std::string>>();
    for (const auto& ij : j.at("items"))
      p.items.push_back({ij.at("pref_id").get<std::string>(), ij.at("overlap").get<bool>(),
                         ij.value("annotator", std::string{})});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("invalid session file: ") + e.what());
  }
  return p;
}

void AssignmentPlan::save(const std::filesystem::path& path) const { io::write_file(path, to_json().dump(2) + "\n"); }

AssignmentPlan AssignmentPlan::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(io::read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
}

AssignmentPlan create_session(const Corpus& c, const std::vector<std::string>& roster, std::size_t overlap_size,
                              std::uint64_t seed) {
  if (roster.empty()) throw Error(ErrorCode::kConfigInvalid, "annotator roster is empty");
  if (std::set<std::string>(roster.begin(), roster.end()).size() != roster.size())
    throw Error(ErrorCode::kConfigInvalid, "annotator roster has duplicate ids");
  if (overlap_size > c.size())
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("overlap size {} exceeds corpus size {}", overlap_size, c.size()));
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  AssignmentPlan plan;
  plan.overlap_size = overlap_size;
  plan.seed = seed;
  plan.roster = roster;
  for (std::size_t i = 0; i < order.size(); ++i) {
    PlanItem item{c.items[order[i]].pref_id, i < overlap_size, {}};
    if (!item.overlap) item.annotator = roster[(i - overlap_size) % roster.size()];
    plan.items.push_back(std::move(item));
  }
  return plan;
}

json AgreementStatus::to_json() const {
  json j = {{"status", state == State::kOk ? "ok" : state == State::kDegenerate ? "degenerate" : "insufficient"},
            {"units", units}};
  j["alpha"] = alpha ? json(*alpha) : json(nullptr);
  return j;
}

json GroundTruthExport::to_json(const Taxonomy& taxonomy) const {
  json ex = json::array();
  for (const auto& e : examples) ex.push_back(hvaudit::to_json(e, taxonomy));
  json un = json::array();
  for (const auto& u : unresolved) un.push_back({{"pref_id", u.pref_id}, {"reason", u.reason}});
  return {{"examples", ex}, {"unresolved", un}};
}

AnnotationStore::AnnotationStore(Corpus corpus, AssignmentPlan plan, const Taxonomy& taxonomy,
                                 std::filesystem::path event_log)
    : corpus_(std::move(corpus)), plan_(std::move(plan)), taxonomy_(taxonomy), log_path_(std::move(event_log)) {
  for (std::size_t i = 0; i < corpus_.items.size(); ++i) corpus_index_[corpus_.items[i].pref_id] = i;
  for (std::size_t i = 0; i < plan_.items.size(); ++i) {
    if (!corpus_index_.contains(plan_.items[i].pref_id))
      throw Error(ErrorCode::kMalformedRecord, "session item '" + plan_.items[i].pref_id + "' is not in the corpus");
    item_index_[plan_.items[i].pref_id] = i;
  }

  // Replay. A torn final line (crash mid-append, never acknowledged) is
  // dropped and the file truncated back to the last complete record.
  if (std::filesystem::exists(log_path_)) {
    const std::string bytes = io::read_file(log_path_);
    const std::size_t complete = bytes.empty() ? 0 : bytes.rfind('\n') + 1;
    if (complete != bytes.size()) {
      spdlog::warn("{}: dropping {} bytes of incomplete trailing record", log_path_.string(),
                   bytes.size() - complete);
      std::filesystem::resize_file(log_path_, complete);
    }
    std::size_t start = 0, line_no = 0;
    while (start < complete) {
      const std::size_t end = bytes.find('\n', start);
      const std::string_view line(bytes.data() + start, end - start);
      start = end + 1;
      ++line_no;
      if (line.empty()) continue;
      AnnotationEvent e;
      try {
        e = AnnotationEvent::from_json(json::parse(line));
      } catch (const json::parse_error& ex) {
        throw Error(ErrorCode::kMalformedRecord, fmt::format("{}:{}: {}", log_path_.string(), line_no, ex.what()));
      }
      if (!item_index_.contains(e.pref_id) || !taxonomy_.contains(e.label))
        throw Error(ErrorCode::kMalformedRecord,
                    fmt::format("{}:{}: event refers to unknown item or label", log_path_.string(), line_no));
      apply(e);
      next_event_id_ = std::max(next_event_id_, e.event_id + 1);
    }
  } else if (log_path_.has_parent_path()) {
    std::filesystem::create_directories(log_path_.parent_path());
  }
  log_ = std::fopen(log_path_.c_str(), "ab");
  if (log_ == nullptr) throw Error(ErrorCode::kIo, "cannot open event log " + log_path_.string());
}

AnnotationStore::~AnnotationStore() {
  if (log_ != nullptr) std::fclose(log_);
}

void AnnotationStore::apply(const AnnotationEvent& e) {
  if (e.kind == EventKind::kLabel) labels_[e.pref_id][e.annotator_id] = e.label;
  else adjudicated_[e.pref_id] = {e.annotator_id, e.label};
}

void AnnotationStore::append(const AnnotationEvent& e) {
  const std::string line = e.to_json().dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0 ||
      ::fsync(::fileno(log_)) != 0)
    throw Error(ErrorCode::kIo, "failed to append to event log " + log_path_.string());
}

void AnnotationStore::require_label(LabelId label) const {
  if (!taxonomy_.contains(label)) throw Error(ErrorCode::kUnknownLabel, fmt::format("unknown label id {}", label));
}

Progress AnnotationStore::progress_locked(const std::string& annotator) const {
  Progress p;
  for (const auto& item : plan_.items) {
    if (!plan_.assigned_to(item, annotator)) continue;
    ++p.assigned;
    auto it = labels_.find(item.pref_id);
    if (it != labels_.end() && it->second.contains(annotator)) ++p.labeled;
  }
  return p;
}

NextTask AnnotationStore::next_task(const std::string& annotator) const {
  std::shared_lock lock(mu_);
  if (std::find(plan_.roster.begin(), plan_.roster.end(), annotator) == plan_.roster.end())
    throw Error(ErrorCode::kUnknownAnnotator, "unknown annotator '" + annotator + "'");
  NextTask t;
  t.progress = progress_locked(annotator);
  for (std::size_t i = 0; i < plan_.items.size(); ++i) {
    const auto& item = plan_.items[i];
    if (!plan_.assigned_to(item, annotator)) continue;
    auto it = labels_.find(item.pref_id);
    if (it != labels_.end() && it->second.contains(annotator)) continue;
    t.item = corpus_.items[corpus_index_.at(item.pref_id)];
    t.index = i;
    break;
  }
  return t;
}

SubmitAck AnnotationStore::submit_label(const std::string& annotator, const std::string& pref_id, LabelId label) {
  std::unique_lock lock(mu_);
  require_label(label);
  auto it = item_index_.find(pref_id);
  if (it == item_index_.end() || !plan_.assigned_to(plan_.items[it->second], annotator))
    throw Error(ErrorCode::kNotAssigned, fmt::format("'{}' is not assigned to '{}'", pref_id, annotator));
  AnnotationEvent e;
  e.event_id = next_event_id_;
  e.annotator_id = annotator;
  e.pref_id = pref_id;
  e.label = label;
  e.kind = EventKind::kLabel;
  e.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch()).count();
  append(e);
  ++next_event_id_;
  apply(e);

  SubmitAck ack;
  ack.event_id = e.event_id;
  ack.progress = progress_locked(annotator);
  ack.overlap = plan_.items[it->second].overlap;
  if (ack.overlap) ack.agreement = agreement_locked();
  return ack;
}

ReliabilityMatrix AnnotationStore::overlap_matrix() const {
  std::vector<std::string> units;
  for (const auto& item : plan_.items) {
    if (!item.overlap) continue;
    auto it = labels_.find(item.pref_id);
    if (it == labels_.end()) continue;
    const bool complete = std::all_of(plan_.roster.begin(), plan_.roster.end(),
                                      [&](const std::string& a) { return it->second.contains(a); });
    if (complete) units.push_back(item.pref_id);
  }
  auto m = ReliabilityMatrix::with_shape(units, plan_.roster);
  for (std::size_t u = 0; u < units.size(); ++u)
    for (std::size_t a = 0; a < plan_.roster.size(); ++a) m.cells[u][a] = labels_.at(units[u]).at(plan_.roster[a]);
  return m;
}

AgreementStatus AnnotationStore::agreement_locked() const {
  AgreementStatus s;
  const auto m = overlap_matrix();
  s.units = m.units.size();
  try {
    s.alpha = krippendorff_alpha_nominal(m);
    s.state = AgreementStatus::State::kOk;
  } catch (const Error& e) {
    s.state = e.code() == ErrorCode::kDegenerateData ? AgreementStatus::State::kDegenerate
                                                     : AgreementStatus::State::kInsufficient;
  }
  return s;
}

AgreementStatus AnnotationStore::live_agreement() const {
  std::shared_lock lock(mu_);
  return agreement_locked();
}

std::vector<DisagreementItem> AnnotationStore::disagreements_locked() const {
  std::vector<DisagreementItem> out;
  for (const auto& [pref_id, by_annotator] : labels_) {
    if (by_annotator.size() < 2 || adjudicated_.contains(pref_id)) continue;
    if (!plan_.items[item_index_.at(pref_id)].overlap) continue;
    const LabelId first = by_annotator.begin()->second;
    const bool unanimous = std::all_of(by_annotator.begin(), by_annotator.end(),
                                       [first](const auto& kv) { return kv.second == first; });
    if (!unanimous) out.push_back({pref_id, by_annotator});
  }
  return out;
}

std::vector<DisagreementItem> AnnotationStore::disagreements() const {
  std::shared_lock lock(mu_);
  return disagreements_locked();
}

std::uint64_t AnnotationStore::adjudicate(const std::string& adjudicator, const std::string& pref_id, LabelId label,
                                          const std::string& note) {
  std::unique_lock lock(mu_);
  require_label(label);
  const auto queue = disagreements_locked();
  if (std::none_of(queue.begin(), queue.end(), [&](const DisagreementItem& d) { return d.pref_id == pref_id; }))
    throw Error(ErrorCode::kNotInDisagreement, "'" + pref_id + "' is not awaiting adjudication");
  AnnotationEvent e;
  e.event_id = next_event_id_;
  e.annotator_id = adjudicator;
  e.pref_id = pref_id;
  e.label = label;
  e.kind = EventKind::kAdjudication;
  e.note = note;
  e.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch()).count();
  append(e);
  ++next_event_id_;
  apply(e);
  return e.event_id;
}

GroundTruthExport AnnotationStore::export_ground_truth() const {
  std::shared_lock lock(mu_);
  GroundTruthExport out;
  std::string consensus_id;
  for (const auto& a : plan_.roster) consensus_id += (consensus_id.empty() ? "" : "+") + a;
  for (const auto& item : plan_.items) {
    if (auto adj = adjudicated_.find(item.pref_id); adj != adjudicated_.end()) {
      out.examples.push_back({item.pref_id, adj->second.second, adj->second.first, Provenance::kAdjudicated});
      continue;
    }
    auto it = labels_.find(item.pref_id);
    if (!item.overlap) {
      if (it != labels_.end() && it->second.contains(item.annotator))
        out.examples.push_back({item.pref_id, it->second.at(item.annotator), item.annotator, Provenance::kHuman});
      else
        out.unresolved.push_back({item.pref_id, "unlabeled"});
      continue;
    }
    if (it == labels_.end()) {
      out.unresolved.push_back({item.pref_id, "unlabeled"});
      continue;
    }
    std::set<LabelId> distinct;
    std::size_t coded = 0;
    for (const auto& a : plan_.roster)
      if (auto l = it->second.find(a); l != it->second.end()) {
        distinct.insert(l->second);
        ++coded;
      }
    if (distinct.size() > 1) out.unresolved.push_back({item.pref_id, "disagreement"});
    else if (coded < plan_.roster.size()) out.unresolved.push_back({item.pref_id, "incomplete"});
    else out.examples.push_back({item.pref_id, *distinct.begin(), consensus_id, Provenance::kHuman});
  }
  return out;
}

std::vector<AnnotationEvent> read_event_log(const std::filesystem::path& path) {
  std::vector<AnnotationEvent> out;
  for (const auto& j : io::read_jsonl(path)) out.push_back(AnnotationEvent::from_json(j));
  return out;
}

ReliabilityMatrix matrix_from_events(const std::vector<AnnotationEvent>& events, const AssignmentPlan* plan) {
  std::map<std::string, std::map<std::string, LabelId>> latest;
  std::set<std::string> annotators;
  for (const auto& e : events) {
    if (e.kind != EventKind::kLabel) continue;
    latest[e.pref_id][e.annotator_id] = e.label;
    annotators.insert(e.annotator_id);
  }
  std::set<std::string> overlap;
  if (plan != nullptr)
    for (const auto& item : plan->items)
      if (item.overlap) overlap.insert(item.pref_id);
  std::vector<std::string> units;
  for (const auto& [pref, _] : latest)
    if (plan == nullptr || overlap.contains(pref)) units.push_back(pref);
  auto m = ReliabilityMatrix::with_shape(units, {annotators.begin(), annotators.end()});
  for (std::size_t u = 0; u < m.units.size(); ++u)
    for (std::size_t a = 0; a < m.annotators.size(); ++a) {
      const auto& row = latest.at(m.units[u]);
      if (auto it = row.find(m.annotators[a]); it != row.end()) m.cells[u][a] = it->second;
    }
  return m;
}

}  // namespace hvaudit
