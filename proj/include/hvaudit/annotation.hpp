#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "hvaudit/agreement.hpp"
#include "hvaudit/corpus.hpp"
#include "hvaudit/taxonomy.hpp"

namespace hvaudit {

enum class EventKind { kLabel, kAdjudication };

struct AnnotationEvent {
  std::uint64_t event_id = 0;
  std::string annotator_id;
  std::string pref_id;
  LabelId label = 0;
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::kLabel;
  std::string note;

  nlohmann::json to_json() const;
  static AnnotationEvent from_json(const nlohmann::json& j);
};

struct PlanItem {
  std::string pref_id;
  bool overlap = false;
  std::string annotator;  // owner of a non-overlap item
};

// Items in assignment order: the overlap batch first, then the remainder
// dealt round-robin across the roster.
struct AssignmentPlan {
  static constexpr std::size_t kDefaultOverlap = 200;

  std::size_t overlap_size = kDefaultOverlap;
  std::uint64_t seed = 0;
  std::vector<std::string> roster;
  std::vector<PlanItem> items;

  bool assigned_to(const PlanItem& item, const std::string& annotator) const {
    return item.overlap ? std::find(roster.begin(), roster.end(), annotator) != roster.end()
                        : item.annotator == annotator;
  }
  std::size_t assigned_count(const std::string& annotator) const;

  nlohmann::json to_json() const;
  static AssignmentPlan from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static AssignmentPlan load(const std::filesystem::path& path);
};

AssignmentPlan create_session(const Corpus& c, const std::vector<std::string>& roster, std::size_t overlap_size,
                              std::uint64_t seed);

struct Progress {
  std::size_t labeled = 0;
  std::size_t assigned = 0;
};

struct AgreementStatus {
  enum class State { kOk, kInsufficient, kDegenerate };
  State state = State::kInsufficient;
  std::optional<double> alpha;
  std::size_t units = 0;

  nlohmann::json to_json() const;
};

struct NextTask {
  std::optional<Preference> item;  // empty when done
  std::size_t index = 0;
  Progress progress;
};

struct SubmitAck {
  std::uint64_t event_id = 0;
  Progress progress;
  bool overlap = false;
  std::optional<AgreementStatus> agreement;  // present for overlap items
};

struct DisagreementItem {
  std::string pref_id;
  std::map<std::string, LabelId> labels;  // annotator -> latest label
};

struct GroundTruthExport {
  struct Unresolved {
    std::string pref_id;
    std::string reason;  // unlabeled | incomplete | disagreement
  };
  std::vector<LabeledExample> examples;
  std::vector<Unresolved> unresolved;

  nlohmann::json to_json(const Taxonomy& taxonomy) const;
};

// Replayable annotation state over an append-only event log. Every mutation
// is appended and flushed to disk before it is acknowledged.
class AnnotationStore {
 public:
  AnnotationStore(Corpus corpus, AssignmentPlan plan, const Taxonomy& taxonomy,
                  std::filesystem::path event_log);
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  const AssignmentPlan& plan() const { return plan_; }
  const Taxonomy& taxonomy() const { return taxonomy_; }

  NextTask next_task(const std::string& annotator) const;
  SubmitAck submit_label(const std::string& annotator, const std::string& pref_id, LabelId label);
  AgreementStatus live_agreement() const;
  std::vector<DisagreementItem> disagreements() const;
  std::uint64_t adjudicate(const std::string& adjudicator, const std::string& pref_id, LabelId label,
                           const std::string& note = {});
  GroundTruthExport export_ground_truth() const;

  // Overlap units coded by every roster member.
  ReliabilityMatrix overlap_matrix() const;

 private:
  void apply(const AnnotationEvent& e);
  void append(const AnnotationEvent& e);
  void require_label(LabelId label) const;
  Progress progress_locked(const std::string& annotator) const;
  AgreementStatus agreement_locked() const;
  std::vector<DisagreementItem> disagreements_locked() const;

  Corpus corpus_;
  AssignmentPlan plan_;
  const Taxonomy& taxonomy_;
  std::filesystem::path log_path_;
  std::FILE* log_ = nullptr;

  std::map<std::string, std::size_t> item_index_;   // pref_id -> plan position
  std::map<std::string, std::size_t> corpus_index_; // pref_id -> corpus position
  std::map<std::string, std::map<std::string, LabelId>> labels_;  // pref -> annotator -> label
  std::map<std::string, std::pair<std::string, LabelId>> adjudicated_;
  std::uint64_t next_event_id_ = 1;
  mutable std::shared_mutex mu_;
};

// Offline agreement on an event log: latest label per (annotator, pref).
// With a plan, only overlap units are included.
ReliabilityMatrix matrix_from_events(const std::vector<AnnotationEvent>& events,
                                     const AssignmentPlan* plan = nullptr);
std::vector<AnnotationEvent> read_event_log(const std::filesystem::path& path);

}  // namespace hvaudit
