#include "doctest.h"

#include <fstream>
#include <set>

#include "hvaudit/annotation.hpp"
#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"
#include "support/session.hpp"
#include "support/workspace.hpp"

using namespace hvaudit;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("assignment plan shape") {
  const auto c = session::corpus(10);
  const auto plan = create_session(c, {"ann1", "ann2"}, 4, 3);
  CHECK(plan.items.size() == 10);
  CHECK(plan.assigned_count("ann1") == 7);
  CHECK(plan.assigned_count("ann2") == 7);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < plan.items.size(); ++i) {
    ids.insert(plan.items[i].pref_id);
    CHECK(plan.items[i].overlap == (i < 4));
    if (!plan.items[i].overlap) CHECK(plan.items[i].annotator == (i % 2 == 0 ? "ann1" : "ann2"));
  }
  CHECK(ids.size() == 10);

  const auto full = create_session(c, {"a", "b", "c"}, 10, 3);
  CHECK(full.assigned_count("a") == 10);
  CHECK(full.assigned_count("c") == 10);

  const auto big = create_session(session::corpus(6501), {"r1", "r2", "r3", "r4", "r5"}, 200, 1);
  std::size_t total = 0;
  for (const auto& a : big.roster) total += big.assigned_count(a) - 200;
  CHECK(total == 6301);
  CHECK(big.assigned_count("r1") == 200 + 1261);
  CHECK(big.assigned_count("r5") == 200 + 1260);

  CHECK(code_of([&] { create_session(c, {"a"}, 11, 3); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([&] { create_session(c, {}, 2, 3); }) == ErrorCode::kConfigInvalid);
  CHECK(create_session(c, {"a", "b"}, 4, 3).items[0].pref_id == plan.items[0].pref_id);

  const auto dir = workspace::temp_dir("plan");
  plan.save(dir / "plan.json");
  const auto back = AssignmentPlan::load(dir / "plan.json");
  CHECK(back.to_json() == plan.to_json());
  std::filesystem::remove_all(dir);
}

TEST_CASE("tasks, submissions and errors") {
  const auto dir = workspace::temp_dir("store");
  const auto c = session::corpus(10);
  const auto plan = create_session(c, {"ann1", "ann2"}, 4, 3);
  AnnotationStore store(c, plan, canonical_taxonomy(), dir / "events.jsonl");

  auto t = store.next_task("ann1");
  REQUIRE(t.item);
  CHECK(t.item->pref_id == plan.items[0].pref_id);
  CHECK(t.progress.labeled == 0);
  CHECK(t.progress.assigned == 7);
  CHECK(code_of([&] { store.next_task("nobody"); }) == ErrorCode::kUnknownAnnotator);

  const auto ack = store.submit_label("ann1", t.item->pref_id, 2);
  CHECK(ack.event_id == 1);
  CHECK(ack.progress.labeled == 1);
  CHECK(ack.overlap);
  REQUIRE(ack.agreement);
  CHECK(ack.agreement->state == AgreementStatus::State::kInsufficient);

  CHECK(code_of([&] { store.submit_label("ann1", t.item->pref_id, 9); }) == ErrorCode::kUnknownLabel);
  CHECK(code_of([&] { store.submit_label("ann1", plan.items[5].pref_id, 0); }) == ErrorCode::kNotAssigned);
  CHECK(code_of([&] { store.submit_label("ann1", "missing", 0); }) == ErrorCode::kNotAssigned);

  // next_task never hands back labeled items; walking the queue visits each once.
  std::set<std::string> seen{t.item->pref_id};
  while (true) {
    const auto next = store.next_task("ann1");
    if (!next.item) break;
    CHECK_FALSE(seen.contains(next.item->pref_id));
    seen.insert(next.item->pref_id);
    store.submit_label("ann1", next.item->pref_id, 1);
  }
  CHECK(seen.size() == 7);
  CHECK(store.next_task("ann1").progress.labeled == 7);

  // Resubmission appends and the latest label wins.
  const auto again = store.submit_label("ann1", plan.items[0].pref_id, 4);
  CHECK(again.progress.labeled == 7);
  CHECK(read_event_log(dir / "events.jsonl").size() == 8);
  std::filesystem::remove_all(dir);
}

TEST_CASE("live agreement tracks completed overlap units") {
  const auto dir = workspace::temp_dir("live");
  const auto c = session::corpus(8);
  const auto plan = create_session(c, {"a", "b"}, 4, 5);
  const auto ov = session::overlap_ids(plan);
  AnnotationStore store(c, plan, canonical_taxonomy(), dir / "events.jsonl");
  CHECK(store.live_agreement().state == AgreementStatus::State::kInsufficient);
  CHECK(store.live_agreement().units == 0);

  // The four-unit worked matrix: (0,0), (1,1), (0,1), (1,1).
  const int codes[4][2] = {{0, 0}, {1, 1}, {0, 1}, {1, 1}};
  for (int u = 0; u < 4; ++u) store.submit_label("a", ov[u], codes[u][0]);
  CHECK(store.live_agreement().units == 0);
  for (int u = 0; u < 4; ++u) store.submit_label("b", ov[u], codes[u][1]);
  const auto s = store.live_agreement();
  CHECK(s.state == AgreementStatus::State::kOk);
  CHECK(s.units == 4);
  CHECK(*s.alpha == doctest::Approx(16.0 / 30.0).epsilon(1e-12));

  const auto queue = store.disagreements();
  REQUIRE(queue.size() == 1);
  CHECK(queue[0].pref_id == ov[2]);
  CHECK(queue[0].labels.at("a") == 0);
  CHECK(queue[0].labels.at("b") == 1);

  // Unanimous re-coding drives alpha to 1.
  store.submit_label("b", ov[2], 0);
  CHECK(*store.live_agreement().alpha == 1.0);
  CHECK(store.disagreements().empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("adjudication and export") {
  const auto dir = workspace::temp_dir("adjudicate");
  const auto c = session::corpus(6);
  const auto plan = create_session(c, {"a", "b"}, 2, 2);
  const auto ov = session::overlap_ids(plan);
  AnnotationStore store(c, plan, canonical_taxonomy(), dir / "events.jsonl");
  store.submit_label("a", ov[0], 3);
  store.submit_label("b", ov[0], 3);
  store.submit_label("a", ov[1], 5);
  store.submit_label("b", ov[1], 6);

  CHECK(code_of([&] { store.adjudicate("lead", ov[0], 3); }) == ErrorCode::kNotInDisagreement);
  auto ex = store.export_ground_truth();
  CHECK(ex.examples.size() == 1);
  CHECK(ex.examples[0].annotator_id == "a+b");
  CHECK(ex.unresolved.size() == 5);
  std::size_t disagreements = 0;
  for (const auto& u : ex.unresolved) disagreements += u.reason == "disagreement";
  CHECK(disagreements == 1);

  CHECK(code_of([&] { store.adjudicate("lead", ov[1], 12); }) == ErrorCode::kUnknownLabel);
  store.adjudicate("lead", ov[1], 6, "discussed");
  CHECK(store.disagreements().empty());
  CHECK(code_of([&] { store.adjudicate("lead", ov[1], 5); }) == ErrorCode::kNotInDisagreement);

  for (const auto& item : plan.items)
    if (!item.overlap) store.submit_label(item.annotator, item.pref_id, 0);
  ex = store.export_ground_truth();
  CHECK(ex.examples.size() == 6);
  CHECK(ex.unresolved.empty());
  for (const auto& e : ex.examples)
    if (e.pref_id == ov[1]) {
      CHECK(e.label == 6);
      CHECK(e.provenance == Provenance::kAdjudicated);
      CHECK(e.annotator_id == "lead");
    }
  std::filesystem::remove_all(dir);
}

TEST_CASE("replay reproduces export and survives a torn tail") {
  const auto dir = workspace::temp_dir("replay");
  const auto c = session::corpus(12);
  const auto plan = create_session(c, {"a", "b", "c"}, 3, 8);
  const auto log = dir / "events.jsonl";
  nlohmann::json before;
  {
    AnnotationStore store(c, plan, canonical_taxonomy(), log);
    for (const auto& name : plan.roster)
      while (auto t = store.next_task(name).item) store.submit_label(name, t->pref_id, static_cast<LabelId>(t->pref_id.size() % 7));
    before = store.export_ground_truth().to_json(canonical_taxonomy());
  }
  const auto intact = io::read_file(log);
  {
    std::ofstream out(log, std::ios::app | std::ios::binary);
    out << R"({"event_id":99,"annotator_id":"a","pref_id":")";
  }
  {
    AnnotationStore store(c, plan, canonical_taxonomy(), log);
    CHECK(store.export_ground_truth().to_json(canonical_taxonomy()) == before);
    CHECK(io::read_file(log) == intact);
    const auto ack = store.submit_label("a", plan.items[0].pref_id, 1);
    CHECK(ack.event_id == read_event_log(log).size());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("matrix from an event log") {
  std::vector<AnnotationEvent> events;
  auto add = [&](const char* who, const char* pref, LabelId l) {
    AnnotationEvent e;
    e.event_id = events.size() + 1;
    e.annotator_id = who;
    e.pref_id = pref;
    e.label = l;
    events.push_back(e);
  };
  add("a", "u1", 0);
  add("b", "u1", 0);
  add("a", "u2", 1);
  add("b", "u2", 1);
  add("a", "u3", 0);
  add("b", "u3", 1);
  add("a", "u4", 1);
  add("b", "u4", 0);
  add("b", "u4", 1);  // latest wins
  const auto m = matrix_from_events(events);
  CHECK(m.units.size() == 4);
  CHECK(krippendorff_alpha_nominal(m) == doctest::Approx(16.0 / 30.0));
  for (const auto& e : events) CHECK(AnnotationEvent::from_json(e.to_json()).to_json() == e.to_json());
}
