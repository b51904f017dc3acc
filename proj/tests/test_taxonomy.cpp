#include "doctest.h"

#include "hvaudit/error.hpp"
#include "hvaudit/taxonomy.hpp"

using namespace hvaudit;

TEST_CASE("canonical taxonomy order and size") {
  const auto& t = canonical_taxonomy();
  REQUIRE(t.size() == 7);
  CHECK(t.labels()[0].name == "Information Seeking");
  CHECK(t.labels()[1].name == "Wisdom/Knowledge");
  CHECK(t.labels()[2].name == "Duty/Accountability");
  CHECK(t.labels()[3].name == "Civility/Tolerance");
  CHECK(t.labels()[4].name == "Empathy/Helpfulness");
  CHECK(t.labels()[5].name == "Well-being/Peace");
  CHECK(t.labels()[6].name == "Justice/Human & Animal Rights");
  CHECK(validate_taxonomy(t).ok());
}

TEST_CASE("label_from_name round-trips every canonical name") {
  const auto& t = canonical_taxonomy();
  for (const auto& l : t.labels()) {
    CHECK(t.label_from_name(l.name).id == l.id);
    std::string upper = l.name;
    for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    CHECK(t.label_from_name("  " + upper + "\t").id == l.id);
  }
}

TEST_CASE("label_from_name aliases and failures") {
  const auto& t = canonical_taxonomy();
  CHECK(t.label_from_name("wisdom/knowledge").id == 1);
  CHECK(t.label_from_name("Wisdom & Knowledge").id == 1);
  CHECK(t.label_from_name("Empathy & Helpfulness").id == 4);
  try {
    t.label_from_name("Efficiency");
    FAIL("expected UnknownLabel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownLabel);
  }
}

TEST_CASE("validate_taxonomy reports violations") {
  SUBCASE("duplicate name") {
    Taxonomy t = canonical_taxonomy();
    t.mutable_labels()[3].name = t.labels()[2].name;
    t.mutable_labels()[3].aliases.clear();
    const auto r = validate_taxonomy(t);
    CHECK_FALSE(r.ok());
    CHECK(r.violations.size() == 1);
  }
  SUBCASE("non-contiguous ids") {
    Taxonomy t = canonical_taxonomy();
    t.mutable_labels()[6].id = 7;
    const auto r = validate_taxonomy(t);
    CHECK_FALSE(r.ok());
  }
  SUBCASE("wrong count, missing description, empty sub-values") {
    Taxonomy t = canonical_taxonomy();
    t.mutable_labels().pop_back();
    CHECK_FALSE(validate_taxonomy(t).ok());
    Taxonomy u = canonical_taxonomy();
    u.mutable_labels()[0].description.clear();
    u.mutable_labels()[1].sub_values.clear();
    CHECK(validate_taxonomy(u).violations.size() == 2);
  }
  SUBCASE("alias collision") {
    Taxonomy t = canonical_taxonomy();
    t.mutable_labels()[5].aliases.push_back("wisdom & knowledge");
    CHECK_FALSE(validate_taxonomy(t).ok());
  }
}

TEST_CASE("taxonomy json round trip keeps fingerprint") {
  const auto& t = canonical_taxonomy();
  const Taxonomy back = Taxonomy::from_json(t.to_json());
  CHECK(back.fingerprint() == t.fingerprint());
  CHECK(back.labels()[4].sub_values == t.labels()[4].sub_values);
  Taxonomy renamed = t;
  renamed.mutable_labels()[0].name = "Info";
  CHECK(renamed.fingerprint() != t.fingerprint());
}
