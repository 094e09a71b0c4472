#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <covnet/dataset.hpp>
#include <covnet/rng.hpp>

using covnet::DataFormat;
using covnet::Dataset;
using covnet::Error;
using covnet::ErrorKind;
using covnet::RawRecord;

namespace {

const std::string kSampleFile = std::string(COVNET_DATA_DIR) + "/sample_intel.jsonl";

Dataset tiny_abc() {
  return covnet::make_dataset({{"d_0", {"A"}}, {"d_1", {"B"}}, {"d_2", {"C"}}});
}

}  // namespace

TEST_CASE("sample file loads with 20 records and 19 actors") {
  Dataset ds = covnet::load_dataset(kSampleFile, DataFormat::jsonl);
  REQUIRE(ds.record_count() == 20);
  REQUIRE(ds.node_count() == 19);
  CHECK(ds.records.front().id == "d_0");
  CHECK(ds.records.back().id == "d_19");
  CHECK(covnet::validate(ds).empty());
  CHECK(std::is_sorted(ds.roster.begin(), ds.roster.end()));

  // d_5 = {Ahmed Alghamdi, Hamza Alghamdi}
  auto row = covnet::incidence_row(ds, 5);
  CHECK(std::accumulate(row.begin(), row.end(), 0) == 2);
  CHECK(row[*ds.node_index("Ahmed Alghamdi")] == 1);
  CHECK(row[*ds.node_index("Hamza Alghamdi")] == 1);
}

TEST_CASE("minimal single-record dataset") {
  Dataset ds = covnet::parse_jsonl(R"({"id":"d_0","participants":["A"]})");
  REQUIRE(ds.record_count() == 1);
  REQUIRE(ds.node_count() == 1);
  CHECK(ds.incidence == std::vector<std::uint8_t>{1});
}

TEST_CASE("duplicate participants collapse to a set") {
  Dataset ds = covnet::parse_jsonl(R"({"id":"d_0","participants":["A","A"]})");
  REQUIRE(ds.records[0].participants.size() == 1);
  CHECK(ds.roster == std::vector<std::string>{"A"});
}

TEST_CASE("incidence rows") {
  Dataset ds = tiny_abc();
  CHECK(covnet::incidence_row(ds, 0) == std::vector<std::uint8_t>{1, 0, 0});

  Dataset full = covnet::make_dataset({{"d_0", {"A", "B", "C"}}});
  CHECK(covnet::incidence_row(full, 0) == std::vector<std::uint8_t>{1, 1, 1});

  CHECK_THROWS_AS(covnet::incidence_row(ds, 3), Error);
}

TEST_CASE("incidence row sums equal participant counts") {
  auto rng = covnet::make_rng(11);
  Dataset ds = covnet::load_dataset(kSampleFile, DataFormat::jsonl);
  for (std::size_t i = 0; i < ds.record_count(); ++i) {
    auto row = covnet::incidence_row(ds, i);
    CHECK(std::accumulate(row.begin(), row.end(), std::size_t{0}) ==
          ds.records[i].participants.size());
  }
}

TEST_CASE("roster ordering is lexicographic and input-order independent") {
  Dataset a = covnet::parse_jsonl(
      "{\"id\":\"d_0\",\"participants\":[\"zeta\",\"alpha\"]}\n"
      "{\"id\":\"d_1\",\"participants\":[\"mid\",\"zeta\"]}\n");
  Dataset b = covnet::parse_jsonl(
      "{\"id\":\"d_0\",\"participants\":[\"alpha\",\"zeta\"]}\n"
      "{\"id\":\"d_1\",\"participants\":[\"zeta\",\"mid\"]}\n");
  CHECK(a == b);
  CHECK(a.roster == std::vector<std::string>{"alpha", "mid", "zeta"});
}

TEST_CASE("parse errors carry line numbers") {
  using Catch::Matchers::ContainsSubstring;
  CHECK_THROWS_WITH(covnet::parse_jsonl("{\"id\":\"d_0\",\"participants\":[\"A\"]}\nnot json\n"),
                    ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(covnet::parse_jsonl("[1,2]\n"), ContainsSubstring("line 1"));
}

TEST_CASE("load rejections") {
  CHECK_THROWS_AS(covnet::parse_jsonl(""), Error);
  CHECK_THROWS_AS(covnet::parse_jsonl("# only comments\n"), Error);
  CHECK_THROWS_AS(covnet::parse_jsonl(R"({"id":"d_0","participants":[]})"), Error);
  CHECK_THROWS_AS(covnet::parse_jsonl("{\"id\":\"d_0\",\"participants\":[\"A\"]}\n"
                                      "{\"id\":\"d_0\",\"participants\":[\"B\"]}\n"),
                  Error);
  CHECK_THROWS_AS(covnet::parse_jsonl(R"({"id":"d_0","participants":["?"]})"), Error);
  CHECK_THROWS_AS(covnet::parse_jsonl(R"({"id":"d_0","participants":[""]})"), Error);
  CHECK_THROWS_AS(covnet::parse_jsonl(R"({"id":"","participants":["A"]})"), Error);
}

TEST_CASE("roster header must match the observed node set") {
  // matching header is fine
  Dataset ds = covnet::parse_jsonl(
      "{\"roster\":[\"A\",\"B\"]}\n"
      "{\"id\":\"d_0\",\"participants\":[\"A\",\"B\"]}\n");
  CHECK(ds.node_count() == 2);

  using Catch::Matchers::ContainsSubstring;
  // declared but never observed: rejected, names the node
  CHECK_THROWS_WITH(covnet::parse_jsonl("{\"roster\":[\"A\",\"B\",\"ghost\"]}\n"
                                        "{\"id\":\"d_0\",\"participants\":[\"A\",\"B\"]}\n"),
                    ContainsSubstring("ghost"));
  // observed but not declared
  CHECK_THROWS_AS(covnet::parse_jsonl("{\"roster\":[\"A\"]}\n"
                                      "{\"id\":\"d_0\",\"participants\":[\"A\",\"B\"]}\n"),
                  Error);
}

TEST_CASE("csv input") {
  const std::string text =
      "id,participant\n"
      "d_0,A\n"
      "d_0,B\n"
      "d_1,B\n"
      "d_0,A\n";
  Dataset ds = covnet::parse_csv(text);
  REQUIRE(ds.record_count() == 2);
  CHECK(ds.records[0].id == "d_0");
  CHECK(ds.records[0].participants.size() == 2);
  CHECK(ds.records[1].participants.size() == 1);

  Dataset quoted = covnet::parse_csv("id,participant\nd_0,\"Last, First\"\nd_0,B\n");
  CHECK(quoted.roster == std::vector<std::string>{"B", "Last, First"});

  CHECK_THROWS_AS(covnet::parse_csv("nodes,stuff\nd_0,A\n"), Error);
  CHECK_THROWS_AS(covnet::parse_csv(""), Error);
}

TEST_CASE("jsonl and csv inputs produce the same dataset") {
  Dataset a = covnet::parse_jsonl(
      "{\"id\":\"d_0\",\"participants\":[\"A\",\"B\"]}\n"
      "{\"id\":\"d_1\",\"participants\":[\"B\",\"C\"]}\n");
  Dataset b = covnet::parse_csv("id,participant\nd_0,A\nd_0,B\nd_1,C\nd_1,B\n");
  CHECK(a == b);
}

TEST_CASE("canonical serialization round-trips exactly") {
  Dataset ds = covnet::load_dataset(kSampleFile, DataFormat::jsonl);
  const std::string text = covnet::serialize_canonical(ds);
  Dataset back = covnet::parse_jsonl(text);
  CHECK(back == ds);
  CHECK(covnet::serialize_canonical(back) == text);
}

TEST_CASE("canonical serialization golden bytes") {
  Dataset ds = covnet::make_dataset({{"d_0", {"B", "A"}}, {"d_1", {"B"}}});
  CHECK(covnet::serialize_canonical(ds) ==
        "{\"roster\":[\"A\",\"B\"]}\n"
        "{\"id\":\"d_0\",\"participants\":[\"A\",\"B\"]}\n"
        "{\"id\":\"d_1\",\"participants\":[\"B\"]}\n");
}

TEST_CASE("validate reports coordinates of breaches") {
  Dataset ds = tiny_abc();
  REQUIRE(covnet::validate(ds).empty());

  SECTION("flipped incidence bit") {
    ds.incidence[0 * 3 + 1] = 1;
    auto violations = covnet::validate(ds);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].record == 0);
    CHECK(violations[0].node == 1);
  }

  SECTION("unobserved roster node") {
    Dataset broken = ds;
    broken.records[2].participants = {0};  // node C no longer appears anywhere
    broken.incidence[2 * 3 + 2] = 0;
    broken.incidence[2 * 3 + 0] = 1;
    auto violations = covnet::validate(broken);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].node == 2);
    CHECK(violations[0].message.find("C") != std::string::npos);
  }

  SECTION("unsorted roster") {
    std::swap(ds.roster[0], ds.roster[1]);
    CHECK_FALSE(covnet::validate(ds).empty());
  }
}

TEST_CASE("singleton records are legal but linted") {
  Dataset ds = covnet::parse_jsonl(
      "{\"id\":\"d_0\",\"participants\":[\"A\"]}\n"
      "{\"id\":\"d_1\",\"participants\":[\"A\",\"B\"]}\n");
  CHECK(covnet::validate(ds).empty());
  auto warnings = covnet::lint_warnings(ds);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("d_0") != std::string::npos);
}
