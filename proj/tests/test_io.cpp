#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "partacc/io.hpp"

using namespace partacc;

namespace {

void expect_parse_error(const std::string& text, auto reader) {
  std::istringstream in(text);
  try {
    reader(in);
    FAIL() << "accepted: " << text;
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::parse_error) << e.what();
  }
}

}  // namespace

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(io::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(io::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(io::fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(io::hash_hex("a"), "af63dc4c8601ec8c");
}

TEST(Seeds, FormatAndParse) {
  EXPECT_EQ(io::format_seed({20211, 3}), "20211:3");
  EXPECT_EQ(io::parse_seed("20211:3"), (RngSeed{20211, 3}));
  EXPECT_EQ(io::parse_seed("7"), (RngSeed{7, 0}));
  EXPECT_THROW(io::parse_seed("x:1"), error);
}

TEST(TrainingCsv, RoundTrip) {
  TrainingRecord rec;
  rec.spec = {3, 200, 50};
  rec.seed = {99, 4};
  rec.repeats = {RepeatResult{0, 1234, 0.41234567890123, 0.815}, RepeatResult{1, 50000, 0.1 + 0.2, 2.0 / 3.0}};
  const auto rows = io::to_rows(rec);
  std::ostringstream out;
  io::write_training_csv(out, rows);
  std::istringstream in(out.str());
  const auto back = io::read_training_csv(in);
  EXPECT_EQ(back, rows);

  const auto records = io::records_from_rows(back);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].spec, rec.spec);
  EXPECT_EQ(records[0].seed, rec.seed);
  ASSERT_EQ(records[0].repeats.size(), 2u);
  EXPECT_EQ(records[0].repeats[1].accuracy, 2.0 / 3.0);
  EXPECT_EQ(records[0].training_accuracy(), rec.training_accuracy());
}

TEST(TrainingCsv, GroupsBySpecAndSeed) {
  std::vector<io::TrainingRow> rows = {
      {{2, 10, 10}, 0, {1, 0}, 5, 0.5, 0.6},
      {{2, 20, 10}, 0, {1, 0}, 5, 0.5, 0.7},
      {{2, 10, 10}, 1, {1, 0}, 5, 0.5, 0.8},
      {{2, 10, 10}, 0, {2, 0}, 5, 0.5, 0.9},
  };
  const auto records = io::records_from_rows(rows);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].repeats.size(), 2u);
  EXPECT_DOUBLE_EQ(records[0].training_accuracy(), 0.7);
}

TEST(TrainingCsv, Malformed) {
  auto reader = [](std::istream& in) { io::read_training_csv(in); };
  expect_parse_error("", reader);
  expect_parse_error("d,N,L\n2,10,10\n", reader);
  expect_parse_error(std::string(io::training_header) + "\n2,10,10,0,1:0,5,0.5\n", reader);
  expect_parse_error(std::string(io::training_header) + "\n2,10,ten,0,1:0,5,0.5,0.7\n", reader);
  expect_parse_error(std::string(io::training_header) + "\n2,10,10,0,1:0,5,0.5,0.7x\n", reader);
}

TEST(OutcomeCsv, RoundTrip) {
  const SeparationOutcome outcome({{1.0, 4, true}, {0.5, 3, false}, {0.0, 2, false}});
  std::ostringstream out;
  io::write_outcome_csv(out, outcome);
  EXPECT_EQ(out.str(), "trial,gamma,distinct_cells,complete\n0,1,4,1\n1,0.5,3,0\n2,0,2,0\n");
  std::istringstream in(out.str());
  EXPECT_TRUE(io::read_outcome_csv(in) == outcome);

  auto reader = [](std::istream& s) { io::read_outcome_csv(s); };
  expect_parse_error("trial,gamma,distinct_cells,complete\n1,1,4,1\n", reader);
  expect_parse_error("trial,gamma,distinct_cells,complete\n0,1,4,2\n", reader);
}

TEST(OutcomeSummary, Fields) {
  const SeparationOutcome outcome({{1.0, 4, true}, {0.5, 3, false}});
  const auto j = io::outcome_summary(outcome);
  EXPECT_EQ(j["trials"], 2);
  EXPECT_EQ(j["complete_fraction"], 0.5);
  EXPECT_EQ(j["mean_gamma"], 0.75);
}

TEST(Manifest, JsonRoundTripAndHash) {
  io::RunManifest m;
  m.command = "estimate";
  m.arguments = {"--seed", "1", "estimate", "-d", "3"};
  m.seed = 1;
  m.artifact_version = "0.3.0";
  m.model_version = "table3-2021.1";
  m.timestamp = "2021-01-01T00:00:00Z";
  m.stdout_hash = io::hash_hex("x");
  m.output_hashes = {{"estimate.json", io::hash_hex("y")}};

  const auto back = io::RunManifest::from_json(io::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.to_json(), m.to_json());

  auto later = m;
  later.timestamp = "2030-06-01T12:00:00Z";
  EXPECT_EQ(later.reproducibility_hash(), m.reproducibility_hash());
  later.output_hashes["estimate.json"] = io::hash_hex("z");
  EXPECT_NE(later.reproducibility_hash(), m.reproducibility_hash());

  try {
    io::RunManifest::from_json(io::json{{"command", "x"}});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::parse_error);
  }
}

TEST(FitReportJson, Fields) {
  FitReport r;
  r.coefficients = {2, 0.1, 0.6, 8.0};
  r.r_squared = 0.99;
  r.residuals.resize(5);
  r.excluded.push_back({3, {2, 10, 10}, 1.0, "saturated"});
  const auto j = io::to_json(r);
  EXPECT_EQ(j["samples_used"], 5);
  EXPECT_EQ(j["excluded"][0]["reason"], "saturated");
  EXPECT_EQ(j["x"], 0.1);
}
