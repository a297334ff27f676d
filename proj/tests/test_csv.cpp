#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>

#include "catch2/catch_amalgamated.hpp"

#include "fsir/csv.hpp"
#include "fsir/simulation.hpp"

using namespace fsir;

namespace {

std::string temp_csv(const std::string& tag, const std::string& content) {
  const std::string path = "/tmp/fsir_csv_" + tag + ".csv";
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("long-format rows group into time-sorted subjects", "[csv]") {
  const std::string path = temp_csv("basic",
                                    "subject_id,time,value,response\n"
                                    "a,0.9,1.5,3.0\n"
                                    "b,0.25,-0.4,2.5\n"
                                    "a,0.1,0.7,3.0\n"
                                    "\n"
                                    "a,0.5,0.2,3.0\n");
  const LongitudinalDataset data = ingest_csv(path, 0.0, 1.0);
  REQUIRE(data.n() == 2);
  REQUIRE(data.t_min == 0.0);
  REQUIRE(data.t_max == 1.0);
  // subjects keep first-appearance order
  REQUIRE(data.subjects[0].id == "a");
  REQUIRE(data.subjects[1].id == "b");
  REQUIRE(data.subjects[0].times.size() == 3);
  REQUIRE(data.subjects[1].times.size() == 1);
  // rows within a subject are sorted by time
  REQUIRE(data.subjects[0].times[0] == 0.1);
  REQUIRE(data.subjects[0].times[1] == 0.5);
  REQUIRE(data.subjects[0].times[2] == 0.9);
  REQUIRE(data.subjects[0].values[0] == 0.7);
  REQUIRE(data.subjects[0].values[2] == 1.5);
  REQUIRE(data.subjects[0].response == 3.0);
  REQUIRE(data.subjects[1].response == 2.5);
  REQUIRE(data.total_observations() == 4);
}

TEST_CASE("whitespace around fields is tolerated", "[csv]") {
  const std::string path = temp_csv("spaces",
                                    " subject_id , time , value , response \n"
                                    " 1 , 0.25 , 1.5 , 3.0 \r\n"
                                    "1,0.75,2.5,3.0\n");
  const LongitudinalDataset data = ingest_csv(path, 0.0, 1.0);
  REQUIRE(data.n() == 1);
  REQUIRE(data.subjects[0].id == "1");
  REQUIRE(data.subjects[0].times[0] == 0.25);
  REQUIRE(data.subjects[0].values[0] == 1.5);
}

TEST_CASE("conflicting responses for one subject are rejected with the line",
          "[csv]") {
  const std::string path = temp_csv("conflict",
                                    "subject_id,time,value,response\n"
                                    "1,0.1,0.5,5.0\n"
                                    "2,0.2,0.6,1.0\n"
                                    "1,0.3,0.7,5.1\n");
  try {
    ingest_csv(path, 0.0, 1.0);
    FAIL("expected InconsistentResponse");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::InconsistentResponse);
    REQUIRE(std::string(e.what()).find("line 4") != std::string::npos);
    REQUIRE(std::string(e.what()).find("'1'") != std::string::npos);
  }
}

TEST_CASE("malformed inputs raise parse errors naming the line", "[csv]") {
  const auto expect_parse_error = [](const std::string& path, const std::string& needle) {
    try {
      ingest_csv(path, 0.0, 1.0);
      FAIL("expected ParseError for " + path);
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::ParseError);
      REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  expect_parse_error(temp_csv("badfloat",
                              "subject_id,time,value,response\n"
                              "1,0.1,oops,3.0\n"),
                     "line 2");
  expect_parse_error(temp_csv("fields",
                              "subject_id,time,value,response\n"
                              "1,0.1,0.5,3.0\n"
                              "1,0.2,0.5\n"),
                     "line 3");
  expect_parse_error(temp_csv("header", "id,t,x,y\n1,0.1,0.5,3.0\n"), "header");
  expect_parse_error(temp_csv("empty", ""), "empty");
  expect_parse_error(temp_csv("headeronly", "subject_id,time,value,response\n"),
                     "no data rows");
  expect_parse_error(temp_csv("blankid",
                              "subject_id,time,value,response\n"
                              " ,0.1,0.5,3.0\n"),
                     "line 2");
  // trailing garbage after a number is not silently ignored
  expect_parse_error(temp_csv("suffix",
                              "subject_id,time,value,response\n"
                              "1,0.1,0.5x,3.0\n"),
                     "line 2");
}

TEST_CASE("times outside the declared interval are rejected", "[csv]") {
  const std::string path = temp_csv("interval",
                                    "subject_id,time,value,response\n"
                                    "1,0.5,0.5,3.0\n"
                                    "1,1.5,0.6,3.0\n");
  REQUIRE_THROWS_MATCHES(ingest_csv(path, 0.0, 1.0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::OutOfInterval &&
                                  std::string(e.what()).find("line 3") != std::string::npos;
                         }));
  REQUIRE_NOTHROW(ingest_csv(path, 0.0, 2.0));
}

TEST_CASE("a write-read round trip preserves every bit", "[csv]") {
  SimConfig sc;
  sc.n = 25;
  sc.seed = 1001;
  const TrajectorySet paths = simulate_brownian(sc);
  const Eigen::VectorXd y = generate_responses(paths, default_true_model(paths.grid), sc);
  const LongitudinalDataset original = sparsify(paths, y, sc);

  const std::string path = "/tmp/fsir_csv_roundtrip.csv";
  write_dataset_csv(original, path);
  const LongitudinalDataset back = ingest_csv(path, 0.0, 1.0);

  REQUIRE(back.n() == original.n());
  for (int i = 0; i < back.n(); ++i) {
    REQUIRE(back.subjects[i].id == original.subjects[i].id);
    REQUIRE(back.subjects[i].response == original.subjects[i].response);
    REQUIRE(back.subjects[i].times.size() == original.subjects[i].times.size());
    REQUIRE((back.subjects[i].times.array() == original.subjects[i].times.array()).all());
    REQUIRE((back.subjects[i].values.array() == original.subjects[i].values.array()).all());
  }
}

TEST_CASE("full-precision formatting round-trips doubles exactly", "[csv]") {
  for (double v : {0.1, 1.0 / 3.0, M_PI, -2.7182818284590452, 1e-300, 6.02e23, 0.0}) {
    const std::string s = detail::format_full(v);
    REQUIRE(std::strtod(s.c_str(), nullptr) == v);
  }
  REQUIRE(detail::format_sig(0.0127) == "0.0127");
  REQUIRE(detail::format_sig(0.012345678) == "0.0123457");
  REQUIRE(detail::format_sig(2.0) == "2");
}
