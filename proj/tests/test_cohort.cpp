#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "itr/cohort.hpp"

using namespace itr;

namespace {

Subject subj(const std::string& id, int a, int delta, int t, double w1 = 0.0, double w2 = 0.0) {
  Subject s;
  s.id = id;
  s.a = a;
  s.delta = delta;
  s.t_tilde = t;
  s.w.resize(2);
  s.w << w1, w2;
  return s;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = "/tmp/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("longitudinal encoding fires exactly one indicator") {
  SUBCASE("event at 2 of 3") {
    const LongitudinalRecord rec = encode_longitudinal(subj("x", 1, 1, 2), 3);
    CHECK(rec.l_at(2) == 1);
    CHECK(rec.l_at(1) == 0);
    CHECK(rec.l_at(3) == 0);
    for (int t = 0; t < 3; ++t) CHECK(rec.r_at(t) == 0);
    CHECK(rec.i_at(1) == 1);
    CHECK(rec.i_at(2) == 1);
    CHECK(rec.i_at(3) == 0);
    CHECK(rec.j_at(0) == 1);
    CHECK(rec.j_at(1) == 1);
    CHECK(rec.j_at(2) == 0);
  }
  SUBCASE("censored at baseline") {
    const LongitudinalRecord rec = encode_longitudinal(subj("x", 0, 0, 0), 3);
    CHECK(rec.r_at(0) == 1);
    for (int t = 1; t <= 3; ++t) CHECK(rec.l_at(t) == 0);
    for (int m = 1; m <= 3; ++m) CHECK(rec.i_at(m) == 0);
    CHECK(rec.j_at(0) == 1);
    CHECK(rec.j_at(1) == 0);
    CHECK(rec.j_at(2) == 0);
  }
  SUBCASE("administrative censoring keeps the subject at risk throughout") {
    const LongitudinalRecord rec = encode_longitudinal(subj("x", 0, 0, 3), 3);
    for (int t = 0; t < 3; ++t) CHECK(rec.r_at(t) == 0);
    for (int t = 1; t <= 3; ++t) CHECK(rec.l_at(t) == 0);
    for (int m = 1; m <= 3; ++m) CHECK(rec.i_at(m) == 1);
    for (int m = 0; m < 3; ++m) CHECK(rec.j_at(m) == 1);
  }
  SUBCASE("horizon mismatch") {
    CHECK_THROWS_AS(encode_longitudinal(subj("x", 0, 0, 4), 3), std::invalid_argument);
  }
}

TEST_CASE("encode/decode round trip and indicator invariants") {
  for (int k : {1, 2, 3, 5}) {
    for (int delta : {0, 1}) {
      for (int t = delta == 1 ? 1 : 0; t <= k; ++t) {
        if (delta == 1 && t > k) continue;
        const Subject s = subj("x", 1, delta, t);
        const LongitudinalRecord rec = encode_longitudinal(s, k);

        int fired = 0;
        for (int u = 0; u < k; ++u) fired += rec.r_at(u);
        for (int u = 1; u <= k; ++u) fired += rec.l_at(u);
        const bool administrative = delta == 0 && t == k;
        CHECK(fired == (administrative ? 0 : 1));

        const auto [d2, t2] = decode_longitudinal(rec);
        CHECK(d2 == delta);
        CHECK(t2 == t);

        for (int m = 1; m < k; ++m) {
          CHECK(rec.i_at(m + 1) <= rec.i_at(m));
          CHECK(rec.i_at(m + 1) <= rec.j_at(m));
        }
        for (int m = 0; m + 1 < k; ++m) CHECK(rec.j_at(m + 1) <= rec.j_at(m));
      }
    }
  }
}

TEST_CASE("risk-set expansion matches the worked bookkeeping") {
  SUBCASE("event at 2, tau 3") {
    const Cohort c = make_cohort({subj("s1", 1, 1, 2)}, 3);
    const RiskSetExpansion x = expand_risk_sets(c, 3);
    REQUIRE(x.event.size() == 2);
    CHECK(x.event.m[0] == 1);
    CHECK(x.event.y[0] == 0.0);
    CHECK(x.event.m[1] == 2);
    CHECK(x.event.y[1] == 1.0);
    REQUIRE(x.cens.size() == 2);
    CHECK(x.cens.m[0] == 0);
    CHECK(x.cens.y[0] == 0.0);
    CHECK(x.cens.m[1] == 1);
    CHECK(x.cens.y[1] == 0.0);
  }
  SUBCASE("censored at baseline, tau 2") {
    const Cohort c = make_cohort({subj("s1", 0, 0, 0)}, 2);
    const RiskSetExpansion x = expand_risk_sets(c, 2);
    CHECK(x.event.size() == 0);
    REQUIRE(x.cens.size() == 1);
    CHECK(x.cens.m[0] == 0);
    CHECK(x.cens.y[0] == 1.0);
    CHECK(!x.warnings.empty());  // the event risk set at m=1 is empty
  }
  SUBCASE("three events at 1, tau 2") {
    const Cohort c =
        make_cohort({subj("s1", 0, 1, 1), subj("s2", 1, 1, 1), subj("s3", 0, 1, 1)}, 2);
    const RiskSetExpansion x = expand_risk_sets(c, 2);
    REQUIRE(x.event.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(x.event.m[i] == 1);
      CHECK(x.event.y[i] == 1.0);
    }
  }
}

TEST_CASE("risk-set row counts match analytic counts") {
  // Analytic counts straight from (delta, t): the event table holds
  // min(t, tau-1) rows per subject; censoring rows count the m in
  // {0,...,tau-2} with (delta=1 ? t > m : t >= m or administrative).
  std::vector<Subject> subjects;
  int id = 0;
  const int k = 4;
  for (int delta : {0, 1}) {
    for (int t = delta == 1 ? 1 : 0; t <= k; ++t) {
      subjects.push_back(subj("s" + std::to_string(++id), id % 2, delta, t));
    }
  }
  const Cohort c = make_cohort(subjects, k);
  for (int tau = 1; tau <= k; ++tau) {
    const RiskSetExpansion x = expand_risk_sets(c, tau);
    std::size_t event_expected = 0, cens_expected = 0;
    for (const auto& s : subjects) {
      event_expected += static_cast<std::size_t>(std::min(s.t_tilde, tau - 1));
      for (int m = 0; m <= tau - 2; ++m) {
        const bool administrative = s.delta == 0 && s.t_tilde == k;
        const bool at_risk =
            s.delta == 1 ? s.t_tilde > m : (administrative || s.t_tilde >= m);
        if (at_risk) ++cens_expected;
      }
    }
    CHECK(x.event.size() == event_expected);
    CHECK(x.cens.size() == cens_expected);
  }
}

TEST_CASE("cohort construction validates subjects") {
  CHECK_THROWS_AS(make_cohort({subj("a", 2, 0, 0)}, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_cohort({subj("a", 0, 1, 0)}, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_cohort({subj("a", 0, 0, 1), subj("a", 0, 0, 1)}, 2),
                  std::invalid_argument);
}

TEST_CASE("cohort csv ingestion") {
  SUBCASE("well-formed file") {
    const std::string path = write_temp("itr_cohort_ok.csv",
                                        "id,arm,event,time,age,biom\n"
                                        "p1,0,1,1,50,0.2\n"
                                        "p2,1,0,2,61,-0.4\n"
                                        "p3,1,1,2,47,1.25\n"
                                        "p4,0,0,0,58,0.0\n");
    const Cohort c = read_cohort(path);
    CHECK(c.n() == 4);
    CHECK(c.p() == 2);
    CHECK(c.k_max == 2);
    CHECK(c.w_names == std::vector<std::string>{"age", "biom"});
    CHECK(c.w(2, 1) == doctest::Approx(1.25));
    std::remove(path.c_str());
  }
  SUBCASE("non-binary arm cites the offending row") {
    const std::string path = write_temp("itr_cohort_badarm.csv",
                                        "id,arm,event,time,age\n"
                                        "p1,0,1,1,50\n"
                                        "p2,1,0,2,61\n"
                                        "p3,2,1,2,47\n");
    try {
      read_cohort(path);
      FAIL("expected an ingestion error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
    std::remove(path.c_str());
  }
  SUBCASE("empty covariate cell names the column") {
    const std::string path = write_temp("itr_cohort_badcov.csv",
                                        "id,arm,event,time,age,biom\n"
                                        "p1,0,1,1,50,0.2\n"
                                        "p2,1,0,2,,0.1\n");
    try {
      read_cohort(path);
      FAIL("expected an ingestion error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("age") != std::string::npos);
    }
    std::remove(path.c_str());
  }
  SUBCASE("missing required column") {
    const std::string path = write_temp("itr_cohort_nocol.csv",
                                        "id,arm,time,age\n"
                                        "p1,0,1,50\n");
    CHECK_THROWS_AS(read_cohort(path), std::invalid_argument);
    std::remove(path.c_str());
  }
  SUBCASE("write/read round trip") {
    const Cohort c =
        make_cohort({subj("s1", 1, 1, 2, 0.5, -1.0), subj("s2", 0, 0, 1, -0.25, 2.0)}, 3);
    const std::string path = "/tmp/itr_cohort_rt.csv";
    write_cohort_csv(c, path);
    CsvSchema schema;
    schema.k_max = 3;
    const Cohort back = read_cohort(path, schema);
    CHECK(back.n() == 2);
    CHECK(back.k_max == 3);
    CHECK(back.ids == c.ids);
    CHECK((back.w - c.w).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
  }
}

TEST_CASE("schema files restrict and rename columns") {
  const std::string schema_path = write_temp("itr_schema.json", R"({
    "id": "pid", "arm": "trt", "event": "delta", "time": "t",
    "covariates": ["biom"], "k_max": 4
  })");
  const std::string data_path = write_temp("itr_schema_data.csv",
                                           "pid,trt,delta,t,age,biom\n"
                                           "p1,0,1,1,50,0.2\n"
                                           "p2,1,0,4,61,-0.4\n");
  const CsvSchema schema = read_schema_file(schema_path);
  const Cohort c = read_cohort(data_path, schema);
  CHECK(c.p() == 1);
  CHECK(c.k_max == 4);
  CHECK(c.w_names == std::vector<std::string>{"biom"});

  const std::string bad_path = write_temp("itr_schema_bad.json", R"({"id": "pid", "bogus": 1})");
  CHECK_THROWS_AS(read_schema_file(bad_path), std::invalid_argument);
  std::remove(schema_path.c_str());
  std::remove(data_path.c_str());
  std::remove(bad_path.c_str());
}
