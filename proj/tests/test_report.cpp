// Run-record serialization, pairwise comparisons and the rendered
// architecture x graph-variant tables with their significance markers.
#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include <diagraph/diagraph.hpp>

using namespace diagraph;
using Catch::Approx;

namespace {

std::vector<RunResult> constant_runs(double value, std::size_t n, std::size_t seed_base = 0) {
  std::vector<RunResult> out;
  for (std::size_t i = 0; i < n; ++i) {
    RunResult r;
    r.run = i + 1;
    r.seed = seed_base + i;
    r.accuracy = value;
    r.macro_f1 = value;
    r.weighted_f1 = value;
    r.epochs = 10;
    out.push_back(r);
  }
  return out;
}

std::vector<RunResult> runs_from_values(const std::vector<double>& values) {
  std::vector<RunResult> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    RunResult r;
    r.run = i + 1;
    r.seed = i;
    r.accuracy = values[i];
    r.macro_f1 = values[i];
    r.weighted_f1 = values[i];
    r.epochs = 5;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("metric accessors cover the three reported scores") {
  RunResult r;
  r.accuracy = 0.1;
  r.macro_f1 = 0.2;
  r.weighted_f1 = 0.3;
  REQUIRE(metric_of(r, "accuracy") == Approx(0.1));
  REQUIRE(metric_of(r, "macro_f1") == Approx(0.2));
  REQUIRE(metric_of(r, "weighted_f1") == Approx(0.3));
  REQUIRE_THROWS_AS(metric_of(r, "f2"), ReportError);
  REQUIRE(report_metrics() == std::vector<std::string>{"accuracy", "macro_f1", "weighted_f1"});
}

TEST_CASE("mean and sample standard deviation") {
  REQUIRE(mean_of({1.0, 2.0, 3.0, 4.0}) == Approx(2.5));
  REQUIRE(sd_of({1.0, 2.0, 3.0, 4.0}) == Approx(std::sqrt(5.0 / 3.0)));
  REQUIRE(sd_of({7.0}) == 0.0);
}

TEST_CASE("run records survive a CSV round trip bit-for-bit") {
  std::vector<RunResult> runs;
  RunResult a;
  a.run = 1;
  a.seed = 1234567890123ULL;
  a.accuracy = 1.0 / 3.0;
  a.macro_f1 = 0.1234567890123456789;
  a.weighted_f1 = 2.0 / 7.0;
  a.epochs = 42;
  RunResult b;
  b.run = 2;
  b.seed = 99;
  b.accuracy = 1e-17;
  b.macro_f1 = 0.9999999999999999;
  b.weighted_f1 = 0.0;
  b.epochs = 0;
  runs.push_back(a);
  runs.push_back(b);

  std::stringstream ss;
  write_runs_csv(runs, ss);
  const std::vector<RunResult> back = read_runs_csv(ss);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(back[i].run == runs[i].run);
    REQUIRE(back[i].seed == runs[i].seed);
    REQUIRE(back[i].accuracy == runs[i].accuracy);
    REQUIRE(back[i].macro_f1 == runs[i].macro_f1);
    REQUIRE(back[i].weighted_f1 == runs[i].weighted_f1);
    REQUIRE(back[i].epochs == runs[i].epochs);
  }
}

TEST_CASE("runs CSV reader rejects malformed input") {
  {
    std::stringstream ss("run,set,accuracy\n");
    REQUIRE_THROWS_AS(read_runs_csv(ss), ReportError);
  }
  {
    std::stringstream ss("run,seed,accuracy,macro_f1,weighted_f1,epochs\n1,2,0.5,oops,0.5,3\n");
    REQUIRE_THROWS_AS(read_runs_csv(ss), ReportError);
  }
  {
    // blank lines are tolerated
    std::stringstream ss("run,seed,accuracy,macro_f1,weighted_f1,epochs\n\n1,2,0.5,0.5,0.5,3\n\n");
    REQUIRE(read_runs_csv(ss).size() == 1);
  }
  REQUIRE_THROWS_AS(read_runs_csv_file("/nonexistent/runs.csv"), ReportError);
}

TEST_CASE("comparisons report means, the U statistic and significance") {
  const std::vector<RunResult> lo = runs_from_values({0.1, 0.2, 0.15, 0.12, 0.18, 0.11});
  const std::vector<RunResult> hi = runs_from_values({0.8, 0.9, 0.85, 0.82, 0.88, 0.81});

  const std::vector<MetricComparison> cmp = compare_runs(lo, hi, 0.05);
  REQUIRE(cmp.size() == 3);
  for (const MetricComparison& c : cmp) {
    REQUIRE(c.mean_a == Approx(mean_of({0.1, 0.2, 0.15, 0.12, 0.18, 0.11})));
    REQUIRE(c.mean_b == Approx(mean_of({0.8, 0.9, 0.85, 0.82, 0.88, 0.81})));
    REQUIRE(c.u == 0.0);  // complete separation
    // exact two-sided p for disjoint samples of 6 and 6: 2 / C(12,6)
    REQUIRE(c.p == Approx(2.0 / 924.0).margin(1e-12));
    REQUIRE(c.significant);
  }

  const std::vector<MetricComparison> same = compare_runs(lo, lo, 0.05);
  for (const MetricComparison& c : same) {
    REQUIRE(c.p > 0.5);
    REQUIRE_FALSE(c.significant);
  }

  REQUIRE_THROWS_AS(compare_runs({}, hi), ReportError);
  REQUIRE_THROWS_AS(compare_runs(lo, {}), ReportError);
}

TEST_CASE("rendered tables carry significance markers and bold best cells") {
  ReportSpec spec;
  spec.title = "demo";
  spec.arch_names = {"first", "second"};
  spec.graph_names = {"ref", "v2", "v3"};
  spec.alpha = 0.05;

  // First architecture: reference clearly beats both variants, and the
  // second variant clearly beats the third.
  std::vector<std::vector<RunResult>> row0;
  row0.push_back(runs_from_values({0.90, 0.92, 0.88, 0.94, 0.86, 0.90}));
  row0.push_back(runs_from_values({0.50, 0.52, 0.48, 0.54, 0.46, 0.50}));
  row0.push_back(runs_from_values({0.30, 0.32, 0.28, 0.34, 0.26, 0.30}));
  spec.runs.push_back(row0);

  // Second architecture: identical everywhere, no markers.
  std::vector<std::vector<RunResult>> row1;
  row1.push_back(constant_runs(0.40, 6));
  row1.push_back(constant_runs(0.40, 6));
  row1.push_back(constant_runs(0.40, 6));
  spec.runs.push_back(row1);

  const RenderedReport rendered = render_report(spec);

  REQUIRE(rendered.markdown.find("## demo") != std::string::npos);
  REQUIRE(rendered.markdown.find("first ref") != std::string::npos);
  // reference cell: starred and bold (row best)
  REQUIRE(rendered.markdown.find("**\\*0.90**") != std::string::npos);
  // second variant: plus marker
  REQUIRE(rendered.markdown.find("+0.50") != std::string::npos);
  // no marker leaks onto the constant architecture
  REQUIRE(rendered.markdown.find("*0.40") == std::string::npos);
  REQUIRE(rendered.markdown.find("+0.40") == std::string::npos);
  REQUIRE(rendered.markdown.find("6 runs per condition") != std::string::npos);

  REQUIRE(rendered.csv.find("arch,graph,metric,mean,sd,star,plus,best\n") == 0);
  REQUIRE(rendered.csv.find("first,ref,accuracy,0.90,0.03,1,0,1") != std::string::npos);
  REQUIRE(rendered.csv.find("first,v2,accuracy,0.50,0.03,0,1,0") != std::string::npos);
  REQUIRE(rendered.csv.find("second,ref,accuracy,0.40,0.00,0,0,0") != std::string::npos);
}

TEST_CASE("table rendering validates the grid shape") {
  ReportSpec spec;
  spec.title = "bad";
  spec.arch_names = {"a1", "a2"};
  spec.graph_names = {"g1"};
  spec.runs.push_back({constant_runs(0.5, 3)});
  // one row missing entirely
  REQUIRE_THROWS_AS(render_report(spec), ReportError);

  spec.runs.push_back({});  // wrong column count
  REQUIRE_THROWS_AS(render_report(spec), ReportError);

  spec.runs.back() = {std::vector<RunResult>{}};  // empty cell
  REQUIRE_THROWS_AS(render_report(spec), ReportError);

  spec.runs.back() = {constant_runs(0.5, 4)};  // run-count mismatch (3 vs 4)
  REQUIRE_THROWS_AS(render_report(spec), ReportError);

  spec.runs.back() = {constant_runs(0.6, 3)};
  const RenderedReport ok = render_report(spec);
  REQUIRE(ok.markdown.find("**0.60**") != std::string::npos);
}
