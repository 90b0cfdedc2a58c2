#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "diagraph/errors.hpp"
#include "diagraph/stats.hpp"
#include "diagraph/training.hpp"

namespace diagraph {

inline const std::vector<std::string>& report_metrics() {
  static const std::vector<std::string> metrics = {"accuracy", "macro_f1", "weighted_f1"};
  return metrics;
}

inline double metric_of(const RunResult& r, const std::string& metric) {
  if (metric == "accuracy") return r.accuracy;
  if (metric == "macro_f1") return r.macro_f1;
  if (metric == "weighted_f1") return r.weighted_f1;
  throw ReportError("unknown metric '" + metric + "'");
}

inline std::vector<double> metric_vector(const std::vector<RunResult>& runs,
                                         const std::string& metric) {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const RunResult& r : runs) out.push_back(metric_of(r, metric));
  return out;
}

// --- runs.csv ---------------------------------------------------------------

inline void write_runs_csv(const std::vector<RunResult>& runs, std::ostream& out) {
  out << "run,seed,accuracy,macro_f1,weighted_f1,epochs\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const RunResult& r : runs) {
    out << r.run << ',' << r.seed << ',' << r.accuracy << ',' << r.macro_f1 << ','
        << r.weighted_f1 << ',' << r.epochs << '\n';
  }
}

inline void write_runs_csv_file(const std::vector<RunResult>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ReportError("cannot write '" + path + "'");
  write_runs_csv(runs, out);
}

inline std::vector<RunResult> read_runs_csv(std::istream& in, const std::string& origin = "runs") {
  std::string line;
  if (!std::getline(in, line) || line != "run,seed,accuracy,macro_f1,weighted_f1,epochs") {
    throw ReportError(origin + ": unexpected runs header '" + line + "'");
  }
  std::vector<RunResult> runs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RunResult r;
    char comma = 0;
    std::istringstream ls(line);
    ls >> r.run >> comma >> r.seed >> comma >> r.accuracy >> comma >> r.macro_f1 >> comma >>
        r.weighted_f1 >> comma >> r.epochs;
    if (!ls) throw ReportError(origin + ": malformed runs row '" + line + "'");
    runs.push_back(r);
  }
  return runs;
}

inline std::vector<RunResult> read_runs_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot open '" + path + "'");
  return read_runs_csv(in, path);
}

// --- pairwise comparison ------------------------------------------------

struct MetricComparison {
  std::string metric;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double u = 0.0;
  double p = 1.0;
  bool significant = false;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline std::vector<MetricComparison> compare_runs(const std::vector<RunResult>& a,
                                                  const std::vector<RunResult>& b,
                                                  double alpha = 0.05) {
  if (a.empty() || b.empty()) throw ReportError("cannot compare empty run sets");
  std::vector<MetricComparison> out;
  for (const std::string& metric : report_metrics()) {
    const std::vector<double> va = metric_vector(a, metric);
    const std::vector<double> vb = metric_vector(b, metric);
    const MwuResult mwu = mann_whitney_u(va, vb);
    MetricComparison c;
    c.metric = metric;
    c.mean_a = mean_of(va);
    c.mean_b = mean_of(vb);
    c.u = mwu.u;
    c.p = mwu.p;
    c.significant = mwu.p < alpha;
    out.push_back(c);
  }
  return out;
}

// --- condition tables -----------------------------------------------------
//
// Columns are architecture x graph variant, rows are metrics. The first
// graph variant is the reference condition. Markers:
//   * on the better of {reference, best other variant} when they differ
//     significantly for that architecture;
//   + on the better of the second and third variants when those differ
//     significantly;
//   bold on the best mean in the row.

struct ReportSpec {
  std::string title;
  std::vector<std::string> arch_names;
  std::vector<std::string> graph_names;
  // runs[arch][graph]
  std::vector<std::vector<std::vector<RunResult>>> runs;
  double alpha = 0.05;
};

struct RenderedReport {
  std::string markdown;
  std::string csv;
};

inline RenderedReport render_report(const ReportSpec& spec) {
  const std::size_t n_arch = spec.arch_names.size();
  const std::size_t n_graph = spec.graph_names.size();
  if (spec.runs.size() != n_arch) throw ReportError("report grid rows do not match architectures");
  std::size_t run_count = 0;
  for (const auto& row : spec.runs) {
    if (row.size() != n_graph) throw ReportError("report grid columns do not match graph variants");
    for (const auto& cell : row) {
      if (cell.empty()) throw ReportError("report cell has no runs");
      if (run_count == 0) run_count = cell.size();
      if (cell.size() != run_count) {
        throw ReportError("report cells disagree on run count (" + std::to_string(cell.size()) +
                          " vs " + std::to_string(run_count) + ")");
      }
    }
  }

  const auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::string md;
  std::string csv = "arch,graph,metric,mean,sd,star,plus,best\n";
  md += "## " + spec.title + "\n\n";
  md += "| Metric |";
  for (const std::string& arch : spec.arch_names) {
    for (const std::string& graph : spec.graph_names) md += " " + arch + " " + graph + " |";
  }
  md += "\n|---|";
  for (std::size_t i = 0; i < n_arch * n_graph; ++i) md += "---|";
  md += "\n";

  for (const std::string& metric : report_metrics()) {
    // means and marker grids
    std::vector<std::vector<double>> means(n_arch, std::vector<double>(n_graph, 0.0));
    std::vector<std::vector<double>> sds(n_arch, std::vector<double>(n_graph, 0.0));
    std::vector<std::vector<bool>> star(n_arch, std::vector<bool>(n_graph, false));
    std::vector<std::vector<bool>> plus(n_arch, std::vector<bool>(n_graph, false));
    for (std::size_t a = 0; a < n_arch; ++a) {
      for (std::size_t g = 0; g < n_graph; ++g) {
        const auto v = metric_vector(spec.runs[a][g], metric);
        means[a][g] = mean_of(v);
        sds[a][g] = sd_of(v);
      }
      if (n_graph >= 2) {
        std::size_t best_other = 1;
        for (std::size_t g = 2; g < n_graph; ++g) {
          if (means[a][g] > means[a][best_other]) best_other = g;
        }
        const MwuResult mwu = mann_whitney_u(metric_vector(spec.runs[a][0], metric),
                                             metric_vector(spec.runs[a][best_other], metric));
        if (mwu.p < spec.alpha) {
          star[a][means[a][0] >= means[a][best_other] ? 0 : best_other] = true;
        }
      }
      if (n_graph >= 3) {
        const MwuResult mwu = mann_whitney_u(metric_vector(spec.runs[a][1], metric),
                                             metric_vector(spec.runs[a][2], metric));
        if (mwu.p < spec.alpha) {
          plus[a][means[a][1] >= means[a][2] ? 1 : 2] = true;
        }
      }
    }
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n_arch; ++a) {
      for (std::size_t g = 0; g < n_graph; ++g) best_mean = std::max(best_mean, means[a][g]);
    }

    std::string row_name = metric;
    md += "| " + row_name + " |";
    for (std::size_t a = 0; a < n_arch; ++a) {
      for (std::size_t g = 0; g < n_graph; ++g) {
        std::string cell;
        if (star[a][g]) cell += "\\*";
        if (plus[a][g]) cell += "+";
        cell += fmt(means[a][g]);
        const bool best = means[a][g] == best_mean;
        md += best ? " **" + cell + "** |" : " " + cell + " |";
        csv += spec.arch_names[a] + "," + spec.graph_names[g] + "," + metric + "," +
               fmt(means[a][g]) + "," + fmt(sds[a][g]) + "," + (star[a][g] ? "1" : "0") + "," +
               (plus[a][g] ? "1" : "0") + "," + (best ? "1" : "0") + "\n";
      }
    }
    md += "\n";
  }
  md += "\nMarkers: \\* reference vs best other variant differs (p < " + fmt(spec.alpha) +
        "), + second vs third variant differs, bold = row best. " +
        std::to_string(run_count) + " runs per condition.\n";
  return {md, csv};
}

}  // namespace diagraph
