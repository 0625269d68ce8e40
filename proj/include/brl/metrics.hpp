#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "brl/barrier.hpp"
#include "brl/trainer.hpp"

namespace brl {

// Deterministic per-iteration CSV. Values serialize with 17 significant
// digits so re-parsing reproduces every field to full precision and
// identical runs produce byte-identical files. Wall-clock timing lives in a
// separate file to keep this one reproducible.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path,
                const std::vector<ReportedConstraint>& constraints)
      : file_(std::fopen(path.c_str(), "w")) {
    if (file_ == nullptr)
      throw std::runtime_error("MetricsWriter: cannot open " + path);
    std::string header = "iter,mean_reward";
    for (const auto& c : constraints) header += ",jc_" + c.name;
    for (const auto& c : constraints) header += ",di_" + c.name;
    header +=
        ",kl,objective_before,objective_after,accepted,backtracks,cg_ok";
    for (const auto& c : constraints) header += ",margin_" + c.name;
    std::fprintf(file_, "%s\n", header.c_str());
    std::fflush(file_);
  }

  ~MetricsWriter() {
    if (file_ != nullptr) std::fclose(file_);
  }

  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  void write(const IterationReport& r) {
    std::fprintf(file_, "%d,%.17g", r.iter, r.mean_reward);
    for (int k = 0; k < r.j_c.size(); ++k) std::fprintf(file_, ",%.17g", r.j_c[k]);
    for (int k = 0; k < r.d_i.size(); ++k) std::fprintf(file_, ",%.17g", r.d_i[k]);
    std::fprintf(file_, ",%.17g,%.17g,%.17g,%d,%d,%d", r.kl, r.objective_before,
                 r.objective_after, r.accepted ? 1 : 0, r.backtracks,
                 r.cg_ok ? 1 : 0);
    // rejected constrained steps report margins at the old policy; the
    // column count always matches the constraint set
    for (int k = 0; k < r.j_c.size(); ++k)
      std::fprintf(file_, ",%.17g",
                   k < r.barrier_margins.size() ? r.barrier_margins[k]
                                                : r.d_i[k] - r.j_c[k]);
    std::fprintf(file_, "\n");
    std::fflush(file_);
  }

 private:
  std::FILE* file_;
};

class TimingWriter {
 public:
  explicit TimingWriter(const std::string& path)
      : file_(std::fopen(path.c_str(), "w")) {
    if (file_ == nullptr)
      throw std::runtime_error("TimingWriter: cannot open " + path);
    std::fprintf(file_, "iter,collect_ms,policy_step_ms,critic_ms\n");
  }
  ~TimingWriter() {
    if (file_ != nullptr) std::fclose(file_);
  }
  TimingWriter(const TimingWriter&) = delete;
  TimingWriter& operator=(const TimingWriter&) = delete;

  void write(const IterationReport& r) {
    std::fprintf(file_, "%d,%.6g,%.6g,%.6g\n", r.iter, r.collect_ms,
                 r.policy_step_ms, r.critic_ms);
    std::fflush(file_);
  }

 private:
  std::FILE* file_;
};

struct MetricsRow {
  int iter = 0;
  double mean_reward = 0.0;
  std::vector<double> j_c, d_i, margins;
  double kl = 0.0, objective_before = 0.0, objective_after = 0.0;
  bool accepted = false;
  int backtracks = 0;
  bool cg_ok = true;
};

struct MetricsTable {
  std::vector<std::string> constraint_names;
  std::vector<MetricsRow> rows;
};

inline MetricsTable parse_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("parse_metrics: cannot open " + path);
  std::string header;
  if (!std::getline(is, header))
    throw std::runtime_error("parse_metrics: empty file " + path);

  MetricsTable table;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ','))
      if (col.rfind("jc_", 0) == 0) table.constraint_names.push_back(col.substr(3));
  }
  const int K = static_cast<int>(table.constraint_names.size());

  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string tok;
    std::vector<std::string> toks;
    while (std::getline(ls, tok, ',')) toks.push_back(tok);
    const std::size_t expected = 2 + 3 * K + 6;
    if (toks.size() != expected)
      throw std::runtime_error("parse_metrics: bad row width in " + path);
    MetricsRow r;
    int i = 0;
    r.iter = std::stoi(toks[i++]);
    r.mean_reward = std::stod(toks[i++]);
    for (int k = 0; k < K; ++k) r.j_c.push_back(std::stod(toks[i++]));
    for (int k = 0; k < K; ++k) r.d_i.push_back(std::stod(toks[i++]));
    r.kl = std::stod(toks[i++]);
    r.objective_before = std::stod(toks[i++]);
    r.objective_after = std::stod(toks[i++]);
    r.accepted = toks[i++] == "1";
    r.backtracks = std::stoi(toks[i++]);
    r.cg_ok = toks[i++] == "1";
    for (int k = 0; k < K; ++k) r.margins.push_back(std::stod(toks[i++]));
    table.rows.push_back(std::move(r));
  }
  return table;
}

// Human-readable end-of-run constraint table in the shape of the
// per-constraint satisfaction summaries: one row per constraint with its
// limit, the final estimate, and a verdict.
inline std::string summary_text(const std::vector<ReportedConstraint>& constraints,
                                const IterationReport& final_report,
                                double gamma) {
  std::ostringstream os;
  os << "constraint            kind           limit_D   limit_d     J_C(final)  satisfied\n";
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& c = constraints[i];
    const double j = final_report.j_c[static_cast<int>(i)];
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s  %-13s  %-8.4g  %-10.4g  %-10.4g  %s\n",
                  c.name.c_str(), to_string(c.kind), c.limit_raw, c.limit, j,
                  j <= c.limit ? "yes" : "NO");
    os << buf;
  }
  os << "final mean reward per step: " << final_report.mean_reward << "\n";
  os << "gamma: " << gamma << "\n";
  return os.str();
}

}  // namespace brl
