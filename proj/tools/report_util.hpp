#pragma once

#include <string>
#include <vector>

#include "gridtop/agents.hpp"
#include "gridtop/oracle.hpp"

// Text shaping for the CLI: score reports and the analysis tables emitted by
// `gridtop report`.  Everything returns plain UTF-8/LF strings so the caller
// decides between a file and stdout.

namespace gridtop::cli {

struct OracleEntry {
  std::string scenario_id;
  double score = 0.0;
  int reached_t = 0;
  bool complete = false;
  int num_actions = 0;
  std::vector<CourseStep> course;
};

std::string oracle_report_to_string(const GridCase& c,
                                    const std::vector<OracleEntry>& entries);
std::vector<OracleEntry> read_oracle_report(const GridCase& c,
                                            const std::string& path);

// One agent record joined with its scenario's DN record and oracle entry.
struct ScoreRow {
  std::string scenario_id;
  std::string agent_name;
  std::string mode;
  double agent_score = 0.0;
  double dn_score = 0.0;
  double oracle_score = 0.0;
  double normalized_x100 = 0.0;
  std::optional<int> game_over_step;
  std::optional<double> time_s;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
  double total_agent = 0.0;
  double total_dn = 0.0;
  double total_oracle = 0.0;
  double mean_normalized_x100 = 0.0;
};

ScoreReport build_score_report(const std::vector<EpisodeRecord>& agent_records,
                               const std::vector<EpisodeRecord>& dn_records,
                               const std::vector<OracleEntry>& oracle);
std::string score_report_to_string(const ScoreReport& r);

// `kind` is one of overload-histogram | action-usage | action-depth.
std::string analysis_report(const GridCase& c,
                            const std::vector<EpisodeRecord>& records,
                            const std::string& kind);

}  // namespace gridtop::cli
