#include "report_util.hpp"

#include <algorithm>
#include <cstdio>

#include "text_util.hpp"

namespace gridtop::cli {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string oracle_report_to_string(const GridCase& c,
                                    const std::vector<OracleEntry>& entries) {
  std::string out = "oraclereport\n";
  out += "case " + c.name + " " + detail::hex64(case_hash(c)) + "\n";
  out += "scenarios " + std::to_string(entries.size()) + "\n";
  for (const OracleEntry& e : entries) {
    out += "oracle " + e.scenario_id + "\n";
    out += "score " + fixed(e.score, 9) + "\n";
    out += "reached_t " + std::to_string(e.reached_t) + "\n";
    out += "complete " + std::to_string(e.complete ? 1 : 0) + "\n";
    out += "actions " + std::to_string(e.num_actions) + "\n";
    out += "course " + std::to_string(e.course.size()) + "\n";
    for (const CourseStep& s : e.course)
      out += std::to_string(s.t) + " " + to_string(c, s.action) + "\n";
    out += "end\n";
  }
  return out;
}

std::vector<OracleEntry> read_oracle_report(const GridCase& c,
                                            const std::string& path) {
  auto lines = detail::content_lines(detail::slurp(path));
  std::size_t row = 0;
  auto where = [&]() { return path + ":" + std::to_string(row + 1); };
  auto next = [&]() -> std::vector<std::string_view> {
    if (row >= lines.size())
      throw ParseError(path + ": unexpected end of file");
    return detail::tokens(lines[row++]);
  };
  auto expect = [&](const char* kw) {
    auto t = next();
    if (t.empty() || t[0] != kw)
      throw ParseError(where() + ": expected '" + kw + "'");
    return t;
  };

  expect("oraclereport");
  expect("case");
  auto t = expect("scenarios");
  long n = detail::parse_int(t.at(1), where(), "scenarios");
  std::vector<OracleEntry> out;
  for (long i = 0; i < n; ++i) {
    OracleEntry e;
    t = expect("oracle");
    if (t.size() != 2) throw ParseError(where() + ": expected 'oracle <id>'");
    e.scenario_id = std::string(t[1]);
    t = expect("score");
    e.score = detail::parse_double(t.at(1), where(), "score");
    t = expect("reached_t");
    e.reached_t =
        static_cast<int>(detail::parse_int(t.at(1), where(), "reached_t"));
    t = expect("complete");
    e.complete = detail::parse_int(t.at(1), where(), "complete") != 0;
    t = expect("actions");
    e.num_actions =
        static_cast<int>(detail::parse_int(t.at(1), where(), "actions"));
    t = expect("course");
    long steps = detail::parse_int(t.at(1), where(), "course");
    for (long k = 0; k < steps; ++k) {
      t = next();
      if (t.size() < 2)
        throw ParseError(where() + ": expected '<t> <action>'");
      CourseStep s;
      s.t = static_cast<int>(detail::parse_int(t[0], where(), "course t"));
      std::string text(lines[row - 1]);
      text = text.substr(text.find(' ') + 1);
      s.action = action_from_string(c, text, where());
      e.course.push_back(s);
    }
    expect("end");
    out.push_back(std::move(e));
  }
  return out;
}

ScoreReport build_score_report(const std::vector<EpisodeRecord>& agent_records,
                               const std::vector<EpisodeRecord>& dn_records,
                               const std::vector<OracleEntry>& oracle) {
  ScoreReport rep;
  double norm_sum = 0.0;
  for (const EpisodeRecord& rec : agent_records) {
    const EpisodeRecord* dn = nullptr;
    for (const EpisodeRecord& d : dn_records)
      if (d.scenario_id == rec.scenario_id) {
        dn = &d;
        break;
      }
    if (!dn)
      throw ParseError("score: no dn record for scenario '" +
                       rec.scenario_id + "'");
    const OracleEntry* oe = nullptr;
    for (const OracleEntry& e : oracle)
      if (e.scenario_id == rec.scenario_id) {
        oe = &e;
        break;
      }
    if (!oe)
      throw ParseError("score: no oracle entry for scenario '" +
                       rec.scenario_id + "'");

    ScoreRow row;
    row.scenario_id = rec.scenario_id;
    row.agent_name = rec.agent_name;
    row.mode = rec.mode == Mode::easy ? "easy" : "hard";
    row.agent_score = rec.episode_score;
    row.dn_score = dn->episode_score;
    row.oracle_score = oe->score;
    row.normalized_x100 =
        100.0 * normalized_score(rec.episode_score, dn->episode_score,
                                 oe->score);
    row.game_over_step = rec.game_over_step;
    if (rec.budget_s) row.time_s = rec.time_consumed_s;
    rep.total_agent += row.agent_score;
    rep.total_dn += row.dn_score;
    rep.total_oracle += row.oracle_score;
    norm_sum += row.normalized_x100;
    rep.rows.push_back(std::move(row));
  }
  if (!rep.rows.empty())
    rep.mean_normalized_x100 = norm_sum / static_cast<double>(rep.rows.size());
  return rep;
}

std::string score_report_to_string(const ScoreReport& r) {
  std::string out = "scorereport\n";
  out += "rows " + std::to_string(r.rows.size()) + "\n";
  out += "scenario agent mode score dn oracle normalized_x100 game_over time_s\n";
  for (const ScoreRow& row : r.rows) {
    out += row.scenario_id + " " + row.agent_name + " " + row.mode + " " +
           fixed(row.agent_score, 9) + " " + fixed(row.dn_score, 9) + " " +
           fixed(row.oracle_score, 9) + " " + fixed(row.normalized_x100, 6) +
           " " +
           (row.game_over_step ? std::to_string(*row.game_over_step)
                               : std::string("-")) +
           " " + (row.time_s ? fixed(*row.time_s, 3) : std::string("-")) +
           "\n";
  }
  out += "totals agent " + fixed(r.total_agent, 9) + " dn " +
         fixed(r.total_dn, 9) + " oracle " + fixed(r.total_oracle, 9) + "\n";
  out += "mean_normalized_x100 " + fixed(r.mean_normalized_x100, 6) + "\n";
  return out;
}

namespace {

std::string overload_histogram(const std::vector<EpisodeRecord>& records) {
  // 5-minute steps: 12 per hour, 288 per day.
  std::vector<long> by_weekday(7, 0), by_hour(24, 0);
  for (const EpisodeRecord& rec : records)
    for (const StepRow& row : rec.steps) {
      int minutes = row.t * 5;
      int weekday = (rec.start_weekday + minutes / (60 * 24)) % 7;
      int hour = (minutes / 60) % 24;
      by_weekday[weekday] += row.overloads;
      by_hour[hour] += row.overloads;
    }
  std::string out = "overload-histogram\n";
  out += "records " + std::to_string(records.size()) + "\n";
  for (int d = 0; d < 7; ++d)
    out += "weekday " + std::to_string(d) + " " + std::to_string(by_weekday[d]) +
           "\n";
  for (int h = 0; h < 24; ++h)
    out += "hour " + std::to_string(h) + " " + std::to_string(by_hour[h]) + "\n";
  return out;
}

std::string action_usage(const GridCase& c,
                         const std::vector<EpisodeRecord>& records) {
  long nothing = 0;
  std::vector<long> subs(c.num_substations, 0), lines(c.lines.size(), 0);
  for (const EpisodeRecord& rec : records)
    for (const StepRow& row : rec.steps) {
      if (!row.action) continue;  // reset row
      if (!row.legal) continue;   // rejected, nothing applied
      switch (row.action->kind) {
        case ActionKind::do_nothing: ++nothing; break;
        case ActionKind::set_substation_config: ++subs[row.action->asset]; break;
        case ActionKind::switch_line: ++lines[row.action->asset]; break;
      }
    }
  std::string out = "action-usage\n";
  out += "records " + std::to_string(records.size()) + "\n";
  out += "nothing " + std::to_string(nothing) + "\n";
  for (int s = 0; s < c.num_substations; ++s)
    out += "sub " + std::to_string(s + 1) + " " + std::to_string(subs[s]) + "\n";
  for (std::size_t l = 0; l < c.lines.size(); ++l)
    out += "line " + std::to_string(l + 1) + " " + std::to_string(lines[l]) +
           "\n";
  return out;
}

std::string action_depth(const std::vector<EpisodeRecord>& records) {
  std::string out = "action-depth\n";
  out += "records " + std::to_string(records.size()) + "\n";
  for (const EpisodeRecord& rec : records) {
    out += "record " + rec.scenario_id + " " + rec.agent_name + "\n";
    for (const StepRow& row : rec.steps)
      out += std::to_string(row.t) + " " + std::to_string(row.depth) + "\n";
    out += "end\n";
  }
  return out;
}

}  // namespace

std::string analysis_report(const GridCase& c,
                            const std::vector<EpisodeRecord>& records,
                            const std::string& kind) {
  if (kind == "overload-histogram") return overload_histogram(records);
  if (kind == "action-usage") return action_usage(c, records);
  if (kind == "action-depth") return action_depth(records);
  throw ValidationError("report: unknown kind '" + kind + "'");
}

}  // namespace gridtop::cli
