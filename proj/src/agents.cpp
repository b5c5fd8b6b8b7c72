#include "gridtop/agents.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "text_util.hpp"

namespace gridtop {

namespace {

class DoNothingAgent final : public Agent {
 public:
  const std::string& name() const override { return name_; }
  Action act(const Observation&, const SimulateFn&) override {
    return Action::nothing();
  }

 private:
  std::string name_ = "dn";
};

class FixedTopologyAgent final : public Agent {
 public:
  FixedTopologyAgent(Topology target, std::string name)
      : target_(std::move(target)), name_(std::move(name)) {}

  const std::string& name() const override { return name_; }

  Action act(const Observation& obs, const SimulateFn&) override {
    // Cooldowns in the observation are pre-decrement: <= 1 means the asset
    // is actionable on the next step.
    for (std::size_t s = 0; s < target_.bus.size(); ++s)
      if (obs.topology.bus[s] != target_.bus[s] && obs.sub_cooldown[s] <= 1)
        return Action::set_config(static_cast<int>(s), target_.bus[s]);
    for (std::size_t l = 0; l < target_.line_in.size(); ++l)
      if (obs.topology.line_in[l] != target_.line_in[l] &&
          obs.line_cooldown[l] <= 1)
        return Action::switch_line(static_cast<int>(l));
    return Action::nothing();
  }

 private:
  Topology target_;
  std::string name_;
};

class GreedyAgent final : public Agent {
 public:
  GreedyAgent(std::vector<Action> dictionary, std::string name)
      : dictionary_(std::move(dictionary)), name_(std::move(name)) {}

  const std::string& name() const override { return name_; }

  Action act(const Observation& obs, const SimulateFn& simulate) override {
    Action best = Action::nothing();
    double best_score = simulate(best).score;
    for (const Action& a : dictionary_) {
      if (a.kind == ActionKind::switch_line && obs.line_cooldown[a.asset] > 1)
        continue;
      if (a.kind == ActionKind::set_substation_config &&
          obs.sub_cooldown[a.asset] > 1)
        continue;
      double score = simulate(a).score;
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    return best;
  }

 private:
  std::vector<Action> dictionary_;
  std::string name_;
};

bool action_less(const Action& a, const Action& b) {
  auto rank = [](const Action& x) {
    return x.kind == ActionKind::set_substation_config ? 0 : 1;
  };
  if (rank(a) != rank(b)) return rank(a) < rank(b);
  if (a.asset != b.asset) return a.asset < b.asset;
  return a.config < b.config;
}

}  // namespace

std::unique_ptr<Agent> baseline_dn() { return std::make_unique<DoNothingAgent>(); }

std::unique_ptr<Agent> baseline_dn_tau(Topology target, std::string name) {
  return std::make_unique<FixedTopologyAgent>(std::move(target),
                                              std::move(name));
}

std::unique_ptr<Agent> baseline_greedy(std::vector<Action> dictionary,
                                       std::string name) {
  return std::make_unique<GreedyAgent>(std::move(dictionary), std::move(name));
}

std::vector<Action> default_greedy_dictionary(const GridCase& c,
                                              const std::vector<Action>& extra) {
  std::vector<Action> out;
  for (const Action& a : extra)
    if (a.kind != ActionKind::do_nothing) out.push_back(a);
  for (int l = 0; l < static_cast<int>(c.lines.size()); ++l)
    out.push_back(Action::switch_line(l));
  std::sort(out.begin(), out.end(), action_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw ValidationError("discounted_return: gamma must be in [0, 1]");
  double g = 0.0;
  double w = 1.0;
  for (double r : rewards) {
    g += w * r;
    w *= gamma;
  }
  return g;
}

namespace {

// Depth = unitary actions from the reference topology.  Differing lines are
// always one switch away; a differing substation counts when its config was
// set by a recorded action, which is how it got there in the first place.
int record_depth(const GridCase& c, const Topology& topo, const Topology& ref,
                 const std::set<std::pair<int, std::vector<std::uint8_t>>>&
                     seen_configs) {
  int depth = 0;
  for (int s = 0; s < c.num_substations; ++s) {
    if (topo.bus[s] == ref.bus[s]) continue;
    if (!seen_configs.count({s, topo.bus[s]})) return -1;
    ++depth;
  }
  for (std::size_t l = 0; l < c.lines.size(); ++l)
    if (topo.line_in[l] != ref.line_in[l]) ++depth;
  return depth;
}

int count_overloads(const GridCase& c, const Observation& obs) {
  int n = 0;
  for (std::size_t l = 0; l < c.lines.size(); ++l)
    if (obs.topology.line_in[l] && obs.current_a[l] >= c.lines[l].imax_a) ++n;
  return n;
}

}  // namespace

EpisodeRecord run_episode(Agent& agent, const GridCase& c, const Scenario& s,
                          Mode mode, std::optional<double> budget_s) {
  using clock = std::chrono::steady_clock;

  Environment env(c, s, mode);
  EpisodeRecord rec;
  rec.scenario_id = s.id;
  rec.agent_name = agent.name();
  rec.mode = mode;
  rec.horizon = s.horizon;
  rec.start_weekday = s.start_weekday;
  rec.budget_s = budget_s;

  Observation obs = env.reset();
  Topology ref = reference_topology(c);
  std::set<std::pair<int, std::vector<std::uint8_t>>> seen_configs;

  StepRow row0;
  row0.t = 0;
  row0.score = env.current_step_score();
  row0.depth = record_depth(c, obs.topology, ref, seen_configs);
  row0.overloads = count_overloads(c, obs);
  rec.steps.push_back(std::move(row0));

  double consumed = 0.0;
  SimulateFn sim = [&env](const Action& a) { return env.simulate(a); };
  while (!env.done()) {
    Action action = Action::nothing();
    auto t0 = clock::now();
    try {
      action = agent.act(obs, sim);
    } catch (const std::exception& e) {
      rec.faults.push_back("t=" + std::to_string(obs.t + 1) + ": " + e.what());
      action = Action::nothing();
    }
    consumed += std::chrono::duration<double>(clock::now() - t0).count();
    if (budget_s && consumed > *budget_s) {
      rec.budget_exceeded = true;
      break;
    }

    StepResult res = env.step(action);
    if (!res.info.illegal && !res.info.diverged &&
        action.kind == ActionKind::set_substation_config)
      seen_configs.insert({action.asset, res.obs.topology.bus[action.asset]});

    StepRow row;
    row.t = res.obs.t;
    row.action = action;
    row.legal = !res.info.illegal;
    row.score = res.score;
    row.depth = record_depth(c, res.obs.topology, ref, seen_configs);
    row.overloads = count_overloads(c, res.obs);
    rec.steps.push_back(std::move(row));
    obs = res.obs;
  }

  rec.time_consumed_s = consumed;
  if (env.state().game_over) rec.game_over_step = env.state().t;

  std::vector<double> scores;
  scores.reserve(rec.steps.size());
  for (const StepRow& r : rec.steps) scores.push_back(r.score);
  rec.episode_score = rec.budget_exceeded
                          ? 0.0
                          : score_episode(scores, env.state().game_over);
  return rec;
}

std::string record_to_string(const GridCase& c, const EpisodeRecord& rec) {
  std::ostringstream out;
  out << "episode\n";
  out << "scenario " << rec.scenario_id << "\n";
  out << "agent " << rec.agent_name << "\n";
  out << "mode " << (rec.mode == Mode::easy ? "easy" : "hard") << "\n";
  out << "horizon " << rec.horizon << "\n";
  out << "start_weekday " << rec.start_weekday << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", rec.episode_score);
  out << "episode_score " << buf << "\n";
  out << "game_over_step "
      << (rec.game_over_step ? std::to_string(*rec.game_over_step) : "-")
      << "\n";
  if (rec.budget_s) {
    out << "budget_s " << detail::fmt_double(*rec.budget_s) << "\n";
    out << "time_consumed_s " << detail::fmt_double(rec.time_consumed_s)
        << "\n";
    out << "budget_exceeded " << (rec.budget_exceeded ? 1 : 0) << "\n";
  }
  for (const std::string& f : rec.faults) out << "fault " << f << "\n";
  out << "steps " << rec.steps.size() << "\n";
  for (const StepRow& r : rec.steps) {
    std::snprintf(buf, sizeof buf, "%.9f", r.score);
    out << r.t << " " << (r.legal ? 1 : 0) << " " << buf << " " << r.depth
        << " " << r.overloads << " "
        << (r.action ? to_string(c, *r.action) : "-") << "\n";
  }
  out << "end\n";
  return out.str();
}

void write_record(const GridCase& c, const EpisodeRecord& rec,
                  const std::string& path) {
  detail::spew(path, record_to_string(c, rec));
}

EpisodeRecord read_record(const GridCase& c, const std::string& path) {
  auto lines = detail::content_lines(detail::slurp(path));
  EpisodeRecord rec;
  std::size_t i = 0;
  auto where = [&]() { return path + ":" + std::to_string(i + 1); };
  if (lines.empty() || lines[0] != "episode")
    throw ParseError(path + ":1: expected 'episode' header");
  ++i;
  std::size_t step_count = 0;
  bool in_steps = false;
  for (; i < lines.size(); ++i) {
    auto toks = detail::tokens(lines[i]);
    if (toks.empty()) continue;
    if (!in_steps) {
      std::string key(toks[0]);
      if (key == "scenario") rec.scenario_id = std::string(toks.at(1));
      else if (key == "agent") rec.agent_name = std::string(toks.at(1));
      else if (key == "mode")
        rec.mode = toks.at(1) == "hard" ? Mode::hard : Mode::easy;
      else if (key == "horizon")
        rec.horizon = static_cast<int>(
            detail::parse_int(toks.at(1), where(), "horizon"));
      else if (key == "start_weekday")
        rec.start_weekday = static_cast<int>(
            detail::parse_int(toks.at(1), where(), "start_weekday"));
      else if (key == "episode_score")
        rec.episode_score =
            detail::parse_double(toks.at(1), where(), "episode_score");
      else if (key == "game_over_step")
        rec.game_over_step =
            toks.at(1) == "-"
                ? std::nullopt
                : std::optional<int>(static_cast<int>(detail::parse_int(
                      toks.at(1), where(), "game_over_step")));
      else if (key == "budget_s")
        rec.budget_s = detail::parse_double(toks.at(1), where(), "budget_s");
      else if (key == "time_consumed_s")
        rec.time_consumed_s =
            detail::parse_double(toks.at(1), where(), "time_consumed_s");
      else if (key == "budget_exceeded")
        rec.budget_exceeded =
            detail::parse_int(toks.at(1), where(), "budget_exceeded") != 0;
      else if (key == "fault") {
        std::string f(lines[i].substr(6));
        rec.faults.push_back(f);
      } else if (key == "steps") {
        step_count = static_cast<std::size_t>(
            detail::parse_int(toks.at(1), where(), "steps"));
        in_steps = true;
      } else {
        throw ParseError(where() + ": unknown record key '" + key + "'");
      }
      continue;
    }
    if (lines[i] == "end") break;
    if (toks.size() < 6)
      throw ParseError(where() + ": expected 't legal score depth overloads action'");
    StepRow row;
    row.t = static_cast<int>(detail::parse_int(toks[0], where(), "t"));
    row.legal = detail::parse_int(toks[1], where(), "legal") != 0;
    row.score = detail::parse_double(toks[2], where(), "score");
    row.depth = static_cast<int>(detail::parse_int(toks[3], where(), "depth"));
    row.overloads =
        static_cast<int>(detail::parse_int(toks[4], where(), "overloads"));
    std::string action_text;
    for (std::size_t k = 5; k < toks.size(); ++k) {
      if (k > 5) action_text += ' ';
      action_text += std::string(toks[k]);
    }
    if (action_text != "-" || row.t > 0)  // reset row carries no action
      row.action = action_from_string(c, action_text, where());
    rec.steps.push_back(std::move(row));
  }
  if (i >= lines.size() || lines[i] != "end")
    throw ParseError(path + ": missing 'end' terminator");
  if (rec.steps.size() != step_count)
    throw ParseError(path + ": steps count " + std::to_string(step_count) +
                     " does not match " + std::to_string(rec.steps.size()) +
                     " rows");
  return rec;
}

}  // namespace gridtop
