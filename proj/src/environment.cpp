#include "gridtop/environment.hpp"

#include <algorithm>
#include <cmath>

namespace gridtop {

double margin_score(double margin) {
  double u = 1.0 - margin;
  return 1.0 - u * u;
}

double score_step(const GridCase& c, const PowerFlowResult& r, bool illegal) {
  if (illegal || r.diverged) return 0.0;
  double total = 0.0;
  for (int l = 0; l < static_cast<int>(c.lines.size()); ++l) {
    if (!r.line_active[l]) continue;  // out of service: f(0) = 0
    double m = std::max(0.0, 1.0 - r.current_a[l] / c.lines[l].imax_a);
    total += margin_score(m);
  }
  return total;
}

double score_episode(const std::vector<double>& step_scores, bool game_over) {
  if (game_over) return 0.0;
  double total = 0.0;
  for (double s : step_scores) total += s;
  return total;
}

CascadeOutcome run_cascade(const GridCase& c, Topology topo,
                           const Injections& inj, double factor) {
  CascadeOutcome out;
  for (;;) {
    PowerFlowResult r = solve_dc(c, expand_topology(c, topo), inj);
    if (r.diverged) {
      out.game_over = true;
      out.topology = std::move(topo);
      out.flow = std::move(r);
      return out;
    }
    std::vector<int> trips;
    for (int l = 0; l < static_cast<int>(c.lines.size()); ++l)
      if (r.line_active[l] && r.current_a[l] >= factor * c.lines[l].imax_a)
        trips.push_back(l);
    if (trips.empty()) {
      out.topology = std::move(topo);
      out.flow = std::move(r);
      return out;
    }
    for (int l : trips) topo.line_in[l] = 0;
    out.iterations.push_back(std::move(trips));
  }
}

Environment::Environment(GridCase c, Scenario s, Mode mode, Rules rules,
                         std::optional<Topology> initial_topology)
    : case_(std::move(c)),
      scenario_(std::move(s)),
      mode_(mode),
      rules_(rules),
      initial_topology_(initial_topology ? std::move(*initial_topology)
                                         : reference_topology(case_)) {
  if (scenario_.horizon < 1 ||
      static_cast<int>(scenario_.injections.size()) != scenario_.horizon ||
      static_cast<int>(scenario_.forecasts.size()) != scenario_.horizon)
    throw ValidationError("scenario '" + scenario_.id +
                          "': horizon does not match injection rows");
  for (const auto& row : scenario_.injections)
    if (row.gen_mw.size() != case_.generators.size() ||
        row.load_mw.size() != case_.loads.size())
      throw ValidationError("scenario '" + scenario_.id +
                            "': injection shape does not match case");
}

const DcSolver& Environment::solver_for(const Topology& t) const {
  if (!cached_solver_ || !(*cached_topology_ == t)) {
    cached_solver_ = std::make_shared<DcSolver>(case_, expand_topology(case_, t));
    cached_topology_ = t;
  }
  return *cached_solver_;
}

Observation Environment::make_observation(const EnvState& st,
                                          const PowerFlowResult& r) const {
  Observation obs;
  obs.t = st.t;
  obs.injections = scenario_.injections[st.t];
  obs.forecast = scenario_.forecasts[st.t];
  obs.topology = st.topology;
  obs.current_a = r.current_a;
  obs.margin.assign(case_.lines.size(), 0.0);
  for (int l = 0; l < static_cast<int>(case_.lines.size()); ++l)
    if (r.line_active[l])
      obs.margin[l] =
          std::max(0.0, 1.0 - r.current_a[l] / case_.lines[l].imax_a);
  obs.overload_streak = st.overload_streak;
  obs.line_cooldown = st.line_cooldown;
  obs.sub_cooldown = st.sub_cooldown;
  return obs;
}

Observation Environment::reset() {
  state_ = EnvState{};
  state_.topology = initial_topology_;
  state_.overload_streak.assign(case_.lines.size(), 0);
  state_.line_cooldown.assign(case_.lines.size(), 0);
  state_.sub_cooldown.assign(case_.num_substations, 0);

  current_flow_ = solver_for(state_.topology).solve(scenario_.injections[0]);
  if (current_flow_.diverged)
    throw ValidationError("scenario '" + scenario_.id +
                          "': initial topology diverges at t=0");
  for (int l : check_overloads(case_, current_flow_))
    state_.overload_streak[l] = 1;
  done_ = scenario_.horizon == 1;
  started_ = true;
  return make_observation(state_, current_flow_);
}

LegalityResult Environment::legality_check(const Action& a) const {
  if (a.kind == ActionKind::do_nothing) return {};
  if (a.kind == ActionKind::switch_line) {
    if (a.asset < 0 || a.asset >= static_cast<int>(case_.lines.size()))
      return {false, "unknown line id " + std::to_string(a.asset + 1)};
    if (state_.line_cooldown[a.asset] > 1)
      return {false, "line " + std::to_string(a.asset + 1) + " cooling down"};
    return {};
  }
  if (a.asset < 0 || a.asset >= case_.num_substations)
    return {false, "unknown substation id " + std::to_string(a.asset + 1)};
  if (a.config.size() != case_.sub_elements[a.asset].size())
    return {false, "bus vector for substation " + std::to_string(a.asset + 1) +
                       " has length " + std::to_string(a.config.size()) +
                       ", expected " +
                       std::to_string(case_.sub_elements[a.asset].size())};
  for (auto b : a.config)
    if (b > 1) return {false, "bus labels must be 0 or 1"};
  if (state_.sub_cooldown[a.asset] > 1)
    return {false,
            "substation " + std::to_string(a.asset + 1) + " cooling down"};
  return {};
}

struct Environment::Outcome {
  EnvState next;
  PowerFlowResult flow;
  double score = 0.0;
  bool ends_episode = false;
  StepInfo info;
};

Environment::Outcome Environment::run_pipeline(const EnvState& from,
                                               const Action& a,
                                               const Injections& inj) const {
  Outcome out;
  EnvState& st = out.next;
  st = from;
  st.t = from.t + 1;
  for (auto& cd : st.line_cooldown) cd = std::max(0, cd - 1);
  for (auto& cd : st.sub_cooldown) cd = std::max(0, cd - 1);

  // Stage 2: legality; illegal actions become do-nothing and zero the score.
  Action act = a;
  {
    // legality_check reads the pre-decrement state, so compare against the
    // already-decremented copy here.
    LegalityResult lr;
    if (act.kind == ActionKind::switch_line &&
        (act.asset < 0 || act.asset >= static_cast<int>(case_.lines.size())))
      lr = {false, "unknown line id " + std::to_string(act.asset + 1)};
    else if (act.kind == ActionKind::set_substation_config &&
             (act.asset < 0 || act.asset >= case_.num_substations))
      lr = {false, "unknown substation id " + std::to_string(act.asset + 1)};
    else if (act.kind == ActionKind::set_substation_config &&
             act.config.size() != case_.sub_elements[act.asset].size())
      lr = {false, "bus vector length mismatch for substation " +
                       std::to_string(act.asset + 1)};
    else if (act.kind == ActionKind::switch_line &&
             st.line_cooldown[act.asset] > 0)
      lr = {false, "line " + std::to_string(act.asset + 1) + " cooling down"};
    else if (act.kind == ActionKind::set_substation_config &&
             st.sub_cooldown[act.asset] > 0)
      lr = {false, "substation " + std::to_string(act.asset + 1) +
                       " cooling down"};
    else if (act.kind == ActionKind::set_substation_config) {
      for (auto b : act.config)
        if (b > 1) lr = {false, "bus labels must be 0 or 1"};
    }
    if (!lr.legal) {
      out.info.illegal = true;
      out.info.illegal_reason = lr.reason;
      act = Action::nothing();
    }
  }

  // Stage 3: apply and solve against the incoming injections.
  if (act.kind != ActionKind::do_nothing) {
    st.topology = apply_action(case_, st.topology, act);
    if (act.kind == ActionKind::switch_line)
      st.line_cooldown[act.asset] = rules_.cooldown;
    else
      st.sub_cooldown[act.asset] = rules_.cooldown;
  }
  PowerFlowResult flow = solver_for(st.topology).solve(inj);

  // Stage 4: divergence policy.  Divergence is structural, so reverting to
  // the previous topology always yields a solvable state again.
  if (flow.diverged && act.kind != ActionKind::do_nothing) {
    out.info.diverged = true;
    st.topology = from.topology;
    st.line_cooldown = from.line_cooldown;
    st.sub_cooldown = from.sub_cooldown;
    for (auto& cd : st.line_cooldown) cd = std::max(0, cd - 1);
    for (auto& cd : st.sub_cooldown) cd = std::max(0, cd - 1);
    flow = solver_for(st.topology).solve(inj);
  }
  if (flow.diverged) {
    out.info.diverged = true;
    if (mode_ == Mode::hard) {
      st.game_over = true;
      out.ends_episode = true;
    }
    out.flow = std::move(flow);
    out.score = 0.0;
    return out;
  }

  // Stage 5: streaks, protection trips, cascade.
  for (int l = 0; l < static_cast<int>(case_.lines.size()); ++l) {
    bool over = flow.line_active[l] && flow.current_a[l] >= case_.lines[l].imax_a;
    st.overload_streak[l] = over ? st.overload_streak[l] + 1 : 0;
  }
  if (mode_ == Mode::hard) {
    std::vector<int> protection_trips;
    for (int l = 0; l < static_cast<int>(case_.lines.size()); ++l)
      if (st.overload_streak[l] > rules_.reaction_time)
        protection_trips.push_back(l);
    if (!protection_trips.empty()) {
      Topology tripped = st.topology;
      for (int l : protection_trips) tripped.line_in[l] = 0;
      CascadeOutcome cas =
          run_cascade(case_, std::move(tripped), inj, rules_.hard_overload_factor);
      out.info.tripped_lines = protection_trips;
      out.info.cascade_trace = cas.iterations;
      for (const auto& pass : cas.iterations)
        for (int l : pass) out.info.tripped_lines.push_back(l);
      for (int l : out.info.tripped_lines) {
        st.line_cooldown[l] = rules_.cooldown;
        st.overload_streak[l] = 0;
      }
      st.topology = std::move(cas.topology);
      flow = std::move(cas.flow);
      if (cas.game_over) {
        st.game_over = true;
        out.ends_episode = true;
      }
    }
  }

  // Stage 6: scoring on the post-cascade flows.
  out.score = score_step(case_, flow, out.info.illegal || out.info.diverged);
  out.flow = std::move(flow);
  return out;
}

StepResult Environment::step(const Action& a) {
  if (!started_) throw ValidationError("step before reset");
  if (done_) throw ValidationError("step after episode end");

  Outcome out = run_pipeline(state_, a, scenario_.injections[state_.t + 1]);
  state_ = std::move(out.next);
  current_flow_ = std::move(out.flow);
  done_ = out.ends_episode || state_.t >= scenario_.horizon - 1;

  StepResult res;
  res.obs = make_observation(state_, current_flow_);
  res.score = out.score;
  res.done = done_;
  res.info = std::move(out.info);
  return res;
}

StepResult Environment::simulate(const Action& a) const {
  if (!started_) throw ValidationError("simulate before reset");
  if (done_) throw ValidationError("simulate after episode end");

  Outcome out = run_pipeline(state_, a, scenario_.forecasts[state_.t]);
  StepResult res;
  res.obs = make_observation(out.next, out.flow);
  res.obs.injections = scenario_.forecasts[state_.t];  // x(t+1) is unknown
  res.score = out.score;
  res.done = false;
  res.info = std::move(out.info);
  return res;
}

double Environment::current_step_score() const {
  return score_step(case_, current_flow_, false);
}

int Environment::overload_count() const {
  return static_cast<int>(check_overloads(case_, current_flow_).size());
}

}  // namespace gridtop
