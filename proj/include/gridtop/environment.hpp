#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridtop/grid.hpp"
#include "gridtop/power_flow.hpp"
#include "gridtop/scenario.hpp"

// Sequential topology-control environment.  A step applies at most one
// unitary action, solves the DC flow for the next injections, updates
// overload streaks and (in hard mode) trips lines whose overload persisted
// beyond the protection reaction time, then cascades instant trips at the
// hard-overload factor.

namespace gridtop {

enum class Mode { easy, hard };  // easy: no trips, no game-over

struct Rules {
  int reaction_time = 2;   // trips once overload streak exceeds this
  int cooldown = 3;        // steps an acted/tripped asset stays locked
  int max_actions_per_step = 1;
  double hard_overload_factor = 1.5;
};

struct Observation {
  int t = 0;
  Injections injections;            // x(t)
  Injections forecast;              // noisy x(t+1)
  Topology topology;
  std::vector<double> current_a;    // per line
  std::vector<double> margin;       // per line, max(0, 1 - i/imax)
  std::vector<int> overload_streak; // per line
  std::vector<int> line_cooldown;   // per line
  std::vector<int> sub_cooldown;    // per substation
};

struct EnvState {
  int t = 0;
  Topology topology;
  std::vector<int> overload_streak;
  std::vector<int> line_cooldown;
  std::vector<int> sub_cooldown;
  bool game_over = false;
};

struct LegalityResult {
  bool legal = true;
  std::string reason;  // empty when legal
};

struct StepInfo {
  bool illegal = false;
  std::string illegal_reason;
  bool diverged = false;              // the attempted action's solve diverged
  std::vector<int> tripped_lines;     // protection + cascade, this step
  std::vector<std::vector<int>> cascade_trace;  // lines per cascade iteration
};

struct StepResult {
  Observation obs;
  double score = 0.0;
  bool done = false;
  StepInfo info;
};

// Step score: sum over lines of f(margin) with f(x) = 1 - (1-x)^2; inactive
// lines contribute f(0) = 0; illegal actions and diverged states score 0.
double margin_score(double margin);
double score_step(const GridCase& c, const PowerFlowResult& r,
                  bool illegal = false);

// Zero if the episode ended in game-over, otherwise the plain sum.
double score_episode(const std::vector<double>& step_scores, bool game_over);

struct CascadeOutcome {
  Topology topology;  // post-cascade service state
  PowerFlowResult flow;
  std::vector<std::vector<int>> iterations;  // lines tripped per pass
  bool game_over = false;  // some pass diverged or de-energized load
};

// Fixpoint loop: solve, trip every line at or above factor * imax, repeat.
// Diverging at any pass is game-over.
CascadeOutcome run_cascade(const GridCase& c, Topology topo,
                           const Injections& inj, double factor);

class Environment {
 public:
  // initial_topology overrides the reference topology at reset; the oracle
  // uses it to pin a fixed-topology chain.
  Environment(GridCase c, Scenario s, Mode mode, Rules rules = {},
              std::optional<Topology> initial_topology = std::nullopt);

  // Starts at t = 0 with no action.  Throws ValidationError if the scenario
  // shape does not match the case or the initial state diverges.
  Observation reset();

  // Advances t -> t+1 against the true injections x(t+1).
  StepResult step(const Action& a);

  // Same pipeline against the forecast of x(t+1); copies only, never sets
  // done, predicted game-over shows up as score 0.
  StepResult simulate(const Action& a) const;

  // Illegal iff the target asset is cooling down or the action is malformed
  // for the case.  Do-nothing is always legal.
  LegalityResult legality_check(const Action& a) const;

  const EnvState& state() const { return state_; }
  const GridCase& grid() const { return case_; }
  const Scenario& scenario() const { return scenario_; }
  Mode mode() const { return mode_; }
  const Rules& rules() const { return rules_; }
  bool done() const { return done_; }
  int horizon() const { return scenario_.horizon; }

  // Score of the current state's flows (the t = 0 term after reset).
  double current_step_score() const;
  int overload_count() const;

 private:
  struct Outcome;
  Outcome run_pipeline(const EnvState& from, const Action& a,
                       const Injections& inj) const;
  const DcSolver& solver_for(const Topology& t) const;
  Observation make_observation(const EnvState& st,
                               const PowerFlowResult& r) const;

  GridCase case_;
  Scenario scenario_;
  Mode mode_;
  Rules rules_;
  Topology initial_topology_;
  EnvState state_;
  PowerFlowResult current_flow_;
  bool done_ = false;
  bool started_ = false;

  // One-slot factorization cache; episodes are single-threaded, simulate
  // reuses it through mutable access.
  mutable std::optional<Topology> cached_topology_;
  mutable std::shared_ptr<DcSolver> cached_solver_;
};

}  // namespace gridtop
