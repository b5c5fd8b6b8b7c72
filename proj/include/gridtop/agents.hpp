#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridtop/environment.hpp"

// Agent interface, the baseline policies, and the episode runner with
// wall-clock budgeting.  Agent think time includes its simulate calls;
// environment stepping is not charged.

namespace gridtop {

using SimulateFn = std::function<StepResult(const Action&)>;

class Agent {
 public:
  virtual ~Agent() = default;
  virtual const std::string& name() const = 0;
  virtual Action act(const Observation& obs, const SimulateFn& simulate) = 0;
};

// Never acts; stays in the reference topology.
std::unique_ptr<Agent> baseline_dn();

// Walks to `target` one legal unitary action per step (substations in index
// order, then lines), re-issuing moves if protections undo them; do-nothing
// once there.
std::unique_ptr<Agent> baseline_dn_tau(Topology target,
                                       std::string name = "dn-tau");

// Simulates do-nothing plus every legal dictionary action each step and
// takes the best immediate score; ties go to do-nothing, then to the
// earliest dictionary entry (keep the dictionary sorted by asset id).
std::unique_ptr<Agent> baseline_greedy(std::vector<Action> dictionary,
                                       std::string name = "greedy");

// Extra actions + every single line switch, deduplicated, in canonical order
// (substation configs by substation then vector, then line switches by line).
std::vector<Action> default_greedy_dictionary(const GridCase& c,
                                              const std::vector<Action>& extra);

struct StepRow {
  int t = 0;
  std::optional<Action> action;  // empty on the reset row
  bool legal = true;
  double score = 0.0;
  int depth = 0;  // unitary actions from the reference topology; -1 unknown
  int overloads = 0;
};

struct EpisodeRecord {
  std::string scenario_id;
  std::string agent_name;
  Mode mode = Mode::easy;
  int horizon = 0;
  int start_weekday = 0;
  std::vector<StepRow> steps;  // row 0 is the reset state
  double episode_score = 0.0;
  std::optional<int> game_over_step;
  std::optional<double> budget_s;  // timing is serialized only when set
  double time_consumed_s = 0.0;
  bool budget_exceeded = false;
  std::vector<std::string> faults;
};

// Drives reset/step until horizon, game-over, or budget exhaustion.  Agent
// exceptions become do-nothing with a recorded fault.  Exceeding the budget
// stops the episode and forces its score to 0.
EpisodeRecord run_episode(Agent& agent, const GridCase& c, const Scenario& s,
                          Mode mode,
                          std::optional<double> budget_s = std::nullopt);

// G(t) = sum_{k=t+1..T} gamma^{k-t-1} r(k) over rewards r(t+1..T).
double discounted_return(const std::vector<double>& rewards, double gamma);

std::string record_to_string(const GridCase& c, const EpisodeRecord& rec);
void write_record(const GridCase& c, const EpisodeRecord& rec,
                  const std::string& path);
EpisodeRecord read_record(const GridCase& c, const std::string& path);

}  // namespace gridtop
