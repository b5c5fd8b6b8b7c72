#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridtop/environment.hpp"

// Hindsight upper bound: enumerate the topology space spanned by a dictionary
// of unitary actions, evaluate every topology as a fixed chain over the
// scenario, and take the longest path through the layered transition DAG
// under the operational rules.

namespace gridtop {

struct ActionDictionary {
  std::vector<Action> actions;  // unitary, no duplicates
};

ActionDictionary load_dictionary(const GridCase& c, const std::string& path);
void save_dictionary(const GridCase& c, const ActionDictionary& d,
                     const std::string& path);
void validate_dictionary(const GridCase& c, const ActionDictionary& d);
std::uint64_t dictionary_hash(const GridCase& c, const ActionDictionary& d);

// Per-asset view of the dictionary: choice 0 is the reference state, the
// rest are dictionary targets.  Topologies are every per-asset choice
// combination applied to the reference, normalized and deduplicated;
// index 0 is the reference itself.
struct TopologySpace {
  struct Asset {
    bool is_line = false;
    int index = 0;                 // line or substation index
    std::vector<Action> choices;   // [0] returns the asset to reference
  };
  std::vector<Asset> assets;
  std::vector<Topology> topologies;
  std::vector<std::vector<std::uint8_t>> choice_of;  // [topo][asset]
  std::vector<std::uint32_t> radix_index;            // [topo] pre-dedup rank
  std::vector<std::int32_t> index_of_radix;          // rank -> topo (or -1)
  std::vector<std::uint32_t> weights;                // mixed-radix weights
  int reference_index = 0;

  int neighbor(int topo, int asset, int choice) const;  // -1 if deduped away
};

TopologySpace enumerate_topologies(const GridCase& c,
                                   const ActionDictionary& d,
                                   std::size_t cap = 20000);

struct RewardMatrix {
  int num_topologies = 0;
  int horizon = 0;
  std::vector<double> value;           // [topo * horizon + t]
  std::vector<std::uint8_t> feasible;  // false from divergence/game-over on

  double r(int topo, int t) const { return value[topo * horizon + t]; }
  bool ok(int topo, int t) const { return feasible[topo * horizon + t] != 0; }
};

// How r(topo, t) is produced.  `bandit` evaluates the pristine topology
// against x(t) independently per step (mask = divergence), which makes the
// longest-path score reproducible exactly by replaying the course in an
// easy-mode environment.  `episode` runs the topology as a fixed hard-mode
// chain (protections on, no actions) and masks from the chain's divergence
// or game-over onward; rewards past a protection trip then describe the
// degraded chain state rather than the labeled topology.
enum class ChainMode { bandit, episode };

RewardMatrix evaluate_chains(const GridCase& c, const Scenario& s,
                             const TopologySpace& space, Rules rules = {},
                             ChainMode mode = ChainMode::bandit);

// Layered DAG over (topology, cooldown state, t).  Edges advance t by one:
// a stay edge, or a move edge between choice tuples differing in exactly one
// asset.  Cooldown legality is enforced in the longest-path DP through the
// exact state (asset moved one step ago, asset moved two steps ago).
struct OracleGraph {
  const TopologySpace* space = nullptr;
  const RewardMatrix* matrix = nullptr;
  Rules rules;

  struct Move {
    int asset;
    std::uint8_t choice;  // destination choice for that asset
    int dest;             // destination topology
  };
  std::vector<std::vector<Move>> moves;  // outgoing, per topology

  bool has_edge(int from, int to) const;  // single move or stay, any t
};

OracleGraph build_graph(const TopologySpace& space, const RewardMatrix& m,
                        const ActionDictionary& d, const Rules& rules);

struct OracleOptions {
  bool relaxed = false;  // drop cooldown bookkeeping (still an upper bound)
};

struct CourseStep {
  int t = 0;  // state the action is issued in; its effect lands at t + 1
  Action action;
};

struct OracleResult {
  double score = 0.0;  // r(ref, 0) + sum of edge weights on the best path
  std::vector<CourseStep> course;
  int reached_t = 0;     // last layer a feasible path attains
  bool complete = false; // reached_t == horizon - 1
  int num_actions = 0;
};

// Exact DP over time layers; ties broken toward fewer actions, then lower
// predecessor topology index.  If no path reaches the horizon the result
// reports the furthest reachable layer instead.
OracleResult longest_path(const OracleGraph& g, const OracleOptions& opt = {});

// (agent - dn) / (oracle - dn); throws ValidationError on a zero denominator.
double normalized_score(double agent_score, double dn_score,
                        double oracle_score);

// Binary reward-matrix cache, keyed by (case, dictionary, scenario, rules,
// chain mode).
std::uint64_t reward_cache_key(const GridCase& c, const ActionDictionary& d,
                               const Scenario& s, const Rules& rules,
                               ChainMode mode);
bool load_reward_matrix(const std::string& path, std::uint64_t key,
                        RewardMatrix& out);
void save_reward_matrix(const std::string& path, std::uint64_t key,
                        const RewardMatrix& m);

}  // namespace gridtop
