#include "gridtop/oracle.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "text_util.hpp"

namespace gridtop {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void validate_dictionary(const GridCase& c, const ActionDictionary& d) {
  Topology ref = reference_topology(c);
  for (std::size_t i = 0; i < d.actions.size(); ++i) {
    const Action& a = d.actions[i];
    if (a.kind == ActionKind::do_nothing)
      throw ValidationError("dictionary entry " + std::to_string(i + 1) +
                            ": do-nothing is not a dictionary action");
    apply_action(c, ref, a);  // throws on malformed asset/config
    for (std::size_t j = 0; j < i; ++j)
      if (d.actions[j] == a)
        throw ValidationError("dictionary entry " + std::to_string(i + 1) +
                              ": duplicate of entry " + std::to_string(j + 1));
  }
}

ActionDictionary load_dictionary(const GridCase& c, const std::string& path) {
  ActionDictionary d;
  auto lines = detail::content_lines(detail::slurp(path));
  for (std::size_t i = 0; i < lines.size(); ++i)
    d.actions.push_back(action_from_string(
        c, std::string(lines[i]), path + ":" + std::to_string(i + 1)));
  validate_dictionary(c, d);
  return d;
}

void save_dictionary(const GridCase& c, const ActionDictionary& d,
                     const std::string& path) {
  std::string out;
  for (const Action& a : d.actions) out += to_string(c, a) + "\n";
  detail::spew(path, out);
}

std::uint64_t dictionary_hash(const GridCase& c, const ActionDictionary& d) {
  std::string s;
  for (const Action& a : d.actions) s += to_string(c, a) + "\n";
  return detail::fnv1a64(s);
}

int TopologySpace::neighbor(int topo, int asset, int choice) const {
  std::uint32_t rank = radix_index[topo];
  int cur = choice_of[topo][asset];
  rank = static_cast<std::uint32_t>(rank + (choice - cur) * weights[asset]);
  return index_of_radix[rank];
}

TopologySpace enumerate_topologies(const GridCase& c,
                                   const ActionDictionary& d,
                                   std::size_t cap) {
  validate_dictionary(c, d);
  Topology ref = reference_topology(c);

  TopologySpace sp;
  // Substation assets first (ascending), then line assets.
  std::vector<std::vector<const Action*>> sub_actions(c.num_substations);
  std::vector<std::uint8_t> line_flag(c.lines.size(), 0);
  for (const Action& a : d.actions) {
    if (a.kind == ActionKind::set_substation_config) {
      if (a.config == ref.bus[a.asset]) continue;  // no-op target
      sub_actions[a.asset].push_back(&a);
    } else {
      line_flag[a.asset] = 1;
    }
  }
  for (int s = 0; s < c.num_substations; ++s) {
    if (sub_actions[s].empty()) continue;
    TopologySpace::Asset asset;
    asset.is_line = false;
    asset.index = s;
    asset.choices.push_back(Action::set_config(s, ref.bus[s]));
    for (const Action* a : sub_actions[s]) asset.choices.push_back(*a);
    sp.assets.push_back(std::move(asset));
  }
  for (int l = 0; l < static_cast<int>(c.lines.size()); ++l) {
    if (!line_flag[l]) continue;
    TopologySpace::Asset asset;
    asset.is_line = true;
    asset.index = l;
    asset.choices.push_back(Action::switch_line(l));  // back in service
    asset.choices.push_back(Action::switch_line(l));  // out of service
    sp.assets.push_back(std::move(asset));
  }

  const int n = static_cast<int>(sp.assets.size());
  std::size_t product = 1;
  for (const auto& a : sp.assets) {
    product *= a.choices.size();
    if (product > cap)
      break;
  }
  if (product > cap) {
    std::size_t full = 1;
    for (const auto& a : sp.assets) full *= a.choices.size();
    throw ValidationError("enumerate_topologies: " + std::to_string(full) +
                          " combinations exceed the cap of " +
                          std::to_string(cap));
  }

  sp.weights.assign(n, 1);
  for (int a = n - 2; a >= 0; --a)
    sp.weights[a] = sp.weights[a + 1] *
                    static_cast<std::uint32_t>(sp.assets[a + 1].choices.size());

  sp.index_of_radix.assign(product, -1);
  std::unordered_map<std::size_t, std::vector<int>> dedup;
  std::vector<std::uint8_t> digits(n, 0);
  for (std::size_t rank = 0; rank < product; ++rank) {
    Topology t = ref;
    for (int a = 0; a < n; ++a) {
      const auto& asset = sp.assets[a];
      if (asset.is_line)
        t.line_in[asset.index] = digits[a] == 0 ? 1 : 0;
      else if (digits[a] > 0)
        t.bus[asset.index] = sp.assets[a].choices[digits[a]].config;
    }
    std::size_t h = topology_hash(t);
    int found = -1;
    for (int idx : dedup[h])
      if (sp.topologies[idx] == t) {
        found = idx;
        break;
      }
    if (found < 0) {
      found = static_cast<int>(sp.topologies.size());
      sp.topologies.push_back(std::move(t));
      sp.choice_of.push_back(digits);
      sp.radix_index.push_back(static_cast<std::uint32_t>(rank));
      dedup[h].push_back(found);
    }
    sp.index_of_radix[rank] = found;

    for (int a = n - 1; a >= 0; --a) {  // increment mixed-radix counter
      if (++digits[a] < sp.assets[a].choices.size()) break;
      digits[a] = 0;
    }
  }
  sp.reference_index = 0;
  return sp;
}

RewardMatrix evaluate_chains(const GridCase& c, const Scenario& s,
                             const TopologySpace& space, Rules rules,
                             ChainMode mode) {
  RewardMatrix m;
  m.num_topologies = static_cast<int>(space.topologies.size());
  m.horizon = s.horizon;
  m.value.assign(static_cast<std::size_t>(m.num_topologies) * m.horizon, 0.0);
  m.feasible.assign(m.value.size(), 0);

  Environment(c, s, Mode::hard, rules);  // shape validation up front

  for (int topo = 0; topo < m.num_topologies; ++topo) {
    std::size_t base = static_cast<std::size_t>(topo) * m.horizon;
    if (mode == ChainMode::bandit) {
      ElectricalGraph g = expand_topology(c, space.topologies[topo]);
      DcSolver solver(c, g);
      for (int t = 0; t < m.horizon; ++t) {
        PowerFlowResult r = solver.solve(s.injections[t]);
        if (r.diverged) continue;  // masked; structural, so every t
        m.value[base + t] = score_step(c, r);
        m.feasible[base + t] = 1;
      }
      continue;
    }
    Environment env(c, s, Mode::hard, rules, space.topologies[topo]);
    try {
      env.reset();
    } catch (const ValidationError&) {
      continue;  // divergent at t=0: fully masked
    }
    m.value[base] = env.current_step_score();
    m.feasible[base] = 1;
    while (!env.done()) {
      StepResult res = env.step(Action::nothing());
      if (env.state().game_over) break;  // masked from here on
      m.value[base + res.obs.t] = res.score;
      m.feasible[base + res.obs.t] = 1;
    }
  }
  return m;
}

OracleGraph build_graph(const TopologySpace& space, const RewardMatrix& m,
                        const ActionDictionary& d, const Rules& rules) {
  if (m.num_topologies != static_cast<int>(space.topologies.size()))
    throw ValidationError("build_graph: matrix does not cover the space");
  // Every non-reference choice must come from the dictionary it was built
  // with; catches mismatched (space, dictionary) pairs early.
  for (const auto& asset : space.assets)
    for (std::size_t ch = 1; ch < asset.choices.size(); ++ch) {
      if (asset.is_line) break;  // line choices are the switch itself
      bool found = false;
      for (const Action& a : d.actions)
        if (a == asset.choices[ch]) {
          found = true;
          break;
        }
      if (!found)
        throw ValidationError(
            "build_graph: topology space does not match the dictionary");
    }
  OracleGraph g;
  g.space = &space;
  g.matrix = &m;
  g.rules = rules;
  g.moves.resize(space.topologies.size());
  for (int topo = 0; topo < static_cast<int>(space.topologies.size()); ++topo)
    for (int a = 0; a < static_cast<int>(space.assets.size()); ++a) {
      int cur = space.choice_of[topo][a];
      for (int ch = 0; ch < static_cast<int>(space.assets[a].choices.size());
           ++ch) {
        if (ch == cur) continue;
        int dest = space.neighbor(topo, a, ch);
        if (dest >= 0)
          g.moves[topo].push_back({a, static_cast<std::uint8_t>(ch), dest});
      }
    }
  return g;
}

bool OracleGraph::has_edge(int from, int to) const {
  if (from == to) return true;
  for (const Move& mv : moves[from])
    if (mv.dest == to) return true;
  return false;
}

namespace {

struct BestEntry {
  double v = kNegInf;
  std::int32_t c = std::numeric_limits<std::int32_t>::max();
  std::int16_t m2 = -1;
};

inline bool better(double v, std::int32_t c, double bv, std::int32_t bc) {
  return v > bv || (v == bv && c < bc);
}

}  // namespace

OracleResult longest_path(const OracleGraph& g, const OracleOptions& opt) {
  const TopologySpace& sp = *g.space;
  const RewardMatrix& M = *g.matrix;
  const int NT = static_cast<int>(sp.topologies.size());
  const int T = M.horizon;
  const int n = static_cast<int>(sp.assets.size());
  const int ref = sp.reference_index;
  if (!M.ok(ref, 0))
    throw ValidationError("longest_path: reference topology infeasible at t=0");

  // Cooldown states (m1, m2): assets moved one and two steps ago (0 = none).
  // Relaxed mode collapses everything to a single state.
  const int mvals = opt.relaxed ? 1 : n + 1;
  std::vector<std::int16_t> sid(static_cast<std::size_t>(mvals) * mvals, -1);
  std::vector<std::pair<int, int>> states;
  if (opt.relaxed) {
    sid[0] = 0;
    states.push_back({0, 0});
  } else {
    for (int m1 = 0; m1 <= n; ++m1)
      for (int m2 = 0; m2 <= n; ++m2) {
        if (m1 != 0 && m1 == m2) continue;
        sid[m1 * mvals + m2] = static_cast<std::int16_t>(states.size());
        states.push_back({m1, m2});
      }
  }
  const int S = static_cast<int>(states.size());
  auto state_id = [&](int m1, int m2) { return sid[m1 * mvals + m2]; };

  int max_choices = 2;
  for (const auto& a : sp.assets)
    max_choices = std::max(max_choices, static_cast<int>(a.choices.size()));
  const bool narrow = n <= 15 && max_choices <= 16;
  const std::size_t layer_nodes = static_cast<std::size_t>(NT) * S;
  const std::size_t parent_bytes = layer_nodes * T * (narrow ? 1 : 2);
  if (parent_bytes > std::size_t{2} << 30)
    throw ValidationError(
        "longest_path: course reconstruction needs " +
        std::to_string(parent_bytes) +
        " bytes; use --relaxed or a smaller dictionary/horizon");
  std::vector<std::uint8_t> parent8;
  std::vector<std::uint16_t> parent16;
  if (narrow)
    parent8.assign(layer_nodes * T, 0);
  else
    parent16.assign(layer_nodes * T, 0);
  auto store_parent = [&](int t, std::size_t node, int p2, int c_old) {
    if (narrow)
      parent8[static_cast<std::size_t>(t) * layer_nodes + node] =
          static_cast<std::uint8_t>(p2 * 16 + c_old);
    else
      parent16[static_cast<std::size_t>(t) * layer_nodes + node] =
          static_cast<std::uint16_t>(p2 * 256 + c_old);
  };
  auto load_parent = [&](int t, std::size_t node) {
    int raw = narrow
                  ? parent8[static_cast<std::size_t>(t) * layer_nodes + node]
                  : parent16[static_cast<std::size_t>(t) * layer_nodes + node];
    return narrow ? std::pair<int, int>{raw / 16, raw % 16}
                  : std::pair<int, int>{raw / 256, raw % 256};
  };

  std::vector<double> vprev(layer_nodes, kNegInf), vcur(layer_nodes, kNegInf);
  std::vector<std::int32_t> cprev(layer_nodes, 0), ccur(layer_nodes, 0);
  vprev[static_cast<std::size_t>(ref) * S + state_id(0, 0)] = M.r(ref, 0);

  // Per (topology, m1): best and second-best source over m2, previous layer.
  std::vector<BestEntry> best1(static_cast<std::size_t>(NT) * mvals);
  std::vector<BestEntry> best2(best1.size());

  int reached = 0;
  for (int t = 1; t < T; ++t) {
    std::fill(vcur.begin(), vcur.end(), kNegInf);

    for (std::size_t i = 0; i < best1.size(); ++i) {
      best1[i] = BestEntry{};
      best2[i] = BestEntry{};
    }
    for (int topo = 0; topo < NT; ++topo) {
      std::size_t base = static_cast<std::size_t>(topo) * S;
      for (int s = 0; s < S; ++s) {
        double v = vprev[base + s];
        if (v == kNegInf) continue;
        std::int32_t cnt = cprev[base + s];
        auto [m1, m2] = states[s];
        BestEntry& b1 = best1[static_cast<std::size_t>(topo) * mvals + m1];
        BestEntry& b2 = best2[static_cast<std::size_t>(topo) * mvals + m1];
        if (better(v, cnt, b1.v, b1.c)) {
          b2 = b1;
          b1 = {v, cnt, static_cast<std::int16_t>(m2)};
        } else if (better(v, cnt, b2.v, b2.c)) {
          b2 = {v, cnt, static_cast<std::int16_t>(m2)};
        }
      }
    }

    bool any = false;
    for (int topo = 0; topo < NT; ++topo) {
      if (!M.ok(topo, t)) continue;
      double gain = M.r(topo, t);
      std::size_t dbase = static_cast<std::size_t>(topo) * S;

      // Stay edges: (m1, m2) -> (0, m1) on the same topology.
      for (int m1 = 0; m1 < mvals; ++m1) {
        const BestEntry& b = best1[static_cast<std::size_t>(topo) * mvals + m1];
        if (b.v == kNegInf) continue;
        int ds = opt.relaxed ? 0 : state_id(0, m1);
        double v = b.v + gain;
        if (better(v, b.c, vcur[dbase + ds], ccur[dbase + ds])) {
          vcur[dbase + ds] = v;
          ccur[dbase + ds] = b.c;
          store_parent(t, dbase + ds, b.m2, 0);
          any = true;
        }
      }

      // Move edges: change exactly one asset's choice.
      for (int a = 0; a < n; ++a) {
        int cnew = sp.choice_of[topo][a];
        int k = a + 1;  // state label for this asset
        for (int ch = 0;
             ch < static_cast<int>(sp.assets[a].choices.size()); ++ch) {
          if (ch == cnew) continue;
          int src = sp.neighbor(topo, a, ch);
          if (src < 0) continue;
          if (opt.relaxed) {
            const BestEntry& b = best1[static_cast<std::size_t>(src) * mvals];
            if (b.v == kNegInf) continue;
            double v = b.v + gain;
            std::int32_t cnt = b.c + 1;
            if (better(v, cnt, vcur[dbase], ccur[dbase])) {
              vcur[dbase] = v;
              ccur[dbase] = cnt;
              store_parent(t, dbase, a + 1, ch);  // relaxed: (asset+1, old choice)
              any = true;
            }
            continue;
          }
          for (int m1 = 0; m1 <= n; ++m1) {
            if (m1 == k) continue;  // asset still cooling from t-1
            const BestEntry* b =
                &best1[static_cast<std::size_t>(src) * mvals + m1];
            if (b->m2 == k)  // cooling from t-2: take the runner-up
              b = &best2[static_cast<std::size_t>(src) * mvals + m1];
            if (b->v == kNegInf) continue;
            int ds = state_id(k, m1);
            double v = b->v + gain;
            std::int32_t cnt = b->c + 1;
            if (better(v, cnt, vcur[dbase + ds], ccur[dbase + ds])) {
              vcur[dbase + ds] = v;
              ccur[dbase + ds] = cnt;
              store_parent(t, dbase + ds, b->m2, ch);
              any = true;
            }
          }
        }
      }
    }

    if (!any) break;
    reached = t;
    vprev.swap(vcur);
    cprev.swap(ccur);
  }

  // Best terminal node at the furthest reachable layer.
  OracleResult res;
  res.reached_t = reached;
  res.complete = reached == T - 1;
  std::size_t best_node = 0;
  double bv = kNegInf;
  std::int32_t bc = std::numeric_limits<std::int32_t>::max();
  for (std::size_t node = 0; node < layer_nodes; ++node)
    if (better(vprev[node], cprev[node], bv, bc)) {
      bv = vprev[node];
      bc = cprev[node];
      best_node = node;
    }
  res.score = bv;
  res.num_actions = bc;

  // Walk parents back to t=0, emitting the move actions.
  int topo = static_cast<int>(best_node) / S;
  int s = static_cast<int>(best_node) % S;
  for (int t = reached; t >= 1; --t) {
    auto [p2, c_old] = load_parent(t, static_cast<std::size_t>(topo) * S + s);
    if (opt.relaxed) {
      if (p2 == 0) continue;  // stay edge
      int a = p2 - 1;
      // The edge lands at layer t, so the action is issued at state t-1.
      res.course.push_back({t - 1, sp.assets[a].choices[sp.choice_of[topo][a]]});
      topo = sp.neighbor(topo, a, c_old);
      continue;
    }
    auto [m1, m2] = states[s];
    if (m1 == 0) {
      s = state_id(m2, p2);
    } else {
      int a = m1 - 1;
      res.course.push_back({t - 1, sp.assets[a].choices[sp.choice_of[topo][a]]});
      topo = sp.neighbor(topo, a, c_old);
      s = state_id(m2, p2);
    }
  }
  std::reverse(res.course.begin(), res.course.end());
  return res;
}

double normalized_score(double agent_score, double dn_score,
                        double oracle_score) {
  double denom = oracle_score - dn_score;
  if (denom == 0.0)
    throw ValidationError("normalized_score: oracle score equals DN score");
  return (agent_score - dn_score) / denom;
}

std::uint64_t reward_cache_key(const GridCase& c, const ActionDictionary& d,
                               const Scenario& s, const Rules& rules,
                               ChainMode mode) {
  std::string blob = case_to_string(c);
  for (const Action& a : d.actions) blob += to_string(c, a) + "\n";
  blob += s.id + "|" + std::to_string(s.seed) + "|" +
          std::to_string(s.horizon) + "|" + std::to_string(rules.reaction_time) +
          "|" + std::to_string(rules.cooldown) + "|" +
          detail::fmt_double(rules.hard_overload_factor) + "|" +
          (mode == ChainMode::bandit ? "bandit" : "episode") + "\n";
  // Injection data participates so a hand-edited scenario misses the cache.
  for (const Injections& inj : s.injections) {
    for (double v : inj.gen_mw) blob += detail::fmt_double(v) + ",";
    for (double v : inj.load_mw) blob += detail::fmt_double(v) + ",";
  }
  return detail::fnv1a64(blob);
}

namespace {
constexpr char kCacheMagic[8] = {'G', 'T', 'R', 'M', 'X', '0', '1', '\n'};
}

bool load_reward_matrix(const std::string& path, std::uint64_t key,
                        RewardMatrix& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t file_key = 0;
  std::int32_t nt = 0, horizon = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&file_key), 8);
  in.read(reinterpret_cast<char*>(&nt), 4);
  in.read(reinterpret_cast<char*>(&horizon), 4);
  if (!in || std::memcmp(magic, kCacheMagic, 8) != 0 || file_key != key ||
      nt <= 0 || horizon <= 0)
    return false;
  RewardMatrix m;
  m.num_topologies = nt;
  m.horizon = horizon;
  std::size_t cells = static_cast<std::size_t>(nt) * horizon;
  m.value.resize(cells);
  m.feasible.resize(cells);
  in.read(reinterpret_cast<char*>(m.value.data()), cells * sizeof(double));
  in.read(reinterpret_cast<char*>(m.feasible.data()), cells);
  if (!in) return false;
  out = std::move(m);
  return true;
}

void save_reward_matrix(const std::string& path, std::uint64_t key,
                        const RewardMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write cache file: " + path);
  out.write(kCacheMagic, 8);
  out.write(reinterpret_cast<const char*>(&key), 8);
  std::int32_t nt = m.num_topologies, horizon = m.horizon;
  out.write(reinterpret_cast<const char*>(&nt), 4);
  out.write(reinterpret_cast<const char*>(&horizon), 4);
  std::size_t cells = static_cast<std::size_t>(nt) * horizon;
  out.write(reinterpret_cast<const char*>(m.value.data()),
            cells * sizeof(double));
  out.write(reinterpret_cast<const char*>(m.feasible.data()), cells);
  if (!out) throw ParseError("write failed: " + path);
}

}  // namespace gridtop
