#include "gridtop/power_flow.hpp"

#include <algorithm>
#include <cmath>

namespace gridtop {

namespace {

// In-place LU with partial pivoting on a dense row-major matrix.  Returns
// false if no pivot above tolerance can be found (singular system).
bool lu_factor(std::vector<double>& a, std::vector<int>& perm, int n) {
  perm.resize(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::abs(a[k * n + k]);
    for (int i = k + 1; i < n; ++i) {
      double v = std::abs(a[i * n + k]);
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best < kPivotTolerance) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
      std::swap(perm[k], perm[piv]);
    }
    double d = a[k * n + k];
    for (int i = k + 1; i < n; ++i) {
      double f = a[i * n + k] / d;
      a[i * n + k] = f;
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
    }
  }
  return true;
}

void lu_solve(const std::vector<double>& a, const std::vector<int>& perm,
              int n, const std::vector<double>& b, std::vector<double>& x) {
  x.resize(n);
  for (int i = 0; i < n; ++i) x[i] = b[perm[i]];
  for (int i = 1; i < n; ++i) {
    double s = x[i];
    for (int j = 0; j < i; ++j) s -= a[i * n + j] * x[j];
    x[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int j = i + 1; j < n; ++j) s -= a[i * n + j] * x[j];
    x[i] = s / a[i * n + i];
  }
}

}  // namespace

DcSolver::DcSolver(const GridCase& c, const ElectricalGraph& g)
    : case_(&c), graph_(g) {
  int n = g.num_nodes;
  island_of_node_.assign(n, -1);

  // Connected components over in-service branches.
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : g.branches) {
    adj[br.from_node].push_back(br.to_node);
    adj[br.to_node].push_back(br.from_node);
  }
  for (int start = 0; start < n; ++start) {
    if (island_of_node_[start] >= 0) continue;
    int id = static_cast<int>(islands_.size());
    islands_.emplace_back();
    std::vector<int> stack{start};
    island_of_node_[start] = id;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      islands_[id].nodes.push_back(u);
      for (int v : adj[u])
        if (island_of_node_[v] < 0) {
          island_of_node_[v] = id;
          stack.push_back(v);
        }
    }
    std::sort(islands_[id].nodes.begin(), islands_[id].nodes.end());
  }

  std::vector<double> best_pmax(islands_.size(), -1.0);
  std::vector<int> best_gen_node(islands_.size(), -1);
  for (std::size_t gi = 0; gi < c.generators.size(); ++gi) {
    int node = g.gen_node[gi];
    if (node < 0) continue;
    int isl = island_of_node_[node];
    if (c.generators[gi].pmax_mw > best_pmax[isl]) {
      best_pmax[isl] = c.generators[gi].pmax_mw;
      best_gen_node[isl] = node;
    }
  }
  for (int node : g.load_node)
    if (node >= 0) islands_[island_of_node_[node]].has_load = true;

  for (std::size_t i = 0; i < islands_.size(); ++i) {
    Island& isl = islands_[i];
    // The case slack anchors its island; any other island falls back to its
    // largest in-service generator.
    if (g.slack_node >= 0 &&
        island_of_node_[g.slack_node] == static_cast<int>(i))
      isl.slack = g.slack_node;
    else
      isl.slack = best_gen_node[i];
    if (isl.slack < 0) {
      if (isl.has_load) structurally_diverged_ = true;  // dead load island
      continue;  // no generation: nothing to solve, angles stay 0
    }

    int m = static_cast<int>(isl.nodes.size()) - 1;
    isl.unknown_of_node.assign(n, -1);
    int row = 0;
    for (int node : isl.nodes)
      if (node != isl.slack) isl.unknown_of_node[node] = row++;
    if (m == 0) continue;  // single-node island, nothing to factor

    isl.lu.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (const auto& br : graph_.branches) {
      if (island_of_node_[br.from_node] != static_cast<int>(i)) continue;
      int uf = isl.unknown_of_node[br.from_node];
      int ut = isl.unknown_of_node[br.to_node];
      if (uf >= 0) isl.lu[uf * m + uf] += br.susceptance;
      if (ut >= 0) isl.lu[ut * m + ut] += br.susceptance;
      if (uf >= 0 && ut >= 0) {
        isl.lu[uf * m + ut] -= br.susceptance;
        isl.lu[ut * m + uf] -= br.susceptance;
      }
    }
    if (!lu_factor(isl.lu, isl.perm, m)) {
      isl.singular = true;
      structurally_diverged_ = true;
    }
  }
}

PowerFlowResult DcSolver::solve(const Injections& inj) const {
  const GridCase& c = *case_;
  const ElectricalGraph& g = graph_;
  PowerFlowResult r;
  r.theta.assign(g.num_nodes, 0.0);
  r.flow_mw.assign(c.lines.size(), 0.0);
  r.current_a.assign(c.lines.size(), 0.0);
  r.line_active.assign(c.lines.size(), 0);
  r.island_of_node = island_of_node_;
  r.num_islands = static_cast<int>(islands_.size());
  r.diverged = structurally_diverged_;

  std::vector<double> p(g.num_nodes, 0.0);  // net injection, p.u.
  for (std::size_t gi = 0; gi < c.generators.size(); ++gi)
    if (g.gen_node[gi] >= 0) p[g.gen_node[gi]] += inj.gen_mw[gi] / c.base_mva;
  for (std::size_t li = 0; li < c.loads.size(); ++li)
    if (g.load_node[li] >= 0) p[g.load_node[li]] -= inj.load_mw[li] / c.base_mva;

  std::vector<double> rhs, x;
  for (const Island& isl : islands_) {
    if (isl.slack < 0) {
      if (isl.has_load)
        for (int node : isl.nodes) r.de_energized_nodes.push_back(node);
      continue;
    }
    if (isl.singular) continue;
    int m = static_cast<int>(isl.nodes.size()) - 1;
    if (m == 0) continue;
    rhs.assign(m, 0.0);
    for (int node : isl.nodes)
      if (node != isl.slack) rhs[isl.unknown_of_node[node]] = p[node];
    lu_solve(isl.lu, isl.perm, m, rhs, x);
    for (int node : isl.nodes)
      if (node != isl.slack) r.theta[node] = x[isl.unknown_of_node[node]];
  }

  for (const auto& br : g.branches) {
    const Island& isl = islands_[island_of_node_[br.from_node]];
    if (isl.slack < 0 || isl.singular) continue;  // dead or unsolved island
    double mw = br.susceptance * (r.theta[br.from_node] - r.theta[br.to_node]) *
                c.base_mva;
    r.flow_mw[br.line] = mw;
    r.current_a[br.line] =
        flows_to_amps(mw, c.base_kv[c.lines[br.line].from]);
    r.line_active[br.line] = 1;
  }
  return r;
}

PowerFlowResult solve_dc(const GridCase& c, const ElectricalGraph& g,
                         const Injections& inj) {
  return DcSolver(c, g).solve(inj);
}

double flows_to_amps(double flow_mw, double base_kv) {
  return std::abs(flow_mw) * 1000.0 / (std::sqrt(3.0) * base_kv);
}

std::vector<int> check_overloads(const GridCase& c, const PowerFlowResult& r) {
  std::vector<int> out;
  for (int l = 0; l < static_cast<int>(c.lines.size()); ++l)
    if (r.line_active[l] && r.current_a[l] >= c.lines[l].imax_a)
      out.push_back(l);
  return out;
}

}  // namespace gridtop
