#pragma once

#include <vector>

#include "gridtop/grid.hpp"

// DC power flow.  Branch flow = susceptance * angle difference; net nodal
// injection balances branch flows at every non-slack node; the slack node of
// each island absorbs the residual.  Currents come from |P| at nominal
// voltage: i = |P_mw| * 1000 / (sqrt(3) * kV_from).

namespace gridtop {

struct PowerFlowResult {
  bool diverged = false;          // singular system or de-energized load
  std::vector<double> theta;      // per node, radians (slack = 0 per island)
  std::vector<double> flow_mw;    // per line, signed from->to; 0 if inactive
  std::vector<double> current_a;  // per line
  std::vector<std::uint8_t> line_active;  // in service and energized
  std::vector<int> island_of_node;
  std::vector<int> de_energized_nodes;  // islands with load but no generation
  int num_islands = 0;
};

// Factorizes the reduced susceptance matrix of each island once so repeated
// solves against the same topology cost only a substitution pass.
class DcSolver {
 public:
  DcSolver(const GridCase& c, const ElectricalGraph& g);

  PowerFlowResult solve(const Injections& inj) const;

 private:
  struct Island {
    std::vector<int> nodes;
    int slack = -1;          // node index, -1 if island has no usable slack
    bool has_load = false;
    bool singular = false;
    std::vector<int> unknown_of_node;  // node -> row in reduced system, -1 slack
    std::vector<double> lu;            // dense LU, row-major
    std::vector<int> perm;
  };

  const GridCase* case_;
  ElectricalGraph graph_;
  std::vector<Island> islands_;
  std::vector<int> island_of_node_;
  bool structurally_diverged_ = false;
};

PowerFlowResult solve_dc(const GridCase& c, const ElectricalGraph& g,
                         const Injections& inj);

double flows_to_amps(double flow_mw, double base_kv);

// Line indices with current >= imax, ascending.
std::vector<int> check_overloads(const GridCase& c, const PowerFlowResult& r);

inline constexpr double kPivotTolerance = 1e-12;

}  // namespace gridtop
