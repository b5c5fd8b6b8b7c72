#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Grid model: static case data, 2-busbar topologies, unitary actions and the
// expansion of (case, topology) into the electrical graph solved by the DC
// power flow.  Ids in case/scenario files are 1-based; everything in memory
// is a 0-based index.

namespace gridtop {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class GenKind { nuclear, thermal, wind, solar };

const char* to_string(GenKind k);
GenKind gen_kind_from_string(const std::string& s);

struct Generator {
  int substation = 0;
  GenKind kind = GenKind::thermal;
  double pmax_mw = 0.0;
};

struct Load {
  int substation = 0;
  double key_factor = 0.0;  // share of total demand, all keys sum to 1
};

struct Line {
  int from = 0;
  int to = 0;
  double reactance_pu = 0.0;
  double imax_a = 0.0;  // thermal limit
};

// One element slot on a substation's busbar pair.
enum class ElemKind { generator, load, line_from, line_to };

struct ElementRef {
  ElemKind kind;
  int index;  // into generators/loads/lines
};

struct GridCase {
  std::string name;
  double base_mva = 100.0;
  int num_substations = 0;
  std::vector<double> base_kv;  // per substation
  int slack_substation = 0;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<Line> lines;

  // Canonical per-substation element order: generators, loads, then line
  // ends by line index (from-end before to-end).  Bus-assignment vectors in
  // Topology/actions index into this.
  std::vector<std::vector<ElementRef>> sub_elements;

  void finalize();  // rebuild sub_elements after editing the vectors above
};

GridCase load_case(const std::string& path);
void save_case(const GridCase& c, const std::string& path);
std::string case_to_string(const GridCase& c);
void validate_case(const GridCase& c);       // throws ValidationError
std::uint64_t case_hash(const GridCase& c);  // stable across runs/platforms

// Bus assignment per substation element plus per-line service flags.  Bus
// vectors are kept normalized: the first element sits on bus 0, so each
// physical split has exactly one representation.
struct Topology {
  std::vector<std::vector<std::uint8_t>> bus;  // [substation][element slot]
  std::vector<std::uint8_t> line_in;           // [line] 1 = in service

  bool operator==(const Topology&) const = default;
};

Topology reference_topology(const GridCase& c);  // all on bus 0, all lines in
void normalize_config(std::vector<std::uint8_t>& cfg);
std::size_t topology_hash(const Topology& t);

enum class ActionKind { do_nothing, switch_line, set_substation_config };

struct Action {
  ActionKind kind = ActionKind::do_nothing;
  int asset = -1;                     // line or substation index
  std::vector<std::uint8_t> config;   // set_substation_config only, normalized

  static Action nothing() { return {}; }
  static Action switch_line(int line) {
    return {ActionKind::switch_line, line, {}};
  }
  static Action set_config(int substation, std::vector<std::uint8_t> cfg) {
    normalize_config(cfg);
    return {ActionKind::set_substation_config, substation, std::move(cfg)};
  }

  bool operator==(const Action&) const = default;
};

// "-" | "line <id>" | "sub <id> <b0> <b1> ...", ids 1-based.
std::string to_string(const GridCase& c, const Action& a);
Action action_from_string(const GridCase& c, const std::string& text,
                          const std::string& where);

// Pure: returns the successor topology, input untouched.  Throws
// ValidationError on unknown asset ids or bus vectors of the wrong shape;
// the environment's legality check screens those out before stepping.
Topology apply_action(const GridCase& c, const Topology& t, const Action& a);

// Electrical graph induced by a topology.  A busbar becomes a node only if
// at least one in-service element is assigned to it; line ends of
// out-of-service lines assign nothing.
struct ElectricalGraph {
  int num_nodes = 0;
  std::vector<int> node_sub;               // per node
  std::vector<std::uint8_t> node_bus;      // per node
  std::vector<std::array<int, 2>> node_at; // [substation][bus] -> node or -1
  std::vector<int> gen_node;               // per generator
  std::vector<int> load_node;              // per load

  struct Branch {
    int line;
    int from_node;
    int to_node;
    double susceptance;  // 1/x, p.u.
  };
  std::vector<Branch> branches;  // in-service lines only
  int slack_node = -1;           // lowest-bus node of the slack substation
};

ElectricalGraph expand_topology(const GridCase& c, const Topology& t);

// Minimal number of dictionary actions turning `reference` into `t`;
// nullopt if no composition does.  Each unitary action sets one asset's
// state, so the minimum is the per-asset Hamming distance provided every
// differing asset has a matching dictionary entry.
std::optional<int> action_depth(const GridCase& c, const Topology& t,
                                const Topology& reference,
                                const std::vector<Action>& dictionary);

// MW injections for one timestep, in case order.
struct Injections {
  std::vector<double> gen_mw;
  std::vector<double> load_mw;
};

}  // namespace gridtop
