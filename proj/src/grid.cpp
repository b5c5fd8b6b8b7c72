#include "gridtop/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "text_util.hpp"

namespace gridtop {

using detail::content_lines;
using detail::fmt_double;
using detail::parse_double;
using detail::parse_int;
using detail::tokens;

const char* to_string(GenKind k) {
  switch (k) {
    case GenKind::nuclear: return "nuclear";
    case GenKind::thermal: return "thermal";
    case GenKind::wind: return "wind";
    case GenKind::solar: return "solar";
  }
  return "?";
}

GenKind gen_kind_from_string(const std::string& s) {
  if (s == "nuclear") return GenKind::nuclear;
  if (s == "thermal") return GenKind::thermal;
  if (s == "wind") return GenKind::wind;
  if (s == "solar") return GenKind::solar;
  throw ParseError("unknown generator kind: '" + s + "'");
}

void GridCase::finalize() {
  sub_elements.assign(num_substations, {});
  for (int i = 0; i < static_cast<int>(generators.size()); ++i)
    sub_elements[generators[i].substation].push_back(
        {ElemKind::generator, i});
  for (int i = 0; i < static_cast<int>(loads.size()); ++i)
    sub_elements[loads[i].substation].push_back({ElemKind::load, i});
  for (int i = 0; i < static_cast<int>(lines.size()); ++i) {
    sub_elements[lines[i].from].push_back({ElemKind::line_from, i});
    sub_elements[lines[i].to].push_back({ElemKind::line_to, i});
  }
}

void validate_case(const GridCase& c) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("case '" + c.name + "': " + msg);
  };
  if (c.base_mva <= 0) fail("base_mva must be positive");
  if (c.num_substations < 1) fail("num_substations must be >= 1");
  if (static_cast<int>(c.base_kv.size()) != c.num_substations)
    fail("base_kv count does not match num_substations");
  for (int s = 0; s < c.num_substations; ++s)
    if (c.base_kv[s] <= 0) fail("base_kv of substation " +
                                std::to_string(s + 1) + " must be positive");
  if (c.slack_substation < 0 || c.slack_substation >= c.num_substations)
    fail("slack substation out of range");
  if (c.generators.empty()) fail("case has no generators");
  if (c.lines.empty()) fail("case has no lines");
  bool slack_has_gen = false;
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    const Generator& g = c.generators[i];
    if (g.substation < 0 || g.substation >= c.num_substations)
      fail("generator " + std::to_string(i + 1) + ": substation out of range");
    if (g.pmax_mw <= 0)
      fail("generator " + std::to_string(i + 1) + ": pmax_mw must be positive");
    if (g.substation == c.slack_substation) slack_has_gen = true;
  }
  if (!slack_has_gen) fail("slack substation has no generator");
  double key_sum = 0.0;
  for (std::size_t i = 0; i < c.loads.size(); ++i) {
    const Load& l = c.loads[i];
    if (l.substation < 0 || l.substation >= c.num_substations)
      fail("load " + std::to_string(i + 1) + ": substation out of range");
    if (l.key_factor <= 0)
      fail("load " + std::to_string(i + 1) + ": key_factor must be positive");
    key_sum += l.key_factor;
  }
  if (!c.loads.empty() && std::abs(key_sum - 1.0) > 1e-6)
    fail("load key_factors sum to " + fmt_double(key_sum) + ", expected 1");
  for (std::size_t i = 0; i < c.lines.size(); ++i) {
    const Line& l = c.lines[i];
    if (l.from < 0 || l.from >= c.num_substations || l.to < 0 ||
        l.to >= c.num_substations)
      fail("line " + std::to_string(i + 1) + ": endpoint out of range");
    if (l.from == l.to)
      fail("line " + std::to_string(i + 1) + ": from == to");
    if (l.reactance_pu <= 0)
      fail("line " + std::to_string(i + 1) + ": reactance_pu must be positive");
    if (l.imax_a <= 0)
      fail("line " + std::to_string(i + 1) + ": imax_a must be positive");
  }
}

std::string case_to_string(const GridCase& c) {
  std::ostringstream out;
  out << "gridcase " << c.name << "\n";
  out << "base_mva " << fmt_double(c.base_mva) << "\n";
  out << "substations " << c.num_substations << "\n";
  out << "kv";
  for (double kv : c.base_kv) out << " " << fmt_double(kv);
  out << "\n";
  out << "slack " << c.slack_substation + 1 << "\n";
  out << "generators " << c.generators.size() << "\n";
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    const Generator& g = c.generators[i];
    out << i + 1 << " " << g.substation + 1 << " " << to_string(g.kind) << " "
        << fmt_double(g.pmax_mw) << "\n";
  }
  out << "loads " << c.loads.size() << "\n";
  for (std::size_t i = 0; i < c.loads.size(); ++i) {
    const Load& l = c.loads[i];
    out << i + 1 << " " << l.substation + 1 << " " << fmt_double(l.key_factor)
        << "\n";
  }
  out << "lines " << c.lines.size() << "\n";
  for (std::size_t i = 0; i < c.lines.size(); ++i) {
    const Line& l = c.lines[i];
    out << i + 1 << " " << l.from + 1 << " " << l.to + 1 << " "
        << fmt_double(l.reactance_pu) << " " << fmt_double(l.imax_a) << "\n";
  }
  return out.str();
}

void save_case(const GridCase& c, const std::string& path) {
  detail::spew(path, case_to_string(c));
}

std::uint64_t case_hash(const GridCase& c) {
  return detail::fnv1a64(case_to_string(c));
}

GridCase load_case(const std::string& path) {
  std::string text = detail::slurp(path);
  auto lines = content_lines(text);
  std::size_t row = 0;
  auto where = [&]() { return path + ":" + std::to_string(row + 1); };
  auto next = [&]() -> std::vector<std::string_view> {
    if (row >= lines.size())
      throw ParseError(path + ": unexpected end of file");
    return tokens(lines[row++]);
  };
  auto expect_keyword = [&](std::vector<std::string_view>& t,
                            const char* kw) {
    if (t.empty() || t[0] != kw)
      throw ParseError(where() + ": expected '" + kw + "'");
  };

  GridCase c;
  auto t = next();
  expect_keyword(t, "gridcase");
  if (t.size() != 2) throw ParseError(where() + ": expected 'gridcase <name>'");
  c.name = std::string(t[1]);

  t = next();
  expect_keyword(t, "base_mva");
  c.base_mva = parse_double(t.at(1), where(), "base_mva");

  t = next();
  expect_keyword(t, "substations");
  c.num_substations = static_cast<int>(parse_int(t.at(1), where(),
                                                 "substations"));

  t = next();
  expect_keyword(t, "kv");
  for (std::size_t i = 1; i < t.size(); ++i)
    c.base_kv.push_back(parse_double(t[i], where(), "kv"));

  t = next();
  expect_keyword(t, "slack");
  c.slack_substation = static_cast<int>(parse_int(t.at(1), where(),
                                                  "slack")) - 1;

  t = next();
  expect_keyword(t, "generators");
  int n_gen = static_cast<int>(parse_int(t.at(1), where(), "generators"));
  for (int i = 0; i < n_gen; ++i) {
    t = next();
    if (t.size() != 4)
      throw ParseError(where() + ": expected 'id sub kind pmax_mw'");
    if (parse_int(t[0], where(), "generator id") != i + 1)
      throw ParseError(where() + ": generator ids must be 1..N in order");
    Generator g;
    g.substation = static_cast<int>(parse_int(t[1], where(),
                                              "generator substation")) - 1;
    g.kind = gen_kind_from_string(std::string(t[2]));
    g.pmax_mw = parse_double(t[3], where(), "pmax_mw");
    c.generators.push_back(g);
  }

  t = next();
  expect_keyword(t, "loads");
  int n_load = static_cast<int>(parse_int(t.at(1), where(), "loads"));
  for (int i = 0; i < n_load; ++i) {
    t = next();
    if (t.size() != 3)
      throw ParseError(where() + ": expected 'id sub key_factor'");
    if (parse_int(t[0], where(), "load id") != i + 1)
      throw ParseError(where() + ": load ids must be 1..N in order");
    Load l;
    l.substation = static_cast<int>(parse_int(t[1], where(),
                                              "load substation")) - 1;
    l.key_factor = parse_double(t[2], where(), "key_factor");
    c.loads.push_back(l);
  }

  t = next();
  expect_keyword(t, "lines");
  int n_line = static_cast<int>(parse_int(t.at(1), where(), "lines"));
  for (int i = 0; i < n_line; ++i) {
    t = next();
    if (t.size() != 5)
      throw ParseError(where() + ": expected 'id from to reactance imax_a'");
    if (parse_int(t[0], where(), "line id") != i + 1)
      throw ParseError(where() + ": line ids must be 1..N in order");
    Line l;
    l.from = static_cast<int>(parse_int(t[1], where(), "line from")) - 1;
    l.to = static_cast<int>(parse_int(t[2], where(), "line to")) - 1;
    l.reactance_pu = parse_double(t[3], where(), "reactance_pu");
    l.imax_a = parse_double(t[4], where(), "imax_a");
    c.lines.push_back(l);
  }
  if (row != lines.size())
    throw ParseError(path + ":" + std::to_string(row + 1) +
                     ": trailing content after line table");

  c.finalize();
  validate_case(c);
  return c;
}

Topology reference_topology(const GridCase& c) {
  Topology t;
  t.bus.resize(c.num_substations);
  for (int s = 0; s < c.num_substations; ++s)
    t.bus[s].assign(c.sub_elements[s].size(), 0);
  t.line_in.assign(c.lines.size(), 1);
  return t;
}

void normalize_config(std::vector<std::uint8_t>& cfg) {
  if (!cfg.empty() && cfg[0] == 1)
    for (auto& b : cfg) b ^= 1;
}

std::size_t topology_hash(const Topology& t) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](std::uint8_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  for (const auto& cfg : t.bus) {
    mix(0xfe);
    for (auto b : cfg) mix(b);
  }
  mix(0xff);
  for (auto b : t.line_in) mix(b);
  return static_cast<std::size_t>(h);
}

std::string to_string(const GridCase&, const Action& a) {
  switch (a.kind) {
    case ActionKind::do_nothing: return "-";
    case ActionKind::switch_line:
      return "line " + std::to_string(a.asset + 1);
    case ActionKind::set_substation_config: {
      std::string s = "sub " + std::to_string(a.asset + 1);
      for (auto b : a.config) s += b ? " 1" : " 0";
      return s;
    }
  }
  return "?";
}

Action action_from_string(const GridCase& c, const std::string& text,
                          const std::string& where) {
  auto toks = tokens(text);
  if (toks.size() == 1 && toks[0] == "-") return Action::nothing();
  if (toks.size() == 2 && toks[0] == "line") {
    int l = static_cast<int>(parse_int(toks[1], where, "line id")) - 1;
    if (l < 0 || l >= static_cast<int>(c.lines.size()))
      throw ParseError(where + ": unknown line id " + std::string(toks[1]));
    return Action::switch_line(l);
  }
  if (toks.size() >= 2 && toks[0] == "sub") {
    int s = static_cast<int>(parse_int(toks[1], where, "substation id")) - 1;
    if (s < 0 || s >= c.num_substations)
      throw ParseError(where + ": unknown substation id " +
                       std::string(toks[1]));
    std::vector<std::uint8_t> cfg;
    for (std::size_t i = 2; i < toks.size(); ++i) {
      long long b = parse_int(toks[i], where, "bus label");
      if (b != 0 && b != 1)
        throw ParseError(where + ": bus labels must be 0 or 1");
      cfg.push_back(static_cast<std::uint8_t>(b));
    }
    if (cfg.size() != c.sub_elements[s].size())
      throw ParseError(where + ": bus vector for substation " +
                       std::to_string(s + 1) + " has length " +
                       std::to_string(cfg.size()) + ", expected " +
                       std::to_string(c.sub_elements[s].size()));
    return Action::set_config(s, std::move(cfg));
  }
  throw ParseError(where + ": cannot parse action '" + text + "'");
}

Topology apply_action(const GridCase& c, const Topology& t, const Action& a) {
  Topology out = t;
  switch (a.kind) {
    case ActionKind::do_nothing:
      break;
    case ActionKind::switch_line:
      if (a.asset < 0 || a.asset >= static_cast<int>(c.lines.size()))
        throw ValidationError("switch_line: unknown line id " +
                              std::to_string(a.asset + 1));
      out.line_in[a.asset] ^= 1;
      break;
    case ActionKind::set_substation_config: {
      if (a.asset < 0 || a.asset >= c.num_substations)
        throw ValidationError("set_substation_config: unknown substation id " +
                              std::to_string(a.asset + 1));
      if (a.config.size() != c.sub_elements[a.asset].size())
        throw ValidationError(
            "set_substation_config: bus vector for substation " +
            std::to_string(a.asset + 1) + " has length " +
            std::to_string(a.config.size()) + ", expected " +
            std::to_string(c.sub_elements[a.asset].size()));
      for (auto b : a.config)
        if (b > 1)
          throw ValidationError(
              "set_substation_config: bus labels must be 0 or 1");
      out.bus[a.asset] = a.config;
      normalize_config(out.bus[a.asset]);
      break;
    }
  }
  return out;
}

ElectricalGraph expand_topology(const GridCase& c, const Topology& t) {
  ElectricalGraph g;
  g.node_at.assign(c.num_substations, {-1, -1});
  g.gen_node.assign(c.generators.size(), -1);
  g.load_node.assign(c.loads.size(), -1);

  auto element_active = [&](const ElementRef& e) {
    if (e.kind == ElemKind::line_from || e.kind == ElemKind::line_to)
      return t.line_in[e.index] != 0;
    return true;
  };

  // Nodes in (substation, bus) order; a bus with no active element is not a
  // node at all.
  for (int s = 0; s < c.num_substations; ++s) {
    bool used[2] = {false, false};
    for (std::size_t i = 0; i < c.sub_elements[s].size(); ++i)
      if (element_active(c.sub_elements[s][i])) used[t.bus[s][i]] = true;
    for (int b = 0; b < 2; ++b)
      if (used[b]) {
        g.node_at[s][b] = g.num_nodes++;
        g.node_sub.push_back(s);
        g.node_bus.push_back(static_cast<std::uint8_t>(b));
      }
  }

  std::vector<int> line_from_node(c.lines.size(), -1);
  std::vector<int> line_to_node(c.lines.size(), -1);
  for (int s = 0; s < c.num_substations; ++s) {
    for (std::size_t i = 0; i < c.sub_elements[s].size(); ++i) {
      const ElementRef& e = c.sub_elements[s][i];
      if (!element_active(e)) continue;
      int node = g.node_at[s][t.bus[s][i]];
      switch (e.kind) {
        case ElemKind::generator: g.gen_node[e.index] = node; break;
        case ElemKind::load: g.load_node[e.index] = node; break;
        case ElemKind::line_from: line_from_node[e.index] = node; break;
        case ElemKind::line_to: line_to_node[e.index] = node; break;
      }
    }
  }

  for (int l = 0; l < static_cast<int>(c.lines.size()); ++l)
    if (t.line_in[l])
      g.branches.push_back({l, line_from_node[l], line_to_node[l],
                            1.0 / c.lines[l].reactance_pu});

  const auto& slack_nodes = g.node_at[c.slack_substation];
  g.slack_node = slack_nodes[0] >= 0 ? slack_nodes[0] : slack_nodes[1];
  return g;
}

std::optional<int> action_depth(const GridCase& c, const Topology& t,
                                const Topology& reference,
                                const std::vector<Action>& dictionary) {
  // Each unitary action overwrites one asset's state and assets are
  // independent, so the minimal composition touches each differing asset
  // exactly once — if the dictionary can produce that asset state at all.
  int depth = 0;
  for (int s = 0; s < c.num_substations; ++s) {
    if (t.bus[s] == reference.bus[s]) continue;
    bool covered = false;
    for (const Action& a : dictionary)
      if (a.kind == ActionKind::set_substation_config && a.asset == s &&
          a.config == t.bus[s]) {
        covered = true;
        break;
      }
    if (!covered) return std::nullopt;
    ++depth;
  }
  for (int l = 0; l < static_cast<int>(c.lines.size()); ++l) {
    if (t.line_in[l] == reference.line_in[l]) continue;
    bool covered = false;
    for (const Action& a : dictionary)
      if (a.kind == ActionKind::switch_line && a.asset == l) {
        covered = true;
        break;
      }
    if (!covered) return std::nullopt;
    ++depth;
  }
  return depth;
}

}  // namespace gridtop
