#include "gridtop/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "gridtop/power_flow.hpp"
#include "text_util.hpp"

namespace gridtop {

namespace {

using detail::splitmix64;

constexpr std::uint64_t kStreamLoad = 0x6c6f6164;
constexpr std::uint64_t kStreamSolar = 0x736f6c72;
constexpr std::uint64_t kStreamWind = 0x77696e64;
constexpr std::uint64_t kStreamNuclear = 0x6e756b65;
constexpr std::uint64_t kStreamForecast = 0x66637374;

double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

double clamp(double v, double lo, double hi) {
  return std::min(hi, std::max(lo, v));
}

struct DailyShape {
  const GenerationConfig* cfg;
  double mean = 1.0;

  explicit DailyShape(const GenerationConfig& c) : cfg(&c) {
    double sum = 0.0;
    for (int i = 0; i < c.steps_per_day; ++i)
      sum += raw(24.0 * i / c.steps_per_day);
    mean = sum / c.steps_per_day;
  }
  double raw(double h) const {
    auto bump = [&](double peak, double gain) {
      double d = (h - peak) / cfg->peak_width_h;
      return gain * std::exp(-d * d);
    };
    return cfg->base_level + bump(cfg->morning_peak_hour, cfg->morning_peak_gain) +
           bump(cfg->evening_peak_hour, cfg->evening_peak_gain);
  }
  double operator()(double h) const { return raw(h) / mean; }
};

double solar_bell(const GenerationConfig& cfg, double h) {
  if (h <= cfg.sunrise_hour || h >= cfg.sunset_hour) return 0.0;
  double u = (h - cfg.sunrise_hour) / (cfg.sunset_hour - cfg.sunrise_hour);
  return std::sin(3.14159265358979323846 * u);
}

}  // namespace

Scenario generate(const GridCase& c, const GenerationConfig& cfg, int horizon,
                  std::uint64_t seed) {
  if (horizon < 1) throw ValidationError("generate: horizon must be >= 1");
  const int spd = cfg.steps_per_day;
  const int days = (horizon + spd - 1) / spd;

  Scenario s;
  s.id = "s" + std::to_string(seed);
  s.seed = seed;
  s.horizon = horizon;
  s.start_weekday = static_cast<int>(seed % 7);

  std::mt19937_64 rng_load(splitmix64(seed ^ kStreamLoad));
  std::mt19937_64 rng_solar(splitmix64(seed ^ kStreamSolar));
  std::mt19937_64 rng_nuclear(splitmix64(seed ^ kStreamNuclear));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  DailyShape shape(cfg);

  // Shared daily insolation amplitude, AR(1) across days.
  std::vector<double> solar_amp(days);
  {
    double prev = cfg.solar_amp_mean;
    for (int d = 0; d < days; ++d) {
      double innov = std::sqrt(1.0 - cfg.solar_amp_ar * cfg.solar_amp_ar) *
                     cfg.solar_amp_sd * gauss(rng_solar);
      double v = d == 0 ? cfg.solar_amp_mean + cfg.solar_amp_sd * gauss(rng_solar)
                        : cfg.solar_amp_mean +
                              cfg.solar_amp_ar * (prev - cfg.solar_amp_mean) +
                              innov;
      prev = v = clamp(v, cfg.solar_amp_min, 1.0);
      solar_amp[d] = v;
    }
  }

  // Per wind generator AR(1) state, optionally tilted by the daily
  // insolation deviation (wind_solar_correlation).
  std::vector<int> wind_gens, solar_gens, nuclear_gens, thermal_gens;
  for (int g = 0; g < static_cast<int>(c.generators.size()); ++g)
    switch (c.generators[g].kind) {
      case GenKind::wind: wind_gens.push_back(g); break;
      case GenKind::solar: solar_gens.push_back(g); break;
      case GenKind::nuclear: nuclear_gens.push_back(g); break;
      case GenKind::thermal: thermal_gens.push_back(g); break;
    }
  std::vector<std::mt19937_64> rng_wind;
  std::vector<double> wind_state;
  for (std::size_t i = 0; i < wind_gens.size(); ++i) {
    rng_wind.emplace_back(splitmix64(seed ^ kStreamWind ^ (0x9e3779b9ull * (i + 1))));
    wind_state.push_back(cfg.wind_sd_fraction * gauss(rng_wind.back()));
  }
  double wind_innov_scale =
      cfg.wind_sd_fraction * std::sqrt(1.0 - cfg.wind_ar * cfg.wind_ar);

  // Nuclear baseload: ramp toward a target redrawn every half day.
  double nuclear_total_pmax = 0.0;
  for (int g : nuclear_gens) nuclear_total_pmax += c.generators[g].pmax_mw;
  double nuclear_base = cfg.nuclear_base_fraction * cfg.mean_total_load_mw;
  std::vector<double> nuclear_level(nuclear_gens.size());
  std::vector<double> nuclear_target(nuclear_gens.size());
  for (std::size_t i = 0; i < nuclear_gens.size(); ++i) {
    double share = c.generators[nuclear_gens[i]].pmax_mw / nuclear_total_pmax;
    nuclear_level[i] = clamp(nuclear_base * share, 0.0,
                             c.generators[nuclear_gens[i]].pmax_mw);
    nuclear_target[i] = nuclear_level[i];
  }

  double thermal_pmax_total = 0.0;
  for (int g : thermal_gens) thermal_pmax_total += c.generators[g].pmax_mw;

  s.injections.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    int day = t / spd;
    double hour = 24.0 * (t % spd) / spd;
    int weekday = (s.start_weekday + day) % 7;

    Injections inj;
    inj.gen_mw.assign(c.generators.size(), 0.0);
    inj.load_mw.assign(c.loads.size(), 0.0);

    double noise = std::exp(cfg.load_noise_sigma * gauss(rng_load));
    double total_load = cfg.mean_total_load_mw * shape(hour) *
                        (weekday >= 5 ? cfg.weekend_amplitude : 1.0) * noise;
    for (std::size_t l = 0; l < c.loads.size(); ++l)
      inj.load_mw[l] = quantize6(total_load * c.loads[l].key_factor);

    double amp_dev = solar_amp[day] - cfg.solar_amp_mean;
    for (int g : solar_gens)
      inj.gen_mw[g] = quantize6(c.generators[g].pmax_mw * solar_amp[day] *
                                solar_bell(cfg, hour));

    for (std::size_t i = 0; i < wind_gens.size(); ++i) {
      int g = wind_gens[i];
      wind_state[i] = cfg.wind_ar * wind_state[i] +
                      wind_innov_scale * gauss(rng_wind[i]);
      double frac = cfg.wind_mean_fraction + wind_state[i] +
                    cfg.wind_solar_correlation * amp_dev;
      inj.gen_mw[g] =
          quantize6(clamp(frac, 0.0, 1.0) * c.generators[g].pmax_mw);
    }

    for (std::size_t i = 0; i < nuclear_gens.size(); ++i) {
      int g = nuclear_gens[i];
      if (t % (spd / 2) == 0 && t > 0) {
        double share = c.generators[g].pmax_mw / nuclear_total_pmax;
        nuclear_target[i] =
            clamp(nuclear_base * share *
                      (1.0 + cfg.nuclear_target_jitter * uni(rng_nuclear)),
                  0.0, c.generators[g].pmax_mw);
      }
      double delta = clamp(nuclear_target[i] - nuclear_level[i],
                           -cfg.nuclear_ramp_mw_per_step,
                           cfg.nuclear_ramp_mw_per_step);
      nuclear_level[i] += delta;
      inj.gen_mw[g] = quantize6(nuclear_level[i]);
    }

    // Thermal generation claims the residual; then rebalance exactly.
    double load_sum = 0.0, other_sum = 0.0;
    for (double v : inj.load_mw) load_sum += v;
    for (double v : inj.gen_mw) other_sum += v;
    double residual = load_sum - other_sum;

    if (residual < 0.0) {
      // Over-generation: curtail solar, then wind, then nuclear.
      double excess = -residual;
      for (auto* group : {&solar_gens, &wind_gens, &nuclear_gens}) {
        if (excess <= 0.0) break;
        double group_sum = 0.0;
        for (int g : *group) group_sum += inj.gen_mw[g];
        if (group_sum <= 0.0) continue;
        double cut = std::min(excess, group_sum);
        double scale = (group_sum - cut) / group_sum;
        for (int g : *group) inj.gen_mw[g] = quantize6(inj.gen_mw[g] * scale);
        excess -= cut;
      }
    } else if (residual > thermal_pmax_total) {
      // Not enough thermal capacity: shed load pro-rata.
      double supply = other_sum + thermal_pmax_total;
      double scale = supply / load_sum;
      for (auto& v : inj.load_mw) v = quantize6(v * scale);
      s.adjusted = true;
    }

    load_sum = 0.0;
    other_sum = 0.0;
    for (double v : inj.load_mw) load_sum += v;
    for (double v : inj.gen_mw) other_sum += v;
    residual = clamp(load_sum - other_sum, 0.0, thermal_pmax_total);
    for (int g : thermal_gens)
      inj.gen_mw[g] =
          quantize6(residual * c.generators[g].pmax_mw / thermal_pmax_total);

    // Absorb the quantization leftovers in one element.  The bookkeeping is
    // done in integer micro-MW so the adjusted value lands exactly back on
    // the 1e-6 MW grid (and therefore survives the %.6f file format bit for
    // bit).
    long long gen_u = 0, load_u = 0;
    for (double v : inj.gen_mw) gen_u += std::llround(v * 1e6);
    for (double v : inj.load_mw) load_u += std::llround(v * 1e6);
    long long imbalance_u = gen_u - load_u;
    bool fixed = false;
    for (int g : thermal_gens) {
      long long vu = std::llround(inj.gen_mw[g] * 1e6) - imbalance_u;
      if (vu >= 0 && static_cast<double>(vu) <= c.generators[g].pmax_mw * 1e6) {
        inj.gen_mw[g] = static_cast<double>(vu) / 1e6;
        fixed = true;
        break;
      }
    }
    if (!fixed) {
      int biggest = 0;
      for (int l = 1; l < static_cast<int>(inj.load_mw.size()); ++l)
        if (inj.load_mw[l] > inj.load_mw[biggest]) biggest = l;
      long long vu = std::llround(inj.load_mw[biggest] * 1e6) + imbalance_u;
      inj.load_mw[biggest] = static_cast<double>(std::max(0LL, vu)) / 1e6;
    }

    s.injections.push_back(std::move(inj));
  }

  s.forecasts.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    const Injections& next =
        s.injections[std::min(t + 1, horizon - 1)];  // last row forecasts itself
    s.forecasts.push_back(make_forecast(
        next, cfg.forecast_sigma,
        splitmix64(seed ^ kStreamForecast ^ (0x51ed2701ull * (t + 1)))));
  }
  return s;
}

Injections make_forecast(const Injections& next, double sigma,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  Injections out = next;
  for (auto& v : out.gen_mw) v = quantize6(std::max(0.0, v * (1.0 + gauss(rng))));
  for (auto& v : out.load_mw) v = quantize6(std::max(0.0, v * (1.0 + gauss(rng))));
  return out;
}

void calibrate_thermal_limits(GridCase& c,
                              const std::vector<Scenario>& scenarios,
                              const std::vector<int>& target_lines,
                              double overload_rate, double slack_factor) {
  if (scenarios.empty())
    throw ValidationError("calibrate_thermal_limits: no scenarios");
  if (overload_rate < 0.0 || overload_rate >= 1.0)
    throw ValidationError("calibrate_thermal_limits: overload_rate must be in [0, 1)");
  std::vector<std::uint8_t> is_target(c.lines.size(), 0);
  for (int l : target_lines) {
    if (l < 0 || l >= static_cast<int>(c.lines.size()))
      throw ValidationError("calibrate_thermal_limits: unknown target line " +
                            std::to_string(l + 1));
    is_target[l] = 1;
  }

  // Reference-topology do-nothing currents across every timestep.
  DcSolver solver(c, expand_topology(c, reference_topology(c)));
  std::vector<std::vector<double>> currents(c.lines.size());
  for (const Scenario& s : scenarios)
    for (const Injections& inj : s.injections) {
      PowerFlowResult r = solver.solve(inj);
      if (r.diverged)
        throw ValidationError(
            "calibrate_thermal_limits: reference topology diverges on scenario " +
            s.id);
      for (std::size_t l = 0; l < c.lines.size(); ++l)
        currents[l].push_back(r.current_a[l]);
    }

  constexpr double kFloorA = 1e-6;
  for (std::size_t l = 0; l < c.lines.size(); ++l) {
    std::sort(currents[l].begin(), currents[l].end());
    const auto& cs = currents[l];
    std::size_t n = cs.size();
    double imax;
    if (is_target[l]) {
      auto idx = static_cast<std::size_t>(
          std::ceil((1.0 - overload_rate) * static_cast<double>(n)));
      // Inclusive overload comparison: at rate 0 nudge just past the max so
      // the observed currents stay overload-free.
      imax = idx >= n ? std::nextafter(cs[n - 1],
                                       std::numeric_limits<double>::infinity())
                      : cs[idx];
    } else {
      imax = slack_factor * cs[n - 1];
    }
    c.lines[l].imax_a = std::max(kFloorA, imax);
  }
}

std::vector<int> select_scenarios(std::vector<Scenario>& pool,
                                  const std::vector<ScenarioEvaluation>& evals,
                                  int count) {
  if (evals.size() != pool.size())
    throw ValidationError("select_scenarios: evaluation count mismatch");
  std::vector<std::vector<int>> classes(3);  // easy, medium, hard
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const ScenarioEvaluation& e = evals[i];
    int cls = e.dn_overload_free
                  ? 0
                  : (e.dn_survives_hard || e.tau_survives_hard ? 1 : 2);
    pool[i].difficulty = cls == 0 ? "easy" : cls == 1 ? "medium" : "hard";
    classes[cls].push_back(static_cast<int>(i));
  }
  // Round-robin medium -> hard -> easy keeps the interesting scenarios first
  // while covering every class that exists in the pool.
  std::vector<int> picked;
  std::size_t cursor[3] = {0, 0, 0};
  const int order[3] = {1, 2, 0};
  while (static_cast<int>(picked.size()) < count) {
    bool any = false;
    for (int cls : order) {
      if (static_cast<int>(picked.size()) >= count) break;
      if (cursor[cls] < classes[cls].size()) {
        picked.push_back(classes[cls][cursor[cls]++]);
        any = true;
      }
    }
    if (!any) break;  // pool exhausted
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

namespace {

std::string injection_table(const GridCase& c,
                            const std::vector<Injections>& rows) {
  std::ostringstream out;
  out << "t";
  for (std::size_t g = 0; g < c.generators.size(); ++g) out << ",g" << g + 1;
  for (std::size_t l = 0; l < c.loads.size(); ++l) out << ",l" << l + 1;
  out << "\n";
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out << t;
    for (double v : rows[t].gen_mw) out << "," << detail::fmt_fixed6(v);
    for (double v : rows[t].load_mw) out << "," << detail::fmt_fixed6(v);
    out << "\n";
  }
  return out.str();
}

std::vector<Injections> parse_injection_table(const GridCase& c,
                                              const std::string& path) {
  std::string text = detail::slurp(path);
  auto lines = detail::content_lines(text);
  if (lines.empty()) throw ParseError(path + ": empty table");
  auto head = detail::tokens(lines[0]);
  std::size_t expected = 1 + c.generators.size() + c.loads.size();
  if (head.size() != expected || head[0] != "t")
    throw ParseError(path + ":1: header does not match case layout");
  std::vector<Injections> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string where = path + ":" + std::to_string(i + 1);
    auto toks = detail::tokens(lines[i]);
    if (toks.size() != expected)
      throw ParseError(where + ": expected " + std::to_string(expected) +
                       " columns");
    if (detail::parse_int(toks[0], where, "t") !=
        static_cast<long long>(i - 1))
      throw ParseError(where + ": timesteps must be 0..T-1 in order");
    Injections inj;
    std::size_t k = 1;
    for (std::size_t g = 0; g < c.generators.size(); ++g)
      inj.gen_mw.push_back(detail::parse_double(toks[k++], where, "gen_mw"));
    for (std::size_t l = 0; l < c.loads.size(); ++l)
      inj.load_mw.push_back(detail::parse_double(toks[k++], where, "load_mw"));
    rows.push_back(std::move(inj));
  }
  return rows;
}

}  // namespace

void write_scenario(const Scenario& s, const GridCase& c,
                    const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream meta;
  meta << "scenario " << s.id << "\n";
  meta << "seed " << s.seed << "\n";
  meta << "horizon " << s.horizon << "\n";
  meta << "start_weekday " << s.start_weekday << "\n";
  meta << "adjusted " << (s.adjusted ? 1 : 0) << "\n";
  if (!s.difficulty.empty()) meta << "difficulty " << s.difficulty << "\n";
  detail::spew(dir + "/meta", meta.str());
  detail::spew(dir + "/injections.csv", injection_table(c, s.injections));
  detail::spew(dir + "/forecasts.csv", injection_table(c, s.forecasts));
}

Scenario read_scenario(const GridCase& c, const std::string& dir) {
  Scenario s;
  std::string meta_path = dir + "/meta";
  auto lines = detail::content_lines(detail::slurp(meta_path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string where = meta_path + ":" + std::to_string(i + 1);
    auto toks = detail::tokens(lines[i]);
    if (toks.size() < 2) throw ParseError(where + ": expected 'key value'");
    std::string key(toks[0]);
    if (key == "scenario") s.id = std::string(toks[1]);
    else if (key == "seed")
      s.seed = static_cast<std::uint64_t>(detail::parse_int(toks[1], where, "seed"));
    else if (key == "horizon")
      s.horizon = static_cast<int>(detail::parse_int(toks[1], where, "horizon"));
    else if (key == "start_weekday")
      s.start_weekday =
          static_cast<int>(detail::parse_int(toks[1], where, "start_weekday"));
    else if (key == "adjusted")
      s.adjusted = detail::parse_int(toks[1], where, "adjusted") != 0;
    else if (key == "difficulty")
      s.difficulty = std::string(toks[1]);
    else
      throw ParseError(where + ": unknown meta key '" + key + "'");
  }
  if (s.id.empty()) throw ParseError(meta_path + ": missing scenario id");
  s.injections = parse_injection_table(c, dir + "/injections.csv");
  s.forecasts = parse_injection_table(c, dir + "/forecasts.csv");
  if (static_cast<int>(s.injections.size()) != s.horizon ||
      static_cast<int>(s.forecasts.size()) != s.horizon)
    throw ParseError(dir + ": horizon in meta does not match table rows");
  return s;
}

GenerationConfig load_generation_config(const std::string& path) {
  GenerationConfig cfg;
  auto lines = detail::content_lines(detail::slurp(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string where = path + ":" + std::to_string(i + 1);
    auto toks = detail::tokens(lines[i]);
    if (toks.size() != 2) throw ParseError(where + ": expected 'key value'");
    std::string key(toks[0]);
    double v = detail::parse_double(toks[1], where, key.c_str());
    if (key == "steps_per_day") cfg.steps_per_day = static_cast<int>(v);
    else if (key == "mean_total_load_mw") cfg.mean_total_load_mw = v;
    else if (key == "base_level") cfg.base_level = v;
    else if (key == "morning_peak_hour") cfg.morning_peak_hour = v;
    else if (key == "morning_peak_gain") cfg.morning_peak_gain = v;
    else if (key == "evening_peak_hour") cfg.evening_peak_hour = v;
    else if (key == "evening_peak_gain") cfg.evening_peak_gain = v;
    else if (key == "peak_width_h") cfg.peak_width_h = v;
    else if (key == "weekend_amplitude") cfg.weekend_amplitude = v;
    else if (key == "load_noise_sigma") cfg.load_noise_sigma = v;
    else if (key == "sunrise_hour") cfg.sunrise_hour = v;
    else if (key == "sunset_hour") cfg.sunset_hour = v;
    else if (key == "solar_amp_mean") cfg.solar_amp_mean = v;
    else if (key == "solar_amp_sd") cfg.solar_amp_sd = v;
    else if (key == "solar_amp_ar") cfg.solar_amp_ar = v;
    else if (key == "solar_amp_min") cfg.solar_amp_min = v;
    else if (key == "wind_mean_fraction") cfg.wind_mean_fraction = v;
    else if (key == "wind_sd_fraction") cfg.wind_sd_fraction = v;
    else if (key == "wind_ar") cfg.wind_ar = v;
    else if (key == "wind_solar_correlation") cfg.wind_solar_correlation = v;
    else if (key == "nuclear_base_fraction") cfg.nuclear_base_fraction = v;
    else if (key == "nuclear_target_jitter") cfg.nuclear_target_jitter = v;
    else if (key == "nuclear_ramp_mw_per_step") cfg.nuclear_ramp_mw_per_step = v;
    else if (key == "forecast_sigma") cfg.forecast_sigma = v;
    else throw ParseError(where + ": unknown config key '" + key + "'");
  }
  return cfg;
}

}  // namespace gridtop
