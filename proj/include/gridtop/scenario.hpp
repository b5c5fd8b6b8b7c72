#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridtop/grid.hpp"

// Synthetic scenario generation at 5-minute resolution, forecast synthesis,
// thermal-limit calibration and scenario selection.

namespace gridtop {

struct Scenario {
  std::string id;
  std::uint64_t seed = 0;
  int horizon = 0;
  int start_weekday = 0;   // 0 = Monday
  std::string difficulty;  // set by select_scenarios; empty until then
  bool adjusted = false;   // loads were scaled to fit generation capacity
  std::vector<Injections> injections;  // x(t), balanced to ~1e-9 MW
  std::vector<Injections> forecasts;   // row t = noisy view of x(t+1)
};

struct GenerationConfig {
  int steps_per_day = 288;  // 5-minute steps

  // Total demand: double-peak daily shape (normalized to mean 1) times a
  // weekday factor times lognormal noise.
  double mean_total_load_mw = 260.0;
  double base_level = 0.72;
  double morning_peak_hour = 9.0;
  double morning_peak_gain = 0.35;
  double evening_peak_hour = 19.0;
  double evening_peak_gain = 0.45;
  double peak_width_h = 2.5;
  double weekend_amplitude = 0.85;
  double load_noise_sigma = 0.01;

  // Solar: zero outside daylight, sine bell between sunrise and sunset,
  // day-to-day amplitude follows an AR(1) in [amp_min, 1].
  double sunrise_hour = 8.0;
  double sunset_hour = 17.0;
  double solar_amp_mean = 0.65;
  double solar_amp_sd = 0.20;
  double solar_amp_ar = 0.80;
  double solar_amp_min = 0.05;

  // Wind: per-generator AR(1) around a mean output fraction, clipped to
  // [0, pmax].  wind_solar_correlation couples the daily wind level to the
  // solar amplitude deviation (0 = independent).
  double wind_mean_fraction = 0.35;
  double wind_sd_fraction = 0.18;
  double wind_ar = 0.97;
  double wind_solar_correlation = 0.0;

  // Nuclear: baseload with slow ramps toward a re-drawn 12h target.
  double nuclear_base_fraction = 0.38;  // of mean total load
  double nuclear_target_jitter = 0.05;
  double nuclear_ramp_mw_per_step = 0.25;

  double forecast_sigma = 0.05;
};

GenerationConfig load_generation_config(const std::string& path);

// Deterministic in (case, config, horizon, seed).  Thermal generation is the
// balancing residual; if capacity is exceeded, loads scale down and the
// scenario is flagged `adjusted`.  Every component is quantized to 1e-6 MW
// so files round-trip exactly while balance holds to well under 1e-9 MW.
Scenario generate(const GridCase& c, const GenerationConfig& cfg, int horizon,
                  std::uint64_t seed);

// Noisy copy of `next`: each entry scaled by (1 + eps), eps ~ N(0, sigma),
// clipped at zero and quantized to 1e-6 MW.
Injections make_forecast(const Injections& next, double sigma,
                         std::uint64_t seed);

// Re-derives imax from reference-topology do-nothing currents across the
// given scenarios: target lines get the (1 - overload_rate) empirical
// quantile, every other line gets slack_factor * max observed.
void calibrate_thermal_limits(GridCase& c,
                              const std::vector<Scenario>& scenarios,
                              const std::vector<int>& target_lines,
                              double overload_rate,
                              double slack_factor = 1.05);

// Baseline evaluation results used for selection; produced by the caller
// (the agents layer) so scenario generation stays free of agent code.
struct ScenarioEvaluation {
  bool dn_overload_free = false;  // easy-mode do-nothing sees no overload
  bool dn_survives_hard = false;
  bool tau_survives_hard = false;  // some fixed-topology baseline survives
};

// Labels pool difficulties in place (easy/medium/hard) and returns `count`
// indices balanced across difficulty, weekday/weekend start and horizon.
std::vector<int> select_scenarios(std::vector<Scenario>& pool,
                                  const std::vector<ScenarioEvaluation>& evals,
                                  int count);

// Directory layout: injections.csv, forecasts.csv, meta.  Numeric cells are
// %.6f, so write(read(dir)) is byte-identical.
void write_scenario(const Scenario& s, const GridCase& c,
                    const std::string& dir);
Scenario read_scenario(const GridCase& c, const std::string& dir);

}  // namespace gridtop
