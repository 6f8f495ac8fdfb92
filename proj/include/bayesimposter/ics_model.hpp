#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "bayesimposter/rng.hpp"

namespace bayesimposter::ics {

// A discrete plant variable. Codes are indices into `labels`.
struct StateVariable {
  int id = 0;
  std::string name;
  std::vector<std::string> labels;

  int domain_size() const { return static_cast<int>(labels.size()); }
};

// A sensor reading on one parent state variable. `values` are the discrete
// readings themselves (integer units, e.g. cm), indexed by value code.
struct MeasurementVariable {
  int id = 0;
  std::string name;
  std::vector<int> values;
  int parent = 0;

  int domain_size() const { return static_cast<int>(values.size()); }
  int index_of(int value) const;  // -1 when the value is not in the domain
};

// Structure of the plant without its kernels: domains, value lists and the
// sensor->state wiring. This is what an observer can read off the tag schema.
struct Schema {
  std::vector<int> state_sizes;
  std::vector<std::vector<int>> meas_values;
  std::vector<int> meas_parent;

  int state_count() const { return static_cast<int>(state_sizes.size()); }
  int measurement_count() const { return static_cast<int>(meas_parent.size()); }
  // Parent state vars observed by more than one sensor, with their sensors.
  std::vector<std::pair<int, std::vector<int>>> multivariate_groups() const;
};

using Kernel = std::vector<std::vector<double>>;  // [prev_code][next_code]

struct StateSpaceModel {
  std::vector<StateVariable> states;
  std::vector<MeasurementVariable> measurements;
  std::vector<Kernel> transition;   // one row-stochastic kernel per state var
  std::vector<Kernel> observation;  // [meas][state_code][value_code]
  double state_noise = 0.02;        // epsilon_q: uniform perturbation prob.
  double meas_noise = 0.02;         // epsilon_r

  int state_count() const { return static_cast<int>(states.size()); }
  int measurement_count() const { return static_cast<int>(measurements.size()); }

  // Throws std::invalid_argument when dimensions or row sums (1 +/- 1e-12)
  // or noise ranges are violated.
  void validate() const;

  Schema schema() const;

  double transition_prob(int var_id, int code_prev, int code_next) const;
  double observation_prob(int meas_id, int state_code, int value_index) const;

  std::string to_json() const;
  static StateSpaceModel from_json(const std::string& text);
};

struct LogRecord {
  std::int64_t k = 0;
  std::vector<int> x;  // state codes, length M
  std::vector<int> y;  // measurement values (not indices), length P
};

struct HistorianLog {
  std::vector<LogRecord> records;

  std::size_t size() const { return records.size(); }
  std::string to_json() const;
  static HistorianLog from_json(const std::string& text);
  // Header `k,x_0..x_{M-1},y_0..y_{P-1}`.
  std::string to_csv() const;
};

struct WarehouseScenario {
  StateSpaceModel model;
  int suction_var = 0;    // binary suctionstate {OFF=0, ON=1}
  int threshold_var = 0;  // S_theta sensor; its domain contains 2 (cm)
};

// Deterministic synthetic plant: M=420 state variables (domain sizes from
// {2,3,4}, mean 3), P=160 sensors (value-domain sizes from {3,4,5}, mean 4).
// Transition rows get one dominant entry in [0.80, 0.95]; observation rows
// one dominant entry in [0.97, 0.995]. suctionstate is variable 0 and biased
// toward ON so the plant's nominal trajectory keeps the cup engaged; S_theta
// is sensor 0 with dominant reading 2 cm at every suction state.
WarehouseScenario build_warehouse_model(std::uint64_t seed);

// One plant step: samples x from the transition rows (uniform perturbation
// with prob state_noise) and y from the observation rows given x.
std::pair<std::vector<int>, std::vector<int>> step(const StateSpaceModel& model,
                                                   const std::vector<int>& x_prev,
                                                   Rng& rng);

// Noise-free modal step: every variable takes its most probable transition
// and every sensor its most probable reading (first maximum on ties).
std::pair<std::vector<int>, std::vector<int>> nominal_step(const StateSpaceModel& model,
                                                           const std::vector<int>& x_prev);

// T repeated steps from x_0; records are k = 1..T. T must be >= 1.
HistorianLog simulate(const StateSpaceModel& model, const std::vector<int>& x_0,
                      std::int64_t steps, Rng& rng);

}  // namespace bayesimposter::ics
