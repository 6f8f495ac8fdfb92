#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "bayesimposter/ics_model.hpp"

namespace bayesimposter::bayes {

using BigInt = boost::multiprecision::cpp_int;

// Transition/emission tallies learned from a historian log, plus additive
// smoothing. Probabilities are derived on read; counts stay raw.
struct FrequencyTables {
  ics::Schema schema;
  double alpha = 1.0;
  std::vector<std::vector<std::vector<std::int64_t>>> trans_counts;  // [var][prev][next]
  std::vector<std::vector<std::vector<std::int64_t>>> obs_counts;    // [meas][state][value]
  std::vector<std::vector<std::int64_t>> prior_counts;               // [meas][value]

  // Smoothed row-normalized p(x_k = next | x_{k-1} = prev).
  double trans_prob(int var_id, int prev, int next) const;
  // Smoothed column-normalized likelihood p(x | y): how often state `code`
  // co-occurred with reading `value_index`.
  double state_given_value(int meas_id, int state_code, int value_index) const;
  // Smoothed empirical value frequency p(y).
  double prior(int meas_id, int value_index) const;
  // Smoothed row-normalized emission p(y | x); the iterative-max route.
  double emission_prob(int meas_id, int state_code, int value_index) const;

  std::string to_json() const;
  static FrequencyTables from_json(const std::string& text);
};

// Exact tallies over consecutive record pairs (transitions) and per-record
// emissions. The log must hold at least 2 records.
FrequencyTables fit(const ics::Schema& schema, const ics::HistorianLog& log, double alpha);

using Belief = std::vector<double>;  // probability vector over one state domain

struct EstimatorConfig {
  double cutoff = 0.5;       // K_c acceptance threshold on the value posterior
  bool multivariate = true;  // false forces the univariate path everywhere
};

// Chapman-Kolmogorov prediction: out(next) = sum_prev p(next|prev) * belief(prev).
// The input belief must be normalized within 1e-6.
Belief predict_state(const FrequencyTables& tables, const Belief& belief_prev, int var_id);

// Joint-evidence variant: belief reweighted by prod_i p(y_i | x) for the
// observed (meas_id, value) pairs, then propagated as in predict_state.
// Every cited sensor must share parent var_id; the list must be non-empty.
Belief predict_state_multi(const FrequencyTables& tables, const Belief& belief_prev, int var_id,
                           const std::vector<std::pair<int, int>>& joint_obs);

struct MeasurementEstimate {
  int value = 0;           // estimated reading (actual value, not index)
  double posterior = 0.0;  // winning posterior
  bool rejected = false;   // best posterior fell below the cutoff
  std::vector<double> posteriors;  // per candidate, sums to 1
};

// Posterior per candidate y: p(x|y) p(y) / sum_y' p(y') p(x|y'). Accepts the
// argmax when its posterior exceeds the cutoff. With alpha = 0 an all-zero
// likelihood column raises std::domain_error (undefined posterior).
MeasurementEstimate estimate_measurement(const FrequencyTables& tables, int x_code, int meas_id,
                                         double cutoff);

// argmax_y p(y | x_code) over the full candidate list; ties break toward the
// lowest value index. Returns (value, emission probability).
std::pair<int, double> estimate_measurement_multi(const FrequencyTables& tables, int x_code,
                                                  int meas_id);

constexpr int kRejectedValue = std::numeric_limits<int>::min();

struct EstimateResult {
  std::vector<int> x_hat;             // length M
  std::vector<double> x_posterior;    // winning belief mass per state var
  std::vector<int> y_hat;             // length P; kRejectedValue when rejected
  std::vector<double> y_posterior;    // winning posterior per sensor
  std::vector<int> rejected;          // sensor ids whose posterior fell below K_c

  // `var,kind,estimate,posterior,accepted`
  std::string to_csv() const;
  std::string to_json() const;
};

// One full estimation pass: state prediction per variable (joint-evidence
// path for multivariate parents when measurements are supplied), then value
// estimation per sensor given the predicted states (cutoff-gated for
// univariate parents, iterative max for multivariate ones).
EstimateResult run_bayes_imposter(const FrequencyTables& tables, const EstimatorConfig& config,
                                  const std::vector<Belief>& belief_0,
                                  const std::vector<int>* last_measurements = nullptr);

// Fraction of exactly estimated state / measurement variables against a
// ground-truth record; rejected sensors count as incorrect.
std::pair<double, double> accuracy(const EstimateResult& result, const ics::LogRecord& truth);

struct Combinatorics {
  BigInt c_x;          // product of state domain sizes
  BigInt c_y;          // product of measurement domain sizes
  BigInt pages_bytes;  // 4096 * (C_x + C_y); an empty variable class adds 0
  BigInt attempts;     // ceil(pages_bytes / spray budget)
};

inline constexpr std::uint64_t kGiB = 1ull << 30;
// Default spray budget: 1.2 GiB of a 2 GiB VPS.
inline const BigInt kSprayBudgetNumerator = BigInt(6) * kGiB;  // budget = 6*2^30/5 bytes

Combinatorics combinations(const std::vector<int>& state_sizes, const std::vector<int>& meas_sizes);

double log10_big(const BigInt& v);
// log10 of (v / 2^30), i.e. the value expressed in GiB.
double log10_gib(const BigInt& bytes);

}  // namespace bayesimposter::bayes
