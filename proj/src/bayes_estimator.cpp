#include "bayesimposter/bayes_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bayesimposter::bayes {

using nlohmann::json;

namespace {

constexpr double kBeliefTol = 1e-6;

void check_normalized(const Belief& b) {
  double sum = 0.0;
  for (double p : b) {
    if (p < 0.0) throw std::invalid_argument("belief: negative mass");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kBeliefTol) throw std::invalid_argument("belief: not normalized");
}

void normalize(Belief& b) {
  double sum = 0.0;
  for (double p : b) sum += p;
  if (sum <= 0.0) throw std::domain_error("belief: zero total mass");
  for (double& p : b) p /= sum;
}

int value_index_or_throw(const ics::Schema& s, int meas_id, int value) {
  const auto& vals = s.meas_values[static_cast<std::size_t>(meas_id)];
  auto it = std::find(vals.begin(), vals.end(), value);
  if (it == vals.end()) throw std::domain_error("measurement value outside declared domain");
  return static_cast<int>(it - vals.begin());
}

}  // namespace

double FrequencyTables::trans_prob(int var_id, int prev, int next) const {
  const auto& m = trans_counts.at(static_cast<std::size_t>(var_id));
  const auto& row = m.at(static_cast<std::size_t>(prev));
  const int n = static_cast<int>(row.size());
  if (next < 0 || next >= n) throw std::domain_error("trans_prob: code outside domain");
  double total = alpha * n;
  for (auto c : row) total += static_cast<double>(c);
  if (total <= 0.0) throw std::domain_error("trans_prob: empty row with alpha=0");
  return (static_cast<double>(row[static_cast<std::size_t>(next)]) + alpha) / total;
}

double FrequencyTables::state_given_value(int meas_id, int state_code, int value_index) const {
  const auto& table = obs_counts.at(static_cast<std::size_t>(meas_id));
  const int rows = static_cast<int>(table.size());
  if (state_code < 0 || state_code >= rows) throw std::domain_error("state_given_value: bad state code");
  double column = alpha * rows;
  for (const auto& r : table) column += static_cast<double>(r.at(static_cast<std::size_t>(value_index)));
  if (column <= 0.0) return 0.0;  // never-seen value; caller decides
  return (static_cast<double>(table[static_cast<std::size_t>(state_code)][static_cast<std::size_t>(value_index)]) +
          alpha) /
         column;
}

double FrequencyTables::prior(int meas_id, int value_index) const {
  const auto& counts = prior_counts.at(static_cast<std::size_t>(meas_id));
  double total = alpha * static_cast<double>(counts.size());
  for (auto c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw std::domain_error("prior: no observations with alpha=0");
  return (static_cast<double>(counts.at(static_cast<std::size_t>(value_index))) + alpha) / total;
}

double FrequencyTables::emission_prob(int meas_id, int state_code, int value_index) const {
  const auto& table = obs_counts.at(static_cast<std::size_t>(meas_id));
  const auto& row = table.at(static_cast<std::size_t>(state_code));
  double total = alpha * static_cast<double>(row.size());
  for (auto c : row) total += static_cast<double>(c);
  if (total <= 0.0) throw std::domain_error("emission_prob: empty row with alpha=0");
  return (static_cast<double>(row.at(static_cast<std::size_t>(value_index))) + alpha) / total;
}

FrequencyTables fit(const ics::Schema& schema, const ics::HistorianLog& log, double alpha) {
  if (log.size() < 2) throw std::invalid_argument("fit: log must hold at least 2 records");
  if (alpha < 0.0) throw std::invalid_argument("fit: alpha must be >= 0");

  FrequencyTables t;
  t.schema = schema;
  t.alpha = alpha;
  t.trans_counts.resize(schema.state_sizes.size());
  for (std::size_t i = 0; i < schema.state_sizes.size(); ++i) {
    const auto n = static_cast<std::size_t>(schema.state_sizes[i]);
    t.trans_counts[i].assign(n, std::vector<std::int64_t>(n, 0));
  }
  t.obs_counts.resize(schema.meas_values.size());
  t.prior_counts.resize(schema.meas_values.size());
  for (std::size_t j = 0; j < schema.meas_values.size(); ++j) {
    const auto rows = static_cast<std::size_t>(schema.state_sizes[static_cast<std::size_t>(schema.meas_parent[j])]);
    const auto q = schema.meas_values[j].size();
    t.obs_counts[j].assign(rows, std::vector<std::int64_t>(q, 0));
    t.prior_counts[j].assign(q, 0);
  }

  for (std::size_t r = 0; r < log.records.size(); ++r) {
    const auto& rec = log.records[r];
    if (rec.x.size() != schema.state_sizes.size() || rec.y.size() != schema.meas_values.size()) {
      throw std::invalid_argument("fit: record width does not match schema");
    }
    if (r + 1 < log.records.size()) {
      const auto& next = log.records[r + 1];
      for (std::size_t i = 0; i < schema.state_sizes.size(); ++i) {
        t.trans_counts[i][static_cast<std::size_t>(rec.x[i])][static_cast<std::size_t>(next.x[i])] += 1;
      }
    }
    for (std::size_t j = 0; j < schema.meas_values.size(); ++j) {
      const int idx = value_index_or_throw(schema, static_cast<int>(j), rec.y[j]);
      const int parent_code = rec.x[static_cast<std::size_t>(schema.meas_parent[j])];
      t.obs_counts[j][static_cast<std::size_t>(parent_code)][static_cast<std::size_t>(idx)] += 1;
      t.prior_counts[j][static_cast<std::size_t>(idx)] += 1;
    }
  }
  return t;
}

Belief predict_state(const FrequencyTables& tables, const Belief& belief_prev, int var_id) {
  if (var_id < 0 || var_id >= tables.schema.state_count()) {
    throw std::domain_error("predict_state: unknown variable");
  }
  const int n = tables.schema.state_sizes[static_cast<std::size_t>(var_id)];
  if (belief_prev.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("predict_state: belief width mismatch");
  }
  check_normalized(belief_prev);
  Belief out(static_cast<std::size_t>(n), 0.0);
  for (int next = 0; next < n; ++next) {
    double acc = 0.0;
    for (int prev = 0; prev < n; ++prev) {
      acc += tables.trans_prob(var_id, prev, next) * belief_prev[static_cast<std::size_t>(prev)];
    }
    out[static_cast<std::size_t>(next)] = acc;
  }
  normalize(out);
  return out;
}

Belief predict_state_multi(const FrequencyTables& tables, const Belief& belief_prev, int var_id,
                           const std::vector<std::pair<int, int>>& joint_obs) {
  if (joint_obs.empty()) throw std::invalid_argument("predict_state_multi: empty evidence set");
  const int n = tables.schema.state_sizes.at(static_cast<std::size_t>(var_id));
  if (belief_prev.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("predict_state_multi: belief width mismatch");
  }
  check_normalized(belief_prev);

  // Sensors are conditionally independent given the parent state, so the
  // joint evidence is the likelihood product.
  Belief weighted = belief_prev;
  for (const auto& [meas_id, value] : joint_obs) {
    if (tables.schema.meas_parent.at(static_cast<std::size_t>(meas_id)) != var_id) {
      throw std::invalid_argument("predict_state_multi: sensor does not observe this variable");
    }
    const int idx = value_index_or_throw(tables.schema, meas_id, value);
    for (int code = 0; code < n; ++code) {
      weighted[static_cast<std::size_t>(code)] *= tables.emission_prob(meas_id, code, idx);
    }
  }
  normalize(weighted);

  Belief out(static_cast<std::size_t>(n), 0.0);
  for (int next = 0; next < n; ++next) {
    double acc = 0.0;
    for (int prev = 0; prev < n; ++prev) {
      acc += tables.trans_prob(var_id, prev, next) * weighted[static_cast<std::size_t>(prev)];
    }
    out[static_cast<std::size_t>(next)] = acc;
  }
  normalize(out);
  return out;
}

MeasurementEstimate estimate_measurement(const FrequencyTables& tables, int x_code, int meas_id,
                                         double cutoff) {
  if (meas_id < 0 || meas_id >= tables.schema.measurement_count()) {
    throw std::domain_error("estimate_measurement: unknown variable");
  }
  const auto& values = tables.schema.meas_values[static_cast<std::size_t>(meas_id)];
  const int q = static_cast<int>(values.size());

  MeasurementEstimate est;
  est.posteriors.resize(static_cast<std::size_t>(q));
  double total = 0.0;
  for (int v = 0; v < q; ++v) {
    const double w = tables.state_given_value(meas_id, x_code, v) * tables.prior(meas_id, v);
    est.posteriors[static_cast<std::size_t>(v)] = w;
    total += w;
  }
  if (total <= 0.0) {
    throw std::domain_error("estimate_measurement: posterior undefined (all-zero likelihood, alpha=0)");
  }
  int best = 0;
  for (int v = 0; v < q; ++v) {
    est.posteriors[static_cast<std::size_t>(v)] /= total;
    if (est.posteriors[static_cast<std::size_t>(v)] > est.posteriors[static_cast<std::size_t>(best)]) best = v;
  }
  est.value = values[static_cast<std::size_t>(best)];
  est.posterior = est.posteriors[static_cast<std::size_t>(best)];
  est.rejected = !(est.posterior > cutoff);
  return est;
}

std::pair<int, double> estimate_measurement_multi(const FrequencyTables& tables, int x_code,
                                                  int meas_id) {
  const auto& values = tables.schema.meas_values.at(static_cast<std::size_t>(meas_id));
  int best = 0;
  double best_p = tables.emission_prob(meas_id, x_code, 0);
  for (int v = 1; v < static_cast<int>(values.size()); ++v) {
    const double p = tables.emission_prob(meas_id, x_code, v);
    if (p > best_p) {  // strict: ties keep the lowest value index
      best_p = p;
      best = v;
    }
  }
  return {values[static_cast<std::size_t>(best)], best_p};
}

EstimateResult run_bayes_imposter(const FrequencyTables& tables, const EstimatorConfig& config,
                                  const std::vector<Belief>& belief_0,
                                  const std::vector<int>* last_measurements) {
  const auto& schema = tables.schema;
  if (belief_0.size() != static_cast<std::size_t>(schema.state_count())) {
    throw std::invalid_argument("run_bayes_imposter: one belief per state variable required");
  }
  if (config.cutoff < 0.0 || config.cutoff > 1.0) {
    throw std::invalid_argument("run_bayes_imposter: cutoff must lie in [0,1]");
  }
  if (last_measurements && last_measurements->size() != static_cast<std::size_t>(schema.measurement_count())) {
    throw std::invalid_argument("run_bayes_imposter: measurement vector width mismatch");
  }

  std::vector<std::vector<int>> sensors(static_cast<std::size_t>(schema.state_count()));
  for (int j = 0; j < schema.measurement_count(); ++j) {
    sensors[static_cast<std::size_t>(schema.meas_parent[static_cast<std::size_t>(j)])].push_back(j);
  }

  EstimateResult res;
  res.x_hat.resize(static_cast<std::size_t>(schema.state_count()));
  res.x_posterior.resize(static_cast<std::size_t>(schema.state_count()));
  res.y_hat.resize(static_cast<std::size_t>(schema.measurement_count()));
  res.y_posterior.resize(static_cast<std::size_t>(schema.measurement_count()));

  for (int i = 0; i < schema.state_count(); ++i) {
    const auto& group = sensors[static_cast<std::size_t>(i)];
    Belief b;
    if (config.multivariate && group.size() > 1 && last_measurements) {
      std::vector<std::pair<int, int>> joint;
      joint.reserve(group.size());
      for (int j : group) joint.emplace_back(j, (*last_measurements)[static_cast<std::size_t>(j)]);
      b = predict_state_multi(tables, belief_0[static_cast<std::size_t>(i)], i, joint);
    } else {
      b = predict_state(tables, belief_0[static_cast<std::size_t>(i)], i);
    }
    int best = 0;
    for (int c = 1; c < static_cast<int>(b.size()); ++c) {
      if (b[static_cast<std::size_t>(c)] > b[static_cast<std::size_t>(best)]) best = c;
    }
    res.x_hat[static_cast<std::size_t>(i)] = best;
    res.x_posterior[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(best)];
  }

  for (int j = 0; j < schema.measurement_count(); ++j) {
    const int parent = schema.meas_parent[static_cast<std::size_t>(j)];
    const int x_code = res.x_hat[static_cast<std::size_t>(parent)];
    const bool multi = config.multivariate && sensors[static_cast<std::size_t>(parent)].size() > 1;
    if (multi) {
      auto [value, p] = estimate_measurement_multi(tables, x_code, j);
      res.y_hat[static_cast<std::size_t>(j)] = value;
      res.y_posterior[static_cast<std::size_t>(j)] = p;
    } else {
      auto est = estimate_measurement(tables, x_code, j, config.cutoff);
      res.y_posterior[static_cast<std::size_t>(j)] = est.posterior;
      if (est.rejected) {
        res.y_hat[static_cast<std::size_t>(j)] = kRejectedValue;
        res.rejected.push_back(j);
      } else {
        res.y_hat[static_cast<std::size_t>(j)] = est.value;
      }
    }
  }
  return res;
}

std::pair<double, double> accuracy(const EstimateResult& result, const ics::LogRecord& truth) {
  if (result.x_hat.size() != truth.x.size() || result.y_hat.size() != truth.y.size()) {
    throw std::invalid_argument("accuracy: dimension mismatch");
  }
  int sx = 0;
  for (std::size_t i = 0; i < truth.x.size(); ++i) {
    if (result.x_hat[i] == truth.x[i]) ++sx;
  }
  int sy = 0;
  for (std::size_t j = 0; j < truth.y.size(); ++j) {
    if (result.y_hat[j] != kRejectedValue && result.y_hat[j] == truth.y[j]) ++sy;
  }
  const double sa = truth.x.empty() ? 1.0 : static_cast<double>(sx) / static_cast<double>(truth.x.size());
  const double ma = truth.y.empty() ? 1.0 : static_cast<double>(sy) / static_cast<double>(truth.y.size());
  return {sa, ma};
}

Combinatorics combinations(const std::vector<int>& state_sizes, const std::vector<int>& meas_sizes) {
  for (int n : state_sizes) {
    if (n < 1) throw std::invalid_argument("combinations: sizes must be >= 1");
  }
  for (int q : meas_sizes) {
    if (q < 1) throw std::invalid_argument("combinations: sizes must be >= 1");
  }
  Combinatorics c;
  c.c_x = 1;
  for (int n : state_sizes) c.c_x *= n;
  c.c_y = 1;
  for (int q : meas_sizes) c.c_y *= q;

  BigInt page_count = 0;
  if (!state_sizes.empty()) page_count += c.c_x;
  if (!meas_sizes.empty()) page_count += c.c_y;
  c.pages_bytes = page_count * 4096;

  // attempts = ceil(pages_bytes / (1.2 GiB)) = ceil(5 * pages_bytes / (6 * 2^30))
  const BigInt num = c.pages_bytes * 5;
  const BigInt den = kSprayBudgetNumerator;
  c.attempts = (num + den - 1) / den;
  return c;
}

double log10_big(const BigInt& v) {
  if (v <= 0) throw std::domain_error("log10_big: value must be positive");
  const std::string digits = v.str();
  // Leading 18 digits carry far more precision than a double can hold.
  const std::size_t lead = std::min<std::size_t>(digits.size(), 18);
  const double mantissa = std::stod(digits.substr(0, lead));
  return std::log10(mantissa) + static_cast<double>(digits.size() - lead);
}

double log10_gib(const BigInt& bytes) { return log10_big(bytes) - std::log10(static_cast<double>(kGiB)); }

// --- serialization ---

std::string FrequencyTables::to_json() const {
  json j;
  j["alpha"] = alpha;
  j["schema"] = {{"state_sizes", schema.state_sizes},
                 {"meas_values", schema.meas_values},
                 {"meas_parent", schema.meas_parent}};
  j["trans_counts"] = trans_counts;
  j["obs_counts"] = obs_counts;
  j["prior_counts"] = prior_counts;
  return j.dump();
}

FrequencyTables FrequencyTables::from_json(const std::string& text) {
  json j = json::parse(text);
  FrequencyTables t;
  t.alpha = j.at("alpha").get<double>();
  t.schema.state_sizes = j.at("schema").at("state_sizes").get<std::vector<int>>();
  t.schema.meas_values = j.at("schema").at("meas_values").get<std::vector<std::vector<int>>>();
  t.schema.meas_parent = j.at("schema").at("meas_parent").get<std::vector<int>>();
  t.trans_counts = j.at("trans_counts").get<std::vector<std::vector<std::vector<std::int64_t>>>>();
  t.obs_counts = j.at("obs_counts").get<std::vector<std::vector<std::vector<std::int64_t>>>>();
  t.prior_counts = j.at("prior_counts").get<std::vector<std::vector<std::int64_t>>>();
  return t;
}

std::string EstimateResult::to_csv() const {
  std::ostringstream out;
  out << "var,kind,estimate,posterior,accepted\n";
  for (std::size_t i = 0; i < x_hat.size(); ++i) {
    out << i << ",state," << x_hat[i] << ',' << x_posterior[i] << ",1\n";
  }
  for (std::size_t j = 0; j < y_hat.size(); ++j) {
    const bool ok = y_hat[j] != kRejectedValue;
    out << j << ",measurement," << (ok ? std::to_string(y_hat[j]) : std::string()) << ','
        << y_posterior[j] << ',' << (ok ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string EstimateResult::to_json() const {
  json j;
  j["x_hat"] = x_hat;
  j["x_posterior"] = x_posterior;
  json y = json::array();
  for (std::size_t i = 0; i < y_hat.size(); ++i) {
    if (y_hat[i] == kRejectedValue) {
      y.push_back(nullptr);
    } else {
      y.push_back(y_hat[i]);
    }
  }
  j["y_hat"] = y;
  j["y_posterior"] = y_posterior;
  j["rejected"] = rejected;
  return j.dump();
}

}  // namespace bayesimposter::bayes
