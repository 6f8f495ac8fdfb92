#include "bayesimposter/ics_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace bayesimposter::ics {

using nlohmann::json;

namespace {

constexpr double kRowSumTol = 1e-12;

void check_row_stochastic(const Kernel& k, const std::string& what, std::size_t cols) {
  for (const auto& row : k) {
    if (row.size() != cols) {
      throw std::invalid_argument(what + ": row width mismatch");
    }
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0 || p > 1.0) throw std::invalid_argument(what + ": entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol) {
      throw std::invalid_argument(what + ": row does not sum to 1");
    }
  }
}

int argmax_row(const std::vector<double>& row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

// One dominant entry at `dom` with probability `p`; the remainder is split
// over the other codes with seeded random proportions.
std::vector<double> biased_row(int n, int dom, double p, Rng& rng) {
  std::vector<double> row(n, 0.0);
  if (n == 1) {
    row[0] = 1.0;
    return row;
  }
  std::vector<double> w(n - 1);
  double total = 0.0;
  for (auto& v : w) {
    v = 0.05 + rng.uniform01();
    total += v;
  }
  int j = 0;
  double assigned = 0.0;
  for (int b = 0; b < n; ++b) {
    if (b == dom) continue;
    row[b] = (1.0 - p) * w[j] / total;
    assigned += row[b];
    ++j;
  }
  row[dom] = 1.0 - assigned;  // exact complement keeps the row sum at 1
  return row;
}

}  // namespace

int MeasurementVariable::index_of(int value) const {
  auto it = std::find(values.begin(), values.end(), value);
  return it == values.end() ? -1 : static_cast<int>(it - values.begin());
}

std::vector<std::pair<int, std::vector<int>>> Schema::multivariate_groups() const {
  std::vector<std::vector<int>> sensors(state_sizes.size());
  for (int j = 0; j < measurement_count(); ++j) {
    sensors[static_cast<std::size_t>(meas_parent[j])].push_back(j);
  }
  std::vector<std::pair<int, std::vector<int>>> groups;
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    if (sensors[i].size() > 1) groups.emplace_back(static_cast<int>(i), sensors[i]);
  }
  return groups;
}

void StateSpaceModel::validate() const {
  if (transition.size() != states.size()) {
    throw std::invalid_argument("model: one transition kernel per state variable required");
  }
  if (observation.size() != measurements.size()) {
    throw std::invalid_argument("model: one observation table per measurement variable required");
  }
  if (state_noise < 0.0 || state_noise >= 1.0 || meas_noise < 0.0 || meas_noise >= 1.0) {
    throw std::invalid_argument("model: noise probabilities must lie in [0,1)");
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto n = static_cast<std::size_t>(states[i].domain_size());
    if (n == 0) throw std::invalid_argument("model: empty state domain");
    if (transition[i].size() != n) throw std::invalid_argument("model: kernel height mismatch");
    check_row_stochastic(transition[i], "transition[" + states[i].name + "]", n);
  }
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const auto& m = measurements[j];
    if (m.values.empty()) throw std::invalid_argument("model: empty measurement domain");
    for (std::size_t a = 0; a < m.values.size(); ++a) {
      for (std::size_t b = a + 1; b < m.values.size(); ++b) {
        if (m.values[a] == m.values[b]) {
          throw std::invalid_argument("model: duplicate measurement value in " + m.name);
        }
      }
    }
    if (m.parent < 0 || m.parent >= state_count()) {
      throw std::invalid_argument("model: measurement parent out of range");
    }
    const auto rows = static_cast<std::size_t>(states[static_cast<std::size_t>(m.parent)].domain_size());
    if (observation[j].size() != rows) throw std::invalid_argument("model: observation height mismatch");
    check_row_stochastic(observation[j], "observation[" + m.name + "]", m.values.size());
  }
}

Schema StateSpaceModel::schema() const {
  Schema s;
  s.state_sizes.reserve(states.size());
  for (const auto& v : states) s.state_sizes.push_back(v.domain_size());
  s.meas_values.reserve(measurements.size());
  s.meas_parent.reserve(measurements.size());
  for (const auto& m : measurements) {
    s.meas_values.push_back(m.values);
    s.meas_parent.push_back(m.parent);
  }
  return s;
}

double StateSpaceModel::transition_prob(int var_id, int code_prev, int code_next) const {
  if (var_id < 0 || var_id >= state_count()) throw std::domain_error("transition_prob: unknown variable");
  const auto& k = transition[static_cast<std::size_t>(var_id)];
  const int n = states[static_cast<std::size_t>(var_id)].domain_size();
  if (code_prev < 0 || code_prev >= n || code_next < 0 || code_next >= n) {
    throw std::domain_error("transition_prob: code outside domain");
  }
  return k[static_cast<std::size_t>(code_prev)][static_cast<std::size_t>(code_next)];
}

double StateSpaceModel::observation_prob(int meas_id, int state_code, int value_index) const {
  if (meas_id < 0 || meas_id >= measurement_count()) throw std::domain_error("observation_prob: unknown variable");
  const auto& table = observation[static_cast<std::size_t>(meas_id)];
  const auto& m = measurements[static_cast<std::size_t>(meas_id)];
  const int rows = states[static_cast<std::size_t>(m.parent)].domain_size();
  if (state_code < 0 || state_code >= rows) throw std::domain_error("observation_prob: state code outside domain");
  if (value_index < 0 || value_index >= m.domain_size()) {
    throw std::domain_error("observation_prob: value index outside domain");
  }
  return table[static_cast<std::size_t>(state_code)][static_cast<std::size_t>(value_index)];
}

WarehouseScenario build_warehouse_model(std::uint64_t seed) {
  constexpr int kStates = 420;
  constexpr int kMeasurements = 160;
  constexpr int kRepeatedSensors = 20;  // states 1..20 carry a second sensor

  Rng rng(mix_seed(seed, 0x1c5));
  WarehouseScenario sc;
  StateSpaceModel& model = sc.model;

  model.states.reserve(kStates);
  for (int i = 0; i < kStates; ++i) {
    StateVariable v;
    v.id = i;
    if (i == 0) {
      v.name = "suctionstate";
      v.labels = {"OFF", "ON"};
    } else {
      v.name = "state_" + std::to_string(i);
      const int n = 2 + static_cast<int>(rng.uniform_int(3));  // {2,3,4}
      for (int c = 0; c < n; ++c) v.labels.push_back("s" + std::to_string(c));
    }
    model.states.push_back(std::move(v));
  }

  model.transition.reserve(kStates);
  for (int i = 0; i < kStates; ++i) {
    const int n = model.states[static_cast<std::size_t>(i)].domain_size();
    Kernel k;
    k.reserve(static_cast<std::size_t>(n));
    for (int prev = 0; prev < n; ++prev) {
      // suctionstate trends ON: the cup is engaged on the nominal cycle.
      const int dom = (i == 0) ? 1 : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
      const double p = rng.uniform_real(0.80, 0.95);
      k.push_back(biased_row(n, dom, p, rng));
    }
    model.transition.push_back(std::move(k));
  }

  model.measurements.reserve(kMeasurements);
  for (int j = 0; j < kMeasurements; ++j) {
    MeasurementVariable m;
    m.id = j;
    if (j == 0) {
      m.name = "S_theta";
      m.values = {2, 4, 7, 9};  // cm; 2 is the drop-off threshold
      m.parent = 0;
    } else {
      m.name = "sensor_" + std::to_string(j);
      m.parent = (j >= kMeasurements - kRepeatedSensors)
                     ? j - (kMeasurements - kRepeatedSensors) + 1  // second sensor on states 1..20
                     : j;
      const int q = 3 + static_cast<int>(rng.uniform_int(3));  // {3,4,5}
      int base = 1 + static_cast<int>(rng.uniform_int(20));
      for (int c = 0; c < q; ++c) {
        m.values.push_back(base);
        base += 1 + static_cast<int>(rng.uniform_int(5));
      }
    }
    model.measurements.push_back(std::move(m));
  }

  model.observation.reserve(kMeasurements);
  for (int j = 0; j < kMeasurements; ++j) {
    const auto& m = model.measurements[static_cast<std::size_t>(j)];
    const int rows = model.states[static_cast<std::size_t>(m.parent)].domain_size();
    const int q = m.domain_size();
    Kernel table;
    table.reserve(static_cast<std::size_t>(rows));
    for (int s = 0; s < rows; ++s) {
      // The threshold setting is a standing value: 2 cm at every state.
      const int dom = (j == 0) ? 0 : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(q)));
      const double p = rng.uniform_real(0.97, 0.995);
      table.push_back(biased_row(q, dom, p, rng));
    }
    model.observation.push_back(std::move(table));
  }

  sc.suction_var = 0;
  sc.threshold_var = 0;
  model.validate();
  return sc;
}

std::pair<std::vector<int>, std::vector<int>> step(const StateSpaceModel& model,
                                                   const std::vector<int>& x_prev, Rng& rng) {
  if (x_prev.size() != static_cast<std::size_t>(model.state_count())) {
    throw std::domain_error("step: state vector length mismatch");
  }
  std::vector<int> x(x_prev.size());
  for (int i = 0; i < model.state_count(); ++i) {
    const int n = model.states[static_cast<std::size_t>(i)].domain_size();
    const int prev = x_prev[static_cast<std::size_t>(i)];
    if (prev < 0 || prev >= n) throw std::domain_error("step: code outside domain");
    if (model.state_noise > 0.0 && rng.uniform01() < model.state_noise) {
      x[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    } else {
      x[static_cast<std::size_t>(i)] =
          rng.sample_row(model.transition[static_cast<std::size_t>(i)][static_cast<std::size_t>(prev)]);
    }
  }
  std::vector<int> y(static_cast<std::size_t>(model.measurement_count()));
  for (int j = 0; j < model.measurement_count(); ++j) {
    const auto& m = model.measurements[static_cast<std::size_t>(j)];
    const int q = m.domain_size();
    const int parent_code = x[static_cast<std::size_t>(m.parent)];
    int idx;
    if (model.meas_noise > 0.0 && rng.uniform01() < model.meas_noise) {
      idx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(q)));
    } else {
      idx = rng.sample_row(model.observation[static_cast<std::size_t>(j)][static_cast<std::size_t>(parent_code)]);
    }
    y[static_cast<std::size_t>(j)] = m.values[static_cast<std::size_t>(idx)];
  }
  return {std::move(x), std::move(y)};
}

std::pair<std::vector<int>, std::vector<int>> nominal_step(const StateSpaceModel& model,
                                                           const std::vector<int>& x_prev) {
  if (x_prev.size() != static_cast<std::size_t>(model.state_count())) {
    throw std::domain_error("nominal_step: state vector length mismatch");
  }
  std::vector<int> x(x_prev.size());
  for (int i = 0; i < model.state_count(); ++i) {
    const int n = model.states[static_cast<std::size_t>(i)].domain_size();
    const int prev = x_prev[static_cast<std::size_t>(i)];
    if (prev < 0 || prev >= n) throw std::domain_error("nominal_step: code outside domain");
    x[static_cast<std::size_t>(i)] =
        argmax_row(model.transition[static_cast<std::size_t>(i)][static_cast<std::size_t>(prev)]);
  }
  std::vector<int> y(static_cast<std::size_t>(model.measurement_count()));
  for (int j = 0; j < model.measurement_count(); ++j) {
    const auto& m = model.measurements[static_cast<std::size_t>(j)];
    const int parent_code = x[static_cast<std::size_t>(m.parent)];
    const int idx =
        argmax_row(model.observation[static_cast<std::size_t>(j)][static_cast<std::size_t>(parent_code)]);
    y[static_cast<std::size_t>(j)] = m.values[static_cast<std::size_t>(idx)];
  }
  return {std::move(x), std::move(y)};
}

HistorianLog simulate(const StateSpaceModel& model, const std::vector<int>& x_0,
                      std::int64_t steps, Rng& rng) {
  if (steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
  HistorianLog log;
  log.records.reserve(static_cast<std::size_t>(steps));
  std::vector<int> x = x_0;
  for (std::int64_t k = 1; k <= steps; ++k) {
    auto [nx, y] = step(model, x, rng);
    log.records.push_back(LogRecord{k, nx, y});
    x = std::move(nx);
  }
  return log;
}

// --- serialization ---

std::string StateSpaceModel::to_json() const {
  json j;
  j["state_noise"] = state_noise;
  j["meas_noise"] = meas_noise;
  j["states"] = json::array();
  for (const auto& v : states) {
    j["states"].push_back({{"id", v.id}, {"name", v.name}, {"labels", v.labels}});
  }
  j["measurements"] = json::array();
  for (const auto& m : measurements) {
    j["measurements"].push_back(
        {{"id", m.id}, {"name", m.name}, {"values", m.values}, {"parent", m.parent}});
  }
  j["transition"] = transition;
  j["observation"] = observation;
  return j.dump();
}

StateSpaceModel StateSpaceModel::from_json(const std::string& text) {
  json j = json::parse(text);
  StateSpaceModel model;
  model.state_noise = j.at("state_noise").get<double>();
  model.meas_noise = j.at("meas_noise").get<double>();
  for (const auto& e : j.at("states")) {
    StateVariable v;
    v.id = e.at("id").get<int>();
    v.name = e.at("name").get<std::string>();
    v.labels = e.at("labels").get<std::vector<std::string>>();
    model.states.push_back(std::move(v));
  }
  for (const auto& e : j.at("measurements")) {
    MeasurementVariable m;
    m.id = e.at("id").get<int>();
    m.name = e.at("name").get<std::string>();
    m.values = e.at("values").get<std::vector<int>>();
    m.parent = e.at("parent").get<int>();
    model.measurements.push_back(std::move(m));
  }
  model.transition = j.at("transition").get<std::vector<Kernel>>();
  model.observation = j.at("observation").get<std::vector<Kernel>>();
  model.validate();
  return model;
}

std::string HistorianLog::to_json() const {
  json j = json::array();
  for (const auto& r : records) {
    j.push_back({{"k", r.k}, {"x", r.x}, {"y", r.y}});
  }
  return json({{"records", j}}).dump();
}

HistorianLog HistorianLog::from_json(const std::string& text) {
  json j = json::parse(text);
  HistorianLog log;
  for (const auto& e : j.at("records")) {
    LogRecord r;
    r.k = e.at("k").get<std::int64_t>();
    r.x = e.at("x").get<std::vector<int>>();
    r.y = e.at("y").get<std::vector<int>>();
    log.records.push_back(std::move(r));
  }
  return log;
}

std::string HistorianLog::to_csv() const {
  std::ostringstream out;
  const std::size_t m = records.empty() ? 0 : records.front().x.size();
  const std::size_t p = records.empty() ? 0 : records.front().y.size();
  out << "k";
  for (std::size_t i = 0; i < m; ++i) out << ",x_" << i;
  for (std::size_t j = 0; j < p; ++j) out << ",y_" << j;
  out << "\n";
  for (const auto& r : records) {
    out << r.k;
    for (int v : r.x) out << ',' << v;
    for (int v : r.y) out << ',' << v;
    out << "\n";
  }
  return out.str();
}

}  // namespace bayesimposter::ics
