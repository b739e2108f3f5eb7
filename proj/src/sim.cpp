#include "mgids/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "mgids/dataset.hpp"
#include "mgids/errors.hpp"
#include "mgids/rng.hpp"

namespace mgids::sim {

CommGraph::CommGraph(int n, std::vector<double> weights) : n_(n), weights_(std::move(weights)) {
  if (n <= 0 || weights_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw UsageError("communication graph weights must be an n x n matrix");
  }
  for (int i = 0; i < n; ++i) {
    if (weight(i, i) != 0.0) throw UsageError("communication graph has a self loop");
    for (int j = 0; j < n; ++j) {
      if (!(weight(i, j) >= 0.0)) throw UsageError("communication weights must be >= 0");
      if (weight(i, j) != weight(j, i)) throw UsageError("communication graph must be symmetric");
    }
  }
  // Connectivity by breadth-first search from node 0.
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> frontier{0};
  seen[0] = 1;
  while (!frontier.empty()) {
    int i = frontier.back();
    frontier.pop_back();
    for (int j : neighbors(i)) {
      if (!seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        frontier.push_back(j);
      }
    }
  }
  if (std::count(seen.begin(), seen.end(), 1) != n) {
    throw UsageError("communication graph is not connected");
  }
}

CommGraph CommGraph::ring(int n) {
  std::vector<double> w(static_cast<std::size_t>(n * n), 0.0);
  if (n == 2) {
    w[1] = w[2] = 1.0;
  } else {
    for (int i = 0; i < n; ++i) {
      int j = (i + 1) % n;
      w[static_cast<std::size_t>(i * n + j)] = 1.0;
      w[static_cast<std::size_t>(j * n + i)] = 1.0;
    }
  }
  return CommGraph(n, std::move(w));
}

std::vector<int> CommGraph::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j) {
    if (weight(i, j) > 0.0) out.push_back(j);
  }
  return out;
}

double LoadProfile::at(double t) const {
  double value = steps.empty() ? 0.0 : steps.front().second;
  for (const auto& [start, v] : steps) {
    if (start <= t) value = v;
  }
  return value;
}

std::size_t SimConfig::n_samples() const {
  return static_cast<std::size_t>(std::llround(t_end / dt)) + 1;
}

int SimConfig::ctrl_steps() const {
  return std::max(1, static_cast<int>(std::lround(ctrl_period / dt)));
}

void SimConfig::validate() const {
  if (!(dt > 0.0 && dt <= ctrl_period && ctrl_period <= t_end)) {
    throw UsageError("need 0 < dt <= ctrl_period <= t_end");
  }
  const auto n = static_cast<std::size_t>(graph.size());
  if (droop.size() != n || n != static_cast<std::size_t>(data::kNumDG)) {
    throw UsageError("droop parameters and graph must both describe " +
                     std::to_string(data::kNumDG) + " DGs");
  }
  for (const auto& d : droop) {
    if (!(d.m > 0.0 && d.n > 0.0)) throw UsageError("droop slopes m, n must be > 0");
  }
  if (gains.k_p < 0 || gains.k_q < 0 || gains.c_f < 0 || gains.c_v < 0) {
    throw UsageError("secondary gains must be >= 0");
  }
  if (!(plant.tau_p > 0.0 && plant.tau_q > 0.0)) throw UsageError("tau_p, tau_q must be > 0");
  std::array<int, data::kNumBus> per_bus{};
  for (int b : plant.bus_map) {
    if (b < 0 || b >= data::kNumBus) throw UsageError("bus_map entry out of range");
    ++per_bus[static_cast<std::size_t>(b)];
  }
  for (int c : per_bus) {
    if (c == 0) throw UsageError("every bus needs at least one DG");
  }
  if (plant.p_load.steps.empty() || plant.q_load.steps.empty()) {
    throw UsageError("load profiles need at least one step");
  }
  const auto& nz = noise;
  if (nz.ripple_amp_v < 0 || nz.ripple_amp_i < 0 || nz.quant_step_v < 0 || nz.quant_step_p < 0 ||
      nz.quant_step_f < 0 || nz.jitter_max < 0 || nz.sample_jitter < 0 || nz.f_sw < 0) {
    throw UsageError("noise magnitudes must be >= 0");
  }
}

DroopOutput droop_eval(const DGState& state, const DroopParams& params, double omega_star,
                       double v_star) {
  if (!std::isfinite(state.p) || !std::isfinite(state.q) || !std::isfinite(omega_star) ||
      !std::isfinite(v_star)) {
    throw NumericError("droop_eval: non-finite input");
  }
  return {omega_star - params.m * (state.p - params.p_star),
          v_star - params.n * (state.q - params.q_star)};
}

void secondary_step(std::span<DGState> states, std::span<const Received> received,
                    const CommGraph& graph, const SecondaryGains& gains, double omega_star,
                    double v_star, double h) {
  const int n = graph.size();
  if (states.size() != static_cast<std::size_t>(n) ||
      received.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw DataError("secondary_step: state count does not match the communication graph");
  }
  // Rates are evaluated from the pre-step state for every node before any update.
  std::vector<double> dxi(states.size()), dzeta(states.size());
  for (int i = 0; i < n; ++i) {
    const auto& s = states[static_cast<std::size_t>(i)];
    double cons_f = 0.0, cons_v = 0.0;
    for (int j = 0; j < n; ++j) {
      const double a = graph.weight(i, j);
      if (a <= 0.0) continue;
      const auto& r = received[static_cast<std::size_t>(i * n + j)];
      cons_f += a * (s.xi - r.xi);
      cons_v += a * (s.zeta - r.zeta);
    }
    dxi[static_cast<std::size_t>(i)] = -gains.k_p * (s.omega - omega_star) - gains.c_f * cons_f;
    dzeta[static_cast<std::size_t>(i)] = -gains.k_q * (s.v - v_star) - gains.c_v * cons_v;
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].xi += h * dxi[i];
    states[i].zeta += h * dzeta[i];
  }
}

void secondary_step(std::span<DGState> states, const CommGraph& graph,
                    const SecondaryGains& gains, double omega_star, double v_star, double h) {
  const auto n = static_cast<std::size_t>(graph.size());
  if (states.size() != n) {
    throw DataError("secondary_step: state count does not match the communication graph");
  }
  std::vector<Received> received(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) received[i * n + j] = {states[j].xi, states[j].zeta};
  }
  secondary_step(states, received, graph, gains, omega_star, v_star, h);
}

SteadyState steady_state(std::span<const DGState> states, const SimConfig& cfg, double t) {
  const std::size_t n = states.size();
  double inv_m = 0.0, inv_n = 0.0, num_f = 0.0, num_v = 0.0, p_star = 0.0, q_star = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = cfg.droop[i];
    inv_m += 1.0 / d.m;
    inv_n += 1.0 / d.n;
    num_f += (cfg.omega_star + states[i].xi) / d.m;
    num_v += (cfg.v_star + states[i].zeta) / d.n;
    p_star += d.p_star;
    q_star += d.q_star;
  }
  if (!(inv_m > 0.0) || !std::isfinite(inv_m) || !(inv_n > 0.0) || !std::isfinite(inv_n)) {
    throw NumericError("degenerate droop configuration: sum of inverse slopes is not positive");
  }
  SteadyState ss;
  ss.omega_common = (num_f + p_star - cfg.plant.p_load.at(t)) / inv_m;
  ss.v_common = (num_v + q_star - cfg.plant.q_load.at(t)) / inv_n;
  ss.p.resize(n);
  ss.q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = cfg.droop[i];
    ss.p[i] = d.p_star + (cfg.omega_star + states[i].xi - ss.omega_common) / d.m;
    ss.q[i] = d.q_star + (cfg.v_star + states[i].zeta - ss.v_common) / d.n;
  }
  return ss;
}

void plant_step(std::span<DGState> states, const SimConfig& cfg, double t) {
  if (!(cfg.plant.p_load.at(t) > 0.0)) throw NumericError("plant_step: total load must be > 0");
  const SteadyState ss = steady_state(states, cfg, t);
  const double kp = cfg.dt / cfg.plant.tau_p;
  const double kq = cfg.dt / cfg.plant.tau_q;
  for (std::size_t i = 0; i < states.size(); ++i) {
    auto& s = states[i];
    s.p += kp * (ss.p[i] - s.p);
    s.q += kq * (ss.q[i] - s.q);
    const DroopOutput d = droop_eval(s, cfg.droop[i], cfg.omega_star, cfg.v_star);
    s.omega = d.omega + s.xi;
    s.v = d.v + s.zeta;
  }
}

std::vector<DGState> initial_state(const SimConfig& cfg) {
  std::vector<DGState> states(cfg.droop.size());
  double inv_m = 0.0, inv_n = 0.0, p_star = 0.0, q_star = 0.0;
  for (const auto& d : cfg.droop) {
    inv_m += 1.0 / d.m;
    inv_n += 1.0 / d.n;
    p_star += d.p_star;
    q_star += d.q_star;
  }
  // Common corrections that put the shared frequency and voltage exactly at nominal.
  const double xi0 = (cfg.plant.p_load.at(0.0) - p_star) / inv_m;
  const double zeta0 = (cfg.plant.q_load.at(0.0) - q_star) / inv_n;
  for (auto& s : states) {
    s.xi = xi0;
    s.zeta = zeta0;
  }
  const SteadyState ss = steady_state(states, cfg, 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) {
    auto& s = states[i];
    s.p = ss.p[i];
    s.q = ss.q[i];
    const DroopOutput d = droop_eval(s, cfg.droop[i], cfg.omega_star, cfg.v_star);
    s.omega = d.omega + s.xi;
    s.v = d.v + s.zeta;
  }
  return states;
}

double quantize(double x, double step) {
  if (step <= 0.0) return x;
  // nearbyint honors the default round-to-nearest-even mode.
  return std::nearbyint(x / step) * step;
}

SampleRow measure(std::span<const DGState> states, const SimConfig& cfg, double t,
                  std::uint64_t sample_index) {
  const auto& nz = cfg.noise;
  constexpr double kEps = 1e-6;
  std::array<double, data::kNumBus> v_sum{}, p_sum{}, q_sum{};
  std::array<int, data::kNumBus> count{};
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto b = static_cast<std::size_t>(cfg.plant.bus_map[i]);
    v_sum[b] += states[i].v;
    p_sum[b] += states[i].p;
    q_sum[b] += states[i].q;
    ++count[b];
  }
  SampleRow row{};
  for (std::size_t b = 0; b < data::kNumBus; ++b) {
    double ts = t;
    if (nz.sample_jitter > 0.0) {
      const double u = unit_double(hash_combine(nz.seed, 0x5A3D1E, sample_index, b));
      ts += (2.0 * u - 1.0) * nz.sample_jitter;
    }
    const double phase = kTwoPi * static_cast<double>(b) / 3.0;
    const double ripple = std::sin(kTwoPi * nz.f_sw * ts + phase);
    const double v_bus = v_sum[b] / count[b] + nz.ripple_amp_v * ripple;
    const double i_bus = std::sqrt(p_sum[b] * p_sum[b] + q_sum[b] * q_sum[b]) /
                         std::max(v_bus, kEps) * (1.0 + nz.ripple_amp_i * ripple);
    row[b] = quantize(v_bus, nz.quant_step_v);
    row[data::kNumBus + b] = i_bus;
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::size_t base = 2 * data::kNumBus + 3 * i;
    row[base] = quantize(states[i].p, nz.quant_step_p);
    row[base + 1] = quantize(states[i].q, nz.quant_step_p);
    row[base + 2] = quantize(states[i].f(), nz.quant_step_f);
  }
  return row;
}

namespace {

bool all_finite(std::span<const DGState> states) {
  return std::all_of(states.begin(), states.end(), [](const DGState& s) {
    return std::isfinite(s.omega) && std::isfinite(s.v) && std::isfinite(s.p) &&
           std::isfinite(s.q) && std::isfinite(s.xi) && std::isfinite(s.zeta);
  });
}

}  // namespace

data::SampleTable run_scenario(const SimConfig& cfg, const attack::AttackSpec& attack,
                               const StateObserver& observer) {
  cfg.validate();
  attack.validate(cfg.t_end);
  const int n = cfg.graph.size();
  const auto nn = static_cast<std::size_t>(n);
  const std::size_t n_samples = cfg.n_samples();
  const int ctrl_steps = cfg.ctrl_steps();
  const double h_ctrl = ctrl_steps * cfg.dt;

  std::vector<DGState> states = initial_state(cfg);
  // Broadcast history: history[u * n + j] = (xi_j, zeta_j) sent at control update u.
  std::vector<Received> history;
  history.reserve((n_samples / static_cast<std::size_t>(ctrl_steps) + 2) * nn);
  std::vector<Received> received(nn * nn);
  std::vector<attack::DosLatch> latches(nn * nn);

  data::SampleTable table(data::unlabeled_header());
  table.reserve_rows(n_samples);
  std::vector<double> row(table.n_cols());

  auto log_row = [&](std::size_t k, double t) {
    const SampleRow m = measure(states, cfg, t, k);
    row[0] = t;
    std::copy(m.begin(), m.end(), row.begin() + 1);
    table.append_row(row);
    if (observer) observer(t, states);
  };

  log_row(0, 0.0);
  std::uint64_t update = 0;
  for (std::size_t k = 1; k < n_samples; ++k) {
    const double t_prev = static_cast<double>(k - 1) * cfg.dt;
    if ((k - 1) % static_cast<std::size_t>(ctrl_steps) == 0) {
      for (const auto& s : states) history.push_back({s.xi, s.zeta});
      for (int i = 0; i < n; ++i) {
        const bool targeted = attack.mode != attack::AttackMode::Normal && attack.targets_dg(i);
        for (int j = 0; j < n; ++j) {
          if (cfg.graph.weight(i, j) <= 0.0) continue;
          const auto jitter =
              cfg.noise.jitter_max > 0
                  ? hash_combine(cfg.noise.seed, 0x7177E5, update, i, j) %
                        static_cast<std::uint64_t>(cfg.noise.jitter_max + 1)
                  : 0;
          const std::uint64_t delay = 1 + jitter;
          const std::uint64_t src = update >= delay ? update - delay : 0;
          Received r = history[src * nn + static_cast<std::size_t>(j)];
          if (targeted) {
            const auto out = attack::apply_attack(attack, r.xi, r.zeta, t_prev,
                                                  latches[static_cast<std::size_t>(i * n + j)]);
            r = {out.xi, out.zeta};
          }
          received[static_cast<std::size_t>(i * n + j)] = r;
        }
      }
      secondary_step(states, received, cfg.graph, cfg.gains, cfg.omega_star, cfg.v_star, h_ctrl);
      ++update;
    }
    try {
      plant_step(states, cfg, t_prev);
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << "simulation blow-up at t = " << t_prev << " s (step " << k << "): " << e.what();
      throw NumericError(msg.str());
    }
    const double t = static_cast<double>(k) * cfg.dt;
    if (!all_finite(states)) {
      std::ostringstream msg;
      msg << "simulation blow-up: non-finite state at t = " << t << " s (step " << k << ")";
      throw NumericError(msg.str());
    }
    log_row(k, t);
  }
  return data::label_scenario(table, attack);
}

}  // namespace mgids::sim
