#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "mgids/attack.hpp"
#include "mgids/table.hpp"

namespace mgids::sim {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct DroopParams {
  double m = 1e-4;      // frequency droop, rad/s per W
  double n = 1e-3;      // voltage droop, pu per var
  double p_star = 5e3;  // W
  double q_star = 1e3;  // var
};

struct SecondaryGains {
  double k_p = 4.0;   // frequency restoration, 1/s
  double k_q = 4.0;   // voltage restoration, 1/s
  double c_f = 10.0;  // frequency consensus coupling, 1/s
  double c_v = 10.0;  // voltage consensus coupling, 1/s
};

/// Undirected weighted communication graph between DG controllers.
class CommGraph {
 public:
  CommGraph() = default;
  /// Throws UsageError unless weights is n x n, symmetric, non-negative with a
  /// zero diagonal, and the graph is connected.
  CommGraph(int n, std::vector<double> weights);

  /// Ring i <-> i+1 (mod n) with unit weights.
  static CommGraph ring(int n);

  int size() const { return n_; }
  double weight(int i, int j) const { return weights_[static_cast<std::size_t>(i * n_ + j)]; }
  const std::vector<double>& weights() const { return weights_; }
  /// N_i = { j : a_ij > 0 }
  std::vector<int> neighbors(int i) const;

 private:
  int n_ = 0;
  std::vector<double> weights_;
};

/// Dynamic state of one DG. omega and v are the output (commanded) frequency and
/// voltage, i.e. droop value plus the secondary correction.
struct DGState {
  double omega = 0.0;  // rad/s
  double v = 0.0;      // pu
  double p = 0.0;      // W
  double q = 0.0;      // var
  double xi = 0.0;     // rad/s
  double zeta = 0.0;   // pu

  double f() const { return omega / kTwoPi; }
};

/// Piecewise-constant profile: value of the latest step whose start time is <= t.
struct LoadProfile {
  std::vector<std::pair<double, double>> steps;  // (start time, value), sorted

  double at(double t) const;
};

struct PlantParams {
  double tau_p = 0.05;  // s
  double tau_q = 0.05;  // s
  LoadProfile p_load{{{0.0, 60e3}, {0.3, 66e3}}};
  LoadProfile q_load{{{0.0, 10e3}}};
  std::array<int, data::kNumDG> bus_map{0, 0, 0, 0, 1, 1, 1, 2, 2, 2};  // 0-based bus per DG
  // Inner-loop PI gains. The reduced-order plant folds them into tau_p / tau_q;
  // they are carried so a configuration fully describes the controller.
  double k_pv = 0.05, k_iv = 390.0, k_pc = 10.5, k_ic = 16e3;
};

struct NoiseConfig {
  double ripple_amp_v = 0.005;  // pu
  double ripple_amp_i = 0.002;  // relative
  double f_sw = 10e3;           // Hz
  double quant_step_v = 0.0;    // pu, 0 disables
  double quant_step_p = 1.0;    // W / var
  double quant_step_f = 1e-3;   // Hz
  int jitter_max = 1;           // control periods
  double sample_jitter = 0.0;   // s, max |offset| of the ripple sampling instant
  std::uint64_t seed = 42;
};

struct SimConfig {
  double dt = 1e-4;
  double t_end = 1.0;
  double ctrl_period = 1e-3;
  double omega_star = kTwoPi * 60.0;
  double v_star = 1.0;
  std::vector<DroopParams> droop = std::vector<DroopParams>(data::kNumDG);
  SecondaryGains gains;
  CommGraph graph = CommGraph::ring(data::kNumDG);
  PlantParams plant;
  NoiseConfig noise;

  /// round(t_end / dt) + 1
  std::size_t n_samples() const;
  int ctrl_steps() const;
  /// Throws UsageError on any violated field invariant.
  void validate() const;
};

struct DroopOutput {
  double omega;
  double v;
};

/// omega = omega* - m (P - P*), v = v* - n (Q - Q*). Throws NumericError on
/// non-finite input.
DroopOutput droop_eval(const DGState& state, const DroopParams& params, double omega_star,
                       double v_star);

/// Neighbor values as seen by each receiver: received[i * n + j] is what DG i
/// holds for DG j. Entries with a_ij = 0 are ignored.
struct Received {
  double xi = 0.0;
  double zeta = 0.0;
};

/// One forward-Euler step of the consensus restoration layer over interval h.
void secondary_step(std::span<DGState> states, std::span<const Received> received,
                    const CommGraph& graph, const SecondaryGains& gains, double omega_star,
                    double v_star, double h);

/// Same, with every DG reading its neighbors' current values.
void secondary_step(std::span<DGState> states, const CommGraph& graph,
                    const SecondaryGains& gains, double omega_star, double v_star, double h);

/// Droop-consistent load-sharing equilibrium for the current corrections.
struct SteadyState {
  std::vector<double> p;
  std::vector<double> q;
  double omega_common = 0.0;
  double v_common = 0.0;
};

SteadyState steady_state(std::span<const DGState> states, const SimConfig& cfg, double t);

/// Relaxes P, Q toward the equilibrium shares over h = cfg.dt and refreshes
/// omega, v from droop plus corrections.
void plant_step(std::span<DGState> states, const SimConfig& cfg, double t);

/// Restored steady state for the load at t = 0 with agreeing corrections.
std::vector<DGState> initial_state(const SimConfig& cfg);

using SampleRow = std::array<double, data::kNumFeatures>;

/// Noisy, quantized measurement vector in CSV feature order.
SampleRow measure(std::span<const DGState> states, const SimConfig& cfg, double t,
                  std::uint64_t sample_index);

/// Round-half-even quantization; step <= 0 returns x unchanged.
double quantize(double x, double step);

/// Optional per-sample observer of the true (noise-free) state.
using StateObserver = std::function<void(double t, std::span<const DGState> states)>;

/// Simulates one scenario and returns the labeled table (one row per dt).
/// Throws NumericError naming the failure time if the state becomes non-finite.
data::SampleTable run_scenario(const SimConfig& cfg, const attack::AttackSpec& attack,
                               const StateObserver& observer = {});

}  // namespace mgids::sim
