#include "mgids/attack.hpp"

#include <algorithm>
#include <cmath>

#include "mgids/errors.hpp"
#include "mgids/rng.hpp"

namespace mgids::attack {

namespace {

constexpr std::array<std::string_view, kNumModes> kNames{
    "Normal", "Additive", "Ramp", "SlowRamp", "Sinusoid", "Stealth", "DoS"};

// Tone frequencies (Hz) in irrational ratios 1 : sqrt(2) : sqrt(5) and
// amplitude weights summing to one.
constexpr std::array<double, 3> kStealthFreqs{1.1, 1.1 * 1.4142135623730951, 1.1 * 2.23606797749979};
constexpr std::array<double, 3> kStealthWeights{0.5, 0.3, 0.2};

}  // namespace

std::string_view mode_name(AttackMode mode) { return kNames[static_cast<std::size_t>(mode)]; }

std::optional<AttackMode> parse_mode(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<AttackMode>(i);
  }
  return std::nullopt;
}

AttackMode mode_from_name(std::string_view name) {
  auto m = parse_mode(name);
  if (!m) throw UsageError("unknown attack mode '" + std::string(name) + "'");
  return *m;
}

void AttackSpec::validate(double t_end) const {
  if (!(onset >= 0.0 && onset <= t_end)) {
    throw UsageError("attack onset " + std::to_string(onset) + " outside [0, t_end]");
  }
  if (mode != AttackMode::Normal && targets.empty()) {
    throw UsageError("attack " + std::string(mode_name(mode)) + " has no target DGs");
  }
  if (params.ramp_slope > 0.0 && params.slow_ramp_slope > 0.0 &&
      params.slow_ramp_slope > params.ramp_slope / 10.0) {
    throw UsageError("slow ramp slope must be at most a tenth of the ramp slope");
  }
}

bool AttackSpec::targets_dg(int dg_index0) const {
  return std::find(targets.begin(), targets.end(), dg_index0 + 1) != targets.end();
}

double stealth_waveform(double tau, const AttackSpec& spec) {
  double value = 0.0;
  for (std::size_t k = 0; k < kStealthFreqs.size(); ++k) {
    double phase = 0.0;
    if (spec.params.stealth_seed != 0) {
      phase = 2.0 * std::numbers::pi * unit_double(hash_combine(spec.params.stealth_seed, k));
    }
    value += kStealthWeights[k] * spec.params.stealth_amplitude *
             std::sin(2.0 * std::numbers::pi * kStealthFreqs[k] * tau + phase);
  }
  return value;
}

Offsets attack_offsets(const AttackSpec& spec, double t) {
  if (t < spec.onset) return {};
  const double tau = t - spec.onset;
  const auto& p = spec.params;
  switch (spec.mode) {
    case AttackMode::Normal:
    case AttackMode::DoS:
      return {};
    case AttackMode::Additive:
      return {p.bias, p.bias};
    case AttackMode::Ramp:
      return {p.ramp_slope * tau, 0.0};
    case AttackMode::SlowRamp:
      return {0.0, p.slow_ramp_slope * tau};
    case AttackMode::Sinusoid: {
      const double s = p.amplitude * std::sin(p.omega * tau);
      return {s, s};
    }
    case AttackMode::Stealth: {
      const double f = stealth_waveform(tau, spec);
      return {f, p.stealth_alpha * f};
    }
  }
  return {};
}

Signals apply_attack(const AttackSpec& spec, double xi, double zeta, double t, DosLatch& latch) {
  if (spec.mode == AttackMode::Normal || t < spec.onset) return {xi, zeta};
  if (spec.mode == AttackMode::DoS) {
    if (!latch.latched) {
      latch.frozen_xi = xi;
      latch.latched = true;
    }
    return {latch.frozen_xi, zeta};
  }
  const Offsets o = attack_offsets(spec, t);
  return {xi + o.xi, zeta + o.zeta};
}

}  // namespace mgids::attack
