#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mgids::attack {

/// Attack classes. The underlying value is the multiclass label index.
enum class AttackMode : int {
  Normal = 0,
  Additive = 1,
  Ramp = 2,
  SlowRamp = 3,
  Sinusoid = 4,
  Stealth = 5,
  DoS = 6,
};

inline constexpr int kNumModes = 7;

inline constexpr std::array<AttackMode, kNumModes> kAllModes{
    AttackMode::Normal,   AttackMode::Additive, AttackMode::Ramp, AttackMode::SlowRamp,
    AttackMode::Sinusoid, AttackMode::Stealth,  AttackMode::DoS};

std::string_view mode_name(AttackMode mode);

/// Exact-match parse of "Normal", "Additive", "Ramp", "SlowRamp", "Sinusoid",
/// "Stealth", "DoS".
std::optional<AttackMode> parse_mode(std::string_view name);

/// Same as parse_mode but throws UsageError on unknown names.
AttackMode mode_from_name(std::string_view name);

constexpr int class_index(AttackMode mode) { return static_cast<int>(mode); }

struct AttackParams {
  double bias = 0.05;                              // additive offset b
  double ramp_slope = 0.2;                         // r, per s
  double slow_ramp_slope = 0.02;                   // r_s, per s
  double amplitude = 0.05;                         // sinusoid A
  double omega = 2.0 * std::numbers::pi * 5.0;     // sinusoid angular frequency, rad/s
  double stealth_alpha = 0.5;                      // zeta scaling of the stealth waveform
  double stealth_amplitude = 0.01;                 // total stealth amplitude bound
  std::uint64_t stealth_seed = 1;                  // 0 gives zero phases
};

struct AttackSpec {
  AttackMode mode = AttackMode::Normal;
  double onset = 0.7;          // t_a, s
  std::vector<int> targets{1}; // 1-based DG numbers whose inbound signals are corrupted
  AttackParams params;

  /// Throws UsageError when onset lies outside [0, t_end], targets are empty
  /// for an attack mode, or the slow ramp is not at least 10x slower than the ramp.
  void validate(double t_end) const;

  bool targets_dg(int dg_index0) const;
};

/// Injected offsets (d_xi, d_zeta) for the additive modes at time t.
struct Offsets {
  double xi = 0.0;
  double zeta = 0.0;
};

/// Latched xi value for the denial-of-service freeze on one link.
struct DosLatch {
  double frozen_xi = 0.0;
  bool latched = false;
};

/// Band-limited stealth signal: three incommensurate low-frequency tones whose
/// amplitudes sum to params.stealth_amplitude. Identical for every target.
double stealth_waveform(double tau, const AttackSpec& spec);

/// Additive offsets for every mode except DoS (which substitutes rather than
/// adds). Zero before onset and for Normal.
Offsets attack_offsets(const AttackSpec& spec, double t);

struct Signals {
  double xi;
  double zeta;
};

/// Corrupts one received (xi, zeta) pair. Identity before onset. For DoS the
/// first call at t >= onset latches xi and every later call returns it.
Signals apply_attack(const AttackSpec& spec, double xi, double zeta, double t, DosLatch& latch);

}  // namespace mgids::attack
