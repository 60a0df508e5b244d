#pragma once

// Switched-affine models of the flying-capacitor three-level boost converter
// (FC-TLBC) and of the NPC-type three-level buck used as a transfer target.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fcdistill {

/// Terminal level of one symbolic switching leg.
enum class Level : std::uint8_t { P, O, N };

/// The four admissible modes, encoded as (S_A, S_B). The declaration order is
/// the canonical mode order used for every tie-break in the project.
enum class SwitchMode : std::uint8_t { OP = 0, PO = 1, NO = 2, ON = 3 };

inline constexpr std::size_t kNumModes = 4;
inline constexpr std::array<SwitchMode, kNumModes> kAllModes = {
    SwitchMode::OP, SwitchMode::PO, SwitchMode::NO, SwitchMode::ON};

constexpr std::size_t index_of(SwitchMode m) { return static_cast<std::size_t>(m); }

constexpr SwitchMode mode_from_index(std::size_t i) {
  if (i >= kNumModes) throw std::out_of_range("switch mode index out of range");
  return static_cast<SwitchMode>(i);
}

/// Inductor terminal-voltage level.
constexpr Level s_a(SwitchMode m) {
  switch (m) {
    case SwitchMode::OP: return Level::O;
    case SwitchMode::PO: return Level::P;
    case SwitchMode::NO: return Level::N;
    case SwitchMode::ON: return Level::O;
  }
  return Level::O;
}

/// Flying-capacitor charging direction.
constexpr Level s_b(SwitchMode m) {
  switch (m) {
    case SwitchMode::OP: return Level::P;
    case SwitchMode::PO: return Level::O;
    case SwitchMode::NO: return Level::O;
    case SwitchMode::ON: return Level::N;
  }
  return Level::O;
}

/// Inverse of (s_a, s_b). Throws for the five combinations that are not
/// admissible (PP, NP, OO, PN, NN).
SwitchMode mode_from_levels(Level a, Level b);

std::string_view to_string(SwitchMode m);
SwitchMode parse_mode(std::string_view name);

/// Rows of the boost mode-coefficient table.
struct ModeCoefficients {
  double a_vo;
  double a_cf;
  double alpha;
  double beta;

  friend bool operator==(const ModeCoefficients&, const ModeCoefficients&) = default;
};

ModeCoefficients mode_coefficients(SwitchMode m);

/// Which switched-affine plant a simulation or expert works with.
enum class Topology : std::uint8_t { FcBoost, NpcBuck };

std::string_view to_string(Topology t);
Topology parse_topology(std::string_view name);

/// Generic rate coefficients shared by both topologies:
///   di_L/dt  = (k_in V_in - a_vo v_o - a_cf v_cf) / L
///   dv_cf/dt = beta i_L / C_f
///   dv_o/dt  = (alpha i_L - i_o) / C
/// For the boost every mode has k_in = 1 and the remaining entries are the
/// ModeCoefficients row. For the buck k_in and a_cf select the switch-node
/// level from {V_in, V_in - v_cf, v_cf, 0}.
struct AffineRow {
  double k_in;
  double a_vo;
  double a_cf;
  double alpha;
  double beta;
};

AffineRow affine_row(Topology topology, SwitchMode m);

struct ConverterParams {
  double l = 1e-3;         // H
  double c_f = 50e-6;      // F
  double c = 125e-6;       // F
  double ts = 20e-6;       // s
  double i_safe_lo = -5.0; // A
  double i_safe_hi = 50.0; // A

  /// Throws std::invalid_argument when a component is non-positive or the
  /// current interval is empty.
  void validate() const;

  friend bool operator==(const ConverterParams&, const ConverterParams&) = default;
};

/// Nominal FC-TLBC passives and control period.
ConverterParams nominal_params();

struct PlantState {
  double i_l = 0.0;
  double v_cf = 0.0;
  double v_o = 0.0;

  bool finite() const;
  friend bool operator==(const PlantState&, const PlantState&) = default;
};

struct Exogenous {
  double v_in = 0.0;
  double i_o = 0.0;

  bool finite() const;
};

/// Raised when a state or input is no longer finite. `step` is the closed-loop
/// step index when known, otherwise -1.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step = -1)
      : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

namespace detail {

/// Forward-Euler kernel without the finite-value guard. Shared by the
/// simulator and the expert's rollouts so both produce bit-identical states.
inline PlantState euler_step(const AffineRow& r, const PlantState& x, const Exogenous& w,
                             const ConverterParams& p) {
  const double di = (r.k_in * w.v_in - r.a_vo * x.v_o - r.a_cf * x.v_cf) / p.l;
  const double dcf = r.beta * x.i_l / p.c_f;
  const double dvo = (r.alpha * x.i_l - w.i_o) / p.c;
  return {x.i_l + p.ts * di, x.v_cf + p.ts * dcf, x.v_o + p.ts * dvo};
}

}  // namespace detail

/// One forward-Euler step x + ts (A_m x + B w) for the given topology.
PlantState step(Topology topology, const PlantState& x, const Exogenous& w, SwitchMode m,
                const ConverterParams& p);

/// FC-TLBC prediction/simulation step.
inline PlantState discrete_step(const PlantState& x, const Exogenous& w, SwitchMode m,
                                const ConverterParams& p) {
  return step(Topology::FcBoost, x, w, m, p);
}

/// NPC three-level buck step.
inline PlantState buck_discrete_step(const PlantState& x, const Exogenous& w, SwitchMode m,
                                     const ConverterParams& p) {
  return step(Topology::NpcBuck, x, w, m, p);
}

/// Continuous-time A_m (row-major 3x3) and B (row-major 3x2).
std::array<double, 9> continuous_a(Topology topology, SwitchMode m, const ConverterParams& p);
std::array<double, 6> continuous_b(Topology topology, SwitchMode m, const ConverterParams& p);

/// Scales L, C_f and C by (1 + d). Control period and current limits are kept.
ConverterParams perturb_params(const ConverterParams& p, double d_l, double d_cf, double d_c);

}  // namespace fcdistill
