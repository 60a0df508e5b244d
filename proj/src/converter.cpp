#include "fcdistill/converter.hpp"

#include <cmath>

namespace fcdistill {

SwitchMode mode_from_levels(Level a, Level b) {
  for (SwitchMode m : kAllModes) {
    if (s_a(m) == a && s_b(m) == b) return m;
  }
  throw std::invalid_argument("switching combination is not admissible");
}

std::string_view to_string(SwitchMode m) {
  switch (m) {
    case SwitchMode::OP: return "OP";
    case SwitchMode::PO: return "PO";
    case SwitchMode::NO: return "NO";
    case SwitchMode::ON: return "ON";
  }
  return "?";
}

SwitchMode parse_mode(std::string_view name) {
  for (SwitchMode m : kAllModes) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown switch mode '" + std::string(name) + "'");
}

ModeCoefficients mode_coefficients(SwitchMode m) {
  switch (m) {
    case SwitchMode::NO: return {0.0, 0.0, 0.0, 0.0};
    case SwitchMode::PO: return {1.0, 0.0, 1.0, 0.0};
    case SwitchMode::OP: return {0.0, 1.0, 1.0, 1.0};
    case SwitchMode::ON: return {1.0, -1.0, 1.0, -1.0};
  }
  return {0.0, 0.0, 0.0, 0.0};
}

std::string_view to_string(Topology t) {
  return t == Topology::FcBoost ? "fc_boost" : "npc_buck";
}

Topology parse_topology(std::string_view name) {
  if (name == "fc_boost") return Topology::FcBoost;
  if (name == "npc_buck") return Topology::NpcBuck;
  throw std::invalid_argument("unknown topology '" + std::string(name) + "'");
}

AffineRow affine_row(Topology topology, SwitchMode m) {
  if (topology == Topology::FcBoost) {
    const ModeCoefficients c = mode_coefficients(m);
    return {1.0, c.a_vo, c.a_cf, c.alpha, c.beta};
  }
  // Buck switch-node level by S_A: P -> V_in, N -> 0, O -> one of the two
  // mid levels. The mid modes move v_cf in opposite directions.
  switch (m) {
    case SwitchMode::PO: return {1.0, 1.0, 0.0, 1.0, 0.0};    // V_in
    case SwitchMode::OP: return {1.0, 1.0, 1.0, 1.0, 1.0};    // V_in - v_cf, charges
    case SwitchMode::ON: return {0.0, 1.0, -1.0, 1.0, -1.0};  // v_cf, discharges
    case SwitchMode::NO: return {0.0, 1.0, 0.0, 1.0, 0.0};    // freewheel
  }
  return {0.0, 0.0, 0.0, 0.0, 0.0};
}

void ConverterParams::validate() const {
  if (!(l > 0.0) || !(c_f > 0.0) || !(c > 0.0) || !(ts > 0.0)) {
    throw std::invalid_argument("converter parameters L, C_f, C and T_s must be positive");
  }
  if (!(i_safe_lo < i_safe_hi)) {
    throw std::invalid_argument("current limit interval is empty");
  }
}

ConverterParams nominal_params() { return ConverterParams{}; }

bool PlantState::finite() const {
  return std::isfinite(i_l) && std::isfinite(v_cf) && std::isfinite(v_o);
}

bool Exogenous::finite() const { return std::isfinite(v_in) && std::isfinite(i_o); }

PlantState step(Topology topology, const PlantState& x, const Exogenous& w, SwitchMode m,
                const ConverterParams& p) {
  if (!x.finite() || !w.finite()) throw DivergenceError("non-finite plant state or input");
  return detail::euler_step(affine_row(topology, m), x, w, p);
}

std::array<double, 9> continuous_a(Topology topology, SwitchMode m, const ConverterParams& p) {
  const AffineRow r = affine_row(topology, m);
  return {0.0,          -r.a_cf / p.l, -r.a_vo / p.l,
          r.beta / p.c_f, 0.0,         0.0,
          r.alpha / p.c,  0.0,         0.0};
}

std::array<double, 6> continuous_b(Topology topology, SwitchMode m, const ConverterParams& p) {
  const AffineRow r = affine_row(topology, m);
  return {r.k_in / p.l, 0.0,
          0.0,          0.0,
          0.0,          -1.0 / p.c};
}

ConverterParams perturb_params(const ConverterParams& p, double d_l, double d_cf, double d_c) {
  if (!(1.0 + d_l > 0.0) || !(1.0 + d_cf > 0.0) || !(1.0 + d_c > 0.0)) {
    throw std::invalid_argument("relative perturbation must be greater than -1");
  }
  ConverterParams out = p;
  out.l = (1.0 + d_l) * p.l;
  out.c_f = (1.0 + d_cf) * p.c_f;
  out.c = (1.0 + d_c) * p.c;
  return out;
}

}  // namespace fcdistill
