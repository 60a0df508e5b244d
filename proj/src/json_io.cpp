#include "json_io.hpp"

namespace fcdistill {

using nlohmann::json;

void to_json(json& j, const ConverterParams& p) {
  j = {{"l", p.l}, {"c_f", p.c_f}, {"c", p.c}, {"ts", p.ts},
       {"i_safe_lo", p.i_safe_lo}, {"i_safe_hi", p.i_safe_hi}};
}

void from_json(const json& j, ConverterParams& p) {
  p = ConverterParams{};
  p.l = j.value("l", p.l);
  p.c_f = j.value("c_f", p.c_f);
  p.c = j.value("c", p.c);
  p.ts = j.value("ts", p.ts);
  p.i_safe_lo = j.value("i_safe_lo", p.i_safe_lo);
  p.i_safe_hi = j.value("i_safe_hi", p.i_safe_hi);
}

void to_json(json& j, const MpcConfig& c) {
  j = {{"horizon", c.horizon},       {"beam_width", c.beam_width}, {"lambda_i", c.lambda_i},
       {"lambda_cf", c.lambda_cf},   {"v_cf_ref", c.v_cf_ref},
       {"topology", std::string(to_string(c.topology))}};
}

void from_json(const json& j, MpcConfig& c) {
  c = MpcConfig{};
  c.horizon = j.value("horizon", c.horizon);
  c.beam_width = j.value("beam_width", c.beam_width);
  c.lambda_i = j.value("lambda_i", c.lambda_i);
  c.lambda_cf = j.value("lambda_cf", c.lambda_cf);
  c.v_cf_ref = j.value("v_cf_ref", c.v_cf_ref);
  c.topology = parse_topology(j.value("topology", std::string("fc_boost")));
}

void to_json(json& j, const OuterLoopConfig& o) {
  j = {{"k_p", o.k_p}, {"k_i", o.k_i}, {"i_ref_lo", o.i_ref_lo}, {"i_ref_hi", o.i_ref_hi}};
}

void from_json(const json& j, OuterLoopConfig& o) {
  o = OuterLoopConfig{};
  o.k_p = j.value("k_p", o.k_p);
  o.k_i = j.value("k_i", o.k_i);
  o.i_ref_lo = j.value("i_ref_lo", o.i_ref_lo);
  o.i_ref_hi = j.value("i_ref_hi", o.i_ref_hi);
}

namespace {

std::string event_target_name(EventTarget t) { return t == EventTarget::VIn ? "v_in" : "load_r"; }

EventTarget parse_event_target(const std::string& s) {
  if (s == "v_in") return EventTarget::VIn;
  if (s == "load_r") return EventTarget::LoadR;
  throw std::invalid_argument("unknown event target '" + s + "'");
}

}  // namespace

void to_json(json& j, const ScenarioConfig& c) {
  json events = json::array();
  for (const StepEvent& ev : c.events) {
    events.push_back(
        {{"time", ev.time}, {"target", event_target_name(ev.target)}, {"value", ev.value}});
  }
  j = {{"topology", std::string(to_string(c.topology))},
       {"duration", c.duration},
       {"v_ref", c.v_ref},
       {"v_in", c.v_in},
       {"load_r", c.load_r},
       {"events", events},
       {"d_l", c.d_l},
       {"d_cf", c.d_cf},
       {"d_c", c.d_c},
       {"seed", c.seed},
       {"outer", c.outer}};
}

void from_json(const json& j, ScenarioConfig& c) {
  c = ScenarioConfig{};
  c.topology = parse_topology(j.value("topology", std::string("fc_boost")));
  c.duration = j.value("duration", c.duration);
  c.v_ref = j.value("v_ref", c.v_ref);
  c.v_in = j.value("v_in", c.v_in);
  c.load_r = j.value("load_r", c.load_r);
  c.d_l = j.value("d_l", 0.0);
  c.d_cf = j.value("d_cf", 0.0);
  c.d_c = j.value("d_c", 0.0);
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("events")) {
    for (const json& e : j.at("events")) {
      c.events.push_back({e.at("time").get<double>(),
                          parse_event_target(e.at("target").get<std::string>()),
                          e.at("value").get<double>()});
    }
  }
  if (j.contains("outer")) c.outer = j.at("outer").get<OuterLoopConfig>();
}

void to_json(json& j, const RandomizationRanges& r) {
  j = {{"v_in_lo", r.v_in_lo}, {"v_in_hi", r.v_in_hi}, {"r_lo", r.r_lo},
       {"r_hi", r.r_hi},       {"rho", r.rho},         {"events", r.events},
       {"duration", r.duration}, {"event_margin", r.event_margin}};
}

void from_json(const json& j, RandomizationRanges& r) {
  r = RandomizationRanges{};
  r.v_in_lo = j.value("v_in_lo", r.v_in_lo);
  r.v_in_hi = j.value("v_in_hi", r.v_in_hi);
  r.r_lo = j.value("r_lo", r.r_lo);
  r.r_hi = j.value("r_hi", r.r_hi);
  r.rho = j.value("rho", r.rho);
  r.events = j.value("events", r.events);
  r.duration = j.value("duration", r.duration);
  r.event_margin = j.value("event_margin", r.event_margin);
}

}  // namespace fcdistill
