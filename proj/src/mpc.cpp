#include "fcdistill/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fcdistill {

bool FeatureVector::finite() const {
  return std::isfinite(i_l) && std::isfinite(v_cf) && std::isfinite(v_o) &&
         std::isfinite(i_ref) && std::isfinite(v_in) && std::isfinite(i_o);
}

FeatureVector FeatureVector::quantized() const {
  // The volatile store keeps g++ 11 -O3 from SLP-vectorizing this; it used
  // to drop the float conversion of the last two entries.
  auto q = [](double v) {
    volatile float f = static_cast<float>(v);
    return static_cast<double>(f);
  };
  return {q(i_l), q(v_cf), q(v_o), q(i_ref), q(v_in), q(i_o)};
}

void MpcConfig::validate() const {
  if (horizon < 1 || horizon > kMaxHorizon) {
    throw std::invalid_argument("MPC horizon must lie in [1, 15]");
  }
  if (beam_width < 1) throw std::invalid_argument("beam width must be at least 1");
  if (!(lambda_i >= 0.0) || !(lambda_cf >= 0.0)) {
    throw std::invalid_argument("MPC weights must be non-negative");
  }
}

MpcConfig default_mpc_config(double v_ref) {
  MpcConfig cfg;
  cfg.v_cf_ref = v_ref / 2.0;
  return cfg;
}

double stage_cost(const PlantState& x_pred, double i_ref, const MpcConfig& cfg) {
  const double ei = x_pred.i_l - i_ref;
  const double ecf = x_pred.v_cf - cfg.v_cf_ref;
  return cfg.lambda_i * ei * ei + cfg.lambda_cf * ecf * ecf;
}

double balance_reference(const MpcConfig& cfg, const FeatureVector& z) {
  return cfg.topology == Topology::NpcBuck ? 0.5 * z.v_in : cfg.v_cf_ref;
}

double sequence_cost(const PlantState& x, const Exogenous& w, double i_ref,
                     std::span<const SwitchMode> seq, const ConverterParams& p,
                     const MpcConfig& cfg) {
  PlantState s = x;
  double cost = 0.0;
  for (SwitchMode m : seq) {
    s = step(cfg.topology, s, w, m, p);
    if (!s.finite()) throw DivergenceError("predicted state left the finite range");
    cost += stage_cost(s, i_ref, cfg);
  }
  return cost;
}

std::array<SwitchMode, kMaxHorizon> unpack_sequence(std::uint32_t packed, int horizon) {
  std::array<SwitchMode, kMaxHorizon> out{};
  for (int d = horizon - 1; d >= 0; --d) {
    out[static_cast<std::size_t>(d)] = mode_from_index(packed & 3u);
    packed >>= 2;
  }
  return out;
}

namespace {

struct SearchContext {
  std::array<AffineRow, kNumModes> rows;
  PlantState x0;
  Exogenous w;
  double i_ref;
  const ConverterParams* p;
  MpcConfig cfg;  // copy with the operating-point balancing reference
};

SearchContext make_context(const FeatureVector& z, const ConverterParams& p, const MpcConfig& cfg) {
  if (!z.finite()) throw DivergenceError("non-finite feature vector");
  SearchContext ctx{{}, z.state(), z.exogenous(), z.i_ref, &p, cfg};
  ctx.cfg.v_cf_ref = balance_reference(cfg, z);
  for (SwitchMode m : kAllModes) ctx.rows[index_of(m)] = affine_row(cfg.topology, m);
  return ctx;
}

struct ExhaustiveState {
  const SearchContext* ctx = nullptr;
  int horizon = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::uint32_t best_seq = 0;
  SearchStats counts;
};

void exhaustive_dfs(ExhaustiveState& st, const PlantState& x, double cost, std::uint32_t seq,
                    int depth) {
  const SearchContext& ctx = *st.ctx;
  for (std::size_t mi = 0; mi < kNumModes; ++mi) {
    const PlantState next = detail::euler_step(ctx.rows[mi], x, ctx.w, *ctx.p);
    const double c = cost + stage_cost(next, ctx.i_ref, ctx.cfg);
    ++st.counts.stage_evaluations;
    const std::uint32_t s = (seq << 2) | static_cast<std::uint32_t>(mi);
    if (depth + 1 == st.horizon) {
      ++st.counts.complete_sequences;
      // Leaves arrive in lexicographic order, so a strict comparison keeps the
      // first minimiser.
      if (c < st.best_cost) {
        st.best_cost = c;
        st.best_seq = s;
      }
    } else {
      exhaustive_dfs(st, next, c, s, depth + 1);
    }
  }
}

struct BeamNode {
  PlantState x;
  double cost;
  std::uint32_t seq;
};

bool beam_less(const BeamNode& a, const BeamNode& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.seq < b.seq;
}

SwitchMode first_mode(std::uint32_t seq, int horizon) {
  return mode_from_index((seq >> (2 * (horizon - 1))) & 3u);
}

}  // namespace

Decision exhaustive_decide(const FeatureVector& z, const ConverterParams& p, const MpcConfig& cfg,
                           SearchStats* stats) {
  cfg.validate();
  if (cfg.horizon > kMaxExhaustiveHorizon) {
    throw std::invalid_argument("exhaustive search refuses horizons above 10");
  }
  const SearchContext ctx = make_context(z, p, cfg);
  ExhaustiveState st;
  st.ctx = &ctx;
  st.horizon = cfg.horizon;
  exhaustive_dfs(st, ctx.x0, 0.0, 0u, 0);
  if (!std::isfinite(st.best_cost)) throw DivergenceError("expert cost is not finite");
  if (stats) {
    stats->stage_evaluations += st.counts.stage_evaluations;
    stats->complete_sequences += st.counts.complete_sequences;
  }
  return {first_mode(st.best_seq, cfg.horizon), st.best_cost, st.best_seq};
}

Decision beam_decide(const FeatureVector& z, const ConverterParams& p, const MpcConfig& cfg,
                     SearchStats* stats) {
  cfg.validate();
  const SearchContext ctx = make_context(z, p, cfg);
  const std::size_t width = static_cast<std::size_t>(cfg.beam_width);

  thread_local std::vector<BeamNode> beam;
  thread_local std::vector<BeamNode> children;
  beam.clear();
  beam.push_back({ctx.x0, 0.0, 0u});

  std::uint64_t evaluations = 0;
  std::uint64_t complete = 0;
  for (int depth = 0; depth < cfg.horizon; ++depth) {
    children.clear();
    for (const BeamNode& node : beam) {
      for (std::size_t mi = 0; mi < kNumModes; ++mi) {
        const PlantState next = detail::euler_step(ctx.rows[mi], node.x, ctx.w, p);
        const double c = node.cost + stage_cost(next, ctx.i_ref, ctx.cfg);
        children.push_back({next, c, (node.seq << 2) | static_cast<std::uint32_t>(mi)});
      }
    }
    evaluations += children.size();
    // (cost, sequence) is a strict total order, so the retained set does not
    // depend on the order children were generated in.
    std::sort(children.begin(), children.end(), beam_less);
    if (depth + 1 == cfg.horizon) {
      complete = children.size();
      children.resize(1);
    } else if (children.size() > width) {
      children.resize(width);
    }
    std::swap(beam, children);
  }

  const BeamNode& best = beam.front();
  if (!std::isfinite(best.cost)) throw DivergenceError("expert cost is not finite");
  if (stats) {
    stats->stage_evaluations += evaluations;
    stats->complete_sequences += complete;
  }
  return {first_mode(best.seq, cfg.horizon), best.cost, best.seq};
}

Decision greedy_decide(const FeatureVector& z, const ConverterParams& p, const MpcConfig& cfg) {
  MpcConfig one = cfg;
  one.horizon = 1;
  return exhaustive_decide(z, p, one);
}

}  // namespace fcdistill
