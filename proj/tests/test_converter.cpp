#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fcdistill/converter.hpp"
#include "test_support.hpp"

using namespace fcdistill;
using Catch::Matchers::WithinRel;

TEST_CASE("mode coefficient table") {
  auto eq = [](ModeCoefficients c, std::array<double, 4> want) {
    CHECK(c.a_vo == want[0]);
    CHECK(c.a_cf == want[1]);
    CHECK(c.alpha == want[2]);
    CHECK(c.beta == want[3]);
  };
  eq(mode_coefficients(SwitchMode::NO), {0, 0, 0, 0});
  eq(mode_coefficients(SwitchMode::PO), {1, 0, 1, 0});
  eq(mode_coefficients(SwitchMode::OP), {0, 1, 1, 1});
  eq(mode_coefficients(SwitchMode::ON), {1, -1, 1, -1});
}

TEST_CASE("levels round-trip and inadmissible pairs are rejected") {
  for (SwitchMode m : kAllModes) CHECK(mode_from_levels(s_a(m), s_b(m)) == m);
  int admissible = 0;
  for (Level a : {Level::P, Level::O, Level::N}) {
    for (Level b : {Level::P, Level::O, Level::N}) {
      try {
        mode_from_levels(a, b);
        ++admissible;
      } catch (const std::invalid_argument&) {
      }
    }
  }
  CHECK(admissible == 4);
  for (SwitchMode m : kAllModes) CHECK(parse_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_mode("PP"), std::invalid_argument);
}

TEST_CASE("discrete step reference values") {
  const ConverterParams p = nominal_params();
  const PlantState x{10.0, 90.0, 180.0};
  const Exogenous w{120.0, 5.0};
  struct Case {
    SwitchMode m;
    PlantState want;
  };
  for (const Case& c : {Case{SwitchMode::NO, {12.4, 90.0, 179.2}},
                        Case{SwitchMode::PO, {8.8, 90.0, 180.8}},
                        Case{SwitchMode::OP, {10.6, 94.0, 180.8}},
                        Case{SwitchMode::ON, {10.6, 86.0, 180.8}}}) {
    INFO(to_string(c.m));
    const PlantState y = discrete_step(x, w, c.m, p);
    CHECK_THAT(y.i_l, WithinRel(c.want.i_l, 1e-12));
    CHECK_THAT(y.v_cf, WithinRel(c.want.v_cf, 1e-12));
    CHECK_THAT(y.v_o, WithinRel(c.want.v_o, 1e-12));
  }
}

TEST_CASE("discrete step rejects non-finite input") {
  const ConverterParams p = nominal_params();
  CHECK_THROWS_AS(discrete_step({NAN, 0, 0}, {120, 5}, SwitchMode::NO, p), DivergenceError);
  CHECK_THROWS_AS(discrete_step({0, 0, 0}, {INFINITY, 5}, SwitchMode::NO, p), DivergenceError);
}

TEST_CASE("parameter perturbation") {
  const ConverterParams p = nominal_params();
  CHECK(perturb_params(p, 0, 0, 0).l == p.l);
  CHECK_THAT(perturb_params(p, 0, 0.3, 0).c_f, WithinRel(65e-6, 1e-12));
  CHECK_THAT(perturb_params(p, 0, 0, -0.3).c, WithinRel(87.5e-6, 1e-12));
  const ConverterParams q = perturb_params(p, 0.2, -0.1, 0.1);
  CHECK(q.ts == p.ts);
  CHECK(q.i_safe_lo == p.i_safe_lo);
  CHECK(q.i_safe_hi == p.i_safe_hi);
  CHECK_THROWS_AS(perturb_params(p, -1.0, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(perturb_params(p, 0, -1.5, 0), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  ConverterParams p = nominal_params();
  p.c = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = nominal_params();
  p.i_safe_lo = p.i_safe_hi;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("step properties on random inputs") {
  std::mt19937_64 rng(42);
  for (Topology topo : {Topology::FcBoost, Topology::NpcBuck}) {
    for (int k = 0; k < 10000; ++k) {
      const ConverterParams p = testing::random_params(rng);
      const PlantState x1 = testing::random_state(rng);
      const PlantState x2 = testing::random_state(rng);
      const Exogenous w = testing::random_exogenous(rng);
      const SwitchMode m = kAllModes[static_cast<std::size_t>(k) % kNumModes];

      // Affine in the state: step(x1) - step(x2) = (I + ts A)(x1 - x2).
      const auto a = continuous_a(topo, m, p);
      const PlantState y1 = step(topo, x1, w, m, p);
      const PlantState y2 = step(topo, x2, w, m, p);
      const std::array<double, 3> dx{x1.i_l - x2.i_l, x1.v_cf - x2.v_cf, x1.v_o - x2.v_o};
      const std::array<double, 3> dy{y1.i_l - y2.i_l, y1.v_cf - y2.v_cf, y1.v_o - y2.v_o};
      for (int r = 0; r < 3; ++r) {
        double want = dx[static_cast<std::size_t>(r)];
        for (int c = 0; c < 3; ++c) {
          want += p.ts * a[static_cast<std::size_t>(3 * r + c)] * dx[static_cast<std::size_t>(c)];
        }
        const double scale = std::max({std::abs(want), std::abs(y1.i_l), std::abs(y1.v_cf),
                                       std::abs(y1.v_o), 1.0});
        REQUIRE(std::abs(dy[static_cast<std::size_t>(r)] - want) <= 1e-12 * scale);
      }

      // i_o enters only through -ts i_o / C on v_o.
      const Exogenous w0{w.v_in, 0.0};
      const PlantState z = step(topo, x1, w0, m, p);
      REQUIRE(y1.i_l == z.i_l);
      REQUIRE(y1.v_cf == z.v_cf);
      REQUIRE_THAT(z.v_o - y1.v_o, WithinRel(p.ts * w.i_o / p.c, 1e-6) ||
                                       Catch::Matchers::WithinAbs(p.ts * w.i_o / p.c, 1e-9));

      if (topo == Topology::FcBoost) {
        REQUIRE(step(topo, x1, w, SwitchMode::NO, p).v_cf == x1.v_cf);
        REQUIRE(step(topo, x1, w, SwitchMode::PO, p).v_cf == x1.v_cf);
      }
      const double up = step(topo, x1, w, SwitchMode::OP, p).v_cf - x1.v_cf;
      const double down = step(topo, x1, w, SwitchMode::ON, p).v_cf - x1.v_cf;
      REQUIRE_THAT(up, WithinRel(-down, 1e-9) || Catch::Matchers::WithinAbs(-down, 1e-12));
    }
  }
}

TEST_CASE("buck freewheel and mid modes") {
  const ConverterParams p = nominal_params();
  const PlantState x{6.0, 60.0, 80.0};
  const Exogenous w{120.0, 4.0};
  const PlantState f = buck_discrete_step(x, w, SwitchMode::NO, p);
  CHECK_THAT(f.i_l, WithinRel(x.i_l - p.ts * x.v_o / p.l, 1e-12));
  CHECK(f.v_cf == x.v_cf);
  const PlantState up = buck_discrete_step(x, w, SwitchMode::OP, p);
  const PlantState down = buck_discrete_step(x, w, SwitchMode::ON, p);
  CHECK_THAT(up.v_cf - x.v_cf, WithinRel(x.v_cf - down.v_cf, 1e-12));
  CHECK(up.v_cf > x.v_cf);
  // Full level drives the inductor with V_in - v_o.
  const PlantState full = buck_discrete_step(x, w, SwitchMode::PO, p);
  CHECK_THAT(full.i_l, WithinRel(x.i_l + p.ts * (w.v_in - x.v_o) / p.l, 1e-12));
}

TEST_CASE("topology names") {
  for (Topology t : {Topology::FcBoost, Topology::NpcBuck}) CHECK(parse_topology(to_string(t)) == t);
  CHECK_THROWS_AS(parse_topology("cuk"), std::invalid_argument);
}
