#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>

#include "doctest.h"
#include "test_support.hpp"
#include "transopt/csv.hpp"
#include "transopt/error.hpp"
#include "transopt/optim.hpp"
#include "transopt/problems.hpp"
#include "transopt/random.hpp"

using namespace transopt;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Stepper = std::function<ParamVector(OptimizerState&, const ParamVector&, const ParamVector&)>;

// Runs a stepper on a quadratic stream and returns every iterate theta_2..theta_{T+1}.
std::vector<ParamVector> trajectory(const QuadraticProblem& p, const Stepper& step, StepIndex T,
                                    bool track_v_max = false) {
  OptimizerState s = OptimizerState::zeros(p.dim(), track_v_max);
  ParamVector theta = p.initial_point();
  std::vector<ParamVector> out;
  for (StepIndex t = 1; t <= T; ++t) {
    theta = step(s, theta, p.grad_at(t, theta));
    out.push_back(theta);
  }
  return out;
}

double max_abs_diff(const std::vector<ParamVector>& a, const std::vector<ParamVector>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) worst = std::max(worst, std::fabs(a[k][i] - b[k][i]));
  }
  return worst;
}

TransitionSchedule schedule(double rho, StepIndex T, double r_l = 0.05, double r_u = 0.5) {
  TransitionSchedule s;
  s.rho = RhoSchedule::exponential(rho);
  s.horizon = T;
  s.r_lower = r_l;
  s.r_upper = r_u;
  return s;
}

}  // namespace

TEST_SUITE("optim") {
  TEST_CASE("projection examples") {
    const FeasibleBox box = FeasibleBox::cube(2, -1.0, 1.0);
    CHECK(project_box({2.0, -3.0}, box, {1.0, 1.0}) == ParamVector{1.0, -1.0});
    CHECK(project_box({2.0, -3.0}, box, {0.01, 500.0}) == ParamVector{1.0, -1.0});
    CHECK(project_box({0.25, -0.5}, box, {3.0, 1.0}) == ParamVector{0.25, -0.5});
    CHECK(project_box({1e9, -1e9}, FeasibleBox::unbounded(), {1.0, 1.0}) == ParamVector{1e9, -1e9});
    CHECK_THROWS_AS(project_box({0.0, 0.0}, box, {1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(project_box({0.0, 0.0}, box, {1.0}), DimensionError);
    CHECK_THROWS_AS(FeasibleBox::from_bounds({1.0}, {0.0}), DomainError);
    CHECK(box.diameter_inf() == 2.0);
    CHECK_FALSE(FeasibleBox::unbounded().diameter_inf().has_value());
  }

  TEST_CASE("property: weighted projection is nonexpansive") {
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t d = 1 + rng.index(5);
      std::vector<double> lo(d), hi(d), z1(d), z2(d), q(d);
      for (std::size_t i = 0; i < d; ++i) {
        lo[i] = rng.uniform(-2.0, 0.0);
        hi[i] = lo[i] + rng.uniform(0.0, 3.0);
        z1[i] = rng.uniform(-4.0, 4.0);
        z2[i] = rng.uniform(-4.0, 4.0);
        q[i] = rng.uniform(0.01, 10.0);
      }
      const FeasibleBox box = FeasibleBox::from_bounds(ParamVector(lo), ParamVector(hi));
      const ParamVector metric(q);
      const ParamVector p1 = project_box(ParamVector(z1), box, metric);
      const ParamVector p2 = project_box(ParamVector(z2), box, metric);
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        lhs += q[i] * (p1[i] - p2[i]) * (p1[i] - p2[i]);
        rhs += q[i] * (z1[i] - z2[i]) * (z1[i] - z2[i]);
      }
      CHECK(lhs <= rhs + 1e-12);
    }
  }

  TEST_CASE("property: projection matches brute-force lattice minimization") {
    Rng rng(7);
    constexpr int kSteps = 60;
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t d = 1 + rng.index(3);
      std::vector<double> lo(d), hi(d), y(d), q(d);
      for (std::size_t i = 0; i < d; ++i) {
        lo[i] = rng.uniform(-1.0, 0.0);
        hi[i] = lo[i] + rng.uniform(0.2, 2.0);
        y[i] = rng.uniform(-2.0, 2.0);
        q[i] = rng.uniform(0.1, 5.0);
      }
      const ParamVector p =
          project_box(ParamVector(y), FeasibleBox::from_bounds(ParamVector(lo), ParamVector(hi)), ParamVector(q));

      std::vector<double> best(d);
      double best_dist = kInf;
      std::vector<int> idx(d, 0);
      while (true) {
        double dist = 0.0;
        std::vector<double> x(d);
        for (std::size_t i = 0; i < d; ++i) {
          x[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / kSteps;
          dist += q[i] * (x[i] - y[i]) * (x[i] - y[i]);
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = x;
        }
        std::size_t k = 0;
        while (k < d && ++idx[k] > kSteps) idx[k++] = 0;
        if (k == d) break;
      }
      for (std::size_t i = 0; i < d; ++i) {
        const double cell = (hi[i] - lo[i]) / kSteps;
        CHECK(std::fabs(best[i] - p[i]) <= cell / 2 + 1e-12);
      }
    }
  }

  TEST_CASE("sgdm examples") {
    const StepConfig cfg;
    const FeasibleBox box = FeasibleBox::unbounded();
    OptimizerState s = OptimizerState::zeros(1);
    CHECK(sgdm_step(s, {1.0}, {2.0}, cfg, 0.1, 0.0, box)[0] == doctest::Approx(0.8).epsilon(1e-15));

    OptimizerState s2 = OptimizerState::zeros(1);
    ParamVector theta{0.0};
    theta = sgdm_step(s2, theta, {1.0}, cfg, 0.1, 0.9, box);
    theta = sgdm_step(s2, theta, {1.0}, cfg, 0.1, 0.9, box);
    CHECK(theta[0] == doctest::Approx(-0.29).epsilon(1e-14));
    CHECK(s2.t == 2);

    OptimizerState s3 = OptimizerState::zeros(2);
    ParamVector fixed{0.3, -0.7};
    for (int k = 0; k < 10; ++k) fixed = sgdm_step(s3, fixed, {0.0, 0.0}, cfg, 0.1, 0.9, box);
    CHECK(fixed == ParamVector{0.3, -0.7});

    OptimizerState bad = OptimizerState::zeros(2);
    CHECK_THROWS_AS(sgdm_step(bad, {0.0, 0.0}, {1.0}, cfg, 0.1, 0.9, box), DimensionError);
  }

  TEST_CASE("adam examples") {
    const FeasibleBox box = FeasibleBox::unbounded();
    StepConfig cfg;
    OptimizerState s = OptimizerState::zeros(1);
    const ParamVector next = adam_step(s, {0.0}, {1.0}, cfg, 0.9, 0.999, box);
    CHECK(s.m[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.v[0] == doctest::Approx(0.001).epsilon(1e-15));
    // -0.001 * 0.1 / (sqrt(0.001) + 1e-8)
    CHECK(next[0] == doctest::Approx(-0.0031622766601686956).epsilon(1e-12));

    StepConfig bc{0.01, 0.0, true, false};
    for (double g : {3.0, -0.25, 1e-3}) {
      OptimizerState sb = OptimizerState::zeros(1);
      const ParamVector th = adam_step(sb, {0.5}, {g}, bc, 0.9, 0.999, box);
      CHECK(th[0] == doctest::Approx(0.5 - 0.01 * (g > 0 ? 1.0 : -1.0)).epsilon(1e-12));
      CHECK(effective_lr(sb)[0] == doctest::Approx(0.01 / std::fabs(g)).epsilon(1e-12));
    }

    OptimizerState sc = OptimizerState::zeros(1);
    ParamVector th{0.0};
    for (int k = 0; k < 20000; ++k) th = adam_step(sc, th, {2.0}, cfg, 0.9, 0.999, box);
    CHECK(sc.m[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sc.v[0] == doctest::Approx(4.0).epsilon(1e-8));

    OptimizerState z = OptimizerState::zeros(1);
    CHECK_THROWS_AS(adam_step(z, {0.0}, {0.0}, StepConfig{0.001, 0.0, false, false}, 0.9, 0.999, box), DomainError);
    OptimizerState z2 = OptimizerState::zeros(1);
    CHECK_THROWS_AS(amsgrad_step(z2, {0.0}, {0.0}, StepConfig{0.001, 0.0, false, false}, 0.9, 0.999, box),
                    DomainError);
  }

  TEST_CASE("amsgrad examples") {
    const FeasibleBox box = FeasibleBox::unbounded();
    const StepConfig cfg;
    // Increasing gradients: v never decreases, AMSGrad == Adam.
    OptimizerState a = OptimizerState::zeros(1);
    OptimizerState b = OptimizerState::zeros(1, true);
    ParamVector ta{0.0}, tb{0.0};
    for (int k = 1; k <= 50; ++k) {
      const ParamVector g{static_cast<double>(k)};
      ta = adam_step(a, ta, g, cfg, 0.9, 0.999, box);
      tb = amsgrad_step(b, tb, g, cfg, 0.9, 0.999, box);
      CHECK(ta[0] == tb[0]);
    }

    // A spike followed by small gradients: v falls, v_max does not.
    OptimizerState c = OptimizerState::zeros(1);
    OptimizerState d = OptimizerState::zeros(1, true);
    ParamVector tc{0.0}, td{0.0};
    tc = adam_step(c, tc, {10.0}, cfg, 0.9, 0.999, box);
    td = amsgrad_step(d, td, {10.0}, cfg, 0.9, 0.999, box);
    double prev_vmax = (*d.v_max)[0];
    for (int k = 0; k < 30; ++k) {
      tc = adam_step(c, tc, {0.1}, cfg, 0.9, 0.999, box);
      td = amsgrad_step(d, td, {0.1}, cfg, 0.9, 0.999, box);
      CHECK((*d.v_max)[0] >= prev_vmax);
      prev_vmax = (*d.v_max)[0];
      CHECK(effective_lr(d)[0] < effective_lr(c)[0]);
    }
  }

  TEST_CASE("dstadam single step") {
    TransitionSchedule s;
    s.rho = RhoSchedule::exponential(0.999764);
    s.horizon = 78200;
    const StepConfig cfg{0.001, 0.0, false, false};
    OptimizerState st = OptimizerState::zeros(1);
    const ParamVector next = dstadam_step(st, {0.0}, {1.0}, s, cfg, FeasibleBox::unbounded());
    CHECK(st.m[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(st.v[0] == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(r_at(s, 1) == doctest::Approx(4.999936125319693).epsilon(1e-14));
    CHECK(effective_lr(st)[0] == doctest::Approx(0.03279529855198149).epsilon(1e-12));
    CHECK(next[0] == doctest::Approx(-0.003279529855198149).epsilon(1e-12));
  }

  TEST_CASE("dstadam rejects steps past the horizon") {
    const TransitionSchedule s = schedule(0.5, 2);
    OptimizerState st = OptimizerState::zeros(1);
    ParamVector th{0.0};
    th = dstadam_step(st, th, {1.0}, s, StepConfig{}, FeasibleBox::unbounded());
    th = dstadam_step(st, th, {1.0}, s, StepConfig{}, FeasibleBox::unbounded());
    CHECK_THROWS_AS(dstadam_step(st, th, {1.0}, s, StepConfig{}, FeasibleBox::unbounded()), RangeError);
  }

  TEST_CASE("effective_lr examples") {
    CHECK_THROWS_AS(effective_lr(OptimizerState::zeros(3)), StateError);

    OptimizerState sw = OptimizerState::zeros(3);
    generic_transition_step(sw, {0.0, 0.0, 0.0}, {1.0, -5.0, 0.01}, StepConfig{}, BoundFunctionSpec::swats(0.1), 0.9,
                            0.999, FeasibleBox::unbounded());
    CHECK(effective_lr(sw) == ParamVector::filled(3, 0.1));

    TransitionSchedule s = schedule(0.5, 100);
    s.rho = RhoSchedule::custom(std::vector<double>(100, 0.0));
    for (bool decay : {false, true}) {
      OptimizerState st = OptimizerState::zeros(2);
      ParamVector th{0.0, 0.0};
      const StepConfig cfg{0.001, 1e-8, false, decay};
      for (StepIndex t = 1; t <= 10; ++t) {
        th = dstadam_step(st, th, {1.0, -2.0}, s, cfg, FeasibleBox::unbounded());
        const double expected = r_at(s, t) / (decay ? std::sqrt(static_cast<double>(t)) : 1.0);
        for (std::size_t i = 0; i < 2; ++i) CHECK(effective_lr(st)[i] == doctest::Approx(expected).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("golden trajectories") {
    const auto rows = csv::read(testing::data_dir() / "trajectories.csv");
    std::map<std::string, std::vector<ParamVector>> expected;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      std::vector<double> v;
      for (std::size_t c = 2; c < rows[r].size(); ++c) v.push_back(std::stod(rows[r][c]));
      expected[rows[r][0]].push_back(ParamVector(std::move(v)));
    }
    REQUIRE(expected.size() == 8);

    constexpr StepIndex T = 30;
    const auto p = make_quadratic(4, 3, T);
    const FeasibleBox& box = p->box();
    const double rho = std::pow(1e-8, 1.0 / T);
    const StepConfig plain{0.01, 1e-8, false, false};
    const TransitionSchedule sched = schedule(rho, T);
    TransitionSchedule sched_geo = sched;
    sched_geo.beta1 = Beta1Schedule::geometric(0.9, 0.99);

    std::map<std::string, std::pair<Stepper, bool>> runs{
        {"sgdm", {[&](auto& s, auto& th, auto& g) { return sgdm_step(s, th, g, plain, 0.1, 0.9, box); }, false}},
        {"sgdm_damped",
         {[&](auto& s, auto& th, auto& g) { return sgdm_step(s, th, g, plain, 0.1, 0.9, box, 0.9); }, false}},
        {"adam", {[&](auto& s, auto& th, auto& g) { return adam_step(s, th, g, plain, 0.9, 0.999, box); }, false}},
        {"adam_bias_corrected",
         {[&](auto& s, auto& th, auto& g) {
            return adam_step(s, th, g, StepConfig{0.01, 1e-8, true, false}, 0.9, 0.999, box);
          },
          false}},
        {"amsgrad",
         {[&](auto& s, auto& th, auto& g) { return amsgrad_step(s, th, g, plain, 0.9, 0.999, box); }, true}},
        {"adabound",
         {[&](auto& s, auto& th, auto& g) {
            return generic_transition_step(s, th, g, plain, BoundFunctionSpec::adabound(0.1, 0.999), 0.9, 0.999, box);
          },
          false}},
        {"dstadam", {[&](auto& s, auto& th, auto& g) { return dstadam_step(s, th, g, sched, plain, box); }, false}},
        {"dstadam_sqrt_geometric",
         {[&](auto& s, auto& th, auto& g) {
            return dstadam_step(s, th, g, sched_geo, StepConfig{0.01, 1e-8, false, true}, box);
          },
          false}},
    };
    for (const auto& [name, run] : runs) {
      CAPTURE(name);
      CHECK(max_abs_diff(trajectory(*p, run.first, T, run.second), expected.at(name)) <= 1e-12);
    }
  }

  TEST_CASE("property: reductions agree step for step") {
    constexpr StepIndex T = 100;
    const StepConfig cfg{0.01, 1e-8, false, false};
    for (std::uint64_t seed : {1U, 2U, 3U, 4U, 5U}) {
      const auto p = make_quadratic(6, seed, T);
      const FeasibleBox& box = p->box();
      const auto adam = trajectory(
          *p, [&](auto& s, auto& th, auto& g) { return adam_step(s, th, g, cfg, 0.9, 0.999, box); }, T);

      const LrBounds open{0.0, kInf};
      CHECK(max_abs_diff(adam, trajectory(*p,
                                          [&](auto& s, auto& th, auto& g) {
                                            return generic_transition_step(s, th, g, cfg, open, 0.9, 0.999, box);
                                          },
                                          T)) <= 1e-12);

      const auto sgdm = trajectory(
          *p, [&](auto& s, auto& th, auto& g) { return sgdm_step(s, th, g, cfg, 0.05, 0.9, box, 0.9); }, T);
      CHECK(max_abs_diff(sgdm, trajectory(*p,
                                          [&](auto& s, auto& th, auto& g) {
                                            return generic_transition_step(s, th, g, cfg, BoundFunctionSpec::swats(0.05),
                                                                           0.9, 0.999, box);
                                          },
                                          T)) <= 1e-12);

      TransitionSchedule one = schedule(0.5, T);
      one.rho = RhoSchedule::custom(std::vector<double>(T, 1.0));
      CHECK(max_abs_diff(adam, trajectory(
                                   *p, [&](auto& s, auto& th, auto& g) { return dstadam_step(s, th, g, one, cfg, box); },
                                   T)) <= 1e-12);

      // rho = 0: momentum SGD at rate r_t, m the EMA of gradients.
      TransitionSchedule zero = one;
      zero.rho = RhoSchedule::custom(std::vector<double>(T, 0.0));
      const auto dst0 = trajectory(
          *p, [&](auto& s, auto& th, auto& g) { return dstadam_step(s, th, g, zero, cfg, box); }, T);
      std::vector<ParamVector> manual;
      std::vector<double> th(p->dim(), 0.0), m(p->dim(), 0.0);
      for (StepIndex t = 1; t <= T; ++t) {
        const ParamVector g = p->grad_at(t, ParamVector(th));
        const double r = r_at(zero, t);
        for (std::size_t i = 0; i < th.size(); ++i) {
          m[i] = 0.9 * m[i] + 0.1 * g[i];
          th[i] = std::clamp(th[i] - r * m[i], -1.0, 1.0);
        }
        manual.emplace_back(th);
      }
      CHECK(max_abs_diff(dst0, manual) <= 1e-12);
    }
  }

  TEST_CASE("property: every stepper stays feasible and keeps v nonnegative") {
    Rng rng(77);
    const FeasibleBox box = FeasibleBox::cube(3, -0.5, 0.25);
    const TransitionSchedule sched = schedule(std::pow(1e-8, 1.0 / 200), 200);
    const OptimizerSpec specs[] = {
        {StepConfig{0.1}, SgdmSpec{}},
        {StepConfig{0.1}, AdamSpec{}},
        {StepConfig{0.1}, AmsgradSpec{}},
        {StepConfig{0.1}, TransitionSpec{BoundFunctionSpec::adadb(0.1, 1e-3), Beta1Schedule::constant(0.9), 0.999}},
        {StepConfig{0.1}, TransitionSpec{BoundFunctionSpec::lu(0.1, 0.999, 200), Beta1Schedule::harmonic(0.9), 0.999}},
        {StepConfig{0.1, 1e-8, false, true}, DstadamSpec{sched}},
    };
    for (const auto& spec : specs) {
      CAPTURE(method_name(spec.method));
      OptimizerState s = OptimizerState::zeros(3, std::holds_alternative<AmsgradSpec>(spec.method));
      ParamVector th = ParamVector::zeros(3);
      std::optional<ParamVector> prev_vmax;
      for (StepIndex t = 1; t <= 200; ++t) {
        const ParamVector g{rng.normal(0.0, 5.0), rng.normal(0.0, 0.1), rng.uniform(-1.0, 1.0)};
        th = apply_step(spec, s, th, g, box);
        CHECK(s.t == t);
        CHECK(box.contains(th));
        for (std::size_t i = 0; i < 3; ++i) CHECK(s.v[i] >= 0.0);
        if (s.v_max) {
          if (prev_vmax) {
            for (std::size_t i = 0; i < 3; ++i) CHECK((*s.v_max)[i] >= (*prev_vmax)[i]);
          }
          prev_vmax = s.v_max;
        }
        for (double lr : effective_lr(s).values()) CHECK(lr > 0.0);
      }
    }
  }

  TEST_CASE("property: dstadam learning-rate band and transition endpoint") {
    constexpr StepIndex T = 3000;
    for (std::uint64_t seed : {11U, 12U, 13U}) {
      const auto p = make_quadratic(5, seed, T);
      TransitionSchedule s = schedule(rho_from_horizon(T), T, 0.005, 5.0);
      const StepConfig cfg{0.001, 1e-8, false, false};
      OptimizerState st = OptimizerState::zeros(5);
      ParamVector th = p->initial_point();
      const double rho = s.rho.rho;
      double max_adaptive = 0.0;
      for (StepIndex t = 1; t <= T; ++t) {
        th = dstadam_step(st, th, p->grad_at(t, th), s, cfg, p->box());
        const double floor = r_at(s, t) * (1.0 - rho_at(s, t));
        for (std::size_t i = 0; i < 5; ++i) {
          const double eta = (*st.last_base_lr)[i];
          CHECK(eta >= floor * (1.0 - 1e-12));
          CHECK(floor >= s.r_lower * (1.0 - rho) * (1.0 - 1e-12));
          CHECK(1.0 / eta <= 1.0 / (s.r_lower * (1.0 - rho)) + 1e-12);
          max_adaptive = std::max(max_adaptive, cfg.alpha / (std::sqrt(st.v[i]) + cfg.epsilon));
        }
      }
      for (std::size_t i = 0; i < 5; ++i) {
        const double eta = effective_lr(st)[i];
        CHECK(eta >= s.r_lower * (1.0 - 1e-8) * (1.0 - 1e-12));
        CHECK(eta <= s.r_lower + 1e-8 * max_adaptive * (1.0 + 1e-9));
      }
    }
  }

  TEST_CASE("property: under constant v the scaled inverse rate is non-decreasing") {
    // Feeding g with g^2 == v keeps v constant. With alpha / sqrt(v) >= r_upper
    // the blend moves from the adaptive rate down toward a falling r_t.
    constexpr StepIndex T = 500;
    TransitionSchedule s = schedule(rho_from_horizon(T), T, 0.005, 5.0);
    const StepConfig cfg{0.001, 1e-8, false, true};
    const ParamVector g{1e-4, -5e-5};
    OptimizerState st = OptimizerState::zeros(2);
    st.v = square(g);
    st.m = g;
    ParamVector th = ParamVector::zeros(2);
    double prev[2] = {0.0, 0.0};
    for (StepIndex t = 1; t <= T; ++t) {
      th = dstadam_step(st, th, g, s, cfg, FeasibleBox::unbounded());
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(st.v[i] == doctest::Approx(g[i] * g[i]).epsilon(1e-12));
        const double scaled = std::sqrt(static_cast<double>(t)) / (*st.last_base_lr)[i];
        CHECK(scaled >= prev[i] - 1e-12);
        prev[i] = scaled;
      }
    }
  }
}
