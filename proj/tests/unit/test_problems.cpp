#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_support.hpp"
#include "transopt/error.hpp"
#include "transopt/problems.hpp"
#include "transopt/random.hpp"

using namespace transopt;

namespace {

ParamVector random_in_box(Rng& rng, const FeasibleBox& box, std::size_t d) {
  std::vector<double> v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = rng.uniform((*box.lo)[i], (*box.hi)[i]);
  return ParamVector(std::move(v));
}

ParamVector random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double n = 0.0;
  for (double& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (double& x : v) x /= std::sqrt(n);
  return ParamVector(std::move(v));
}

std::vector<ParamVector> constant_centers(std::initializer_list<double> values) {
  std::vector<ParamVector> out;
  for (double v : values) out.push_back(ParamVector{v});
  return out;
}

void check_convex_and_consistent(const OnlineProblem& p, StepIndex t_max, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = p.dim();
  for (int trial = 0; trial < 50; ++trial) {
    const StepIndex t = 1 + static_cast<StepIndex>(rng.index(static_cast<std::uint64_t>(t_max)));
    const ParamVector a = random_in_box(rng, p.box(), d);
    const ParamVector b = random_in_box(rng, p.box(), d);
    const ParamVector mid = mul(add(a, b), 0.5);
    CHECK(p.loss_at(t, mid) <= 0.5 * p.loss_at(t, a) + 0.5 * p.loss_at(t, b) + 1e-12);

    const ParamVector u = random_unit(rng, d);
    const double h = 1e-5;
    const double fd = (p.loss_at(t, add(a, mul(u, h))) - p.loss_at(t, sub(a, mul(u, h)))) / (2 * h);
    const double exact = dot(p.grad_at(t, a), u);
    CHECK(std::fabs(fd - exact) <= 1e-5 * std::max(1.0, std::fabs(exact)));

    if (p.grad_bound()) CHECK(norms(p.grad_at(t, a)).linf <= *p.grad_bound() + 1e-12);
  }
}

}  // namespace

TEST_SUITE("problems") {
  TEST_CASE("quadratic comparator examples") {
    const FeasibleBox box = FeasibleBox::cube(2, -1.0, 1.0);
    const QuadraticProblem zero({ParamVector{0.0, 0.0}, ParamVector{0.0, 0.0}}, box);
    CHECK(*zero.comparator() == ParamVector{0.0, 0.0});
    CHECK(zero.loss_at(2, *zero.comparator()) == 0.0);

    const FeasibleBox line = FeasibleBox::cube(1, -1.0, 1.0);
    CHECK((*QuadraticProblem(constant_centers({1, -1, 1, -1}), line).comparator())[0] == 0.0);
    CHECK((*QuadraticProblem(constant_centers({1, 1, 0}), line).comparator())[0] ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK((*QuadraticProblem(constant_centers({3, 3}), line).comparator())[0] == 1.0);

    const QuadraticProblem q(constant_centers({1, 1, 0}), line);
    CHECK(q.loss_at(3, ParamVector{0.5}) == doctest::Approx(0.125));
    CHECK(q.grad_at(1, ParamVector{0.5})[0] == doctest::Approx(-0.5));
    CHECK(q.evaluate(ParamVector{0.5}).train_loss == doctest::Approx((0.125 + 0.125 + 0.125) / 3));
    CHECK_THROWS_AS(static_cast<void>(q.loss_at(4, ParamVector{0.0})), RangeError);
    CHECK_THROWS_AS(static_cast<void>(q.loss_at(1, ParamVector{0.0, 0.0})), DimensionError);
    CHECK_THROWS_AS(make_quadratic(0, 1, 10), DomainError);
  }

  TEST_CASE("quadratic centers match the golden stream") {
    const auto& gold = testing::golden()["quadratic_centers_d3_seed7_T5"];
    const auto p = make_quadratic(3, 7, 5);
    for (StepIndex t = 1; t <= 5; ++t) {
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(p->center(t)[i] == gold[static_cast<std::size_t>(t - 1)][i].get<double>());
      }
    }
    CHECK(p->initial_point() == ParamVector::zeros(3));
    CHECK(p->box().diameter_inf() == 2.0);
  }

  TEST_CASE("property: quadratic is convex with consistent gradients") {
    for (std::uint64_t seed : {1U, 2U, 3U}) {
      const auto p = make_quadratic(4, seed, 200);
      check_convex_and_consistent(*p, 200, seed + 100);
      CHECK(p->box().contains(*p->comparator()));
    }
  }

  TEST_CASE("reddi losses") {
    const auto p = make_reddi(3.0);
    CHECK(*p->comparator() == ParamVector{-1.0});
    CHECK(p->loss_at(1, ParamVector{0.5}) == 1.5);
    CHECK(p->loss_at(2, ParamVector{0.5}) == -0.5);
    CHECK(p->loss_at(3, ParamVector{0.5}) == -0.5);
    CHECK(p->loss_at(4, ParamVector{0.5}) == 1.5);
    for (double theta : {-1.0, -0.3, 0.0, 0.7, 1.0}) {
      const ParamVector th{theta};
      const double cycle = p->loss_at(1, th) + p->loss_at(2, th) + p->loss_at(3, th);
      CHECK(cycle == doctest::Approx((3.0 - 2.0) * theta));
    }
    CHECK(p->grad_at(7, ParamVector{0.0})[0] == 3.0);
    CHECK(p->grad_at(8, ParamVector{0.0})[0] == -1.0);
    CHECK(*p->grad_bound() == 3.0);
    CHECK(p->initial_point() == ParamVector{1.0});
    CHECK_THROWS_AS(make_reddi(1.0), DomainError);
    CHECK_THROWS_AS(make_reddi(0.5), DomainError);
    check_convex_and_consistent(*p, 30, 5);
  }

  TEST_CASE("two-cluster dataset matches the golden stream") {
    const auto& gold = testing::golden()["two_cluster_n6_seed3"];
    const Dataset data = make_two_cluster(6, 3);
    REQUIRE(data.size() == 6);
    CHECK(data.dim == 2);
    for (std::size_t r = 0; r < 6; ++r) {
      CHECK(data.labels[r] == gold[1][r].get<int>());
      for (std::size_t c = 0; c < 2; ++c) CHECK(data.row(r)[c] == gold[0][r][c].get<double>());
    }
  }

  TEST_CASE("dataset csv round-trips") {
    testing::ScratchDir dir("dataset");
    const Dataset data = make_two_cluster(25, 4);
    write_dataset_csv(data, dir.path() / "d.csv");
    const Dataset back = read_dataset_csv(dir.path() / "d.csv");
    CHECK(back.dim == data.dim);
    CHECK(back.labels == data.labels);
    CHECK(back.features == data.features);
  }

  TEST_CASE("minibatch stream") {
    const auto& gold = testing::golden()["minibatch_n10_b4_T7_seed9"];
    const MinibatchStream s(10, 4, 7, 9);
    CHECK(s.batches_per_epoch() == 3);
    for (StepIndex t = 1; t <= 7; ++t) {
      const auto rows = s.batch(t);
      const auto& want = gold[static_cast<std::size_t>(t - 1)];
      REQUIRE(rows.size() == want.size());
      for (std::size_t k = 0; k < rows.size(); ++k) CHECK(rows[k] == want[k].get<std::size_t>());
    }
    CHECK_THROWS_AS(static_cast<void>(s.batch(8)), RangeError);
    CHECK_THROWS_AS(MinibatchStream(3, 4, 5, 1), DomainError);

    // Each epoch visits every row exactly once.
    const MinibatchStream big(37, 8, 50, 2);
    for (StepIndex e = 0; e < 10; ++e) {
      std::vector<int> seen(37, 0);
      for (StepIndex b = 1; b <= 5; ++b) {
        for (std::size_t r : big.batch(e * 5 + b)) ++seen[r];
      }
      for (int c : seen) CHECK(c == 1);
    }
  }

  TEST_CASE("iterations per epoch round up") {
    CHECK(iterations_for_epochs(50000, 128, 1) == 391);
    CHECK(iterations_for_epochs(50000, 128, 200) == 78200);
    CHECK(iterations_for_epochs(1000, 128, 200) == 1600);
    CHECK(iterations_for_epochs(256, 128, 3) == 6);
    CHECK_THROWS_AS(iterations_for_epochs(10, 0, 1), DomainError);
  }

  TEST_CASE("logistic loss examples") {
    const auto p = make_logistic(200, 5, 42);
    const ParamVector zero = ParamVector::zeros(5);
    for (StepIndex t : {1, 2, 50}) CHECK(p->loss_at(t, zero) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(p->evaluate(zero).train_loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK_FALSE(p->evaluate(zero).heldout_accuracy.has_value());

    const auto& gold = testing::golden()["logistic"];
    int label_sum = 0;
    for (int y : p->data().labels) label_sum += y;
    CHECK(label_sum == gold["labels_sum"].get<int>());
    for (std::size_t c = 0; c < 5; ++c) CHECK(p->data().row(0)[c] == gold["first_row"][c].get<double>());
  }

  TEST_CASE("logistic comparator matches the offline minimizer") {
    const auto& gold = testing::golden()["logistic"];
    const auto p = make_logistic(200, 5, 42);
    const ParamVector& star = *p->comparator();
    for (std::size_t i = 0; i < 5; ++i) CHECK(star[i] == doctest::Approx(gold["theta_star"][i].get<double>()).epsilon(1e-6));
    CHECK(p->evaluate(star).train_loss == doctest::Approx(gold["loss_star"].get<double>()).epsilon(1e-10));
    std::vector<std::size_t> all(200);
    std::iota(all.begin(), all.end(), std::size_t{0});
    CHECK(norms(p->grad_on(all, star)).linf < 1e-8);
  }

  TEST_CASE("separable positive labels push the comparator to the box") {
    Dataset data;
    data.dim = 1;
    data.features = {1.0, 2.0, 0.5, 3.0};
    data.labels = {1, 1, 1, 1};
    const LogisticProblem p(data, 2, 4, 1, 4.0);
    CHECK((*p.comparator())[0] == 4.0);
  }

  TEST_CASE("property: logistic is convex with consistent gradients") {
    const auto p = make_logistic(300, 4, 8, 32, 200, 3.0);
    check_convex_and_consistent(*p, 200, 9);
  }

  TEST_CASE("regret ledger examples") {
    RegretLedger one;
    regret_update(one, 1, 1.0, 0.25);
    CHECK(one.regret() == 0.75);

    RegretLedger sq;
    const double thetas[] = {1.0, 0.5, 1.0 / 3.0};
    for (StepIndex t = 1; t <= 3; ++t) regret_update(sq, t, thetas[t - 1] * thetas[t - 1], 0.0);
    CHECK(sq.regret() == doctest::Approx(49.0 / 36.0).epsilon(1e-15));

    RegretLedger same;
    for (StepIndex t = 1; t <= 10; ++t) {
      regret_update(same, t, 0.1 * static_cast<double>(t), 0.1 * static_cast<double>(t));
      CHECK(same.regret() == 0.0);
    }

    CHECK_THROWS_AS(regret_update(same, 10, 1.0, 1.0), SequenceError);
    CHECK_THROWS_AS(regret_update(same, 3, 1.0, 1.0), SequenceError);
    RegretLedger gaps;
    regret_update(gaps, 2, 1.0, 0.0);
    regret_update(gaps, 7, 1.0, 0.0);
    CHECK(gaps.regret() == 2.0);
  }

  TEST_CASE("property: incremental regret equals the recomputed sum") {
    Rng rng(3);
    RegretLedger led;
    for (StepIndex t = 1; t <= 5000; ++t) regret_update(led, t, rng.uniform(0, 5), rng.uniform(0, 5));
    CHECK(std::fabs(led.regret() - led.recompute()) <= 1e-12);
    CHECK(led.cumulative_alg_loss - led.cumulative_star_loss == doctest::Approx(led.regret()).epsilon(1e-12));
  }
}
