#include "metasense/bound.hpp"
#include "metasense/errors.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace metasense;
using namespace metasense::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_SUITE("bound") {
  TEST_CASE("identity measurement variances") {
    SceneDistribution dist = SceneDistribution::uniform(2);
    const BoundInstance inst = BoundInstance::make(CMatrix::Identity(2, 2), dist, 0.1);
    CHECK(inst.xi.isApprox(CMatrix::Identity(2, 2)));
    CHECK(variance_empty(inst, 0, {1}) == doctest::Approx(0.2));
    CHECK(variance_occupied(inst, 0, {1}) == doctest::Approx(1.2));
    CHECK(variance_empty(inst, 0, {0}, NoiseTerm::literal) == doctest::Approx(0.2));
    CHECK_THROWS_AS(variance_empty(inst, 0, {1, 0}), ShapeError);
    CHECK_THROWS_AS(variance_empty(inst, 2, {1}), IndexError);
  }

  TEST_CASE("interference only enters through occupied grids") {
    const BoundInstance inst = random_bound_instance(3, 2, 4, 0.05);
    const double base = variance_empty(inst, 1, {0, 0, 0});
    CHECK(base == doctest::Approx(2.0 * 0.05 * inst.gamma_pinv.row(1).squaredNorm()));
    CHECK(variance_empty(inst, 1, {1, 0, 0}) ==
          doctest::Approx(base + inst.reflection_variance(0) * std::norm(inst.xi(1, 0))));
    CHECK(variance_occupied(inst, 1, {0, 0, 0}) - base ==
          doctest::Approx(inst.reflection_variance(1) * std::norm(inst.xi(1, 1))));
  }

  TEST_CASE("variances match Monte Carlo") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const BoundInstance inst = random_bound_instance(seed, 3, 4, 0.1);
      Rng rng(seed + 100);
      const Occupancy q{1, 0, 1};
      const double v0 = sample_variance(sample_statistic(inst, 2, false, q, 200000, rng));
      const double v1 = sample_variance(sample_statistic(inst, 2, true, q, 200000, rng));
      CHECK(v0 == doctest::Approx(variance_empty(inst, 2, q)).epsilon(0.03));
      CHECK(v1 == doctest::Approx(variance_occupied(inst, 2, q)).epsilon(0.03));
    }
  }

  TEST_CASE("prior weights sum to one") {
    const BoundInstance inst = random_bound_instance(5, 3, 5, 0.1);
    for (int m = 0; m < 5; ++m) {
      double total = 0.0;
      for (const auto& h : enumerate_hypotheses(inst, m)) total += h.weight;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    RVector p(3);
    p << 0.2, 0.7, 0.4;
    CHECK(prior_prob(p, 1, {1, 0}) == doctest::Approx(0.2 * 0.6));
  }

  TEST_CASE("threshold transforms") {
    const HypothesisSet q{{1.0, 2.0, 1.0}};
    // sum (eps1-eps0)/(eps1 eps0) = 1/2 and 1/2 ln 2 offset; rho = 1/2 ln 2 gives rho_hat = 2 ln 2.
    CHECK(rho_hat(q, 0.5 * std::log(2.0)) == doctest::Approx(2.0 * std::log(2.0)));
    for (double r : {-0.3, 0.0, 0.7, 3.0}) CHECK(rho_from_rho_hat(q, rho_hat(q, r)) == doctest::Approx(r));
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
      const double mu = 4.0 * rng.uniform() - 2.0;
      const double rho = 2.0 * rng.uniform() - 0.5;
      const bool by_tau = judgement_variable(q, mu) > rho;
      CHECK(by_tau == (detect(mu, rho_hat(q, rho)) == Hypothesis::H1));
    }
    CHECK_THROWS_AS(rho_hat(HypothesisSet{{1.0, 1.0, 1.0}}, 0.0), DegenerateDetector);
  }

  TEST_CASE("error probabilities at the extremes") {
    const HypothesisSet q{{0.5, 1.5, 1.0}};
    const ErrorProbs never = error_probs(q, kInf);
    CHECK(never.false_alarm == 0.0);
    CHECK(never.miss == 1.0);
    const ErrorProbs always = error_probs(q, 0.0);
    CHECK(always.false_alarm == 1.0);
    CHECK(always.miss == 0.0);
    const ErrorProbs mid = error_probs(q, 1.0);
    CHECK(mid.false_alarm == doctest::Approx(1.0 - std::erf(std::sqrt(1.0 / (2 * 0.5)))));
    CHECK(mid.miss == doctest::Approx(std::erf(std::sqrt(1.0 / (2 * 1.5)))));
    CHECK_THROWS_AS(error_probs(q, -1.0), InvalidInput);
  }

  TEST_CASE("closed-form errors match Monte Carlo") {
    for (std::uint64_t seed = 10; seed < 12; ++seed) {
      const BoundInstance inst = random_bound_instance(seed, 2, 3, 0.1);
      const HypothesisSet q = enumerate_hypotheses(inst, 0);
      double e0 = 0.0, e1 = 0.0;
      for (const auto& h : q) e0 += h.weight * h.eps0, e1 += h.weight * h.eps1;
      const double th = 0.5 * (e0 + e1);
      Rng rng(seed);
      const ErrorProbs mc = empirical_error_probs(inst, 0, th, 200000, rng);
      const ErrorProbs cf = error_probs(q, th);
      CHECK(std::fabs(mc.false_alarm - cf.false_alarm) < 0.01);
      CHECK(std::fabs(mc.miss - cf.miss) < 0.01);
    }
  }

  TEST_CASE("single-pattern threshold is the constrained minimizer") {
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
      const double e0 = 0.1 + rng.uniform(), e1 = e0 * (1.2 + 5.0 * rng.uniform());
      const double prior = i < 4 ? 0.9 + 0.09 * rng.uniform() : 0.05 + 0.9 * rng.uniform();
      const HypothesisSet q{{e0, e1, 1.0}};
      const double lo = 0.5 * std::log(e0 / e1);
      const double hi = rho_from_rho_hat(q, 100.0 * e1);
      const double oracle = golden_section_min([&](double r) { return grid_loss(q, prior, r, 16.0); }, lo, hi);
      const double closed = grid_loss(q, prior, optimal_rho_single(e0, e1, prior), 16.0);
      CHECK(std::fabs(closed - oracle) < 1e-4);
    }
    CHECK(optimal_rho_single(1.0, 2.0, 0.99) == doctest::Approx(0.5 * std::log(0.5)));
    CHECK_THROWS_AS(optimal_rho_single(1.0, 1.0, 0.5), DegenerateDetector);
  }

  TEST_CASE("loss derivative matches finite differences") {
    const HypothesisSet q{{0.4, 1.3, 0.3}, {0.7, 2.1, 0.7}};
    for (double rho : {-0.2, 0.3, 1.1}) {
      const double h = 1e-6;
      const double fd = (grid_loss(q, 0.4, rho + h, 16.0) - grid_loss(q, 0.4, rho - h, 16.0)) / (2 * h);
      CHECK(grid_loss_derivative(q, 0.4, rho, 16.0) == doctest::Approx(fd).epsilon(1e-5));
    }
  }

  TEST_CASE("numeric minimizer beats the grid scan") {
    const BoundInstance inst = random_bound_instance(8, 3, 5, 0.2);
    for (int m = 0; m < 5; ++m) {
      const HypothesisSet q = enumerate_hypotheses(inst, m);
      const double prior = inst.priors(m);
      const double found = grid_loss_at(q, prior, minimize_rho_hat(q, prior, 16.0), 16.0);
      for (double t = 0.0; t < 10.0; t += 0.01) CHECK(found <= grid_loss_at(q, prior, t * t, 16.0) + 1e-12);
      CHECK(found <= 16.0 * std::min(prior, 1.0 - prior) + 1e-12);
    }
  }

  TEST_CASE("empirical detector respects the bound") {
    const BoundInstance inst = random_bound_instance(12, 3, 4, 0.1);
    const BoundReport r = upper_bound(inst);
    std::vector<double> th;
    for (const auto& g : r.grids) th.push_back(g.rho_hat);
    const EmpiricalLoss e = empirical_detector_loss(inst, th, 100000, Rng(3));
    CHECK(e.mean <= r.loss_ub + 3.0 * e.std_error);
    CHECK(e.mean >= r.loss_ub - 5.0 * e.std_error);
    CHECK(r.p_acc_lb == doctest::Approx(1.0 - r.p_err_ub));
    CHECK(empirical_detector_loss(inst, th, 5000, Rng(3), 4).mean ==
          empirical_detector_loss(inst, th, 5000, Rng(3), 1).mean);
  }

  TEST_CASE("sampled mode is reproducible and close to exact") {
    const BoundInstance inst = random_bound_instance(13, 3, 5, 0.1);
    BoundOptions opt;
    opt.mode = BoundMode::sampled;
    opt.seed = 4;
    const BoundReport a = upper_bound(inst, opt), b = upper_bound(inst, opt);
    CHECK(a.loss_ub == b.loss_ub);
    CHECK(a.loss_ub >= upper_bound(inst).loss_ub - 1e-9);
  }

  TEST_CASE("degenerate grids report NaN thresholds") {
    // A zero column hides grid 0: xi(0,0) = 0, so both hypotheses share one variance.
    CMatrix g = CMatrix::Zero(2, 2);
    g(0, 1) = 1.0;
    g(1, 1) = 0.5;
    const BoundInstance inst = BoundInstance::make(g, SceneDistribution::uniform(2, 0.3), 0.1);
    const BoundReport r = upper_bound(inst);
    CHECK(std::isnan(r.grids[0].rho_star));
    CHECK(r.grids[0].loss == doctest::Approx(inst.cost_cap * 0.3));
    std::ostringstream out;
    r.write_grid_csv(out);
    CHECK(out.str().rfind(std::string(BoundReport::kGridHeader) + "\n", 0) == 0);
  }

  TEST_CASE("accuracy lower bound") {
    CHECK(accuracy_lower_bound(0.0, 16.0, 4) == 1.0);
    CHECK(accuracy_lower_bound(32.0, 16.0, 4) == 0.5);
    CHECK_THROWS_AS(accuracy_lower_bound(1.0, 0.0, 4), InvalidInput);
  }
}
