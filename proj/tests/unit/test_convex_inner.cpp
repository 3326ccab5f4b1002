#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "vsched/bilevel.hpp"
#include "vsched/convex_inner.hpp"
#include "vsched/errors.hpp"
#include "vsched/relaxation.hpp"

using namespace vsched;

namespace {

// Random scenarios can overload a bin beyond what spilling absorbs; skip
// ahead to the next seed whose relaxation has an interior point.
RelaxedInstance scenario_instance(std::uint64_t seed, int n) {
  RelaxationOptions opts;
  opts.bin_width = 300;
  for (std::uint64_t s = seed;; s += 1000) {
    RelaxedInstance inst = build_relaxed_instance(testing::random_scenario(s, n), opts);
    try {
      feasible_start(inst);
      return inst;
    } catch (const InfeasibleError&) {
    }
  }
}

bool interior(const Eigen::VectorXd& z, const RelaxedInstance& inst) {
  if ((z.array() <= 0.0).any()) return false;
  return (inst.utilization(z).array() < inst.domain_limit()).all();
}

Eigen::VectorXd random_interior(const RelaxedInstance& inst, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.02, 0.85);
  const auto n = static_cast<Eigen::Index>(inst.n);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = u(gen);
    if (interior(z, inst)) return z;
  }
  const Eigen::VectorXd base = feasible_start(inst);
  std::uniform_real_distribution<double> f(0.5, 1.0);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::VectorXd z = base;
    for (Eigen::Index i = 0; i < n; ++i) z[i] *= f(gen);
    if (interior(z, inst)) return z;
  }
  return base;
}

WeightVector random_weights(std::uint64_t seed, double kappa = 1.0) {
  Rng rng(seed);
  return sample_weights(nullptr, kappa, 32, 0.05, rng).weights;
}

WeightVector single_subset(int subset, double eta = 0.05) {
  SimplexPoint raw{};
  raw[static_cast<std::size_t>(subset)] = 1.0;
  return eta_safe_project(raw, eta);
}

double phi(double u) { return u * u / (1.0 - u); }

}  // namespace

TEST_CASE("subset ordering") {
  const auto& m = subset_masks();
  CHECK(subset_label(0) == "{1}");
  CHECK(subset_label(kLoadSubset) == "{4}");
  CHECK(subset_label(4) == "{1,2}");
  CHECK(subset_label(14) == "{1,2,3,4}");
  int sizes[5] = {0, 0, 0, 0, 0};
  for (unsigned mask : m) ++sizes[__builtin_popcount(mask)];
  CHECK(sizes[1] == 4);
  CHECK(sizes[2] == 6);
  CHECK(sizes[3] == 4);
  CHECK(sizes[4] == 1);
}

TEST_CASE("atoms at the origin and on constant vectors") {
  RelaxedInstance inst;
  inst.n = 4;
  inst.release = {0, 0, 0, 0};
  inst.class_of = {1, 1, 1, 1};
  for (int i = 0; i < 4; ++i) inst.rows.push_back(LoadRow{{{i, 0.1}}, 0.0, 0.25});
  const double eps_term = inst.smooth_eps / 2.0;  // eps / sqrt(n)

  const auto g0 = atoms(Eigen::VectorXd::Zero(4), inst);
  CHECK(g0[0] == 0.0);
  CHECK(g0[1] == doctest::Approx(eps_term).epsilon(1e-12));
  CHECK(std::abs(g0[2]) < 1e-2);  // softplus bias only
  CHECK(g0[3] == 0.0);

  const auto gc = atoms(Eigen::VectorXd::Constant(4, 2.5), inst);
  CHECK(gc[0] == doctest::Approx(2.5));
  CHECK(gc[1] == doctest::Approx(eps_term).epsilon(1e-9));
  CHECK(gc[3] == doctest::Approx(phi(0.25)).epsilon(1e-12));
}

TEST_CASE("atoms match a direct recomputation") {
  std::mt19937_64 gen(50);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RelaxedInstance inst = scenario_instance(seed, 50);
    const Eigen::VectorXd z = random_interior(inst, gen);
    const auto g = atoms(z, inst);
    const auto n = static_cast<double>(inst.n);

    long double mean = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) mean += z[i];
    mean /= n;
    long double ss = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) ss += (z[i] - mean) * (z[i] - mean);
    const double g2 = static_cast<double>(std::sqrt(ss + static_cast<long double>(inst.smooth_eps) * inst.smooth_eps) /
                                          std::sqrt(static_cast<long double>(n)));
    const std::vector<double> zs(z.data(), z.data() + z.size());
    long double g4 = 0;
    for (const auto& row : inst.rows) {
      long double u = row.base;
      for (const auto& [var, coef] : row.terms) u += coef * z[var];
      g4 += row.weight * u * u / (1 - u);
    }
    CHECK(std::abs(g[0] - static_cast<double>(mean)) < 1e-10);
    CHECK(std::abs(g[1] - g2) < 1e-10);
    CHECK(std::abs(g[2] - testing::ru_cvar_smoothed(zs, inst.cvar_width)) < 1e-10);
    CHECK(std::abs(g[3] - static_cast<double>(g4)) < 1e-10);
  }
}

TEST_CASE("atoms outside the domain raise a domain error") {
  RelaxedInstance inst;
  inst.n = 1;
  inst.release = {0};
  inst.class_of = {1};
  inst.rows.push_back(LoadRow{{{0, 1.0}}, 0.0, 1.0});
  Eigen::VectorXd z(1);
  z[0] = 0.96;
  CHECK_THROWS_AS(atoms(z, inst), DomainError);
}

TEST_CASE("log-sum-exp") {
  const std::vector<double> one{3.25};
  CHECK(lse_aggregate(one, 0.1) == 3.25);
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(lse_aggregate(zeros, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::vector<double> v{u(gen), u(gen), u(gen), u(gen)};
    const double h = lse_aggregate(v, 0.1);
    const double mx = *std::max_element(v.begin(), v.end());
    CHECK(h >= mx);
    CHECK(h <= mx + 0.1 * std::log(4.0) + 1e-15);
    CHECK(std::abs(h - static_cast<double>(testing::lse_long(v, 0.1))) < 1e-12);
    // Raising one value never lowers the envelope.
    std::vector<double> up = v;
    up[static_cast<std::size_t>(rep % 4)] += std::abs(u(gen));
    CHECK(lse_aggregate(up, 0.1) >= h);
  }
  const std::vector<double> big{1e4, 1e4 - 1.0};
  CHECK(std::isfinite(lse_aggregate(big, 0.1)));
  CHECK_THROWS_AS(lse_aggregate(std::vector<double>{}, 0.1), RangeError);
}

TEST_CASE("smoothed CVaR tracks the sorted tail and the smoothed RU minimum") {
  std::mt19937_64 gen(10);
  std::lognormal_distribution<double> dist(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(1000);
    for (double& v : x) v = dist(gen);
    // Scale is the sample standard deviation; width and tolerance share it.
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double scale = std::sqrt(var / static_cast<double>(x.size()));
    const double width = 1e-3 * scale;
    const SmoothedCvar c = smoothed_cvar(x, width);
    CHECK(std::abs(c.value - testing::sorted_tail_mean(x)) <= 1e-4 * scale);
    CHECK(std::abs(c.value - testing::ru_cvar_smoothed(x, width)) <= 1e-6);
  }
}

TEST_CASE("smoothing bias is bounded for every sample size") {
  std::mt19937_64 gen(12);
  std::exponential_distribution<double> dist(1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(1 + gen() % 400);
    for (double& v : x) v = dist(gen);
    const double width = 1e-3;
    const double k = std::ceil(0.05 * static_cast<double>(x.size()));
    const double exact = testing::ru_cvar_exact(x);
    const double v = smoothed_cvar(x, width).value;
    // softplus - hinge lies in (0, width ln 2] pointwise.
    CHECK(v >= exact - 1e-12);
    CHECK(v <= exact + width * std::log(2.0) * static_cast<double>(x.size()) / k + 1e-12);
    CHECK(std::abs(smoothed_cvar(x, 1e-9).value - exact) <= 1e-7);
  }
}

TEST_CASE("gradient and Hessian agree with central differences") {
  std::mt19937_64 gen(21);
  for (int point = 0; point < 20; ++point) {
    const RelaxedInstance inst = scenario_instance(static_cast<std::uint64_t>(point % 5), 12);
    const WeightVector alpha = random_weights(static_cast<std::uint64_t>(point));
    const Eigen::VectorXd z = random_interior(inst, gen);
    const ObjectiveEval e = objective(z, alpha, inst, true);

    const double h = 1e-6;
    Eigen::VectorXd fd(z.size());
    Eigen::MatrixXd hfd(z.size(), z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Eigen::VectorXd zp = z;
      Eigen::VectorXd zm = z;
      zp[i] += h;
      zm[i] -= h;
      fd[i] = (objective_value(zp, alpha, inst) - objective_value(zm, alpha, inst)) / (2 * h);
      const double hg = 1e-5;
      zp = z;
      zm = z;
      zp[i] += hg;
      zm[i] -= hg;
      hfd.col(i) = (objective(zp, alpha, inst, false).gradient - objective(zm, alpha, inst, false).gradient) / (2 * hg);
    }
    CHECK((e.gradient - fd).norm() / std::max(e.gradient.norm(), 1e-12) < 1e-5);
    CHECK((e.hessian - hfd).norm() / std::max(e.hessian.norm(), 1e-12) < 1e-4);
    CHECK((e.hessian - e.hessian.transpose()).cwiseAbs().maxCoeff() <= 1e-9);

    // Each atom Hessian is symmetric before any symmetrization.
    const AtomDerivatives d = atom_derivatives(z, inst, true);
    for (const auto& hk : d.hessian) CHECK((hk - hk.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("random secant convexity probe") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const RelaxedInstance inst = scenario_instance(static_cast<std::uint64_t>(trial % 7), 10);
    const WeightVector alpha = random_weights(static_cast<std::uint64_t>(trial) + 100);
    const Eigen::VectorXd z1 = random_interior(inst, gen);
    const Eigen::VectorXd z2 = random_interior(inst, gen);
    const double l = lam(gen);
    const double lhs = objective_value(l * z1 + (1 - l) * z2, alpha, inst);
    const double rhs = l * objective_value(z1, alpha, inst) + (1 - l) * objective_value(z2, alpha, inst);
    if (lhs > rhs + 1e-9) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("strong convexity witness from the load atom") {
  std::mt19937_64 gen(41);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const RelaxedInstance inst = scenario_instance(static_cast<std::uint64_t>(trial % 5), 10);
    const WeightVector alpha = random_weights(static_cast<std::uint64_t>(trial) + 900);
    const Eigen::VectorXd z = random_interior(inst, gen);
    Eigen::VectorXd d(z.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = nd(gen);
    d.normalize();
    double h = 0.01;
    while (!interior(z + h * d, inst) || !interior(z - h * d, inst)) h /= 2;
    const double second = objective_value(z + h * d, alpha, inst) - 2 * objective_value(z, alpha, inst) +
                          objective_value(z - h * d, alpha, inst);
    // alpha_{4} * g4 alone guarantees this much curvature; phi'' is
    // increasing, so its minimum over the three points bounds the segment.
    const Eigen::VectorXd u0 = inst.utilization(z - h * d);
    const Eigen::VectorXd u1 = inst.utilization(z);
    const Eigen::VectorXd u2 = inst.utilization(z + h * d);
    double floor = 0.0;
    for (std::size_t r = 0; r < inst.rows.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      const double umin = std::min({u0[ri], u1[ri], u2[ri]});
      const double m = 2.0 / std::pow(1.0 - umin, 3);
      double ad = 0.0;
      for (const auto& [var, coef] : inst.rows[r].terms) ad += coef * d[var];
      floor += inst.rows[r].weight * m * ad * ad;
    }
    floor *= alpha.alpha[kLoadSubset] * h * h;
    CHECK(second >= floor - 1e-9);
  }
}

TEST_CASE("weight on the load atom alone reduces F to g4 with a PSD Hessian") {
  std::mt19937_64 gen(51);
  const RelaxedInstance inst = scenario_instance(2, 15);
  WeightVector w;
  w.alpha[kLoadSubset] = 1.0;
  w.eta = 0.05;
  const Eigen::VectorXd z = random_interior(inst, gen);
  CHECK(objective_value(z, w, inst) == doctest::Approx(atoms(z, inst)[3]).epsilon(1e-14));
  const ObjectiveEval e = objective(z, w, inst);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.hessian);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("weight vector invariants") {
  WeightVector w = single_subset(0);
  CHECK_NOTHROW(w.validate());
  w.alpha[kLoadSubset] = 0.01;
  w.alpha[0] = 0.99;
  CHECK_THROWS_AS(w.validate(), ValidationError);
  w = single_subset(0);
  w.alpha[1] = 0.1;
  CHECK_THROWS_AS(w.validate(), ValidationError);
}

TEST_CASE("mean-wait focus on a light instance drives waits to zero") {
  const Scenario s = testing::make_scenario(3600, {PadConfig{1, 2, 0}}, {{1, 0, 30}, {1, 600, 30}, {1, 1800, 30}});
  RelaxationOptions opts;
  opts.bin_width = 300;
  const RelaxedInstance inst = build_relaxed_instance(s, opts);
  const InnerSolution sol = solve_inner(single_subset(0), inst);
  CHECK(sol.z.maxCoeff() < 1e-3);
  CHECK(sol.z.minCoeff() > 0.0);
}

TEST_CASE("two-variable instance agrees with a grid search") {
  RelaxedInstance inst;
  inst.n = 2;
  inst.release = {0.0, 0.0};
  inst.class_of = {1, 1};
  inst.rows = {LoadRow{{{0, -0.008}}, 0.9, 1.0}, LoadRow{{{0, 0.008}, {1, -0.006}}, 0.5, 1.0},
               LoadRow{{{1, 0.006}}, 0.0, 1.0}};
  WeightVector w;
  w.eta = 0.05;
  w.alpha[0] = 0.3;   // {1}
  w.alpha[4] = 0.2;   // {1,2}
  w.alpha[kLoadSubset] = 0.5;
  const InnerSolution sol = solve_inner(w, inst);

  auto value = [&](double a, double b) {
    Eigen::VectorXd z(2);
    z << a, b;
    if ((inst.utilization(z).array() >= inst.domain_limit()).any()) return std::numeric_limits<double>::infinity();
    return objective_value(z, w, inst);
  };
  double best = std::numeric_limits<double>::infinity();
  double ba = 0;
  double bb = 0;
  for (double a = 0; a <= 100.0; a += 0.5) {
    for (double b = 0; b <= 100.0; b += 0.5) {
      const double v = value(a, b);
      if (v < best) {
        best = v;
        ba = a;
        bb = b;
      }
    }
  }
  const double fine = 0.01;
  const double ca = ba;
  const double cb = bb;
  for (double a = std::max(0.0, ca - 1.0); a <= ca + 1.0; a += fine) {
    for (double b = std::max(0.0, cb - 1.0); b <= cb + 1.0; b += fine) {
      const double v = value(a, b);
      if (v < best) {
        best = v;
        ba = a;
        bb = b;
      }
    }
  }
  CHECK(ba > 1.0);  // interior optimum, not the trivial corner
  CHECK(std::abs(sol.z[0] - ba) <= 2 * fine);
  CHECK(std::abs(sol.z[1] - bb) <= 2 * fine);
  CHECK(sol.value <= best + 1e-9);
}

TEST_CASE("random restarts reach the same minimizer") {
  std::mt19937_64 gen(61);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RelaxedInstance inst = scenario_instance(seed + 20, 15);
    const WeightVector alpha = random_weights(seed + 300);
    const InnerSolution ref = solve_inner(alpha, inst);
    for (int start = 0; start < 5; ++start) {
      const InnerSolution s = solve_inner(alpha, inst, {}, random_interior(inst, gen));
      CHECK((s.z - ref.z).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("barrier objective decreases within every stage") {
  const RelaxedInstance inst = scenario_instance(3, 20);
  const InnerSolution sol = solve_inner(random_weights(7), inst);
  REQUIRE(sol.barrier_trace.size() >= 2);
  for (std::size_t i = 1; i < sol.barrier_trace.size(); ++i) {
    const auto& [stage, v] = sol.barrier_trace[i];
    const auto& [pstage, pv] = sol.barrier_trace[i - 1];
    if (stage == pstage) CHECK(v <= pv + 1e-12 * (std::abs(pv) + 1.0));
  }
  CHECK(sol.iterations <= 500);
}

TEST_CASE("infeasible instances are reported") {
  RelaxedInstance inst;
  inst.n = 1;
  inst.release = {0};
  inst.class_of = {1};
  inst.rows = {LoadRow{{{0, 0.1}}, 0.97, 1.0}};
  CHECK_THROWS_AS(feasible_start(inst), InfeasibleError);
  CHECK_THROWS_AS(solve_inner(single_subset(0), inst), InfeasibleError);
}

TEST_CASE("feasible start is strictly interior") {
  RelaxationOptions opts;
  opts.bin_width = 300;
  int feasible = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const RelaxedInstance inst = build_relaxed_instance(testing::random_scenario(seed, 30), opts);
    try {
      const Eigen::VectorXd z = feasible_start(inst);
      CHECK(interior(z, inst));
      ++feasible;
    } catch (const InfeasibleError&) {
      // Only legitimate when some pad row's base load is out of reach.
      CHECK(inst.utilization(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(inst.n))).maxCoeff() >= inst.u_max);
    }
  }
  CHECK(feasible >= 15);
}
