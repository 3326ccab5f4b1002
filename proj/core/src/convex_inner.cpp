#include "vsched/convex_inner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "vsched/errors.hpp"

namespace vsched {

const std::array<unsigned, kSubsetCount>& subset_masks() {
  static const std::array<unsigned, kSubsetCount> masks = [] {
    std::array<unsigned, kSubsetCount> m{};
    int at = 0;
    for (int size = 1; size <= kAtomCount; ++size) {
      // Lexicographic order of the member lists within each size.
      std::vector<unsigned> group;
      for (unsigned mask = 1; mask < (1U << kAtomCount); ++mask) {
        if (std::popcount(mask) == size) group.push_back(mask);
      }
      auto members = [](unsigned mask) {
        std::vector<int> v;
        for (int i = 0; i < kAtomCount; ++i) {
          if (mask & (1U << i)) v.push_back(i);
        }
        return v;
      };
      std::sort(group.begin(), group.end(), [&](unsigned a, unsigned b) { return members(a) < members(b); });
      for (unsigned mask : group) m[static_cast<std::size_t>(at++)] = mask;
    }
    return m;
  }();
  return masks;
}

std::string subset_label(int index) {
  const unsigned mask = subset_masks().at(static_cast<std::size_t>(index));
  std::string out = "{";
  for (int i = 0; i < kAtomCount; ++i) {
    if (!(mask & (1U << i))) continue;
    if (out.size() > 1) out += ',';
    out += std::to_string(i + 1);
  }
  return out + "}";
}

void RelaxedInstance::validate() const {
  if (n == 0) throw ValidationError("relaxed instance has no requests");
  if (release.size() != n) throw ValidationError("release vector size mismatch");
  if (!(u_max > 0.0 && u_max <= 1.0)) throw ValidationError("u_max must lie in (0, 1]");
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  if (!(smooth_eps > 0.0) || !(cvar_width > 0.0)) throw ValidationError("smoothing widths must be positive");
  for (const auto& row : rows) {
    if (row.weight < 0.0) throw ValidationError("load row weights must be >= 0");
    // Bases above u_max are allowed: waits can drain them (see feasible_start).
    if (row.base < 0.0) throw ValidationError("base loads must be >= 0");
    for (const auto& [var, coef] : row.terms) {
      if (var < 0 || static_cast<std::size_t>(var) >= n) throw ValidationError("load row references a bad variable");
      if (!std::isfinite(coef)) throw ValidationError("load row coefficient is not finite");
    }
  }
}

Eigen::VectorXd RelaxedInstance::utilization(const Eigen::VectorXd& z) const {
  Eigen::VectorXd u(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double v = rows[r].base;
    for (const auto& [var, coef] : rows[r].terms) v += coef * z[var];
    u[static_cast<Eigen::Index>(r)] = v;
  }
  return u;
}

void WeightVector::validate() const {
  double sum = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw ValidationError("weight vector has a negative component");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("weight vector does not sum to 1");
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  if (alpha[kLoadSubset] < eta) throw ValidationError("weight on {4} is below the floor eta");
}

namespace {

double softplus(double x, double s) {
  const double y = x / s;
  return s * (std::max(y, 0.0) + std::log1p(std::exp(-std::abs(y))));
}

double logistic(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

std::size_t tail_size(std::size_t n) { return (5 * n + 99) / 100; }

void check_domain(const Eigen::VectorXd& u, const RelaxedInstance& inst) {
  const double limit = inst.domain_limit();
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    if (!(u[r] < limit)) throw DomainError("utilization reached u_max (barrier blow-up)");
  }
}

double phi(double u) { return u * u / (1.0 - u); }
double dphi(double u) { return 1.0 / ((1.0 - u) * (1.0 - u)) - 1.0; }
double d2phi(double u) { return 2.0 / ((1.0 - u) * (1.0 - u) * (1.0 - u)); }

}  // namespace

SmoothedCvar smoothed_cvar(std::span<const double> x, double width) {
  if (x.empty()) throw RangeError("CVaR of an empty sample is undefined");
  if (!(width > 0.0)) throw RangeError("CVaR smoothing width must be positive");
  const double k = static_cast<double>(tail_size(x.size()));
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());

  // Optimality in nu: sum_i logistic((x_i - nu) / width) = k, decreasing in nu.
  double lo = *mn - 50.0 * width;
  double hi = *mx + 50.0 * width;
  double nu = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double f = 0.0;
    double df = 0.0;
    for (double v : x) {
      const double sg = logistic((v - nu) / width);
      f += sg;
      df -= sg * (1.0 - sg) / width;
    }
    f -= k;
    if (f > 0.0) {
      lo = nu;
    } else {
      hi = nu;
    }
    if (std::abs(f) <= 1e-13 * k || hi - lo <= 1e-15 * std::max(1.0, std::abs(nu))) break;
    double next = df < 0.0 ? nu - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    nu = next;
  }

  SmoothedCvar out;
  out.nu = nu;
  out.sigma.reserve(x.size());
  double sum = 0.0;
  for (double v : x) {
    sum += softplus(v - nu, width);
    out.sigma.push_back(logistic((v - nu) / width));
  }
  out.value = nu + sum / k;
  return out;
}

double lse_aggregate(std::span<const double> values, double tau) {
  if (values.empty()) throw RangeError("LSE of an empty set is undefined");
  if (!(tau > 0.0)) throw RangeError("LSE temperature must be positive");
  const double m = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp((v - m) / tau);
  return m + tau * std::log(s);
}

std::array<double, kAtomCount> atoms(const Eigen::VectorXd& z, const RelaxedInstance& inst) {
  const auto n = static_cast<double>(inst.n);
  const Eigen::VectorXd u = inst.utilization(z);
  check_domain(u, inst);
  std::array<double, kAtomCount> g{};
  g[0] = z.mean();
  const Eigen::VectorXd centered = z.array() - z.mean();
  g[1] = std::sqrt(centered.squaredNorm() + inst.smooth_eps * inst.smooth_eps) / std::sqrt(n);
  g[2] = smoothed_cvar(std::span<const double>(z.data(), inst.n), inst.cvar_width).value;
  double g4 = 0.0;
  for (std::size_t r = 0; r < inst.rows.size(); ++r) g4 += inst.rows[r].weight * phi(u[static_cast<Eigen::Index>(r)]);
  g[3] = g4;
  return g;
}

AtomDerivatives atom_derivatives(const Eigen::VectorXd& z, const RelaxedInstance& inst, bool with_hessian) {
  const auto N = static_cast<Eigen::Index>(inst.n);
  const auto n = static_cast<double>(inst.n);
  const double sqrt_n = std::sqrt(n);
  const Eigen::VectorXd u = inst.utilization(z);
  check_domain(u, inst);

  AtomDerivatives d;
  d.gradient = Eigen::MatrixXd::Zero(N, kAtomCount);

  // g1: mean.
  d.value[0] = z.mean();
  d.gradient.col(0).setConstant(1.0 / n);

  // g2: smoothed norm of the centered vector.
  const Eigen::VectorXd q = z.array() - z.mean();
  const double r = std::sqrt(q.squaredNorm() + inst.smooth_eps * inst.smooth_eps);
  d.value[1] = r / sqrt_n;
  d.gradient.col(1) = q / (r * sqrt_n);

  // g3: smoothed CVaR; the envelope theorem gives grad = sigma / k.
  const double k = static_cast<double>(tail_size(inst.n));
  const SmoothedCvar cv = smoothed_cvar(std::span<const double>(z.data(), inst.n), inst.cvar_width);
  d.value[2] = cv.value;
  Eigen::VectorXd sp(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double s = cv.sigma[static_cast<std::size_t>(i)];
    d.gradient(i, 2) = s / k;
    sp[i] = s * (1.0 - s);
  }

  // g4: weighted phi of the utilizations.
  double g4 = 0.0;
  for (std::size_t ri = 0; ri < inst.rows.size(); ++ri) {
    const auto& row = inst.rows[ri];
    const double ur = u[static_cast<Eigen::Index>(ri)];
    g4 += row.weight * phi(ur);
    const double c = row.weight * dphi(ur);
    for (const auto& [var, coef] : row.terms) d.gradient(var, 3) += c * coef;
  }
  d.value[3] = g4;

  if (!with_hessian) return d;

  d.hessian[0] = Eigen::MatrixXd::Zero(N, N);

  Eigen::MatrixXd h2 = -Eigen::MatrixXd::Constant(N, N, 1.0 / n);
  h2.diagonal().array() += 1.0;
  h2 /= r;
  h2.noalias() -= (q * q.transpose()) / (r * r * r);
  d.hessian[1] = h2 / sqrt_n;

  const double sp_sum = sp.sum();
  const double c3 = 1.0 / (k * inst.cvar_width);
  Eigen::MatrixXd h3 = Eigen::MatrixXd::Zero(N, N);
  h3.diagonal() = sp;
  if (sp_sum > 0.0) h3.noalias() -= (sp * sp.transpose()) / sp_sum;
  d.hessian[2] = c3 * h3;

  Eigen::MatrixXd h4 = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t ri = 0; ri < inst.rows.size(); ++ri) {
    const auto& row = inst.rows[ri];
    const double c = row.weight * d2phi(u[static_cast<Eigen::Index>(ri)]);
    for (const auto& [a, ca] : row.terms) {
      for (const auto& [b, cb] : row.terms) h4(a, b) += c * ca * cb;
    }
  }
  d.hessian[3] = std::move(h4);
  return d;
}

namespace {

// Per-subset softmax weights p_S,i for the atoms in S (zero elsewhere).
std::array<std::array<double, kAtomCount>, kSubsetCount> subset_softmax(const std::array<double, kAtomCount>& g,
                                                                         double tau, std::array<double, kSubsetCount>* h) {
  std::array<std::array<double, kAtomCount>, kSubsetCount> p{};
  const auto& masks = subset_masks();
  for (int s = 0; s < kSubsetCount; ++s) {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < kAtomCount; ++i) {
      if (masks[static_cast<std::size_t>(s)] & (1U << i)) m = std::max(m, g[static_cast<std::size_t>(i)]);
    }
    double z = 0.0;
    for (int i = 0; i < kAtomCount; ++i) {
      if (!(masks[static_cast<std::size_t>(s)] & (1U << i))) continue;
      const double e = std::exp((g[static_cast<std::size_t>(i)] - m) / tau);
      p[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] = e;
      z += e;
    }
    for (double& v : p[static_cast<std::size_t>(s)]) v /= z;
    if (h) (*h)[static_cast<std::size_t>(s)] = m + tau * std::log(z);
  }
  return p;
}

}  // namespace

double objective_value(const Eigen::VectorXd& z, const WeightVector& alpha, const RelaxedInstance& inst) {
  const auto g = atoms(z, inst);
  std::array<double, kSubsetCount> h{};
  subset_softmax(g, inst.tau, &h);
  double f = 0.0;
  for (int s = 0; s < kSubsetCount; ++s) f += alpha.alpha[static_cast<std::size_t>(s)] * h[static_cast<std::size_t>(s)];
  return f;
}

ObjectiveEval objective(const Eigen::VectorXd& z, const WeightVector& alpha, const RelaxedInstance& inst,
                        bool with_hessian) {
  const AtomDerivatives d = atom_derivatives(z, inst, with_hessian);
  std::array<double, kSubsetCount> h{};
  const auto p = subset_softmax(d.value, inst.tau, &h);

  ObjectiveEval out;
  Eigen::Vector4d gamma = Eigen::Vector4d::Zero();
  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  for (int s = 0; s < kSubsetCount; ++s) {
    const double a = alpha.alpha[static_cast<std::size_t>(s)];
    if (a == 0.0) continue;
    out.value += a * h[static_cast<std::size_t>(s)];
    Eigen::Vector4d ps;
    for (int i = 0; i < kAtomCount; ++i) ps[i] = p[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
    gamma += a * ps;
    Eigen::Matrix4d cov = ps.asDiagonal();
    cov -= ps * ps.transpose();
    M += (a / inst.tau) * cov;
  }
  out.gradient = d.gradient * gamma;
  if (with_hessian) {
    out.hessian = d.gradient * M * d.gradient.transpose();
    for (int i = 0; i < kAtomCount; ++i) {
      if (gamma[i] != 0.0) out.hessian += gamma[i] * d.hessian[static_cast<std::size_t>(i)];
    }
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  }
  return out;
}

Eigen::VectorXd feasible_start(const RelaxedInstance& inst) {
  inst.validate();
  const auto N = static_cast<Eigen::Index>(inst.n);
  const double target = 0.9 * inst.u_max;

  // Per-variable cap from single-term rows (u = base + c z < target).
  Eigen::VectorXd cap = Eigen::VectorXd::Constant(N, std::numeric_limits<double>::infinity());
  for (const auto& row : inst.rows) {
    if (row.terms.size() != 1 || row.terms[0].second <= 0.0) continue;
    const auto [var, coef] = row.terms[0];
    cap[var] = std::min(cap[var], (target - row.base) / coef);
  }
  Eigen::VectorXd z = Eigen::VectorXd::Constant(N, 1e-3);
  for (Eigen::Index i = 0; i < N; ++i) {
    if (std::isfinite(cap[i])) z[i] = std::min(z[i], 0.5 * cap[i]);
  }

  for (const auto& row : inst.rows) {
    double u = row.base;
    for (const auto& [var, coef] : row.terms) u += coef * z[var];
    if (u < target) continue;
    // Raise every variable that drains this row by a common fraction of its headroom.
    double drain = 0.0;
    for (const auto& [var, coef] : row.terms) {
      if (coef < 0.0 && std::isfinite(cap[var])) drain += -coef * (cap[var] - z[var]);
    }
    const double need = u - 0.8 * inst.u_max;
    if (drain <= 0.0) continue;
    const double theta = std::min(1.0, need / drain) * (1.0 - 1e-6);
    for (const auto& [var, coef] : row.terms) {
      if (coef < 0.0 && std::isfinite(cap[var])) z[var] += theta * (cap[var] - z[var]);
    }
  }

  const Eigen::VectorXd u = inst.utilization(z);
  for (Eigen::Index r = 0; r < u.size(); ++r) {
    if (!(u[r] < inst.domain_limit())) {
      throw InfeasibleError("no strictly feasible start: load row " + std::to_string(r) + " stays at " +
                            std::to_string(u[r]));
    }
  }
  if ((z.array() <= 0.0).any()) throw InfeasibleError("no strictly positive start");
  return z;
}

namespace {

struct Barrier {
  const WeightVector& alpha;
  const RelaxedInstance& inst;

  bool interior(const Eigen::VectorXd& z) const {
    if ((z.array() <= 0.0).any()) return false;
    const Eigen::VectorXd u = inst.utilization(z);
    return (u.array() < inst.domain_limit()).all();
  }

  double value(const Eigen::VectorXd& z, double t) const {
    const Eigen::VectorXd u = inst.utilization(z);
    double v = t * objective_value(z, alpha, inst);
    v -= z.array().log().sum();
    v -= (inst.domain_limit() - u.array()).log().sum();
    return v;
  }

  void derivatives(const Eigen::VectorXd& z, double t, Eigen::VectorXd& g, Eigen::MatrixXd& H) const {
    ObjectiveEval f = objective(z, alpha, inst, true);
    g = t * f.gradient;
    H = t * f.hessian;
    g.array() -= 1.0 / z.array();
    H.diagonal().array() += 1.0 / z.array().square();
    const Eigen::VectorXd u = inst.utilization(z);
    for (std::size_t r = 0; r < inst.rows.size(); ++r) {
      const double slack = inst.domain_limit() - u[static_cast<Eigen::Index>(r)];
      for (const auto& [a, ca] : inst.rows[r].terms) {
        g[a] += ca / slack;
        for (const auto& [b, cb] : inst.rows[r].terms) H(a, b) += ca * cb / (slack * slack);
      }
    }
  }
};

}  // namespace

InnerSolution solve_inner(const WeightVector& alpha, const RelaxedInstance& inst, const SolverOptions& opts,
                          const std::optional<Eigen::VectorXd>& start) {
  alpha.validate();
  InnerSolution sol;
  sol.z = start ? *start : feasible_start(inst);
  if (static_cast<std::size_t>(sol.z.size()) != inst.n) throw ValidationError("start point has the wrong size");

  const Barrier barrier{alpha, inst};
  if (!barrier.interior(sol.z)) throw InfeasibleError("start point is not strictly feasible");

  const double m = static_cast<double>(inst.n + inst.rows.size());
  double t = opts.t0;
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  for (int stage = 0;; ++stage) {
    double current = barrier.value(sol.z, t);
    while (true) {
      if (sol.iterations >= opts.max_iterations) {
        throw ConvergenceError("inner solver hit the iteration cap of " + std::to_string(opts.max_iterations));
      }
      barrier.derivatives(sol.z, t, g, H);
      // Symmetric Jacobi scaling: barrier terms make the diagonal span many decades.
      const Eigen::VectorXd d = H.diagonal().cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd Hs = d.asDiagonal() * H * d.asDiagonal();
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs);
      const Eigen::VectorXd step = -(d.asDiagonal() * ldlt.solve(d.asDiagonal() * g)).eval();
      const double slope = g.dot(step);
      const double decrement = std::sqrt(std::max(0.0, -slope));
      if (decrement < opts.decrement_tol) break;

      // Barrier values reach ~t * F, so decreases below this are round-off.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(current) + 1.0);
      double s = 1.0;
      while (s > 1e-20 && !barrier.interior(sol.z + s * step)) s *= 0.5;
      Eigen::VectorXd trial = sol.z + s * step;
      double trial_value = barrier.value(trial, t);
      while (s > 1e-20 && !(trial_value <= current + 0.25 * s * slope + noise)) {
        s *= 0.5;
        trial = sol.z + s * step;
        trial_value = barrier.value(trial, t);
      }
      ++sol.iterations;
      if (!(trial_value <= current + noise)) {
        throw ConvergenceError("line search failed with Newton decrement " + std::to_string(decrement));
      }
      const bool stalled = current - trial_value <= noise;
      sol.z = std::move(trial);
      current = trial_value;
      sol.barrier_trace.emplace_back(stage, current);
      // Near kinks smoothed at width eps the gradient carries round-off of
      // order 1/eps; once steps stop changing the objective we are at that floor.
      if (stalled && decrement < 1e-4) break;
    }
    if (m / t < opts.gap_tol) break;
    t *= opts.mu;
  }
  sol.value = objective_value(sol.z, alpha, inst);
  return sol;
}

}  // namespace vsched
