#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace vsched {

inline constexpr int kAtomCount = 4;
inline constexpr int kSubsetCount = 15;
/// Position of the singleton {4} (the strongly convex load atom) in subset order.
inline constexpr int kLoadSubset = 3;

/// Nonempty subsets of {1,2,3,4} as bitmasks (bit i = atom i+1), ordered by
/// size and then lexicographically: {1},{2},{3},{4},{1,2},...,{1,2,3,4}.
const std::array<unsigned, kSubsetCount>& subset_masks();
std::string subset_label(int index);

/// One affine utilization row u = base + sum(coef * z[var]) with a penalty weight.
struct LoadRow {
  std::vector<std::pair<int, double>> terms;
  double base = 0.0;
  double weight = 0.0;
};

/// The relaxed scheduling instance: continuous waits z (in units of
/// `time_unit` seconds) and the affine utilization map.
struct RelaxedInstance {
  std::size_t n = 0;
  std::vector<double> release;  // seconds
  std::vector<int> class_of;    // request class, for reporting
  std::vector<LoadRow> rows;
  double u_max = 0.95;
  double tau = 0.1;
  double smooth_eps = 1e-6;
  double cvar_width = 1e-3;  // softplus width of the CVaR hinge
  double time_unit = 60.0;   // seconds per unit of z

  void validate() const;
  Eigen::VectorXd utilization(const Eigen::VectorXd& z) const;
  /// Largest utilization admitted before the barrier is considered breached.
  double domain_limit() const { return u_max * (1.0 - 1e-9); }
};

/// Convex weights over the 15 subsets. `raw` is the unprojected simplex point
/// the weights were derived from (alpha = eta * e_{4} + (1 - eta) * raw).
struct WeightVector {
  std::array<double, kSubsetCount> alpha{};
  std::array<double, kSubsetCount> raw{};
  double eta = 0.05;

  bool operator==(const WeightVector&) const = default;
  /// Throws ValidationError unless alpha is on the simplex with alpha[{4}] >= eta.
  void validate() const;
};

/// Atom values g1..g4.
std::array<double, kAtomCount> atoms(const Eigen::VectorXd& z, const RelaxedInstance& inst);

struct AtomDerivatives {
  std::array<double, kAtomCount> value{};
  Eigen::MatrixXd gradient;                       // n x 4, column i = grad g_{i+1}
  std::array<Eigen::MatrixXd, kAtomCount> hessian;  // left empty when not requested
};

AtomDerivatives atom_derivatives(const Eigen::VectorXd& z, const RelaxedInstance& inst, bool with_hessian);

/// tau * log(sum exp(v / tau)) with max-shift.
double lse_aggregate(std::span<const double> values, double tau);

struct SmoothedCvar {
  double value = 0.0;
  double nu = 0.0;
  std::vector<double> sigma;  // logistic weights at the optimal nu
};

/// Rockafellar-Uryasev CVaR_0.95 with a softplus hinge of the given width and
/// nu eliminated by solving the scalar optimality condition. The tail size is
/// k = ceil(0.05 n), so width -> 0 recovers the sorted-tail mean.
SmoothedCvar smoothed_cvar(std::span<const double> x, double width);

struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

double objective_value(const Eigen::VectorXd& z, const WeightVector& alpha, const RelaxedInstance& inst);
ObjectiveEval objective(const Eigen::VectorXd& z, const WeightVector& alpha, const RelaxedInstance& inst,
                        bool with_hessian = true);

struct SolverOptions {
  double t0 = 1.0;
  double mu = 10.0;
  double gap_tol = 1e-8;
  double decrement_tol = 1e-8;
  int max_iterations = 500;
};

struct InnerSolution {
  Eigen::VectorXd z;
  double value = 0.0;
  int iterations = 0;
  /// Barrier objective after every Newton step, tagged with its stage.
  std::vector<std::pair<int, double>> barrier_trace;
};

/// Strictly feasible point from a forward sweep that spills over-full rows.
/// Throws InfeasibleError when no such point is found.
Eigen::VectorXd feasible_start(const RelaxedInstance& inst);

/// Path-following log-barrier with damped Newton steps and Armijo backtracking.
InnerSolution solve_inner(const WeightVector& alpha, const RelaxedInstance& inst, const SolverOptions& opts = {},
                          const std::optional<Eigen::VectorXd>& start = std::nullopt);

}  // namespace vsched
