#pragma once

// Time stepping for deterministic, Ito and Stratonovich dynamics, plus the
// structure-preserving steppers (implicit midpoint, Gauss-Legendre
// collocation with truncated Gaussian stage noise).

#include "sphnn/systems.hpp"

#include <optional>

namespace sphnn::integrators {

struct Trajectory {
  Vec times;     // strictly increasing, uniform step unless noted
  Mat states;    // (steps+1) x dim
  Mat inputs;    // (steps+1) x input_dim (may have zero columns)
  Vec energies;  // H(x_k)
  std::optional<Mat> derivs;  // xdot(t_k) when labels are available

  int length() const { return static_cast<int>(times.size()); }
  int dim() const { return static_cast<int>(states.cols()); }
  double dt() const { return times.size() > 1 ? times(1) - times(0) : 0.0; }
};

enum class NoiseScheme { gaussian, truncated_gaussian };

/// Pre-drawn Wiener increments, one row per step. Entries are N(0, h) under
/// the declared seed; the truncated scheme clips to |dW| <= k sqrt(h) by
/// re-drawing.
struct NoiseDraw {
  Mat increments;  // steps x noise_dim
  NoiseScheme scheme = NoiseScheme::gaussian;
  double variance = 0.0;    // h
  double truncation = 2.0;  // k, only meaningful for truncated draws

  static NoiseDraw gaussian(int steps, int dim, double h, std::uint64_t seed);
  static NoiseDraw truncated(int steps, int dim, double h, double k,
                             std::uint64_t seed);
  static NoiseDraw zeros(int steps, int dim, double h);

  int steps() const { return static_cast<int>(increments.rows()); }
  int dim() const { return static_cast<int>(increments.cols()); }
};

/// Mean and variance of the truncated centered Gaussian with base variance h
/// and cut at k sqrt(h).
double truncated_gaussian_variance(double h, double k);

/// Euler-Maruyama. With zero diffusion this is explicit Euler. Throws
/// DivergenceError (carrying the last finite index) if the state leaves the
/// representable range.
Trajectory integrate_ito(const systems::SystemSpec& spec, const Vec& x0, double dt,
                         int steps, const NoiseDraw& noise);
Trajectory integrate_ito(const systems::SystemSpec& spec, const Vec& x0, double dt,
                         int steps, std::uint64_t seed);

/// Heun predictor-corrector; converges to the Stratonovich solution.
Trajectory integrate_stratonovich(const systems::SystemSpec& spec, const Vec& x0,
                                  double dt, int steps, const NoiseDraw& noise);
Trajectory integrate_stratonovich(const systems::SystemSpec& spec, const Vec& x0,
                                  double dt, int steps, std::uint64_t seed);

/// Classical RK4 on the deterministic drift (used for ground-truth data).
Trajectory integrate_rk4(const systems::SystemSpec& spec, const Vec& x0, double dt,
                         int steps);

/// Drift correction (1/2) sum_j (d Sigma_.j / dx) Sigma_.j turning a
/// Stratonovich SDE into its Ito equivalent; Jacobians by central differences.
Vec strat_to_ito_drift(const std::function<Mat(const Vec&)>& sigma, const Vec& x,
                       double fd_step = 1e-6);

/// Copy of `spec` whose drift includes the Stratonovich-to-Ito correction.
systems::SystemSpec ito_equivalent(const systems::SystemSpec& spec);

struct FixedPointOpts {
  double tol = 1e-10;
  int max_iters = 50;
};

/// One step of x' = x + dt * Jc grad H((x+x')/2) with canonical Jc; exact for
/// quadratic invariants up to the fixed-point tolerance.
Vec implicit_midpoint_step(const std::function<Vec(const Vec&)>& grad_h, const Vec& x,
                           double dt, const FixedPointOpts& opts = {});

/// Roll out `steps` midpoint steps; energies filled from `hamiltonian` when given.
Trajectory integrate_implicit_midpoint(const std::function<Vec(const Vec&)>& grad_h,
                                       const std::function<double(const Vec&)>& hamiltonian,
                                       const Vec& x0, double dt, int steps,
                                       const FixedPointOpts& opts = {});

struct CollocationTableau {
  Vec c;   // Gauss-Legendre nodes
  Mat a;   // a_ij = int_0^{c_i} l_j
  Vec b;   // b_j  = int_0^1 l_j
};

/// Exact tableaus for s = 1 (midpoint) and s = 2.
CollocationTableau gauss_legendre(int stages);

struct CollocationStep {
  Vec state;     // X(t0 + h)
  Vec stage_supply;  // per-stage y^T u, quadrature-ready
  double supply = 0.0;  // h * sum_j b_j y_j^T u_j
};

/// One step of the stage system
///   X_i = x0 + h sum_j a_ij f(X_j, u_j) + sum_j a_ij Sigma(X_j) dW
/// solved by fixed-point iteration; the noise row enters the stages with the
/// drift coefficients.
CollocationStep collocation_sphs_step(const systems::SystemSpec& spec, const Vec& x0,
                                      double t0, double h, int stages,
                                      const Vec& noise_increment,
                                      const FixedPointOpts& opts = {});

/// First return time to the transverse section through x0 (used to size
/// one-period rollouts). Throws NumericError when no return is found.
double estimate_period(const systems::SystemSpec& spec, const Trajectory& traj);

}  // namespace sphnn::integrators
