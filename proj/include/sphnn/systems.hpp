#pragma once

// Reference dynamics with known Hamiltonians. Every built-in system is
// assembled in the form
//   xdot = (J - R) grad H(x) + G u(t),   y = G^T grad H(x),
// with J skew-symmetric, R symmetric PSD, plus an Ito diffusion column map
// Sigma(x). The agent ring model additionally exposes its linear drift matrix
// B and the stationary covariance on the stable subspace.

#include "sphnn/common.hpp"

namespace sphnn::systems {

/// How the noise columns are built from the amplitude parameter `sigma`.
enum class NoiseMode {
  none = 0,        // Sigma = 0
  additive_p = 1,  // Sigma = sigma * [0; I] acting on momenta
  projected = 2,   // additive_p projected onto the tangent of H level sets
  grad_aligned = 3 // Sigma = sigma * grad H / |grad H| (energy-pumping probe)
};

struct SystemSpec {
  std::string id;
  int dim_q = 0;
  int dim_p = 0;
  Mat J, R, G;  // constant structure matrices; G may have zero columns
  std::function<double(const Vec&)> hamiltonian;
  std::function<Vec(const Vec&)> grad_hamiltonian;
  std::function<Mat(const Vec&)> diffusion;  // dim x noise_dim
  std::function<Vec(double)> input;          // u(t), size G.cols()
  /// When set, replaces the structural drift entirely (non-PHS dynamics,
  /// Ito-corrected drifts, offset-ring variants).
  std::function<Vec(const Vec&, double)> custom_drift;
  int noise_dim = 0;
  Params params;
  bool phs_exact = true;  // drift == (J-R) grad H + G u in these coordinates

  int dim() const { return dim_q + dim_p; }
  int input_dim() const { return static_cast<int>(G.cols()); }

  Vec drift(const Vec& x, double t) const;
  Vec drift_at(const Vec& x, double t, const Vec& u) const;
  /// Port output y = G^T grad H(x).
  Vec output(const Vec& x) const;
};

struct RingModelSpec {
  int agents = 0;        // N
  double beta = 1.0;     // velocity-coupling dissipation rate
  double sigma = 0.5;    // noise volatility on momenta
  double alpha = 1.0;    // quadratic potential stiffness
  int offset = 1;        // interaction range q in the potential term
  Mat B;                 // 2N x 2N linear drift
  Mat G;                 // 2N x N noise map
  SystemSpec spec;       // PHS view (exact for offset == 1)
};

/// Build a reference system. Known ids: mass_spring, duffing, arm3, ring, ou.
/// Missing params take documented defaults; invalid ones throw ParameterError.
SystemSpec make_system(const std::string& id, const Params& params = {});

RingModelSpec make_ring_model(const Params& params);

double true_hamiltonian(const SystemSpec& spec, const Vec& x);

/// Scalar Ornstein-Uhlenbeck dX = -a X dt + g dW as a (0,1)-dim PHS.
SystemSpec ornstein_uhlenbeck(double a, double g);

struct LyapunovSolution {
  Mat covariance;        // full-dimension, zero on the neutral subspace
  Mat stable_basis;      // orthonormal columns spanning the solved subspace
  int kernel_dim = 0;    // dimension of the neutral (zero-eigenvalue) subspace
  bool complement_invariant = true;
  double residual_rel = 0.0;  // Lyapunov residual on the stable subspace
};

/// Solve B P + P B^T + Q = 0 for the stationary covariance. A kernel of B is
/// split off first (covariance is computed on its orthogonal complement,
/// which must be B-invariant); the solve itself is a dense Kronecker system.
LyapunovSolution solve_lyapunov(const Mat& B, const Mat& Q,
                                double kernel_tol = 1e-9);

LyapunovSolution stationary_covariance(const RingModelSpec& ring);

/// Uniform rejection sampling of initial conditions from the energy shell
/// H(x) in [e_lo, e_hi], proposals uniform over the per-system state box.
Vec sample_energy_shell(const SystemSpec& spec, double e_lo, double e_hi, Rng& rng);

}  // namespace sphnn::systems
