#include "sphnn/systems.hpp"

#include <Eigen/Eigenvalues>

namespace sphnn::systems {

Vec SystemSpec::drift(const Vec& x, double t) const {
  return drift_at(x, t, input ? input(t) : Vec::Zero(input_dim()));
}

Vec SystemSpec::drift_at(const Vec& x, double t, const Vec& u) const {
  if (x.size() != dim()) throw ShapeError("drift: state size mismatch for " + id);
  if (custom_drift) return custom_drift(x, t);
  Vec f = (J - R) * grad_hamiltonian(x);
  if (G.cols() > 0) {
    if (u.size() != G.cols()) throw ShapeError("drift: input size mismatch for " + id);
    f += G * u;
  }
  return f;
}

Vec SystemSpec::output(const Vec& x) const {
  if (x.size() != dim()) throw ShapeError("output: state size mismatch for " + id);
  return G.transpose() * grad_hamiltonian(x);
}

double true_hamiltonian(const SystemSpec& spec, const Vec& x) {
  if (x.size() != spec.dim()) throw ShapeError("true_hamiltonian: state size mismatch");
  return spec.hamiltonian(x);
}

static double get(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

static void require_positive(double v, const std::string& name) {
  if (!(v > 0.0)) throw ParameterError(name + " must be positive");
}

// Attach the noise columns for the chosen mode. `base` is sigma * [0; I]
// acting on the momenta block.
static void attach_noise(SystemSpec& spec, const Params& params) {
  const double sigma = get(params, "sigma", 0.0);
  const int mode_i = static_cast<int>(get(params, "noise_mode", 1.0));
  if (mode_i < 0 || mode_i > 3) throw ParameterError("noise_mode must be in {0,1,2,3}");
  const auto mode = static_cast<NoiseMode>(mode_i);
  const int d = spec.dim();
  const int np = spec.dim_p;

  if (sigma == 0.0 || mode == NoiseMode::none) {
    spec.noise_dim = 0;
    spec.diffusion = [d](const Vec&) { return Mat::Zero(d, 0); };
    return;
  }

  Mat base = Mat::Zero(d, np);
  base.bottomRows(np) = sigma * Mat::Identity(np, np);

  switch (mode) {
    case NoiseMode::additive_p:
      spec.noise_dim = np;
      spec.diffusion = [base](const Vec&) { return base; };
      break;
    case NoiseMode::projected: {
      spec.noise_dim = np;
      auto grad = spec.grad_hamiltonian;
      spec.diffusion = [base, grad](const Vec& x) -> Mat {
        const Vec g = grad(x);
        const double n2 = g.squaredNorm();
        if (n2 == 0.0) return base;
        return base - g * (g.transpose() * base) / n2;
      };
      break;
    }
    case NoiseMode::grad_aligned: {
      spec.noise_dim = 1;
      auto grad = spec.grad_hamiltonian;
      spec.diffusion = [sigma, grad, d](const Vec& x) -> Mat {
        const Vec g = grad(x);
        const double n = g.norm();
        Mat s = Mat::Zero(d, 1);
        if (n > 0.0) s.col(0) = sigma * g / n;
        return s;
      };
      break;
    }
    case NoiseMode::none:
      break;
  }
}

static SystemSpec make_mass_spring(const Params& params) {
  const double m = get(params, "m", 1.0);
  const double k = get(params, "k", 1.0);
  const double delta = get(params, "delta", 0.1);
  const double f0 = get(params, "F0", 0.0);
  const double omega = get(params, "omega", 1.0);
  require_positive(m, "mass m");
  require_positive(k, "stiffness k");
  if (delta < 0.0) throw ParameterError("damping delta must be >= 0");

  SystemSpec spec;
  spec.id = "mass_spring";
  spec.dim_q = spec.dim_p = 1;
  spec.params = params;
  spec.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
  spec.R = (Mat(2, 2) << 0, 0, 0, delta).finished();
  spec.G = (Mat(2, 1) << 0, 1).finished();
  spec.hamiltonian = [k, m](const Vec& x) {
    return 0.5 * k * x(0) * x(0) + 0.5 * x(1) * x(1) / m;
  };
  spec.grad_hamiltonian = [k, m](const Vec& x) {
    return Vec{(Vec(2) << k * x(0), x(1) / m).finished()};
  };
  spec.input = [f0, omega](double t) {
    return Vec{(Vec(1) << f0 * std::sin(omega * t)).finished()};
  };
  attach_noise(spec, params);
  return spec;
}

static SystemSpec make_duffing(const Params& params) {
  // Double well H = p^2/2 + q^4/4 - q^2/2; optional damping delta and
  // periodic forcing gamma*cos(omega t) through the momentum port.
  const double delta = get(params, "delta", 0.0);
  const double gamma = get(params, "gamma", 0.0);
  const double omega = get(params, "omega", 1.0);
  if (delta < 0.0) throw ParameterError("damping delta must be >= 0");

  SystemSpec spec;
  spec.id = "duffing";
  spec.dim_q = spec.dim_p = 1;
  spec.params = params;
  spec.J = (Mat(2, 2) << 0, 1, -1, 0).finished();
  spec.R = (Mat(2, 2) << 0, 0, 0, delta).finished();
  spec.G = (Mat(2, 1) << 0, 1).finished();
  spec.hamiltonian = [](const Vec& x) {
    const double q = x(0), p = x(1);
    return 0.5 * p * p + 0.25 * q * q * q * q - 0.5 * q * q;
  };
  spec.grad_hamiltonian = [](const Vec& x) {
    const double q = x(0), p = x(1);
    return Vec{(Vec(2) << q * q * q - q, p).finished()};
  };
  spec.input = [gamma, omega](double t) {
    return Vec{(Vec(1) << gamma * std::cos(omega * t)).finished()};
  };
  attach_noise(spec, params);
  return spec;
}

static SystemSpec make_arm3(const Params& params) {
  // Three-joint chain with separable energy: H = p^T M^-1 p / 2 + q^T Keff q / 2,
  // Keff = diag(k1,k2,k3) + 2c * chain Laplacian.
  const double k1 = get(params, "k1", 1.0);
  const double k2 = get(params, "k2", 2.0);
  const double k3 = get(params, "k3", 3.0);
  const double c = get(params, "c", 0.5);
  const double m = get(params, "m", 1.0);
  const double delta = get(params, "delta", 0.0);
  require_positive(m, "mass m");
  for (double k : {k1, k2, k3}) require_positive(k, "joint stiffness");
  if (c < 0.0) throw ParameterError("coupling c must be >= 0");
  if (delta < 0.0) throw ParameterError("damping delta must be >= 0");

  Mat lap(3, 3);
  lap << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  Mat keff = Vec{(Vec(3) << k1, k2, k3).finished()}.asDiagonal();
  keff += 2.0 * c * lap;

  SystemSpec spec;
  spec.id = "arm3";
  spec.dim_q = spec.dim_p = 3;
  spec.params = params;
  spec.J = Mat::Zero(6, 6);
  spec.J.topRightCorner(3, 3) = Mat::Identity(3, 3);
  spec.J.bottomLeftCorner(3, 3) = -Mat::Identity(3, 3);
  spec.R = Mat::Zero(6, 6);
  spec.R.bottomRightCorner(3, 3) = delta * Mat::Identity(3, 3);
  spec.G = Mat::Zero(6, 3);
  spec.G.bottomRows(3) = Mat::Identity(3, 3);
  spec.hamiltonian = [keff, m](const Vec& x) {
    const Vec q = x.head(3), p = x.tail(3);
    return 0.5 * p.squaredNorm() / m + 0.5 * q.dot(keff * q);
  };
  spec.grad_hamiltonian = [keff, m](const Vec& x) {
    Vec g(6);
    g.head(3) = keff * x.head(3);
    g.tail(3) = x.tail(3) / m;
    return g;
  };
  spec.input = [](double) { return Vec::Zero(3); };
  attach_noise(spec, params);
  return spec;
}

static Mat cyclic_shift(int n) {
  // (S v)_i = v_{i+1 mod n}
  Mat s = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) s(i, (i + 1) % n) = 1.0;
  return s;
}

RingModelSpec make_ring_model(const Params& params) {
  RingModelSpec ring;
  ring.agents = static_cast<int>(get(params, "N", 4.0));
  ring.beta = get(params, "beta", 1.0);
  ring.sigma = get(params, "sigma", 0.5);
  ring.alpha = get(params, "alpha", 1.0);
  ring.offset = static_cast<int>(get(params, "q", 1.0));
  if (ring.agents < 2) throw ParameterError("ring model needs N >= 2");
  require_positive(ring.beta, "dissipation beta");
  require_positive(ring.alpha, "potential stiffness alpha");

  const int n = ring.agents;
  const Mat S = cyclic_shift(n);
  const Mat I = Mat::Identity(n, n);
  const Mat lap = 2.0 * I - S - S.transpose();  // PSD cyclic Laplacian
  Mat shift_back_q = I;                          // (S^T)^offset, v_i -> v_{i-offset}
  for (int k = 0; k < ((ring.offset % n) + n) % n; ++k) shift_back_q = S.transpose() * shift_back_q;

  const double a2 = ring.alpha * ring.alpha;
  ring.B = Mat::Zero(2 * n, 2 * n);
  ring.B.topRightCorner(n, n) = S - I;
  ring.B.bottomLeftCorner(n, n) = a2 * (I - shift_back_q);
  ring.B.bottomRightCorner(n, n) = -ring.beta * lap;

  ring.G = Mat::Zero(2 * n, n);
  ring.G.bottomRows(n) = ring.sigma * I;

  SystemSpec& spec = ring.spec;
  spec.id = "ring";
  spec.dim_q = spec.dim_p = n;
  spec.params = params;
  spec.J = Mat::Zero(2 * n, 2 * n);
  spec.J.topRightCorner(n, n) = S - I;
  spec.J.bottomLeftCorner(n, n) = I - S.transpose();
  spec.R = Mat::Zero(2 * n, 2 * n);
  spec.R.bottomRightCorner(n, n) = ring.beta * lap;
  spec.G = Mat::Zero(2 * n, 0);  // no control port; noise handled as diffusion
  spec.phs_exact = (ring.offset == 1);
  spec.hamiltonian = [a2, n](const Vec& x) {
    return 0.5 * a2 * x.head(n).squaredNorm() + 0.5 * x.tail(n).squaredNorm();
  };
  spec.grad_hamiltonian = [a2, n](const Vec& x) {
    Vec g(2 * n);
    g.head(n) = a2 * x.head(n);
    g.tail(n) = x.tail(n);
    return g;
  };
  spec.input = [](double) { return Vec::Zero(0); };
  spec.noise_dim = n;
  const Mat g_mat = ring.G;
  spec.diffusion = [g_mat](const Vec&) { return g_mat; };
  if (!spec.phs_exact) {
    const Mat b_mat = ring.B;
    spec.custom_drift = [b_mat](const Vec& x, double) { return b_mat * x; };
  }
  return ring;
}

SystemSpec ornstein_uhlenbeck(double a, double g) {
  require_positive(a, "OU rate a");
  SystemSpec spec;
  spec.id = "ou";
  spec.dim_q = 0;
  spec.dim_p = 1;
  spec.J = Mat::Zero(1, 1);
  spec.R = Mat::Identity(1, 1);
  spec.G = Mat::Zero(1, 0);
  spec.hamiltonian = [a](const Vec& x) { return 0.5 * a * x(0) * x(0); };
  spec.grad_hamiltonian = [a](const Vec& x) {
    return Vec{(Vec(1) << a * x(0)).finished()};
  };
  spec.input = [](double) { return Vec::Zero(0); };
  spec.noise_dim = g != 0.0 ? 1 : 0;
  spec.diffusion = [g](const Vec&) {
    return g != 0.0 ? Mat::Constant(1, 1, g) : Mat::Zero(1, 0);
  };
  spec.params = {{"a", a}, {"g", g}};
  return spec;
}

SystemSpec make_system(const std::string& id, const Params& params) {
  if (id == "mass_spring") return make_mass_spring(params);
  if (id == "duffing") return make_duffing(params);
  if (id == "arm3") return make_arm3(params);
  if (id == "ring") return make_ring_model(params).spec;
  if (id == "ou")
    return ornstein_uhlenbeck(get(params, "a", 1.0), get(params, "g", 0.5));
  throw ParameterError("unknown system id: " + id);
}

LyapunovSolution solve_lyapunov(const Mat& B, const Mat& Q, double kernel_tol) {
  const Eigen::Index d = B.rows();
  if (B.cols() != d || Q.rows() != d || Q.cols() != d)
    throw ShapeError("solve_lyapunov: B and Q must be square and same size");

  LyapunovSolution sol;

  // Split off the kernel of B; the covariance is solved on its orthogonal
  // complement, which must itself be invariant (kernel also a left kernel).
  Eigen::FullPivLU<Mat> lu(B);
  lu.setThreshold(kernel_tol);
  Mat kernel = lu.kernel();
  if (lu.rank() == d) kernel = Mat::Zero(d, 0);
  sol.kernel_dim = static_cast<int>(kernel.cols());

  Mat V;  // orthonormal basis of the complement
  if (sol.kernel_dim == 0) {
    V = Mat::Identity(d, d);
  } else {
    Eigen::HouseholderQR<Mat> qr(kernel);
    Mat Qfull = qr.householderQ();
    V = Qfull.rightCols(d - sol.kernel_dim);
    Mat Kn = Qfull.leftCols(sol.kernel_dim);
    // complement invariant iff B^T maps the kernel into itself
    const Mat leak = V.transpose() * B.transpose() * Kn;
    sol.complement_invariant = leak.norm() <= 1e-8 * std::max(1.0, B.norm());
  }

  const Eigen::Index m = V.cols();
  const Mat Bt = V.transpose() * B * V;
  const Mat Qt = V.transpose() * Q * V;

  // Hurwitz check on the reduced drift.
  Eigen::EigenSolver<Mat> es(Bt);
  for (Eigen::Index i = 0; i < m; ++i)
    if (es.eigenvalues()(i).real() >= -1e-12)
      throw NumericError("solve_lyapunov: reduced drift is not Hurwitz",
                         es.eigenvalues()(i).real());

  // vec(P) from (I (x) B + B (x) I) vec(P) = -vec(Q)
  Mat K = Mat::Zero(m * m, m * m);
  for (Eigen::Index i = 0; i < m; ++i)
    K.block(i * m, i * m, m, m) += Bt;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index r = 0; r < m; ++r)
        K(j * m + r, i * m + r) += Bt(j, i);
  Vec q(m * m);
  for (Eigen::Index j = 0; j < m; ++j) q.segment(j * m, m) = -Qt.col(j);
  Vec p = K.partialPivLu().solve(q);

  Mat P(m, m);
  for (Eigen::Index j = 0; j < m; ++j) P.col(j) = p.segment(j * m, m);
  P = 0.5 * (P + P.transpose());

  const double qnorm = Qt.norm();
  sol.residual_rel = (Bt * P + P * Bt.transpose() + Qt).norm() / (qnorm > 0 ? qnorm : 1.0);
  if (sol.residual_rel > 1e-10)
    throw NumericError("solve_lyapunov: residual above tolerance", sol.residual_rel);

  sol.covariance = V * P * V.transpose();
  sol.stable_basis = V;
  return sol;
}

LyapunovSolution stationary_covariance(const RingModelSpec& ring) {
  return solve_lyapunov(ring.B, ring.G * ring.G.transpose());
}

Vec sample_energy_shell(const SystemSpec& spec, double e_lo, double e_hi, Rng& rng) {
  if (!(e_lo < e_hi)) throw ParameterError("energy shell bounds must satisfy lo < hi");
  // Per-system proposal boxes sized so the shell [0.2, 1.5] is reachable.
  double half = 2.0;
  if (spec.id == "duffing") half = 1.8;
  if (spec.id == "arm3") half = 1.2;
  if (spec.id == "ring") half = 1.0;
  const int d = spec.dim();
  for (int tries = 0; tries < 100000; ++tries) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = rng.uniform(-half, half);
    const double h = spec.hamiltonian(x);
    if (h >= e_lo && h <= e_hi) return x;
  }
  throw NumericError("sample_energy_shell: rejection sampling failed");
}

}  // namespace sphnn::systems
