#include "sphnn/integrators.hpp"

namespace sphnn::integrators {

NoiseDraw NoiseDraw::gaussian(int steps, int dim, double h, std::uint64_t seed) {
  NoiseDraw d;
  d.scheme = NoiseScheme::gaussian;
  d.variance = h;
  d.increments.resize(steps, dim);
  Rng rng(seed);
  const double s = std::sqrt(h);
  for (int i = 0; i < steps; ++i)
    for (int j = 0; j < dim; ++j) d.increments(i, j) = s * rng.normal();
  return d;
}

NoiseDraw NoiseDraw::truncated(int steps, int dim, double h, double k,
                               std::uint64_t seed) {
  if (!(k > 0.0)) throw ParameterError("truncation bound k must be positive");
  NoiseDraw d;
  d.scheme = NoiseScheme::truncated_gaussian;
  d.variance = h;
  d.truncation = k;
  d.increments.resize(steps, dim);
  Rng rng(seed);
  const double s = std::sqrt(h);
  const double bound = k * s;
  for (int i = 0; i < steps; ++i)
    for (int j = 0; j < dim; ++j) {
      double w;
      do {
        w = s * rng.normal();
      } while (std::abs(w) > bound);
      d.increments(i, j) = w;
    }
  return d;
}

NoiseDraw NoiseDraw::zeros(int steps, int dim, double h) {
  NoiseDraw d;
  d.variance = h;
  d.increments = Mat::Zero(steps, dim);
  return d;
}

double truncated_gaussian_variance(double h, double k) {
  // Var of N(0,h) conditioned on |x| <= k sqrt(h):
  // h * (1 - 2k phi(k) / (2 Phi(k) - 1)) with standard-normal phi, Phi.
  const double phi = std::exp(-0.5 * k * k) / std::sqrt(2.0 * M_PI);
  const double mass = std::erf(k / std::sqrt(2.0));
  return h * (1.0 - 2.0 * k * phi / mass);
}

static bool finite(const Vec& x) { return x.allFinite(); }

static Trajectory alloc_traj(const systems::SystemSpec& spec, const Vec& x0,
                             double dt, int steps) {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  if (x0.size() != spec.dim()) throw ShapeError("integrate: x0 has wrong dimension");
  Trajectory traj;
  traj.times = Vec::LinSpaced(steps + 1, 0.0, dt * steps);
  traj.states.resize(steps + 1, spec.dim());
  traj.inputs.resize(steps + 1, spec.input_dim());
  traj.energies.resize(steps + 1);
  return traj;
}

static void record(Trajectory& traj, const systems::SystemSpec& spec, int k,
                   const Vec& x, double t) {
  traj.states.row(k) = x.transpose();
  if (spec.input_dim() > 0) traj.inputs.row(k) = spec.input(t).transpose();
  traj.energies(k) = spec.hamiltonian(x);
}

Trajectory integrate_ito(const systems::SystemSpec& spec, const Vec& x0, double dt,
                         int steps, const NoiseDraw& noise) {
  if (spec.noise_dim > 0 && noise.dim() != spec.noise_dim)
    throw ShapeError("integrate_ito: noise columns do not match diffusion");
  if (noise.steps() < steps) throw ShapeError("integrate_ito: noise too short");
  Trajectory traj = alloc_traj(spec, x0, dt, steps);
  Vec x = x0;
  record(traj, spec, 0, x, 0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = traj.times(k);
    Vec next = x + dt * spec.drift(x, t);
    if (spec.noise_dim > 0)
      next += spec.diffusion(x) * noise.increments.row(k).transpose();
    if (!finite(next))
      throw DivergenceError("integrate_ito: state diverged at step " +
                                std::to_string(k + 1), k);
    x = std::move(next);
    record(traj, spec, k + 1, x, traj.times(k + 1));
  }
  return traj;
}

Trajectory integrate_ito(const systems::SystemSpec& spec, const Vec& x0, double dt,
                         int steps, std::uint64_t seed) {
  return integrate_ito(spec, x0, dt, steps,
                       NoiseDraw::gaussian(steps, spec.noise_dim, dt, seed));
}

Trajectory integrate_stratonovich(const systems::SystemSpec& spec, const Vec& x0,
                                  double dt, int steps, const NoiseDraw& noise) {
  if (spec.noise_dim > 0 && noise.dim() != spec.noise_dim)
    throw ShapeError("integrate_stratonovich: noise columns do not match diffusion");
  if (noise.steps() < steps) throw ShapeError("integrate_stratonovich: noise too short");
  Trajectory traj = alloc_traj(spec, x0, dt, steps);
  Vec x = x0;
  record(traj, spec, 0, x, 0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = traj.times(k);
    const Vec f0 = spec.drift(x, t);
    Vec dw = spec.noise_dim > 0 ? Vec(noise.increments.row(k).transpose()) : Vec();
    Vec pred = x + dt * f0;
    if (spec.noise_dim > 0) pred += spec.diffusion(x) * dw;
    if (!finite(pred))
      throw DivergenceError("integrate_stratonovich: predictor diverged at step " +
                                std::to_string(k + 1), k);
    Vec next = x + 0.5 * dt * (f0 + spec.drift(pred, t + dt));
    if (spec.noise_dim > 0)
      next += 0.5 * (spec.diffusion(x) + spec.diffusion(pred)) * dw;
    if (!finite(next))
      throw DivergenceError("integrate_stratonovich: state diverged at step " +
                                std::to_string(k + 1), k);
    x = std::move(next);
    record(traj, spec, k + 1, x, traj.times(k + 1));
  }
  return traj;
}

Trajectory integrate_stratonovich(const systems::SystemSpec& spec, const Vec& x0,
                                  double dt, int steps, std::uint64_t seed) {
  return integrate_stratonovich(spec, x0, dt, steps,
                                NoiseDraw::gaussian(steps, spec.noise_dim, dt, seed));
}

Trajectory integrate_rk4(const systems::SystemSpec& spec, const Vec& x0, double dt,
                         int steps) {
  Trajectory traj = alloc_traj(spec, x0, dt, steps);
  Vec x = x0;
  record(traj, spec, 0, x, 0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = traj.times(k);
    const Vec k1 = spec.drift(x, t);
    const Vec k2 = spec.drift(x + 0.5 * dt * k1, t + 0.5 * dt);
    const Vec k3 = spec.drift(x + 0.5 * dt * k2, t + 0.5 * dt);
    const Vec k4 = spec.drift(x + dt * k3, t + dt);
    Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!finite(next))
      throw DivergenceError("integrate_rk4: state diverged at step " +
                                std::to_string(k + 1), k);
    x = std::move(next);
    record(traj, spec, k + 1, x, traj.times(k + 1));
  }
  return traj;
}

Vec strat_to_ito_drift(const std::function<Mat(const Vec&)>& sigma, const Vec& x,
                       double fd_step) {
  const Mat s0 = sigma(x);
  const Eigen::Index d = x.size();
  const Eigen::Index w = s0.cols();
  Vec corr = Vec::Zero(d);
  if (w == 0) return corr;
  for (Eigen::Index i = 0; i < d; ++i) {
    Vec xp = x, xm = x;
    xp(i) += fd_step;
    xm(i) -= fd_step;
    const Mat ds = (sigma(xp) - sigma(xm)) / (2.0 * fd_step);  // dSigma/dx_i
    // correction_r += 1/2 sum_j dSigma_rj/dx_i * Sigma_ij
    corr += 0.5 * ds * s0.row(i).transpose();
  }
  return corr;
}

systems::SystemSpec ito_equivalent(const systems::SystemSpec& spec) {
  systems::SystemSpec out = spec;
  if (spec.noise_dim == 0) return out;
  out.id = spec.id + "_ito";
  out.phs_exact = false;
  auto inner = std::make_shared<systems::SystemSpec>(spec);
  out.custom_drift = [inner](const Vec& x, double t) {
    return inner->drift(x, t) + strat_to_ito_drift(inner->diffusion, x);
  };
  return out;
}

Vec implicit_midpoint_step(const std::function<Vec(const Vec&)>& grad_h, const Vec& x,
                           double dt, const FixedPointOpts& opts) {
  if (!(dt != 0.0)) throw ParameterError("implicit midpoint: dt must be nonzero");
  const Eigen::Index d = x.size();
  if (d % 2 != 0) throw ShapeError("implicit midpoint: state dimension must be even");
  const Eigen::Index n = d / 2;
  auto canonical_field = [n](const Vec& g) {
    Vec f(2 * n);
    f.head(n) = g.tail(n);
    f.tail(n) = -g.head(n);
    return f;
  };
  Vec y = x + dt * canonical_field(grad_h(x));  // explicit Euler warm start
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iters; ++it) {
    Vec y_new = x + dt * canonical_field(grad_h(0.5 * (x + y)));
    res = (y_new - y).norm();
    y = std::move(y_new);
    if (res <= opts.tol) return y;
  }
  throw IterationError("implicit midpoint: fixed point did not converge", res);
}

Trajectory integrate_implicit_midpoint(const std::function<Vec(const Vec&)>& grad_h,
                                       const std::function<double(const Vec&)>& hamiltonian,
                                       const Vec& x0, double dt, int steps,
                                       const FixedPointOpts& opts) {
  Trajectory traj;
  traj.times = Vec::LinSpaced(steps + 1, 0.0, dt * steps);
  traj.states.resize(steps + 1, x0.size());
  traj.inputs.resize(steps + 1, 0);
  traj.energies.resize(steps + 1);
  Vec x = x0;
  for (int k = 0; k <= steps; ++k) {
    traj.states.row(k) = x.transpose();
    traj.energies(k) = hamiltonian ? hamiltonian(x) : 0.0;
    if (k < steps) {
      x = implicit_midpoint_step(grad_h, x, dt, opts);
      if (!finite(x))
        throw DivergenceError("implicit midpoint: state diverged at step " +
                                  std::to_string(k + 1), k);
    }
  }
  return traj;
}

CollocationTableau gauss_legendre(int stages) {
  CollocationTableau t;
  if (stages == 1) {
    t.c = Vec::Constant(1, 0.5);
    t.a = Mat::Constant(1, 1, 0.5);
    t.b = Vec::Constant(1, 1.0);
  } else if (stages == 2) {
    const double r = std::sqrt(3.0) / 6.0;
    t.c = (Vec(2) << 0.5 - r, 0.5 + r).finished();
    t.a = (Mat(2, 2) << 0.25, 0.25 - r, 0.25 + r, 0.25).finished();
    t.b = (Vec(2) << 0.5, 0.5).finished();
  } else {
    throw ParameterError("gauss_legendre: stages must be 1 or 2");
  }
  return t;
}

CollocationStep collocation_sphs_step(const systems::SystemSpec& spec, const Vec& x0,
                                      double t0, double h, int stages,
                                      const Vec& noise_increment,
                                      const FixedPointOpts& opts) {
  if (!(h > 0.0)) throw ParameterError("collocation: step must be positive");
  const CollocationTableau tab = gauss_legendre(stages);
  const int d = spec.dim();
  if (x0.size() != d) throw ShapeError("collocation: x0 has wrong dimension");
  if (spec.noise_dim > 0 && noise_increment.size() != spec.noise_dim)
    throw ShapeError("collocation: noise increment size mismatch");

  std::vector<Vec> stage_x(stages, x0);
  std::vector<Vec> stage_rate(stages, Vec::Zero(d));
  std::vector<Vec> stage_u(stages);
  for (int i = 0; i < stages; ++i)
    stage_u[i] = spec.input ? spec.input(t0 + tab.c(i) * h) : Vec::Zero(spec.input_dim());

  auto rate = [&](const Vec& xs, int i) {
    // drift plus the noise row shared across stages; the increment enters the
    // state with the same quadrature coefficients as the drift.
    Vec r = spec.drift_at(xs, t0 + tab.c(i) * h, stage_u[i]) * h;
    if (spec.noise_dim > 0) r += spec.diffusion(xs) * noise_increment;
    return r;  // contribution per unit a_ij
  };

  double res = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int it = 0; it < opts.max_iters && !converged; ++it) {
    res = 0.0;
    for (int i = 0; i < stages; ++i) stage_rate[i] = rate(stage_x[i], i);
    for (int i = 0; i < stages; ++i) {
      Vec xi = x0;
      for (int j = 0; j < stages; ++j) xi += tab.a(i, j) * stage_rate[j];
      res = std::max(res, (xi - stage_x[i]).norm());
      stage_x[i] = std::move(xi);
    }
    converged = res <= opts.tol;
  }
  if (!converged)
    throw IterationError("collocation: stage system did not converge", res);

  CollocationStep out;
  out.state = x0;
  out.stage_supply.resize(stages);
  for (int j = 0; j < stages; ++j) {
    out.state += tab.b(j) * rate(stage_x[j], j);
    const Vec y = spec.output(stage_x[j]);
    out.stage_supply(j) = y.size() > 0 ? y.dot(stage_u[j]) : 0.0;
    out.supply += h * tab.b(j) * out.stage_supply(j);
  }
  if (!finite(out.state))
    throw DivergenceError("collocation: state diverged", 0);
  return out;
}

double estimate_period(const systems::SystemSpec& spec, const Trajectory& traj) {
  const Vec x0 = traj.states.row(0).transpose();
  const Vec f0 = spec.drift(x0, 0.0);
  const double f0n = f0.norm();
  if (f0n == 0.0) throw NumericError("estimate_period: x0 is an equilibrium");
  double max_dist = 0.0;
  for (int k = 0; k < traj.length(); ++k)
    max_dist = std::max(max_dist, (traj.states.row(k).transpose() - x0).norm());
  const double radius = 0.25 * max_dist;
  double prev = 0.0;
  for (int k = 1; k < traj.length(); ++k) {
    const Vec xk = traj.states.row(k).transpose();
    const double s = (xk - x0).dot(f0) / f0n;
    if (k > 1 && prev < 0.0 && s >= 0.0 && (xk - x0).norm() < radius) {
      // linear interpolation of the crossing
      const double frac = prev / (prev - s);
      return traj.times(k - 1) + frac * (traj.times(k) - traj.times(k - 1));
    }
    prev = s;
  }
  throw NumericError("estimate_period: no return to the section found");
}

}  // namespace sphnn::integrators
