#include "fluidmc/ode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fluidmc/error.hpp"

namespace fluidmc::ode {

namespace {

// Dormand & Prince (1980) tableau with Hairer's dense-output coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

}  // namespace

void DenseSolution::eval(double t, std::span<double> out, std::size_t first) const {
  if (first + out.size() > dim_) throw std::out_of_range("dense output component range");
  if (times_.size() < 2) {
    std::copy_n(y_end_.begin() + first, out.size(), out.begin());
    return;
  }
  const double span = times_.back() - times_.front();
  const double slack = 1e-9 * std::max(1.0, std::abs(span));
  if (t < times_.front() - slack || t > times_.back() + slack)
    throw std::out_of_range("dense output queried outside its interval");
  t = std::clamp(t, times_.front(), times_.back());
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t step = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  if (step >= steps()) step = steps() - 1;
  const double t0 = times_[step];
  const double h = times_[step + 1] - t0;
  const double s = (t - t0) / h;
  const double s1 = 1.0 - s;
  const double* r = coeffs_.data() + 5 * dim_ * step;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t i = first + k;
    const double r1 = r[i], r2 = r[dim_ + i], r3 = r[2 * dim_ + i], r4 = r[3 * dim_ + i], r5 = r[4 * dim_ + i];
    out[k] = r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
  }
}

std::vector<double> DenseSolution::operator()(double t) const {
  std::vector<double> out(dim_);
  eval(t, out);
  return out;
}

DenseSolution integrate(const Rhs& f, double t0, double t1, std::vector<double> y0, const Options& opts,
                        const StepHook& hook) {
  if (!(t1 >= t0)) throw std::invalid_argument("integrate: t1 must be >= t0");
  const std::size_t n = y0.size();
  const std::size_t nc = std::min(n, opts.control_dim);
  DenseSolution sol;
  sol.dim_ = n;
  sol.times_.push_back(t0);
  sol.y_end_ = y0;
  if (t1 == t0 || n == 0) return sol;

  std::vector<double> y = std::move(y0);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
  auto call = [&](double t, const std::vector<double>& yy, std::vector<double>& out) {
    f(t, yy, out);
    ++sol.stats_.rhs_evals;
  };
  auto scale = [&](double a, double b) {
    return opts.atol + opts.rtol * std::max(std::abs(a), std::abs(b));
  };

  call(t0, y, k1);

  double h = opts.initial_step;
  if (h <= 0.0) {
    double dy0 = 0.0, df0 = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      const double sk = scale(y[i], y[i]);
      dy0 += (y[i] / sk) * (y[i] / sk);
      df0 += (k1[i] / sk) * (k1[i] / sk);
    }
    dy0 = std::sqrt(dy0 / std::max<std::size_t>(nc, 1));
    df0 = std::sqrt(df0 / std::max<std::size_t>(nc, 1));
    double h0 = (dy0 < 1e-5 || df0 < 1e-5) ? 1e-6 : 0.01 * dy0 / df0;
    h0 = std::min(h0, t1 - t0);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h0 * k1[i];
    call(t0 + h0, ytmp, k2);
    double d2 = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      const double sk = scale(y[i], y[i]);
      d2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
    }
    d2 = std::sqrt(d2 / std::max<std::size_t>(nc, 1)) / h0;
    const double dm = std::max(df0, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100 * h0, h1);
  }
  h = std::min({h, opts.max_step, t1 - t0});

  double t = t0;
  bool last_rejected = false;
  while (t < t1) {
    if (sol.stats_.accepted + sol.stats_.rejected >= opts.max_steps) throw StepSizeUnderflow(t, y);
    bool last = false;
    if (t + 1.01 * h >= t1) {
      h = t1 - t;
      last = true;
    }
    if (h <= 1e-14 * std::max(1.0, std::abs(t))) throw StepSizeUnderflow(t, y);

    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    call(t + c2 * h, ytmp, k2);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    call(t + c3 * h, ytmp, k3);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    call(t + c4 * h, ytmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    call(t + c5 * h, ytmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    call(t + h, ytmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    call(t + h, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double r = e / scale(y[i], ynew[i]);
      err += r * r;
    }
    err = std::sqrt(err / std::max<std::size_t>(nc, 1));
    if (!std::isfinite(err)) {
      h *= 0.2;
      last_rejected = true;
      ++sol.stats_.rejected;
      continue;
    }

    if (err <= 1.0) {
      const std::size_t base = sol.coeffs_.size();
      sol.coeffs_.resize(base + 5 * n);
      double* r = sol.coeffs_.data() + base;
      for (std::size_t i = 0; i < n; ++i) {
        const double ydiff = ynew[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        r[i] = y[i];
        r[n + i] = ydiff;
        r[2 * n + i] = bspl;
        r[3 * n + i] = ydiff - h * k7[i] - bspl;
        r[4 * n + i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      t = last ? t1 : t + h;
      sol.times_.push_back(t);
      ++sol.stats_.accepted;
      y.swap(ynew);
      k1.swap(k7);
      StepAction action = StepAction::Continue;
      if (hook) action = hook(t, y);
      if (action == StepAction::Modified) call(t, y, k1);
      if (action == StepAction::Stop) break;

      double fac = err == 0.0 ? 10.0 : 0.9 * std::pow(err, -0.2);
      fac = std::clamp(fac, 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h = std::min(h * fac, opts.max_step);
      last_rejected = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
      ++sol.stats_.rejected;
    }
  }
  sol.y_end_ = std::move(y);
  return sol;
}

}  // namespace fluidmc::ode
