#include "photocorr/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "photocorr/rng.hpp"

namespace photocorr {

namespace {

constexpr int kMaxIterations = 10'000;
constexpr double kRelTolerance = 1e-10;
constexpr int kRestarts = 3;
constexpr int kMaxPolishIterations = 200;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Bins selected for fitting, with the 3-point Gauss-Legendre nodes used to
// average the model over each bin.
struct Binned {
  std::vector<double> centers;
  std::vector<double> counts;
  std::vector<double> sqrt_weights;  // 1/sqrt(max(n, 1))
  double width = 1.0;
};

Binned select_bins(const CorrelationHistogram& hist, std::optional<FitRange> range) {
  Binned b;
  b.width = static_cast<double>(hist.spec.bin_width_ps());
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const double c = hist.spec.bin_center_ps(i);
    if (range && (c < range->min_ps || c >= range->max_ps)) continue;
    const auto n = static_cast<double>(hist.counts[i]);
    b.centers.push_back(c);
    b.counts.push_back(n);
    b.sqrt_weights.push_back(1.0 / std::sqrt(std::max(n, 1.0)));
  }
  return b;
}

template <typename F>
std::vector<double> averaged(const Binned& b, F&& model) {
  static const double kNode = std::sqrt(3.0 / 5.0) / 2.0;
  std::vector<double> out(b.centers.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = b.centers[i];
    out[i] = (5.0 * model(c - kNode * b.width) + 8.0 * model(c) +
              5.0 * model(c + kNode * b.width)) /
             18.0;
  }
  return out;
}

using Vec = std::vector<double>;

struct Problem {
  std::string model;
  std::vector<std::string> names;
  Vec lower;
  Vec upper;
  Vec start;
  Vec scale;
  std::function<Vec(const Vec&)> predict;
  const Binned* data = nullptr;
};

Vec residuals(const Problem& p, const Vec& x) {
  const Vec pred = p.predict(x);
  Vec r(pred.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = (pred[i] - p.data->counts[i]) * p.data->sqrt_weights[i];
  }
  return r;
}

double objective(const Problem& p, const Vec& x) {
  const Vec r = residuals(p, x);
  double s = 0.0;
  for (const double v : r) s += v * v;
  return std::isfinite(s) ? s : kInf;
}

Vec clamp(const Problem& p, Vec x) {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], p.lower[j], p.upper[j]);
  return x;
}

bool converged_relative(double before, double after) {
  return std::abs(before - after) <= kRelTolerance * std::max(std::abs(after), 1e-300);
}

struct Search {
  Vec x;
  double f = kInf;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead in coordinates scaled by p.scale; vertices are projected onto
// the bounds.
Search nelder_mead(const Problem& p, const Vec& x0, double step, int budget) {
  const std::size_t n = x0.size();
  std::vector<Vec> simplex(n + 1, clamp(p, x0));
  for (std::size_t j = 0; j < n; ++j) {
    Vec v = x0;
    v[j] += step * p.scale[j];
    v = clamp(p, v);
    if (v[j] == simplex[0][j]) v[j] = std::clamp(x0[j] - step * p.scale[j], p.lower[j], p.upper[j]);
    simplex[j + 1] = v;
  }
  Vec f(n + 1);
  for (std::size_t i = 0; i <= n; ++i) f[i] = objective(p, simplex[i]);

  Search s;
  std::vector<std::size_t> order(n + 1);
  while (s.iterations < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] < f[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];
    if (std::isfinite(f[worst]) &&
        f[worst] - f[best] <= kRelTolerance * std::max(std::abs(f[best]), 1e-300)) {
      s.converged = true;
      break;
    }
    ++s.iterations;

    Vec centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
    }
    const auto along = [&](double coef) {
      Vec v(n);
      for (std::size_t j = 0; j < n; ++j) {
        v[j] = centroid[j] + coef * (simplex[worst][j] - centroid[j]);
      }
      return clamp(p, v);
    };

    const Vec reflected = along(-1.0);
    const double fr = objective(p, reflected);
    if (fr < f[best]) {
      const Vec expanded = along(-2.0);
      const double fe = objective(p, expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        f[worst] = fe;
      } else {
        simplex[worst] = reflected;
        f[worst] = fr;
      }
      continue;
    }
    if (fr < f[second]) {
      simplex[worst] = reflected;
      f[worst] = fr;
      continue;
    }
    const bool outside = fr < f[worst];
    const Vec contracted = along(outside ? -0.5 : 0.5);
    const double fc = objective(p, contracted);
    if (fc < (outside ? fr : f[worst])) {
      simplex[worst] = contracted;
      f[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) {
        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
      }
      simplex[i] = clamp(p, simplex[i]);
      f[i] = objective(p, simplex[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  s.x = simplex[best];
  s.f = f[best];
  return s;
}

bool at_lower(const Problem& p, const Vec& x, std::size_t j) {
  return x[j] <= p.lower[j] + 1e-12 * std::max(std::abs(p.lower[j]), p.scale[j]);
}
bool at_upper(const Problem& p, const Vec& x, std::size_t j) {
  return x[j] >= p.upper[j] - 1e-12 * std::max(std::abs(p.upper[j]), p.scale[j]);
}

// Finite-difference Jacobian of the weighted residuals; central where the
// bounds allow, one-sided otherwise.
Eigen::MatrixXd jacobian(const Problem& p, const Vec& x) {
  const std::size_t n = x.size();
  const std::size_t m = p.data->counts.size();
  Eigen::MatrixXd J(m, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(std::abs(x[j]), p.scale[j]);
    Vec xp = x;
    Vec xm = x;
    double span = 0.0;
    if (x[j] + h <= p.upper[j]) {
      xp[j] = x[j] + h;
      span += h;
    }
    if (x[j] - h >= p.lower[j]) {
      xm[j] = x[j] - h;
      span += h;
    }
    if (span == 0.0) {
      J.col(j).setZero();
      continue;
    }
    const Vec rp = residuals(p, xp);
    const Vec rm = residuals(p, xm);
    for (std::size_t i = 0; i < m; ++i) J(static_cast<Eigen::Index>(i), j) = (rp[i] - rm[i]) / span;
  }
  return J;
}

Eigen::VectorXd as_eigen(const Vec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Levenberg-Marquardt polish with bound-active parameters held in place.
Search polish(const Problem& p, Search s) {
  double lambda = 1e-3;
  const std::size_t n = s.x.size();
  for (int it = 0; it < kMaxPolishIterations; ++it) {
    const Eigen::MatrixXd J = jacobian(p, s.x);
    const Eigen::VectorXd r = as_eigen(residuals(p, s.x));
    const Eigen::VectorXd g = J.transpose() * r;
    std::vector<bool> active(n, false);
    for (std::size_t j = 0; j < n; ++j) {
      active[j] = (at_lower(p, s.x, j) && g[static_cast<Eigen::Index>(j)] > 0.0) ||
                  (at_upper(p, s.x, j) && g[static_cast<Eigen::Index>(j)] < 0.0);
    }
    Eigen::MatrixXd H = J.transpose() * J;
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j]) continue;
      const auto k = static_cast<Eigen::Index>(j);
      H.row(k).setZero();
      H.col(k).setZero();
      H(k, k) = 1.0;
    }
    Eigen::VectorXd rhs = -g;
    for (std::size_t j = 0; j < n; ++j) {
      if (active[j]) rhs[static_cast<Eigen::Index>(j)] = 0.0;
    }

    bool accepted = false;
    double f_new = s.f;
    while (lambda < 1e12) {
      Eigen::MatrixXd A = H;
      for (Eigen::Index k = 0; k < A.rows(); ++k) A(k, k) += lambda * std::max(H(k, k), 1e-30);
      const Eigen::VectorXd delta = A.ldlt().solve(rhs);
      Vec trial = s.x;
      for (std::size_t j = 0; j < n; ++j) trial[j] += delta[static_cast<Eigen::Index>(j)];
      trial = clamp(p, trial);
      f_new = objective(p, trial);
      if (f_new < s.f) {
        accepted = true;
        const double before = s.f;
        s.x = trial;
        s.f = f_new;
        lambda = std::max(lambda / 10.0, 1e-12);
        ++s.iterations;
        if (converged_relative(before, f_new)) {
          s.converged = true;
          return s;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent step exists at any damping: a stationary point.
      s.converged = true;
      return s;
    }
  }
  return s;
}

FitResult solve(const Problem& p, std::map<std::string, double> fixed = {}) {
  const std::size_t n = p.start.size();
  Search best = nelder_mead(p, clamp(p, p.start), 0.1, kMaxIterations);
  int iterations = best.iterations;
  bool converged = best.converged;

  Engine jitter(derive_seed(0x5eedf17u, n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < kRestarts && iterations < kMaxIterations; ++k) {
    Vec x0 = best.x;
    for (std::size_t j = 0; j < n; ++j) x0[j] += 0.05 * p.scale[j] * gauss(jitter);
    Search s = nelder_mead(p, clamp(p, x0), 0.05, kMaxIterations - iterations);
    iterations += s.iterations;
    const double before = best.f;
    if (s.f < best.f) {
      best = s;
      converged = s.converged;
    }
    if (converged_relative(before, best.f)) break;
  }

  Search polished = polish(p, best);
  iterations += polished.iterations;
  converged = converged || polished.converged;

  FitResult r;
  r.model = p.model;
  r.fixed = std::move(fixed);
  r.chi2 = polished.f;
  r.dof = static_cast<int>(p.data->counts.size()) - static_cast<int>(n);
  r.chi2_per_dof = r.dof > 0 ? r.chi2 / r.dof : 0.0;
  r.n_iterations = iterations;
  r.converged = converged && std::isfinite(r.chi2);

  // Covariance from the Gauss-Newton normal matrix; columns the data cannot
  // constrain get infinite errors.
  const Eigen::MatrixXd J = jacobian(p, polished.x);
  std::vector<Eigen::Index> usable;
  double max_norm = 0.0;
  for (Eigen::Index j = 0; j < J.cols(); ++j) max_norm = std::max(max_norm, J.col(j).norm());
  for (Eigen::Index j = 0; j < J.cols(); ++j) {
    if (J.col(j).norm() > 1e-12 * max_norm && max_norm > 0.0) usable.push_back(j);
  }
  Vec errors(n, kInf);
  if (!usable.empty() && r.dof > 0) {
    Eigen::MatrixXd Js(J.rows(), static_cast<Eigen::Index>(usable.size()));
    Eigen::VectorXd norms(Js.cols());
    for (Eigen::Index k = 0; k < Js.cols(); ++k) {
      norms[k] = J.col(usable[static_cast<std::size_t>(k)]).norm();
      Js.col(k) = J.col(usable[static_cast<std::size_t>(k)]) / norms[k];
    }
    const Eigen::MatrixXd H = Js.transpose() * Js;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
    if (lu.isInvertible()) {
      const Eigen::MatrixXd cov = lu.inverse();
      for (Eigen::Index k = 0; k < Js.cols(); ++k) {
        const double var = cov(k, k) * r.chi2_per_dof;
        errors[static_cast<std::size_t>(usable[static_cast<std::size_t>(k)])] =
            var >= 0.0 ? std::sqrt(var) / norms[k] : kInf;
      }
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    r.parameters[p.names[j]] = polished.x[j];
    r.std_errors[p.names[j]] = errors[j];
    if (p.lower[j] != p.upper[j] && (at_lower(p, polished.x, j) || at_upper(p, polished.x, j))) {
      r.boundary_hits.push_back(p.names[j]);
    }
  }
  return r;
}

void require_populated(const Binned& b) {
  const auto filled = std::count_if(b.counts.begin(), b.counts.end(), [](double c) { return c > 0; });
  if (filled < 10) throw std::invalid_argument("fewer than 10 populated bins in fit range");
}

// Slope of log(counts) on [t_lo, t_hi) by ordinary regression; nullopt when
// too few populated bins.
std::optional<double> log_slope(const Binned& b, double t_lo, double t_hi, double offset = 0.0) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < b.centers.size(); ++i) {
    const double t = b.centers[i];
    const double y = b.counts[i] - offset;
    if (t < t_lo || t >= t_hi || y <= 0.0) continue;
    const double ly = std::log(y);
    sx += t;
    sy += ly;
    sxx += t * t;
    sxy += t * ly;
    ++n;
  }
  if (n < 3) return std::nullopt;
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / denom;
}

double sum_between(const Binned& b, double lo, double hi) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.centers.size(); ++i) {
    if (b.centers[i] >= lo && b.centers[i] < hi) s += b.counts[i];
  }
  return s;
}

int peaks_needed(const HistogramSpec& spec, double t_rep) {
  const double reach = std::max(std::abs(static_cast<double>(spec.delay_min_ps())),
                                std::abs(static_cast<double>(spec.delay_max_ps())));
  return static_cast<int>(std::ceil(reach / t_rep)) + 2;
}

void require_peaks(const CorrelationHistogram& h, double t_rep, int n) {
  if (!(t_rep > 0.0)) throw std::invalid_argument("t_rep_ps must be positive");
  if (static_cast<double>(h.spec.delay_min_ps()) > -n * t_rep ||
      static_cast<double>(h.spec.delay_max_ps()) < n * t_rep) {
    throw std::invalid_argument("histogram must span the central " + std::to_string(2 * n + 1) +
                                " peaks");
  }
}

struct PeakInit {
  double amplitude;
  double tau1;
  double side_area;
};

// Amplitude and tau1 guesses from the |n| >= 2 peaks and the falling flank of
// the first side peak.
PeakInit peak_init(const Binned& b, double t_rep, double sigma, int n_max) {
  double side = 0.0;
  int count = 0;
  for (int n = 2; n <= n_max; ++n) {
    for (const int s : {-1, 1}) {
      const double c = s * n * t_rep;
      const double lo = c - t_rep / 2.0;
      const double hi = c + t_rep / 2.0;
      if (lo < b.centers.front() || hi > b.centers.back() + b.width) continue;
      side += sum_between(b, lo, hi);
      ++count;
    }
  }
  side = count > 0 ? side / count : sum_between(b, t_rep / 2.0, 1.5 * t_rep);
  double tau1 = t_rep / 8.0;
  const double flank_lo = t_rep + 3.0 * sigma + b.width;
  if (const auto slope = log_slope(b, flank_lo, t_rep + t_rep / 4.0); slope && *slope < 0.0) {
    tau1 = std::clamp(-1.0 / *slope, t_rep / 200.0, 2.0 * t_rep);
  }
  const double amplitude = std::max(side * b.width / (2.0 * tau1), 1e-6);
  return {amplitude, tau1, side};
}

}  // namespace

nlohmann::json to_json(const FitResult& r) {
  using nlohmann::json;
  const auto number = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json params = json::object();
  json errors = json::object();
  for (const auto& [k, v] : r.parameters) params[k] = number(v);
  for (const auto& [k, v] : r.std_errors) errors[k] = number(v);
  json fixed = json::object();
  for (const auto& [k, v] : r.fixed) fixed[k] = number(v);
  return json{{"model", r.model},
              {"parameters", params},
              {"std_errors", errors},
              {"fixed", fixed},
              {"chi2", number(r.chi2)},
              {"dof", r.dof},
              {"chi2_per_dof", number(r.chi2_per_dof)},
              {"n_iterations", r.n_iterations},
              {"converged", r.converged},
              {"boundary_hits", r.boundary_hits}};
}

void write_fit_json(const FitResult& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << to_json(r).dump(2) << '\n';
}

double weighted_chi2(const CorrelationHistogram& hist, std::span<const double> expected,
                     std::optional<FitRange> range) {
  if (expected.size() != hist.counts.size()) {
    throw std::invalid_argument("expected values must match the histogram bins");
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const double c = hist.spec.bin_center_ps(i);
    if (range && (c < range->min_ps || c >= range->max_ps)) continue;
    const auto n = static_cast<double>(hist.counts[i]);
    const double d = expected[i] - n;
    chi2 += d * d / std::max(n, 1.0);
  }
  return chi2;
}

namespace {

double periodic_decay(double t, double tau, double t0, double sigma, double t_rep) {
  double v = exp_gauss_decay(t - t0, tau, sigma);
  if (t_rep > 0.0) {
    // One later pulse (jitter spill) and enough earlier ones for e^{-kT/tau}
    // to fall below double precision.
    v += exp_gauss_decay(t - t0 - t_rep, tau, sigma);
    const int k_max = std::min(1000, static_cast<int>(std::ceil(40.0 * tau / t_rep)) + 1);
    for (int k = 1; k <= k_max; ++k) v += exp_gauss_decay(t - t0 + k * t_rep, tau, sigma);
  }
  return v;
}

}  // namespace

std::vector<double> lifetime_expected(const HistogramSpec& spec, double amplitude, double tau_ps,
                                      double t0_ps, double baseline, double irf_fwhm_ps,
                                      double t_rep_ps) {
  const double sigma = sigma_from_fwhm(irf_fwhm_ps);
  return bin_average(spec, [&](double t) {
    return amplitude * periodic_decay(t, tau_ps, t0_ps, sigma, t_rep_ps) + baseline;
  });
}

FitResult fit_lifetime(const CorrelationHistogram& decay, double irf_fwhm_ps,
                       std::optional<FitRange> range, double t_rep_ps) {
  if (!(irf_fwhm_ps >= 0.0)) throw std::invalid_argument("irf_fwhm_ps must be non-negative");
  if (t_rep_ps < 0.0) throw std::invalid_argument("t_rep_ps must be non-negative");
  const Binned b = select_bins(decay, range);
  require_populated(b);
  const double sigma = sigma_from_fwhm(irf_fwhm_ps);

  const auto peak = static_cast<std::size_t>(
      std::max_element(b.counts.begin(), b.counts.end()) - b.counts.begin());
  std::vector<double> sorted = b.counts;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 10, sorted.end());
  const double floor = sorted[sorted.size() / 10];
  const double t_peak = b.centers[peak];
  const double span = b.centers.back() - b.centers.front() + b.width;

  double tau = span / 5.0;
  {
    // Regress over the flank down to a tenth of the peak above the floor.
    const double height = b.counts[peak] - floor;
    double t_end = b.centers.back() + b.width;
    for (std::size_t i = peak; i < b.counts.size(); ++i) {
      if (b.counts[i] - floor < 0.1 * height) {
        t_end = b.centers[i];
        break;
      }
    }
    if (const auto slope = log_slope(b, t_peak + 3.0 * sigma, t_end, floor); slope && *slope < 0) {
      tau = -1.0 / *slope;
    }
  }

  Problem p;
  p.model = "lifetime";
  p.names = {"amplitude", "tau_ps", "t0_ps", "baseline"};
  const double amp0 = std::max(b.counts[peak] - floor, 1.0);
  p.start = {amp0, tau, t_peak - sigma, floor};
  p.lower = {0.0, b.width / 10.0, b.centers.front() - span, 0.0};
  p.upper = {kInf, 100.0 * span, b.centers.back() + b.width, kInf};
  p.scale = {amp0, tau, std::max({sigma, b.width, tau / 20.0}), std::max(floor, 1.0)};
  p.data = &b;
  p.predict = [&](const Vec& x) {
    return averaged(b, [&](double t) {
      return x[0] * periodic_decay(t, x[1], x[2], sigma, t_rep_ps) + x[3];
    });
  };
  return solve(p);
}

FitResult fit_hbt(const CorrelationHistogram& hist, double t_rep_ps, double irf_fwhm_ps) {
  require_peaks(hist, t_rep_ps, 2);
  const Binned b = select_bins(hist, std::nullopt);
  require_populated(b);
  const double sigma = sigma_from_fwhm(irf_fwhm_ps);
  const int n_side = peaks_needed(hist.spec, t_rep_ps);
  const PeakInit init = peak_init(b, t_rep_ps, sigma, n_side);
  const double central = sum_between(b, -t_rep_ps / 2.0, t_rep_ps / 2.0);
  const double g2_0 = init.side_area > 0.0 ? std::clamp(central / init.side_area, 0.0, 2.0) : 0.1;

  Problem p;
  p.model = "hbt";
  p.names = {"amplitude", "g2_zero", "tau1_ps"};
  p.start = {init.amplitude, g2_0, init.tau1};
  p.lower = {0.0, 0.0, b.width / 10.0};
  p.upper = {kInf, 10.0, 4.0 * t_rep_ps};
  p.scale = {init.amplitude, std::max(g2_0, 0.05), init.tau1};
  p.data = &b;
  p.predict = [&](const Vec& x) {
    HbtModelParams m{x[0], x[1], x[2], t_rep_ps, n_side, irf_fwhm_ps};
    return averaged(b, [&](double t) { return hbt_model(t, m); });
  };
  return solve(p);
}

FitResult fit_hom(const CorrelationHistogram& co, double t_rep_ps, double irf_fwhm_ps,
                  std::optional<double> fixed_tau1_ps) {
  require_peaks(co, t_rep_ps, 2);
  const Binned b = select_bins(co, std::nullopt);
  require_populated(b);
  const double sigma = sigma_from_fwhm(irf_fwhm_ps);
  const int n_side = peaks_needed(co.spec, t_rep_ps);
  PeakInit init = peak_init(b, t_rep_ps, sigma, n_side);
  if (fixed_tau1_ps) {
    if (!(*fixed_tau1_ps > 0.0)) throw std::invalid_argument("fixed tau1 must be positive");
    init.tau1 = *fixed_tau1_ps;
    init.amplitude = std::max(init.side_area * b.width / (2.0 * init.tau1), 1e-6);
  }

  // Dip depth and half-depth width against the dip-free model.
  HomModelParams flat{init.amplitude, init.tau1, t_rep_ps, 0.0, 1.0, irf_fwhm_ps, n_side};
  const double pool = std::max(b.width, 2.0 * sigma);
  const auto deficit = [&](double t) {
    double data = 0.0;
    double model = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < b.centers.size(); ++i) {
      if (std::abs(b.centers[i] - t) > pool / 2.0) continue;
      data += b.counts[i];
      model += hom_cross_model(b.centers[i], flat);
      ++n;
    }
    return n > 0 ? (model - data) / n : 0.0;
  };
  const double d0 = deficit(0.0);
  const double v0 = std::clamp(d0 / (0.5 * init.amplitude), 0.0, 1.0);
  double tau_q = 2.0 * pool;
  if (d0 > 0.0) {
    for (double t = b.width; t < t_rep_ps / 4.0; t += b.width) {
      if (deficit(t) + deficit(-t) < d0) {
        tau_q = std::max(t / std::numbers::ln2, b.width);
        break;
      }
    }
  }
  const double tau_dip0 =
      tau_q < init.tau1 ? std::clamp(1.0 / (1.0 / tau_q - 1.0 / init.tau1), 1.0, t_rep_ps / 2.0)
                        : t_rep_ps / 10.0;

  Problem p;
  p.model = "hom";
  p.data = &b;
  std::map<std::string, double> fixed;
  if (fixed_tau1_ps) {
    fixed["tau1_ps"] = *fixed_tau1_ps;
    p.names = {"amplitude", "dip_contrast", "tau_dip_ps"};
    p.start = {init.amplitude, v0, tau_dip0};
    p.lower = {0.0, 0.0, 1.0};
    p.upper = {kInf, 1.0, t_rep_ps};
    p.scale = {init.amplitude, 0.2, tau_dip0};
  } else {
    p.names = {"amplitude", "dip_contrast", "tau_dip_ps", "tau1_ps"};
    p.start = {init.amplitude, v0, tau_dip0, init.tau1};
    p.lower = {0.0, 0.0, 1.0, b.width / 10.0};
    p.upper = {kInf, 1.0, t_rep_ps, 4.0 * t_rep_ps};
    p.scale = {init.amplitude, 0.2, tau_dip0, init.tau1};
  }
  const double tau1_fixed = fixed_tau1_ps.value_or(0.0);
  const bool free_tau1 = !fixed_tau1_ps;
  p.predict = [&](const Vec& x) {
    HomModelParams m{x[0], free_tau1 ? x[3] : tau1_fixed, t_rep_ps, x[1], x[2], irf_fwhm_ps,
                     n_side};
    return averaged(b, [&](double t) { return hom_co_model(t, m); });
  };
  return solve(p, std::move(fixed));
}

FitResult fit_amplitude(const CorrelationHistogram& hist, std::span<const double> shape,
                        std::optional<FitRange> range) {
  if (shape.size() != hist.counts.size()) {
    throw std::invalid_argument("shape must match the histogram bins");
  }
  double sws = 0.0;
  double swn = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const double c = hist.spec.bin_center_ps(i);
    if (range && (c < range->min_ps || c >= range->max_ps)) continue;
    const auto n = static_cast<double>(hist.counts[i]);
    const double w = 1.0 / std::max(n, 1.0);
    sws += w * shape[i] * shape[i];
    swn += w * shape[i] * n;
    ++used;
  }
  if (!(sws > 0.0)) throw std::invalid_argument("shape is zero over the fit range");
  FitResult r;
  r.model = "amplitude";
  const double a = swn / sws;
  std::vector<double> expected(shape.begin(), shape.end());
  for (double& e : expected) e *= a;
  r.chi2 = weighted_chi2(hist, expected, range);
  r.dof = used - 1;
  r.chi2_per_dof = r.dof > 0 ? r.chi2 / r.dof : 0.0;
  r.parameters["amplitude"] = a;
  r.std_errors["amplitude"] = r.dof > 0 ? std::sqrt(r.chi2_per_dof / sws) : kInf;
  r.n_iterations = 1;
  r.converged = true;
  return r;
}

FitResult fit_hom_amplitude(const CorrelationHistogram& co, const HomModelParams& shape) {
  HomModelParams unit = shape;
  unit.amplitude = 1.0;
  unit.n_side_peaks = std::max(unit.n_side_peaks, peaks_needed(co.spec, unit.t_rep_ps));
  unit.validate();
  const std::vector<double> s = bin_average(co.spec, [&](double t) { return hom_co_model(t, unit); });
  FitResult r = fit_amplitude(co, s);
  r.model = "hom_amplitude";
  r.fixed = {{"tau1_ps", unit.tau1_ps},
             {"t_rep_ps", unit.t_rep_ps},
             {"dip_contrast", unit.dip_contrast},
             {"tau_dip_ps", unit.tau_dip_ps},
             {"irf_fwhm_ps", unit.irf_fwhm_ps}};
  return r;
}

}  // namespace photocorr
