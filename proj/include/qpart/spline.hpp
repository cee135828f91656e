#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

// Natural cubic splines over a strictly increasing knot grid. Fitting solves
// the tridiagonal second-derivative system (Thomas algorithm, 64-bit). The
// map values -> coefficients is linear; fit_channel_transpose applies its
// transpose, which is what gradient propagation through the fit needs.

namespace qpart::spline {

// Piecewise cubic S(t) = a + b*d + c*d^2 + e*d^3 with d = t - knot_times[i].
// coeffs laid out as ((interval*4 + k) * channels + ch), k in {a,b,c,e}.
struct ControlPath {
  std::vector<double> knot_times;
  int channels = 0;
  std::vector<double> coeffs;

  int knots() const { return static_cast<int>(knot_times.size()); }
  int intervals() const { return knots() - 1; }
  double coef(int interval, int k, int ch) const {
    return coeffs[(static_cast<std::size_t>(interval) * 4 + k) * channels + ch];
  }
};

inline void check_times(const std::vector<double>& times) {
  if (times.size() < 2) throw std::invalid_argument("spline: need at least 2 knots");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("spline: knot times must be strictly increasing");
}

inline int locate_interval(const std::vector<double>& times, double t) {
  const double lo = times.front(), hi = times.back();
  if (t < lo || t > hi)
    throw std::out_of_range("spline: t=" + std::to_string(t) + " outside [" +
                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
  auto it = std::upper_bound(times.begin(), times.end(), t);
  int i = static_cast<int>(it - times.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(times.size()) - 2);
}

// Solve the interior second-derivative system for one channel.
// y[t] at y[t * y_stride]; coef(i,k) at coef[(i*4+k) * coef_stride].
inline void fit_channel(const std::vector<double>& times, const double* y, std::size_t y_stride,
                        double* coef, std::size_t coef_stride) {
  const int T = static_cast<int>(times.size());
  const int m = T - 2;  // interior knots
  std::vector<double> h(T - 1);
  for (int i = 0; i < T - 1; ++i) h[i] = times[i + 1] - times[i];

  std::vector<double> sigma(T, 0.0);  // natural: sigma[0] = sigma[T-1] = 0
  if (m > 0) {
    std::vector<double> diag(m), off(m > 1 ? m - 1 : 0), rhs(m);
    for (int j = 0; j < m; ++j) {
      const int i = j + 1;
      diag[j] = 2.0 * (h[i - 1] + h[i]);
      rhs[j] = 6.0 * ((y[(i + 1) * y_stride] - y[i * y_stride]) / h[i] -
                      (y[i * y_stride] - y[(i - 1) * y_stride]) / h[i - 1]);
    }
    for (int j = 0; j + 1 < m; ++j) off[j] = h[j + 1];
    // Thomas
    for (int j = 1; j < m; ++j) {
      const double w = off[j - 1] / diag[j - 1];
      diag[j] -= w * off[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    sigma[m] = rhs[m - 1] / diag[m - 1];
    for (int j = m - 2; j >= 0; --j) sigma[j + 1] = (rhs[j] - off[j] * sigma[j + 2]) / diag[j];
  }

  for (int i = 0; i < T - 1; ++i) {
    const double yi = y[i * y_stride], y1 = y[(i + 1) * y_stride];
    coef[(i * 4 + 0) * coef_stride] = yi;
    coef[(i * 4 + 1) * coef_stride] =
        (y1 - yi) / h[i] - h[i] * (2.0 * sigma[i] + sigma[i + 1]) / 6.0;
    coef[(i * 4 + 2) * coef_stride] = sigma[i] / 2.0;
    coef[(i * 4 + 3) * coef_stride] = (sigma[i + 1] - sigma[i]) / (6.0 * h[i]);
  }
}

// Transpose of the fit map: accumulate d loss/d y from d loss/d coef.
inline void fit_channel_transpose(const std::vector<double>& times, const double* gcoef,
                                  std::size_t coef_stride, double* gy, std::size_t y_stride) {
  const int T = static_cast<int>(times.size());
  const int m = T - 2;
  std::vector<double> h(T - 1);
  for (int i = 0; i < T - 1; ++i) h[i] = times[i + 1] - times[i];

  std::vector<double> gsigma(T, 0.0);
  for (int i = 0; i < T - 1; ++i) {
    const double ga = gcoef[(i * 4 + 0) * coef_stride];
    const double gb = gcoef[(i * 4 + 1) * coef_stride];
    const double gc = gcoef[(i * 4 + 2) * coef_stride];
    const double ge = gcoef[(i * 4 + 3) * coef_stride];
    gy[i * y_stride] += ga;
    gy[(i + 1) * y_stride] += gb / h[i];
    gy[i * y_stride] -= gb / h[i];
    gsigma[i] -= gb * 2.0 * h[i] / 6.0;
    gsigma[i + 1] -= gb * h[i] / 6.0;
    gsigma[i] += gc / 2.0;
    gsigma[i + 1] += ge / (6.0 * h[i]);
    gsigma[i] -= ge / (6.0 * h[i]);
  }

  if (m > 0) {
    // g_rhs = M^{-1} g_sigma_interior (M symmetric tridiagonal)
    std::vector<double> diag(m), off(m > 1 ? m - 1 : 0), rhs(m);
    for (int j = 0; j < m; ++j) {
      const int i = j + 1;
      diag[j] = 2.0 * (h[i - 1] + h[i]);
      rhs[j] = gsigma[i];
    }
    for (int j = 0; j + 1 < m; ++j) off[j] = h[j + 1];
    for (int j = 1; j < m; ++j) {
      const double w = off[j - 1] / diag[j - 1];
      diag[j] -= w * off[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    std::vector<double> grhs(m);
    grhs[m - 1] = rhs[m - 1] / diag[m - 1];
    for (int j = m - 2; j >= 0; --j) grhs[j] = (rhs[j] - off[j] * grhs[j + 1]) / diag[j];
    // rhs_j is linear in y; distribute
    for (int j = 0; j < m; ++j) {
      const int i = j + 1;
      const double gr = 6.0 * grhs[j];
      gy[(i + 1) * y_stride] += gr / h[i];
      gy[i * y_stride] -= gr * (1.0 / h[i] + 1.0 / h[i - 1]);
      gy[(i - 1) * y_stride] += gr / h[i - 1];
    }
  }
}

// values: T x D row-major.
inline ControlPath fit_natural_cubic(const std::vector<double>& values,
                                     const std::vector<double>& times, int channels) {
  check_times(times);
  const int T = static_cast<int>(times.size());
  if (channels < 1 || values.size() != static_cast<std::size_t>(T) * channels)
    throw std::invalid_argument("spline: values size does not match T x D");
  ControlPath path;
  path.knot_times = times;
  path.channels = channels;
  path.coeffs.assign(static_cast<std::size_t>(T - 1) * 4 * channels, 0.0);
  for (int d = 0; d < channels; ++d)
    fit_channel(times, values.data() + d, channels, path.coeffs.data() + d, channels);
  return path;
}

inline std::vector<double> eval(const ControlPath& path, double t) {
  const int i = locate_interval(path.knot_times, t);
  const double d = t - path.knot_times[i];
  std::vector<double> out(path.channels);
  for (int ch = 0; ch < path.channels; ++ch)
    out[ch] = path.coef(i, 0, ch) +
              d * (path.coef(i, 1, ch) + d * (path.coef(i, 2, ch) + d * path.coef(i, 3, ch)));
  return out;
}

inline std::vector<double> eval_derivative(const ControlPath& path, double t) {
  const int i = locate_interval(path.knot_times, t);
  const double d = t - path.knot_times[i];
  std::vector<double> out(path.channels);
  for (int ch = 0; ch < path.channels; ++ch)
    out[ch] =
        path.coef(i, 1, ch) + d * (2.0 * path.coef(i, 2, ch) + 3.0 * d * path.coef(i, 3, ch));
  return out;
}

inline std::vector<double> eval_second_derivative(const ControlPath& path, double t) {
  const int i = locate_interval(path.knot_times, t);
  const double d = t - path.knot_times[i];
  std::vector<double> out(path.channels);
  for (int ch = 0; ch < path.channels; ++ch)
    out[ch] = 2.0 * path.coef(i, 2, ch) + 6.0 * d * path.coef(i, 3, ch);
  return out;
}

}  // namespace qpart::spline
