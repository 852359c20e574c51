#include "vsls/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsls {
namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

// One-sided three-point estimate, limited so the end segment stays monotone.
double edge_slope(double h0, double h1, double d0, double d1) {
  const double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (sign(m) != sign(d0)) return 0.0;
  if (sign(d0) != sign(d1) && std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
  return m;
}

}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.empty() || xs_.size() != ys_.size()) {
    throw std::invalid_argument("MonotoneCubic: need matching, non-empty knot arrays");
  }
  for (std::size_t i = 1; i < xs_.size(); ++i) {
    if (!(xs_[i] > xs_[i - 1])) throw std::invalid_argument("MonotoneCubic: xs must increase");
  }
  const std::size_t n = xs_.size();
  linear_ = n < 4;
  if (linear_) return;

  std::vector<double> h(n - 1), d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = xs_[i + 1] - xs_[i];
    d[i] = (ys_[i + 1] - ys_[i]) / h[i];
  }
  slopes_.assign(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (d[i - 1] * d[i] <= 0.0) continue;
    const double w1 = 2.0 * h[i] + h[i - 1];
    const double w2 = h[i] + 2.0 * h[i - 1];
    slopes_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
  }
  slopes_[0] = edge_slope(h[0], h[1], d[0], d[1]);
  slopes_[n - 1] = edge_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
}

double MonotoneCubic::eval_segment(std::size_t i, double x) const {
  const double x0 = xs_[i];
  const double h = xs_[i + 1] - x0;
  const double t = (x - x0) / h;
  if (linear_) return ys_[i] + t * (ys_[i + 1] - ys_[i]);
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * ys_[i] + h10 * h * slopes_[i] + h01 * ys_[i + 1] + h11 * h * slopes_[i + 1];
}

double MonotoneCubic::operator()(double x) const {
  if (x <= xs_.front()) return ys_.front();
  if (x >= xs_.back()) return ys_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const auto i = static_cast<std::size_t>(it - xs_.begin()) - 1;
  if (x == xs_[i]) return ys_[i];
  return eval_segment(i, x);
}

std::vector<double> MonotoneCubic::evaluate_integers(std::int64_t n) const {
  std::vector<double> out(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  std::size_t seg = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    if (x <= xs_.front()) {
      out[i] = ys_.front();
      continue;
    }
    if (x >= xs_.back()) {
      out[i] = ys_.back();
      continue;
    }
    while (xs_[seg + 1] <= x) ++seg;
    out[i] = x == xs_[seg] ? ys_[seg] : eval_segment(seg, x);
  }
  return out;
}

}  // namespace vsls
