#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace vsls {

// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Butland
// tangents, one-sided three-point end conditions). Never overshoots the data
// between knots. Falls back to linear interpolation with fewer than four knots.
// Outside the knot range the edge values are held constant.
class MonotoneCubic {
 public:
  // xs strictly increasing, same length as ys, at least one knot.
  MonotoneCubic(std::vector<double> xs, std::vector<double> ys);

  double operator()(double x) const;

  // Values at x = 0, 1, ..., n - 1 in a single sweep.
  std::vector<double> evaluate_integers(std::int64_t n) const;

  bool is_linear() const { return linear_; }
  std::span<const double> slopes() const { return slopes_; }

 private:
  double eval_segment(std::size_t i, double x) const;

  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> slopes_;
  bool linear_ = false;
};

}  // namespace vsls
