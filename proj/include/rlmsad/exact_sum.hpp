#ifndef RLMSAD_EXACT_SUM_HPP_
#define RLMSAD_EXACT_SUM_HPP_

#include <cmath>
#include <vector>

namespace rlmsad {

// Shewchuk-style exact accumulation with a correctly rounded result. Two
// accumulators fed the same multiset of exact values return identical
// doubles regardless of order, which lets an episode return be compared
// bit-for-bit with r1*TP + r2*TN - r3*FP - r4*FN.
class ExactSum {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  // Adds a*b exactly: the product splits into hi + lo with fma.
  void add_product(double a, double b) {
    const double hi = a * b;
    const double lo = std::fma(a, b, -hi);
    add(hi);
    if (lo != 0.0) add(lo);
  }

  double value() const {
    if (partials_.empty()) return 0.0;
    std::size_t n = partials_.size() - 1;
    double hi = partials_[n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      const double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    // Round-half-even correction when the remaining partials push past a tie.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

  void clear() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

}  // namespace rlmsad

#endif  // RLMSAD_EXACT_SUM_HPP_
