// Bisection on a monotone predicate.
#pragma once

#include <cmath>
#include <vector>

namespace pwlab {

struct Bracket {
  double lo = 0.0;  // predicate false
  double hi = 0.0;  // predicate true
  int steps = 0;
  std::vector<double> widths;  // hi - lo after each step, starting with the initial bracket
};

/// Shrinks [lo, hi] with pred(lo) == false and pred(hi) == true until the
/// width falls below rel_width * max(|lo|, |hi|) or max_steps is reached.
template <class Pred>
Bracket bisect(double lo, double hi, Pred&& pred, int max_steps = 200, double rel_width = 1e-15) {
  Bracket b{lo, hi, 0, {hi - lo}};
  while (b.steps < max_steps) {
    const double scale = std::max(std::abs(b.lo), std::abs(b.hi));
    if (b.hi - b.lo <= rel_width * scale) break;
    const double mid = 0.5 * (b.lo + b.hi);
    if (mid <= b.lo || mid >= b.hi) break;
    if (pred(mid))
      b.hi = mid;
    else
      b.lo = mid;
    ++b.steps;
    b.widths.push_back(b.hi - b.lo);
  }
  return b;
}

}  // namespace pwlab
