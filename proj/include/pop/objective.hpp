#pragma once

#include <functional>
#include <vector>

#include "pop/prior.hpp"

namespace pop {

// Type-erased objective so episodes and baseline runners serve prior samples
// and analytic benchmarks through one interface. Views borrow the wrapped
// function; keep it alive for the lifetime of the view.
struct Objective {
  i64 D = 0;
  std::vector<double> lo, hi;  // domain box
  std::function<double(const double*)> eval;                  // y = f(x)
  std::function<double(const double*, double*)> eval_grad;    // y; fills g[D]

  i64 dim() const { return D; }
};

inline Objective objective_of(const SampledFunction& f) {
  Objective o;
  o.D = f.dim();
  o.lo = f.box_lo;
  o.hi = f.box_hi;
  o.eval = [&f](const double* x) { return f.evaluate(x); };
  o.eval_grad = [&f](const double* x, double* g) { return f.eval_grad(x, g); };
  return o;
}

inline std::vector<Objective> objectives_of(const std::vector<SampledFunction>& fs) {
  std::vector<Objective> out;
  out.reserve(fs.size());
  for (const auto& f : fs) out.push_back(objective_of(f));
  return out;
}

}  // namespace pop
