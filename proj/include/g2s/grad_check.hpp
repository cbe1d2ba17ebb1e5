#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "g2s/autodiff.hpp"

namespace g2s::ad {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t samples_per_tensor = 64;  // all coordinates when the tensor is smaller
  std::uint64_t seed = 0;
  // Denominator floor of the relative error, so coordinates whose true
  // derivative is ~0 are judged on absolute error.
  double denom_floor = 1e-5;
  TapeOptions tape{};  // must not enable dropout
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

template <class T>
using ScalarFn = std::function<Var<T>(Tape<T>&)>;

/// Compares the tape gradient of f against central differences on a sample of
/// coordinates of every parameter. Parameter gradients are left populated with
/// the analytic result.
template <class T>
GradCheckReport grad_check(const ScalarFn<T>& f, ParamStore<T>& params, const GradCheckOptions& opts = {}) {
  if (opts.tape.train) throw Error("grad_check requires dropout disabled (tape.train = false)");
  params.zero_grad();
  {
    Tape<T> tape(opts.tape);
    tape.backward(f(tape));
  }
  auto eval = [&] {
    Tape<T> tape(opts.tape);
    return static_cast<double>(f(tape).item());
  };

  GradCheckReport rep;
  std::mt19937_64 rng(opts.seed);
  for (auto& p : params) {
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opts.samples_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.samples_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const T orig = p.value[i];
      p.value[i] = orig + static_cast<T>(opts.eps);
      const double up = eval();
      p.value[i] = orig - static_cast<T>(opts.eps);
      const double down = eval();
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.eps);
      const double analytic = static_cast<double>(p.grad[i]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.denom_floor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++rep.coordinates;
      if (!(rel <= rep.max_rel_error)) {
        rep.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        rep.worst_param = p.name;
        rep.worst_index = i;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace g2s::ad
