#pragma once

#include <functional>
#include <string>
#include <vector>

#include "clothdiff/nn/tensor.hpp"

namespace clothdiff::nn {

struct GradCheckReport {
  std::string name;
  double max_rel_err{0.0};
  int checks{0};
};

// Compares analytic input gradients of a deterministic scalar function
// against central finite differences (step h). With max_per_tensor > 0 only
// an evenly-strided subset of each input's elements is probed.
GradCheckReport check_scalar_fn(const std::string& name,
                                const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                std::vector<Tensor> inputs, double h = 1e-5, int max_per_tensor = 0);

struct GradCheckCase {
  std::string name;
  std::function<GradCheckReport()> run;
};

// One case per differentiable op and composite module.
std::vector<GradCheckCase> builtin_gradcheck_cases(uint64_t seed = 7);

}  // namespace clothdiff::nn
