#pragma once

#include "clothdiff/nn/gradcheck.hpp"

namespace clothdiff {

// End-to-end finite-difference checks of the full denoisers on a 16-vertex
// miniature cloth. Probes the noisy input and a strided subset of every
// parameter tensor.
nn::GradCheckReport gradcheck_dpm(uint64_t seed = 3, int max_per_tensor = 6);
nn::GradCheckReport gradcheck_ddm(uint64_t seed = 4, int max_per_tensor = 6);

}  // namespace clothdiff
