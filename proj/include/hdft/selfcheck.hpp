#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdft/optim.hpp"

namespace hdft {

// Toy-size finite-difference checks for each differentiable component.
std::vector<std::string> gradient_suite_blocks();

double gradient_tolerance(Precision p);  // 1e-6 for F64, 1e-4 for F32

// Randomized parameters and inputs drawn from `seed`. Throws
// std::invalid_argument for a name outside gradient_suite_blocks().
GradCheckReport check_block_gradients(const std::string& block, Precision precision, std::uint64_t seed = 0);

}  // namespace hdft
