#pragma once

#include <string>
#include <vector>

namespace pyrflow {

struct GradSuiteEntry {
    std::string name;
    double max_rel_err = 0.0;
    int trials = 0;
};

// Finite-difference sweep over every differentiable op and the composite
// stacks (backbone, each pyramid builder, heads, auxiliary head with its
// uncertainty, the uncertainty wrap). Each entry reports the max relative
// error across `trials` random instances.
std::vector<GradSuiteEntry> run_gradient_suite(int trials, uint64_t seed);

}  // namespace pyrflow
