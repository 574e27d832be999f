#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcrl {

struct GradcheckSuite {
    std::string name;
    std::size_t instances = 0;
    std::size_t partials = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradcheckReport {
    std::vector<GradcheckSuite> suites;
    double seconds = 0.0;
    bool passed() const;
};

struct GradcheckOptions {
    std::size_t instances = 20;
    double eps = 1e-5;
    double tolerance = 1e-5;
    // Denominator floor of the relative error, so that partials that are
    // zero up to rounding are compared on an absolute scale.
    double floor = 1e-6;
    std::uint64_t seed = 0;
};

// Central-difference checks of the CE, weighted MMD^2 and composite
// adaptation gradients on random tiny instances.
GradcheckReport run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace mcrl
