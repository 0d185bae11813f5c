#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace bgreplace {

struct AlignmentSweep {
    std::string codec;
    int trials = 0;
    double tolerance = 1e-6;
    double max_deviation = 0.0;   // worst |project(x0t, decode(x0t)) - x0t| over all trials
    double mean_deviation = 0.0;  // mean of per-trial maxima
    int failures = 0;             // trials above tolerance
    double seconds = 0.0;

    bool passed() const { return failures == 0; }
    nlohmann::json to_json() const;
};

/// Randomized check of the identity-refinement property of the projection:
/// each trial draws a latent shape (1-3 frames, 4-12 cells per side), a
/// sigma_min, a codec spread and a latent x0t, then compares
/// project(x0t, decode(x0t)) against x0t. Only the "toy" codec is built in.
AlignmentSweep verify_alignment(const std::string& codec, int trials, std::uint64_t seed, double tolerance = 1e-6);

}  // namespace bgreplace
