#pragma once

#include "mixgen/embedding.hpp"

namespace mixgen {

struct KernelConfig {
    // RBF kernel; bandwidth from the median pairwise distance over the
    // pooled sets unless fixed_bandwidth > 0.
    double fixed_bandwidth = 0.0;
    double scale = 100.0;  // result multiplier for readability
};

// Unbiased MMD^2 estimator between two embedding sets, scaled by cfg.scale.
// May be slightly negative; reported as-is.
double kad(const EmbeddingSet& a, const EmbeddingSet& b, const KernelConfig& cfg = {});

// Direct double-loop reference implementation for small sets.
double mmd_bruteforce(const EmbeddingSet& a, const EmbeddingSet& b,
                      const KernelConfig& cfg = {});

}  // namespace mixgen
