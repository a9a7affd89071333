#pragma once

#include <string>

#include "reface/metrics.hpp"
#include "reface/trainer.hpp"

namespace reface::metrics {

// Times full generator forwards (audio fusion + geometry-driven reenaction,
// including dynamic kernel generation) on synthetic inputs with gradients
// disabled. threads > 1 runs that many concurrent workers on the shared
// weights; mean/p95 are per-forward latencies pooled across workers and fps
// is the aggregate throughput (threads * 1000 / mean_ms).
BenchReport bench_fps(train::Generator<float>& gen, const std::string& config_name,
                      int iterations, int warmup, int threads = 1);

}  // namespace reface::metrics
