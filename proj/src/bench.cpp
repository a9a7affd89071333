#include "reface/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace reface::metrics {

namespace {

std::vector<double> time_forwards(const train::Generator<float>& gen, int iterations, int warmup,
                                  uint64_t seed) {
    NoGradGuard no_grad;
    Rng rng(seed);
    const int res = gen.rcfg.resolution;
    Tensor<float> audio({1, gen.fcfg.t, gen.fcfg.f});
    Tensor<float> pose({1, 3});
    Tensor<float> eye({1, 2});
    Tensor<float> ref({1, 3, res, res});
    fill_uniform(audio, rng, 1.0);
    fill_uniform(pose, rng, 0.4);
    fill_uniform(ref, rng, 1.0);
    for (auto& v : eye.data()) v = float(rng.uniform(0, 1));

    for (int i = 0; i < warmup; ++i) (void)gen.forward(audio, pose, eye, ref);
    std::vector<double> ms(static_cast<size_t>(iterations));
    for (int i = 0; i < iterations; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)gen.forward(audio, pose, eye, ref);
        const auto t1 = std::chrono::steady_clock::now();
        ms[size_t(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    return ms;
}

}  // namespace

BenchReport bench_fps(train::Generator<float>& gen, const std::string& config_name,
                      int iterations, int warmup, int threads) {
    if (iterations < 1) fail_value("bench needs at least one iteration, got ", iterations);
    if (warmup < 0) fail_value("bench warmup cannot be negative");
    if (threads < 1) fail_value("bench needs at least one worker, got ", threads);

    BenchReport r;
    r.config_name = config_name;
    r.resolution = gen.rcfg.resolution;
    r.threads = threads;
    r.iterations = iterations;
    ParamList<float> all, fus, net;
    gen.collect(all);
    gen.fus.collect(fus);
    gen.net.collect(net);
    r.total_params = count_params(all);
    r.submodule_params = {{"fuser", count_params(fus)}, {"reenactor", count_params(net)}};

    std::vector<std::vector<double>> per_worker(static_cast<size_t>(threads));
    if (threads == 1) {
        per_worker[0] = time_forwards(gen, iterations, warmup, 0xBE7C0);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(size_t(threads));
        for (int i = 0; i < threads; ++i)
            workers.emplace_back([&, i] {
                per_worker[size_t(i)] =
                    time_forwards(gen, iterations, warmup, Rng::mix(0xBE7C0, uint64_t(i)));
            });
        for (auto& w : workers) w.join();
    }

    std::vector<double> pooled;
    pooled.reserve(size_t(threads) * iterations);
    for (const auto& w : per_worker) pooled.insert(pooled.end(), w.begin(), w.end());
    std::sort(pooled.begin(), pooled.end());
    double sum = 0;
    for (double v : pooled) sum += v;
    r.mean_ms = sum / double(pooled.size());
    const size_t at = std::min(pooled.size() - 1,
                               size_t(std::ceil(0.95 * double(pooled.size()))) - 1);
    r.p95_ms = pooled[at];
    r.fps = double(threads) * 1000.0 / r.mean_ms;
    return r;
}

}  // namespace reface::metrics
