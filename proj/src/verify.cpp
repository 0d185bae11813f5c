#include "bgreplace/verify.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "bgreplace/rng.hpp"
#include "bgreplace/rpa.hpp"
#include "bgreplace/toy_backends.hpp"

namespace bgreplace {

nlohmann::json AlignmentSweep::to_json() const {
    return {{"codec", codec},
            {"trials", trials},
            {"tolerance", tolerance},
            {"max_deviation", max_deviation},
            {"mean_deviation", mean_deviation},
            {"failures", failures},
            {"seconds", seconds},
            {"passed", passed()}};
}

AlignmentSweep verify_alignment(const std::string& codec, int trials, std::uint64_t seed, double tolerance) {
    if (codec != "toy") throw_invalid("verify-rpa: unknown codec '" + codec + "' (only 'toy' is built in)");
    if (trials < 1) throw_invalid("verify-rpa: need at least one trial");
    if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) {
        throw_invalid("verify-rpa: tolerance must be a finite non-negative number");
    }
    const auto start = std::chrono::steady_clock::now();

    AlignmentSweep out;
    out.codec = codec;
    out.trials = trials;
    out.tolerance = tolerance;
    std::mt19937_64 gen(stream_seed(seed, rng_stage::kVerify));
    std::uniform_int_distribution<std::size_t> frames(1, 3), side(4, 12);
    std::uniform_real_distribution<double> log_sigma(-5.0, -2.0), spread(0.0, 0.2), value(-0.5, 1.5);
    double sum = 0.0;
    for (int i = 0; i < trials; ++i) {
        ToyCodec toy(std::pow(10.0, log_sigma(gen)), spread(gen));
        const Shape4 shape{frames(gen), side(gen), side(gen), 3};
        Array4<double> x(shape);
        for (double& v : x.data()) v = value(gen);
        const LatentTensor x0t(std::move(x));
        const LatentTensor projected = project(x0t, toy.decode(x0t), toy);
        const double dev = max_abs_diff(projected.data(), x0t.data());
        out.max_deviation = std::max(out.max_deviation, dev);
        sum += dev;
        if (!(dev <= tolerance)) ++out.failures;
    }
    out.mean_deviation = sum / trials;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace bgreplace
