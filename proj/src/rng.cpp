#include "bgreplace/rng.hpp"

#include <random>

namespace bgreplace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t frame, std::uint64_t step) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ stage);
    h = splitmix64(h ^ frame);
    return splitmix64(h ^ step);
}

Array4<double> gaussian_noise(const Shape4& shape, std::uint64_t stream) {
    std::mt19937_64 gen(stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    Array4<double> out(shape);
    for (double& v : out.data()) v = normal(gen);
    return out;
}

}  // namespace bgreplace
