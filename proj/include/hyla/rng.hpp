#pragma once

#include <cstdint>
#include <random>

#include "hyla/dense_array.hpp"

namespace hyla {

// The single seeded generator every stochastic routine draws from.
using Rng = std::mt19937_64;

template <class T = double>
DenseArray<T> uniform_array(Rng& rng, Shape shape, T lo, T hi) {
    DenseArray<T> out(std::move(shape));
    std::uniform_real_distribution<T> dist(lo, hi);
    for (auto& v : out.values()) v = dist(rng);
    return out;
}

template <class T = double>
DenseArray<T> normal_array(Rng& rng, Shape shape, T mean = 0, T stddev = 1) {
    DenseArray<T> out(std::move(shape));
    std::normal_distribution<T> dist(mean, stddev);
    for (auto& v : out.values()) v = dist(rng);
    return out;
}

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

} // namespace hyla
