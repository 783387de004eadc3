#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace mgritopt {

/// Seeded generator for uniform doubles in [0,1).
///
/// The mantissa is taken directly from the mt19937_64 bit stream instead of
/// going through std::uniform_real_distribution, whose output is
/// implementation-defined. Runs are therefore bit-identical across standard
/// libraries for a fixed seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    Eigen::VectorXd vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform();
        return v;
    }

    void discard(unsigned long long z) { gen_.discard(z); }

private:
    std::mt19937_64 gen_;
};

} // namespace mgritopt
