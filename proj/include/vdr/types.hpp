#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vdr {

using StateId = int;
using ObsId = int;
using ActionId = int;

/// Random engine used everywhere; every stream is derived from a run seed.
using Rng = std::mt19937_64;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

struct Step {
    ObsId observation = 0;
    ActionId action = 0;
    double reward = 0.0;
    /// True on the last step of an episode (goal or horizon).
    bool done = false;
    /// Ground-truth state; only the harness and the simulated designer read it.
    std::optional<StateId> true_state;

    friend bool operator==(const Step&, const Step&) = default;
};

using Trajectory = std::vector<Step>;
using Dataset = std::vector<Trajectory>;

/// Child labels for every occurrence of a split observation.
///
/// `labels[i][t]` is 1 or 2 when step t of trajectory i carries `target`,
/// and 0 otherwise.
struct SplitLabels {
    ObsId target = 0;
    ObsId child1 = 0;
    ObsId child2 = 0;
    std::vector<std::vector<std::uint8_t>> labels;

    ObsId child(std::uint8_t label) const { return label == 2 ? child2 : child1; }

    friend bool operator==(const SplitLabels&, const SplitLabels&) = default;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for an independent substream identified by (seed, tags...).
template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
    std::uint64_t h = mix64(seed);
    ((h = mix64(h ^ static_cast<std::uint64_t>(tags))), ...);
    return h;
}

template <typename... Tags>
Rng substream(std::uint64_t seed, Tags... tags) {
    return Rng(derive_seed(seed, tags...));
}

inline double uniform01(Rng& rng) {
    // 53 random bits; avoids implementation-defined distribution behaviour.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Index drawn from unnormalized nonnegative weights.
inline std::size_t sample_categorical(const std::vector<double>& weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    return 0;
}

inline double undiscounted_return(const Trajectory& traj) {
    double g = 0.0;
    for (const auto& s : traj) g += s.reward;
    return g;
}

}  // namespace vdr
