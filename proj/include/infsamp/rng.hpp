// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file infsamp/rng.hpp
//! Reproducible random streams keyed by (master seed, purpose, index).
//---------------------------------------------------------------------------//
#ifndef INFSAMP_RNG_HPP
#define INFSAMP_RNG_HPP

#include <cstdint>
#include <random>

namespace infsamp
{

using Engine = std::mt19937_64;

//! Purpose tags keep streams for different stages of one replication apart.
enum class StreamTag : std::uint32_t
{
    population = 1,
    selection = 2,
    response = 3,
    user = 4,
};

/*!
 * Engine for stream (seed, tag, index).
 *
 * std::seed_seq has a fully specified mixing algorithm, so the result is
 * identical on every conforming platform and does not depend on the order in
 * which streams are created. Replication r always sees the same numbers no
 * matter which thread runs it.
 */
inline Engine make_engine(std::uint64_t seed,
                          StreamTag tag = StreamTag::user,
                          std::uint64_t index = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Engine(seq);
}

//! Child seed for replication `index` of a run with seed `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(master),
                      static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

//! Uniform draw on [0, 1) with 53 random bits; never returns 1.
inline double uniform01(Engine& eng)
{
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace infsamp

#endif  // INFSAMP_RNG_HPP
