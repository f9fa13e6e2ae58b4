/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace forestval {

// Every random draw in the library comes from an engine keyed by the master
// seed plus logical indices (stream tag, time index, cube, path ...). Nothing
// is keyed by thread identity, so serial and parallel runs coincide.
enum class Stream : std::uint64_t {
  StratifiedStates = 1,
  SolverIncrements = 2,
  StoppingPaths = 3,
  ValuationPaths = 4,
  SyntheticPanel = 5,
  MultiStart = 6,
  Generic = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, Stream tag,
                                std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(tag)));
  for (auto idx : indices) h = splitmix64(h ^ splitmix64(idx + 0x632be59bd9b4e019ULL));
  return h;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream tag,
                          std::initializer_list<std::uint64_t> indices) {
  return Engine(stream_key(seed, tag, indices));
}

}  // namespace forestval
