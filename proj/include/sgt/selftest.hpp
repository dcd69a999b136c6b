#pragma once

#include "sgt/weights.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sgt {

struct SelftestFailure {
  std::string family;
  std::size_t n = 0;
  std::string check;
  std::string detail;
};

struct SelftestSummary {
  std::uint64_t checks = 0;
  std::vector<SelftestFailure> failures;
  bool ok() const { return failures.empty(); }
};

// Exact engine against brute-force enumeration for every admissible n <= n_max:
// total weight, prefix probability of every tree, root-degree law, and the
// probability of every pointed shape H_k(T, v) that occurs.
SelftestSummary run_selftest(const std::vector<FamilySpec>& families, std::size_t n_max = 8);
std::vector<FamilySpec> selftest_families();

}  // namespace sgt
