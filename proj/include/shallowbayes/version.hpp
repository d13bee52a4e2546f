#pragma once

namespace shallowbayes {

inline constexpr const char* kVersion = "0.1.0";
// Bumped whenever the spectral-table estimator changes; stale caches are rebuilt.
inline constexpr const char* kTableFormat = "table-v1";

}  // namespace shallowbayes
