#pragma once

#include "vdr/types.hpp"

// The two three-step episodes of the three-state example, recorded under the
// fully aliased space (observation 0) and after the split of 0 into 1 and 2
// that isolates s3.
namespace fixture {

inline constexpr vdr::ObsId kAliased = 0, kChild1 = 1, kChild2 = 2;

inline vdr::Dataset table_states() {
    return {{{0, 0, 0.7, false, 0}, {0, 1, -0.7, false, 2}, {0, 0, 1.0, true, 1}},
            {{0, 0, 0.7, false, 0}, {0, 0, -0.5, false, 2}, {0, 0, 0.7, true, 0}}};
}

inline vdr::Dataset table_aliased() { return table_states(); }

inline vdr::Dataset table_split() {
    return {{{1, 0, 0.7, false, 0}, {2, 1, -0.7, false, 2}, {1, 0, 1.0, true, 1}},
            {{1, 0, 0.7, false, 0}, {2, 0, -0.5, false, 2}, {1, 0, 0.7, true, 0}}};
}

inline vdr::SplitLabels table_labels() { return {0, 1, 2, {{1, 2, 1}, {1, 2, 1}}}; }

}  // namespace fixture
