#pragma once

#include "vdr/policyopt/policy.hpp"
#include "vdr/types.hpp"

namespace vdr {

/// Carry a policy onto the space where `target` became two children: both
/// children inherit the parent's action distribution, the parent row is
/// dropped, and every other row is unchanged.
inline policyopt::Policy augment_policy(const policyopt::Policy& old, ObsId target, ObsId child1, ObsId child2) {
    if (!old.covers(target))
        throw InvalidArgument("policy does not cover split target " + std::to_string(target));
    policyopt::Policy out(old.num_actions());
    for (const auto& [o, l] : old.table()) {
        if (o == target) {
            out.set_logits(child1, l);
            out.set_logits(child2, l);
        } else {
            out.set_logits(o, l);
        }
    }
    return out;
}

}  // namespace vdr
