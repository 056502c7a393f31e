#pragma once

#include <cstddef>
#include <vector>

#include "core.hpp"

namespace nocutoff {

/// One clock ring of a tagged particle's jump process.
struct ChainEvent {
    double time = 0.0;
    Vec2 v_prev = Vec2::Zero();   ///< state just before the event
    Vec2 partner = Vec2::Zero();  ///< partner velocity drawn at the event
    double z = 0.0;               ///< substitution coordinate, theta = vartheta(z)
    double u = 0.0;               ///< thinning coordinate
    bool accepted = false;
};

/// Event log of a single tagged particle: rejected rings are kept so that the
/// log is the full Poisson clock of rate lambda_{eps,zeta}.
struct JumpChain {
    Vec2 v0 = Vec2::Zero();
    std::vector<ChainEvent> events;
};

}  // namespace nocutoff
