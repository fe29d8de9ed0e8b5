#pragma once

#include <string>
#include <vector>

#include "elastocal/chain.hpp"

namespace elastocal {

/// One eliminated parameter and the rule that removed it.
struct Elimination {
  std::string param;
  std::string rule;
  std::string detail;
};

struct ReductionResult {
  ChainSpec chain;
  std::vector<Elimination> removed;
};

/// Eliminates non-identifiable and semi-identifiable parameters for point
/// (position-only) measurements.
///
/// Rules, applied on the nominal geometry (q = 0, zero deviations):
///  - perpendicular-axes: e_j ⊥ e_{j-1}, drop the rotation of link j-1 about e_j.
///  - parallel-axes: e_j ∥ e_{j-1}, drop one translation orthogonal to the
///    axes from the nearest preceding link that has one (smallest nominal wins).
///  - first-joint-boundary / base-absorbed: a base block with free translations
///    and rotations absorbs the first joint offset, robot elements ahead of
///    joint 1, and link-1 terms that commute with joint 1.
///  - last-joint-boundary / tool-absorbed / last-joint-axial: tool blocks with
///    free xyz translations absorb the last joint offset, every term after the
///    last joint, and link terms that commute with the trailing run of joints
///    parallel to the last one (base translations too when every joint is
///    parallel).
///  - tool-rotation: rotations inside tool blocks are never observable from
///    point measurements.
///
/// Eliminated deviation elements with zero nominal are dropped; others become
/// constants. Eliminated joint offsets are unbound.
ReductionResult reduce_model(const ChainSpec& chain);

}  // namespace elastocal
