#pragma once

#include <Eigen/Core>

#include "elastocal/msa.hpp"
#include "elastocal/vjm.hpp"

namespace elastocal {

/// MSA model equivalent to a VJM model at one pose: one beam per link
/// spring (and for the tool segment when present), joint 1 as the elastic
/// support, the other joints as elastic joints. Without a tool spring the
/// external node is the far side of the last joint and the reference point
/// is reached through a rigid offset. Link springs must be beams.
MsaModel msa_from_vjm(const VjmModel& model, const Eigen::VectorXd& q, const ParamVector& pi);

}  // namespace elastocal
