#include "elastocal/serial_models.hpp"

#include <stdexcept>
#include <string>

namespace elastocal {

MsaModel msa_from_vjm(const VjmModel& model, const Eigen::VectorXd& q, const ParamVector& pi) {
  const std::size_t n = model.chain.joint_count();
  const SerialFrames f = serial_frames(model.chain, q, pi);
  MsaModel m;
  auto beam_props = [&](const LinkSpring& s, std::size_t link, const Vector3& end) {
    if (!s.beam) {
      throw std::invalid_argument("link " + std::to_string(link + 1) + ": MSA equivalent needs beam properties");
    }
    return s.beam->with_length((end - f.joint[link].translation).norm());
  };

  // Link j (0-based) spans nodes 2j+1 and 2j+2; joint j+2 couples 2j+2 and 2j+3.
  for (std::size_t j = 0; j < n; ++j) {
    const int start = static_cast<int>(2 * j + 1);
    m.nodes.push_back({start, f.joint[j]});
    if (j + 1 < n) {
      m.nodes.push_back({start + 1, f.link_end[j]});
      m.beams.push_back({start, start + 1, beam_props(model.springs.links[j], j, f.link_end[j].translation)});
      m.joints.push_back({start + 1, start + 2, model.chain.joints[j + 1].axis, model.springs.joints[j + 1]});
    }
  }
  m.support = {1, model.chain.joints[0].axis, model.springs.joints[0]};
  const int last = static_cast<int>(2 * n - 1);
  if (model.springs.tool) {
    m.nodes.push_back({last + 1, f.tool});
    m.beams.push_back({last, last + 1, beam_props(*model.springs.tool, n - 1, f.tool.translation)});
    m.external = last + 1;
  } else {
    m.external = last;
    m.tool_offset = f.tool.translation - f.joint[n - 1].translation;
  }
  return m;
}

}  // namespace elastocal
