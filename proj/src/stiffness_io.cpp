#include "elastocal/stiffness_io.hpp"

#include <cmath>
#include <string>

#include "elastocal/chain_io.hpp"
#include "elastocal/errors.hpp"

namespace elastocal {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) { throw ParseError(where + ": " + msg); }

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "non-finite number");
  return v;
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<int>();
}

char axis_label(const json& j, const std::string& where) {
  if (!j.is_string() || j.get<std::string>().size() != 1 || std::string("xyz").find(j.get<std::string>()[0]) == std::string::npos) {
    fail(where, "expected an axis label x, y or z");
  }
  return j.get<std::string>()[0];
}

BeamProperties beam_from_json(const json& j, const std::string& where, bool length_required) {
  BeamProperties p;
  p.E = number(field(j, "E", where), where + ".E");
  p.G = number(field(j, "G", where), where + ".G");
  p.S = number(field(j, "S", where), where + ".S");
  p.Iy = number(field(j, "Iy", where), where + ".Iy");
  p.Iz = number(field(j, "Iz", where), where + ".Iz");
  p.J = number(field(j, "J", where), where + ".J");
  if (length_required || j.contains("L")) p.L = number(field(j, "L", where), where + ".L");
  return p;
}

json beam_to_json(const BeamProperties& p) {
  json j{{"E", p.E}, {"G", p.G}, {"S", p.S}, {"Iy", p.Iy}, {"Iz", p.Iz}, {"J", p.J}};
  if (p.L > 0.0) j["L"] = p.L;
  return j;
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != R) fail(where, "expected " + std::to_string(R) + " rows");
  Eigen::Matrix<double, R, C> m;
  for (int r = 0; r < R; ++r) {
    if (!j[r].is_array() || j[r].size() != C) fail(where, "row " + std::to_string(r) + " needs " + std::to_string(C) + " entries");
    for (int c = 0; c < C; ++c) m(r, c) = number(j[r][c], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

template <typename M>
json matrix_to_json(const M& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Vector3 vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where, "expected [x, y, z]");
  return {number(j[0], where + "[0]"), number(j[1], where + "[1]"), number(j[2], where + "[2]")};
}

LinkSpring link_from_json(const json& j, const std::string& where) {
  LinkSpring s;
  if (j.contains("matrix")) {
    s.matrix = matrix_from_json<6, 6>(j["matrix"], where + ".matrix");
  } else {
    s.beam = beam_from_json(j, where, false);
  }
  return s;
}

json link_to_json(const LinkSpring& s) {
  if (s.beam) return beam_to_json(*s.beam);
  return json{{"matrix", matrix_to_json(s.matrix)}};
}

}  // namespace

SpringSet springs_from_json(const json& j) {
  SpringSet s;
  const json& joints = field(j, "joints", "springs");
  if (!joints.is_array()) fail("joints", "expected an array");
  for (std::size_t i = 0; i < joints.size(); ++i) s.joints.push_back(number(joints[i], "joints[" + std::to_string(i) + "]"));
  const json& links = field(j, "links", "springs");
  if (!links.is_array()) fail("links", "expected an array");
  for (std::size_t i = 0; i < links.size(); ++i) s.links.push_back(link_from_json(links[i], "links[" + std::to_string(i) + "]"));
  if (j.contains("tool") && !j["tool"].is_null()) s.tool = link_from_json(j["tool"], "tool");
  return s;
}

json springs_to_json(const SpringSet& s) {
  json links = json::array();
  for (const auto& l : s.links) links.push_back(link_to_json(l));
  json out{{"joints", s.joints}, {"links", links}};
  if (s.tool) out["tool"] = link_to_json(*s.tool);
  return out;
}

SpringSet load_springs(const std::filesystem::path& path) {
  try {
    return springs_from_json(read_json_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

MsaModel msa_from_json(const json& j) {
  MsaModel m;
  const json& nodes = field(j, "nodes", "model");
  if (!nodes.is_array()) fail("nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "nodes[" + std::to_string(i) + "]";
    MsaNode n;
    n.id = integer(field(nodes[i], "id", where), where + ".id");
    n.frame.translation = vector_from_json(field(nodes[i], "position", where), where + ".position");
    if (nodes[i].contains("rotation")) {
      n.frame.rotation = matrix_from_json<3, 3>(nodes[i]["rotation"], where + ".rotation");
      if (orthonormality_error(n.frame.rotation) > 1e-6 || n.frame.rotation.determinant() < 0.0) {
        fail(where + ".rotation", "not a rotation matrix");
      }
      n.frame.rotation = orthonormalize(n.frame.rotation);
    }
    m.nodes.push_back(n);
  }
  auto pair = [&](const json& e, const std::string& where) {
    const json& p = field(e, "nodes", where);
    if (!p.is_array() || p.size() != 2) fail(where + ".nodes", "expected [node_i, node_j]");
    return std::make_pair(integer(p[0], where + ".nodes[0]"), integer(p[1], where + ".nodes[1]"));
  };
  const json& beams = field(j, "beams", "model");
  for (std::size_t i = 0; i < beams.size(); ++i) {
    const std::string where = "beams[" + std::to_string(i) + "]";
    const auto [a, b] = pair(beams[i], where);
    m.beams.push_back({a, b, beam_from_json(beams[i], where, true)});
  }
  if (j.contains("joints")) {
    for (std::size_t i = 0; i < j["joints"].size(); ++i) {
      const std::string where = "joints[" + std::to_string(i) + "]";
      const json& e = j["joints"][i];
      const auto [a, b] = pair(e, where);
      m.joints.push_back({a, b, axis_label(field(e, "axis", where), where + ".axis"),
                          number(field(e, "stiffness", where), where + ".stiffness")});
    }
  }
  const json& sup = field(j, "support", "model");
  m.support.node = integer(field(sup, "node", "support"), "support.node");
  if (sup.contains("axis") && !sup["axis"].is_null()) {
    m.support.axis = axis_label(sup["axis"], "support.axis");
    m.support.stiffness = number(field(sup, "stiffness", "support"), "support.stiffness");
  }
  m.external = integer(field(j, "external", "model"), "external");
  if (j.contains("tool_offset")) m.tool_offset = vector_from_json(j["tool_offset"], "tool_offset");
  return m;
}

json msa_to_json(const MsaModel& m) {
  json nodes = json::array();
  for (const auto& n : m.nodes) {
    nodes.push_back({{"id", n.id},
                     {"position", {n.frame.translation.x(), n.frame.translation.y(), n.frame.translation.z()}},
                     {"rotation", matrix_to_json(n.frame.rotation)}});
  }
  json beams = json::array();
  for (const auto& b : m.beams) {
    json e = beam_to_json(b.props);
    e["nodes"] = {b.node1, b.node2};
    beams.push_back(e);
  }
  json joints = json::array();
  for (const auto& jt : m.joints) {
    joints.push_back({{"nodes", {jt.node_i, jt.node_j}}, {"axis", std::string(1, jt.axis)}, {"stiffness", jt.stiffness}});
  }
  json support{{"node", m.support.node}};
  if (m.support.axis) {
    support["axis"] = std::string(1, *m.support.axis);
    support["stiffness"] = m.support.stiffness;
  } else {
    support["axis"] = nullptr;
  }
  return json{{"nodes", nodes},
              {"beams", beams},
              {"joints", joints},
              {"support", support},
              {"external", m.external},
              {"tool_offset", {m.tool_offset.x(), m.tool_offset.y(), m.tool_offset.z()}}};
}

MsaModel load_msa(const std::filesystem::path& path) {
  try {
    return msa_from_json(read_json_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace elastocal
