#include "elastocal/chain_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "elastocal/errors.hpp"

namespace elastocal {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double to_internal(TransformKind k, double v) { return is_rotation(k) ? v * kDeg : v; }
double to_file(TransformKind k, double v) { return is_rotation(k) ? v / kDeg : v; }

[[noreturn]] void field_error(const std::string& where, const std::string& msg) {
  throw ParseError(where + ": " + msg);
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) field_error(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) field_error(where, std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) field_error(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(where, "non-finite number");
  return v;
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) field_error(where, "expected a string");
  return j.get<std::string>();
}

ElementaryTransform element_from_json(const json& j, const std::string& where) {
  ElementaryTransform e;
  try {
    e.kind = transform_kind_from_string(text(require(j, "kind", where), where + ".kind"));
  } catch (const std::invalid_argument& ex) {
    field_error(where + ".kind", ex.what());
  }
  const json& b = require(j, "binding", where);
  const std::string bw = where + ".binding";
  if (!b.is_object()) field_error(bw, "expected an object");
  if (b.contains("constant")) {
    e.binding = ConstantBinding{to_internal(e.kind, number(b["constant"], bw + ".constant"))};
  } else if (b.contains("joint")) {
    JointBinding jb;
    const json& idx = b["joint"];
    if (!idx.is_number_integer()) field_error(bw + ".joint", "expected an integer joint index");
    jb.index = idx.get<int>();
    if (b.contains("home")) jb.home = number(b["home"], bw + ".home") * kDeg;
    if (b.contains("offset") && !b["offset"].is_null()) jb.offset_param = text(b["offset"], bw + ".offset");
    e.binding = jb;
  } else if (b.contains("deviation")) {
    DeviationBinding d;
    d.param = text(b["deviation"], bw + ".deviation");
    if (b.contains("nominal")) d.nominal = to_internal(e.kind, number(b["nominal"], bw + ".nominal"));
    e.binding = d;
  } else {
    field_error(bw, "expected one of 'constant', 'joint', 'deviation'");
  }
  return e;
}

json element_to_json(const ElementaryTransform& e) {
  json b;
  if (const auto* c = std::get_if<ConstantBinding>(&e.binding)) {
    b["constant"] = to_file(e.kind, c->value);
  } else if (const auto* jb = std::get_if<JointBinding>(&e.binding)) {
    b["joint"] = jb->index;
    if (jb->home != 0.0) b["home"] = jb->home / kDeg;
    if (jb->offset_param) b["offset"] = *jb->offset_param;
  } else {
    const auto& d = std::get<DeviationBinding>(e.binding);
    b["deviation"] = d.param;
    if (d.nominal != 0.0) b["nominal"] = to_file(e.kind, d.nominal);
  }
  return json{{"kind", std::string(to_string(e.kind))}, {"binding", b}};
}

std::vector<ElementaryTransform> block_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) field_error(where, "expected an array");
  std::vector<ElementaryTransform> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(element_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

json block_to_json(const std::vector<ElementaryTransform>& block) {
  json a = json::array();
  for (const auto& e : block) a.push_back(element_to_json(e));
  return a;
}

}  // namespace

ChainSpec chain_from_json(const json& j) {
  ChainSpec c;
  c.name = text(require(j, "name", "chain"), "name");
  const json& joints = require(j, "joints", "chain");
  if (!joints.is_array()) field_error("joints", "expected an array");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string where = "joints[" + std::to_string(i) + "]";
    JointInfo info;
    const json& idx = require(joints[i], "index", where);
    if (!idx.is_number_integer()) field_error(where + ".index", "expected an integer");
    info.index = idx.get<int>();
    const std::string axis = text(require(joints[i], "axis", where), where + ".axis");
    if (axis != "x" && axis != "y" && axis != "z") {
      field_error(where + ".axis", "invalid axis label '" + axis + "' for joint " + std::to_string(info.index) +
                                       " (expected x, y or z)");
    }
    info.axis = axis[0];
    if (joints[i].contains("limits_deg")) {
      const json& lim = joints[i]["limits_deg"];
      if (!lim.is_array() || lim.size() != 2) field_error(where + ".limits_deg", "expected [min, max]");
      info.limits = std::make_pair(number(lim[0], where + ".limits_deg[0]") * kDeg,
                                   number(lim[1], where + ".limits_deg[1]") * kDeg);
    }
    c.joints.push_back(info);
  }
  c.elements = block_from_json(require(j, "elements", "chain"), "elements");
  if (j.contains("base")) c.base = block_from_json(j["base"], "base");
  if (j.contains("tools")) {
    const json& tools = j["tools"];
    if (!tools.is_array()) field_error("tools", "expected an array of blocks");
    for (std::size_t t = 0; t < tools.size(); ++t) c.tools.push_back(block_from_json(tools[t], "tools[" + std::to_string(t) + "]"));
  }
  return c;
}

json chain_to_json(const ChainSpec& c) {
  json joints = json::array();
  for (const auto& info : c.joints) {
    json ji{{"index", info.index}, {"axis", std::string(1, info.axis)}};
    if (info.limits) ji["limits_deg"] = {info.limits->first / kDeg, info.limits->second / kDeg};
    joints.push_back(ji);
  }
  json tools = json::array();
  for (const auto& t : c.tools) tools.push_back(block_to_json(t));
  json out;
  out["name"] = c.name;
  out["joints"] = joints;
  out["base"] = block_to_json(c.base);
  out["elements"] = block_to_json(c.elements);
  out["tools"] = tools;
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string content = ss.str();
  try {
    return json::parse(content);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    const std::size_t upto = std::min<std::size_t>(e.byte, content.size());
    const auto line = 1 + std::count(content.begin(), content.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << text;
}

ChainSpec load_chain(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  ChainSpec c;
  try {
    c = chain_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

void save_chain(const ChainSpec& chain, const std::filesystem::path& path) {
  write_text_file(path, chain_to_json(chain).dump(2) + "\n");
}

ParamVector params_from_json(const json& j, const ChainSpec& chain) {
  ParamVector pi = ParamVector::from_chain(chain);
  const json& list = require(j, "params", "params file");
  if (!list.is_array()) field_error("params", "expected an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "params[" + std::to_string(i) + "]";
    const std::string id = text(require(list[i], "id", where), where + ".id");
    const double dev = number(require(list[i], "deviation", where), where + ".deviation");
    const auto idx = pi.find(id);
    if (!idx) throw ModelError(where + ": parameter '" + id + "' does not exist in chain '" + chain.name + "'");
    pi.set_deviation(*idx, dev);
  }
  return pi;
}

json params_to_json(const ParamVector& pi) {
  json list = json::array();
  for (const auto& e : pi.entries()) {
    list.push_back({{"id", e.id},
                    {"nominal", e.nominal},
                    {"deviation", e.deviation},
                    {"unit", e.unit == ParamUnit::Radian ? "rad" : "mm"}});
  }
  return json{{"params", list}};
}

ParamVector load_params(const std::filesystem::path& path, const ChainSpec& chain) {
  return params_from_json(read_json_file(path), chain);
}

json reduction_report_to_json(const ReductionResult& r) {
  json removed = json::array();
  for (const auto& e : r.removed) removed.push_back({{"param", e.param}, {"rule", e.rule}, {"detail", e.detail}});
  const ParamVector pi = ParamVector::from_chain(r.chain);
  return json{{"chain", r.chain.name},
              {"removed", removed},
              {"removed_count", r.removed.size()},
              {"remaining", pi.ids()},
              {"remaining_count", pi.size()}};
}

}  // namespace elastocal
