#pragma once

#include <filesystem>

#include <json.hpp>

#include "elastocal/msa.hpp"
#include "elastocal/vjm.hpp"

namespace elastocal {

// Spring file:
//   {"joints": [k1, ..., kn],                       N mm/rad
//    "links": [{"E":..,"G":..,"S":..,"Iy":..,"Iz":..,"J":.., "L":..}   beam, L optional
//              or {"matrix": [[6 x 6]]}, ...],      stiffness in the spring frame
//    "tool": {...}}                                 optional, same forms
SpringSet springs_from_json(const nlohmann::json& j);
nlohmann::json springs_to_json(const SpringSet& s);
SpringSet load_springs(const std::filesystem::path& path);

// MSA model file:
//   {"nodes": [{"id": 1, "position": [x, y, z], "rotation": [[3 x 3]]}, ...],
//    "beams": [{"nodes": [1, 2], "E":.., "G":.., "S":.., "L":.., "Iy":.., "Iz":.., "J":..}, ...],
//    "joints": [{"nodes": [2, 3], "axis": "x", "stiffness": k}, ...],
//    "support": {"node": 1, "axis": "z", "stiffness": k},   axis null or absent: clamped
//    "external": 14,
//    "tool_offset": [dx, dy, dz]}                            optional
MsaModel msa_from_json(const nlohmann::json& j);
nlohmann::json msa_to_json(const MsaModel& m);
MsaModel load_msa(const std::filesystem::path& path);

}  // namespace elastocal
