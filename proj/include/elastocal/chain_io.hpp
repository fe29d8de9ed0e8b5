#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "elastocal/chain.hpp"
#include "elastocal/reduction.hpp"

namespace elastocal {

// Chain files use degrees for every rotation value and joint limit; the
// in-memory ChainSpec is in radians.
//
//   {
//     "name": "...",
//     "joints": [{"index": 1, "axis": "z", "limits_deg": [-170, 170]}, ...],
//     "base":   [{"kind": "Tz", "binding": {"deviation": "base_z", "nominal": 360}}, ...],
//     "elements": [{"kind": "Rz", "binding": {"joint": 1, "offset": "dq1"}},
//                  {"kind": "Tz", "binding": {"constant": 420}}, ...],
//     "tools":  [[...], [...]]
//   }

ChainSpec chain_from_json(const nlohmann::json& j);
nlohmann::json chain_to_json(const ChainSpec& chain);

/// Reads and validates a chain file. Throws ParseError (syntax, field errors)
/// or ModelError (structural invariants).
ChainSpec load_chain(const std::filesystem::path& path);
void save_chain(const ChainSpec& chain, const std::filesystem::path& path);

/// Parameter files: {"params": [{"id": ..., "deviation": ..., "unit": "mm"|"rad"}]}.
/// Values are in internal units. Unknown ids are a ModelError.
ParamVector params_from_json(const nlohmann::json& j, const ChainSpec& chain);
nlohmann::json params_to_json(const ParamVector& pi);
ParamVector load_params(const std::filesystem::path& path, const ChainSpec& chain);

nlohmann::json reduction_report_to_json(const ReductionResult& r);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace elastocal
