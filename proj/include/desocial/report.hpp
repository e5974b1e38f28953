#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "desocial/harness.hpp"

namespace desocial {

/// Everything in the bundle except wall-clock timing, so reruns compare equal.
nlohmann::json report_json(const RunBundle& bundle);

/// Writes acc.csv, agreement.csv, report.json, manifest.json and, when
/// present, pool_sweep.csv, gain_vs_n.csv, verification logs, assignments and
/// ids.csv. Each file is written to a temporary name and renamed into place.
void emit_report(const RunBundle& bundle, const std::filesystem::path& output_dir,
                 const Dataset* data = nullptr);

void write_atomic(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a(std::string_view text);

}  // namespace desocial
