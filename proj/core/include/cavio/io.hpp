#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cavio/analysis.hpp"
#include "cavio/fit.hpp"
#include "cavio/model.hpp"
#include "cavio/possweep.hpp"
#include "cavio/scattering.hpp"
#include "cavio/sweep.hpp"

namespace cavio {

// ------------------------------------------------------------- models
// Keys are checked strictly: anything unknown raises ValidationError naming it.
SystemModel parse_model_json(std::string_view text);
SystemModel load_model(const std::filesystem::path& path);
std::string model_to_json(const SystemModel& model);
// FNV-1a 64 over the canonical compact JSON form.
std::uint64_t model_hash(const SystemModel& model);
std::string hex64(std::uint64_t v);

// ------------------------------------------------------------- traces
// Two numeric columns, f_GHz and S21_dB; optional header, '#' comments.
Trace parse_trace_csv(std::istream& is);
Trace read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const Trace& trace, const char* value_name, std::ostream& os);

struct TouchstoneData {
    std::vector<double> f_ghz;
    std::vector<SMatrix> s;  // s[out][in]
    double reference_ohm = 50.0;
};

// Version-1 two-port files: MA, DB and RI formats, any frequency unit.
TouchstoneData parse_touchstone(std::istream& is);
TouchstoneData read_touchstone(const std::filesystem::path& path);
Trace touchstone_trace_db(const TouchstoneData& data, int out_port = 1, int in_port = 0);

// Picks the reader from the extension (.s2p -> Touchstone, else CSV).
Trace read_measured_trace(const std::filesystem::path& path);

// ----------------------------------------------------- position table
// CSV: y_mm, mode_index, f_GHz, g_MHz, phi0_rad, phi1_rad, theta_rad
PositionTable parse_position_table(std::istream& is);
PositionTable read_position_table(const std::filesystem::path& path);
void write_position_table(const PositionTable& table, std::ostream& os);

// ------------------------------------------------------------ reports
std::string sweep_metadata_json(const SystemModel& model, const Grid& grid, std::string_view command,
                                std::string_view timestamp);
std::string fit_report_json(const FitResult& fit);
std::string batch_report_json(const BatchResult& batch);
std::string regime_report_json(const RegimeReport& report);
std::string suppression_report_json(const SuppressionResult& result);
std::string influence_report_json(const InfluenceRatio& result);
std::string coupling_report_json(const EffectiveCoupling& result);
std::string profile_report_json(const RegimeProfile& profile);
void write_profile_csv(const RegimeProfile& profile, std::ostream& os);

}  // namespace cavio
