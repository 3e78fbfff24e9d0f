// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evcharge/simulator.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace evc::io {

// ---- configuration -------------------------------------------------------------------------------

struct Paths {
    std::string sessions;  // session CSV; empty means the synthetic workload
    std::string tariff;    // tariff file; empty means the built-in default
    std::string model;     // linear forecaster model file
    std::string out = "out";

    bool operator==(const Paths&) const = default;
};

struct RunSettings {
    int year = 2023;
    std::vector<unsigned> months{6, 7, 8};
    std::uint64_t data_seed = 2023;  // synthetic workload
    bool operator==(const RunSettings&) const = default;
};

struct ForecasterSettings {
    std::string kind = "naive";  // naive | linear | external
    std::string external_command;
    fc::ElasticNetOptions training;
    std::uint64_t training_seed = 4049;
    int training_replications = 2;

    bool operator==(const ForecasterSettings&) const = default;
};

struct AppConfig {
    Paths paths;
    RunSettings run;
    sim::SimConfig sim;
    ForecasterSettings forecaster;
    sim::SyntheticParams synthetic;
    std::string log_level = "info";
    /// Relative paths in the file resolve against this directory. Not serialized.
    std::filesystem::path base_dir;

    void validate() const;
    std::filesystem::path resolve(const std::string& p) const;
    bool operator==(const AppConfig&) const = default;
};

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p);

/// YAML text to config. Unknown keys and type errors are InvalidInput with the line number.
/// `base_dir` resolves relative paths inside the file, including the tariff it names.
AppConfig parse_config(std::string_view text, const std::string& source = "config",
                       const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);
/// Every field, so parse_config(dump_config(c)) == c.
std::string dump_config(const AppConfig& c);

/// Sets one dotted key (e.g. "controller.mode") from YAML scalar text and revalidates.
void apply_override(AppConfig& c, std::string_view key, std::string_view value);

billing::TariffSchedule parse_tariff(std::string_view text, const std::string& source = "tariff");
billing::TariffSchedule load_tariff(const std::filesystem::path& path);
std::string dump_tariff(const billing::TariffSchedule& t);

// ---- session CSV ---------------------------------------------------------------------------------

/// Columns session_id, arrival_iso8601, departure_iso8601, energy_kwh and an optional
/// choice_label (REGULAR, SCHEDULED or empty). Rows come back sorted by arrival, then id.
std::vector<sim::SessionRecord> parse_sessions(std::istream& in, const std::string& source = "sessions");
std::vector<sim::SessionRecord> read_sessions(const std::filesystem::path& path);
void write_sessions(const std::filesystem::path& path, const std::vector<sim::SessionRecord>& records);

/// Sessions arriving in each requested month, in the order given.
std::vector<sim::MonthWorkload> split_by_month(const std::vector<sim::SessionRecord>& records, int year,
                                               const std::vector<unsigned>& months);

// ---- reports -------------------------------------------------------------------------------------

/// What `report` needs back from a saved run.
struct SavedRun {
    std::string label;
    std::string controller;
    std::string forecaster;
    double training_rmse = -1.0;
    sim::Summary summary;
};

/// summary.json, cycles.csv, audit.csv and load_trace.csv. Each file is written to a
/// temporary name and renamed; summary.json goes last.
void write_run(const std::filesystem::path& dir, const sim::RunResult& run, const billing::TariffSchedule& tariff,
               double delta_t_h);
SavedRun read_run(const std::filesystem::path& dir);

/// Cost table with "Change from Baseline (%)" columns. Needs a baseline run.
std::string render_cost_table(const std::vector<SavedRun>& runs);
/// Training RMSE, simulation RMSE and mean peak per MPC run.
std::string render_rmse_table(const std::vector<SavedRun>& runs);

SavedRun saved(const sim::RunResult& run);

/// Writes `text` to `path` through a temporary file in the same directory.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

} // namespace evc::io
