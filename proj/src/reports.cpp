// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evc::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    std::string out = buf;
    // tiny negatives round to "-0.00"; drop the sign
    if (out[0] == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

std::string money(double v) { return fmt("%.2f", v); }

json summary_json(const sim::Summary& s) {
    return {{"demand_charge", s.demand_charge},
            {"tou", s.tou},
            {"revenue", s.revenue},
            {"cost", s.cost},
            {"profit", s.profit},
            {"mean_peak_kw", s.peak},
            {"simulation_rmse_kw", s.simulation_rmse},
            {"cycles", s.cycles},
            {"arrivals", s.arrivals},
            {"rejected", s.rejected},
            {"invariant_violations", s.invariant_violations},
            {"forecast_clip_violations", s.forecast_clip_violations}};
}

sim::Summary summary_from(const json& j) {
    sim::Summary s;
    s.demand_charge = j.at("demand_charge").get<double>();
    s.tou = j.at("tou").get<double>();
    s.revenue = j.at("revenue").get<double>();
    s.cost = j.at("cost").get<double>();
    s.profit = j.at("profit").get<double>();
    s.peak = j.at("mean_peak_kw").get<double>();
    s.simulation_rmse = j.at("simulation_rmse_kw").get<double>();
    s.cycles = j.at("cycles").get<int>();
    s.arrivals = j.at("arrivals").get<int>();
    s.rejected = j.at("rejected").get<int>();
    s.invariant_violations = j.at("invariant_violations").get<int>();
    s.forecast_clip_violations = j.at("forecast_clip_violations").get<int>();
    return s;
}

std::string change(double x, double base) {
    if (base == 0.0) return "n/a";
    return fmt("%.2f", 100.0 * (x - base) / std::abs(base));
}

std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells, bool left_first) {
        os << '|';
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string pad(width[c] - cells[c].size(), ' ');
            os << ' ' << (c == 0 && left_first ? cells[c] + pad : pad + cells[c]) << " |";
        }
        os << '\n';
    };
    line(header, true);
    os << '|';
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string dashes(width[c] + 1, '-');
        os << (c == 0 ? ":" + dashes : dashes + ":") << '|';
    }
    os << '\n';
    for (const auto& r : rows) line(r, true);
    return os.str();
}

} // namespace

void write_file_atomic(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(text.data(), std::streamsize(text.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw Error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

SavedRun saved(const sim::RunResult& run) {
    return {run.label, run.controller, run.forecaster, run.training_rmse, run.summary()};
}

void write_run(const fs::path& dir, const sim::RunResult& run, const billing::TariffSchedule& tariff,
               double delta_t_h) {
    fs::create_directories(dir);
    // a stale summary would make a half-written directory look complete
    fs::remove(dir / "summary.json");

    std::ostringstream cycles;
    cycles << "year,month,replication,seed,arrivals,rejected,energy_cost,revenue,peak_kw,demand_cost,cost,profit,"
              "invariant_violations,forecasts,forecast_clip_violations,simulation_rmse_kw\n";
    for (const auto& m : run.months) {
        const auto& r = m.row;
        const double cost = r.energy_cost + r.demand_cost;
        cycles << m.year << ',' << m.month << ',' << m.replication << ',' << m.seed << ',' << m.arrivals << ','
               << m.rejected << ',' << money(r.energy_cost) << ',' << money(r.revenue) << ',' << fmt("%.3f", r.peak)
               << ',' << money(r.demand_cost) << ',' << money(cost) << ',' << money(r.revenue - cost) << ','
               << m.invariant_violations << ',' << m.forecasts << ',' << m.forecast_clip_violations << ','
               << (m.forecast_rmse_count ? fmt("%.4f", m.forecast_rmse_sum / m.forecast_rmse_count) : "") << '\n';
    }
    write_file_atomic(dir / "cycles.csv", cycles.str());

    std::ostringstream audit;
    audit << "year,month,replication,session_id,step,arrival,rejected,z_sch,z_reg,p_reg,p_sch,p_leave,"
             "expected_cost,choice,energy_req_kwh,threshold_kw,forecast_rmse_kw\n";
    for (const auto& m : run.months) {
        for (const auto& a : m.audit) {
            audit << m.year << ',' << m.month << ',' << m.replication << ',' << a.session << ',' << a.step << ','
                  << format_iso8601(a.time) << ',' << (a.rejected ? 1 : 0) << ',';
            if (a.rejected) {
                audit << ",,,,,,,,,\n";
                continue;
            }
            audit << fmt("%.2f", a.menu.z_sch) << ',' << fmt("%.2f", a.menu.z_reg) << ',' << fmt("%.6f", a.probs.p_reg)
                  << ',' << fmt("%.6f", a.probs.p_sch) << ',' << fmt("%.6f", a.probs.p_leave) << ','
                  << fmt("%.4f", a.expected_cost) << ',' << to_string(a.choice) << ',' << fmt("%.4f", a.energy_req)
                  << ',' << (a.threshold >= 0.0 ? fmt("%.3f", a.threshold) : "") << ','
                  << (a.forecast_rmse >= 0.0 ? fmt("%.4f", a.forecast_rmse) : "") << '\n';
        }
    }
    write_file_atomic(dir / "audit.csv", audit.str());

    std::ostringstream trace;
    trace << "year,month,replication,step,time,load_kw,energy_rate\n";
    for (const auto& m : run.months) {
        const TimeGrid grid = TimeGrid::for_month(m.year, m.month, delta_t_h);
        const auto ct = billing::resolve(tariff, grid);
        for (std::size_t tau = 0; tau < m.load.size(); ++tau)
            trace << m.year << ',' << m.month << ',' << m.replication << ',' << tau << ','
                  << format_iso8601(grid.time_of(int(tau))) << ',' << fmt("%.4f", m.load[tau]) << ','
                  << fmt("%.4f", ct.energy_rate[tau]) << '\n';
    }
    write_file_atomic(dir / "load_trace.csv", trace.str());

    json j;
    j["format"] = "evcharge-run 1";
    j["label"] = run.label;
    j["controller"] = run.controller;
    j["forecaster"] = run.forecaster;
    j["seed"] = run.seed;
    j["replications"] = run.replications;
    j["training_rmse_kw"] = run.training_rmse;
    j["summary"] = summary_json(run.summary());
    write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
}

SavedRun read_run(const fs::path& dir) {
    const fs::path path = fs::is_directory(dir) ? dir / "summary.json" : dir;
    std::ifstream in(path);
    if (!in) throw InvalidInput("no saved run at " + dir.string());
    try {
        const json j = json::parse(in);
        if (j.at("format").get<std::string>() != "evcharge-run 1") throw InvalidInput("unsupported run format", path.string());
        SavedRun r;
        r.label = j.at("label").get<std::string>();
        r.controller = j.at("controller").get<std::string>();
        r.forecaster = j.at("forecaster").get<std::string>();
        r.training_rmse = j.at("training_rmse_kw").get<double>();
        r.summary = summary_from(j.at("summary"));
        return r;
    } catch (const json::exception& e) {
        throw InvalidInput(e.what(), path.string());
    }
}

std::string render_cost_table(const std::vector<SavedRun>& runs) {
    const SavedRun* base = nullptr;
    for (const auto& r : runs)
        if (r.controller == "baseline") {
            base = &r;
            break;
        }
    if (!base) throw InvalidInput("the comparison needs a baseline run");
    const auto& b = base->summary;
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : runs) {
        const auto& s = r.summary;
        rows.push_back({r.label, money(s.demand_charge), money(s.tou), money(s.revenue), money(s.cost), money(s.profit),
                        change(s.demand_charge, b.demand_charge), change(s.tou, b.tou), change(s.cost, b.cost)});
    }
    return table({"Control Scheme", "Demand Charge ($)", "TOU ($)", "Revenue ($)", "Cost ($)", "Profit ($)",
                  "Demand Charge: Change from Baseline (%)", "TOU: Change from Baseline (%)",
                  "Cost: Change from Baseline (%)"},
                 rows);
}

std::string render_rmse_table(const std::vector<SavedRun>& runs) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : runs) {
        if (r.controller != "mpc") continue;
        const auto& s = r.summary;
        rows.push_back({r.label, r.training_rmse >= 0.0 ? fmt("%.2f", r.training_rmse) : "n/a",
                        s.simulation_rmse >= 0.0 ? fmt("%.2f", s.simulation_rmse) : "n/a", fmt("%.2f", s.peak)});
    }
    return table({"Control Scheme", "Training RMSE (kW)", "Simulation RMSE (kW)", "Mean Peak Power (kW)"}, rows);
}

} // namespace evc::io
