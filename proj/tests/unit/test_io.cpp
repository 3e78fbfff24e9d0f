// SPDX-License-Identifier: Apache-2.0
// Config files, session CSV and saved reports.
#include "evcharge/app.hpp"
#include "evcharge/errors.hpp"
#include "evcharge/io.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

using namespace evc;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = fs::path(EVC_SOURCE_DIR) / "config";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

long error_line(const std::function<void()>& f) {
    try {
        f();
    } catch (const InvalidInput& e) {
        return e.line();
    }
    return -100;
}

std::vector<sim::SessionRecord> parse(const std::string& csv) {
    std::istringstream in(csv);
    return io::parse_sessions(in, "test.csv");
}

const char* kHeader = "session_id,arrival_iso8601,departure_iso8601,energy_kwh,choice_label\n";

} // namespace

TEST_CASE("default config file loads and matches the built-in defaults") {
    const auto c = io::load_config(kConfigDir / "default.yaml");
    CHECK(c.sim.tariff == billing::default_tariff());
    CHECK(c.sim.controller.station == StationParams{});
    CHECK(c.sim.controller.choice == choice::Coefficients{});
    CHECK(c.sim.controller.station.n_chargers == 8);
    CHECK(c.sim.tariff.demand_rate == 20.0);
    CHECK(c.sim.features.lags == 96);
    CHECK(c.sim.features.horizon == 32);
    CHECK(c.sim.scheduled_energy_fraction == 0.57);
    CHECK(c.run.months == std::vector<unsigned>{6, 7, 8});
    CHECK(c.sim.calendar.holidays().size() == 11);
    CHECK(c.resolve(c.paths.out).lexically_normal() == (kConfigDir / "../out").lexically_normal());
}

TEST_CASE("config round trip is field-by-field identical") {
    auto c = io::load_config(kConfigDir / "default.yaml");
    CHECK(io::parse_config(io::dump_config(c), "dump", c.base_dir) == c);

    c.sim.controller.mode = ctl::Mode::Threshold;
    c.sim.controller.choice.alpha_reg = 0.123456789012345;
    c.forecaster.kind = "linear";
    c.paths.model = "models/a \"quoted\" name.txt";
    c.run.months = {1, 12};
    c.sim.seed = 18446744073709551615ull;
    CHECK(io::parse_config(io::dump_config(c), "dump", c.base_dir) == c);

    const io::AppConfig d;
    CHECK(io::parse_config(io::dump_config(d)) == d);
}

TEST_CASE("config errors carry the line") {
    CHECK(error_line([] { io::parse_config("run:\n  seed: 1\n  bogus: 3\n"); }) == 3);
    CHECK(error_line([] { io::parse_config("run:\n  replications: many\n"); }) == 2);
    CHECK(error_line([] { io::parse_config("station:\n  n_chargers: 8\ncontroller:\n  mode: fastest\n"); }) == 4);
    CHECK(error_line([] { io::parse_config("run:\n  months: [6, 13]\n"); }) == 2);
    CHECK(error_line([] { io::parse_config("nonsense: 1\n"); }) == 1);
    CHECK(error_line([] { io::parse_config("forecaster:\n  lags: 4\n  kind: psychic\n"); }) == 3);
    CHECK_THROWS_AS(io::parse_config("run: [unbalanced\n"), InvalidInput);
}

TEST_CASE("overrides replace one key and revalidate") {
    auto c = io::load_config(kConfigDir / "default.yaml");
    io::apply_override(c, "controller.mode", "mpc");
    CHECK(c.sim.controller.mode == ctl::Mode::Mpc);
    io::apply_override(c, "run.months", "[7]");
    CHECK(c.run.months == std::vector<unsigned>{7});
    io::apply_override(c, "controller.grid.step", "0.1");
    CHECK(c.sim.controller.grid.step == 0.1);
    CHECK(c.sim.tariff == billing::default_tariff());
    CHECK_THROWS_AS(io::apply_override(c, "controller.nope", "1"), InvalidInput);
    CHECK_THROWS_AS(io::apply_override(c, "run.replications", "0"), InvalidInput);
}

TEST_CASE("tariff file round trip") {
    const auto t = io::load_tariff(kConfigDir / "tariff_pge_bev_2023.yaml");
    CHECK(t == billing::default_tariff());
    CHECK(io::parse_tariff(io::dump_tariff(t)) == t);
    CHECK_THROWS_AS(io::parse_tariff("name: x\ndemand_rate: 20\nweekday:\n  - {name: a, start: \"00:00\", end: "
                                     "\"12:00\", rate: 0.1}\n"),
                    InvalidInput);
}

TEST_CASE("a header-only session file is empty") {
    CHECK(parse(kHeader).empty());
}

TEST_CASE("session rows come back sorted") {
    const auto r = parse(std::string(kHeader) +
                         "b,2023-06-05T10:00,2023-06-05T12:00,4,REGULAR\n"
                         "c,2023-06-05T08:00,2023-06-05T12:00,3,\n"
                         "a,2023-06-05T10:00,2023-06-05T18:00,5,SCHEDULED\n");
    REQUIRE(r.size() == 3);
    CHECK(r[0].id == "c");
    CHECK(r[1].id == "a");
    CHECK(r[2].id == "b");
    CHECK_FALSE(r[0].label.has_value());
    CHECK(r[1].label == Choice::Scheduled);
    CHECK(r[1].energy_kwh == 5.0);
}

TEST_CASE("columns may come in any order and the label is optional") {
    const auto r = parse("energy_kwh,session_id,departure_iso8601,arrival_iso8601\n"
                         "2.5,x,2023-06-05T12:00,2023-06-05T09:00\n");
    REQUIRE(r.size() == 1);
    CHECK(r[0].id == "x");
    CHECK(r[0].energy_kwh == 2.5);
}

TEST_CASE("session validation errors point at the row") {
    const std::string h = kHeader;
    CHECK(error_line([&] { parse(h + "a,2023-06-05T09:00,2023-06-05T12:00,3,\na,2023-06-05T10:00,2023-06-05T12:00,3,\n"); }) == 3);
    CHECK(error_line([&] { parse(h + "a,2023-06-05T09:00,2023-06-05T12:00,3,\nb,2023-06-05T09:00,2023-06-05T08:00,3,\n"); }) == 3);
    CHECK(error_line([&] { parse(h + "a,2023-06-05T09:00,2023-06-05T12:00,-1,\n"); }) == 2);
    CHECK(error_line([&] { parse(h + "a,2023-06-05T09:00,2023-06-05T12:00,3,LEAVE\n"); }) == 2);
    CHECK(error_line([&] { parse(h + "a,yesterday,2023-06-05T12:00,3,\n"); }) == 2);
    CHECK_THROWS_AS(parse("session_id,arrival_iso8601,departure_iso8601,energy_kwh,colour\n"), InvalidInput);
    CHECK_THROWS_AS(parse("session_id,arrival_iso8601,energy_kwh\n"), InvalidInput);

    try {
        parse(h + "b,2023-06-05T09:00,2023-06-05T08:00,3,\n");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("departure_iso8601") != std::string::npos);
    }
}

TEST_CASE("session CSV write and read round trip") {
    TempDir tmp("evc_test_sessions");
    io::AppConfig c;
    c.run.months = {6};
    const auto month = app::synthetic_workload(c, 5).front().sessions;
    REQUIRE(!month.empty());
    io::write_sessions(tmp.path / "s.csv", month);
    const auto back = io::read_sessions(tmp.path / "s.csv");
    REQUIRE(back.size() == month.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == month[i].id);
        CHECK(back[i].arrival == month[i].arrival);
        CHECK(back[i].departure == month[i].departure);
        CHECK(std::abs(back[i].energy_kwh - month[i].energy_kwh) <= 5e-5);
        CHECK(back[i].label == month[i].label);
    }
    CHECK_FALSE(fs::exists(tmp.path / "s.csv.partial"));

    const auto split = io::split_by_month(back, 2023, {6, 7});
    CHECK(split[0].sessions.size() == back.size());
    CHECK(split[1].sessions.empty());
}

TEST_CASE("saved runs: files, profit identity, round trip and the comparison table") {
    TempDir tmp("evc_test_reports");
    io::AppConfig c;
    c.run.months = {6};
    c.sim.replications = 2;
    c.sim.threads = 1;
    const auto base = app::simulate(c);
    c.sim.controller.mode = ctl::Mode::Mpc;
    const auto mpc = app::simulate(c);

    io::write_run(tmp.path / "baseline", base, c.sim.tariff, 0.25);
    io::write_run(tmp.path / "mpc-naive", mpc, c.sim.tariff, 0.25);
    for (const char* f : {"summary.json", "cycles.csv", "audit.csv", "load_trace.csv"})
        CHECK(fs::exists(tmp.path / "baseline" / f));

    // every cycle row: revenue - cost = profit to the cent
    std::istringstream rows(slurp(tmp.path / "baseline" / "cycles.csv"));
    std::string line;
    std::getline(rows, line);
    const auto cols = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
        return out;
    };
    const auto head = cols(line);
    auto idx = [&](const std::string& name) {
        return std::size_t(std::find(head.begin(), head.end(), name) - head.begin());
    };
    int n = 0;
    while (std::getline(rows, line)) {
        const auto v = cols(line);
        const double revenue = std::stod(v.at(idx("revenue"))), cost = std::stod(v.at(idx("cost"))),
                     profit = std::stod(v.at(idx("profit")));
        CHECK(std::abs(revenue - cost - profit) <= 0.01 + 1e-9);
        ++n;
    }
    CHECK(n == 2);

    const auto a = io::read_run(tmp.path / "baseline");
    const auto b = io::read_run(tmp.path / "mpc-naive");
    CHECK(a.label == "Baseline");
    CHECK(b.label == "MPC (Naive)");
    CHECK(a.summary.demand_charge == base.summary().demand_charge);
    CHECK(a.summary.cycles == 2);

    const auto table = io::render_cost_table({a, b});
    CHECK(table.find("Change from Baseline (%)") != std::string::npos);
    CHECK(table.find("MPC (Naive)") != std::string::npos);
    CHECK_THROWS_AS(io::render_cost_table({b}), InvalidInput);
    const auto rmse = io::render_rmse_table({a, b});
    CHECK(rmse.find("Simulation RMSE") != std::string::npos);
    CHECK(rmse.find("Baseline") == std::string::npos);

    // rewriting the same run gives the same bytes
    const auto before = slurp(tmp.path / "baseline" / "audit.csv");
    io::write_run(tmp.path / "baseline", base, c.sim.tariff, 0.25);
    CHECK(slurp(tmp.path / "baseline" / "audit.csv") == before);
    CHECK_THROWS_AS(io::read_run(tmp.path / "missing"), InvalidInput);
}

TEST_CASE("atomic writes leave no partial file behind") {
    TempDir tmp("evc_test_atomic");
    io::write_file_atomic(tmp.path / "a.txt", "hello");
    CHECK(slurp(tmp.path / "a.txt") == "hello");
    io::write_file_atomic(tmp.path / "a.txt", "again");
    CHECK(slurp(tmp.path / "a.txt") == "again");
    CHECK_FALSE(fs::exists(tmp.path / "a.txt.partial"));
}
