// SPDX-License-Identifier: Apache-2.0
// The C interface, linked against the shared library only.
#include "evcharge/evcharge.h"

#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    evc_string_free(s);
    return out;
}

} // namespace

TEST_CASE("status names and NULL arguments") {
    CHECK(std::string(evc_status_name(EVC_OK)) == "ok");
    CHECK(std::string(evc_status_name(EVC_ERR_INVALID_INPUT)) == "invalid input");
    CHECK(std::strlen(evc_version()) > 0);
    CHECK(evc_config_default(nullptr) == EVC_ERR_INVALID_INPUT);
    CHECK(std::string(evc_last_error()).find("NULL") != std::string::npos);
    evc_config_free(nullptr);
    evc_run_free(nullptr);
    evc_string_free(nullptr);
}

TEST_CASE("config errors report invalid input with a message") {
    evc_config* c = nullptr;
    CHECK(evc_config_parse("run:\n  replications: -1\n", &c) == EVC_ERR_INVALID_INPUT);
    CHECK(c == nullptr);
    CHECK(std::strlen(evc_last_error()) > 0);
    CHECK(evc_config_load("/nonexistent/evc.yaml", &c) == EVC_ERR_INVALID_INPUT);

    REQUIRE(evc_config_default(&c) == EVC_OK);
    CHECK(std::string(evc_last_error()).empty());
    CHECK(evc_config_set(c, "run.nothing", "1") == EVC_ERR_INVALID_INPUT);
    CHECK(evc_config_limit_months(c, 4) == EVC_ERR_INVALID_INPUT);
    CHECK(evc_config_set(c, "controller.mode", "threshold") == EVC_OK);
    char* yaml = nullptr;
    REQUIRE(evc_config_dump(c, &yaml) == EVC_OK);
    CHECK(take(yaml).find("mode: threshold") != std::string::npos);
    evc_config_free(c);
}

TEST_CASE("a small simulation through the C interface") {
    const fs::path out = fs::temp_directory_path() / "evc_test_c_api";
    fs::remove_all(out);
    evc_config* c = nullptr;
    REQUIRE(evc_config_default(&c) == EVC_OK);
    REQUIRE(evc_config_set(c, "run.replications", "1") == EVC_OK);
    REQUIRE(evc_config_set(c, "logging.level", "warn") == EVC_OK);
    REQUIRE(evc_config_limit_months(c, 1) == EVC_OK);
    REQUIRE(evc_config_apply_logging(c) == EVC_OK);

    evc_run* run = nullptr;
    REQUIRE(evc_simulate(c, &run) == EVC_OK);
    evc_summary s{};
    REQUIRE(evc_run_summary(run, &s) == EVC_OK);
    CHECK(s.cycles == 1);
    CHECK(s.arrivals > 0);
    CHECK(s.invariant_violations == 0);
    CHECK(std::abs(s.revenue - s.cost - s.profit) < 1e-9);
    CHECK(s.simulation_rmse_kw == -1.0);
    char* label = nullptr;
    REQUIRE(evc_run_label(run, &label) == EVC_OK);
    CHECK(take(label) == "Baseline");

    const std::string dir = (out / "baseline").string();
    REQUIRE(evc_run_write(run, c, dir.c_str()) == EVC_OK);
    const char* dirs[] = {dir.c_str()};
    char* cost = nullptr;
    char* rmse = nullptr;
    REQUIRE(evc_report(dirs, 1, &cost, &rmse) == EVC_OK);
    CHECK(take(cost).find("Change from Baseline (%)") != std::string::npos);
    take(rmse);
    CHECK(evc_report(dirs, 0, &cost, &rmse) == EVC_ERR_INVALID_INPUT);

    // MPC with the linear forecaster but no model file
    REQUIRE(evc_config_set(c, "controller.mode", "mpc") == EVC_OK);
    REQUIRE(evc_config_set(c, "forecaster.kind", "linear") == EVC_OK);
    evc_run* bad = nullptr;
    CHECK(evc_simulate(c, &bad) == EVC_ERR_INVALID_INPUT);
    CHECK(bad == nullptr);

    evc_run_free(run);
    evc_config_free(c);
    fs::remove_all(out);
}
