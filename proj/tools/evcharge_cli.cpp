// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the library only through the C interface.
#include "evcharge/evcharge.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitInvalid = 2;

struct Failure {
    evc_status status;
};

void check(evc_status s) {
    if (s != EVC_OK) throw Failure{s};
}

struct ConfigDeleter {
    void operator()(evc_config* c) const { evc_config_free(c); }
};
struct RunDeleter {
    void operator()(evc_run* r) const { evc_run_free(r); }
};
using ConfigPtr = std::unique_ptr<evc_config, ConfigDeleter>;
using RunPtr = std::unique_ptr<evc_run, RunDeleter>;

std::string take(char* s) {
    std::string out = s ? s : "";
    evc_string_free(s);
    return out;
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

std::string quote_yaml(const std::string& s) {
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + "\"";
}

struct Options {
    std::string config;
    std::string controller;
    std::string forecaster;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<int> months;
    std::optional<int> threads;
    std::string out;
    std::string model;
    std::string sessions;
    std::string log_level;
    std::vector<std::string> sets;
    std::vector<std::string> runs;
};

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "YAML config file (default: $EVC_CONFIG, then built-in defaults)");
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--reps", o.reps, "Replications per month")->check(CLI::PositiveNumber);
    sub->add_option("--months", o.months, "Use the first N configured months")->check(CLI::PositiveNumber);
    sub->add_option("--threads", o.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--model", o.model, "Linear forecaster model file");
    sub->add_option("--sessions", o.sessions, "Session CSV to replay instead of the synthetic workload");
    sub->add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off");
    sub->add_option("--set", o.sets, "Override any config key, e.g. --set controller.grid.step=0.1");
}

ConfigPtr load(const Options& o) {
    evc_config* raw = nullptr;
    std::string path = o.config;
    if (path.empty())
        if (const char* env = std::getenv("EVC_CONFIG"); env && *env) path = env;
    check(path.empty() ? evc_config_default(&raw) : evc_config_load(path.c_str(), &raw));
    ConfigPtr c(raw);
    auto set = [&](const char* key, const std::string& value) { check(evc_config_set(c.get(), key, value.c_str())); };
    if (!o.controller.empty()) set("controller.mode", o.controller);
    if (!o.forecaster.empty()) set("forecaster.kind", o.forecaster);
    if (o.seed) set("run.seed", std::to_string(*o.seed));
    if (o.reps) set("run.replications", std::to_string(*o.reps));
    if (o.threads) set("run.threads", std::to_string(*o.threads));
    if (!o.out.empty()) set("paths.out", quote_yaml(absolute(o.out)));
    if (!o.model.empty()) set("paths.model", quote_yaml(absolute(o.model)));
    if (!o.sessions.empty()) set("paths.sessions", quote_yaml(absolute(o.sessions)));
    if (!o.log_level.empty()) set("logging.level", o.log_level);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            throw Failure{EVC_ERR_INVALID_INPUT};
        }
        set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
    }
    if (o.months) check(evc_config_limit_months(c.get(), *o.months));
    check(evc_config_apply_logging(c.get()));
    return c;
}

std::string out_dir(const evc_config* c) {
    char* p = nullptr;
    check(evc_config_out_dir(c, &p));
    return take(p);
}

std::string slug(const std::string& label) {
    std::string s;
    for (const char ch : label) {
        if (std::isalnum(static_cast<unsigned char>(ch)))
            s += char(std::tolower(static_cast<unsigned char>(ch)));
        else if (!s.empty() && s.back() != '-')
            s += '-';
    }
    while (!s.empty() && s.back() == '-') s.pop_back();
    return s;
}

int cmd_simulate(const Options& o) {
    auto c = load(o);
    evc_run* raw = nullptr;
    check(evc_simulate(c.get(), &raw));
    RunPtr run(raw);
    char* label_raw = nullptr;
    check(evc_run_label(run.get(), &label_raw));
    const std::string label = take(label_raw);
    const fs::path dir = fs::path(out_dir(c.get())) / slug(label);
    check(evc_run_write(run.get(), c.get(), dir.string().c_str()));
    evc_summary s{};
    check(evc_run_summary(run.get(), &s));
    std::printf("%s over %d cycle(s)\n", label.c_str(), s.cycles);
    std::printf("  demand charge  $%.2f\n  TOU            $%.2f\n  revenue        $%.2f\n  cost           $%.2f\n"
                "  profit         $%.2f\n  mean peak      %.2f kW\n",
                s.demand_charge, s.tou, s.revenue, s.cost, s.profit, s.mean_peak_kw);
    if (s.simulation_rmse_kw >= 0) std::printf("  forecast RMSE  %.3f kW\n", s.simulation_rmse_kw);
    std::printf("  arrivals %d, rejected %d, invariant violations %d\n", s.arrivals, s.rejected,
                s.invariant_violations);
    std::printf("reports in %s\n", dir.string().c_str());
    return s.invariant_violations == 0 ? kExitOk : kExitRuntime;
}

int cmd_train(const Options& o) {
    auto c = load(o);
    const std::string path = o.model.empty() ? (fs::path(out_dir(c.get())) / "linear_model.txt").string() : absolute(o.model);
    double rmse = 0.0;
    check(evc_train_forecaster(c.get(), path.c_str(), &rmse));
    std::printf("model written to %s\ntraining RMSE (horizon-averaged) %.3f kW\n", path.c_str(), rmse);
    return kExitOk;
}

int cmd_eval(const Options& o) {
    auto c = load(o);
    char* table = nullptr;
    check(evc_eval_forecasters(c.get(), out_dir(c.get()).c_str(), &table));
    std::printf("%s", take(table).c_str());
    return kExitOk;
}

int cmd_generate(const Options& o) {
    auto c = load(o);
    const fs::path path = fs::path(out_dir(c.get())) / "sessions.csv";
    size_t n = 0;
    check(evc_generate_data(c.get(), path.string().c_str(), &n));
    std::printf("%zu sessions written to %s\n", n, path.string().c_str());
    return kExitOk;
}

int cmd_report(const Options& o) {
    std::vector<std::string> dirs = o.runs;
    if (dirs.empty()) {
        auto c = load(o);
        const fs::path root = out_dir(c.get());
        if (fs::is_directory(root))
            for (const auto& e : fs::directory_iterator(root))
                if (fs::exists(e.path() / "summary.json")) dirs.push_back(e.path().string());
        std::sort(dirs.begin(), dirs.end(), [](const std::string& a, const std::string& b) {
            // baseline first, then alphabetical
            const bool ab = fs::path(a).filename() == "baseline", bb = fs::path(b).filename() == "baseline";
            return ab != bb ? ab : a < b;
        });
    }
    std::vector<const char*> ptrs;
    for (const auto& d : dirs) ptrs.push_back(d.c_str());
    char* cost = nullptr;
    char* rmse = nullptr;
    check(evc_report(ptrs.data(), ptrs.size(), &cost, &rmse));
    std::printf("Mean cost and revenue per billing cycle\n\n%s", take(cost).c_str());
    const std::string r = take(rmse);
    if (r.find("MPC") != std::string::npos) std::printf("\nForecast accuracy and peak power\n\n%s", r.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Price and power control for workplace EV charging stations"};
    app.set_version_flag("--version", std::string(evc_version()));
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "Monte Carlo runs of one controller");
    add_common(sim, o);
    sim->add_option("--controller", o.controller, "baseline, threshold, softplus or mpc")
        ->check(CLI::IsMember({"baseline", "threshold", "softplus", "mpc"}));
    sim->add_option("--forecaster", o.forecaster, "naive, linear or external (MPC only)")
        ->check(CLI::IsMember({"naive", "linear", "external"}));

    auto* train = app.add_subcommand("train-forecaster", "Fit the linear forecaster on baseline runs");
    add_common(train, o);

    auto* eval = app.add_subcommand("eval-forecaster", "Training and simulation RMSE per forecaster");
    add_common(eval, o);

    auto* gen = app.add_subcommand("generate-data", "Write the synthetic workload as a session CSV");
    add_common(gen, o);

    auto* rep = app.add_subcommand("report", "Comparison tables from saved runs");
    add_common(rep, o);
    rep->add_option("runs", o.runs, "Run directories (default: every run under --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (sim->parsed()) return cmd_simulate(o);
        if (train->parsed()) return cmd_train(o);
        if (eval->parsed()) return cmd_eval(o);
        if (gen->parsed()) return cmd_generate(o);
        if (rep->parsed()) return cmd_report(o);
    } catch (const Failure& f) {
        const char* msg = evc_last_error();
        if (msg && *msg) std::fprintf(stderr, "error: %s\n", msg);
        return f.status == EVC_ERR_INVALID_INPUT ? kExitInvalid : kExitRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitInvalid;
}
