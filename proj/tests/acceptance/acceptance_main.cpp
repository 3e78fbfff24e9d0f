// SPDX-License-Identifier: Apache-2.0
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
// criterion fails that is not listed in --known-failures.
#include "evcharge/app.hpp"
#include "evcharge/choice_model.hpp"
#include "evcharge/controllers.hpp"
#include "evcharge/errors.hpp"
#include "evcharge/forecasting.hpp"
#include "evcharge/io.hpp"
#include "support/choice_oracle.hpp"
#include "support/enet_oracle.hpp"
#include "support/instances.hpp"
#include "support/lp_oracle.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace evc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

std::string num(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string pct(double v) { return num("%+.2f%%", v); }

double change(double x, double base) { return 100.0 * (x - base) / base; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- criteria 1, 2, 7 (runs), 8 ----------------------------------------------------------------

struct Experiment {
    sim::RunResult baseline;
    std::vector<sim::RunResult> mpc;  // naive, linear
    std::vector<io::SavedRun> saved;  // baseline first
    std::string cost_table;
    std::string rmse_table;
};

/// Baseline plus MPC with each bundled forecaster, everything written under `dir`.
Experiment run_experiment(const io::AppConfig& base_cfg, const fs::path& dir) {
    fs::create_directories(dir);
    Experiment e;

    const auto data = app::collect_training(base_cfg);
    const auto model = app::train_forecaster(base_cfg, data);
    const fs::path model_path = dir / "linear_model.txt";
    fc::save_model(model, model_path);

    io::AppConfig c = base_cfg;
    c.sim.controller.mode = ctl::Mode::Baseline;
    e.baseline = app::simulate(c);
    io::write_run(dir / "baseline", e.baseline, c.sim.tariff, c.sim.controller.station.delta_t_h);
    e.saved.push_back(io::saved(e.baseline));

    for (const char* kind : {"naive", "linear"}) {
        io::AppConfig m = base_cfg;
        m.sim.controller.mode = ctl::Mode::Mpc;
        m.forecaster.kind = kind;
        m.paths.model = model_path.string();
        auto run = app::simulate(m);
        run.training_rmse = app::training_rmse(*app::make_forecaster(m), data);
        io::write_run(dir / ("mpc-" + std::string(kind)), run, m.sim.tariff, m.sim.controller.station.delta_t_h);
        e.saved.push_back(io::saved(run));
        e.mpc.push_back(std::move(run));
    }
    e.cost_table = io::render_cost_table(e.saved);
    e.rmse_table = io::render_rmse_table(e.saved);
    io::write_file_atomic(dir / "tables.md", "Mean cost and revenue per billing cycle\n\n" + e.cost_table +
                                                 "\nForecast accuracy and peak power\n\n" + e.rmse_table);
    return e;
}

Verdict criterion1(const Experiment& e) {
    const double base = e.baseline.summary().demand_charge;
    Verdict v{1, "demand-charge reduction (MPC at least 5% below baseline)", true, ""};
    v.detail = "baseline $" + num("%.2f", base);
    for (const auto& r : e.mpc) {
        const double d = change(r.summary().demand_charge, base);
        v.pass = v.pass && d <= -5.0;
        v.detail += ", " + r.label + " $" + num("%.2f", r.summary().demand_charge) + " (" + pct(d) + ")";
    }
    v.detail += "; bar -5.00%";
    return v;
}

Verdict criterion2(const Experiment& e) {
    const double base = e.baseline.summary().cost;
    Verdict v{2, "total-cost ordering (MPC cost <= baseline for every forecaster)", true, ""};
    v.detail = "baseline $" + num("%.2f", base);
    bool target = true;
    for (const auto& r : e.mpc) {
        const double d = change(r.summary().cost, base);
        v.pass = v.pass && d <= 0.0;
        target = target && d <= -1.0;
        v.detail += ", " + r.label + " " + pct(d);
    }
    v.detail += target ? "; 1% target met" : "; 1% target not met";
    return v;
}

// ---- criterion 3 -------------------------------------------------------------------------------

Verdict criterion3(int n_instances) {
    const StationParams p;
    const auto menus = ctl::PriceGrid{}.points();
    double energy = 0.0, power = 0.0, cap = 0.0, tight = 0.0;
    int decisions = 0;
    std::mt19937_64 rng(5003);
    for (ctl::Mode m : {ctl::Mode::Baseline, ctl::Mode::Threshold, ctl::Mode::Softplus, ctl::Mode::Mpc}) {
        ctl::ControllerSettings s;
        s.mode = m;
        const ctl::Controller c(s);
        for (int i = 0; i < n_instances; ++i) {
            const auto in = testing::random_instance(rng, p);
            const auto d = c.decide(in.context());
            ++decisions;
            energy = std::max(energy, testing::energy_error(in, d, p));
            power = std::max(power, testing::power_error(in, d, p));
            if (m == ctl::Mode::Threshold) {
                int t_end = in.arrival.departure;
                for (const auto& a : in.state.active) t_end = std::max(t_end, a.departure);
                for (int tau = in.state.now; tau < t_end; ++tau)
                    for (Choice sc : {Choice::Scheduled, Choice::Regular})
                        cap = std::max(cap, ctl::scenario_load(in.context(), d, sc, tau, p) - *d.threshold);
            }
            if (m == ctl::Mode::Baseline) {
                // the LP's expected cost against the cost recomputed from the plans with the true peak
                const double exact = d.probs.p_sch * testing::scenario_cost(in, d, Choice::Scheduled, p) +
                                     d.probs.p_reg * testing::scenario_cost(in, d, Choice::Regular, p);
                tight = std::max(tight, std::abs(d.expected_cost - exact));
            }
        }
    }
    const double tol = 1e-6;
    Verdict v{3, "controller correctness on random arrivals", energy <= tol && power <= tol && cap <= tol && tight <= tol,
              ""};
    v.detail = std::to_string(n_instances) + " instances x 4 modes; max energy error " + num("%.2e", energy) +
               " kWh, bound error " + num("%.2e", power) + " kW, threshold excess " + num("%.2e", std::max(cap, 0.0)) +
               " kW, epigraph gap " + num("%.2e", tight) + " $; tol 1e-06";
    return v;
}

// ---- criterion 4 -------------------------------------------------------------------------------

Verdict criterion4() {
    std::mt19937_64 rng(20231);
    double worst = 0.0;
    int solved = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto prog = testing::random_feasible_lp(rng, 5, 8);
        const auto oracle = testing::vertex_enumeration_minimum(prog);
        const auto s = lp::solve(prog);
        if (!oracle || !s.optimal()) {
            worst = INFINITY;
            continue;
        }
        ++solved;
        worst = std::max(worst, std::abs(s.objective_value - *oracle));
    }

    // single-user toys: the grid search against a cold solve of every menu
    const StationParams p;
    const auto menus = ctl::PriceGrid{}.points();
    ctl::ControllerSettings s;
    int same = 0;
    double cost_gap = 0.0;
    std::mt19937_64 toy_rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const auto in = testing::random_instance(toy_rng, p, 0);
        const auto d = ctl::optimize_menu(in.context(), menus, s);
        double best = 0.0;
        PriceMenu arg{};
        bool first = true;
        for (const auto& m : menus) {
            const auto prob = ctl::build_expected_cost_lp(in.context(), m, s);
            const auto sol = lp::solve(prob.program);
            if (!sol.optimal()) continue;
            const double c = sol.objective_value + prob.constant;
            const bool tie = !first && std::abs(c - best) <= 1e-9;
            if (first || (!tie && c < best) ||
                (tie && std::pair{m.z_reg, m.z_sch} < std::pair{arg.z_reg, arg.z_sch})) {
                best = c;
                arg = m;
                first = false;
            }
        }
        if (d.menu == arg) ++same;
        cost_gap = std::max(cost_gap, std::abs(d.expected_cost - best));
    }
    Verdict v{4, "oracle equivalence (LP vs vertex enumeration, grid search vs exhaustive)",
              solved == 100 && worst <= 1e-6 && same == 20, ""};
    v.detail = std::to_string(solved) + "/100 LPs solved, max objective gap " + num("%.2e", worst) + " (tol 1e-06); " +
               std::to_string(same) + "/20 toy menus identical, max expected-cost gap " + num("%.2e", cost_gap);
    return v;
}

// ---- criterion 5 -------------------------------------------------------------------------------

Verdict criterion5() {
    const choice::Coefficients c;
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> z(0.0, 2.0);
    double norm = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto d = choice::choice_probabilities({z(rng), z(rng)}, c, 6.6);
        norm = std::max(norm, std::abs(d.p_reg + d.p_sch + d.p_leave - 1.0));
    }
    const auto d = choice::choice_probabilities({0.30, 0.30}, c, 6.6);
    const auto o = testing::scalar_logit(0.30, 0.30, 6.6, 0.0184, 0.341, -1.0, 0.005);
    const double vs_oracle =
        std::max({std::abs(d.p_leave - o.leave), std::abs(d.p_sch - o.sch), std::abs(d.p_reg - o.reg)});
    const double vs_ref =
        std::max({std::abs(d.p_leave - 0.1338), std::abs(d.p_sch - 0.3600), std::abs(d.p_reg - 0.5062)});
    Verdict v{5, "choice model", norm <= 1e-12 && vs_oracle <= 1e-3 && vs_ref <= 1e-3, ""};
    v.detail = "max |sum - 1| " + num("%.2e", norm) + " over 1000 menus (tol 1e-12); (0.30, 0.30) -> (" +
               num("%.4f", d.p_leave) + ", " + num("%.4f", d.p_sch) + ", " + num("%.4f", d.p_reg) +
               "), off the scalar oracle by " + num("%.1e", vs_oracle) + " and the reference by " +
               num("%.1e", vs_ref) + " (tol 1e-03)";
    return v;
}

// ---- criterion 6 -------------------------------------------------------------------------------

double dense_gap(const ctl::SoftplusPwl& f, double lo, double hi) {
    double worst = 0.0;
    const int n = 1000000;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double exact = std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
        const double g = exact - f(x);
        if (g < -1e-12) return INFINITY;  // the tangent max must stay below
        worst = std::max(worst, g);
    }
    return worst;
}

Verdict criterion6() {
    const ctl::ControllerSettings s;
    const double range = s.effective_softplus_range() * s.softplus_scale;
    const double configured = dense_gap(ctl::softplus_pwl(-range, range, s.softplus_segments), -range, range);
    const double narrow = dense_gap(ctl::softplus_pwl(-30.0, 30.0, 16), -30.0, 30.0);
    const double at0 = std::abs(ctl::softplus(0.0) - std::log(2.0));
    Verdict v{6, "softplus piecewise-linear bound", configured < 0.08 && narrow < 0.08 && at0 <= 1e-12, ""};
    v.detail = "max gap " + num("%.4f", configured) + " on [-" + num("%.1f", range) + ", " + num("%.1f", range) +
               "] and " + num("%.4f", narrow) + " on [-30, 30] with " + std::to_string(s.softplus_segments) +
               " segments (bound 0.08); |softplus(0) - ln 2| " + num("%.1e", at0);
    return v;
}

// ---- criterion 7 -------------------------------------------------------------------------------

Verdict criterion7(const Experiment& e) {
    const auto f = testing::enet_fixture();
    double worst = 0.0;
    for (const auto& [l1, l2] : {std::pair{0.1, 0.1}, {0.0, 0.0}, {0.05, 0.5}, {0.3, 0.0}}) {
        const auto fit = fc::fit_elastic_net(f.x, f.n, f.p, f.y, {l1, l2, 1e-12, 100000});
        const auto o = testing::enet_oracle(f.x, f.y, f.n, f.p, l1, l2);
        worst = std::max({worst, std::abs(fit.weights[0] - o.w[0]), std::abs(fit.weights[1] - o.w[1]),
                          std::abs(fit.intercept - o.b)});
    }
    int forecasts = 0, below = 0;
    bool table = e.rmse_table.find("Training RMSE") != std::string::npos;
    for (const auto& r : e.mpc) {
        for (const auto& m : r.months) {
            forecasts += m.forecasts;
            below += m.forecast_clip_violations;
        }
        table = table && r.training_rmse >= 0.0 && r.summary().simulation_rmse >= 0.0 &&
                e.rmse_table.find(r.label) != std::string::npos;
    }
    Verdict v{7, "forecaster suite", worst <= 1e-6 && forecasts > 0 && below == 0 && table, ""};
    v.detail = "elastic net vs oracle " + num("%.2e", worst) + " (tol 1e-06); " + std::to_string(below) + " of " +
               std::to_string(forecasts) + " emitted forecasts below the committed plan; RMSE table";
    for (const auto& r : e.mpc)
        v.detail += ", " + r.label + " train " + num("%.2f", r.training_rmse) + " / sim " +
                    num("%.2f", r.summary().simulation_rmse) + " kW";
    return v;
}

// ---- criterion 8 -------------------------------------------------------------------------------

Verdict criterion8(const fs::path& a, const fs::path& b) {
    std::set<fs::path> names;
    for (const auto& root : {a, b})
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file()) names.insert(fs::relative(entry.path(), root));
    int differ = 0;
    std::string first;
    for (const auto& n : names) {
        if (!fs::exists(a / n) || !fs::exists(b / n) || slurp(a / n) != slurp(b / n)) {
            if (differ++ == 0) first = n.string();
        }
    }
    Verdict v{8, "determinism (rerun gives byte-identical reports)", differ == 0 && !names.empty(), ""};
    v.detail = std::to_string(names.size()) + " files compared, " + std::to_string(differ) + " differ";
    if (differ) v.detail += " (first: " + first + ")";
    v.detail += "; rerun used a different thread count";
    return v;
}

std::set<int> read_known_failures(const std::string& path) {
    std::set<int> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    for (std::string line; std::getline(in, line);) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        int id = 0;
        if (ss >> id) out.insert(id);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Acceptance criteria 1-8"};
    std::string config = std::string(EVC_SOURCE_DIR) + "/config/default.yaml";
    std::string out = "acceptance-out";
    std::string known;
    int threads = 0;
    int instances = 500;
    cli.add_option("--config", config, "Experiment config (the bundled workload by default)");
    cli.add_option("--out", out, "Directory for the experiment reports");
    cli.add_option("--known-failures", known, "File listing criterion numbers expected to fail");
    cli.add_option("--threads", threads, "Worker threads for the first run (0: all cores)");
    CLI11_PARSE(cli, argc, argv);

    spdlog::set_level(spdlog::level::warn);
    using clock = std::chrono::steady_clock;
    std::vector<Verdict> verdicts;
    auto timed = [&](auto&& f) {
        const auto t0 = clock::now();
        Verdict v = f();
        const double s = std::chrono::duration<double>(clock::now() - t0).count();
        v.detail += "; " + num("%.1f", s) + " s";
        std::printf("[%s] criterion %d: %s: %s\n", v.pass ? "PASS" : "FAIL", v.id, v.name.c_str(), v.detail.c_str());
        std::fflush(stdout);
        verdicts.push_back(v);
    };

    try {
        io::AppConfig cfg = io::load_config(config);
        cfg.sim.replications = 10;
        cfg.sim.threads = threads;
        std::printf("workload: %zu month(s) of %d, %d replications, master seed %llu, demand rate $%.2f/kW\n",
                    cfg.run.months.size(), cfg.run.year, cfg.sim.replications,
                    static_cast<unsigned long long>(cfg.sim.seed), cfg.sim.tariff.demand_rate);
        const fs::path root = fs::absolute(out);
        fs::remove_all(root / "run");
        fs::remove_all(root / "rerun");

        const auto t0 = clock::now();
        const Experiment e = run_experiment(cfg, root / "run");
        const double exp_s = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("experiment finished in %.1f s; reports in %s\n\n%s\n%s\n", exp_s, (root / "run").string().c_str(),
                    e.cost_table.c_str(), e.rmse_table.c_str());

        timed([&] { return criterion1(e); });
        timed([&] { return criterion2(e); });
        timed([&] { return criterion3(instances); });
        timed([&] { return criterion4(); });
        timed([&] { return criterion5(); });
        timed([&] { return criterion6(); });
        timed([&] { return criterion7(e); });
        timed([&] {
            io::AppConfig again = cfg;
            again.sim.threads = threads == 1 ? 2 : 1;
            run_experiment(again, root / "rerun");
            return criterion8(root / "run", root / "rerun");
        });
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "acceptance aborted: %s\n", ex.what());
        return 1;
    }

    const auto expected = read_known_failures(known);
    int failed = 0, unexpected = 0;
    for (const auto& v : verdicts) {
        if (v.pass) continue;
        ++failed;
        if (!expected.count(v.id)) ++unexpected;
    }
    std::printf("\n%zu of %zu criteria passed\n", verdicts.size() - std::size_t(failed), verdicts.size());
    for (const int id : expected) {
        const auto it = std::find_if(verdicts.begin(), verdicts.end(), [&](const Verdict& v) { return v.id == id; });
        if (it != verdicts.end())
            std::printf("criterion %d is listed as a known failure and %s\n", id,
                        it->pass ? "now passes; remove it from the list" : "still fails");
    }
    if (!known.empty()) std::printf("%d unexpected failure(s)\n", unexpected);
    return unexpected == 0 ? 0 : 1;
}
