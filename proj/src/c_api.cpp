// SPDX-License-Identifier: Apache-2.0
#include "evcharge/evcharge.h"

#include "evcharge/app.hpp"
#include "evcharge/errors.hpp"

#include <cstring>
#include <filesystem>
#include <new>

struct evc_config {
    evc::io::AppConfig cfg;
};

struct evc_run {
    evc::sim::RunResult run;
};

namespace {

thread_local std::string g_last_error;

evc_status fail(evc_status s, const char* what) {
    g_last_error = what;
    return s;
}

template <class F>
evc_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return EVC_OK;
    } catch (const evc::InvalidInput& e) {
        return fail(EVC_ERR_INVALID_INPUT, e.what());
    } catch (const evc::InfeasibleError& e) {
        return fail(EVC_ERR_INFEASIBLE, e.what());
    } catch (const evc::SolverError& e) {
        return fail(EVC_ERR_SOLVER, e.what());
    } catch (const evc::InvariantError& e) {
        return fail(EVC_ERR_INVARIANT, e.what());
    } catch (const evc::DomainError& e) {
        return fail(EVC_ERR_DOMAIN, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(EVC_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(EVC_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(EVC_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(EVC_ERR_INTERNAL, "unknown error");
    }
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void need(const void* p, const char* name) {
    if (!p) throw evc::InvalidInput(std::string(name) + " must not be NULL");
}

} // namespace

extern "C" {

const char* evc_version(void) { return "0.1.0"; }

const char* evc_last_error(void) { return g_last_error.c_str(); }

const char* evc_status_name(evc_status s) {
    switch (s) {
    case EVC_OK: return "ok";
    case EVC_ERR_INVALID_INPUT: return "invalid input";
    case EVC_ERR_DOMAIN: return "domain error";
    case EVC_ERR_INFEASIBLE: return "infeasible";
    case EVC_ERR_SOLVER: return "solver failure";
    case EVC_ERR_INVARIANT: return "invariant violated";
    case EVC_ERR_IO: return "i/o error";
    case EVC_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void evc_string_free(char* s) { std::free(s); }

evc_status evc_config_default(evc_config** out) {
    return guarded([&] {
        need(out, "out");
        *out = new evc_config{};
    });
}

evc_status evc_config_load(const char* path, evc_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        auto c = std::make_unique<evc_config>();
        c->cfg = evc::io::load_config(path);
        *out = c.release();
    });
}

evc_status evc_config_parse(const char* yaml_text, evc_config** out) {
    return guarded([&] {
        need(yaml_text, "yaml_text");
        need(out, "out");
        *out = nullptr;
        auto c = std::make_unique<evc_config>();
        c->cfg = evc::io::parse_config(yaml_text, "config", std::filesystem::current_path());
        *out = c.release();
    });
}

void evc_config_free(evc_config* cfg) { delete cfg; }

evc_status evc_config_set(evc_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        need(cfg, "cfg");
        need(key, "key");
        need(value, "value");
        evc::io::apply_override(cfg->cfg, key, value);
    });
}

evc_status evc_config_limit_months(evc_config* cfg, int n) {
    return guarded([&] {
        need(cfg, "cfg");
        auto& months = cfg->cfg.run.months;
        if (n < 1 || std::size_t(n) > months.size())
            throw evc::InvalidInput("--months must be between 1 and " + std::to_string(months.size()));
        months.resize(std::size_t(n));
    });
}

evc_status evc_config_dump(const evc_config* cfg, char** yaml_out) {
    return guarded([&] {
        need(cfg, "cfg");
        need(yaml_out, "yaml_out");
        *yaml_out = dup(evc::io::dump_config(cfg->cfg));
    });
}

evc_status evc_config_out_dir(const evc_config* cfg, char** path_out) {
    return guarded([&] {
        need(cfg, "cfg");
        need(path_out, "path_out");
        *path_out = dup(cfg->cfg.resolve(cfg->cfg.paths.out).string());
    });
}

evc_status evc_config_apply_logging(const evc_config* cfg) {
    return guarded([&] {
        need(cfg, "cfg");
        evc::app::configure_logging(cfg->cfg);
    });
}

evc_status evc_simulate(const evc_config* cfg, evc_run** out) {
    return guarded([&] {
        need(cfg, "cfg");
        need(out, "out");
        *out = nullptr;
        auto r = std::make_unique<evc_run>();
        r->run = evc::app::simulate(cfg->cfg);
        *out = r.release();
    });
}

void evc_run_free(evc_run* run) { delete run; }

evc_status evc_run_summary(const evc_run* run, evc_summary* out) {
    return guarded([&] {
        need(run, "run");
        need(out, "out");
        const auto s = run->run.summary();
        *out = evc_summary{s.demand_charge, s.tou,    s.revenue,  s.cost,         s.profit,
                           s.peak,          s.simulation_rmse, run->run.training_rmse, s.cycles, s.arrivals,
                           s.rejected,      s.invariant_violations, s.forecast_clip_violations};
    });
}

evc_status evc_run_label(const evc_run* run, char** label_out) {
    return guarded([&] {
        need(run, "run");
        need(label_out, "label_out");
        *label_out = dup(run->run.label);
    });
}

evc_status evc_run_write(const evc_run* run, const evc_config* cfg, const char* dir) {
    return guarded([&] {
        need(run, "run");
        need(cfg, "cfg");
        need(dir, "dir");
        evc::io::write_run(dir, run->run, cfg->cfg.sim.tariff, cfg->cfg.sim.controller.station.delta_t_h);
    });
}

evc_status evc_train_forecaster(const evc_config* cfg, const char* model_path, double* training_rmse_out) {
    return guarded([&] {
        need(cfg, "cfg");
        need(model_path, "model_path");
        const auto data = evc::app::collect_training(cfg->cfg);
        const auto model = evc::app::train_forecaster(cfg->cfg, data);
        const std::filesystem::path p(model_path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        evc::fc::save_model(model, p);
        if (training_rmse_out) *training_rmse_out = model.training_rmse;
    });
}

evc_status evc_eval_forecasters(const evc_config* cfg, const char* out_dir, char** table_out) {
    return guarded([&] {
        need(cfg, "cfg");
        need(table_out, "table_out");
        std::vector<evc::sim::RunResult> runs;
        const auto saved = evc::app::eval_forecasters(cfg->cfg, &runs);
        if (out_dir)
            for (const auto& r : runs)
                evc::io::write_run(std::filesystem::path(out_dir) / ("mpc-" + r.forecaster), r, cfg->cfg.sim.tariff,
                                   cfg->cfg.sim.controller.station.delta_t_h);
        *table_out = dup(evc::io::render_rmse_table(saved));
    });
}

evc_status evc_generate_data(const evc_config* cfg, const char* csv_path, size_t* n_sessions_out) {
    return guarded([&] {
        need(cfg, "cfg");
        need(csv_path, "csv_path");
        std::vector<evc::sim::SessionRecord> all;
        for (auto& m : evc::app::synthetic_workload(cfg->cfg, cfg->cfg.run.data_seed))
            all.insert(all.end(), m.sessions.begin(), m.sessions.end());
        evc::io::write_sessions(csv_path, all);
        if (n_sessions_out) *n_sessions_out = all.size();
    });
}

evc_status evc_report(const char* const* run_dirs, size_t n_dirs, char** cost_table_out, char** rmse_table_out) {
    return guarded([&] {
        need(run_dirs, "run_dirs");
        if (n_dirs == 0) throw evc::InvalidInput("no run directories given");
        std::vector<evc::io::SavedRun> runs;
        for (size_t i = 0; i < n_dirs; ++i) {
            need(run_dirs[i], "run directory");
            runs.push_back(evc::io::read_run(run_dirs[i]));
        }
        if (cost_table_out) *cost_table_out = dup(evc::io::render_cost_table(runs));
        if (rmse_table_out) *rmse_table_out = dup(evc::io::render_rmse_table(runs));
    });
}

} // extern "C"
