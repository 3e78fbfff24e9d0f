// SPDX-License-Identifier: Apache-2.0
#include "evcharge/app.hpp"

#include "evcharge/errors.hpp"

#include <spdlog/spdlog.h>

namespace evc::app {

void configure_logging(const io::AppConfig& c) { spdlog::set_level(spdlog::level::from_str(c.log_level)); }

std::vector<sim::MonthWorkload> synthetic_workload(const io::AppConfig& c, std::uint64_t seed) {
    std::vector<sim::MonthWorkload> out;
    auto params = c.synthetic;
    params.p_max_kw = c.sim.controller.station.p_max_kw;
    for (const unsigned m : c.run.months) {
        // keyed by calendar month so a month's sessions do not depend on which others run
        const std::uint64_t s = sim::replication_seed(seed, c.run.year * 12 + int(m), 0);
        out.push_back(sim::generate_synthetic_month(params, c.run.year, m, c.sim.calendar, s));
    }
    return out;
}

std::vector<sim::MonthWorkload> workload(const io::AppConfig& c) {
    if (c.paths.sessions.empty()) return synthetic_workload(c, c.run.data_seed);
    const auto records = io::read_sessions(c.resolve(c.paths.sessions));
    auto months = io::split_by_month(records, c.run.year, c.run.months);
    for (const auto& m : months)
        if (m.sessions.empty()) spdlog::warn("no sessions in {:04d}-{:02d}", m.year, m.month);
    return months;
}

std::unique_ptr<fc::Forecaster> make_forecaster(const io::AppConfig& c) {
    const auto& kind = c.forecaster.kind;
    if (kind == "naive") return std::make_unique<fc::NaiveForecaster>();
    if (kind == "linear") {
        if (c.paths.model.empty()) throw InvalidInput("the linear forecaster needs paths.model");
        return std::make_unique<fc::LinearForecaster>(fc::load_model(c.resolve(c.paths.model)));
    }
    if (kind == "external")
        return std::make_unique<fc::ExternalForecaster>(c.forecaster.external_command,
                                                        c.resolve(c.paths.out) / "external-work", c.sim.features);
    throw InvalidInput("unknown forecaster '" + kind + "'");
}

sim::RunResult simulate(const io::AppConfig& c) {
    c.validate();
    const auto months = workload(c);
    const bool mpc = c.sim.controller.mode == ctl::Mode::Mpc;
    std::unique_ptr<fc::Forecaster> f;
    if (mpc) f = make_forecaster(c);
    const std::string label = sim::run_label(c.sim.controller.mode, mpc ? f->id() : "");
    spdlog::info("{}: {} month(s) x {} replication(s), seed {}", label, months.size(), c.sim.replications, c.sim.seed);
    auto run = sim::monte_carlo(months, c.sim, f.get(), label);
    if (auto* lin = dynamic_cast<const fc::LinearForecaster*>(f.get())) run.training_rmse = lin->model().training_rmse;
    return run;
}

TrainingData collect_training(const io::AppConfig& c) {
    c.validate();
    io::AppConfig tc = c;
    tc.sim.controller.mode = ctl::Mode::Baseline;
    tc.sim.record_training = true;
    tc.sim.seed = c.forecaster.training_seed;
    tc.sim.replications = c.forecaster.training_replications;
    const auto months = c.paths.sessions.empty() ? synthetic_workload(c, c.forecaster.training_seed) : workload(c);
    const auto run = sim::monte_carlo(months, tc.sim, nullptr, "training");

    TrainingData d;
    d.layout = c.sim.features;
    for (const auto& m : run.months)
        for (const auto& s : m.samples) {
            const int k = s.workday ? 1 : 0;
            d.x[k].insert(d.x[k].end(), s.features.begin(), s.features.end());
            d.y[k].insert(d.y[k].end(), s.target.begin(), s.target.end());
            ++d.rows[k];
        }
    spdlog::info("training set: {} workday and {} non-workday samples", d.rows[1], d.rows[0]);
    if (d.total() == 0) throw DomainError("the training simulation produced no samples");
    return d;
}

double training_rmse(const fc::Forecaster& f, const TrainingData& data) {
    const auto w = std::size_t(data.layout.size());
    const auto h = std::size_t(data.layout.horizon);
    double sum = 0.0;
    int n = 0;
    for (int k = 0; k < 2; ++k)
        for (int r = 0; r < data.rows[k]; ++r) {
            const std::span<const double> row(data.x[k].data() + std::size_t(r) * w, w);
            const auto fv = fc::FeatureVector::unflatten(row, data.layout);
            const auto psi = fc::clip_forecast(f.predict(fv, k == 1), fv.planned, f.id()).psi;
            sum += fc::rmse(psi, std::span(data.y[k].data() + std::size_t(r) * h, h));
            ++n;
        }
    return n ? sum / n : -1.0;
}

fc::ForecastModel train_forecaster(const io::AppConfig& c, const TrainingData& data) {
    fc::ForecastModel m;
    const auto& opts = c.forecaster.training;
    if (data.rows[1] > 0) m.workday = fc::train_linear_model(data.x[1], data.y[1], data.rows[1], data.layout, opts);
    if (data.rows[0] > 0) m.non_workday = fc::train_linear_model(data.x[0], data.y[0], data.rows[0], data.layout, opts);
    m.training_rmse = training_rmse(fc::LinearForecaster(m), data);
    spdlog::info("linear forecaster: training RMSE {:.3f} kW", m.training_rmse);
    return m;
}

std::vector<io::SavedRun> eval_forecasters(const io::AppConfig& c, std::vector<sim::RunResult>* runs) {
    const TrainingData data = collect_training(c);
    std::vector<io::SavedRun> out;
    std::vector<std::string> kinds{"naive"};
    if (!c.paths.model.empty()) kinds.push_back("linear");
    if (!c.forecaster.external_command.empty()) kinds.push_back("external");
    for (const auto& kind : kinds) {
        io::AppConfig ec = c;
        ec.sim.controller.mode = ctl::Mode::Mpc;
        ec.forecaster.kind = kind;
        auto run = simulate(ec);
        run.training_rmse = training_rmse(*make_forecaster(ec), data);
        out.push_back(io::saved(run));
        if (runs) runs->push_back(std::move(run));
    }
    return out;
}

} // namespace evc::app
