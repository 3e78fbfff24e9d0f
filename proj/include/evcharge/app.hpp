// SPDX-License-Identifier: Apache-2.0
// Workflows behind the command-line subcommands.
#pragma once

#include "evcharge/io.hpp"

#include <memory>

namespace evc::app {

/// Sets the spdlog level named in the config.
void configure_logging(const io::AppConfig& c);

/// The synthetic workload for the configured year and months, drawn from `seed`.
std::vector<sim::MonthWorkload> synthetic_workload(const io::AppConfig& c, std::uint64_t seed);

/// Session CSV when `paths.sessions` is set, the synthetic workload from `run.data_seed` otherwise.
std::vector<sim::MonthWorkload> workload(const io::AppConfig& c);

/// Forecaster named by `forecaster.kind`. The linear one loads `paths.model`.
std::unique_ptr<fc::Forecaster> make_forecaster(const io::AppConfig& c);

/// monte_carlo over `workload(c)` with the configured controller.
sim::RunResult simulate(const io::AppConfig& c);

/// (features, realized l-step load) pairs split by workday, from baseline-controlled runs.
struct TrainingData {
    fc::FeatureLayout layout;
    std::vector<double> x[2];  // [0] non-workday, [1] workday; row-major
    std::vector<double> y[2];
    int rows[2] = {0, 0};

    int total() const { return rows[0] + rows[1]; }
};

/// Baseline simulations with `forecaster.training_seed` and `forecaster.training_replications`.
/// Uses the session CSV when one is configured, otherwise a synthetic workload independent of
/// the evaluation one.
TrainingData collect_training(const io::AppConfig& c);

/// Elastic-net models per day type; training_rmse is the mean per-sample horizon RMSE.
fc::ForecastModel train_forecaster(const io::AppConfig& c, const TrainingData& data);

/// Mean per-sample horizon RMSE of `f` on the training set.
double training_rmse(const fc::Forecaster& f, const TrainingData& data);

/// MPC runs with the naive forecaster and, when a model file is configured, the linear one.
/// Each carries its training RMSE for the RMSE table.
std::vector<io::SavedRun> eval_forecasters(const io::AppConfig& c, std::vector<sim::RunResult>* runs = nullptr);

} // namespace evc::app
