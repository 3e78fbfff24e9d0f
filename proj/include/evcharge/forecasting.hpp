// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evcharge/calendar.hpp"
#include "evcharge/core.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace evc::fc {

/// k lagged loads, l planned loads, then the scalar features.
struct FeatureLayout {
    int lags = 96;
    int horizon = 32;

    static constexpr int kScalars = 10;  // n_active, n_chargers, 6 positional, workday_24h, padded
    int size() const { return lags + horizon + kScalars; }
    std::vector<std::string> names() const;
    void validate() const;

    bool operator==(const FeatureLayout&) const = default;
};

struct FeatureVector {
    std::vector<double> recent_loads;  // oldest first, ending at now - 1
    std::vector<double> planned;       // now .. now + l - 1, user n as REGULAR
    int n_active = 0;                  // including user n
    int n_chargers = 0;
    /// sin/cos of time of day, of week, of year.
    std::array<double, 6> positional{};
    bool workday_24h = false;
    bool history_padded = false;

    std::vector<double> flatten() const;
    /// Inverse of flatten().
    static FeatureVector unflatten(std::span<const double> x, const FeatureLayout& layout);
};

/// `history` is the realized station load for every step before `state.now` that the
/// caller knows about (the last entry is step now - 1).
FeatureVector build_features(const StationState& state, std::span<const double> history,
                             const PowerProfile& new_user_regular, Minutes clock,
                             const WorkdayCalendar& cal, const StationParams& p,
                             const FeatureLayout& layout = {});

/// Committed station plan over now .. now + l - 1 with user n as REGULAR: the clipping floor
/// and the naive forecast.
std::vector<double> planned_profile(const StationState& state, const PowerProfile& new_user_regular,
                                    const StationParams& p, int horizon);

struct ForecastVector {
    std::vector<double> psi;
    std::string provenance;
    std::vector<bool> clipped;
};

/// Raises each entry to at least the committed floor (and to 0).
ForecastVector clip_forecast(std::vector<double> psi, std::span<const double> floor, std::string provenance);

/// Forecast rewritten as G_hat^m_tau = offset_m[tau - start] + sum of decision variables at tau
/// (plus user n's scheduled power in the SCHEDULED scenario).
struct ForecastUpdate {
    int start = 0;
    std::vector<double> offset_reg;
    std::vector<double> offset_sch;
};

/// offset_reg = psi - sum of committed scheduled plans; offset_sch also removes user n's
/// REGULAR draw.
ForecastUpdate update_forecast(std::span<const double> psi, int start, std::span<const PowerProfile> committed,
                               const PowerProfile& new_user_regular);

/// Evaluates G_hat for concrete profiles. `new_user_sch` is ignored for the REGULAR scenario.
double forecast_load(const ForecastUpdate& u, Choice scenario, int tau, std::span<const PowerProfile> plans,
                     const PowerProfile* new_user_sch);

// ---- elastic net -----------------------------------------------------------------------------

struct ElasticNetOptions {
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    double tol = 1e-10;
    int max_sweeps = 100000;

    bool operator==(const ElasticNetOptions&) const = default;
};

/// Fit on already standardized columns: minimize (1/2N)||y - b - Xw||^2 + l1 |w|_1 + l2 |w|^2.
/// `x` is row-major N x p.
struct ElasticNetFit {
    std::vector<double> weights;
    double intercept = 0.0;
    int sweeps = 0;
    std::vector<double> objective_trace;  // after each sweep
};

ElasticNetFit fit_elastic_net(std::span<const double> x, int n_rows, int n_cols, std::span<const double> y,
                              const ElasticNetOptions& opts);

double elastic_net_objective(std::span<const double> x, int n_rows, int n_cols, std::span<const double> y,
                             const ElasticNetFit& fit, const ElasticNetOptions& opts);

/// Column means and population standard deviations; zero-variance columns are dropped.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<int> kept;  // original column indices that survive
};

Standardizer fit_standardizer(std::span<const double> x, int n_rows, int n_cols);
std::vector<double> standardize(const Standardizer& s, std::span<const double> x, int n_rows, int n_cols);

/// One elastic-net regression per horizon step, sharing one standardization.
struct LinearModel {
    FeatureLayout layout;
    Standardizer scaler;
    std::vector<std::vector<double>> weights;  // horizon x kept
    std::vector<double> intercepts;
    ElasticNetOptions options;
    int n_samples = 0;

    bool trained() const { return !weights.empty(); }
    std::vector<double> predict(std::span<const double> features) const;
};

/// `features` is N x layout.size(), `targets` is N x layout.horizon, both row-major.
LinearModel train_linear_model(std::span<const double> features, std::span<const double> targets, int n_rows,
                               const FeatureLayout& layout, const ElasticNetOptions& opts);

/// Workday and non-workday models. Either may be untrained, in which case the other is used.
struct ForecastModel {
    LinearModel workday;
    LinearModel non_workday;
    double training_rmse = 0.0;

    const LinearModel& select(bool workday_now) const;
};

void save_model(const ForecastModel& m, const std::filesystem::path& path);
ForecastModel load_model(const std::filesystem::path& path);

/// Root mean square over all entries.
double rmse(std::span<const double> predicted, std::span<const double> actual);

// ---- forecasters -----------------------------------------------------------------------------

class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::string id() const = 0;
    /// Raw prediction for steps now .. now + l - 1, before clipping.
    virtual std::vector<double> predict(const FeatureVector& f, bool workday_now) const = 0;
};

class NaiveForecaster final : public Forecaster {
public:
    std::string id() const override { return "naive"; }
    std::vector<double> predict(const FeatureVector& f, bool) const override { return f.planned; }
};

class LinearForecaster final : public Forecaster {
public:
    explicit LinearForecaster(ForecastModel m) : model_(std::move(m)) {}
    std::string id() const override { return "linear"; }
    std::vector<double> predict(const FeatureVector& f, bool workday_now) const override;
    const ForecastModel& model() const { return model_; }

private:
    ForecastModel model_;
};

/// Runs an external program per forecast. The command template gets `{features}` and
/// `{predictions}` replaced by file paths; the program reads one CSV header plus one row of
/// features and writes one row of `horizon` comma-separated predictions.
class ExternalForecaster final : public Forecaster {
public:
    ExternalForecaster(std::string command_template, std::filesystem::path work_dir, FeatureLayout layout);
    std::string id() const override { return "external"; }
    std::vector<double> predict(const FeatureVector& f, bool workday_now) const override;

private:
    std::string command_;
    std::filesystem::path work_dir_;
    FeatureLayout layout_;
};

} // namespace evc::fc
