// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/forecasting.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace evc::fc {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

void check_shape(std::span<const double> x, int n_rows, int n_cols) {
    if (n_rows < 1 || n_cols < 0) throw DomainError("regression needs at least one sample");
    if (x.size() != std::size_t(n_rows) * std::size_t(n_cols)) throw DomainError("feature matrix has the wrong size");
}

} // namespace

ElasticNetFit fit_elastic_net(std::span<const double> x, int n_rows, int n_cols, std::span<const double> y,
                              const ElasticNetOptions& opts) {
    check_shape(x, n_rows, n_cols);
    if (y.size() != std::size_t(n_rows)) throw DomainError("target length does not match the feature rows");
    if (!(opts.lambda1 >= 0.0) || !(opts.lambda2 >= 0.0)) throw DomainError("penalties must be non-negative");
    const std::size_t n = std::size_t(n_rows), p = std::size_t(n_cols);
    const double inv_n = 1.0 / double(n);

    // centre columns and target; the intercept absorbs the means
    std::vector<double> xm(p, 0.0);
    double ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ym += y[i];
        for (std::size_t j = 0; j < p; ++j) xm[j] += x[i * p + j];
    }
    ym *= inv_n;
    for (auto& v : xm) v *= inv_n;

    // Gram matrix and correlations of the centred data, both scaled by 1/N
    std::vector<double> gram(p * p, 0.0), xy(p, 0.0);
    double yy = 0.0;
    std::vector<double> row(p);
    for (std::size_t i = 0; i < n; ++i) {
        const double yc = y[i] - ym;
        yy += yc * yc;
        for (std::size_t j = 0; j < p; ++j) row[j] = x[i * p + j] - xm[j];
        for (std::size_t j = 0; j < p; ++j) {
            xy[j] += row[j] * yc;
            const double rj = row[j];
            double* g = &gram[j * p];
            for (std::size_t k = j; k < p; ++k) g[k] += rj * row[k];
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        xy[j] *= inv_n;
        for (std::size_t k = j; k < p; ++k) {
            gram[j * p + k] *= inv_n;
            gram[k * p + j] = gram[j * p + k];
        }
    }
    yy *= inv_n;

    ElasticNetFit fit;
    fit.weights.assign(p, 0.0);
    auto& w = fit.weights;
    // gw = G w, kept current as coordinates move
    std::vector<double> gw(p, 0.0);
    auto objective = [&] {
        double quad = 0.0, lin = 0.0, l1 = 0.0, l2 = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            quad += w[j] * gw[j];
            lin += w[j] * xy[j];
            l1 += std::abs(w[j]);
            l2 += w[j] * w[j];
        }
        return 0.5 * (yy - 2.0 * lin + quad) + opts.lambda1 * l1 + opts.lambda2 * l2;
    };

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        double max_step = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double gjj = gram[j * p + j];
            if (gjj <= 0.0) continue;
            const double rho = xy[j] - (gw[j] - gjj * w[j]);
            const double wj = soft_threshold(rho, opts.lambda1) / (gjj + 2.0 * opts.lambda2);
            const double delta = wj - w[j];
            if (delta != 0.0) {
                const double* g = &gram[j * p];
                for (std::size_t k = 0; k < p; ++k) gw[k] += g[k] * delta;
                w[j] = wj;
                max_step = std::max(max_step, std::abs(delta));
            }
        }
        fit.sweeps = sweep + 1;
        fit.objective_trace.push_back(objective());
        if (max_step < opts.tol) break;
    }
    double b = ym;
    for (std::size_t j = 0; j < p; ++j) b -= xm[j] * w[j];
    fit.intercept = b;
    for (double v : w)
        if (!std::isfinite(v)) throw SolverError("elastic net produced a non-finite weight");
    return fit;
}

double elastic_net_objective(std::span<const double> x, int n_rows, int n_cols, std::span<const double> y,
                             const ElasticNetFit& fit, const ElasticNetOptions& opts) {
    check_shape(x, n_rows, n_cols);
    const std::size_t p = std::size_t(n_cols);
    double rss = 0.0;
    for (std::size_t i = 0; i < std::size_t(n_rows); ++i) {
        double pred = fit.intercept;
        for (std::size_t j = 0; j < p; ++j) pred += x[i * p + j] * fit.weights[j];
        rss += (y[i] - pred) * (y[i] - pred);
    }
    double l1 = 0.0, l2 = 0.0;
    for (double v : fit.weights) {
        l1 += std::abs(v);
        l2 += v * v;
    }
    return rss / (2.0 * n_rows) + opts.lambda1 * l1 + opts.lambda2 * l2;
}

Standardizer fit_standardizer(std::span<const double> x, int n_rows, int n_cols) {
    check_shape(x, n_rows, n_cols);
    const std::size_t n = std::size_t(n_rows), p = std::size_t(n_cols);
    Standardizer s;
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += x[i * p + j];
        m /= double(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (x[i * p + j] - m) * (x[i * p + j] - m);
        const double sd = std::sqrt(v / double(n));
        if (!(sd > 1e-12 * (1.0 + std::abs(m)))) {
            spdlog::debug("dropping constant feature column {}", j);
            continue;
        }
        s.kept.push_back(int(j));
        s.mean.push_back(m);
        s.scale.push_back(sd);
    }
    return s;
}

std::vector<double> standardize(const Standardizer& s, std::span<const double> x, int n_rows, int n_cols) {
    check_shape(x, n_rows, n_cols);
    const std::size_t k = s.kept.size(), p = std::size_t(n_cols);
    std::vector<double> out(std::size_t(n_rows) * k);
    for (std::size_t i = 0; i < std::size_t(n_rows); ++i)
        for (std::size_t c = 0; c < k; ++c) {
            const std::size_t j = std::size_t(s.kept[c]);
            if (j >= p) throw DomainError("standardizer does not match the feature width");
            out[i * k + c] = (x[i * p + j] - s.mean[c]) / s.scale[c];
        }
    return out;
}

std::vector<double> LinearModel::predict(std::span<const double> features) const {
    if (!trained()) throw DomainError("linear forecaster has no trained model");
    if (int(features.size()) != layout.size()) throw DomainError("feature vector has the wrong width");
    const auto z = standardize(scaler, features, 1, layout.size());
    std::vector<double> out(weights.size());
    for (std::size_t h = 0; h < weights.size(); ++h) {
        double v = intercepts[h];
        for (std::size_t c = 0; c < z.size(); ++c) v += weights[h][c] * z[c];
        out[h] = v;
    }
    return out;
}

LinearModel train_linear_model(std::span<const double> features, std::span<const double> targets, int n_rows,
                               const FeatureLayout& layout, const ElasticNetOptions& opts) {
    layout.validate();
    const int p = layout.size(), l = layout.horizon;
    check_shape(features, n_rows, p);
    if (targets.size() != std::size_t(n_rows) * std::size_t(l)) throw DomainError("target matrix has the wrong size");
    LinearModel m;
    m.layout = layout;
    m.options = opts;
    m.n_samples = n_rows;
    m.scaler = fit_standardizer(features, n_rows, p);
    if (int(m.scaler.kept.size()) < p)
        spdlog::warn("dropped {} constant feature column(s) before training", p - int(m.scaler.kept.size()));
    const auto z = standardize(m.scaler, features, n_rows, p);
    const int k = int(m.scaler.kept.size());
    std::vector<double> y(static_cast<std::size_t>(n_rows));
    for (int h = 0; h < l; ++h) {
        for (int i = 0; i < n_rows; ++i) y[std::size_t(i)] = targets[std::size_t(i) * std::size_t(l) + std::size_t(h)];
        auto fit = fit_elastic_net(z, n_rows, k, y, opts);
        m.weights.push_back(std::move(fit.weights));
        m.intercepts.push_back(fit.intercept);
    }
    return m;
}

double rmse(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size() || predicted.empty()) throw DomainError("rmse needs equal, non-empty series");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
    return std::sqrt(s / double(predicted.size()));
}

} // namespace evc::fc
