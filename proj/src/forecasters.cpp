// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/forecasting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace evc::fc {

ForecastVector clip_forecast(std::vector<double> psi, std::span<const double> floor, std::string provenance) {
    if (psi.size() != floor.size()) throw DomainError("forecast and clipping floor differ in length");
    ForecastVector out;
    out.provenance = std::move(provenance);
    out.clipped.assign(psi.size(), false);
    for (std::size_t i = 0; i < psi.size(); ++i) {
        if (!std::isfinite(psi[i])) throw SolverError("forecaster returned a non-finite value");
        const double lo = std::max(floor[i], 0.0);
        if (psi[i] < lo) {
            psi[i] = lo;
            out.clipped[i] = true;
        }
    }
    out.psi = std::move(psi);
    return out;
}

ForecastUpdate update_forecast(std::span<const double> psi, int start, std::span<const PowerProfile> committed,
                               const PowerProfile& new_user_regular) {
    ForecastUpdate u;
    u.start = start;
    u.offset_reg.assign(psi.begin(), psi.end());
    for (std::size_t k = 0; k < psi.size(); ++k) {
        const int tau = start + int(k);
        for (const auto& pr : committed) u.offset_reg[k] -= pr.at(tau);
    }
    u.offset_sch = u.offset_reg;
    for (std::size_t k = 0; k < psi.size(); ++k) u.offset_sch[k] -= new_user_regular.at(start + int(k));
    return u;
}

double forecast_load(const ForecastUpdate& u, Choice scenario, int tau, std::span<const PowerProfile> plans,
                     const PowerProfile* new_user_sch) {
    const int k = tau - u.start;
    if (k < 0 || std::size_t(k) >= u.offset_reg.size()) throw DomainError("step outside the forecast window");
    double g = scenario == Choice::Scheduled ? u.offset_sch[std::size_t(k)] : u.offset_reg[std::size_t(k)];
    for (const auto& pr : plans) g += pr.at(tau);
    if (scenario == Choice::Scheduled && new_user_sch) g += new_user_sch->at(tau);
    return g;
}

const LinearModel& ForecastModel::select(bool workday_now) const {
    const LinearModel& first = workday_now ? workday : non_workday;
    const LinearModel& other = workday_now ? non_workday : workday;
    if (first.trained()) return first;
    if (other.trained()) return other;
    throw DomainError("forecast model has no trained regressions");
}

std::vector<double> LinearForecaster::predict(const FeatureVector& f, bool workday_now) const {
    return model_.select(workday_now).predict(f.flatten());
}

// ---- model file --------------------------------------------------------------------------------
//
// Line-oriented text, one keyword per line:
//   evcharge-forecast-model 1
//   training_rmse <kW>
//   model workday|non_workday <0|1>      (the rest of the block only when 1)
//   layout <lags> <horizon>
//   penalty <lambda1> <lambda2>
//   samples <n>
//   features <kept>
//   feature <name> <column> <mean> <scale>        x kept
//   output <h> <intercept> <w_1> ... <w_kept>     x horizon
//   end

namespace {

constexpr const char* kMagic = "evcharge-forecast-model";

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_linear(std::ostream& os, const char* tag, const LinearModel& m) {
    os << "model " << tag << ' ' << (m.trained() ? 1 : 0) << '\n';
    if (!m.trained()) return;
    os << "layout " << m.layout.lags << ' ' << m.layout.horizon << '\n';
    os << "penalty " << num(m.options.lambda1) << ' ' << num(m.options.lambda2) << '\n';
    os << "samples " << m.n_samples << '\n';
    const auto names = m.layout.names();
    os << "features " << m.scaler.kept.size() << '\n';
    for (std::size_t c = 0; c < m.scaler.kept.size(); ++c)
        os << "feature " << names[std::size_t(m.scaler.kept[c])] << ' ' << m.scaler.kept[c] << ' '
           << num(m.scaler.mean[c]) << ' ' << num(m.scaler.scale[c]) << '\n';
    for (std::size_t h = 0; h < m.weights.size(); ++h) {
        os << "output " << h << ' ' << num(m.intercepts[h]);
        for (double w : m.weights[h]) os << ' ' << num(w);
        os << '\n';
    }
}

struct Reader {
    std::istream& in;
    std::string source;
    int line_no = 0;

    std::istringstream next(const std::string& key) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ss(line);
            std::string k;
            ss >> k;
            if (k != key) fail("expected '" + key + "', found '" + k + "'");
            return ss;
        }
        fail("unexpected end of file, expected '" + key + "'");
    }
    [[noreturn]] void fail(const std::string& what) const { throw InvalidInput(what, source, line_no); }
    template <class T>
    T get(std::istringstream& ss) const {
        T v{};
        if (!(ss >> v)) fail("malformed field");
        return v;
    }
    double finite(std::istringstream& ss) const {
        const double v = get<double>(ss);
        if (!std::isfinite(v)) fail("non-finite number");
        return v;
    }
};

LinearModel read_linear(Reader& r, const char* tag) {
    auto ss = r.next("model");
    if (r.get<std::string>(ss) != tag) r.fail(std::string("expected model '") + tag + "'");
    LinearModel m;
    if (r.get<int>(ss) == 0) return m;
    ss = r.next("layout");
    m.layout.lags = r.get<int>(ss);
    m.layout.horizon = r.get<int>(ss);
    if (m.layout.lags < 1 || m.layout.horizon < 1) r.fail("layout needs positive sizes");
    ss = r.next("penalty");
    m.options.lambda1 = r.finite(ss);
    m.options.lambda2 = r.finite(ss);
    ss = r.next("samples");
    m.n_samples = r.get<int>(ss);
    ss = r.next("features");
    const int k = r.get<int>(ss);
    if (k < 0 || k > m.layout.size()) r.fail("feature count out of range");
    const auto names = m.layout.names();
    for (int c = 0; c < k; ++c) {
        ss = r.next("feature");
        const auto name = r.get<std::string>(ss);
        const int col = r.get<int>(ss);
        if (col < 0 || col >= m.layout.size() || names[std::size_t(col)] != name)
            r.fail("feature '" + name + "' does not match the layout");
        if (c > 0 && col <= m.scaler.kept.back()) r.fail("feature columns must be increasing");
        m.scaler.kept.push_back(col);
        m.scaler.mean.push_back(r.finite(ss));
        const double sc = r.finite(ss);
        if (!(sc > 0.0)) r.fail("feature scale must be positive");
        m.scaler.scale.push_back(sc);
    }
    for (int h = 0; h < m.layout.horizon; ++h) {
        ss = r.next("output");
        if (r.get<int>(ss) != h) r.fail("outputs must be numbered in order");
        m.intercepts.push_back(r.finite(ss));
        std::vector<double> w;
        for (int c = 0; c < k; ++c) w.push_back(r.finite(ss));
        std::string extra;
        if (ss >> extra) r.fail("too many weights");
        m.weights.push_back(std::move(w));
    }
    return m;
}

} // namespace

void save_model(const ForecastModel& m, const std::filesystem::path& path) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw Error("cannot write " + tmp);
        os << kMagic << " 1\n";
        os << "training_rmse " << num(m.training_rmse) << '\n';
        write_linear(os, "workday", m.workday);
        write_linear(os, "non_workday", m.non_workday);
        os << "end\n";
        if (!os) throw Error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

ForecastModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open forecast model " + path.string());
    Reader r{in, path.string()};
    auto ss = r.next(kMagic);
    if (r.get<int>(ss) != 1) r.fail("unsupported model version");
    ForecastModel m;
    ss = r.next("training_rmse");
    m.training_rmse = r.finite(ss);
    m.workday = read_linear(r, "workday");
    m.non_workday = read_linear(r, "non_workday");
    r.next("end");
    if (!m.workday.trained() && !m.non_workday.trained()) r.fail("model file holds no trained regression");
    if (m.workday.trained() && m.non_workday.trained() && !(m.workday.layout == m.non_workday.layout))
        r.fail("workday and non-workday layouts differ");
    return m;
}

// ---- external adapter ----------------------------------------------------------------------------

ExternalForecaster::ExternalForecaster(std::string command_template, std::filesystem::path work_dir,
                                       FeatureLayout layout)
    : command_(std::move(command_template)), work_dir_(std::move(work_dir)), layout_(layout) {
    if (command_.find("{features}") == std::string::npos || command_.find("{predictions}") == std::string::npos)
        throw InvalidInput("external forecaster command needs {features} and {predictions} placeholders");
    layout_.validate();
}

std::vector<double> ExternalForecaster::predict(const FeatureVector& f, bool workday_now) const {
    static std::atomic<unsigned long> counter{0};
    const auto tag = std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "_" +
                     std::to_string(counter++);
    std::filesystem::create_directories(work_dir_);
    const auto feat = work_dir_ / ("features_" + tag + ".csv");
    const auto pred = work_dir_ / ("predictions_" + tag + ".csv");
    {
        std::ofstream os(feat);
        const auto names = layout_.names();
        for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
        os << ",workday_now\n";
        const auto x = f.flatten();
        if (int(x.size()) != layout_.size()) throw DomainError("feature vector has the wrong width");
        for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << num(x[i]);
        os << ',' << (workday_now ? 1 : 0) << '\n';
    }
    std::string cmd = command_;
    auto replace = [&](const std::string& key, const std::string& value) {
        for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size()))
            cmd.replace(pos, key.size(), value);
    };
    replace("{features}", feat.string());
    replace("{predictions}", pred.string());
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw Error("external forecaster exited with status " + std::to_string(rc));
    std::ifstream in(pred);
    if (!in) throw Error("external forecaster wrote no predictions");
    std::string line;
    std::vector<double> out;
    while (out.empty() && std::getline(in, line)) {
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) break;  // header line
            out.push_back(v);
        }
        if (int(out.size()) != layout_.horizon) out.clear();
    }
    std::filesystem::remove(feat);
    std::filesystem::remove(pred);
    if (int(out.size()) != layout_.horizon)
        throw Error("external forecaster must return " + std::to_string(layout_.horizon) + " values");
    return out;
}

} // namespace evc::fc
