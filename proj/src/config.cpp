// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/io.hpp"

#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace evc::io {

namespace {

namespace fs = std::filesystem;

long line_of(const YAML::Node& n) { return n.IsDefined() ? long(n.Mark().line) + 1 : -1; }

[[noreturn]] void fail(const std::string& source, const YAML::Node& at, const std::string& msg) {
    throw InvalidInput(msg, source, line_of(at));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

YAML::Node load_yaml(std::string_view text, const std::string& source) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw InvalidInput(e.msg, source, long(e.mark.line) + 1);
    }
}

long long to_integer(const std::string& source, const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) fail(source, n, key + ": expected an integer");
    const std::string& s = n.Scalar();
    long long v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) fail(source, n, key + ": expected an integer, got '" + s + "'");
    return v;
}

void convert(const std::string& source, const YAML::Node& n, const std::string& key, double& out) {
    if (!n.IsScalar()) fail(source, n, key + ": expected a number");
    try {
        out = n.as<double>();
    } catch (const YAML::Exception&) {
        fail(source, n, key + ": expected a number, got '" + n.Scalar() + "'");
    }
}

void convert(const std::string& source, const YAML::Node& n, const std::string& key, int& out) {
    const long long v = to_integer(source, n, key);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        fail(source, n, key + ": out of range");
    out = int(v);
}

void convert(const std::string& source, const YAML::Node& n, const std::string& key, std::uint64_t& out) {
    if (!n.IsScalar()) fail(source, n, key + ": expected a non-negative integer");
    const std::string& s = n.Scalar();
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || end != s.data() + s.size())
        fail(source, n, key + ": expected a non-negative integer, got '" + s + "'");
}

void convert(const std::string& source, const YAML::Node& n, const std::string& key, bool& out) {
    if (!n.IsScalar()) fail(source, n, key + ": expected true or false");
    try {
        out = n.as<bool>();
    } catch (const YAML::Exception&) {
        fail(source, n, key + ": expected true or false, got '" + n.Scalar() + "'");
    }
}

void convert(const std::string& source, const YAML::Node& n, const std::string& key, std::string& out) {
    if (n.IsNull()) {
        out.clear();
        return;
    }
    if (!n.IsScalar()) fail(source, n, key + ": expected a string");
    out = n.Scalar();
}

void convert(const std::string& source, const YAML::Node& n, const std::string& key, std::vector<unsigned>& out) {
    if (!n.IsSequence()) fail(source, n, key + ": expected a list");
    out.clear();
    for (const auto& item : n) {
        const long long v = to_integer(source, item, key);
        if (v < 1 || v > 12) fail(source, item, key + ": months run from 1 to 12");
        out.push_back(unsigned(v));
    }
}

/// One YAML mapping. Tracks which keys were read so leftovers can be reported.
class Section {
public:
    Section(const std::string& source, YAML::Node node, std::string path)
        : source_(source), node_(std::move(node)), path_(std::move(path)) {
        if (node_.IsDefined() && !node_.IsNull() && !node_.IsMap())
            fail(source_, node_, (path_.empty() ? std::string("document") : path_) + ": expected a mapping");
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!present()) return;
        const YAML::Node n = node_[key];
        if (n.IsDefined()) convert(source_, n, qualified(key), out);
    }

    YAML::Node raw(const char* key) {
        seen_.insert(key);
        return present() ? node_[key] : YAML::Node();
    }

    Section child(const char* key) { return Section(source_, raw(key), qualified(key)); }

    void done() const {
        if (!present()) return;
        for (const auto& kv : node_) {
            const std::string k = kv.first.Scalar();
            if (!seen_.count(k)) fail(source_, kv.first, "unknown key '" + qualified(k.c_str()) + "'");
        }
    }

    template <class F>
    void check(F&& validate) const {
        check_at(node_, std::forward<F>(validate));
    }

    /// Same, but a failure points at `key` when the file has it.
    template <class F>
    void check(const char* key, F&& validate) const {
        const YAML::Node n = present() ? node_[key] : YAML::Node();
        check_at(n.IsDefined() ? n : node_, std::forward<F>(validate));
    }

    const YAML::Node& node() const { return node_; }

private:
    template <class F>
    void check_at(const YAML::Node& where, F&& validate) const {
        try {
            validate();
        } catch (const InvalidInput& e) {
            if (e.line() >= 0) throw;
            fail(source_, where, (path_.empty() ? std::string() : path_ + ": ") + e.what());
        } catch (const Error& e) {
            fail(source_, where, (path_.empty() ? std::string() : path_ + ": ") + e.what());
        }
    }

    bool present() const { return node_.IsDefined() && node_.IsMap(); }
    std::string qualified(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

    const std::string& source_;
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, r.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + "\"";
}

std::string clock(int minute) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d:%02d", minute / 60, minute % 60);
    return buf;
}

int parse_clock(const std::string& source, const YAML::Node& n, const std::string& key) {
    std::string s;
    convert(source, n, key, s);
    int h = -1, m = -1;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d:%d%c", &h, &m, &tail) != 2 || h < 0 || m < 0 || m > 59 || h * 60 + m > 1440)
        fail(source, n, key + ": expected HH:MM between 00:00 and 24:00, got '" + s + "'");
    return h * 60 + m;
}

std::vector<billing::TouWindow> parse_windows(const std::string& source, const YAML::Node& n, const std::string& key) {
    std::vector<billing::TouWindow> out;
    if (!n.IsDefined() || n.IsNull()) return out;
    if (!n.IsSequence()) fail(source, n, key + ": expected a list of windows");
    for (const auto& item : n) {
        Section w(source, item, key + "[]");
        billing::TouWindow tw;
        w.read("name", tw.name);
        const YAML::Node start = w.raw("start"), end = w.raw("end");
        if (!start.IsDefined() || !end.IsDefined()) fail(source, item, key + ": each window needs start and end");
        tw.start_min = parse_clock(source, start, key + ".start");
        tw.end_min = parse_clock(source, end, key + ".end");
        if (tw.start_min == 1440) fail(source, start, key + ".start: a window cannot start at 24:00");
        w.read("rate", tw.rate);
        w.done();
        out.push_back(tw);
    }
    return out;
}

void emit_windows(std::ostringstream& os, const char* key, const std::vector<billing::TouWindow>& ws) {
    os << key << ":";
    if (ws.empty()) {
        os << " []\n";
        return;
    }
    os << "\n";
    for (const auto& w : ws)
        os << "  - {name: " << quoted(w.name) << ", start: \"" << clock(w.start_min) << "\", end: \""
           << clock(w.end_min) << "\", rate: " << num(w.rate) << "}\n";
}

billing::TariffSchedule tariff_from(const std::string& source, const YAML::Node& root) {
    Section s(source, root, "");
    billing::TariffSchedule t;
    t.weekday.clear();
    s.read("name", t.name);
    s.read("demand_rate", t.demand_rate);
    t.weekday = parse_windows(source, s.raw("weekday"), "weekday");
    t.weekend = parse_windows(source, s.raw("weekend"), "weekend");
    s.done();
    s.check([&] { t.validate(); });
    return t;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

// ---- tariff --------------------------------------------------------------------------------------

billing::TariffSchedule parse_tariff(std::string_view text, const std::string& source) {
    return tariff_from(source, load_yaml(text, source));
}

billing::TariffSchedule load_tariff(const fs::path& path) { return parse_tariff(read_text(path), path.string()); }

std::string dump_tariff(const billing::TariffSchedule& t) {
    std::ostringstream os;
    os << "name: " << quoted(t.name) << "\n";
    os << "demand_rate: " << num(t.demand_rate) << "  # $/kW on the monthly peak\n";
    emit_windows(os, "weekday", t.weekday);
    emit_windows(os, "weekend", t.weekend);
    return os.str();
}

// ---- application config --------------------------------------------------------------------------

void AppConfig::validate() const {
    sim.validate();
    synthetic.validate();
    if (run.months.empty()) throw InvalidInput("run.months: need at least one month");
    for (const unsigned m : run.months)
        if (m < 1 || m > 12) throw InvalidInput("run.months: months run from 1 to 12");
    if (run.year < 1971 || run.year > 9999) throw InvalidInput("run.year: out of range");
    if (forecaster.kind != "naive" && forecaster.kind != "linear" && forecaster.kind != "external")
        throw InvalidInput("forecaster.kind: expected naive, linear or external, got '" + forecaster.kind + "'");
    if (forecaster.kind == "external" && forecaster.external_command.empty())
        throw InvalidInput("forecaster.external_command: required for the external forecaster");
    if (forecaster.training_replications < 1) throw InvalidInput("forecaster.training_replications: must be at least 1");
    if (!(forecaster.training.lambda1 >= 0.0) || !(forecaster.training.lambda2 >= 0.0))
        throw InvalidInput("forecaster: penalties must be non-negative");
    if (spdlog::level::from_str(log_level) == spdlog::level::off && log_level != "off")
        throw InvalidInput("logging.level: unknown level '" + log_level + "'");
}

AppConfig parse_config(std::string_view text, const std::string& source, const fs::path& base_dir) {
    const YAML::Node root = load_yaml(text, source);
    AppConfig c;
    c.base_dir = base_dir;
    Section top(source, root, "");

    Section paths = top.child("paths");
    paths.read("sessions", c.paths.sessions);
    paths.read("tariff", c.paths.tariff);
    paths.read("model", c.paths.model);
    paths.read("out", c.paths.out);
    paths.done();
    if (!c.paths.tariff.empty()) {
        const fs::path tp = resolve(base_dir, c.paths.tariff);
        try {
            c.sim.tariff = load_tariff(tp);
        } catch (const InvalidInput& e) {
            if (e.line() >= 0) throw;
            fail(source, paths.node()["tariff"], e.what());
        }
    }

    Section run = top.child("run");
    run.read("year", c.run.year);
    run.read("months", c.run.months);
    run.read("seed", c.sim.seed);
    run.read("replications", c.sim.replications);
    run.read("threads", c.sim.threads);
    run.read("data_seed", c.run.data_seed);
    run.done();
    run.check([&] {
        if (c.run.months.empty()) throw DomainError("need at least one month");
        if (c.sim.replications < 1) throw DomainError("need at least one replication");
        if (c.sim.threads < 0) throw DomainError("thread count must be non-negative");
    });

    auto& st = c.sim.controller.station;
    Section station = top.child("station");
    station.read("p_max_kw", st.p_max_kw);
    station.read("efficiency", st.efficiency);
    station.read("delta_t_h", st.delta_t_h);
    station.read("n_chargers", st.n_chargers);
    station.read("scheduled_energy_fraction", c.sim.scheduled_energy_fraction);
    station.done();
    station.check([&] {
        st.validate();
        if (!(c.sim.scheduled_energy_fraction > 0.0) || c.sim.scheduled_energy_fraction > 1.0)
            throw DomainError("scheduled_energy_fraction must be in (0, 1]");
    });

    auto& cs = c.sim.controller;
    Section ctl = top.child("controller");
    std::string mode(ctl::to_string(cs.mode));
    ctl.read("mode", mode);
    ctl.check("mode", [&] { cs.mode = ctl::parse_mode(mode); });
    ctl.read("threshold_step_kw", cs.threshold_step_kw);
    ctl.read("softplus_segments", cs.softplus_segments);
    ctl.read("softplus_scale", cs.softplus_scale);
    ctl.read("softplus_range_kw", cs.softplus_range_kw);
    ctl.read("exact_energy", cs.exact_energy);
    Section grid = ctl.child("grid");
    grid.read("lo", cs.grid.lo);
    grid.read("hi", cs.grid.hi);
    grid.read("step", cs.grid.step);
    grid.read("scheduled_not_above_regular", cs.grid.scheduled_not_above_regular);
    grid.done();
    grid.check([&] { cs.grid.validate(); });
    Section solver = ctl.child("solver");
    solver.read("tol_feas", cs.solver.tol_feas);
    solver.read("tol_opt", cs.solver.tol_opt);
    solver.read("max_iterations", cs.solver.max_iterations);
    solver.done();
    ctl.done();

    Section ch = top.child("choice");
    ch.read("beta_price_gap", cs.choice.beta_price_gap);
    ch.read("alpha_reg", cs.choice.alpha_reg);
    ch.read("alpha_leave", cs.choice.alpha_leave);
    ch.read("beta_avg_price", cs.choice.beta_avg_price);
    ch.done();

    Section fcs = top.child("forecaster");
    fcs.read("kind", c.forecaster.kind);
    fcs.check("kind", [&] {
        const auto& k = c.forecaster.kind;
        if (k != "naive" && k != "linear" && k != "external")
            throw InvalidInput("kind: expected naive, linear or external, got '" + k + "'");
    });
    fcs.read("lags", c.sim.features.lags);
    fcs.read("horizon", c.sim.features.horizon);
    cs.mpc_horizon = c.sim.features.horizon;
    fcs.read("external_command", c.forecaster.external_command);
    fcs.read("lambda1", c.forecaster.training.lambda1);
    fcs.read("lambda2", c.forecaster.training.lambda2);
    fcs.read("tol", c.forecaster.training.tol);
    fcs.read("max_sweeps", c.forecaster.training.max_sweeps);
    fcs.read("training_seed", c.forecaster.training_seed);
    fcs.read("training_replications", c.forecaster.training_replications);
    fcs.done();
    fcs.check([&] { c.sim.features.validate(); });

    Section cal = top.child("calendar");
    const YAML::Node hol = cal.raw("holidays");
    if (hol.IsDefined() && !hol.IsNull()) {
        if (!hol.IsSequence()) fail(source, hol, "calendar.holidays: expected a list of dates");
        std::set<std::chrono::sys_days> days;
        for (const auto& d : hol) {
            std::string s;
            convert(source, d, "calendar.holidays", s);
            try {
                days.insert(std::chrono::sys_days(parse_date(s)));
            } catch (const Error& e) {
                fail(source, d, std::string("calendar.holidays: ") + e.what());
            }
        }
        c.sim.calendar = WorkdayCalendar(std::move(days));
    }
    cal.done();

    auto& sp = c.synthetic;
    Section syn = top.child("synthetic");
    syn.read("workday_rate", sp.workday_rate);
    syn.read("weekend_rate", sp.weekend_rate);
    syn.read("morning_share", sp.morning_share);
    syn.read("morning_mean_h", sp.morning_mean_h);
    syn.read("morning_sd_h", sp.morning_sd_h);
    syn.read("midday_lo_h", sp.midday_lo_h);
    syn.read("midday_hi_h", sp.midday_hi_h);
    syn.read("stay_mean_h", sp.stay_mean_h);
    syn.read("stay_sd_h", sp.stay_sd_h);
    syn.read("stay_min_h", sp.stay_min_h);
    syn.read("stay_max_h", sp.stay_max_h);
    syn.read("weekend_arrival_lo_h", sp.weekend_arrival_lo_h);
    syn.read("weekend_arrival_hi_h", sp.weekend_arrival_hi_h);
    syn.read("weekend_stay_mean_h", sp.weekend_stay_mean_h);
    syn.read("weekend_stay_sd_h", sp.weekend_stay_sd_h);
    syn.read("weekend_stay_min_h", sp.weekend_stay_min_h);
    syn.read("weekend_stay_max_h", sp.weekend_stay_max_h);
    syn.read("energy_median_kwh", sp.energy_median_kwh);
    syn.read("energy_log_sd", sp.energy_log_sd);
    syn.read("energy_min_kwh", sp.energy_min_kwh);
    syn.read("scheduled_label_share", sp.scheduled_label_share);
    sp.p_max_kw = st.p_max_kw;
    syn.done();
    syn.check([&] { sp.validate(); });

    Section log = top.child("logging");
    log.read("level", c.log_level);
    log.done();
    top.done();

    try {
        c.validate();
    } catch (const InvalidInput& e) {
        throw InvalidInput(e.what(), source);
    } catch (const Error& e) {
        throw InvalidInput(e.what(), source);
    }
    return c;
}

AppConfig load_config(const fs::path& path) {
    return parse_config(read_text(path), path.string(), path.parent_path());
}

std::string dump_config(const AppConfig& c) {
    const auto& cs = c.sim.controller;
    const auto& sp = c.synthetic;
    std::ostringstream os;
    os << "paths:\n"
       << "  sessions: " << quoted(c.paths.sessions) << "\n"
       << "  tariff: " << quoted(c.paths.tariff) << "\n"
       << "  model: " << quoted(c.paths.model) << "\n"
       << "  out: " << quoted(c.paths.out) << "\n";
    os << "run:\n  year: " << c.run.year << "\n  months: [";
    for (std::size_t i = 0; i < c.run.months.size(); ++i) os << (i ? ", " : "") << c.run.months[i];
    os << "]\n  seed: " << c.sim.seed << "\n  replications: " << c.sim.replications << "\n  threads: " << c.sim.threads
       << "\n  data_seed: " << c.run.data_seed << "\n";
    os << "station:\n  p_max_kw: " << num(cs.station.p_max_kw) << "\n  efficiency: " << num(cs.station.efficiency)
       << "\n  delta_t_h: " << num(cs.station.delta_t_h) << "\n  n_chargers: " << cs.station.n_chargers
       << "\n  scheduled_energy_fraction: " << num(c.sim.scheduled_energy_fraction) << "\n";
    os << "controller:\n  mode: " << ctl::to_string(cs.mode) << "\n  threshold_step_kw: " << num(cs.threshold_step_kw)
       << "\n  softplus_segments: " << cs.softplus_segments << "\n  softplus_scale: " << num(cs.softplus_scale)
       << "\n  softplus_range_kw: " << num(cs.softplus_range_kw)
       << "\n  exact_energy: " << (cs.exact_energy ? "true" : "false") << "\n  grid:\n    lo: " << num(cs.grid.lo)
       << "\n    hi: " << num(cs.grid.hi) << "\n    step: " << num(cs.grid.step)
       << "\n    scheduled_not_above_regular: " << (cs.grid.scheduled_not_above_regular ? "true" : "false")
       << "\n  solver:\n    tol_feas: " << num(cs.solver.tol_feas) << "\n    tol_opt: " << num(cs.solver.tol_opt)
       << "\n    max_iterations: " << cs.solver.max_iterations << "\n";
    os << "choice:\n  beta_price_gap: " << num(cs.choice.beta_price_gap) << "\n  alpha_reg: " << num(cs.choice.alpha_reg)
       << "\n  alpha_leave: " << num(cs.choice.alpha_leave) << "\n  beta_avg_price: " << num(cs.choice.beta_avg_price)
       << "\n";
    const auto& f = c.forecaster;
    os << "forecaster:\n  kind: " << f.kind << "\n  lags: " << c.sim.features.lags << "\n  horizon: "
       << c.sim.features.horizon << "\n  external_command: " << quoted(f.external_command)
       << "\n  lambda1: " << num(f.training.lambda1) << "\n  lambda2: " << num(f.training.lambda2)
       << "\n  tol: " << num(f.training.tol) << "\n  max_sweeps: " << f.training.max_sweeps
       << "\n  training_seed: " << f.training_seed << "\n  training_replications: " << f.training_replications
       << "\n";
    os << "calendar:\n  holidays: [";
    bool first = true;
    for (const auto& d : c.sim.calendar.holidays()) {
        os << (first ? "" : ", ") << format_date(std::chrono::year_month_day(d));
        first = false;
    }
    os << "]\n";
    os << "synthetic:\n"
       << "  workday_rate: " << num(sp.workday_rate) << "\n  weekend_rate: " << num(sp.weekend_rate)
       << "\n  morning_share: " << num(sp.morning_share) << "\n  morning_mean_h: " << num(sp.morning_mean_h)
       << "\n  morning_sd_h: " << num(sp.morning_sd_h) << "\n  midday_lo_h: " << num(sp.midday_lo_h)
       << "\n  midday_hi_h: " << num(sp.midday_hi_h) << "\n  stay_mean_h: " << num(sp.stay_mean_h)
       << "\n  stay_sd_h: " << num(sp.stay_sd_h) << "\n  stay_min_h: " << num(sp.stay_min_h)
       << "\n  stay_max_h: " << num(sp.stay_max_h) << "\n  weekend_arrival_lo_h: " << num(sp.weekend_arrival_lo_h)
       << "\n  weekend_arrival_hi_h: " << num(sp.weekend_arrival_hi_h)
       << "\n  weekend_stay_mean_h: " << num(sp.weekend_stay_mean_h)
       << "\n  weekend_stay_sd_h: " << num(sp.weekend_stay_sd_h)
       << "\n  weekend_stay_min_h: " << num(sp.weekend_stay_min_h)
       << "\n  weekend_stay_max_h: " << num(sp.weekend_stay_max_h)
       << "\n  energy_median_kwh: " << num(sp.energy_median_kwh) << "\n  energy_log_sd: " << num(sp.energy_log_sd)
       << "\n  energy_min_kwh: " << num(sp.energy_min_kwh)
       << "\n  scheduled_label_share: " << num(sp.scheduled_label_share) << "\n";
    os << "logging:\n  level: " << c.log_level << "\n";
    return os.str();
}

void apply_override(AppConfig& c, std::string_view key, std::string_view value) {
    YAML::Node root = YAML::Load(dump_config(c));
    std::vector<std::string> parts;
    std::string k(key);
    for (std::size_t pos = 0;;) {
        const std::size_t dot = k.find('.', pos);
        parts.push_back(k.substr(pos, dot - pos));
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    std::vector<YAML::Node> chain{root};
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        YAML::Node next = chain.back()[parts[i]];
        if (!next.IsDefined() || !next.IsMap()) throw InvalidInput("unknown setting '" + k + "'");
        chain.push_back(next);
    }
    if (!chain.back()[parts.back()].IsDefined()) throw InvalidInput("unknown setting '" + k + "'");
    chain.back()[parts.back()] = load_yaml(value, "--" + k);
    c = parse_config(YAML::Dump(root), "setting '" + k + "'", c.base_dir);
}

fs::path AppConfig::resolve(const std::string& p) const { return io::resolve_path(base_dir, p); }

fs::path resolve_path(const fs::path& base, const std::string& p) { return resolve(base, p); }

} // namespace evc::io
