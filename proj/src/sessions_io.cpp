// SPDX-License-Identifier: Apache-2.0
#include "evcharge/errors.hpp"
#include "evcharge/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace evc::io {

namespace {

const char* const kColumns[] = {"session_id", "arrival_iso8601", "departure_iso8601", "energy_kwh", "choice_label"};
constexpr std::size_t kRequired = 4;
constexpr std::size_t kMaxReported = 20;

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv(const std::string& line, bool& ok) {
    std::vector<std::string> out(1);
    bool quoted = false;
    ok = true;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                out.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.emplace_back();
        } else {
            out.back() += ch;
        }
    }
    if (quoted) ok = false;
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

} // namespace

std::vector<sim::SessionRecord> parse_sessions(std::istream& in, const std::string& source) {
    std::string line;
    long row = 0;
    std::vector<std::string> problems;
    long first_bad = -1;
    auto problem = [&](long r, const std::string& column, const std::string& msg) {
        if (first_bad < 0) first_bad = r;
        if (problems.size() < kMaxReported)
            problems.push_back("row " + std::to_string(r) + (column.empty() ? "" : ", column " + column) + ": " + msg);
    };

    // header
    std::vector<int> slot(std::size(kColumns), -1);
    std::size_t n_fields = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        bool ok = true;
        const auto fields = split_csv(line, ok);
        n_fields = fields.size();
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const std::string name = trim(fields[i]);
            const auto* it = std::find(std::begin(kColumns), std::end(kColumns), name);
            if (it == std::end(kColumns)) throw InvalidInput("unknown column '" + name + "'", source, row);
            const std::size_t c = std::size_t(it - std::begin(kColumns));
            if (slot[c] >= 0) throw InvalidInput("column '" + name + "' appears twice", source, row);
            slot[c] = int(i);
        }
        break;
    }
    if (n_fields == 0) throw InvalidInput("missing header row", source, row > 0 ? row : 1);
    for (std::size_t c = 0; c < kRequired; ++c)
        if (slot[c] < 0) throw InvalidInput(std::string("missing column '") + kColumns[c] + "'", source, row);

    std::vector<sim::SessionRecord> out;
    std::map<std::string, long> first_row;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        bool ok = true;
        const auto fields = split_csv(line, ok);
        if (!ok) {
            problem(row, "", "unterminated quote");
            continue;
        }
        if (fields.size() != n_fields) {
            problem(row, "", "expected " + std::to_string(n_fields) + " fields, found " + std::to_string(fields.size()));
            continue;
        }
        auto field = [&](std::size_t c) { return trim(fields[std::size_t(slot[c])]); };
        sim::SessionRecord r;
        bool good = true;
        r.id = field(0);
        if (r.id.empty()) {
            problem(row, kColumns[0], "empty session id");
            good = false;
        }
        try {
            r.arrival = parse_iso8601(field(1));
        } catch (const Error& e) {
            problem(row, kColumns[1], e.what());
            good = false;
        }
        try {
            r.departure = parse_iso8601(field(2));
        } catch (const Error& e) {
            problem(row, kColumns[2], e.what());
            good = false;
        }
        const std::string energy = field(3);
        const auto [end, ec] = std::from_chars(energy.data(), energy.data() + energy.size(), r.energy_kwh);
        if (ec != std::errc() || end != energy.data() + energy.size() || energy.empty()) {
            problem(row, kColumns[3], "expected a number, got '" + energy + "'");
            good = false;
        } else if (!(r.energy_kwh >= 0.0)) {
            problem(row, kColumns[3], "energy must be non-negative");
            good = false;
        }
        if (slot[4] >= 0) {
            std::string label = field(4);
            std::transform(label.begin(), label.end(), label.begin(), [](unsigned char ch) { return std::toupper(ch); });
            if (label == "REGULAR") {
                r.label = Choice::Regular;
            } else if (label == "SCHEDULED") {
                r.label = Choice::Scheduled;
            } else if (!label.empty()) {
                problem(row, kColumns[4], "expected REGULAR, SCHEDULED or empty, got '" + field(4) + "'");
                good = false;
            }
        }
        if (good && !(r.arrival < r.departure)) {
            problem(row, kColumns[2], "departure must be after arrival");
            good = false;
        }
        if (!r.id.empty()) {
            const auto [it, fresh] = first_row.emplace(r.id, row);
            if (!fresh) {
                problem(row, kColumns[0], "duplicate session id '" + r.id + "' (first on row " +
                                              std::to_string(it->second) + ")");
                good = false;
            }
        }
        if (good) out.push_back(std::move(r));
    }

    if (!problems.empty()) {
        std::string msg = problems.front();
        for (std::size_t i = 1; i < problems.size(); ++i) msg += "\n  " + problems[i];
        throw InvalidInput(msg, source, first_bad);
    }
    std::sort(out.begin(), out.end(), [](const sim::SessionRecord& a, const sim::SessionRecord& b) {
        return a.arrival != b.arrival ? a.arrival < b.arrival : a.id < b.id;
    });
    return out;
}

std::vector<sim::SessionRecord> read_sessions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    return parse_sessions(in, path.string());
}

void write_sessions(const std::filesystem::path& path, const std::vector<sim::SessionRecord>& records) {
    std::ostringstream os;
    os << "session_id,arrival_iso8601,departure_iso8601,energy_kwh,choice_label\n";
    char energy[32];
    for (const auto& r : records) {
        std::snprintf(energy, sizeof energy, "%.4f", r.energy_kwh);
        os << csv_field(r.id) << ',' << format_iso8601(r.arrival) << ',' << format_iso8601(r.departure) << ','
           << energy << ',' << (r.label ? std::string(to_string(*r.label)) : std::string()) << '\n';
    }
    write_file_atomic(path, os.str());
}

std::vector<sim::MonthWorkload> split_by_month(const std::vector<sim::SessionRecord>& records, int year,
                                               const std::vector<unsigned>& months) {
    std::vector<sim::MonthWorkload> out;
    for (const unsigned m : months) {
        sim::MonthWorkload w;
        w.year = year;
        w.month = m;
        const Minutes lo = month_start(year, m);
        const Minutes hi = lo + Minutes(days_in_month(year, m)) * 1440;
        for (const auto& r : records)
            if (r.arrival >= lo && r.arrival < hi) w.sessions.push_back(r);
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace evc::io
