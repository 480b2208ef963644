#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "streamx/envs.hpp"
#include "streamx/errors.hpp"

namespace streamx {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n\"");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n\"");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? comma : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool is_time_column(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    return name == "date" || name == "timestamp";
}

// Howard Hinnant's days -> civil date conversion.
void civil_from_days(long long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long long yy = static_cast<long long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(yy + (m <= 2));
}

std::string timestamp(std::size_t step) {
    // 2016-07-01 00:00:00 is day 16983 since the epoch; one step is 15 minutes.
    const long long minutes = static_cast<long long>(step) * 15;
    const long long days = 16983 + minutes / 1440;
    const long long minute_of_day = minutes % 1440;
    int y;
    unsigned m;
    unsigned d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld:00", y, m, d, minute_of_day / 60, minute_of_day % 60);
    return buf;
}

}  // namespace

std::size_t TimeSeriesTable::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::invalid_argument("time series: missing column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> TimeSeriesTable::column(const std::string& name) const {
    const auto idx = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[idx]);
    return out;
}

TimeSeriesTable parse_timeseries_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("time series: empty file (missing header row)");

    const auto header = split_row(line);
    std::vector<bool> keep;
    TimeSeriesTable table;
    for (const auto& name : header) {
        keep.push_back(!is_time_column(name));
        if (keep.back()) table.columns.push_back(name);
    }
    if (table.columns.empty()) throw std::invalid_argument("time series: no numeric columns in header");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_row(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument("time series: line " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " cells, header has " +
                                        std::to_string(header.size()));
        }
        std::vector<double> row;
        row.reserve(table.columns.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!keep[c]) continue;
            const auto& cell = cells[c];
            double value = 0.0;
            const auto* end = cell.data() + cell.size();
            const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
            if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
                throw std::invalid_argument("time series: non-numeric cell '" + cell + "' in column '" + header[c] +
                                            "' at line " + std::to_string(line_no));
            }
            row.push_back(value);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

TimeSeriesTable load_timeseries_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("time series: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_timeseries_csv(buf.str());
}

TimeSeriesTable synthetic_series(std::size_t rows, std::uint64_t seed) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    constexpr double day = 96.0;  // 15-minute samples
    constexpr double year = day * 365.0;
    const double load_base[6] = {8.0, 2.5, 6.0, 1.8, 3.5, 1.2};
    const double load_amp[6] = {3.0, 0.8, 2.5, 0.6, 1.5, 0.4};
    const double load_phase[6] = {0.3, 0.9, 0.5, 1.3, 2.1, 2.7};

    Rng rng(seed);
    TimeSeriesTable table;
    table.columns = {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"};
    table.rows.reserve(rows);
    for (std::size_t t = 0; t < rows; ++t) {
        const double td = static_cast<double>(t);
        const double daily = two_pi * td / day;
        const double yearly = two_pi * td / year;
        std::vector<double> row(7);
        double load_sum = 0.0;
        for (int i = 0; i < 6; ++i) {
            row[i] = load_base[i] + load_amp[i] * std::sin(daily + load_phase[i]) +
                     0.3 * load_amp[i] * std::sin(yearly) + 0.3 * rng.normal();
            load_sum += row[i] - load_base[i];
        }
        row[6] = 25.0 + 8.0 * std::sin(yearly - 0.5) + 3.0 * std::sin(daily - 1.0) + 0.2 * load_sum +
                 2.0 * td / static_cast<double>(rows) + 0.3 * rng.normal();
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_timeseries_csv(const TimeSeriesTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("time series: cannot write " + path.string());
    out << "date";
    for (const auto& c : table.columns) out << ',' << c;
    out << '\n';
    char buf[64];
    for (std::size_t t = 0; t < table.rows.size(); ++t) {
        out << timestamp(t);
        for (double v : table.rows[t]) {
            std::snprintf(buf, sizeof buf, ",%.6f", v);
            out << buf;
        }
        out << '\n';
    }
}

// --- TimeSeriesStream ------------------------------------------------------

TimeSeriesStream::TimeSeriesStream(TimeSeriesTable table, const std::string& cumulant_column, double beta)
    : table_(std::move(table)), cumulant_index_(table_.column_index(cumulant_column)), beta_(beta) {
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("TimeSeriesStream: beta must lie in [0, 1)");
    if (table_.rows.size() < 3) throw std::invalid_argument("TimeSeriesStream: need at least three rows");
    for (std::size_t c = 0; c < table_.columns.size(); ++c) {
        if (c != cumulant_index_) feature_indices_.push_back(c);
    }
}

EnvSpec TimeSeriesStream::spec() const {
    return {feature_indices_.size() + 1, ActionSpace::discrete(1), std::nullopt};
}

std::vector<double> TimeSeriesStream::raw_observation(std::size_t row) const {
    std::vector<double> obs;
    obs.reserve(feature_indices_.size() + 1);
    for (auto c : feature_indices_) obs.push_back(table_.rows[row][c]);
    obs.push_back(table_.rows[row - 1][cumulant_index_]);
    return obs;
}

void TimeSeriesStream::fold(std::size_t row) {
    const auto obs = raw_observation(row);
    for (std::size_t i = 0; i < obs.size(); ++i) trace_[i] = beta_ * trace_[i] + (1.0 - beta_) * obs[i];
}

std::vector<double> TimeSeriesStream::reset(std::optional<std::uint64_t>) {
    row_ = 1;
    trace_.assign(feature_indices_.size() + 1, 0.0);
    fold(row_);
    return trace_;
}

EnvStep TimeSeriesStream::step(const Action&) {
    if (trace_.empty()) throw std::logic_error("TimeSeriesStream::step before reset");
    if (row_ + 1 >= table_.rows.size()) throw std::out_of_range("TimeSeriesStream: stream exhausted");
    const double cumulant = table_.rows[row_][cumulant_index_];
    ++row_;
    fold(row_);
    return {trace_, cumulant, false, row_ + 1 == table_.rows.size()};
}

std::vector<double> TimeSeriesStream::cumulants() const {
    std::vector<double> out;
    out.reserve(transition_count());
    for (std::size_t r = 1; r + 1 < table_.rows.size(); ++r) out.push_back(table_.rows[r][cumulant_index_]);
    return out;
}

std::vector<double> discounted_returns(std::span<const double> cumulants, double gamma) {
    std::vector<double> g(cumulants.size(), 0.0);
    double next = 0.0;
    for (std::size_t i = cumulants.size(); i-- > 0;) {
        next = cumulants[i] + gamma * next;
        g[i] = next;
    }
    return g;
}

}  // namespace streamx
