#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "error.hpp"

namespace volblend {

/// Calendar date, ISO-8601 (YYYY-MM-DD).
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static Date parse(std::string_view text) {
        Date d;
        auto field = [&](std::size_t pos, std::size_t len, int& out) {
            if (pos + len > text.size()) return false;
            const char* first = text.data() + pos;
            auto [ptr, ec] = std::from_chars(first, first + len, out);
            return ec == std::errc{} && ptr == first + len;
        };
        const bool ok = text.size() == 10 && text[4] == '-' && text[7] == '-' && field(0, 4, d.year) &&
                        field(5, 2, d.month) && field(8, 2, d.day) && d.month >= 1 && d.month <= 12 &&
                        d.day >= 1 && d.day <= days_in_month(d.year, d.month);
        if (!ok) throw ParseError("invalid ISO-8601 date '" + std::string(text) + "'");
        return d;
    }

    static int days_in_month(int y, int m) {
        static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return m == 2 && leap ? 29 : kDays[m - 1];
    }

    Date next_day() const {
        Date d = *this;
        if (++d.day > days_in_month(d.year, d.month)) {
            d.day = 1;
            if (++d.month > 12) {
                d.month = 1;
                ++d.year;
            }
        }
        return d;
    }

    /// 0 = Monday ... 6 = Sunday (Sakamoto).
    int weekday() const {
        static constexpr int t[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
        int y = year - (month < 3 ? 1 : 0);
        int sunday_based = (y + y / 4 - y / 100 + y / 400 + t[month - 1] + day) % 7;
        return (sunday_based + 6) % 7;
    }
};

/// Consecutive Monday-Friday dates starting at `start` (or the next weekday after it).
inline std::vector<Date> business_days(Date start, std::size_t n) {
    std::vector<Date> out;
    out.reserve(n);
    Date d = start;
    while (out.size() < n) {
        if (d.weekday() < 5) out.push_back(d);
        d = d.next_day();
    }
    return out;
}

struct PriceSeries {
    std::vector<Date> dates;
    std::vector<double> closes;

    std::size_t size() const { return closes.size(); }
};

struct ReturnSeries {
    std::vector<Date> dates;
    std::vector<double> returns;

    std::size_t size() const { return returns.size(); }
};

struct SplitSpec {
    std::size_t train_len = 0;
    std::size_t val_len = 252;
    std::size_t test_len = 252;

    std::size_t total() const { return train_len + val_len + test_len; }
};

struct DescriptiveStats {
    std::size_t observations = 0;
    double mean = 0.0;
    double std_dev = 0.0;
    double median = 0.0;
    double kurtosis = 0.0;  // excess
    double skewness = 0.0;
    double maximum = 0.0;
    double minimum = 0.0;
};

namespace detail {

inline std::string trim(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string_view::npos) return {};
    auto last = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

inline double parse_double(const std::string& cell, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty())
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" + cell + "'");
    return v;
}

}  // namespace detail

/// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

/// Validates the PriceSeries invariants; sorts by date and rejects duplicates.
inline PriceSeries make_price_series(std::vector<Date> dates, std::vector<double> closes) {
    if (dates.size() != closes.size()) throw LengthError("dates and closes differ in length");
    if (closes.empty()) throw ParseError("price series is empty");
    for (double c : closes) {
        if (!std::isfinite(c) || c <= 0.0) throw DomainError("close prices must be finite and > 0");
    }
    std::vector<std::size_t> order(dates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dates[a] < dates[b]; });
    PriceSeries p;
    p.dates.reserve(order.size());
    p.closes.reserve(order.size());
    for (auto i : order) {
        if (!p.dates.empty() && p.dates.back() == dates[i])
            throw ParseError("duplicate date " + dates[i].iso());
        p.dates.push_back(dates[i]);
        p.closes.push_back(closes[i]);
    }
    return p;
}

/// Reads a CSV with a header containing `date` and `close` columns (any order, extra columns ignored).
inline PriceSeries read_prices(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            header = detail::split_csv_line(line);
            break;
        }
    }
    if (header.empty()) throw ParseError("empty price file");

    std::size_t date_col = header.size(), close_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto name = detail::lower(header[i]);
        if (name == "date") date_col = i;
        if (name == "close") close_col = i;
    }
    if (date_col == header.size() || close_col == header.size())
        throw ParseError("header must contain 'date' and 'close' columns");

    std::vector<Date> dates;
    std::vector<double> closes;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() <= std::max(date_col, close_col))
            throw ParseError("line " + std::to_string(line_no) + ": too few columns");
        try {
            dates.push_back(Date::parse(cells[date_col]));
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        closes.push_back(detail::parse_double(cells[close_col], line_no));
    }
    if (closes.empty()) throw ParseError("price file has no data rows");
    return make_price_series(std::move(dates), std::move(closes));
}

inline PriceSeries load_prices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open price file '" + path + "'");
    return read_prices(in);
}

inline ReturnSeries log_returns(const PriceSeries& p) {
    if (p.size() < 2) throw LengthError("log_returns needs at least 2 prices");
    ReturnSeries r;
    r.dates.assign(p.dates.begin() + 1, p.dates.end());
    r.returns.resize(p.size() - 1);
    for (std::size_t t = 0; t + 1 < p.size(); ++t) r.returns[t] = std::log(p.closes[t + 1] / p.closes[t]);
    return r;
}

/// Inverse of log_returns: closes[0] = start, closes[t+1] = closes[t] * exp(r_t).
inline PriceSeries prices_from_returns(std::span<const double> returns, double start, Date first_date) {
    PriceSeries p;
    p.dates = business_days(first_date, returns.size() + 1);
    p.closes.resize(returns.size() + 1);
    p.closes[0] = start;
    double log_level = std::log(start);
    for (std::size_t t = 0; t < returns.size(); ++t) {
        log_level += returns[t];
        p.closes[t + 1] = std::exp(log_level);
    }
    return p;
}

inline DescriptiveStats describe(std::span<const double> r) {
    const std::size_t n = r.size();
    if (n < 4) throw LengthError("describe needs at least 4 observations");
    DescriptiveStats s;
    s.observations = n;
    const double nd = static_cast<double>(n);
    s.mean = std::accumulate(r.begin(), r.end(), 0.0) / nd;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : r) {
        const double d = x - s.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nd;
    m3 /= nd;
    m4 /= nd;
    s.std_dev = std::sqrt(m2 * nd / (nd - 1.0));
    if (m2 > 0.0) {
        const double g1 = m3 / std::pow(m2, 1.5);
        const double g2 = m4 / (m2 * m2) - 3.0;
        s.skewness = std::sqrt(nd * (nd - 1.0)) / (nd - 2.0) * g1;
        s.kurtosis = (nd - 1.0) / ((nd - 2.0) * (nd - 3.0)) * ((nd + 1.0) * g2 + 6.0);
    }
    std::vector<double> sorted(r.begin(), r.end());
    std::sort(sorted.begin(), sorted.end());
    s.minimum = sorted.front();
    s.maximum = sorted.back();
    s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return s;
}

inline DescriptiveStats describe(const ReturnSeries& r) { return describe(r.returns); }

struct SplitSeries {
    ReturnSeries train, val, test;
};

inline SplitSeries split(const ReturnSeries& r, const SplitSpec& s) {
    if (s.total() != r.size())
        throw LengthError("split lengths sum to " + std::to_string(s.total()) + " but series has " +
                          std::to_string(r.size()) + " observations");
    if (s.train_len == 0 || s.val_len == 0 || s.test_len == 0)
        throw LengthError("every split segment must be non-empty");
    auto slice = [&](std::size_t from, std::size_t len) {
        ReturnSeries out;
        out.dates.assign(r.dates.begin() + from, r.dates.begin() + from + len);
        out.returns.assign(r.returns.begin() + from, r.returns.begin() + from + len);
        return out;
    };
    return {slice(0, s.train_len), slice(s.train_len, s.val_len), slice(s.train_len + s.val_len, s.test_len)};
}

}  // namespace volblend
