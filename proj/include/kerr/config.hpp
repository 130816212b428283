#pragma once

// Sweep configuration: a line-oriented "key = value" document.
//
//   # comment
//   A_grid = 0.5, 1.0, 2.0        or   A_grid = linspace(0.2, 5.0, 12)
//   T_grid = 10, 20
//   tasks  = lyapunov, wtd
//   override[1,0].M_r = 20        per-point override (A index, T index)
//
// Unknown keys, malformed values and invariant violations are reported with
// the offending line number.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kerr/error.hpp"
#include "kerr/fock.hpp"
#include "kerr/lyapunov.hpp"

namespace kerr {

class ConfigError : public ValidationError {
  public:
    ConfigError(int line, const std::string& msg)
        : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    int line() const noexcept { return line_; }

  private:
    int line_;
};

inline const std::vector<std::string>& known_tasks() {
    static const std::vector<std::string> t{"lyapunov", "wtd", "meanfield-le", "bifurcation"};
    return t;
}

/// Settings a single grid point may override.
struct PointOverride {
    std::optional<int> N;
    std::optional<int> M_r;
    std::optional<double> t_transient_periods;
    std::optional<double> t_measure_periods;
    std::optional<double> dt_override;

    bool empty() const noexcept {
        return !N && !M_r && !t_transient_periods && !t_measure_periods && !dt_override;
    }

    friend bool operator==(const PointOverride&, const PointOverride&) = default;
};

struct SweepSpec {
    double chi = 0.008;
    double gamma = 0.05;
    int N = 300;
    std::vector<double> A_grid;
    std::vector<double> T_grid;
    std::vector<std::string> tasks{"lyapunov", "wtd"};
    std::uint64_t master_seed = 0;
    int M_r = 100;
    double t_transient_periods = 2000.0;
    double t_measure_periods = 1000.0;
    double dt_override = 0.0;  ///< 0 = automatic step
    Observable observable = Observable::xi;
    int bins_per_decade = 10;
    double epsilon = 1e-4;
    double delta_0_factor = LyapunovConfig{}.delta_0_factor;
    std::map<std::pair<std::size_t, std::size_t>, PointOverride> overrides;

    bool has_task(std::string_view t) const {
        return std::find(tasks.begin(), tasks.end(), t) != tasks.end();
    }
    std::size_t points() const noexcept { return A_grid.size() * T_grid.size(); }
    std::size_t point_index(std::size_t ia, std::size_t it) const noexcept { return ia * T_grid.size() + it; }

    friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const auto c = s.find(',', pos);
        out.push_back(trim(s.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos)));
        if (c == std::string_view::npos) break;
        pos = c + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, int line, std::string_view key) {
    s = trim(s);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw ConfigError(line, "key '" + std::string(key) + "': not a number: '" + std::string(s) + "'");
    return v;
}

inline std::uint64_t parse_u64(std::string_view s, int line, std::string_view key) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw ConfigError(line, "key '" + std::string(key) + "': not an unsigned integer: '" + std::string(s) + "'");
    return v;
}

inline int parse_int(std::string_view s, int line, std::string_view key) {
    s = trim(s);
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || v < INT32_MIN || v > INT32_MAX)
        throw ConfigError(line, "key '" + std::string(key) + "': not an integer: '" + std::string(s) + "'");
    return static_cast<int>(v);
}

inline std::vector<double> parse_grid(std::string_view s, int line, std::string_view key) {
    s = trim(s);
    if (s.starts_with("linspace(")) {
        if (!s.ends_with(")")) throw ConfigError(line, "key '" + std::string(key) + "': unterminated linspace(");
        const auto args = split_commas(s.substr(9, s.size() - 10));
        if (args.size() != 3) throw ConfigError(line, "key '" + std::string(key) + "': linspace(a, b, n) takes 3 arguments");
        const double a = parse_double(args[0], line, key);
        const double b = parse_double(args[1], line, key);
        const int n = parse_int(args[2], line, key);
        if (n < 1) throw ConfigError(line, "key '" + std::string(key) + "': linspace count must be >= 1");
        std::vector<double> g;
        for (int k = 0; k < n; ++k) g.push_back(n == 1 ? a : a + (b - a) * k / (n - 1));
        return g;
    }
    std::vector<double> g;
    for (auto item : split_commas(s)) g.push_back(parse_double(item, line, key));
    return g;
}

inline std::string fmt_roundtrip(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct KeyLines {
    std::map<std::string, int> line;
};

}  // namespace detail

inline void validate(const SweepSpec& s, const detail::KeyLines& kl = {}) {
    auto at = [&](const std::string& k) {
        const auto it = kl.line.find(k);
        return it == kl.line.end() ? 0 : it->second;
    };
    auto check = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) throw ConfigError(at(key), "key '" + key + "': " + msg);
    };
    check(std::isfinite(s.chi) && s.chi >= 0.0, "chi", "must be >= 0");
    check(std::isfinite(s.gamma) && s.gamma > 0.0, "gamma", "must be > 0");
    check(s.N >= 1, "N", "must be >= 1");
    check(!s.A_grid.empty(), "A_grid", "must be non-empty");
    check(!s.T_grid.empty(), "T_grid", "must be non-empty");
    for (std::size_t i = 0; i < s.A_grid.size(); ++i) {
        check(std::isfinite(s.A_grid[i]) && s.A_grid[i] >= 0.0, "A_grid", "amplitudes must be >= 0");
        check(i == 0 || s.A_grid[i] > s.A_grid[i - 1], "A_grid", "must be strictly increasing");
    }
    for (std::size_t i = 0; i < s.T_grid.size(); ++i) {
        check(std::isfinite(s.T_grid[i]) && s.T_grid[i] > 0.0, "T_grid", "periods must be > 0");
        check(i == 0 || s.T_grid[i] > s.T_grid[i - 1], "T_grid", "must be strictly increasing");
    }
    check(!s.tasks.empty(), "tasks", "must be non-empty");
    for (const auto& t : s.tasks)
        check(std::find(known_tasks().begin(), known_tasks().end(), t) != known_tasks().end(), "tasks",
              "unknown task '" + t + "'");
    check(s.M_r >= 1, "M_r", "must be >= 1");
    check(std::isfinite(s.t_transient_periods) && s.t_transient_periods >= 0.0, "t_transient_periods", "must be >= 0");
    check(std::isfinite(s.t_measure_periods) && s.t_measure_periods > 0.0, "t_measure_periods", "must be > 0");
    check(std::isfinite(s.dt_override) && s.dt_override >= 0.0, "dt_override", "must be >= 0 (0 = automatic)");
    check(s.bins_per_decade >= 1, "bins_per_decade", "must be >= 1");
    check(s.epsilon >= 0.0 && s.epsilon < 1.0, "epsilon", "must lie in [0, 1)");
    check(s.delta_0_factor > 0.0, "delta_0_factor", "must be > 0");
    for (const auto& [idx, o] : s.overrides) {
        const std::string key = "override[" + std::to_string(idx.first) + "," + std::to_string(idx.second) + "]";
        check(idx.first < s.A_grid.size() && idx.second < s.T_grid.size(), key, "index outside the grid");
        check(!o.N || *o.N >= 1, key + ".N", "must be >= 1");
        check(!o.M_r || *o.M_r >= 1, key + ".M_r", "must be >= 1");
        check(!o.t_transient_periods || *o.t_transient_periods >= 0.0, key + ".t_transient_periods", "must be >= 0");
        check(!o.t_measure_periods || *o.t_measure_periods > 0.0, key + ".t_measure_periods", "must be > 0");
        check(!o.dt_override || *o.dt_override >= 0.0, key + ".dt_override", "must be >= 0");
    }
}

inline SweepSpec parse_config(std::string_view text) {
    SweepSpec s;
    detail::KeyLines kl;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view l = raw;
        if (const auto h = l.find('#'); h != std::string_view::npos) l = l.substr(0, h);
        l = detail::trim(l);
        if (l.empty()) continue;
        const auto eq = l.find('=');
        if (eq == std::string_view::npos) throw ConfigError(line, "expected 'key = value'");
        const std::string key(detail::trim(l.substr(0, eq)));
        const std::string_view val = detail::trim(l.substr(eq + 1));
        if (key.empty()) throw ConfigError(line, "missing key before '='");
        if (val.empty()) throw ConfigError(line, "key '" + key + "': missing value");
        if (kl.line.contains(key)) throw ConfigError(line, "key '" + key + "' given twice");
        kl.line[key] = line;

        if (key.starts_with("override[")) {
            const auto close = key.find("].");
            if (close == std::string::npos) throw ConfigError(line, "malformed override key '" + key + "'");
            const auto idx = detail::split_commas(std::string_view(key).substr(9, close - 9));
            if (idx.size() != 2) throw ConfigError(line, "override key needs [A index, T index]");
            const auto ia = detail::parse_u64(idx[0], line, key);
            const auto it = detail::parse_u64(idx[1], line, key);
            const std::string field = key.substr(close + 2);
            PointOverride& o = s.overrides[{ia, it}];
            if (field == "N") o.N = detail::parse_int(val, line, key);
            else if (field == "M_r") o.M_r = detail::parse_int(val, line, key);
            else if (field == "t_transient_periods") o.t_transient_periods = detail::parse_double(val, line, key);
            else if (field == "t_measure_periods") o.t_measure_periods = detail::parse_double(val, line, key);
            else if (field == "dt_override") o.dt_override = detail::parse_double(val, line, key);
            else throw ConfigError(line, "unknown override field '" + field + "'");
            continue;
        }

        if (key == "chi") s.chi = detail::parse_double(val, line, key);
        else if (key == "gamma") s.gamma = detail::parse_double(val, line, key);
        else if (key == "N") s.N = detail::parse_int(val, line, key);
        else if (key == "A_grid") s.A_grid = detail::parse_grid(val, line, key);
        else if (key == "T_grid") s.T_grid = detail::parse_grid(val, line, key);
        else if (key == "tasks") {
            s.tasks.clear();
            for (auto t : detail::split_commas(val)) s.tasks.emplace_back(t);
        } else if (key == "master_seed") s.master_seed = detail::parse_u64(val, line, key);
        else if (key == "M_r") s.M_r = detail::parse_int(val, line, key);
        else if (key == "t_transient_periods") s.t_transient_periods = detail::parse_double(val, line, key);
        else if (key == "t_measure_periods") s.t_measure_periods = detail::parse_double(val, line, key);
        else if (key == "dt_override") s.dt_override = detail::parse_double(val, line, key);
        else if (key == "observable") {
            if (val != "xi" && val != "n") throw ConfigError(line, "key 'observable': expected xi or n");
            s.observable = observable_from_string(std::string(val));
        } else if (key == "bins_per_decade") s.bins_per_decade = detail::parse_int(val, line, key);
        else if (key == "epsilon") s.epsilon = detail::parse_double(val, line, key);
        else if (key == "delta_0_factor") s.delta_0_factor = detail::parse_double(val, line, key);
        else throw ConfigError(line, "unknown key '" + key + "'");
    }
    if (!kl.line.contains("A_grid")) throw ConfigError(0, "missing required key 'A_grid'");
    if (!kl.line.contains("T_grid")) throw ConfigError(0, "missing required key 'T_grid'");
    validate(s, kl);
    return s;
}

/// Canonical text form; parse_config(emit_config(s)) == s.
inline std::string emit_config(const SweepSpec& s) {
    using detail::fmt_roundtrip;
    std::ostringstream os;
    auto list = [&](const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_roundtrip(v[i]);
        return out;
    };
    os << "chi = " << fmt_roundtrip(s.chi) << '\n';
    os << "gamma = " << fmt_roundtrip(s.gamma) << '\n';
    os << "N = " << s.N << '\n';
    os << "A_grid = " << list(s.A_grid) << '\n';
    os << "T_grid = " << list(s.T_grid) << '\n';
    os << "tasks = ";
    for (std::size_t i = 0; i < s.tasks.size(); ++i) os << (i ? ", " : "") << s.tasks[i];
    os << '\n';
    os << "master_seed = " << s.master_seed << '\n';
    os << "M_r = " << s.M_r << '\n';
    os << "t_transient_periods = " << fmt_roundtrip(s.t_transient_periods) << '\n';
    os << "t_measure_periods = " << fmt_roundtrip(s.t_measure_periods) << '\n';
    os << "dt_override = " << fmt_roundtrip(s.dt_override) << '\n';
    os << "observable = " << to_string(s.observable) << '\n';
    os << "bins_per_decade = " << s.bins_per_decade << '\n';
    os << "epsilon = " << fmt_roundtrip(s.epsilon) << '\n';
    os << "delta_0_factor = " << fmt_roundtrip(s.delta_0_factor) << '\n';
    for (const auto& [idx, o] : s.overrides) {
        const std::string k = "override[" + std::to_string(idx.first) + "," + std::to_string(idx.second) + "].";
        if (o.N) os << k << "N = " << *o.N << '\n';
        if (o.M_r) os << k << "M_r = " << *o.M_r << '\n';
        if (o.t_transient_periods) os << k << "t_transient_periods = " << fmt_roundtrip(*o.t_transient_periods) << '\n';
        if (o.t_measure_periods) os << k << "t_measure_periods = " << fmt_roundtrip(*o.t_measure_periods) << '\n';
        if (o.dt_override) os << k << "dt_override = " << fmt_roundtrip(*o.dt_override) << '\n';
    }
    return os.str();
}

}  // namespace kerr
