#pragma once

// CSV tables and JSON metadata. Every number in CSV output is written with
// %.17e so files round-trip bit-exactly.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kerr/error.hpp"
#include "kerr/fock.hpp"
#include "kerr/lyapunov.hpp"
#include "kerr/mcwf.hpp"
#include "kerr/meanfield.hpp"
#include "kerr/stats.hpp"

namespace kerr {

inline constexpr const char* kCodeVersion = "kerrlab 1.1.0";

using json = nlohmann::json;

inline std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17e", x);
    return buf;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Writes to a sibling temp file and renames over the target, so readers
/// never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// JSON has no NaN; it is written as null and read back as NaN.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline double get_num(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json to_json(const ModelParams& p) {
    return {{"chi", p.chi}, {"gamma", p.gamma}, {"A", p.A}, {"T", p.T}, {"N", p.N}};
}

inline json provenance_json(std::uint64_t config_hash, std::uint64_t master_seed) {
    return {{"config_hash", hex64(config_hash)},
            {"master_seed", master_seed},
            {"code_version", kCodeVersion},
            {"fit_rule", kFitRuleVersion}};
}

inline json to_json(const FitResult& f) {
    return {{"model", to_string(f.model)},
            {"accepted", f.accepted},
            {"alpha", num(f.alpha)},
            {"alpha_stderr", num(f.alpha_stderr)},
            {"r2", f.r_squared},
            {"tau_lo", f.tau_lo},
            {"tau_hi", f.tau_hi},
            {"decades", f.tau_lo > 0.0 ? std::log10(f.tau_hi / f.tau_lo) : 0.0},
            {"slope", f.slope},
            {"intercept", f.intercept},
            {"bin_lo", f.bin_lo},
            {"bin_hi", f.bin_hi},
            {"points", f.points},
            {"windows_tested", f.windows_tested},
            {"rule", kFitRuleVersion}};
}

inline json to_json(const ExponentialFit& f) {
    return {{"rate", f.rate},
            {"r2", f.r_squared},
            {"tail_slope", f.tail_slope},
            {"tail_bins", f.tail_bins},
            {"degenerate", f.degenerate}};
}

inline void write_pdf_csv(std::ostream& os, const PdfEstimate& pdf) {
    os << "bin_lo,bin_hi,center,count,density\n";
    for (std::size_t i = 0; i < pdf.bins(); ++i)
        os << fmt_double(pdf.edges[i]) << ',' << fmt_double(pdf.edges[i + 1]) << ',' << fmt_double(pdf.centers[i])
           << ',' << pdf.counts[i] << ',' << fmt_double(pdf.densities[i]) << '\n';
}

inline void write_jumps_csv(std::ostream& os, const TrajectoryRecord& rec) {
    os << "t_k,eta_k\n";
    for (std::size_t k = 0; k < rec.jump_times.size(); ++k)
        os << fmt_double(rec.jump_times[k]) << ',' << fmt_double(rec.jump_thresholds[k]) << '\n';
}

inline void write_strobe_csv(std::ostream& os, const TrajectoryRecord& rec) {
    os << "period_index,Re_xi,Im_xi\n";
    for (std::size_t k = 0; k < rec.strobe_xi.size(); ++k)
        os << rec.strobe_period[k] << ',' << fmt_double(rec.strobe_xi[k].real()) << ','
           << fmt_double(rec.strobe_xi[k].imag()) << '\n';
}

inline void write_n_series_csv(std::ostream& os, const TrajectoryRecord& rec) {
    os << "t,n\n";
    for (std::size_t k = 0; k < rec.n_times.size(); ++k)
        os << fmt_double(rec.n_times[k]) << ',' << fmt_double(rec.n_series[k]) << '\n';
}

/// Reset table of one LE run: t_k (from the start of the measurement
/// window), d_k and the running estimate at t_k.
inline void write_lyapunov_csv(std::ostream& os, const LyapunovRun& run) {
    os << "t_k,d_k,lambda\n";
    double acc = 0.0;
    for (std::size_t k = 0; k < run.reset_times.size(); ++k) {
        acc += std::log(run.growth_factors[k]);
        const double t = run.reset_times[k];
        os << fmt_double(t) << ',' << fmt_double(run.growth_factors[k]) << ',' << fmt_double(t > 0.0 ? acc / t : 0.0)
           << '\n';
    }
}

inline void write_lambda_series_csv(std::ostream& os, const LyapunovRun& run) {
    os << "t,lambda\n";
    for (std::size_t k = 0; k < run.lambda_times.size(); ++k)
        os << fmt_double(run.lambda_times[k]) << ',' << fmt_double(run.lambda_series[k]) << '\n';
}

inline void write_bifurcation_csv(std::ostream& os, const std::vector<BifurcationPoint>& pts) {
    os << "A,Re_xi,Im_xi,sample_index\n";
    for (const auto& b : pts)
        os << fmt_double(b.A) << ',' << fmt_double(b.xi.real()) << ',' << fmt_double(b.xi.imag()) << ','
           << b.sample_index << '\n';
}

inline json to_json(const LyapunovRun& r) {
    return {{"lambda", r.lambda_final},
            {"resets", r.reset_times.size()},
            {"sigma", r.sigma},
            {"delta_0", r.delta_0},
            {"delta_min", r.delta_min},
            {"delta_max", r.delta_max},
            {"reperturbations", r.reperturbations},
            {"desyncs", r.desyncs},
            {"max_reset_residual", r.max_reset_residual},
            {"truncation_warning", r.truncation_warning},
            {"jumps", r.fiducial_jumps.size()},
            {"eta_seed", r.eta_seed}};
}

inline json to_json(const LyapunovResult& r) {
    json runs = json::array();
    for (const auto& x : r.runs) runs.push_back(to_json(x));
    return {{"lambda_q", r.lambda}, {"stderr", r.stderr_}, {"truncation_warning", r.truncation_warning},
            {"dt", r.dt}, {"runs", runs}};
}

template <class Fn>
std::string to_text(Fn&& writer) {
    std::ostringstream os;
    writer(os);
    return os.str();
}

}  // namespace kerr
