#pragma once

// Photon waiting-time statistics: log-binned PDFs, exhaustive-window
// power-law regression with the R^2 / one-decade acceptance gate,
// exponential fits and the distribution of per-interval decay rates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kerr/error.hpp"
#include "kerr/mcwf.hpp"

namespace kerr {

/// Version tag of the fit rule below, written into output metadata.
inline constexpr const char* kFitRuleVersion = "exhaustive-bin-window/ols-loglog/v1";

struct WaitingTimeSample {
    std::vector<double> tau;  ///< t_k - t_{k-1}
    std::vector<double> s;    ///< -ln(eta_k) / tau_k
    std::vector<double> eta;  ///< threshold consumed at the jump closing interval k
};

inline void append_waiting_times(WaitingTimeSample& out, std::span<const double> times, std::span<const double> eta) {
    require(times.size() == eta.size(), "jump times and thresholds differ in length");
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double tau = times[k] - times[k - 1];
        if (!(tau > 0.0)) throw NumericalError("jump times must be strictly increasing");
        out.tau.push_back(tau);
        out.eta.push_back(eta[k]);
        out.s.push_back(-std::log(eta[k]) / tau);
    }
}

inline WaitingTimeSample waiting_times(const TrajectoryRecord& rec) {
    require(rec.jump_times.size() >= 2, "waiting times need at least 2 jumps");
    WaitingTimeSample out;
    append_waiting_times(out, rec.jump_times, rec.jump_thresholds);
    return out;
}

inline WaitingTimeSample waiting_times(std::span<const JumpEvent> jumps) {
    require(jumps.size() >= 2, "waiting times need at least 2 jumps");
    std::vector<double> t, e;
    for (const auto& j : jumps) {
        t.push_back(j.time);
        e.push_back(j.threshold);
    }
    WaitingTimeSample out;
    append_waiting_times(out, t, e);
    return out;
}

/// Pools intervals of statistically equivalent trajectories. Intervals are
/// never formed across trajectory boundaries.
inline WaitingTimeSample pool_waiting_times(std::span<const TrajectoryRecord> records) {
    WaitingTimeSample out;
    for (const auto& r : records)
        if (r.jump_times.size() >= 2) append_waiting_times(out, r.jump_times, r.jump_thresholds);
    return out;
}

struct PdfEstimate {
    std::vector<double> edges;  ///< size bins + 1
    std::vector<double> centers;
    std::vector<double> widths;
    std::vector<double> densities;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    bool logarithmic = false;
    int bins_per_decade = 0;

    std::size_t bins() const noexcept { return counts.size(); }
};

namespace detail {

inline void fill_density(PdfEstimate& pdf) {
    const std::size_t b = pdf.counts.size();
    pdf.widths.resize(b);
    pdf.densities.resize(b);
    pdf.centers.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        pdf.widths[i] = pdf.edges[i + 1] - pdf.edges[i];
        pdf.densities[i] = static_cast<double>(pdf.counts[i]) / (static_cast<double>(pdf.total) * pdf.widths[i]);
        pdf.centers[i] = pdf.logarithmic ? std::sqrt(pdf.edges[i] * pdf.edges[i + 1])
                                         : 0.5 * (pdf.edges[i] + pdf.edges[i + 1]);
    }
}

}  // namespace detail

/// Bins aligned to decades: edges 10^(k / bins_per_decade). The last bin is
/// closed on the right.
inline PdfEstimate log_binned_pdf(std::span<const double> samples, int bins_per_decade = 10) {
    require(!samples.empty(), "log_binned_pdf: empty input");
    require(bins_per_decade >= 1, "bins_per_decade must be >= 1");
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    require(*mn > 0.0 && std::isfinite(*mx), "log_binned_pdf: samples must be positive and finite");
    const double b = bins_per_decade;
    auto edge = [&](long k) { return std::pow(10.0, static_cast<double>(k) / b); };
    long lo = static_cast<long>(std::floor(b * std::log10(*mn)));
    while (edge(lo) > *mn) --lo;
    while (edge(lo + 1) <= *mn) ++lo;
    long hi = static_cast<long>(std::ceil(b * std::log10(*mx)));
    while (edge(hi) < *mx) ++hi;
    while (hi - 1 > lo && edge(hi - 1) >= *mx) --hi;
    if (hi <= lo) hi = lo + 1;

    PdfEstimate pdf;
    pdf.logarithmic = true;
    pdf.bins_per_decade = bins_per_decade;
    for (long k = lo; k <= hi; ++k) pdf.edges.push_back(edge(k));
    const std::size_t nb = pdf.edges.size() - 1;
    pdf.counts.assign(nb, 0);
    for (double x : samples) {
        long i = static_cast<long>(std::floor(b * std::log10(x))) - lo;
        i = std::clamp<long>(i, 0, static_cast<long>(nb) - 1);
        while (i > 0 && x < pdf.edges[static_cast<std::size_t>(i)]) --i;
        while (i + 1 < static_cast<long>(nb) && x >= pdf.edges[static_cast<std::size_t>(i) + 1]) ++i;
        ++pdf.counts[static_cast<std::size_t>(i)];
    }
    pdf.total = samples.size();
    detail::fill_density(pdf);
    return pdf;
}

inline PdfEstimate linear_binned_pdf(std::span<const double> samples, int bins) {
    require(!samples.empty(), "linear_binned_pdf: empty input");
    require(bins >= 1, "bins must be >= 1");
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    double lo = *mn, hi = *mx;
    if (hi <= lo) {
        const double pad = std::max(1e-12, std::abs(lo) * 1e-6);
        lo -= pad;
        hi += pad;
    }
    PdfEstimate pdf;
    for (int k = 0; k <= bins; ++k) pdf.edges.push_back(lo + (hi - lo) * k / bins);
    pdf.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double x : samples) {
        auto i = static_cast<long>((x - lo) / (hi - lo) * bins);
        i = std::clamp<long>(i, 0, bins - 1);
        ++pdf.counts[static_cast<std::size_t>(i)];
    }
    pdf.total = samples.size();
    detail::fill_density(pdf);
    return pdf;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares. R^2 = 1 - SS_res / SS_tot, clamped to [0, 1];
/// a constant response (SS_tot = 0) has R^2 = 0 unless it is fitted exactly
/// by a zero slope with SS_res = 0 as well, which is still reported as 0.
inline LinearFit linear_regression(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "regression needs >= 2 paired points");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0.0, "regression needs distinct x values");
    LinearFit f;
    f.points = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
    }
    f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 0.0;
    f.slope_stderr = x.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
    return f;
}

enum class FitModel { power_law, exponential, rejected };

inline std::string to_string(FitModel m) {
    switch (m) {
        case FitModel::power_law: return "power-law";
        case FitModel::exponential: return "exponential";
        case FitModel::rejected: return "rejected";
    }
    return "rejected";
}

struct FitResult {
    double alpha = std::numeric_limits<double>::quiet_NaN();  ///< PDF ~ tau^-alpha on the window
    double alpha_stderr = std::numeric_limits<double>::quiet_NaN();
    double tau_lo = 0.0, tau_hi = 0.0;  ///< outer bin edges of the window
    double r_squared = 0.0;
    double slope = 0.0, intercept = 0.0;  ///< log10 density = intercept + slope log10 tau
    std::size_t bin_lo = 0, bin_hi = 0;   ///< inclusive bin indices
    std::size_t points = 0;
    std::size_t windows_tested = 0;
    bool accepted = false;
    FitModel model = FitModel::rejected;
};

struct PowerLawGate {
    double min_r_squared = 0.98;
    double min_decades = 1.0;
};

class InsufficientSupport : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Exhaustive search over contiguous windows of non-empty bins spanning at
/// least one decade; OLS of log10 density on log10 tau in each. Returns the
/// accepted window with the largest R^2 (ties: widest). When no window
/// passes the gate the best window found is still reported, with
/// model = rejected.
inline FitResult fit_power_law(const PdfEstimate& pdf, const PowerLawGate& gate = {}) {
    require(pdf.logarithmic, "fit_power_law needs a log-binned PDF");
    const double span_needed = std::pow(10.0, gate.min_decades) * (1.0 - 1e-12);
    if (pdf.edges.back() / pdf.edges.front() < span_needed)
        throw InsufficientSupport("power-law fit: PDF support spans less than the minimum window");
    const std::size_t nb = pdf.bins();
    std::vector<double> lx(nb), ly(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        lx[i] = std::log10(pdf.centers[i]);
        ly[i] = pdf.counts[i] > 0 ? std::log10(pdf.densities[i]) : 0.0;
    }
    FitResult best;
    bool have = false;
    for (std::size_t i = 0; i < nb; ++i) {
        if (pdf.counts[i] == 0) continue;
        for (std::size_t j = i + 1; j < nb; ++j) {
            if (pdf.counts[j] == 0) break;
            if (pdf.edges[j + 1] / pdf.edges[i] < span_needed) continue;
            const std::size_t m = j - i + 1;
            if (m < 3) continue;
            const LinearFit f = linear_regression(std::span(lx).subspan(i, m), std::span(ly).subspan(i, m));
            ++best.windows_tested;
            const bool better = !have || f.r_squared > best.r_squared + 1e-12 ||
                                (std::abs(f.r_squared - best.r_squared) <= 1e-12 && m > best.points);
            if (better) {
                const auto tested = best.windows_tested;
                best = FitResult{};
                best.windows_tested = tested;
                best.alpha = -f.slope;
                best.alpha_stderr = f.slope_stderr;
                best.slope = f.slope;
                best.intercept = f.intercept;
                best.r_squared = f.r_squared;
                best.bin_lo = i;
                best.bin_hi = j;
                best.points = m;
                best.tau_lo = pdf.edges[i];
                best.tau_hi = pdf.edges[j + 1];
                have = true;
            }
        }
    }
    best.accepted = have && best.r_squared > gate.min_r_squared && best.tau_hi / best.tau_lo >= span_needed;
    best.model = best.accepted ? FitModel::power_law : FitModel::rejected;
    return best;
}

struct ExponentialFit {
    double rate = 0.0;         ///< maximum likelihood: 1 / mean
    double r_squared = 0.0;    ///< ln density vs tau on the log-binned tail
    double tail_slope = 0.0;   ///< fitted -rate on the tail
    std::size_t tail_bins = 0;
    bool degenerate = false;   ///< tail too short or constant input
};

/// Tail = bins with center >= sample median and at least `min_count`
/// entries, up to the first bin that falls below it.
inline ExponentialFit fit_exponential(std::span<const double> samples, int bins_per_decade = 10,
                                      std::size_t min_count = 10) {
    require(samples.size() >= 100, "fit_exponential needs >= 100 samples");
    ExponentialFit fit;
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    require(mean > 0.0, "fit_exponential: samples must be positive");
    fit.rate = 1.0 / mean;
    std::vector<double> sorted(samples.begin(), samples.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const PdfEstimate pdf = log_binned_pdf(samples, bins_per_decade);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < pdf.bins(); ++i) {
        if (pdf.centers[i] < median) continue;
        if (pdf.counts[i] < min_count) break;
        x.push_back(pdf.centers[i]);
        y.push_back(std::log(pdf.densities[i]));
    }
    fit.tail_bins = x.size();
    if (x.size() < 3) {
        fit.degenerate = true;
        return fit;
    }
    const LinearFit f = linear_regression(x, y);
    fit.r_squared = f.r_squared;
    fit.tail_slope = f.slope;
    return fit;
}

struct DecayRateDistribution {
    PdfEstimate pdf;
    double median = 0.0;
    double iqr = 0.0;
    double broadening = 0.0;  ///< iqr / median
};

inline double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
}

/// Linear-binned PDF of s_k with the IQR/median width diagnostic.
inline DecayRateDistribution decay_rate_pdf(const WaitingTimeSample& sample, int bins = 50) {
    require(!sample.s.empty(), "decay_rate_pdf: empty sample");
    DecayRateDistribution out;
    out.pdf = linear_binned_pdf(sample.s, bins);
    std::vector<double> v = sample.s;
    std::sort(v.begin(), v.end());
    out.median = quantile_sorted(v, 0.5);
    out.iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
    out.broadening = out.median > 0.0 ? out.iqr / out.median : 0.0;
    return out;
}

/// Two-sided one-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    require(!samples.empty(), "KS test: empty sample");
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// Asymptotic p-value of the KS statistic with the Stephens small-sample
/// correction.
inline double ks_p_value(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lam = (sn + 0.12 + 0.11 / sn) * d;
    // Below 0.27 the series converges slowly and Q differs from 1 by < 1e-6.
    if (lam < 0.27) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

struct WtdAnalysis {
    WaitingTimeSample sample;
    PdfEstimate pdf;
    FitResult power_law;
    ExponentialFit exponential;
    DecayRateDistribution decay_rates;
    bool support_ok = true;
};

inline WtdAnalysis analyze_waiting_times(WaitingTimeSample sample, int bins_per_decade = 10) {
    WtdAnalysis a;
    a.sample = std::move(sample);
    a.pdf = log_binned_pdf(a.sample.tau, bins_per_decade);
    try {
        a.power_law = fit_power_law(a.pdf);
    } catch (const InsufficientSupport&) {
        a.support_ok = false;
    }
    if (a.sample.tau.size() >= 100) a.exponential = fit_exponential(a.sample.tau, bins_per_decade);
    a.decay_rates = decay_rate_pdf(a.sample);
    return a;
}

}  // namespace kerr
