#pragma once

// Truncated Fock space: states, tridiagonal operators and observables of the
// periodically driven Kerr cavity
//
//   H(t) = chi/2 a^+2 a^2 + i F(t) (a^+ - a),   V = sqrt(gamma) a.

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kerr/error.hpp"

namespace kerr {

using complex = std::complex<double>;

struct ModelParams {
    double chi = 0.008;   ///< photon interaction strength (hbar = 1)
    double gamma = 0.05;  ///< dissipative coupling rate
    double A = 0.0;       ///< drive amplitude
    double T = 1.0;       ///< drive period
    int N = 300;          ///< Fock truncation; Hilbert dimension N + 1

    std::size_t dim() const noexcept { return static_cast<std::size_t>(N) + 1; }

    // gamma = 0 is admitted: the unitary limit is used as a reference case.
    void validate() const {
        require(std::isfinite(chi) && chi >= 0.0, "chi must be >= 0");
        require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be >= 0");
        require(std::isfinite(A) && A >= 0.0, "A must be >= 0");
        require(std::isfinite(T) && T > 0.0, "T must be > 0");
        require(N >= 1, "N must be >= 1");
    }
};

/// Fock-basis amplitudes c_0..c_N. May be sub-normalized between jumps.
class StateVector {
  public:
    StateVector() = default;
    explicit StateVector(std::size_t dim) : amp_(dim, complex{0.0, 0.0}) {}
    explicit StateVector(std::vector<complex> amplitudes) : amp_(std::move(amplitudes)) {}

    static StateVector fock(int N, int n) {
        require(N >= 1, "invalid truncation");
        require(n >= 0 && n <= N, "Fock index out of range");
        StateVector psi(static_cast<std::size_t>(N) + 1);
        psi.amp_[static_cast<std::size_t>(n)] = 1.0;
        return psi;
    }
    static StateVector vacuum(int N) { return fock(N, 0); }

    std::size_t size() const noexcept { return amp_.size(); }
    int truncation() const noexcept { return static_cast<int>(amp_.size()) - 1; }

    complex& operator[](std::size_t n) noexcept { return amp_[n]; }
    const complex& operator[](std::size_t n) const noexcept { return amp_[n]; }

    std::span<complex> data() noexcept { return amp_; }
    std::span<const complex> data() const noexcept { return amp_; }
    std::vector<complex>& raw() noexcept { return amp_; }

    double norm2() const noexcept {
        double s = 0.0;
        for (const auto& c : amp_) s += std::norm(c);
        return s;
    }

    /// Scales to unit norm; throws on the zero vector.
    StateVector& normalize() {
        const double n2 = norm2();
        if (!(n2 > 0.0) || !std::isfinite(n2)) throw NumericalError("cannot normalize zero-norm state");
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& c : amp_) c *= inv;
        return *this;
    }

    StateVector normalized() const {
        StateVector out = *this;
        out.normalize();
        return out;
    }

    /// Weight of levels n > 0.9 N relative to the total.
    double top_band_fraction() const noexcept {
        const std::size_t N = amp_.size() - 1;
        const auto first = static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(N))) + 1;
        double top = 0.0;
        for (std::size_t n = first; n <= N; ++n) top += std::norm(amp_[n]);
        const double total = norm2();
        return total > 0.0 ? top / total : 0.0;
    }

    friend bool operator==(const StateVector&, const StateVector&) = default;

  private:
    std::vector<complex> amp_;
};

/// Complex tridiagonal operator over the truncated Fock space.
/// super[n] is element (n, n+1); sub[n] is element (n+1, n).
struct BandedOperator {
    std::vector<complex> diag;
    std::vector<complex> super;
    std::vector<complex> sub;

    BandedOperator() = default;
    explicit BandedOperator(std::size_t dim)
        : diag(dim, complex{}), super(dim - 1, complex{}), sub(dim - 1, complex{}) {}

    std::size_t dim() const noexcept { return diag.size(); }

    complex element(std::size_t row, std::size_t col) const noexcept {
        if (row == col) return diag[row];
        if (col == row + 1) return super[row];
        if (row == col + 1) return sub[col];
        return {};
    }

    /// out = op * in
    void apply(std::span<const complex> in, std::span<complex> out) const {
        const std::size_t d = dim();
        require(in.size() == d && out.size() == d, "operator/state dimension mismatch");
        if (d == 1) {
            out[0] = diag[0] * in[0];
            return;
        }
        out[0] = diag[0] * in[0] + super[0] * in[1];
        for (std::size_t n = 1; n + 1 < d; ++n)
            out[n] = sub[n - 1] * in[n - 1] + diag[n] * in[n] + super[n] * in[n + 1];
        out[d - 1] = sub[d - 2] * in[d - 2] + diag[d - 1] * in[d - 1];
    }

    StateVector apply(const StateVector& psi) const {
        StateVector out(psi.size());
        apply(psi.data(), out.data());
        return out;
    }

    BandedOperator adjoint() const {
        BandedOperator out(dim());
        for (std::size_t n = 0; n < dim(); ++n) out.diag[n] = std::conj(diag[n]);
        for (std::size_t n = 0; n + 1 < dim(); ++n) {
            out.super[n] = std::conj(sub[n]);
            out.sub[n] = std::conj(super[n]);
        }
        return out;
    }

    /// Exact (bitwise) Hermiticity.
    bool is_hermitian() const noexcept {
        for (const auto& d : diag)
            if (d.imag() != 0.0) return false;
        for (std::size_t n = 0; n < super.size(); ++n)
            if (sub[n] != std::conj(super[n])) return false;
        return true;
    }

    friend bool operator==(const BandedOperator&, const BandedOperator&) = default;
};

inline BandedOperator build_annihilation(int N) {
    require(N >= 1, "invalid truncation: N must be >= 1");
    BandedOperator a(static_cast<std::size_t>(N) + 1);
    for (int n = 0; n < N; ++n) a.super[static_cast<std::size_t>(n)] = std::sqrt(static_cast<double>(n + 1));
    return a;
}

inline BandedOperator build_number(int N) {
    require(N >= 1, "invalid truncation: N must be >= 1");
    BandedOperator num(static_cast<std::size_t>(N) + 1);
    for (int n = 0; n <= N; ++n) num.diag[static_cast<std::size_t>(n)] = static_cast<double>(n);
    return num;
}

/// H for one value of the quench drive.
inline BandedOperator build_hamiltonian(const ModelParams& p, double F) {
    p.validate();
    require(std::isfinite(F), "drive value must be finite");
    BandedOperator h(p.dim());
    for (int n = 0; n <= p.N; ++n) {
        const double nd = n;
        h.diag[static_cast<std::size_t>(n)] = 0.5 * p.chi * nd * (nd - 1.0);
    }
    for (int n = 0; n < p.N; ++n) {
        const double s = F * std::sqrt(static_cast<double>(n + 1));
        h.sub[static_cast<std::size_t>(n)] = complex{0.0, s};
        h.super[static_cast<std::size_t>(n)] = complex{0.0, -s};
    }
    return h;
}

/// H_eff = H - (i/2) V^+V = H - (i/2) gamma n.
inline BandedOperator build_effective_hamiltonian(const ModelParams& p, double F) {
    BandedOperator h = build_hamiltonian(p, F);
    for (int n = 0; n <= p.N; ++n) h.diag[static_cast<std::size_t>(n)] += complex{0.0, -0.5 * p.gamma * n};
    return h;
}

/// <psi|op|psi> without normalization.
inline complex expectation_unnormalized(const StateVector& psi, const BandedOperator& op) {
    const std::size_t d = op.dim();
    require(psi.size() == d, "operator/state dimension mismatch");
    complex acc{};
    for (std::size_t n = 0; n < d; ++n) {
        complex row = op.diag[n] * psi[n];
        if (n + 1 < d) row += op.super[n] * psi[n + 1];
        if (n > 0) row += op.sub[n - 1] * psi[n - 1];
        acc += std::conj(psi[n]) * row;
    }
    return acc;
}

/// <psi|op|psi> / <psi|psi>: the physical expectation even while the
/// trajectory norm decays between jumps.
inline complex expectation(const StateVector& psi, const BandedOperator& op) {
    const double n2 = psi.norm2();
    if (!(n2 > 0.0)) throw NumericalError("expectation of zero-norm state");
    return expectation_unnormalized(psi, op) / n2;
}

/// xi = <a>, normalized. Specialized for the trajectory hot path.
inline complex mean_field_amplitude(const StateVector& psi) {
    const std::size_t d = psi.size();
    complex acc{};
    for (std::size_t n = 0; n + 1 < d; ++n)
        acc += std::conj(psi[n]) * psi[n + 1] * std::sqrt(static_cast<double>(n + 1));
    const double n2 = psi.norm2();
    if (!(n2 > 0.0)) throw NumericalError("expectation of zero-norm state");
    return acc / n2;
}

/// <n>, normalized.
inline double mean_photon_number(const StateVector& psi) {
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < psi.size(); ++n) {
        const double w = std::norm(psi[n]);
        num += static_cast<double>(n) * w;
        den += w;
    }
    if (!(den > 0.0)) throw NumericalError("expectation of zero-norm state");
    return num / den;
}

}  // namespace kerr
