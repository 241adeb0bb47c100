// hilbert.hpp: excitation-sector bases and collective spin/phonon matrix elements

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace adiatherm {

/// Collective spin S = N/2, stored as the integer 2S so half-integers compare exactly.
class Spin {
public:
    static Spin from_ions(int num_ions) {
        if (num_ions < 1) throw std::domain_error("Spin: need at least one ion");
        return Spin(num_ions);
    }
    static Spin from_twice(int twice_s) { return from_ions(twice_s); }

    int twice() const { return twice_; }
    double value() const { return 0.5 * twice_; }
    /// Highest Dicke level index, l = 2S.
    int max_level() const { return twice_; }
    int num_levels() const { return twice_ + 1; }

    friend bool operator==(Spin, Spin) = default;

private:
    explicit Spin(int twice) : twice_(twice) {}
    int twice_;
};

enum class Model { LinearJC, NonlinearJC };

inline const char* to_string(Model m) {
    return m == Model::LinearJC ? "linear" : "nonlinear";
}

struct PhysicalParams {
    int num_ions{1};
    double lamb_dicke{0.0};   // eta
    double mode_freq{0.0};    // omega_x, rad/s (0 = unspecified)
    double axial_freq{0.0};   // omega_z, rad/s (0 = unspecified)
    Model model{Model::LinearJC};

    Spin spin() const { return Spin::from_ions(num_ions); }

    void validate() const {
        if (num_ions < 1) throw std::domain_error("num_ions must be >= 1");
        if (!(lamb_dicke >= 0.0)) throw std::domain_error("lamb_dicke must be >= 0");
        if (mode_freq < 0.0 || axial_freq < 0.0)
            throw std::domain_error("trap frequencies must be non-negative");
        if (mode_freq > 0.0 && axial_freq > 0.0 && !(axial_freq < mode_freq))
            throw std::domain_error("axial_freq must be below mode_freq");
    }
};

struct BasisEntry {
    int level;    // spin excitations l
    int phonons;  // n = M - l
    friend bool operator==(const BasisEntry&, const BasisEntry&) = default;
};

/// Basis of the sector with M total excitations, ordered by spin level ascending.
struct SectorBasis {
    int excitations{0};
    std::vector<BasisEntry> entries;

    int dim() const { return static_cast<int>(entries.size()); }
};

inline int sector_dim(Spin s, int excitations) {
    return std::min(excitations, s.max_level()) + 1;
}

inline SectorBasis sector_basis(Spin s, int excitations) {
    if (excitations < 0) throw std::domain_error("sector_basis: negative excitation number");
    SectorBasis b;
    b.excitations = excitations;
    const int d = sector_dim(s, excitations);
    b.entries.reserve(d);
    for (int l = 0; l < d; ++l) b.entries.push_back({l, excitations - l});
    return b;
}

/// Sz eigenvalue m = -S + l of Dicke state |D_l>.
inline double sz_eigenvalue(Spin s, int level) {
    if (level < 0 || level > s.max_level())
        throw std::domain_error("sz_eigenvalue: level " + std::to_string(level) + " out of range");
    return 0.5 * (2 * level - s.twice());
}

/// <D_{l+1}| S+ |D_l> = sqrt((l+1)(2S-l)).
inline double ladder_element(Spin s, int level) {
    if (level < 0 || level >= s.max_level())
        throw std::domain_error("ladder_element: no level above " + std::to_string(level));
    return std::sqrt(static_cast<double>(level + 1) * static_cast<double>(s.twice() - level));
}

/// Diagonal element <n|F(n)|n> of the Lamb-Dicke nonlinearity,
/// e^{-eta^2/2} sum_{k<=n} (-eta^2)^k / (k!(k+1)!) * n!/(n-k)!.
/// Terms are accumulated by their ratio so no factorial is formed. The alternating
/// sum cancels several digits at large n, hence the long double accumulator.
inline double nonlinear_factor(int n, double eta) {
    if (n < 0) throw std::domain_error("nonlinear_factor: negative phonon number");
    const long double e2 = static_cast<long double>(eta) * eta;
    long double term = 1.0L;
    long double sum = 1.0L;
    for (int k = 1; k <= n; ++k) {
        term *= -e2 * static_cast<long double>(n - k + 1) / (static_cast<long double>(k) * (k + 1));
        sum += term;
    }
    return static_cast<double>(std::exp(-0.5L * e2) * sum);
}

/// Off-diagonal matrix element between (l, n_lower+1) and (l+1, n_lower), in units of lambda(t).
inline double coupling_element(const PhysicalParams& p, int level, int n_lower) {
    if (n_lower < 0) throw std::domain_error("coupling_element: negative phonon number");
    const double base = ladder_element(p.spin(), level) * std::sqrt(static_cast<double>(n_lower) + 1.0);
    if (p.model == Model::LinearJC) return base;
    return base * nonlinear_factor(n_lower, p.lamb_dicke);
}

/// binomial(N, l) in double precision; exact for the ion counts used here.
inline double dicke_degeneracy(int num_ions, int level) {
    if (level < 0 || level > num_ions) return 0.0;
    double c = 1.0;
    for (int k = 1; k <= level; ++k) c = c * (num_ions - level + k) / k;
    return std::round(c);
}

}  // namespace adiatherm
