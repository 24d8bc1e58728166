#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Core conventions shared by the whole library.
//
// The circle is R/Z with angles stored in [0,1).  The projective chart
// x = tan(pi*theta) identifies the circle with RP^1; theta = 1/2 is the
// point at infinity.  All modules use this one coordinate system.

namespace clab {

inline constexpr double kPi = 3.14159265358979323846;

struct error : std::runtime_error {
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

// Reduce to [0,1).  wrap(-0.25) == 0.75, wrap(1.0) == 0.0.
inline double wrap(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r -= 1.0;  // x == -0.0 or rounding at the seam
    return r;
}

// Signed representative in [-1/2, 1/2).
inline double wrap_sym(double x) {
    double r = wrap(x + 0.5) - 0.5;
    return r;
}

// Circular distance, always in [0, 1/2].
inline double circ_dist(double a, double b) {
    double d = std::fabs(wrap_sym(a - b));
    return d;
}

// |sin(pi*x)|, evaluated after symmetric reduction so it is accurate for x
// near integers.  sin(pi*x) itself is sign-ambiguous mod 1; every use in the
// library needs either the square or the absolute value.
inline double abs_sinpi(double x) { return std::fabs(std::sin(kPi * wrap_sym(x))); }

// True iff b lies strictly inside the cyclic open interval (a, c), a != c.
inline bool cyclic_between(double a, double b, double c) {
    double u = wrap(b - a), v = wrap(c - a);
    return u > 0.0 && u < v;
}

// Cyclic interval (lo, hi) walked counterclockwise from lo to hi.
struct CyclicInterval {
    double lo = 0.0, hi = 0.0;
    bool closed_lo = false, closed_hi = false;

    double length() const { return lo == hi ? (closed_lo && closed_hi ? 0.0 : 1.0) : wrap(hi - lo); }

    bool contains(double x) const {
        if (lo == hi) return closed_lo && closed_hi ? wrap(x - lo) == 0.0 : true;
        double u = wrap(x - lo), v = wrap(hi - lo);
        if (u == 0.0) return closed_lo;
        if (u == v) return closed_hi;
        return u < v;
    }
    double midpoint() const { return wrap(lo + 0.5 * length()); }
};

// Deterministic RNG (splitmix64); std::uniform_real_distribution is
// implementation-defined, so sampling goes through this everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // Uniform in [0,1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  private:
    std::uint64_t state_;
};

// Bisection + Newton on a strictly monotone function; used for all the
// 1-d chart inversions.  f must be increasing on [lo, hi] with
// f(lo) <= target <= f(hi).
template <typename F, typename DF>
double invert_monotone(F&& f, DF&& df, double target, double lo, double hi, double tol = 1e-14, int max_iter = 200) {
    double flo = f(lo) - target, fhi = f(hi) - target;
    if (flo > 0.0 || fhi < 0.0) throw error("invert_monotone: target not bracketed");
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        double fx = f(x) - target;
        if (fx > 0.0) hi = x; else lo = x;
        double d = df(x);
        double step = (d > 0.0) ? fx / d : std::numeric_limits<double>::infinity();
        double xn = x - step;
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::fabs(xn - x) < tol * (1.0 + std::fabs(x))) return xn;
        x = xn;
    }
    return x;
}

template <typename F>
double invert_monotone_bisect(F&& f, double target, double lo, double hi, double tol = 1e-14, int max_iter = 240) {
    double flo = f(lo) - target;
    if (flo > 0.0) throw error("invert_monotone_bisect: target below bracket");
    for (int it = 0; it < max_iter && hi - lo > tol * (1.0 + std::fabs(lo)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) - target > 0.0) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Smoothstep on [0,1], C^1 at both ends.
inline double smoothstep(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s * s * (3.0 - 2.0 * s);
}

}  // namespace clab
