#pragma once

#include <array>
#include <optional>
#include <utility>

#include "clab/core.hpp"

// PSL(2,R) acting projectively on the circle through the chart
// x = tan(pi*theta), plus the canonical invariant two-point density
//
//     omega0(t1,t2) = 4 pi^2 / sin^2(pi (t1 - t2)),
//
// which is the angle-coordinate pullback of 4 dx dy / (x-y)^2.
//
// A point theta is represented homogeneously by p = (sin(pi t), cos(pi t));
// the matrix acts linearly on p and the induced circle-map derivative is
// |p|^2 / |M p|^2 = 1 / |M p|^2 for unit p.  This avoids the chart's
// infinity entirely.

namespace clab {

enum class MobiusClass { Identity, Elliptic, Parabolic, Hyperbolic };

inline const char* to_string(MobiusClass c) {
    switch (c) {
        case MobiusClass::Identity: return "identity";
        case MobiusClass::Elliptic: return "elliptic";
        case MobiusClass::Parabolic: return "parabolic";
        case MobiusClass::Hyperbolic: return "hyperbolic";
    }
    return "?";
}

class MobiusElement {
  public:
    static constexpr double kDetTol = 1e-12;
    static constexpr double kParabolicTol = 1e-9;  // on ||trace| - 2|

    MobiusElement() : a_(1), b_(0), c_(0), d_(1) {}

    // Entries row-major (a b; c d); determinant must be positive and is
    // renormalized to 1; the representative sign is fixed by the first
    // nonzero entry.
    MobiusElement(double a, double b, double c, double d) : a_(a), b_(b), c_(c), d_(d) { normalize(); }

    static MobiusElement identity() { return MobiusElement(); }

    // Rotation by angle alpha in the chart: theta -> theta - alpha/pi mod 1.
    static MobiusElement rotation_matrix(double alpha) {
        return MobiusElement(std::cos(alpha), -std::sin(alpha), std::sin(alpha), std::cos(alpha));
    }

    // Circle rotation theta -> theta + r mod 1.
    static MobiusElement circle_rotation(double r) { return rotation_matrix(-kPi * r); }

    // Hyperbolic element with repelling fixed angle rep, attracting att and
    // derivative 0 < lambda_att < 1 at the attracting point.
    static MobiusElement hyperbolic(double rep, double att, double lambda_att) {
        if (!(lambda_att > 0.0) || lambda_att == 1.0) throw error("hyperbolic: need multiplier in (0,1)");
        if (circ_dist(rep, att) == 0.0) throw error("hyperbolic: coincident fixed points");
        // Conjugate diag(s, 1/s) by the frame F with F e1 = p(att), F e2 =
        // p(rep).  The derivative at att is 1/s^2, so s = 1/sqrt(lambda_att).
        double s = 1.0 / std::sqrt(lambda_att);
        double fa = std::sin(kPi * att), fc = std::cos(kPi * att);
        double fb = std::sin(kPi * rep), fd = std::cos(kPi * rep);
        return conjugated(s, 0.0, 0.0, 1.0 / s, fa, fb, fc, fd);
    }

    // Parabolic element fixing `fixed`, parametrized by shear t (t=0 gives Id).
    static MobiusElement parabolic(double fixed, double t) {
        // The lower shear (1 0; t 1) fixes e2 = p(0); rotate e2 onto p(fixed).
        double fa = std::cos(kPi * fixed), fb = std::sin(kPi * fixed);
        double fc = -std::sin(kPi * fixed), fd = std::cos(kPi * fixed);
        return conjugated(1.0, 0.0, t, 1.0, fa, fb, fc, fd);
    }

    double a() const { return a_; }
    double b() const { return b_; }
    double c() const { return c_; }
    double d() const { return d_; }
    double trace() const { return a_ + d_; }

    std::array<double, 4> entries() const { return {a_, b_, c_, d_}; }

    MobiusElement operator*(const MobiusElement& o) const {
        return MobiusElement(a_ * o.a_ + b_ * o.c_, a_ * o.b_ + b_ * o.d_,
                             c_ * o.a_ + d_ * o.c_, c_ * o.b_ + d_ * o.d_);
    }

    MobiusElement inverse() const { return MobiusElement(d_, -b_, -c_, a_); }

    // Homogeneous action on p(theta) = (sin(pi t), cos(pi t)).
    double apply(double theta) const {
        double u = std::sin(kPi * theta), v = std::cos(kPi * theta);
        double un = a_ * u + b_ * v, vn = c_ * u + d_ * v;
        return wrap(std::atan2(un, vn) / kPi);
    }

    // d(apply)/d(theta) = 1 / |M p|^2 for unit p; always positive.
    double derivative(double theta) const {
        double u = std::sin(kPi * theta), v = std::cos(kPi * theta);
        double un = a_ * u + b_ * v, vn = c_ * u + d_ * v;
        return 1.0 / (un * un + vn * vn);
    }

    bool is_identity(double tol = 1e-12) const {
        return std::fabs(a_ - 1) < tol && std::fabs(d_ - 1) < tol && std::fabs(b_) < tol && std::fabs(c_) < tol;
    }

    MobiusClass classify(double eps_par = kParabolicTol) const {
        if (is_identity()) return MobiusClass::Identity;
        double t = std::fabs(trace());
        if (std::fabs(t - 2.0) < eps_par) return MobiusClass::Parabolic;
        return t < 2.0 ? MobiusClass::Elliptic : MobiusClass::Hyperbolic;
    }

    // Fixed angles.  Hyperbolic: {attracting, repelling}; parabolic: one
    // angle repeated.  Elliptic/identity: empty.
    std::vector<double> fixed_points(double eps_par = kParabolicTol) const {
        MobiusClass k = classify(eps_par);
        std::vector<double> out;
        if (k == MobiusClass::Identity || k == MobiusClass::Elliptic) return out;
        // Eigenvectors of (a b; c d); eigenvalues real with |l1| >= |l2|.
        double tr = trace();
        double disc = tr * tr - 4.0;
        if (k == MobiusClass::Parabolic) {
            double l = tr / 2.0;
            out.push_back(eigen_angle(l));
            out.push_back(out[0]);
            return out;
        }
        double root = std::sqrt(std::max(disc, 0.0));
        double l1 = (tr + (tr >= 0 ? root : -root)) / 2.0;  // |l1| >= 1
        double l2 = 1.0 / l1;                               // det = 1
        // The derivative at the fixed point with eigenvalue l is 1/l^2, so
        // l1 marks the attracting point.
        out.push_back(eigen_angle(l1));
        out.push_back(eigen_angle(l2));
        return out;
    }

    double attracting_fixed_point() const {
        auto fp = fixed_points();
        if (fp.empty()) throw error("attracting_fixed_point: no real fixed point");
        return fp[0];
    }
    double repelling_fixed_point() const {
        auto fp = fixed_points();
        if (fp.size() < 2) throw error("repelling_fixed_point: no real fixed point");
        return fp[1];
    }

  private:
    // F * S * F^{-1} for S = (s00 s01; s10 s11) and frame F = (fa fb; fc fd).
    static MobiusElement conjugated(double s00, double s01, double s10, double s11,
                                    double fa, double fb, double fc, double fd) {
        double det = fa * fd - fb * fc;
        double ia = fd / det, ib = -fb / det, ic = -fc / det, id = fa / det;
        double t00 = fa * s00 + fb * s10, t01 = fa * s01 + fb * s11;
        double t10 = fc * s00 + fd * s10, t11 = fc * s01 + fd * s11;
        return MobiusElement(t00 * ia + t01 * ic, t00 * ib + t01 * id,
                             t10 * ia + t11 * ic, t10 * ib + t11 * id);
    }

    double eigen_angle(double lambda) const {
        // Solve (M - lambda I) p = 0 robustly: pick the larger row.
        double r1u = a_ - lambda, r1v = b_;
        double r2u = c_, r2v = d_ - lambda;
        double u, v;
        if (r1u * r1u + r1v * r1v >= r2u * r2u + r2v * r2v) { u = -r1v; v = r1u; }
        else { u = -r2v; v = r2u; }
        if (u == 0.0 && v == 0.0) { u = 1.0; v = 0.0; }
        return wrap(std::atan2(u, v) / kPi);
    }

    // compensated 2x2 determinant (Kahan)
    static double det2(double a, double b, double c, double d) {
        double w = b * c;
        double e = std::fma(b, c, -w);
        double f = std::fma(a, d, -w);
        return f - e;
    }

    void normalize() {
        double det = det2(a_, b_, c_, d_);
        if (!(det > 0.0)) throw error("MobiusElement: determinant must be positive (orientation preserving)");
        double s = std::sqrt(det);
        a_ /= s; b_ /= s; c_ /= s; d_ /= s;
        const double* e[4] = {&a_, &b_, &c_, &d_};
        for (int i = 0; i < 4; ++i) {
            if (*e[i] != 0.0) {
                if (*e[i] < 0.0) { a_ = -a_; b_ = -b_; c_ = -c_; d_ = -d_; }
                break;
            }
        }
        double check = det2(a_, b_, c_, d_);
        // the representable determinant of a stored matrix is 1 only up to
        // rounding of the scaled entries
        double tol = kDetTol + 32.0 * 2.3e-16 * (std::fabs(a_ * d_) + std::fabs(b_ * c_));
        if (std::fabs(check - 1.0) > tol) throw error("MobiusElement: normalization failed");
    }

    double a_, b_, c_, d_;
};

// The invariant density on the off-diagonal torus.
inline double omega0(double t1, double t2) {
    double s = abs_sinpi(t1 - t2);
    if (s == 0.0) throw error("omega0: on G(Id)");
    return 4.0 * kPi * kPi / (s * s);
}

inline double log_omega0(double t1, double t2) {
    double s = abs_sinpi(t1 - t2);
    if (s == 0.0) throw error("omega0: on G(Id)");
    return std::log(4.0 * kPi * kPi) - 2.0 * std::log(s);
}

// ----------------------------------------------------------------------------
// Two-sheeted cover.  Cover angle phi corresponds to the unit vector
// w(phi) = (sin 2 pi phi, cos 2 pi phi); the projection phi -> 2 phi mod 1
// matches w with the homogeneous vector p(2 phi) of the base circle.  The
// two lifts of a base element are the matrices +M and -M acting on unit
// vectors, and the deck transformation (branch of the identity) is rotation
// by 1/2.

struct DoubleCoverElement {
    MobiusElement base;
    int branch = 0;  // 0: +M, 1: -M (composition with the deck map)

    double apply(double phi) const {
        double u = std::sin(2.0 * kPi * phi), v = std::cos(2.0 * kPi * phi);
        double s = branch ? -1.0 : 1.0;
        double un = s * (base.a() * u + base.b() * v), vn = s * (base.c() * u + base.d() * v);
        return wrap(std::atan2(un, vn) / (2.0 * kPi));
    }

    // dphi'/dphi equals the base derivative at the projected point.
    double derivative(double phi) const { return base.derivative(wrap(2.0 * phi)); }

    double project(double phi) const { return wrap(2.0 * phi); }
};

inline DoubleCoverElement lift_to_double_cover(const MobiusElement& m, int branch) {
    return DoubleCoverElement{m, branch & 1};
}

}  // namespace clab
