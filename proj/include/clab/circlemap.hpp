#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "clab/core.hpp"
#include "clab/mobius.hpp"
#include "clab/timechart.hpp"

// Orientation-preserving circle diffeomorphisms, stored through their lifts.
// A lift implementation provides F restricted to [0,1) with F(0) in [0,1);
// evaluation on all of R uses F(x+1) = F(x)+1.

namespace clab {

enum class FixedPointKind { Attracting, Repelling, Parabolic };

inline const char* to_string(FixedPointKind k) {
    switch (k) {
        case FixedPointKind::Attracting: return "attracting";
        case FixedPointKind::Repelling: return "repelling";
        case FixedPointKind::Parabolic: return "parabolic";
    }
    return "?";
}

struct FixedPointRecord {
    double location = 0.0;
    double multiplier = 1.0;
    FixedPointKind kind = FixedPointKind::Parabolic;
};

inline FixedPointKind kind_from_multiplier(double mult, double eps_par = 1e-6) {
    if (mult < 1.0 - eps_par) return FixedPointKind::Attracting;
    if (mult > 1.0 + eps_par) return FixedPointKind::Repelling;
    return FixedPointKind::Parabolic;
}

class LiftBase {
  public:
    virtual ~LiftBase() = default;
    // F on [0,1); strictly increasing, continuous, F(0) in [0,1), and
    // F(1^-) -> F(0) + 1.
    virtual double lift01(double x) const = 0;
    virtual double deriv01(double x) const = 0;
    // Exact translation amount when the map is a rigid rotation.
    virtual std::optional<double> exact_translation() const { return std::nullopt; }
    // Exact inverse when available in closed form.
    virtual std::shared_ptr<const LiftBase> exact_inverse() const { return nullptr; }
};

inline double lift_real(const LiftBase& l, double x) {
    double n = std::floor(x);
    return l.lift01(x - n) + n;
}

// ---------------------------------------------------------------- rotations

class RotationLift final : public LiftBase {
  public:
    explicit RotationLift(double alpha) : alpha_(wrap(alpha)) {}
    double lift01(double x) const override { return x + alpha_; }
    double deriv01(double) const override { return 1.0; }
    std::optional<double> exact_translation() const override { return alpha_; }
    std::shared_ptr<const LiftBase> exact_inverse() const override {
        return std::make_shared<RotationLift>(wrap(-alpha_));
    }

  private:
    double alpha_;
};

// ------------------------------------------------------------------- Mobius

class MobiusLift final : public LiftBase {
  public:
    explicit MobiusLift(const MobiusElement& m) : m_(m), f0_(m.apply(0.0)) {}
    double lift01(double x) const override {
        double y = m_.apply(x);
        return y < f0_ ? y + 1.0 : y;
    }
    double deriv01(double x) const override { return m_.derivative(x); }
    std::shared_ptr<const LiftBase> exact_inverse() const override {
        return std::make_shared<MobiusLift>(m_.inverse());
    }
    const MobiusElement& element() const { return m_; }

  private:
    MobiusElement m_;
    double f0_;
};

// --------------------------------------------------------------- cover maps

class DoubleCoverLift final : public LiftBase {
  public:
    explicit DoubleCoverLift(const DoubleCoverElement& e) : e_(e), f0_(e.apply(0.0)) {}
    double lift01(double x) const override {
        double y = e_.apply(x);
        return y < f0_ ? y + 1.0 : y;
    }
    double deriv01(double x) const override { return e_.derivative(x); }
    std::shared_ptr<const LiftBase> exact_inverse() const override {
        return std::make_shared<DoubleCoverLift>(DoubleCoverElement{e_.base.inverse(), e_.branch});
    }
    const DoubleCoverElement& element() const { return e_; }

  private:
    DoubleCoverElement e_;
    double f0_;
};

// ---------------------------------------------------------------- piecewise

// Monotone piece given by exact value/derivative functors on [x0, x1] in lift
// coordinates; val must be increasing with matching endpoint values between
// consecutive pieces.
struct LiftPiece {
    double x0 = 0.0, x1 = 1.0;
    std::function<double(double)> val;
    std::function<double(double)> dval;
};

class PiecewiseLift final : public LiftBase {
  public:
    // Pieces must tile [base, base+1) in order and satisfy
    // val_last(base+1) = val_first(base) + 1 (checked to 1e-9; small
    // mismatches are absorbed by per-piece offsets).
    explicit PiecewiseLift(std::vector<LiftPiece> pieces) : pieces_(std::move(pieces)) {
        if (pieces_.empty()) throw error("PiecewiseLift: no pieces");
        base_ = pieces_.front().x0;
        if (std::fabs(pieces_.back().x1 - (base_ + 1.0)) > 1e-12)
            throw error("PiecewiseLift: pieces must span one period");
        offsets_.assign(pieces_.size(), 0.0);
        for (size_t i = 0; i + 1 < pieces_.size(); ++i) {
            if (std::fabs(pieces_[i].x1 - pieces_[i + 1].x0) > 1e-12)
                throw error("PiecewiseLift: pieces do not tile the period");
            double gap = (pieces_[i].val(pieces_[i].x1) + offsets_[i]) - pieces_[i + 1].val(pieces_[i + 1].x0);
            if (std::fabs(gap) > 1e-9) throw error("PiecewiseLift: discontinuous piece values");
            offsets_[i + 1] = gap;
        }
        double wrap_gap = (pieces_.back().val(pieces_.back().x1) + offsets_.back()) -
                          (pieces_.front().val(pieces_.front().x0) + 1.0);
        if (std::fabs(wrap_gap) > 1e-9) throw error("PiecewiseLift: degree-one closure violated");
        n0_ = std::floor(raw_frame(0.0));
    }

    double lift01(double x) const override { return raw_frame(x) - n0_; }

    double deriv01(double x) const override {
        double k = std::floor(x - base_);
        const LiftPiece& p = piece_at(x - k);
        return p.dval(x - k);
    }

  private:
    double raw(double xe) const {
        const LiftPiece& p = piece_at(xe);
        return p.val(xe) + offsets_[&p - pieces_.data()];
    }
    // reduce into [base, base+1) and shift the value back
    double raw_frame(double x) const {
        double k = std::floor(x - base_);
        return raw(x - k) + k;
    }

    const LiftPiece& piece_at(double xe) const {
        size_t lo = 0, hi = pieces_.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (xe < pieces_[mid].x0) hi = mid; else lo = mid;
        }
        return pieces_[lo];
    }

    std::vector<LiftPiece> pieces_;
    std::vector<double> offsets_;
    double base_ = 0.0;
    double n0_ = 0.0;
};

// --------------------------------------------------------------- flow charts

// Map with a prescribed finite fixed-point set, realized as the time-1 map
// of the closed-form per-interval charts of timechart.hpp.
class FlowChartLift final : public LiftBase {
  public:
    FlowChartLift(std::vector<double> points, std::vector<EndSpec> ends, std::vector<int> dirs)
        : pts_(std::move(points)), ends_(std::move(ends)) {
        size_t k = pts_.size();
        if (k == 0) throw error("FlowChartLift: need at least one fixed point");
        for (size_t i = 0; i + 1 < k; ++i)
            if (!(pts_[i] < pts_[i + 1])) throw error("FlowChartLift: points must be sorted");
        charts_.reserve(k);
        for (size_t i = 0; i < k; ++i) {
            double lo = pts_[i];
            double hi = (i + 1 < k) ? pts_[i + 1] : pts_[0] + 1.0;
            charts_.emplace_back(lo, hi - lo, ends_[i], ends_[(i + 1) % k], dirs[i]);
        }
        n0_ = std::floor(raw_frame(0.0));
    }

    double lift01(double x) const override { return raw_frame(x) - n0_; }

    double deriv01(double x) const override {
        double k = std::floor(x - pts_[0]);
        double xe = x - k;  // in [p0, p0+1)
        size_t i = interval_at(xe);
        double u = xe - pts_[i];
        if (u <= 0.0) {
            const EndSpec& e = ends_[i];
            return e.parabolic() ? 1.0 : std::exp(e.m);
        }
        return charts_[i].flow_derivative_offset(u, 1.0);
    }

    std::shared_ptr<const LiftBase> exact_inverse() const override {
        std::vector<EndSpec> ends(ends_);
        std::vector<int> dirs;
        for (auto& e : ends) e.m = -e.m;
        for (const auto& c : charts_) dirs.push_back(-c.dir());
        return std::make_shared<FlowChartLift>(pts_, std::move(ends), std::move(dirs));
    }

    const std::vector<double>& points() const { return pts_; }
    const std::vector<EndSpec>& end_specs() const { return ends_; }
    const IntervalTimeChart& chart(size_t i) const { return charts_[i]; }

  private:
    size_t interval_at(double xe) const {
        size_t lo = 0, hi = pts_.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (xe < pts_[mid]) hi = mid; else lo = mid;
        }
        return lo;
    }

    // value in the frame [p0, p0+1), continuous and increasing there
    double raw_frame(double x) const {
        double k = std::floor(x - pts_[0]);
        double xe = x - k;
        size_t i = interval_at(xe);
        double u = xe - pts_[i];
        if (u <= 0.0) return xe + k;
        return pts_[i] + charts_[i].flow_offset(u, 1.0) + k;
    }

    std::vector<double> pts_;
    std::vector<EndSpec> ends_;
    std::vector<IntervalTimeChart> charts_;
    double n0_ = 0.0;
};

// -------------------------------------------------------------- composition

class CircleMap;
CircleMap compose(const CircleMap& outer, const CircleMap& inner);

class ComposedLift final : public LiftBase {
  public:
    // factors[0] is applied last: F = f0 o f1 o ... o fk.
    explicit ComposedLift(std::vector<std::shared_ptr<const LiftBase>> factors)
        : factors_(std::move(factors)) {
        if (factors_.empty()) throw error("ComposedLift: empty");
        n0_ = std::floor(raw(0.0));
    }

    double lift01(double x) const override { return raw(x) - n0_; }

    double deriv01(double x) const override {
        double y = x, d = 1.0;
        for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) {
            d *= (*it)->deriv01(wrap(y));
            y = lift_real(**it, y);
        }
        return d;
    }

    std::optional<double> exact_translation() const override {
        double total = 0.0;
        for (const auto& f : factors_) {
            auto t = f->exact_translation();
            if (!t) return std::nullopt;
            total += *t;
        }
        return wrap(total);
    }

    std::shared_ptr<const LiftBase> exact_inverse() const override {
        std::vector<std::shared_ptr<const LiftBase>> inv;
        for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) {
            auto e = (*it)->exact_inverse();
            if (!e) return nullptr;
            inv.push_back(e);
        }
        return std::make_shared<ComposedLift>(std::move(inv));
    }

    const std::vector<std::shared_ptr<const LiftBase>>& factors() const { return factors_; }

  private:
    double raw(double x) const {
        double y = x;
        for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) y = lift_real(**it, y);
        return y;
    }

    std::vector<std::shared_ptr<const LiftBase>> factors_;
    double n0_;
};

class NumericInverseLift final : public LiftBase {
  public:
    explicit NumericInverseLift(std::shared_ptr<const LiftBase> fwd) : fwd_(std::move(fwd)) {
        n0_ = std::floor(raw(0.0));
    }

    double lift01(double x) const override { return raw(x) - n0_; }

    double deriv01(double x) const override {
        double u = wrap(lift01(x));
        return 1.0 / fwd_->deriv01(u);
    }

  private:
    double raw(double x) const {
        double f0 = fwd_->lift01(0.0);
        double m = std::ceil(f0 - x);
        double target = x + m;  // in [f0, f0+1)
        auto F = [&](double u) { return lift_real(*fwd_, u); };
        auto dF = [&](double u) { return fwd_->deriv01(wrap(u)); };
        double u = invert_monotone(F, dF, target, 0.0, 1.0, 1e-15);
        return u - m;
    }

    std::shared_ptr<const LiftBase> fwd_;
    double n0_ = 0.0;
};

// ------------------------------------------------------------------- spline

// Monotone cubic Hermite interpolant of a lift (Fritsch-Carlson limited).
class SplineLift final : public LiftBase {
  public:
    SplineLift(std::vector<double> xs, std::vector<double> ys, std::vector<double> ds)
        : xs_(std::move(xs)), ys_(std::move(ys)), ds_(std::move(ds)) {
        if (xs_.size() < 2 || xs_.size() != ys_.size() || ys_.size() != ds_.size())
            throw error("SplineLift: bad knot data");
        if (std::fabs(xs_.front()) > 1e-15 || std::fabs(xs_.back() - 1.0) > 1e-15)
            throw error("SplineLift: knots must span [0,1]");
        limit_slopes();
    }

    double lift01(double x) const override {
        size_t i = knot_at(x);
        double h = xs_[i + 1] - xs_[i];
        double t = (x - xs_[i]) / h;
        double t2 = t * t, t3 = t2 * t;
        double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * ys_[i] + h10 * h * ds_[i] + h01 * ys_[i + 1] + h11 * h * ds_[i + 1];
    }

    double deriv01(double x) const override {
        size_t i = knot_at(x);
        double h = xs_[i + 1] - xs_[i];
        double t = (x - xs_[i]) / h;
        double h00 = 6 * t * t - 6 * t, h10 = 3 * t * t - 4 * t + 1;
        double h01 = -6 * t * t + 6 * t, h11 = 3 * t * t - 2 * t;
        return h00 * ys_[i] / h + h10 * ds_[i] + h01 * ys_[i + 1] / h + h11 * ds_[i + 1];
    }

    size_t knot_count() const { return xs_.size(); }

  private:
    size_t knot_at(double x) const {
        size_t lo = 0, hi = xs_.size() - 1;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (x < xs_[mid]) hi = mid; else lo = mid;
        }
        return lo;
    }

    void limit_slopes() {
        size_t n = xs_.size();
        for (size_t i = 0; i + 1 < n; ++i) {
            double sec = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
            if (!(sec > 0.0)) throw error("SplineLift: non-increasing data");
            ds_[i] = std::min(ds_[i], 3.0 * sec);
            ds_[i + 1] = std::min(ds_[i + 1], 3.0 * sec);
            ds_[i] = std::max(ds_[i], 1e-12);
        }
    }

    std::vector<double> xs_, ys_, ds_;
};

// ------------------------------------------------------------ function lift

// Wraps an arbitrary increasing degree-one real function as a lift; the
// derivative falls back to central differences when no closed form is given.
class FunctionLift final : public LiftBase {
  public:
    explicit FunctionLift(std::function<double(double)> F, std::function<double(double)> dF = nullptr)
        : F_(std::move(F)), dF_(std::move(dF)) {
        n0_ = std::floor(F_(0.0));
    }

    double lift01(double x) const override { return F_(x) - n0_; }

    double deriv01(double x) const override {
        if (dF_) return dF_(x);
        const double h = 1e-6;
        return (F_(x + h) - F_(x - h)) / (2.0 * h);
    }

  private:
    std::function<double(double)> F_, dF_;
    double n0_ = 0.0;
};

// ---------------------------------------------------------------- CircleMap

class CircleMap {
  public:
    CircleMap() : lift_(std::make_shared<RotationLift>(0.0)) {}
    explicit CircleMap(std::shared_ptr<const LiftBase> l) : lift_(std::move(l)) {}
    explicit CircleMap(const MobiusElement& m) : lift_(std::make_shared<MobiusLift>(m)) {}
    explicit CircleMap(const DoubleCoverElement& e) : lift_(std::make_shared<DoubleCoverLift>(e)) {}

    static CircleMap identity() { return CircleMap(); }
    static CircleMap rotation(double alpha) { return CircleMap(std::make_shared<RotationLift>(alpha)); }

    double apply(double theta) const { return wrap(lift_->lift01(wrap(theta))); }
    double lift(double x) const { return lift_real(*lift_, x); }
    double deriv(double theta) const { return lift_->deriv01(wrap(theta)); }

    double apply_iter(double theta, long n) const {
        double x = wrap(theta);
        if (n >= 0) {
            for (long i = 0; i < n; ++i) x = apply(x);
        } else {
            CircleMap inv = inverse();
            for (long i = 0; i < -n; ++i) x = inv.apply(x);
        }
        return x;
    }

    double apply_inverse(double y) const {
        auto e = lift_->exact_inverse();
        if (e) return wrap(e->lift01(wrap(y)));
        NumericInverseLift inv(lift_);
        return wrap(inv.lift01(wrap(y)));
    }

    CircleMap inverse() const {
        auto e = lift_->exact_inverse();
        if (e) return CircleMap(e);
        return CircleMap(std::make_shared<NumericInverseLift>(lift_));
    }

    std::optional<double> exact_translation() const { return lift_->exact_translation(); }

    std::shared_ptr<const LiftBase> lift_impl() const { return lift_; }

    // Builder metadata: exact fixed-point data when known by construction.
    const std::vector<FixedPointRecord>& metadata() const { return meta_; }
    CircleMap with_metadata(std::vector<FixedPointRecord> m) const {
        CircleMap out = *this;
        out.meta_ = std::move(m);
        return out;
    }

    // Composition depth, counting ComposedLift chain length.
    size_t chain_depth() const {
        if (auto c = std::dynamic_pointer_cast<const ComposedLift>(lift_)) return c->factors().size();
        return 1;
    }

  private:
    std::shared_ptr<const LiftBase> lift_;
    std::vector<FixedPointRecord> meta_;
};

inline CircleMap compose(const CircleMap& outer, const CircleMap& inner) {
    std::vector<std::shared_ptr<const LiftBase>> v;
    auto push = [&v](const std::shared_ptr<const LiftBase>& l) {
        if (auto c = std::dynamic_pointer_cast<const ComposedLift>(l)) {
            for (const auto& f : c->factors()) v.push_back(f);
        } else {
            v.push_back(l);
        }
    };
    push(outer.lift_impl());
    push(inner.lift_impl());
    return CircleMap(std::make_shared<ComposedLift>(std::move(v)));
}

// c o f o c^{-1}, transporting fixed-point metadata through c.
inline CircleMap conjugate(const CircleMap& f, const CircleMap& c) {
    CircleMap out = compose(compose(c, f), c.inverse());
    if (!f.metadata().empty()) {
        std::vector<FixedPointRecord> meta;
        for (const auto& r : f.metadata())
            meta.push_back({c.apply(r.location), r.multiplier, r.kind});
        out = out.with_metadata(std::move(meta));
    }
    return out;
}

// Refit a map as a monotone cubic spline with interpolation error <= tol.
inline CircleMap refit(const CircleMap& f, double tol = 1e-10, size_t max_knots = 40000) {
    std::vector<double> xs;
    size_t n0 = 129;
    for (size_t i = 0; i <= n0; ++i) xs.push_back(static_cast<double>(i) / n0);
    auto F = [&](double x) { return f.lift(x); };
    auto D = [&](double x) { return f.deriv(wrap(x)); };
    for (int round = 0; round < 24; ++round) {
        std::vector<double> ys(xs.size()), ds(xs.size());
        for (size_t i = 0; i < xs.size(); ++i) { ys[i] = F(xs[i]); ds[i] = D(xs[i]); }
        SplineLift s(xs, ys, ds);
        std::vector<double> next;
        next.reserve(xs.size() * 2);
        bool refined = false;
        for (size_t i = 0; i + 1 < xs.size(); ++i) {
            next.push_back(xs[i]);
            double mid = 0.5 * (xs[i] + xs[i + 1]);
            if (std::fabs(s.lift01(mid) - F(mid)) > tol && xs.size() < max_knots) {
                next.push_back(mid);
                refined = true;
            }
        }
        next.push_back(1.0);
        if (!refined) return CircleMap(std::make_shared<SplineLift>(xs, ys, ds)).with_metadata(f.metadata());
        xs = std::move(next);
    }
    std::vector<double> ys(xs.size()), ds(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) { ys[i] = F(xs[i]); ds[i] = D(xs[i]); }
    return CircleMap(std::make_shared<SplineLift>(xs, ys, ds)).with_metadata(f.metadata());
}

}  // namespace clab
