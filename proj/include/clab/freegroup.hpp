#pragma once

#include <map>
#include <string>

#include "clab/classify.hpp"
#include "clab/flow.hpp"
#include "clab/forms.hpp"

// Words in F_3 = <a, b, d> with d = abc the loop around a puncture of the
// twice-punctured torus, ping-pong certificates, Schottky limit sets, the
// projective representation rho1, its perturbation rho2 (a parabolic fixed
// point inserted in the gap of d), the semi-conjugacy h that collapses the
// d-orbit gaps to those fixed points, and the assembled invariant volume
// field on M_h.

namespace clab {

// ------------------------------------------------------------------- words

// letters: 'a','b','c','d' and their inverses 'A','B','C','D'
inline char letter_inverse(char c) { return std::isupper(c) ? std::tolower(c) : std::toupper(c); }

inline std::string reduce_word(std::string w) {
    std::string out;
    for (char c : w) {
        if (!out.empty() && out.back() == letter_inverse(c)) out.pop_back();
        else out.push_back(c);
    }
    return out;
}

inline std::string invert_word(const std::string& w) {
    std::string out;
    for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back(letter_inverse(*it));
    return out;
}

// all reduced words up to the given length over the generator set
inline std::vector<std::string> reduced_words(const std::string& letters, int max_len) {
    std::vector<std::string> out, frontier{""};
    for (int l = 0; l < max_len; ++l) {
        std::vector<std::string> next;
        for (const auto& w : frontier) {
            for (char c : letters) {
                if (!w.empty() && w.back() == letter_inverse(c)) continue;
                next.push_back(w + c);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

// -------------------------------------------------------------------- reps

class GroupRep {
  public:
    GroupRep() = default;

    void set_generator(char letter, CircleMap m) {
        gens_[letter] = m;
        gens_[letter_inverse(letter)] = m.inverse();
        cache_.clear();
    }
    void set_generator(char letter, const MobiusElement& m) {
        mob_[letter] = m;
        mob_[letter_inverse(letter)] = m.inverse();
        set_generator(letter, CircleMap(m));
    }
    bool has(char letter) const { return gens_.count(letter) > 0; }
    const CircleMap& generator(char letter) const {
        auto it = gens_.find(letter);
        if (it == gens_.end()) throw error(std::string("GroupRep: unknown letter ") + letter);
        return it->second;
    }
    bool all_mobius(const std::string& w) const {
        for (char c : w)
            if (!mob_.count(c)) return false;
        return true;
    }
    MobiusElement mobius(const std::string& w) const {
        MobiusElement m;
        for (char c : w) {
            auto it = mob_.find(c);
            if (it == mob_.end()) throw error("GroupRep: word is not projective");
            m = m * it->second;
        }
        return m;
    }

    // left-to-right composition: eval("ab") = gen(a) o gen(b)
    CircleMap eval(const std::string& word, size_t refit_depth = 12) const {
        std::string w = reduce_word(word);
        if (w.empty()) return CircleMap::identity();
        auto it = cache_.find(w);
        if (it != cache_.end()) return it->second;
        CircleMap m;
        if (all_mobius(w)) {
            m = CircleMap(mobius(w));
        } else {
            m = generator(w.back());
            for (auto rit = w.rbegin() + 1; rit != w.rend(); ++rit) m = compose(generator(*rit), m);
            if (m.chain_depth() > refit_depth) m = refit(m, 1e-10);
        }
        cache_[w] = m;
        return m;
    }

    double apply_word(const std::string& word, double x) const {
        double y = wrap(x);
        const std::string w = reduce_word(word);
        for (auto rit = w.rbegin(); rit != w.rend(); ++rit) y = generator(*rit).apply(y);
        return y;
    }

    // homomorphism residual on probe points
    double homomorphism_residual(const std::string& w1, const std::string& w2, int probes = 16) const {
        CircleMap lhs = eval(w1 + w2);
        CircleMap l = eval(w1), r = eval(w2);
        double worst = 0.0;
        for (int i = 0; i < probes; ++i) {
            double x = (i + 0.31) / probes;
            worst = std::max(worst, circ_dist(lhs.apply(x), l.apply(r.apply(x))));
        }
        return worst;
    }

  private:
    std::map<char, CircleMap> gens_;
    std::map<char, MobiusElement> mob_;
    mutable std::map<std::string, CircleMap> cache_;
};

// --------------------------------------------------------------- ping-pong

struct PingPongCertificate {
    bool ok = false;
    std::map<char, CyclicInterval> arcs;  // attracting arc per letter
    int words_checked = 0;
    std::string failure;
};

// generator g must map the complement of the arc of g^{-1} into the arc of
// g; all reduced words up to max_len must be hyperbolic when projective
inline PingPongCertificate pingpong_verify(const GroupRep& rep, const std::string& letters,
                                           std::map<char, CyclicInterval> arcs, int max_len = 6,
                                           int samples = 256) {
    PingPongCertificate cert;
    cert.arcs = arcs;
    std::string all;
    for (char c : letters) {
        all += c;
        all += letter_inverse(c);
    }
    for (char c : all) {
        if (!arcs.count(c)) {
            cert.failure = std::string("missing arc for letter ") + c;
            return cert;
        }
    }
    // pairwise disjoint
    for (size_t i = 0; i < all.size(); ++i) {
        for (size_t j = i + 1; j < all.size(); ++j) {
            const auto& A = arcs[all[i]];
            const auto& B = arcs[all[j]];
            if (A.contains(B.lo) || A.contains(B.hi) || B.contains(A.lo) || B.contains(A.midpoint())) {
                cert.failure = std::string("arcs overlap: ") + all[i] + "," + all[j];
                return cert;
            }
        }
    }
    for (char c : all) {
        const CircleMap& g = rep.generator(c);
        const CyclicInterval& target = arcs[c];
        const CyclicInterval& source = arcs[letter_inverse(c)];
        // sample the complement of `source` densely, endpoints included
        for (int k = 0; k <= samples; ++k) {
            double t = wrap(source.hi + (1.0 - source.length()) * k / samples);
            double img = g.apply(t);
            if (!target.contains(img) && circ_dist(img, target.lo) > 1e-12 &&
                circ_dist(img, target.hi) > 1e-12) {
                cert.failure = std::string("inclusion fails for letter ") + c;
                return cert;
            }
        }
    }
    // trace check for projective words
    for (const auto& w : reduced_words(letters, max_len)) {
        if (rep.all_mobius(w)) {
            MobiusElement m = rep.mobius(w);
            if (std::fabs(m.trace()) <= 2.0) {
                cert.failure = "non-hyperbolic word " + w;
                return cert;
            }
        }
        ++cert.words_checked;
    }
    cert.ok = true;
    return cert;
}

// ------------------------------------------------- twice-punctured torus rep

struct TorusRepParams {
    double lambda = 0.008;    // generator multiplier at the attracting point
    double offset = 1.0 / 24; // rotation of the six-point configuration
    double arc_radius = 0.06;
    int word_budget = 6;
    int search_budget = 24;
    double min_gap = 0.02;
};

struct TorusRep {
    GroupRep rho1;                   // generators a, b, d = abc (projective)
    MobiusElement A, B, C, D1, D2;   // matrices; D1 = ABC, D2 = CBA
    PingPongCertificate cert;        // on letters a, b, c
    std::map<char, CyclicInterval> arcs;
    double N = 0.0, S = 0.0;         // gap of d: I1 = (N, S)
    double N2 = 0.0, S2 = 0.0;       // gap of delta2: I2 = (N2, S2)
};

namespace detail {

// gap of a hyperbolic word: the component of the complement of the limit
// set bounded by its fixed points, identified by testing a depth-3 cloud
inline bool gap_is_clean(double lo, double hi, const std::vector<double>& cloud) {
    CyclicInterval I{lo, hi, false, false};
    for (double p : cloud)
        if (I.contains(p) && circ_dist(p, lo) > 1e-9 && circ_dist(p, hi) > 1e-9) return false;
    return true;
}

}  // namespace detail

inline std::vector<double> limit_cloud_mobius(const GroupRep& rep, const std::string& letters, int depth) {
    std::vector<double> cloud;
    for (const auto& w : reduced_words(letters, depth)) {
        MobiusElement m = rep.mobius(w);
        if (m.classify() == MobiusClass::Hyperbolic) cloud.push_back(m.attracting_fixed_point());
    }
    std::sort(cloud.begin(), cloud.end());
    cloud.erase(std::unique(cloud.begin(), cloud.end(),
                            [](double u, double v) { return std::fabs(u - v) < 1e-11; }),
                cloud.end());
    return cloud;
}

inline TorusRep twice_punctured_torus_rep(const TorusRepParams& P = {}) {
    Rng rng(9001);
    for (int attempt = 0; attempt <= P.search_budget; ++attempt) {
        double off = P.offset + (attempt == 0 ? 0.0 : rng.uniform(-0.02, 0.02));
        double lam = P.lambda * (attempt == 0 ? 1.0 : rng.uniform(0.5, 1.5));
        double r = P.arc_radius * (attempt == 0 ? 1.0 : rng.uniform(0.7, 1.3));
        auto pt = [off](int k) { return wrap(off + k / 6.0); };
        // the linked pairing realizing the genus-one surface with two
        // boundary loops: both abc and cba then stabilize complementary gaps
        MobiusElement A = MobiusElement::hyperbolic(pt(0), pt(3), lam);
        MobiusElement B = MobiusElement::hyperbolic(pt(4), pt(1), lam);
        MobiusElement C = MobiusElement::hyperbolic(pt(2), pt(5), lam);

        GroupRep rep;
        rep.set_generator('a', A);
        rep.set_generator('b', B);
        rep.set_generator('c', C);
        std::map<char, CyclicInterval> arcs;
        auto arc = [r](double center) {
            return CyclicInterval{wrap(center - r), wrap(center + r), true, true};
        };
        arcs['a'] = arc(pt(3));
        arcs['A'] = arc(pt(0));
        arcs['b'] = arc(pt(1));
        arcs['B'] = arc(pt(4));
        arcs['c'] = arc(pt(5));
        arcs['C'] = arc(pt(2));
        auto cert = pingpong_verify(rep, "abc", arcs, P.word_budget);
        if (!cert.ok) continue;

        MobiusElement D1 = A * B * C, D2 = C * B * A;
        if (D1.classify() != MobiusClass::Hyperbolic || D2.classify() != MobiusClass::Hyperbolic) continue;

        auto cloud = limit_cloud_mobius(rep, "abc", 4);
        auto fp1 = D1.fixed_points();
        auto fp2 = D2.fixed_points();
        // the gap is the side of the fixed-point pair free of the limit set
        auto pick_gap = [&](const std::vector<double>& fp, double& lo, double& hi) {
            if (detail::gap_is_clean(fp[0], fp[1], cloud) && wrap(fp[1] - fp[0]) > P.min_gap) {
                lo = fp[0];
                hi = fp[1];
                return true;
            }
            if (detail::gap_is_clean(fp[1], fp[0], cloud) && wrap(fp[0] - fp[1]) > P.min_gap) {
                lo = fp[1];
                hi = fp[0];
                return true;
            }
            return false;
        };
        TorusRep out;
        if (!pick_gap(fp1, out.N, out.S)) continue;
        if (!pick_gap(fp2, out.N2, out.S2)) continue;

        out.A = A;
        out.B = B;
        out.C = C;
        out.D1 = D1;
        out.D2 = D2;
        out.cert = cert;
        out.arcs = arcs;
        out.rho1.set_generator('a', A);
        out.rho1.set_generator('b', B);
        out.rho1.set_generator('d', D1);
        // gap invariance of the endpoints
        if (circ_dist(D1.apply(out.N), out.N) > 1e-9 || circ_dist(D1.apply(out.S), out.S) > 1e-9) continue;
        return out;
    }
    throw error("twice_punctured_torus_rep: parameters not Schottky (search budget exhausted)");
}

// ------------------------------------------------------------------- rho2

struct Rho2Result {
    GroupRep rho2;
    CircleMap f;        // rho2(d)
    double P_a = 0.0;
    double mult_N = 1.0, mult_S = 1.0;
    IntervalTimeChart chart_NP;  // inside charts (N, P_a), (P_a, S)
    IntervalTimeChart chart_PS;
};

// rho2(a) = rho1(a), rho2(b) = rho1(b); rho2(d) = f equals rho1(d) off the
// gap (N,S) and has one parabolic fixed point P_a inside it.
inline Rho2Result build_rho2(const TorusRep& T, double P_a_rel = 0.5, double q_par = 0.0) {
    double N = T.N, S = T.S;
    double gap = wrap(S - N);
    if (!(P_a_rel > 0.0 && P_a_rel < 1.0)) throw error("build_rho2: P_a outside gap");
    double P_a = wrap(N + P_a_rel * gap);
    double mN = std::log(T.D1.derivative(N)), mS = std::log(T.D1.derivative(S));
    if (mN * mS >= 0.0) throw error("build_rho2: gap endpoints must be a repelling/attracting pair");
    if (q_par <= 0.0) q_par = 16.0 / gap;
    int dir = (mN > 0) ? 1 : -1;

    double lenNP = P_a_rel * gap, lenPS = gap - lenNP;
    IntervalTimeChart cNP(N, lenNP, EndSpec{mN, 1.0}, EndSpec{0.0, q_par}, dir);
    IntervalTimeChart cPS(wrap(N + lenNP), lenPS, EndSpec{0.0, q_par}, EndSpec{mS, 1.0}, dir);

    std::vector<LiftPiece> pieces;
    {
        LiftPiece p1;
        p1.x0 = N;
        p1.x1 = N + lenNP;
        p1.val = [cNP, N](double x) { return N + cNP.flow_offset(x - N, 1.0); };
        p1.dval = [cNP, N](double x) { return cNP.flow_derivative_offset(x - N, 1.0); };
        pieces.push_back(p1);
        double Pl = N + lenNP;
        LiftPiece p2;
        p2.x0 = Pl;
        p2.x1 = N + gap;
        p2.val = [cPS, Pl](double x) { return Pl + cPS.flow_offset(x - Pl, 1.0); };
        p2.dval = [cPS, Pl](double x) { return cPS.flow_derivative_offset(x - Pl, 1.0); };
        pieces.push_back(p2);
        // outside: the exact projective map, branch-anchored at S
        MobiusLift ml(T.D1);
        double Sl = N + gap;
        double base = lift_real(ml, Sl);
        LiftPiece p3;
        p3.x0 = Sl;
        p3.x1 = N + 1.0;
        p3.val = [ml, Sl, base](double x) { return Sl + (lift_real(ml, x) - base); };
        p3.dval = [ml](double x) { return ml.deriv01(wrap(x)); };
        pieces.push_back(p3);
    }
    CircleMap f = CircleMap(std::make_shared<PiecewiseLift>(std::move(pieces)))
                      .with_metadata({{N, std::exp(mN), kind_from_multiplier(std::exp(mN))},
                                      {P_a, 1.0, FixedPointKind::Parabolic},
                                      {S, std::exp(mS), kind_from_multiplier(std::exp(mS))}});

    Rho2Result out{GroupRep{}, f, P_a, std::exp(mN), std::exp(mS), cNP, cPS};
    out.rho2.set_generator('a', CircleMap(T.A));
    out.rho2.set_generator('b', CircleMap(T.B));
    out.rho2.set_generator('d', f);
    return out;
}

// --------------------------------------------------------------- limit sets

struct LimitSetResult {
    std::vector<double> cloud;  // sorted
    std::vector<CyclicInterval> gaps;
    double resolution = 0.0;  // largest nearest-neighbor spacing inside arcs
};

inline LimitSetResult limit_set(const GroupRep& rep, const std::string& letters, int depth,
                                double gap_threshold = 1e-4) {
    std::vector<double> cloud;
    for (const auto& w : reduced_words(letters, depth)) {
        if (rep.all_mobius(w)) {
            MobiusElement m = rep.mobius(w);
            if (m.classify() == MobiusClass::Hyperbolic) cloud.push_back(m.attracting_fixed_point());
        } else {
            // iterate the word map to its attracting fixed point
            CircleMap m = rep.eval(w);
            double x = 0.123, prev = -1.0;
            for (int it = 0; it < 300 && circ_dist(x, prev) > 1e-13; ++it) {
                prev = x;
                x = m.apply(x);
            }
            if (circ_dist(m.apply(x), x) < 1e-9) cloud.push_back(wrap(x));
        }
    }
    std::sort(cloud.begin(), cloud.end());
    cloud.erase(std::unique(cloud.begin(), cloud.end(),
                            [](double u, double v) { return std::fabs(u - v) < 1e-10; }),
                cloud.end());
    LimitSetResult out;
    out.cloud = cloud;
    for (size_t i = 0; i < cloud.size(); ++i) {
        double lo = cloud[i];
        double hi = (i + 1 < cloud.size()) ? cloud[i + 1] : cloud[0] + 1.0;
        double len = hi - lo;
        if (len > gap_threshold) out.gaps.push_back({wrap(lo), wrap(hi), false, false});
        else out.resolution = std::max(out.resolution, len);
    }
    return out;
}

inline double hausdorff_distance(const std::vector<double>& A, const std::vector<double>& B) {
    auto one_sided = [](const std::vector<double>& U, const std::vector<double>& V) {
        double worst = 0.0;
        for (double u : U) worst = std::max(worst, dist_to_cloud(u, V));
        return worst;
    };
    return std::max(one_sided(A, B), one_sided(B, A));
}

}  // namespace clab
