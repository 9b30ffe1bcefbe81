#include "qrm/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qrm/errors.hpp"

namespace qrm {

namespace {

int sgn(double v) { return (v > 0.0) - (v < 0.0); }

// into (-pi, pi]
double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

// peak wavefunction amplitude, the reference scale for tail suppression
double amplitude_scale(const RealSpaceState& st) {
    return std::max(st.psi_up.cwiseAbs().maxCoeff(), st.psi_dn.cwiseAbs().maxCoeff());
}

struct RawZero {
    double x = 0.0;
    int companion = 0;
    int comp = 0;  // 0: component tied to companion > 0, 1: the other one
};

// sign-change scan of s over the support, bisection-refined on eval_f; grid
// points where s is exactly zero become zeros only if the enclosing nonzero
// signs differ (this is how the exact x = 0 zero of s_z is classified)
template <class F>
std::vector<double> locate_sign_changes(const Eigen::VectorXd& s, const Grid& grid,
                                        const Support& sup, double refine_tol, F&& eval_f) {
    std::vector<double> roots;
    int prev_idx = -1;
    int prev_sign = 0;
    for (int i = sup.i_lo; i <= sup.i_hi; ++i) {
        const int si = sgn(s(i));
        if (si == 0) continue;
        if (prev_sign != 0 && si != prev_sign) {
            if (i == prev_idx + 1) {
                double a = grid.point(prev_idx), b = grid.point(i);
                double fa = eval_f(a), fb = eval_f(b);
                if (fa == 0.0) {
                    roots.push_back(a);
                } else if (fb == 0.0) {
                    roots.push_back(b);
                } else if ((fa < 0.0) == (fb < 0.0)) {
                    // series and grid disagree in the last bits; the zero is
                    // somewhere in this cell, linear interpolation is enough
                    roots.push_back(a + (b - a) * std::abs(s(prev_idx)) /
                                            (std::abs(s(prev_idx)) + std::abs(s(i))));
                } else {
                    while (b - a > refine_tol) {
                        const double m = 0.5 * (a + b);
                        const double fm = eval_f(m);
                        if (fm == 0.0) {
                            a = b = m;
                            break;
                        }
                        if ((fa < 0.0) != (fm < 0.0)) {
                            b = m;
                        } else {
                            a = m;
                            fa = fm;
                        }
                    }
                    roots.push_back(0.5 * (a + b));
                }
            } else {
                // a run of exact zeros separates the signs; the zero sits on
                // the grid (x = 0 by antisymmetry)
                roots.push_back(grid.point((prev_idx + i) / 2));
            }
        }
        prev_idx = i;
        prev_sign = si;
    }
    return roots;
}

// drop zeros whose enclosing lobes of the vanishing component never rise
// above the tail threshold. Removal works on maximal runs of dead lobes so
// that the surviving sign pattern stays consistent and mirror-symmetric:
// an interior dead run flanked by live lobes of equal sign sheds all its
// zeros, one of opposite sign keeps only the middle zero, and a run touching
// a support edge sheds everything (no countable crossings in the tail noise)
void lobe_filter(std::vector<RawZero>& zeros, int comp_id, const Eigen::VectorXd& component,
                 const Grid& grid, const Support& sup, double threshold) {
    std::vector<double> xs;
    for (const auto& z : zeros)
        if (z.comp == comp_id) xs.push_back(z.x);
    if (xs.empty()) return;
    std::sort(xs.begin(), xs.end());
    const size_t m = xs.size();

    // lobe peaks between consecutive roots (support edges included)
    std::vector<double> peak(m + 1, 0.0);
    size_t lobe = 0;
    for (int i = sup.i_lo; i <= sup.i_hi; ++i) {
        const double x = grid.point(i);
        while (lobe < m && x > xs[lobe]) ++lobe;
        peak[lobe] = std::max(peak[lobe], std::abs(component(i)));
    }

    std::vector<bool> dead(m, false);
    size_t k = 0;
    while (k <= m) {
        if (peak[k] >= threshold) {
            ++k;
            continue;
        }
        size_t j = k;  // maximal run of dead lobes [k, j]
        while (j + 1 <= m && peak[j + 1] < threshold) ++j;
        // zeros bordering any lobe of the run
        const size_t t_lo = k > 0 ? k - 1 : 0;
        const size_t t_hi = std::min(j, m - 1);
        for (size_t t = t_lo; t <= t_hi; ++t) dead[t] = true;
        if (k > 0 && j < m && (j - k) % 2 == 1) {
            // odd zero count between live lobes of opposite sign: one real
            // crossing survives, placed at the middle of the noise span
            dead[(t_lo + t_hi) / 2] = false;
        }
        k = j + 1;
    }

    std::vector<RawZero> kept;
    kept.reserve(zeros.size());
    for (const auto& z : zeros) {
        if (z.comp != comp_id) {
            kept.push_back(z);
            continue;
        }
        const size_t j2 = size_t(std::lower_bound(xs.begin(), xs.end(), z.x) - xs.begin());
        if (j2 < m && xs[j2] == z.x && dead[j2]) continue;
        kept.push_back(z);
    }
    zeros.swap(kept);
}

std::vector<AxisZero> find_axis_zeros(const RealSpaceState& st, const SpinTexture& tx,
                                      const Support& sup, const TopoOptions& opt,
                                      ZeroAxis axis) {
    const bool on_sx = (axis == ZeroAxis::sigma_x);

    // s_x = 2 psi_up psi_dn and s_z = 2 tilde_p tilde_m, so the axis zeros are
    // exactly the nodes of the factor components. Detecting each component
    // separately is essential: nodes of the two factors can sit closer than a
    // grid cell (the product then never changes sign on the grid), while one
    // component's own nodes are spaced at least pi/sqrt(2 n_cut) apart, far
    // wider than the default spacing. The companion sign follows from which
    // factor vanishes: at a psi_dn node s_z = psi_up^2 > 0, at a tilde_m node
    // s_x = tilde_p^2 > 0, and symmetrically for the other factor.
    const Eigen::VectorXd& comp_a = on_sx ? st.psi_dn : st.tilde_m;  // companion +1
    const Eigen::VectorXd& comp_b = on_sx ? st.psi_up : st.tilde_p;  // companion -1
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    auto eval_a = [&](double x) {
        double up, dn;
        st.eval(x, up, dn);
        return on_sx ? dn : (up - dn) * inv_sqrt2;
    };
    auto eval_b = [&](double x) {
        double up, dn;
        st.eval(x, up, dn);
        return on_sx ? up : (up + dn) * inv_sqrt2;
    };

    std::vector<RawZero> raw;
    for (double x : locate_sign_changes(comp_a, tx.grid, sup, opt.refine_tol, eval_a))
        raw.push_back(RawZero{x, +1, 0});
    for (double x : locate_sign_changes(comp_b, tx.grid, sup, opt.refine_tol, eval_b))
        raw.push_back(RawZero{x, -1, 1});

    const double threshold = opt.eps_tail * amplitude_scale(st);
    lobe_filter(raw, 0, comp_a, tx.grid, sup, threshold);
    lobe_filter(raw, 1, comp_b, tx.grid, sup, threshold);

    std::sort(raw.begin(), raw.end(), [](const RawZero& a, const RawZero& b) { return a.x < b.x; });

    std::vector<AxisZero> out;
    out.reserve(raw.size());
    for (const auto& z : raw) {
        AxisZero az;
        az.x = z.x;
        az.axis = axis;
        az.companion_sign = z.companion;
        if (on_sx)
            az.source = z.companion > 0 ? ZeroSource::psi_dn : ZeroSource::psi_up;
        else
            az.source = ZeroSource::equal_amplitude;
        out.push_back(az);
    }
    return out;
}

} // namespace

Support retained_support(const SpinTexture& tx, const TopoOptions& opt) {
    Support sup;
    sup.rho_max = tx.rho.maxCoeff();
    if (!(sup.rho_max > 0.0)) throw numerical_error("texture density vanishes everywhere");
    const double thr = opt.eps_tail * opt.eps_tail * sup.rho_max;
    int lo = 0, hi = tx.grid.n_points - 1;
    while (lo < hi && tx.rho(lo) < thr) ++lo;
    while (hi > lo && tx.rho(hi) < thr) --hi;
    sup.i_lo = lo;
    sup.i_hi = hi;
    for (int j = hi; j >= lo; --j) {
        if (tx.s_x(j) != 0.0) {
            sup.tail_sign_sx = sgn(tx.s_x(j));
            break;
        }
    }
    return sup;
}

std::vector<AxisZero> find_sigma_x_zeros(const RealSpaceState& st, const SpinTexture& tx,
                                         const Support& sup, const TopoOptions& opt) {
    auto zeros = find_axis_zeros(st, tx, sup, opt, ZeroAxis::sigma_x);
    // parity pairs the zeros as (-x, +x) with opposite s_z signs
    if (zeros.size() % 2 != 0)
        throw consistency_error("odd number of sigma_x zeros, parity pairing broken");
    for (size_t i = 0, j = zeros.size(); i < j / 2; ++i) {
        const AxisZero& a = zeros[i];
        const AxisZero& b = zeros[zeros.size() - 1 - i];
        if (std::abs(a.x + b.x) > 1e-8 || a.companion_sign != -b.companion_sign)
            throw consistency_error("sigma_x zeros not mirror-paired at x = " +
                                    std::to_string(a.x));
    }
    return zeros;
}

std::vector<AxisZero> find_sigma_z_zeros(const RealSpaceState& st, const SpinTexture& tx,
                                         const Support& sup, const TopoOptions& opt) {
    double max_sz = 0.0;
    for (int i = sup.i_lo; i <= sup.i_hi; ++i) max_sz = std::max(max_sz, std::abs(tx.s_z(i)));
    if (max_sz <= 1e-13 * sup.rho_max)
        throw degenerate_texture_error(
            "s_z vanishes identically (decoupled spin), equal-amplitude zeros undefined");
    return find_axis_zeros(st, tx, sup, opt, ZeroAxis::sigma_z);
}

namespace {

double angle_step(const RealSpaceState& st, double xa, double xb, double tha, double thb,
                  int depth) {
    const double d = wrap_angle(thb - tha);
    if (std::abs(d) <= 0.5 * std::numbers::pi || depth >= 48) return d;
    const double xm = 0.5 * (xa + xb);
    double sz, sx;
    texture_at(st, xm, sz, sx);
    const double thm = std::atan2(sx, sz);
    return angle_step(st, xa, xm, tha, thm, depth + 1) +
           angle_step(st, xm, xb, thm, thb, depth + 1);
}

} // namespace

WindingResult winding_integral(const RealSpaceState& st, const SpinTexture& tx,
                               const Support& sup, const TopoOptions& opt) {
    (void)opt;
    double max_sz = 0.0, max_sx = 0.0;
    for (int i = sup.i_lo; i <= sup.i_hi; ++i) {
        max_sz = std::max(max_sz, std::abs(tx.s_z(i)));
        max_sx = std::max(max_sx, std::abs(tx.s_x(i)));
    }
    if (max_sz <= 1e-13 * sup.rho_max || max_sx <= 1e-13 * sup.rho_max)
        return WindingResult{0.0, 0, true};

    const double two_pi = 2.0 * std::numbers::pi;
    double total = 0.0;
    double th_prev = std::atan2(tx.s_x(sup.i_lo), tx.s_z(sup.i_lo));
    const double th_first = th_prev;
    for (int i = sup.i_lo + 1; i <= sup.i_hi; ++i) {
        const double th = std::atan2(tx.s_x(i), tx.s_z(i));
        total += angle_step(st, tx.grid.point(i - 1), tx.grid.point(i), th_prev, th, 0);
        th_prev = th;
    }
    WindingResult w;
    w.n_zx = total / two_pi;
    const double closing = wrap_angle(th_first - th_prev);
    w.n_w = int(std::lround((total + closing) / two_pi));
    return w;
}

NodeSections sort_nodes(const std::vector<AxisZero>& x_zeros,
                        const std::vector<AxisZero>& z_zeros, const Support& sup) {
    if (sup.tail_sign_sx == 0)
        throw consistency_error("boundary sign of s_x undefined, cannot close the sections");

    NodeSections ns;
    ns.boundary_sign = sup.tail_sign_sx;
    for (const auto& z : x_zeros) {
        if (z.boundary) continue;
        if (ns.sel_sign.empty() || z.companion_sign != ns.sel_sign.back()) {
            ns.sel_x.push_back(z.x);
            ns.sel_sign.push_back(z.companion_sign);
        }
    }

    const int n_sel = int(ns.sel_x.size());
    if (n_sel == 0) {
        // the whole axis is one wrap section
        ns.section_signs.emplace_back();
        for (const auto& z : z_zeros) ns.section_signs[0].push_back(z.companion_sign);
        ns.section_signs[0].push_back(ns.boundary_sign);
        ns.wrap_section_index = 0;
        return ns;
    }

    ns.section_signs.assign(size_t(n_sel), {});
    auto& wrap = ns.section_signs[size_t(n_sel - 1)];
    std::vector<int> left_tail;
    for (const auto& z : z_zeros) {
        if (z.x < ns.sel_x.front()) {
            left_tail.push_back(z.companion_sign);
            continue;
        }
        if (z.x > ns.sel_x.back()) {
            wrap.push_back(z.companion_sign);
            continue;
        }
        // interior: belongs to the section whose start is the last selected zero <= x
        const size_t i =
            size_t(std::upper_bound(ns.sel_x.begin(), ns.sel_x.end(), z.x) - ns.sel_x.begin());
        if (i >= 1 && i <= size_t(n_sel) - 1) ns.section_signs[i - 1].push_back(z.companion_sign);
    }
    // wrap path order: right tail (ascending), infinity closure, left tail (ascending)
    wrap.push_back(ns.boundary_sign);
    wrap.insert(wrap.end(), left_tail.begin(), left_tail.end());
    ns.wrap_section_index = n_sel - 1;

    for (int i = 0; i + 1 < n_sel; ++i)
        if (ns.m(i) % 2 == 0)
            throw consistency_error(
                "even sigma_z zero count between consecutive sign-flipping sigma_x zeros");
    return ns;
}

int winding_algebraic(const NodeSections& ns) {
    if (ns.sel_x.empty()) return 0;
    int half = 0;
    for (size_t i = 0; i < ns.section_signs.size(); ++i) {
        if (ns.section_signs[i].empty()) continue;
        if (ns.m(int(i)) % 2 == 0) continue;
        half += ns.sel_sign[i] * ns.s_last(int(i));
    }
    if (half % 2 != 0)
        throw consistency_error("algebraic winding half-turns do not combine to an integer");
    return half / 2;
}

KnotCounters knot_counters(const std::vector<AxisZero>& x_zeros, const NodeSections& ns,
                           int n_w) {
    int real_zeros = 0;
    for (const auto& z : x_zeros)
        if (!z.boundary) ++real_zeros;
    if (real_zeros % 2 != 0) throw consistency_error("sigma_x zeros must come in pairs");

    KnotCounters kc;
    const int n_z = real_zeros / 2;
    kc.n_aw = n_z - std::abs(n_w);
    if (kc.n_aw < 0)
        throw consistency_error("winding exceeds the node count: |n_w| = " +
                                std::to_string(std::abs(n_w)) + ", n_Z = " + std::to_string(n_z));
    for (size_t i = 0; i < ns.section_signs.size(); ++i)
        kc.n_ex += std::max(ns.m(int(i)) - 1, 0);
    return kc;
}

namespace {

struct TrajPoint {
    double x;   // parameter
    double z, s;  // (s_z, s_x)
};

} // namespace

DiagonalKnots diagonal_knots(const RealSpaceState& st, const SpinTexture& tx,
                             const std::vector<AxisZero>& x_zeros,
                             const std::vector<AxisZero>& z_zeros, const Support& sup,
                             const TopoOptions& opt) {
    DiagonalKnots out;
    const double tol_axis = opt.tol_axis_rel * sup.rho_max;
    const double dedupe_dist = 1e-6 * sup.rho_max;

    std::vector<double> breaks;
    breaks.reserve(x_zeros.size() + z_zeros.size());
    for (const auto& z : x_zeros)
        if (!z.boundary) breaks.push_back(z.x);
    for (const auto& z : z_zeros)
        if (!z.boundary) breaks.push_back(z.x);
    std::sort(breaks.begin(), breaks.end());

    std::vector<double> edges{tx.grid.point(sup.i_lo)};
    for (double b : breaks) edges.push_back(b);
    edges.push_back(tx.grid.point(sup.i_hi));

    int cursor = sup.i_lo;
    std::vector<TrajPoint> pts;
    for (size_t arc = 0; arc + 1 < edges.size(); ++arc) {
        const double a = edges[arc], b = edges[arc + 1];
        if (!(a < b)) continue;
        pts.clear();
        double sz, sx;
        texture_at(st, a, sz, sx);
        pts.push_back(TrajPoint{a, sz, sx});
        while (cursor <= sup.i_hi && tx.grid.point(cursor) <= a) ++cursor;
        for (; cursor <= sup.i_hi && tx.grid.point(cursor) < b; ++cursor)
            pts.push_back(TrajPoint{tx.grid.point(cursor), tx.s_z(cursor), tx.s_x(cursor)});
        texture_at(st, b, sz, sx);
        pts.push_back(TrajPoint{b, sz, sx});
        if (pts.size() < 4) continue;

        // keep only segments that can host an off-axis intersection: a segment
        // confined to one axis band cannot contain a countable crossing point
        struct Seg {
            TrajPoint p, q;
            double zmin, zmax, xmin, xmax;
        };
        std::vector<Seg> segs;
        std::vector<int> seg_id;  // original polyline position, for adjacency
        for (size_t i = 0; i + 1 < pts.size(); ++i) {
            const TrajPoint& p = pts[i];
            const TrajPoint& q = pts[i + 1];
            if (std::max(std::abs(p.z), std::abs(q.z)) < tol_axis) continue;
            if (std::max(std::abs(p.s), std::abs(q.s)) < tol_axis) continue;
            segs.push_back(Seg{p, q, std::min(p.z, q.z), std::max(p.z, q.z),
                               std::min(p.s, q.s), std::max(p.s, q.s)});
            seg_id.push_back(int(i));
        }

        for (size_t i = 0; i < segs.size(); ++i) {
            for (size_t j = i + 1; j < segs.size(); ++j) {
                if (seg_id[j] <= seg_id[i] + 1) continue;  // adjacent share a vertex
                const Seg& A = segs[i];
                const Seg& B = segs[j];
                if (A.zmax < B.zmin || B.zmax < A.zmin || A.xmax < B.xmin || B.xmax < A.xmin)
                    continue;
                const double rz = A.q.z - A.p.z, rx = A.q.s - A.p.s;
                const double sz2 = B.q.z - B.p.z, sx2 = B.q.s - B.p.s;
                const double denom = rz * sx2 - rx * sz2;
                if (denom == 0.0) continue;
                const double qpz = B.p.z - A.p.z, qpx = B.p.s - A.p.s;
                const double t = (qpz * sx2 - qpx * sz2) / denom;
                const double u = (qpz * rx - qpx * rz) / denom;
                if (!(t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0)) continue;

                DiagonalKnot k;
                k.sz = A.p.z + t * rz;
                k.sx = A.p.s + t * rx;
                if (std::abs(k.sz) < tol_axis || std::abs(k.sx) < tol_axis) continue;
                k.x1 = A.p.x + t * (A.q.x - A.p.x);
                k.x2 = B.p.x + u * (B.q.x - B.p.x);
                const double na = std::hypot(rz, rx), nb = std::hypot(sz2, sx2);
                const double c = std::abs(rz * sz2 + rx * sx2) / (na * nb);
                k.angle_deg = std::acos(std::clamp(c, 0.0, 1.0)) * 180.0 / std::numbers::pi;
                k.shallow = k.angle_deg < opt.angle_tol_deg;
                out.knots.push_back(k);
            }
        }
    }

    // one count per geometric intersection point
    std::sort(out.knots.begin(), out.knots.end(),
              [](const DiagonalKnot& a, const DiagonalKnot& b) { return a.x1 < b.x1; });
    std::vector<DiagonalKnot> unique;
    for (const auto& k : out.knots) {
        bool dup = false;
        for (const auto& u : unique)
            if (std::hypot(k.sz - u.sz, k.sx - u.sx) <= dedupe_dist) {
                dup = true;
                break;
            }
        if (!dup) unique.push_back(k);
    }
    out.knots.swap(unique);
    for (const auto& k : out.knots) out.uncertain = out.uncertain || k.shallow;
    return out;
}

std::string encode_topology(const NodeSections& ns, const std::vector<AxisZero>& x_zeros,
                            const std::vector<AxisZero>& z_zeros, const DiagonalKnots& dk) {
    struct Ev {
        double x;
        char c;
    };
    std::vector<Ev> evs;
    evs.reserve(x_zeros.size() + z_zeros.size() + dk.knots.size());
    for (const auto& z : x_zeros)
        if (!z.boundary) evs.push_back(Ev{z.x, z.companion_sign > 0 ? '1' : '3'});
    for (const auto& z : z_zeros)
        if (!z.boundary) evs.push_back(Ev{z.x, z.companion_sign > 0 ? '2' : '4'});
    for (const auto& k : dk.knots) evs.push_back(Ev{k.x1, '5'});
    std::stable_sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) { return a.x < b.x; });

    std::string code;
    code.reserve(evs.size() + 2);
    for (const auto& e : evs) code.push_back(e.c);
    code.push_back('~');
    code.push_back(ns.boundary_sign > 0 ? '2' : '4');
    return code;
}

TopoAnalysis compute_topology_full(const RealSpaceState& st, const SpinTexture& tx,
                                   const TopoOptions& opt) {
    TopoAnalysis a;
    a.summary.parity = st.parity;
    a.support = retained_support(tx, opt);

    a.x_zeros = find_sigma_x_zeros(st, tx, a.support, opt);
    a.summary.n_Z = int(a.x_zeros.size()) / 2;
    try {
        a.z_zeros = find_sigma_z_zeros(st, tx, a.support, opt);
    } catch (const degenerate_texture_error&) {
        a.summary.flags |= topo_degenerate;
        return a;
    }

    const WindingResult w = winding_integral(st, tx, a.support, opt);
    a.summary.n_zx = w.n_zx;
    a.summary.n_w = w.n_w;
    if (w.degenerate) {
        a.summary.flags |= topo_degenerate;
        return a;
    }

    auto assemble = [&] {
        a.sections = sort_nodes(a.x_zeros, a.z_zeros, a.support);
        a.summary.n_w_alg = winding_algebraic(a.sections);
        const KnotCounters kc = knot_counters(a.x_zeros, a.sections, w.n_w);
        a.summary.n_aw = kc.n_aw;
        a.summary.n_ex = kc.n_ex;
    };
    try {
        assemble();
    } catch (const consistency_error&) {
        // the integral saw a crossing whose zero the tail filter suppressed
        // (a node pair entering through the tail); redo detection at the
        // noise floor so both routes count the same structure
        TopoOptions faint = opt;
        faint.eps_tail = std::min(opt.eps_tail, opt.eps_lobe_floor);
        a.x_zeros = find_sigma_x_zeros(st, tx, a.support, faint);
        a.z_zeros = find_sigma_z_zeros(st, tx, a.support, faint);
        a.summary.n_Z = int(a.x_zeros.size()) / 2;
        assemble();
        a.summary.flags |= topo_subresolution;
    }
    a.knots = diagonal_knots(st, tx, a.x_zeros, a.z_zeros, a.support, opt);
    a.summary.n_dk = int(a.knots.knots.size());
    a.summary.code = encode_topology(a.sections, a.x_zeros, a.z_zeros, a.knots);
    if (a.knots.uncertain) a.summary.flags |= topo_uncertain_knots;
    if (a.summary.n_w != a.summary.n_w_alg) a.summary.flags |= topo_winding_mismatch;
    return a;
}

TopoSummary compute_topology(const RealSpaceState& st, const SpinTexture& tx,
                             const TopoOptions& opt) {
    return compute_topology_full(st, tx, opt).summary;
}

} // namespace qrm
