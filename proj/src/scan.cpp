#include "qrm/scan.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "qrm/errors.hpp"

namespace qrm {

namespace {

ModelParams with_axis(const SweepSpec& spec, double v) {
    ModelParams p = spec.base;
    if (spec.axis == SweepAxis::g)
        p.g = v;
    else
        p.lambda = v;
    return p;
}

StateReport report_from(const Spectrum& sp, int j_e, const ModelParams& p,
                        const BasisCache& basis, const TopoOptions& topo) {
    StateReport r;
    r.params = p;
    r.level = sp.level(j_e);
    r.gap_up = sp.gap_up[size_t(j_e - 1)];
    r.gap_down = sp.gap_down[size_t(j_e - 1)];
    r.state = to_position(r.level, p, basis);
    r.texture = spin_texture(r.state);
    r.topo = compute_topology_full(r.state, r.texture, topo);
    return r;
}

ScanRecord record_from(const StateReport& r) {
    ScanRecord rec;
    rec.g = r.params.g;
    rec.lambda = r.params.lambda;
    rec.j_e = r.level.j_e;
    rec.energy = r.level.energy;
    rec.parity = r.level.parity;
    rec.gap_up = r.gap_up;
    rec.gap_down = r.gap_down;
    rec.topo = r.topo.summary;
    return rec;
}

} // namespace

StateReport analyze_state(const ModelParams& p, int j_e, int grid_points,
                          const TopoOptions& topo) {
    p.validate();
    if (j_e < 1 || j_e > 2 * p.n_levels)
        throw validation_error("j_e out of the computed range [1, 2 n_levels]");
    const Spectrum sp = solve_spectrum(p);
    const Grid grid = Grid::make_default(p, grid_points);
    const BasisCache basis = make_basis(grid, p.n_cut);
    return report_from(sp, j_e, p, basis, topo);
}

std::vector<StateReport> analyze_levels(const ModelParams& p, const std::vector<int>& levels,
                                        int grid_points, const TopoOptions& topo) {
    p.validate();
    if (levels.empty()) throw validation_error("no levels requested");
    for (int j : levels)
        if (j < 1 || j > 2 * p.n_levels)
            throw validation_error("j_e out of the computed range [1, 2 n_levels]");
    const Spectrum sp = solve_spectrum(p);
    const Grid grid = Grid::make_default(p, grid_points);
    const BasisCache basis = make_basis(grid, p.n_cut);
    std::vector<StateReport> out;
    out.reserve(levels.size());
    for (int j : levels) out.push_back(report_from(sp, j, p, basis, topo));
    return out;
}

void SweepSpec::validate() const {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
        throw validation_error("sweep range must be finite with lo < hi");
    if (count < 2) throw validation_error("sweep needs at least two points");
    if (j_e < 1 || j_e > 2 * base.n_levels)
        throw validation_error("j_e out of the computed range [1, 2 n_levels]");
    if (!(gap_zero_tol > 0.0)) throw validation_error("gap_zero_tol must be positive");
    // the base parameters must be valid at every sweep point; the endpoints
    // bound both axes since validity is monotone in g and lambda separately
    with_axis(*this, lo).validate();
    with_axis(*this, hi).validate();
}

double SweepSpec::value(int i) const {
    return lo + (hi - lo) * double(i) / double(count - 1);
}

ScanRecord scan_point(const ModelParams& p, int j_e, int grid_points, const TopoOptions& topo) {
    ScanRecord rec;
    rec.g = p.g;
    rec.lambda = p.lambda;
    rec.j_e = j_e;
    try {
        rec = record_from(analyze_state(p, j_e, grid_points, topo));
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

std::vector<ScanRecord> scan_point_multi(const ModelParams& p, const std::vector<int>& levels,
                                         int grid_points, const TopoOptions& topo) {
    std::vector<ScanRecord> out(levels.size());
    for (size_t i = 0; i < levels.size(); ++i) {
        out[i].g = p.g;
        out[i].lambda = p.lambda;
        out[i].j_e = levels[i];
    }
    Spectrum sp;
    BasisCache basis;
    try {
        p.validate();
        for (int j : levels)
            if (j < 1 || j > 2 * p.n_levels)
                throw validation_error("j_e out of the computed range [1, 2 n_levels]");
        sp = solve_spectrum(p);
        const Grid grid = Grid::make_default(p, grid_points);
        basis = make_basis(grid, p.n_cut);
    } catch (const std::exception& e) {
        for (auto& rec : out) {
            rec.ok = false;
            rec.error = e.what();
        }
        return out;
    }
    for (size_t i = 0; i < levels.size(); ++i) {
        try {
            out[i] = record_from(report_from(sp, levels[i], p, basis, topo));
        } catch (const std::exception& e) {
            out[i].ok = false;
            out[i].error = e.what();
        }
    }
    return out;
}

std::vector<ScanRecord> sweep_line(const SweepSpec& spec) {
    spec.validate();
    std::vector<ScanRecord> out;
    out.reserve(size_t(spec.count));
    for (int i = 0; i < spec.count; ++i)
        out.push_back(scan_point(with_axis(spec, spec.value(i)), spec.j_e, spec.grid_points,
                                 spec.topo));
    return out;
}

namespace {

// |E_{j+side} - E_j| at one sweep-axis value, from a fresh diagonalization
double gap_probe(const SweepSpec& spec, double v, int side) {
    const ModelParams p = with_axis(spec, v);
    const Spectrum sp = solve_spectrum(p);
    const auto& g = side > 0 ? sp.gap_up : sp.gap_down;
    const auto& val = g[size_t(spec.j_e - 1)];
    if (!val) throw numerical_error("gap not available at the requested level");
    return *val;
}

} // namespace

std::vector<GapEvent> classify_gap_events(const SweepSpec& spec,
                                          const std::vector<ScanRecord>& records) {
    spec.validate();
    if (int(records.size()) != spec.count)
        throw validation_error("record count does not match the sweep spec");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<GapEvent> events;

    for (int side : {+1, -1}) {
        std::vector<double> y(size_t(spec.count), nan);
        for (int i = 0; i < spec.count; ++i) {
            const ScanRecord& r = records[size_t(i)];
            if (!r.ok) continue;
            const auto& gp = side > 0 ? r.gap_up : r.gap_down;
            if (gp) y[size_t(i)] = *gp;
        }
        for (int i = 0; i < spec.count; ++i) {
            if (std::isnan(y[size_t(i)])) continue;
            const bool has_l = i > 0 && !std::isnan(y[size_t(i - 1)]);
            const bool has_r = i + 1 < spec.count && !std::isnan(y[size_t(i + 1)]);
            const bool min_l = !has_l || y[size_t(i)] < y[size_t(i - 1)];
            const bool min_r = !has_r || y[size_t(i)] <= y[size_t(i + 1)];
            if (!(min_l && min_r)) continue;
            if (!has_l && !has_r) continue;

            GapEvent ev;
            ev.side = side;
            if (!has_l || !has_r) {
                // minimum against a sweep edge or a failed neighbor: report
                // the raw grid point, do not classify
                ev.partial = true;
                ev.location = spec.value(i);
                ev.gap_at_min = y[size_t(i)];
                events.push_back(ev);
                continue;
            }

            // golden-section refinement of the minimum inside the bracket
            double a = spec.value(i - 1), b = spec.value(i + 1);
            const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
            double c = b - gr * (b - a), d = a + gr * (b - a);
            double fc = gap_probe(spec, c, side), fd = gap_probe(spec, d, side);
            const double tol = 1e-10 * std::max({1.0, std::abs(a), std::abs(b)});
            for (int it = 0; it < 200 && (b - a) > tol; ++it) {
                if (fc < fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = gap_probe(spec, c, side);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = gap_probe(spec, d, side);
                }
            }
            ev.location = 0.5 * (a + b);
            ev.gap_at_min = gap_probe(spec, ev.location, side);
            const ScanRecord& rl = records[size_t(i - 1)];
            const ScanRecord& rr = records[size_t(i + 1)];
            ev.parity_flip = rl.parity != rr.parity;
            ev.crossing =
                ev.gap_at_min < spec.gap_zero_tol * spec.base.Omega && ev.parity_flip;
            const bool topo_usable = (rl.topo.flags & topo_degenerate) == 0 &&
                                     (rr.topo.flags & topo_degenerate) == 0;
            ev.node_jump = topo_usable ? rr.topo.n_Z - rl.topo.n_Z : 0;
            events.push_back(ev);
        }
    }

    std::sort(events.begin(), events.end(),
              [](const GapEvent& a, const GapEvent& b) { return a.location < b.location; });
    return events;
}

PhaseDiagram assemble_phase_diagram(const GridSpec& g_axis, const GridSpec& l_axis, int j_e,
                                    std::vector<ScanRecord> cells) {
    const int ng = g_axis.count, nl = l_axis.count;
    if (ng < 2 || nl < 2) throw validation_error("phase diagram needs at least a 2x2 grid");
    if (int(cells.size()) != ng * nl)
        throw validation_error("cell count does not match the grid");

    PhaseDiagram pd;
    pd.g_axis = g_axis;
    pd.l_axis = l_axis;
    pd.j_e = j_e;
    pd.cells = std::move(cells);
    pd.near_boundary.assign(size_t(ng) * size_t(nl), 0);

    const double inf = std::numeric_limits<double>::infinity();
    auto min_gap_of = [&](const ScanRecord& r) {
        double m = inf;
        if (r.gap_up) m = std::min(m, *r.gap_up);
        if (r.gap_down) m = std::min(m, *r.gap_down);
        return m;
    };

    auto compare = [&](int ia, int ib) {
        const ScanRecord& a = pd.cells[size_t(ia)];
        const ScanRecord& b = pd.cells[size_t(ib)];
        if (!a.ok || !b.ok || (a.topo.flags & topo_degenerate) ||
            (b.topo.flags & topo_degenerate)) {
            // unclassifiable pair: exclude both cells from interior statistics
            pd.near_boundary[size_t(ia)] = 1;
            pd.near_boundary[size_t(ib)] = 1;
            return;
        }
        BoundaryEdge e;
        e.ia = ia;
        e.ib = ib;
        if (a.parity != b.parity) e.jumps.push_back("parity");
        if (a.topo.n_Z != b.topo.n_Z) e.jumps.push_back("n_Z");
        auto sign_of = [](int v) { return (v > 0) - (v < 0); };
        if (sign_of(a.topo.n_w) != sign_of(b.topo.n_w)) e.jumps.push_back("sign_n_w");
        if (std::abs(a.topo.n_w) != std::abs(b.topo.n_w)) e.jumps.push_back("abs_n_w");
        if (a.topo.n_ex != b.topo.n_ex) e.jumps.push_back("n_ex");
        if (a.topo.n_dk != b.topo.n_dk) e.jumps.push_back("n_dk");
        if (e.jumps.empty()) return;
        e.parity_flip = a.parity != b.parity;
        e.conventional = e.parity_flip;
        e.min_gap = std::min(min_gap_of(a), min_gap_of(b));
        pd.near_boundary[size_t(ia)] = 1;
        pd.near_boundary[size_t(ib)] = 1;
        pd.boundaries.push_back(std::move(e));
    };

    for (int il = 0; il < nl; ++il)
        for (int ig = 0; ig < ng; ++ig) {
            if (ig + 1 < ng) compare(pd.cell_index(ig, il), pd.cell_index(ig + 1, il));
            if (il + 1 < nl) compare(pd.cell_index(ig, il), pd.cell_index(ig, il + 1));
        }
    return pd;
}

PhaseDiagram phase_diagram(const GridSpec& g_axis, const GridSpec& l_axis, int j_e,
                           const ModelParams& base, int workers, int grid_points,
                           const TopoOptions& topo) {
    if (g_axis.count < 8 || l_axis.count < 8)
        throw validation_error("phase diagram needs at least an 8x8 grid");
    const int n = g_axis.count * l_axis.count;
    std::vector<ScanRecord> cells(static_cast<size_t>(n));
    parallel_for(n, workers, [&](int idx) {
        ModelParams p = base;
        p.g = g_axis.value(idx % g_axis.count);
        p.lambda = l_axis.value(idx / g_axis.count);
        cells[size_t(idx)] = scan_point(p, j_e, grid_points, topo);
    });
    return assemble_phase_diagram(g_axis, l_axis, j_e, std::move(cells));
}

std::vector<PhaseDiagram> phase_diagram_multi(const GridSpec& g_axis, const GridSpec& l_axis,
                                              const std::vector<int>& levels,
                                              const ModelParams& base, int workers,
                                              int grid_points, const TopoOptions& topo) {
    if (levels.empty()) throw validation_error("no levels requested");
    if (g_axis.count < 8 || l_axis.count < 8)
        throw validation_error("phase diagram needs at least an 8x8 grid");
    const int n = g_axis.count * l_axis.count;
    std::vector<std::vector<ScanRecord>> per_cell(static_cast<size_t>(n));
    parallel_for(n, workers, [&](int idx) {
        ModelParams p = base;
        p.g = g_axis.value(idx % g_axis.count);
        p.lambda = l_axis.value(idx / g_axis.count);
        per_cell[size_t(idx)] = scan_point_multi(p, levels, grid_points, topo);
    });
    std::vector<PhaseDiagram> out;
    out.reserve(levels.size());
    for (size_t k = 0; k < levels.size(); ++k) {
        std::vector<ScanRecord> cells;
        cells.reserve(size_t(n));
        for (int idx = 0; idx < n; ++idx) cells.push_back(per_cell[size_t(idx)][k]);
        out.push_back(assemble_phase_diagram(g_axis, l_axis, levels[k], std::move(cells)));
    }
    return out;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (workers <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mtx;
    std::exception_ptr err;
    auto body = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(err_mtx);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int k = std::min(workers, n);
    pool.reserve(size_t(k));
    for (int t = 0; t < k; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace qrm
