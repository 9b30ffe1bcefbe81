#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qrm/topology.hpp"

namespace qrm {

// full single-state pipeline output: solve, reconstruct, analyze
struct StateReport {
    ModelParams params;
    EigenLevel level;
    std::optional<double> gap_up, gap_down;
    RealSpaceState state;
    SpinTexture texture;
    TopoAnalysis topo;
};

StateReport analyze_state(const ModelParams& p, int j_e, int grid_points = 4001,
                          const TopoOptions& topo = {});

// several levels of one spectrum sharing the diagonalization and basis sampling
std::vector<StateReport> analyze_levels(const ModelParams& p, const std::vector<int>& levels,
                                        int grid_points = 4001, const TopoOptions& topo = {});

enum class SweepAxis { g, lambda };

struct SweepSpec {
    SweepAxis axis = SweepAxis::g;
    double lo = 0.0, hi = 1.0;
    int count = 2;
    int j_e = 1;
    ModelParams base;  // carries the fixed value of the other parameter
    int grid_points = 4001;
    TopoOptions topo;
    double gap_zero_tol = 1e-6;  // crossing threshold, units of Omega

    void validate() const;
    double value(int i) const;  // i-th sweep point
};

struct ScanRecord {
    double g = 0.0, lambda = 0.0;
    int j_e = 0;
    double energy = 0.0;
    int parity = 0;
    std::optional<double> gap_up, gap_down;
    TopoSummary topo;
    bool ok = true;
    std::string error;
};

// per-point failures are recorded inline and the sweep continues
std::vector<ScanRecord> sweep_line(const SweepSpec& spec);

// one grid point of a sweep or scan; never throws, failures land in the record
ScanRecord scan_point(const ModelParams& p, int j_e, int grid_points, const TopoOptions& topo);
// same, for several levels at one parameter point (shared solve)
std::vector<ScanRecord> scan_point_multi(const ModelParams& p, const std::vector<int>& levels,
                                         int grid_points, const TopoOptions& topo);

struct GapEvent {
    double location = 0.0;  // refined sweep-axis value of the gap minimum
    double gap_at_min = 0.0;
    bool crossing = false;  // refined gap below tolerance and parity flips
    bool parity_flip = false;
    int node_jump = 0;      // n_Z step across the event
    bool partial = false;   // at a sweep edge or inconsistent, not classified
    int side = +1;          // +1: minimum of gap_up, -1: of gap_down
};

// local minima of both gap series, refined by golden-section search on fresh
// spectra, classified crossing vs anticrossing
std::vector<GapEvent> classify_gap_events(const SweepSpec& spec,
                                          const std::vector<ScanRecord>& records);

struct GridSpec {
    double lo = 0.0, hi = 1.0;
    int count = 2;

    double value(int i) const { return lo + (hi - lo) * double(i) / double(count - 1); }
};

struct BoundaryEdge {
    int ia = 0, ib = 0;              // flat cell indices of the adjacent pair
    std::vector<std::string> jumps;  // which counters differ
    bool parity_flip = false;
    bool conventional = false;  // boundary with parity reversal (gap-closing type)
    double min_gap = 0.0;       // smallest recorded gap among the two cells
};

struct PhaseDiagram {
    GridSpec g_axis, l_axis;
    int j_e = 1;
    std::vector<ScanRecord> cells;  // row-major, lambda outer, g inner
    std::vector<unsigned char> near_boundary;
    std::vector<BoundaryEdge> boundaries;

    int cell_index(int ig, int il) const { return il * g_axis.count + ig; }
};

PhaseDiagram phase_diagram(const GridSpec& g_axis, const GridSpec& l_axis, int j_e,
                           const ModelParams& base, int workers = 1, int grid_points = 4001,
                           const TopoOptions& topo = {});

// several levels over one parameter grid, one diagonalization per cell
std::vector<PhaseDiagram> phase_diagram_multi(const GridSpec& g_axis, const GridSpec& l_axis,
                                              const std::vector<int>& levels,
                                              const ModelParams& base, int workers = 1,
                                              int grid_points = 4001, const TopoOptions& topo = {});

// boundary extraction and near-boundary flags from precomputed cells
// (used by the CLI resume path)
PhaseDiagram assemble_phase_diagram(const GridSpec& g_axis, const GridSpec& l_axis, int j_e,
                                    std::vector<ScanRecord> cells);

// order-preserving parallel map; results land in caller-indexed slots, so the
// output is identical for any worker count
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

} // namespace qrm
