#pragma once

#include <string>
#include <vector>

#include "qrm/realspace.hpp"

namespace qrm {

enum class ZeroAxis { sigma_x, sigma_z };

// which component vanishes at the zero: a sigma_x zero is a node of psi_up
// (s_z < 0 there) or psi_dn (s_z > 0); a sigma_z zero is an equal-amplitude
// point |psi_up| = |psi_dn|, i.e. a node of one spin-x component
enum class ZeroSource { psi_up, psi_dn, equal_amplitude };

struct AxisZero {
    double x = 0.0;         // refined position
    ZeroAxis axis = ZeroAxis::sigma_x;
    int companion_sign = 0;  // sign of the other spin expectation at x
    ZeroSource source = ZeroSource::equal_amplitude;
    bool boundary = false;   // virtual zero from the connected +-infinity ends
};

struct TopoOptions {
    double eps_tail = 1e-6;      // lobe-peak floor relative to the peak amplitude
    double tol_axis_rel = 1e-3;  // knot exclusion band around the axes, rel. radius
    double angle_tol_deg = 1.0;  // crossings shallower than this are flagged
    double refine_tol = 1e-10;   // bisection window for zero positions
    // fallback lobe floor: when the winding integral resolves a crossing whose
    // zero the eps_tail filter suppressed (possible while a node pair enters
    // through the tail), detection is retried once at this noise-level floor
    // so that both winding routes see the same trajectory
    double eps_lobe_floor = 1e-12;
};

// grid index range where the density stays above eps_tail^2 * peak; zeros and
// winding are evaluated only here, where the trajectory radius is resolved
struct Support {
    int i_lo = 0, i_hi = 0;
    double rho_max = 0.0;
    int tail_sign_sx = 0;  // sign of s_x at the outermost retained points
};

Support retained_support(const SpinTexture& tx, const TopoOptions& opt = {});

// sign changes of s_x on the grid, bisection-refined on the Hermite series,
// tail-filtered, verified to come in +-x pairs; count is 2 n_Z
std::vector<AxisZero> find_sigma_x_zeros(const RealSpaceState& st, const SpinTexture& tx,
                                         const Support& sup, const TopoOptions& opt = {});

// sign changes of s_z; x = 0 qualifies only when s_z flips sign across it;
// throws degenerate_texture_error when s_z vanishes identically (g = 0)
std::vector<AxisZero> find_sigma_z_zeros(const RealSpaceState& st, const SpinTexture& tx,
                                         const Support& sup, const TopoOptions& opt = {});

struct WindingResult {
    double n_zx = 0.0;       // accumulated turns of (s_z, s_x) along the open trajectory
    int n_w = 0;             // nearest integer after closing the ends
    bool degenerate = false;  // trajectory confined to one axis, no winding defined
};

// total polar-angle change of (s_z(x), s_x(x)) over the retained support,
// counterclockwise positive, ends closed as if the axis were periodic
WindingResult winding_integral(const RealSpaceState& st, const SpinTexture& tx,
                               const Support& sup, const TopoOptions& opt = {});

// sigma_x zeros thinned to the subsequence where the sign of s_z changes, and
// the sigma_z zeros grouped into the sections between consecutive selected
// zeros. The wrap section [x_last, +inf) u (-inf, x_first] closes through
// infinity and receives one virtual boundary zero whose sign is that of s_x
// at the outermost retained point; its zeros are stored in path order (right
// tail ascending, boundary, left tail ascending).
struct NodeSections {
    std::vector<double> sel_x;   // selected sigma_x zeros, ascending
    std::vector<int> sel_sign;   // s_z sign at each, alternating by construction
    // per-section companion signs of the contained sigma_z zeros, path order;
    // sections 0..N-2 are the interior ones, the last is the wrap section
    std::vector<std::vector<int>> section_signs;
    int wrap_section_index = 0;
    int boundary_sign = 0;

    int m(int i) const { return int(section_signs[i].size()); }
    int s_last(int i) const { return section_signs[i].back(); }
};

NodeSections sort_nodes(const std::vector<AxisZero>& x_zeros,
                        const std::vector<AxisZero>& z_zeros, const Support& sup);

// winding number from the section data alone: every odd-m section contributes
// (1/2) * S_i * s_last(i), even-m sections contribute nothing
int winding_algebraic(const NodeSections& ns);

struct KnotCounters {
    int n_aw = 0;  // node pairs not contributing to the winding
    int n_ex = 0;  // extra sigma_z zeros beyond one per section
};

KnotCounters knot_counters(const std::vector<AxisZero>& x_zeros, const NodeSections& ns,
                           int n_w);

struct DiagonalKnot {
    double x1 = 0.0, x2 = 0.0;  // the two parameter locations, x1 < x2
    double sz = 0.0, sx = 0.0;  // intersection point in the texture plane
    double angle_deg = 0.0;     // crossing angle
    bool shallow = false;       // below angle_tol, counted but flagged
};

struct DiagonalKnots {
    std::vector<DiagonalKnot> knots;
    bool uncertain = false;
};

// transversal self-intersections of the trajectory polyline whose two
// parameter locations fall inside the same arc between consecutive axis
// zeros (tail arcs included); intersections within tol_axis of either axis
// are excluded, so axis-hugging loops are not counted
DiagonalKnots diagonal_knots(const RealSpaceState& st, const SpinTexture& tx,
                             const std::vector<AxisZero>& x_zeros,
                             const std::vector<AxisZero>& z_zeros, const Support& sup,
                             const TopoOptions& opt = {});

// digit string of the state walking x upward: 1/3 for sigma_x zeros with
// s_z > 0 / < 0, 2/4 for sigma_z zeros with s_x > 0 / < 0, 5 for a diagonal
// knot (at its smaller parameter), and the tilde-marked boundary digit last
std::string encode_topology(const NodeSections& ns, const std::vector<AxisZero>& x_zeros,
                            const std::vector<AxisZero>& z_zeros, const DiagonalKnots& dk);

enum TopoFlags : unsigned {
    topo_ok = 0u,
    topo_degenerate = 1u,        // s_z identically zero, counters forced to zero
    topo_uncertain_knots = 2u,   // a near-tangential self-intersection was counted
    topo_winding_mismatch = 4u,  // integral and algebraic winding disagree
    topo_subresolution = 8u,     // counters rest on zeros below the eps_tail floor
};

struct TopoSummary {
    int parity = 0;
    int n_Z = 0;        // node pair count
    double n_zx = 0.0;  // open-trajectory turns
    int n_w = 0;        // integral winding
    int n_w_alg = 0;    // algebraic winding
    int n_aw = 0;
    int n_ex = 0;
    int n_dk = 0;
    std::string code;
    unsigned flags = topo_ok;
};

// everything the pipeline produced for one state, for reporting
struct TopoAnalysis {
    TopoSummary summary;
    Support support;
    std::vector<AxisZero> x_zeros, z_zeros;
    NodeSections sections;
    DiagonalKnots knots;
};

TopoAnalysis compute_topology_full(const RealSpaceState& st, const SpinTexture& tx,
                                   const TopoOptions& opt = {});
TopoSummary compute_topology(const RealSpaceState& st, const SpinTexture& tx,
                             const TopoOptions& opt = {});

} // namespace qrm
