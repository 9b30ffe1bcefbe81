#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qrm/spectrum.hpp"

namespace qrm {

// uniform grid, symmetric about x = 0 by default so that grid points come in
// exact negation pairs and x = 0 is itself a grid point
struct Grid {
    double x_min = 0.0;
    double x_max = 0.0;
    int n_points = 0;  // odd

    void validate() const;
    bool symmetric() const { return x_min == -x_max; }
    double spacing() const { return (x_max - x_min) / double(n_points - 1); }
    double point(int i) const;
    std::vector<double> points() const;

    // wide enough for the displaced wavepacket plus the classical turning
    // point of the highest kept Fock state, with margin
    static Grid make_default(const ModelParams& p, int n_points = 4001);
};

// oscillator eigenfunctions phi_0..phi_n_max sampled on the grid, one per
// column; normalized three-term recurrence, stable for n_max <= 400, |x| <= 40
Eigen::MatrixXd hermite_basis(const Grid& grid, int n_max);

// same functions at a single point, for off-grid evaluation
void hermite_point(double x, int n_max, Eigen::VectorXd& out);

// basis matrix bundled with its grid so several states can share one sampling
struct BasisCache {
    Grid grid;
    int n_max = 0;
    Eigen::MatrixXd phi;  // n_points x (n_max+1)
};
BasisCache make_basis(const Grid& grid, int n_max);

struct RealSpaceState {
    ModelParams params;
    Grid grid;
    int j_e = 0;
    int parity = 0;
    double energy = 0.0;
    Eigen::VectorXd c_up, c_dn;      // Fock amplitudes of the spin-z components
    Eigen::VectorXd psi_up, psi_dn;  // spin-z components on the grid
    Eigen::VectorXd tilde_p, tilde_m;  // spin-x components (psi_up +- psi_dn)/sqrt(2)
    double norm_residual = 0.0;      // |1 - trapezoid norm|

    // Hermite-series evaluation at arbitrary x (used by root refinement)
    void eval(double x, double& up, double& dn) const;
};

RealSpaceState to_position(const EigenLevel& lvl, const ModelParams& p, const BasisCache& basis);
RealSpaceState to_position(const EigenLevel& lvl, const ModelParams& p, const Grid& grid);

// position-resolved, unnormalized spin expectations; wavefunctions are real,
// so s_x = 2 psi_up psi_dn, s_z = psi_up^2 - psi_dn^2 and s_y vanishes
struct SpinTexture {
    Grid grid;
    Eigen::VectorXd s_z, s_x, s_y;
    Eigen::VectorXd rho;  // psi_up^2 + psi_dn^2; equals the trajectory radius
};

SpinTexture spin_texture(const RealSpaceState& st);

// s_z, s_x at arbitrary x through the state's series evaluation
void texture_at(const RealSpaceState& st, double x, double& sz, double& sx);

} // namespace qrm
