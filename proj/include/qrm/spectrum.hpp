#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qrm/params.hpp"

namespace qrm {

struct EigenLevel {
    int j_e = 0;             // 1-based index in the merged, energy-sorted spectrum
    double energy = 0.0;     // units of Omega
    int parity = 0;          // +1 or -1
    Eigen::VectorXd coeffs;  // unit-norm amplitudes on the parity chain
    int block_dim = 0;       // chain length used (n_cut + 1)
};

struct Spectrum {
    ModelParams params;
    std::vector<EigenLevel> levels;  // ascending energy
    // gap to the next / previous merged level; gap_down absent for j_e = 1,
    // gap_up absent for the last kept level
    std::vector<std::optional<double>> gap_up, gap_down;

    const EigenLevel& level(int j_e) const;  // 1-based access
};

// Hamiltonian restricted to one parity sector. The parity operator
// sigma_x (-1)^(a^+ a) is diagonal in the sigma_x eigenbasis {|u>, |d>}
// (sigma_x |u> = +|u>), so each sector is a single chain over the Fock
// ladder with the qubit orientation alternating with photon number:
// positive parity spans |u,0>, |d,1>, |u,2>, ...; negative parity
// |d,0>, |u,1>, |d,2>, .... Site k couples to k+1 with g sqrt(k+1) off a
// u-site (rotating term) and g lambda sqrt(k+1) off a d-site
// (counter-rotating term). The result is real symmetric and tridiagonal.
Eigen::MatrixXd build_block(const ModelParams& p, int parity);

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXd vector;
};

// k lowest eigenpairs of a real symmetric matrix, values ascending,
// vectors unit-norm with a deterministic sign (largest-magnitude entry
// positive, ties broken by lowest index)
std::vector<EigenPair> diagonalize(const Eigen::MatrixXd& m, int k);

// diagonalize both parity blocks, merge, sort, label j_e and parity, fill gaps
Spectrum solve_spectrum(const ModelParams& p);

// closed-form levels of the lambda = 0 limit, used as an oracle:
// n = 0 is the decoupled ground state -Omega/2; n >= 1 selects the doublet
// (n - 1/2) omega + branch * sqrt((Omega-omega)^2/4 + g^2 n)
double jcm_energy(const ModelParams& p, int n, int branch);

} // namespace qrm
