#pragma once

namespace qrm {

// Parameters of the anisotropic Rabi Hamiltonian
//   H = omega a^+ a + (Omega/2) sigma_x
//       + g [ (s_- a^+ + s_+ a) + lambda (s_+ a^+ + s_- a) ],
// with s_+- = (sigma_z -+ i sigma_y)/2. Energies are measured in units of
// Omega, positions in oscillator quadrature units of the cavity mode.
struct ModelParams {
    double omega = 0.5;   // cavity frequency
    double Omega = 1.0;   // qubit splitting, the internal energy unit
    double g = 0.0;       // coupling strength
    double lambda = 1.0;  // weight of the counter-rotating term
    int n_cut = 120;      // Fock cutoff per parity chain (chain length n_cut+1)
    int n_levels = 16;    // eigenpairs kept per parity block

    // set by dual_params: spin/quadrature axes are relabeled (x -> p), the
    // numbers themselves are computed exactly as in the position frame
    bool momentum_frame = false;

    void validate() const;
};

// characteristic coupling scale sqrt(omega*Omega)/2, the natural unit for g
double critical_coupling(const ModelParams& p);

// maps lambda -> -lambda through the unitary that swaps the position and
// momentum quadratures; toggles momentum_frame so downstream consumers know
// the spin texture lives in the (sigma_y, sigma_x) plane instead
ModelParams dual_params(const ModelParams& p);

} // namespace qrm
