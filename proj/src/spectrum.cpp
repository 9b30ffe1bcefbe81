#include "qrm/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qrm/errors.hpp"

namespace qrm {

const EigenLevel& Spectrum::level(int j_e) const {
    if (j_e < 1 || j_e > int(levels.size()))
        throw validation_error("level index j_e out of range: " + std::to_string(j_e) +
                               " (have " + std::to_string(levels.size()) + ")");
    return levels[j_e - 1];
}

Eigen::MatrixXd build_block(const ModelParams& p, int parity) {
    p.validate();
    if (parity != 1 && parity != -1) throw validation_error("parity must be +1 or -1");

    const int dim = p.n_cut + 1;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
        const bool up_site = (parity == +1) == (k % 2 == 0);
        m(k, k) = k * p.omega + (up_site ? 0.5 : -0.5) * p.Omega;
        if (k + 1 < dim) {
            // rotating term hops off a u-site, counter-rotating off a d-site
            const double w = (up_site ? p.g : p.g * p.lambda) * std::sqrt(double(k + 1));
            m(k, k + 1) = w;
            m(k + 1, k) = w;
        }
    }
    return m;
}

std::vector<EigenPair> diagonalize(const Eigen::MatrixXd& m, int k) {
    if (m.rows() != m.cols() || m.rows() < 1) throw validation_error("matrix must be square");
    if (k < 1 || k > m.rows())
        throw validation_error("eigenpair count k must lie in [1, dim]");
    if (m != m.transpose()) throw validation_error("matrix must be symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw numerical_error("symmetric eigensolver did not converge (dim " +
                              std::to_string(m.rows()) + ")");

    const double scale =
        std::max({1.0, std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(m.rows() - 1))});
    std::vector<EigenPair> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
        EigenPair ep{es.eigenvalues()(i), es.eigenvectors().col(i)};
        // deterministic gauge: dominant entry positive, first one on ties
        int best = 0;
        for (int j = 1; j < ep.vector.size(); ++j)
            if (std::abs(ep.vector(j)) > std::abs(ep.vector(best))) best = j;
        if (ep.vector(best) < 0.0) ep.vector = -ep.vector;

        const double resid = (m * ep.vector - ep.value * ep.vector).norm();
        if (resid > 1e-9 * scale * m.rows())
            throw numerical_error("eigenpair residual " + std::to_string(resid) +
                                  " exceeds tolerance at eigenvalue " +
                                  std::to_string(ep.value));
        out.push_back(std::move(ep));
    }
    return out;
}

Spectrum solve_spectrum(const ModelParams& p) {
    p.validate();
    Spectrum s;
    s.params = p;
    s.levels.reserve(2 * p.n_levels);
    for (int parity : {+1, -1}) {
        auto pairs = diagonalize(build_block(p, parity), p.n_levels);
        for (auto& ep : pairs)
            s.levels.push_back(EigenLevel{0, ep.value, parity, std::move(ep.vector), p.n_cut + 1});
    }
    std::stable_sort(s.levels.begin(), s.levels.end(), [](const EigenLevel& a, const EigenLevel& b) {
        if (a.energy != b.energy) return a.energy < b.energy;
        return a.parity > b.parity;  // deterministic order at exact crossings
    });

    const int n = int(s.levels.size());
    s.gap_up.assign(n, std::nullopt);
    s.gap_down.assign(n, std::nullopt);
    for (int i = 0; i < n; ++i) {
        s.levels[i].j_e = i + 1;
        if (i + 1 < n) {
            const double gap = s.levels[i + 1].energy - s.levels[i].energy;
            s.gap_up[i] = gap;
            s.gap_down[i + 1] = gap;
        }
    }
    return s;
}

double jcm_energy(const ModelParams& p, int n, int branch) {
    if (n < 0) throw validation_error("excitation number must be non-negative");
    if (n == 0) return -0.5 * p.Omega;
    if (branch != 1 && branch != -1) throw validation_error("branch must be +1 or -1");
    const double d = 0.5 * (p.Omega - p.omega);
    return (n - 0.5) * p.omega + branch * std::sqrt(d * d + p.g * p.g * double(n));
}

} // namespace qrm
