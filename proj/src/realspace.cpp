#include "qrm/realspace.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qrm/errors.hpp"

namespace qrm {

namespace {

constexpr int kMaxHermite = 400;

// phi_0 prefactor pi^(-1/4)
double norm0() { return std::pow(std::numbers::pi, -0.25); }

} // namespace

void Grid::validate() const {
    if (!(x_min < x_max)) throw validation_error("grid needs x_min < x_max");
    if (n_points < 3 || n_points % 2 == 0)
        throw validation_error("grid n_points must be odd and at least 3");
}

double Grid::point(int i) const {
    if (symmetric()) {
        // exact negation pairs: x_i = ((i - mid)/mid) * x_max, x_mid = 0
        const int mid = (n_points - 1) / 2;
        return (double(i - mid) / double(mid)) * x_max;
    }
    return x_min + spacing() * double(i);
}

std::vector<double> Grid::points() const {
    std::vector<double> xs(n_points);
    for (int i = 0; i < n_points; ++i) xs[i] = point(i);
    return xs;
}

Grid Grid::make_default(const ModelParams& p, int n_points) {
    // displaced packet + classical turning point of the highest Fock state + margin
    const double displacement = p.g * (1.0 + std::abs(p.lambda)) / p.omega;
    const double turning = std::sqrt(2.0 * double(p.n_cut + 1));
    const double half = displacement + turning + 5.0;
    Grid g{-half, half, n_points};
    g.validate();
    return g;
}

Eigen::MatrixXd hermite_basis(const Grid& grid, int n_max) {
    grid.validate();
    if (n_max < 0 || n_max > kMaxHermite)
        throw validation_error("hermite n_max outside the stable range [0, " +
                               std::to_string(kMaxHermite) + "]");
    const double c0 = norm0();
    Eigen::MatrixXd phi(grid.n_points, n_max + 1);
    for (int i = 0; i < grid.n_points; ++i) {
        const double x = grid.point(i);
        double prev = 0.0;
        double cur = c0 * std::exp(-0.5 * x * x);
        phi(i, 0) = cur;
        for (int n = 0; n < n_max; ++n) {
            const double next =
                std::sqrt(2.0 / double(n + 1)) * x * cur - std::sqrt(double(n) / double(n + 1)) * prev;
            prev = cur;
            cur = next;
            phi(i, n + 1) = cur;
        }
    }
    return phi;
}

void hermite_point(double x, int n_max, Eigen::VectorXd& out) {
    if (n_max < 0 || n_max > kMaxHermite)
        throw validation_error("hermite n_max outside the stable range");
    out.resize(n_max + 1);
    double prev = 0.0;
    double cur = norm0() * std::exp(-0.5 * x * x);
    out(0) = cur;
    for (int n = 0; n < n_max; ++n) {
        const double next =
            std::sqrt(2.0 / double(n + 1)) * x * cur - std::sqrt(double(n) / double(n + 1)) * prev;
        prev = cur;
        cur = next;
        out(n + 1) = cur;
    }
}

BasisCache make_basis(const Grid& grid, int n_max) {
    return BasisCache{grid, n_max, hermite_basis(grid, n_max)};
}

namespace {

// split a parity-chain vector into spin-z Fock amplitudes: chain site k holds
// Fock state k with the qubit along +x on u-sites and -x on d-sites, and
// |+-x> = (|up> +- |dn>)/sqrt(2)
void unpack_chain(const EigenLevel& lvl, Eigen::VectorXd& c_up, Eigen::VectorXd& c_dn) {
    const int dim = int(lvl.coeffs.size());
    c_up.resize(dim);
    c_dn.resize(dim);
    const double r = 1.0 / std::numbers::sqrt2;
    for (int k = 0; k < dim; ++k) {
        const bool up_site = (lvl.parity == +1) == (k % 2 == 0);
        const double b = lvl.coeffs(k) * r;
        c_up(k) = b;
        c_dn(k) = up_site ? b : -b;
    }
}

double trapezoid(const Eigen::VectorXd& f, double h) {
    double s = f.sum() - 0.5 * (f(0) + f(f.size() - 1));
    return s * h;
}

} // namespace

RealSpaceState to_position(const EigenLevel& lvl, const ModelParams& p, const BasisCache& basis) {
    if (lvl.parity != 1 && lvl.parity != -1)
        throw validation_error("level carries no parity label");
    if (int(lvl.coeffs.size()) != basis.n_max + 1)
        throw validation_error("basis size does not match the level's chain length");

    RealSpaceState st;
    st.params = p;
    st.grid = basis.grid;
    st.j_e = lvl.j_e;
    st.parity = lvl.parity;
    st.energy = lvl.energy;
    unpack_chain(lvl, st.c_up, st.c_dn);
    st.psi_up = basis.phi * st.c_up;
    st.psi_dn = basis.phi * st.c_dn;
    const double r = 1.0 / std::numbers::sqrt2;
    st.tilde_p = (st.psi_up + st.psi_dn) * r;
    st.tilde_m = (st.psi_up - st.psi_dn) * r;

    const double peak =
        std::max(st.psi_up.cwiseAbs().maxCoeff(), st.psi_dn.cwiseAbs().maxCoeff());
    const int last = basis.grid.n_points - 1;
    const double edge = std::max({std::abs(st.psi_up(0)), std::abs(st.psi_dn(0)),
                                  std::abs(st.psi_up(last)), std::abs(st.psi_dn(last))});
    if (edge > 1e-8 * peak)
        throw numerical_error("grid too narrow: boundary amplitude " + std::to_string(edge) +
                              " vs peak " + std::to_string(peak));

    const Eigen::VectorXd density =
        st.psi_up.array().square().matrix() + st.psi_dn.array().square().matrix();
    st.norm_residual = std::abs(1.0 - trapezoid(density, basis.grid.spacing()));
    if (st.norm_residual > 1e-6)
        throw numerical_error("grid quadrature norm off by " + std::to_string(st.norm_residual));
    return st;
}

RealSpaceState to_position(const EigenLevel& lvl, const ModelParams& p, const Grid& grid) {
    return to_position(lvl, p, make_basis(grid, int(lvl.coeffs.size()) - 1));
}

void RealSpaceState::eval(double x, double& up, double& dn) const {
    thread_local Eigen::VectorXd buf;
    hermite_point(x, int(c_up.size()) - 1, buf);
    up = c_up.dot(buf);
    dn = c_dn.dot(buf);
}

SpinTexture spin_texture(const RealSpaceState& st) {
    SpinTexture tx;
    tx.grid = st.grid;
    tx.s_z = (st.psi_up.array().square() - st.psi_dn.array().square()).matrix();
    tx.s_x = (2.0 * st.psi_up.array() * st.psi_dn.array()).matrix();
    tx.s_y = Eigen::VectorXd::Zero(st.grid.n_points);
    tx.rho = (st.psi_up.array().square() + st.psi_dn.array().square()).matrix();
    return tx;
}

void texture_at(const RealSpaceState& st, double x, double& sz, double& sx) {
    double up = 0.0, dn = 0.0;
    st.eval(x, up, dn);
    sz = up * up - dn * dn;
    sx = 2.0 * up * dn;
}

} // namespace qrm
