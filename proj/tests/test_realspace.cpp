#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "qrm/errors.hpp"
#include "qrm/realspace.hpp"

using namespace qrm;

namespace {

ModelParams base_params() {
    ModelParams p;
    p.omega = 0.5;
    p.Omega = 1.0;
    p.n_levels = 8;
    return p;
}

RealSpaceState make_state(double g_in_gs, double lambda, int j_e, int n_points = 4001) {
    ModelParams p = base_params();
    p.g = g_in_gs * critical_coupling(p);
    p.lambda = lambda;
    Spectrum sp = solve_spectrum(p);
    Grid grid = Grid::make_default(p, n_points);
    return to_position(sp.level(j_e), p, grid);
}

double trapezoid(const Eigen::VectorXd& f, double h) {
    double s = 0.5 * (f[0] + f[f.size() - 1]);
    for (int i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

} // namespace

TEST_CASE("oscillator eigenfunctions at the origin") {
    Eigen::VectorXd v;
    hermite_point(0.0, 6, v);
    // pi^(-1/4) and its second-excited counterpart -pi^(-1/4)/sqrt(2)
    CHECK(v[0] == doctest::Approx(0.75112554446494248).epsilon(1e-14));
    CHECK(v[2] == doctest::Approx(-0.53112596601359846).epsilon(1e-14));
    for (int n = 1; n <= 5; n += 2) CHECK(v[n] == 0.0);  // odd functions vanish exactly
}

TEST_CASE("oscillator eigenfunction parity is exact") {
    Eigen::VectorXd a, b;
    for (double x : {0.3, 1.7, 4.9, 11.2}) {
        hermite_point(x, 30, a);
        hermite_point(-x, 30, b);
        for (int n = 0; n <= 30; ++n) {
            const double want = (n % 2 == 0) ? a[n] : -a[n];
            CHECK(b[n] == want);  // recurrence commutes with x -> -x in FP
        }
    }
}

TEST_CASE("basis orthonormality under trapezoid quadrature") {
    Grid grid;
    grid.x_min = -15.0;
    grid.x_max = 15.0;
    grid.n_points = 3001;
    const int n_max = 50;
    Eigen::MatrixXd phi = hermite_basis(grid, n_max);
    REQUIRE(phi.rows() == grid.n_points);
    REQUIRE(phi.cols() == n_max + 1);

    Eigen::MatrixXd gram = phi.transpose() * phi * grid.spacing();
    // trapezoid end-point correction is negligible: phi ~ e^-x^2/2 at |x|=15
    for (int n = 0; n <= n_max; ++n)
        for (int m = n; m <= n_max; ++m) {
            const double want = n == m ? 1.0 : 0.0;
            CHECK(std::abs(gram(n, m) - want) <= 1e-8);
        }
}

TEST_CASE("recurrence stays finite over the stable range") {
    Grid grid;
    grid.x_min = -40.0;
    grid.x_max = 40.0;
    grid.n_points = 201;
    Eigen::MatrixXd phi = hermite_basis(grid, 400);
    CHECK(phi.allFinite());
    CHECK(phi.cwiseAbs().maxCoeff() < 2.0);

    Eigen::VectorXd v;
    hermite_point(40.0, 400, v);
    CHECK(v.allFinite());
}

TEST_CASE("basis size limits") {
    Grid grid;
    grid.x_min = -5.0;
    grid.x_max = 5.0;
    grid.n_points = 11;
    CHECK_THROWS_AS(hermite_basis(grid, 401), validation_error);
    CHECK_THROWS_AS(hermite_basis(grid, -1), validation_error);
    Eigen::VectorXd v;
    CHECK_THROWS_AS(hermite_point(0.0, 401, v), validation_error);
}

TEST_CASE("grid validation") {
    Grid g;
    g.x_min = -3.0;
    g.x_max = 3.0;
    g.n_points = 100;  // even
    CHECK_THROWS_AS(g.validate(), validation_error);
    g.n_points = 101;
    CHECK_NOTHROW(g.validate());
    g.x_max = -4.0;
    CHECK_THROWS_AS(g.validate(), validation_error);
}

TEST_CASE("default grid is symmetric with odd point count") {
    ModelParams p = base_params();
    p.g = 1.2;
    p.lambda = 1.5;
    Grid g = Grid::make_default(p);
    CHECK(g.symmetric());
    CHECK(g.n_points % 2 == 1);
    CHECK(g.point((g.n_points - 1) / 2) == 0.0);
    // grid points come in exact negation pairs
    for (int i : {0, 17, 1234, g.n_points / 2}) CHECK(g.point(i) == -g.point(g.n_points - 1 - i));
}

TEST_CASE("decoupled ground state factorizes") {
    ModelParams p = base_params();
    p.g = 0.0;
    p.n_levels = 4;
    Spectrum sp = solve_spectrum(p);
    Grid grid = Grid::make_default(p);
    RealSpaceState st = to_position(sp.level(1), p, grid);

    CHECK(st.energy == doctest::Approx(-0.5).epsilon(1e-12));
    // spin part is the lower sigma_x eigenstate: psi_dn = -psi_up, both phi_0/sqrt(2)
    Eigen::VectorXd v;
    const double s = st.psi_up[(grid.n_points - 1) / 2] > 0 ? 1.0 : -1.0;  // global sign free
    for (int i = 0; i < grid.n_points; i += 400) {
        hermite_point(grid.point(i), 0, v);
        CHECK(st.psi_up[i] * s == doctest::Approx(v[0] / std::sqrt(2.0)).epsilon(1e-10));
        CHECK(st.psi_dn[i] == doctest::Approx(-st.psi_up[i]).epsilon(1e-12));
    }
}

TEST_CASE("component mirror relation fixed by parity") {
    for (auto [g, l, j] : {std::tuple{1.0, 0.2, 5}, {1.5, 0.2, 1}, {1.2, 1.5, 5}}) {
        RealSpaceState st = make_state(g, l, j);
        const double P = st.parity;
        // on the grid (exact negation pairs)
        double worst = 0.0;
        const int n = st.grid.n_points;
        for (int i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(st.psi_dn[i] - P * st.psi_up[n - 1 - i]));
        CHECK(worst <= 1e-9);
        // off the grid through the series evaluation
        std::mt19937 rng(12345);
        std::uniform_real_distribution<double> ux(-6.0, 6.0);
        for (int k = 0; k < 1000; ++k) {
            const double x = ux(rng);
            double up1, dn1, up2, dn2;
            st.eval(x, up1, dn1);
            st.eval(-x, up2, dn2);
            CHECK(std::abs(dn1 - P * up2) <= 1e-9);
        }
    }
}

TEST_CASE("position-space norm is preserved") {
    for (auto [g, l, j] : {std::tuple{0.5, 0.0, 1}, {1.5, 0.2, 5}, {2.2, 1.2, 5}, {4.4, 0.2, 1}}) {
        RealSpaceState st = make_state(g, l, j);
        CHECK(st.norm_residual <= 1e-6);
        Eigen::VectorXd density = st.psi_up.array().square() + st.psi_dn.array().square();
        CHECK(trapezoid(density, st.grid.spacing()) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("quadrature residual shrinks under grid refinement") {
    RealSpaceState coarse = make_state(1.5, 0.2, 5, 4001);
    RealSpaceState fine = make_state(1.5, 0.2, 5, 8001);
    CHECK(fine.norm_residual <= 1e-8);
    CHECK(fine.norm_residual <= coarse.norm_residual + 1e-12);
}

TEST_CASE("too coarse a grid is rejected, not silently integrated") {
    ModelParams p = base_params();
    p.g = 0.5 * critical_coupling(p);
    p.lambda = 0.5;
    Spectrum sp = solve_spectrum(p);
    Grid grid = Grid::make_default(p, 5);
    CHECK_THROWS_AS(to_position(sp.level(1), p, grid), numerical_error);
}

TEST_CASE("too narrow a grid is rejected") {
    ModelParams p = base_params();
    p.g = 4.4 * critical_coupling(p);
    p.lambda = 0.2;
    Spectrum sp = solve_spectrum(p);
    Grid grid;
    grid.x_min = -2.0;  // wavepacket displaced well past this
    grid.x_max = 2.0;
    grid.n_points = 801;
    CHECK_THROWS_AS(to_position(sp.level(1), p, grid), numerical_error);
}

TEST_CASE("node pairs show up as component sign changes") {
    // each node pair contributes one node per spin component
    RealSpaceState st = make_state(4.4, 0.2, 1);
    const double amp = st.psi_up.cwiseAbs().maxCoeff();
    int flips = 0, last = 0;
    for (int i = 0; i < st.grid.n_points; ++i) {
        if (std::abs(st.psi_up[i]) < 1e-8 * amp) continue;
        const int s = st.psi_up[i] > 0 ? 1 : -1;
        if (last != 0 && s != last) ++flips;
        last = s;
    }
    CHECK(flips == 2);
}

TEST_CASE("spin texture identities") {
    for (auto [g, l, j] : {std::tuple{1.0, 0.2, 5}, {1.7, 3.0, 5}, {4.4, 0.2, 1}}) {
        RealSpaceState st = make_state(g, l, j);
        SpinTexture tx = spin_texture(st);
        const int n = st.grid.n_points;
        const double scale = tx.rho.maxCoeff();

        CHECK(tx.s_y.cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(tx.s_z[(n - 1) / 2] == 0.0);  // |psi_up| = |psi_dn| at x = 0 exactly

        double even_err = 0.0, odd_err = 0.0, radius_err = 0.0;
        for (int i = 0; i < n; ++i) {
            even_err = std::max(even_err, std::abs(tx.s_x[i] - tx.s_x[n - 1 - i]));
            odd_err = std::max(odd_err, std::abs(tx.s_z[i] + tx.s_z[n - 1 - i]));
            radius_err = std::max(radius_err, std::abs(std::hypot(tx.s_z[i], tx.s_x[i]) - tx.rho[i]));
        }
        CHECK(even_err <= 1e-9 * scale);
        CHECK(odd_err <= 1e-9 * scale);
        // (s_z, s_x) lies on the circle of radius rho: the texture never
        // leaves the disk and touches it everywhere
        CHECK(radius_err <= 1e-12 * scale);
    }
}

TEST_CASE("texture series evaluation matches the grid arrays") {
    RealSpaceState st = make_state(1.2, 1.5, 5);
    SpinTexture tx = spin_texture(st);
    const double scale = tx.rho.maxCoeff();
    for (int i = 100; i < st.grid.n_points; i += 617) {
        double sz, sx;
        texture_at(st, st.grid.point(i), sz, sx);
        CHECK(std::abs(sz - tx.s_z[i]) <= 1e-10 * scale);
        CHECK(std::abs(sx - tx.s_x[i]) <= 1e-10 * scale);
    }
}

TEST_CASE("basis cache can be shared between states") {
    ModelParams p = base_params();
    p.g = 1.2 * critical_coupling(p);
    p.lambda = 1.5;
    Spectrum sp = solve_spectrum(p);
    Grid grid = Grid::make_default(p);
    BasisCache basis = make_basis(grid, p.n_cut);
    RealSpaceState a = to_position(sp.level(5), p, basis);
    RealSpaceState b = to_position(sp.level(5), p, grid);
    CHECK((a.psi_up - b.psi_up).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.psi_dn - b.psi_dn).cwiseAbs().maxCoeff() == 0.0);

    Grid other = grid;
    other.n_points = grid.n_points - 2;
    Spectrum sp2 = solve_spectrum(p);
    CHECK_THROWS_AS(to_position(sp2.level(1), p, make_basis(other, p.n_cut - 1)),
                    validation_error);
}
