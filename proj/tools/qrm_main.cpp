// qrm: spectra, single-state reports, parameter scans and topological code
// strings for the anisotropic Rabi model, as CSV or JSON.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qrm/errors.hpp"
#include "qrm/scan.hpp"

namespace {

using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt17(*v) : std::string{}; }

double amplify(double v, double p) {
    if (p == 1.0) return v;
    return (v < 0.0 ? -1.0 : 1.0) * std::pow(std::abs(v), p);
}

struct CommonOpts {
    double omega = 0.5;
    double g = 0.0;
    std::string g_unit = "omega";
    double lambda = 1.0;
    int j_e = 1;
    int n_cut = 120;
    int n_levels = 16;
    int grid_points = 4001;
    std::string format = "csv";
    std::string out;
    int workers = 1;
    double amplify_p = 1.0;
    double eps_tail = 1e-6;
    double tol_axis = 1e-3;
    double gap_zero_tol = 1e-6;
    std::vector<std::string> sweeps;
    bool no_resume = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_sweep) {
    cmd->add_option("--omega", o.omega, "cavity frequency, units of Omega");
    cmd->add_option("--g", o.g, "coupling strength");
    cmd->add_option("--g-unit", o.g_unit, "unit of --g and g sweep bounds: omega | gs")
        ->check(CLI::IsMember({"omega", "gs"}));
    cmd->add_option("--lambda", o.lambda,
                    "counter-rotating weight; negative values are mapped to the "
                    "momentum-frame dual at |lambda|");
    cmd->add_option("--j-e", o.j_e, "1-based level index in the merged spectrum");
    cmd->add_option("--n-cut", o.n_cut, "Fock cutoff per parity chain");
    cmd->add_option("--n-levels", o.n_levels, "eigenpairs kept per parity block");
    cmd->add_option("--grid-points", o.grid_points, "position grid size (odd)");
    cmd->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--out", o.out, "output path (default: stdout)");
    cmd->add_option("--workers", o.workers, "worker threads for scans");
    cmd->add_option("--amplify", o.amplify_p,
                    "display exponent for trajectory coordinates, sign(v)|v|^p");
    cmd->add_option("--eps-tail", o.eps_tail, "tail suppression threshold");
    cmd->add_option("--tol-axis", o.tol_axis, "knot exclusion band, relative");
    cmd->add_option("--gap-zero-tol", o.gap_zero_tol, "crossing gap threshold, units of Omega");
    if (with_sweep)
        cmd->add_option("--sweep", o.sweeps,
                        "AXIS=lo:hi:n with AXIS in {g, lambda}; may repeat for a 2D scan");
    cmd->add_flag("--no-resume", o.no_resume, "ignore an existing scan output file");
}

qrm::ModelParams make_params(const CommonOpts& o) {
    qrm::ModelParams p;
    p.omega = o.omega;
    p.g = o.g;
    p.lambda = o.lambda;
    p.n_cut = o.n_cut;
    p.n_levels = o.n_levels;
    if (o.g_unit == "gs") p.g *= qrm::critical_coupling(p);
    if (p.lambda < 0.0) p = qrm::dual_params(p);
    return p;
}

qrm::TopoOptions make_topo(const CommonOpts& o) {
    qrm::TopoOptions t;
    t.eps_tail = o.eps_tail;
    t.tol_axis_rel = o.tol_axis;
    return t;
}

struct SweepArg {
    qrm::SweepAxis axis;
    double lo, hi;
    int count;
};

SweepArg parse_sweep(const std::string& s, const CommonOpts& o, const qrm::ModelParams& p) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
        throw qrm::validation_error("--sweep wants AXIS=lo:hi:n, got '" + s + "'");
    const std::string axis = s.substr(0, eq);
    SweepArg a{};
    if (axis == "g")
        a.axis = qrm::SweepAxis::g;
    else if (axis == "lambda")
        a.axis = qrm::SweepAxis::lambda;
    else
        throw qrm::validation_error("sweep axis must be g or lambda, got '" + axis + "'");
    const std::string rest = s.substr(eq + 1);
    double lo, hi;
    int n;
    char c1, c2;
    std::istringstream iss(rest);
    if (!(iss >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || !iss.eof())
        throw qrm::validation_error("--sweep wants AXIS=lo:hi:n, got '" + s + "'");
    if (a.axis == qrm::SweepAxis::g && o.g_unit == "gs") {
        const double gs = qrm::critical_coupling(p);
        lo *= gs;
        hi *= gs;
    }
    a.lo = lo;
    a.hi = hi;
    a.count = n;
    return a;
}

// stdout or a file, chosen once
class Output {
  public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::trunc);
            if (!file_) throw qrm::validation_error("cannot open output file '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

json params_json(const qrm::ModelParams& p) {
    return json{{"omega", p.omega},
                {"Omega", p.Omega},
                {"g", p.g},
                {"lambda", p.lambda},
                {"n_cut", p.n_cut},
                {"n_levels", p.n_levels},
                {"g_s", qrm::critical_coupling(p)},
                {"frame", p.momentum_frame ? "momentum" : "position"}};
}

void params_csv(std::ostream& os, const qrm::ModelParams& p) {
    os << "# omega = " << fmt17(p.omega) << "\n";
    os << "# Omega = " << fmt17(p.Omega) << "\n";
    os << "# g = " << fmt17(p.g) << "\n";
    os << "# lambda = " << fmt17(p.lambda) << "\n";
    os << "# n_cut = " << p.n_cut << "\n";
    os << "# n_levels = " << p.n_levels << "\n";
    os << "# g_s = " << fmt17(qrm::critical_coupling(p)) << "\n";
    os << "# frame = " << (p.momentum_frame ? "momentum" : "position") << "\n";
}

json topo_json(const qrm::TopoSummary& t) {
    return json{{"parity", t.parity},
                {"n_Z", t.n_Z},
                {"n_zx", t.n_zx},
                {"n_w", t.n_w},
                {"n_w_alg", t.n_w_alg},
                {"n_aw", t.n_aw},
                {"n_ex", t.n_ex},
                {"n_dk", t.n_dk},
                {"tuple", json::array({t.n_Z, t.n_w, t.n_ex, t.n_dk})},
                {"code", t.code},
                {"flags", t.flags}};
}

// ---------------------------------------------------------------- spectrum

int cmd_spectrum(const CommonOpts& o) {
    const qrm::ModelParams p = make_params(o);
    Output out(o.out);
    std::ostream& os = out.stream();

    if (!o.sweeps.empty()) {
        if (o.sweeps.size() != 1)
            throw qrm::validation_error("spectrum accepts a single --sweep");
        const SweepArg a = parse_sweep(o.sweeps[0], o, p);
        qrm::SweepSpec spec;
        spec.axis = a.axis;
        spec.lo = a.lo;
        spec.hi = a.hi;
        spec.count = a.count;
        spec.j_e = o.j_e;
        spec.base = p;
        spec.grid_points = o.grid_points;
        spec.gap_zero_tol = o.gap_zero_tol;
        spec.validate();

        // energies only: no topology on this path
        std::vector<qrm::ScanRecord> rows;
        rows.reserve(size_t(spec.count));
        for (int i = 0; i < spec.count; ++i) {
            qrm::ModelParams q = p;
            const double v = spec.value(i);
            (a.axis == qrm::SweepAxis::g ? q.g : q.lambda) = v;
            qrm::ScanRecord rec;
            rec.g = q.g;
            rec.lambda = q.lambda;
            rec.j_e = o.j_e;
            try {
                const qrm::Spectrum sp = qrm::solve_spectrum(q);
                const qrm::EigenLevel& lvl = sp.level(o.j_e);
                rec.energy = lvl.energy;
                rec.parity = lvl.parity;
                rec.gap_up = sp.gap_up[size_t(o.j_e - 1)];
                rec.gap_down = sp.gap_down[size_t(o.j_e - 1)];
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = e.what();
            }
            rows.push_back(std::move(rec));
        }

        if (o.format == "json") {
            json data = json::array();
            for (const auto& r : rows) {
                json row{{"g", r.g},       {"lambda", r.lambda}, {"j_e", r.j_e},
                         {"energy", r.energy}, {"parity", r.parity}, {"ok", r.ok}};
                row["gap_up"] = r.gap_up ? json(*r.gap_up) : json(nullptr);
                row["gap_down"] = r.gap_down ? json(*r.gap_down) : json(nullptr);
                if (!r.ok) row["error"] = r.error;
                data.push_back(std::move(row));
            }
            os << json{{"schema", "qrm-spectrum-1"}, {"params", params_json(p)},
                       {"data", data}}
                      .dump(2)
               << "\n";
        } else {
            os << "# qrm-spectrum-1\n";
            params_csv(os, p);
            os << "# columns: g,lambda,j_e,energy,parity,gap_down,gap_up,ok,error\n";
            for (const auto& r : rows)
                os << fmt17(r.g) << ',' << fmt17(r.lambda) << ',' << r.j_e << ','
                   << fmt17(r.energy) << ',' << r.parity << ',' << fmt_opt(r.gap_down) << ','
                   << fmt_opt(r.gap_up) << ',' << (r.ok ? 1 : 0) << ',' << r.error << "\n";
        }
        bool all_ok = true;
        for (const auto& r : rows) all_ok = all_ok && r.ok;
        return all_ok ? exit_ok : exit_numerical;
    }

    p.validate();
    const qrm::Spectrum sp = qrm::solve_spectrum(p);
    if (o.format == "json") {
        json data = json::array();
        for (size_t i = 0; i < sp.levels.size(); ++i) {
            const auto& l = sp.levels[i];
            json row{{"j_e", l.j_e}, {"energy", l.energy}, {"parity", l.parity}};
            row["gap_up"] = sp.gap_up[i] ? json(*sp.gap_up[i]) : json(nullptr);
            row["gap_down"] = sp.gap_down[i] ? json(*sp.gap_down[i]) : json(nullptr);
            data.push_back(std::move(row));
        }
        os << json{{"schema", "qrm-spectrum-1"}, {"params", params_json(p)}, {"data", data}}
                  .dump(2)
           << "\n";
    } else {
        os << "# qrm-spectrum-1\n";
        params_csv(os, p);
        os << "# columns: j_e,energy,parity,gap_down,gap_up\n";
        for (size_t i = 0; i < sp.levels.size(); ++i) {
            const auto& l = sp.levels[i];
            os << l.j_e << ',' << fmt17(l.energy) << ',' << l.parity << ','
               << fmt_opt(sp.gap_down[i]) << ',' << fmt_opt(sp.gap_up[i]) << "\n";
        }
    }
    return exit_ok;
}

// ---------------------------------------------------------------- state

int cmd_state(const CommonOpts& o) {
    const qrm::ModelParams p = make_params(o);
    const qrm::StateReport r = qrm::analyze_state(p, o.j_e, o.grid_points, make_topo(o));
    Output out(o.out);
    std::ostream& os = out.stream();

    if (o.format == "json") {
        json zeros_x = json::array(), zeros_z = json::array();
        for (const auto& z : r.topo.x_zeros)
            zeros_x.push_back(json{{"x", z.x},
                                   {"companion_sign", z.companion_sign},
                                   {"source", z.source == qrm::ZeroSource::psi_up ? "psi_up"
                                                                                 : "psi_dn"}});
        for (const auto& z : r.topo.z_zeros)
            zeros_z.push_back(json{{"x", z.x}, {"companion_sign", z.companion_sign}});
        json knots = json::array();
        for (const auto& k : r.topo.knots.knots)
            knots.push_back(json{{"x1", k.x1},
                                 {"x2", k.x2},
                                 {"sz", k.sz},
                                 {"sx", k.sx},
                                 {"angle_deg", k.angle_deg},
                                 {"shallow", k.shallow}});

        const auto& tx = r.texture;
        json arrays;
        auto col = [&](const Eigen::VectorXd& v) {
            json a = json::array();
            for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
            return a;
        };
        arrays["x"] = json::array();
        for (double x : tx.grid.points()) arrays["x"].push_back(x);
        arrays["psi_up"] = col(r.state.psi_up);
        arrays["psi_dn"] = col(r.state.psi_dn);
        arrays["tilde_p"] = col(r.state.tilde_p);
        arrays["tilde_m"] = col(r.state.tilde_m);
        arrays["s_z"] = col(tx.s_z);
        arrays["s_x"] = col(tx.s_x);
        arrays["s_y"] = col(tx.s_y);
        arrays["rho"] = col(tx.rho);

        json traj = json::array();
        for (int i = 0; i < tx.s_z.size(); ++i)
            traj.push_back(json::array(
                {amplify(tx.s_z(i), o.amplify_p), amplify(tx.s_x(i), o.amplify_p)}));

        json data{{"level",
                   {{"j_e", r.level.j_e},
                    {"energy", r.level.energy},
                    {"parity", r.level.parity},
                    {"gap_up", r.gap_up ? json(*r.gap_up) : json(nullptr)},
                    {"gap_down", r.gap_down ? json(*r.gap_down) : json(nullptr)}}},
                  {"topo", topo_json(r.topo.summary)},
                  {"support",
                   {{"x_lo", tx.grid.point(r.topo.support.i_lo)},
                    {"x_hi", tx.grid.point(r.topo.support.i_hi)},
                    {"rho_max", r.topo.support.rho_max},
                    {"tail_sign_sx", r.topo.support.tail_sign_sx}}},
                  {"x_zeros", zeros_x},
                  {"z_zeros", zeros_z},
                  {"knots", knots},
                  {"arrays", arrays},
                  {"trajectory", traj},
                  {"amplify", o.amplify_p}};
        os << json{{"schema", "qrm-state-1"}, {"params", params_json(p)}, {"data", data}}
                  .dump(2)
           << "\n";
    } else {
        const auto& t = r.topo.summary;
        os << "# qrm-state-1\n";
        params_csv(os, p);
        os << "# j_e = " << r.level.j_e << "\n";
        os << "# energy = " << fmt17(r.level.energy) << "\n";
        os << "# parity = " << r.level.parity << "\n";
        os << "# gap_down = " << fmt_opt(r.gap_down) << "\n";
        os << "# gap_up = " << fmt_opt(r.gap_up) << "\n";
        os << "# n_Z = " << t.n_Z << "\n";
        os << "# n_zx = " << fmt17(t.n_zx) << "\n";
        os << "# n_w = " << t.n_w << "\n";
        os << "# n_w_alg = " << t.n_w_alg << "\n";
        os << "# n_aw = " << t.n_aw << "\n";
        os << "# n_ex = " << t.n_ex << "\n";
        os << "# n_dk = " << t.n_dk << "\n";
        os << "# tuple = {" << t.n_Z << ',' << t.n_w << ',' << t.n_ex << ',' << t.n_dk
           << "}\n";
        os << "# code = " << t.code << "\n";
        os << "# flags = " << t.flags << "\n";
        os << "# x_zeros =";
        for (const auto& z : r.topo.x_zeros) os << ' ' << fmt17(z.x);
        os << "\n# z_zeros =";
        for (const auto& z : r.topo.z_zeros) os << ' ' << fmt17(z.x);
        os << "\n# knots_x1 =";
        for (const auto& k : r.topo.knots.knots) os << ' ' << fmt17(k.x1);
        os << "\n# amplify = " << fmt17(o.amplify_p) << "\n";
        os << "# columns: x,psi_up,psi_dn,tilde_p,tilde_m,s_z,s_x,s_y,rho,traj_z,traj_x\n";
        const auto& tx = r.texture;
        for (int i = 0; i < tx.grid.n_points; ++i)
            os << fmt17(tx.grid.point(i)) << ',' << fmt17(r.state.psi_up(i)) << ','
               << fmt17(r.state.psi_dn(i)) << ',' << fmt17(r.state.tilde_p(i)) << ','
               << fmt17(r.state.tilde_m(i)) << ',' << fmt17(tx.s_z(i)) << ','
               << fmt17(tx.s_x(i)) << ',' << fmt17(tx.s_y(i)) << ',' << fmt17(tx.rho(i)) << ','
               << fmt17(amplify(tx.s_z(i), o.amplify_p)) << ','
               << fmt17(amplify(tx.s_x(i), o.amplify_p)) << "\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------- scan

const char* scan_columns =
    "g,lambda,j_e,energy,parity,gap_down,gap_up,n_Z,n_zx,n_w,n_w_alg,n_aw,n_ex,n_dk,flags,ok,"
    "code,error";

void scan_row_csv(std::ostream& os, const qrm::ScanRecord& r) {
    std::string err = r.error;
    for (char& c : err)
        if (c == '\n' || c == ',') c = ';';
    os << fmt17(r.g) << ',' << fmt17(r.lambda) << ',' << r.j_e << ',' << fmt17(r.energy) << ','
       << r.parity << ',' << fmt_opt(r.gap_down) << ',' << fmt_opt(r.gap_up) << ','
       << r.topo.n_Z << ',' << fmt17(r.topo.n_zx) << ',' << r.topo.n_w << ',' << r.topo.n_w_alg
       << ',' << r.topo.n_aw << ',' << r.topo.n_ex << ',' << r.topo.n_dk << ',' << r.topo.flags
       << ',' << (r.ok ? 1 : 0) << ',' << r.topo.code << ',' << err << "\n";
}

json scan_row_json(const qrm::ScanRecord& r) {
    json row{{"g", r.g},           {"lambda", r.lambda}, {"j_e", r.j_e},
             {"energy", r.energy}, {"parity", r.parity}, {"topo", topo_json(r.topo)},
             {"ok", r.ok}};
    row["gap_up"] = r.gap_up ? json(*r.gap_up) : json(nullptr);
    row["gap_down"] = r.gap_down ? json(*r.gap_down) : json(nullptr);
    if (!r.ok) row["error"] = r.error;
    return row;
}

// parse one CSV data row written by scan_row_csv; returns false on shape mismatch
bool parse_scan_row(const std::string& line, qrm::ScanRecord& r) {
    std::vector<std::string> f;
    size_t start = 0;
    for (int k = 0; k < 17; ++k) {
        const size_t pos = line.find(',', start);
        if (pos == std::string::npos) return false;
        f.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    f.push_back(line.substr(start));  // error, may contain anything but newline
    try {
        r.g = std::stod(f[0]);
        r.lambda = std::stod(f[1]);
        r.j_e = std::stoi(f[2]);
        r.energy = std::stod(f[3]);
        r.parity = std::stoi(f[4]);
        r.gap_down = f[5].empty() ? std::nullopt : std::optional<double>(std::stod(f[5]));
        r.gap_up = f[6].empty() ? std::nullopt : std::optional<double>(std::stod(f[6]));
        r.topo.parity = r.parity;
        r.topo.n_Z = std::stoi(f[7]);
        r.topo.n_zx = std::stod(f[8]);
        r.topo.n_w = std::stoi(f[9]);
        r.topo.n_w_alg = std::stoi(f[10]);
        r.topo.n_aw = std::stoi(f[11]);
        r.topo.n_ex = std::stoi(f[12]);
        r.topo.n_dk = std::stoi(f[13]);
        r.topo.flags = unsigned(std::stoul(f[14]));
        r.ok = f[15] == "1";
        r.topo.code = f[16];
        r.error = f[17];
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

std::string axis_header(const char* name, const qrm::GridSpec& a) {
    std::ostringstream os;
    os << "# " << name << " = " << fmt17(a.lo) << ':' << fmt17(a.hi) << ':' << a.count;
    return os.str();
}

void write_scan_csv(std::ostream& os, const qrm::ModelParams& base, const qrm::PhaseDiagram& pd) {
    os << "# qrm-scan-1\n";
    params_csv(os, base);
    os << axis_header("g-axis", pd.g_axis) << "\n";
    os << axis_header("lambda-axis", pd.l_axis) << "\n";
    os << "# j_e = " << pd.j_e << "\n";
    os << "# columns: " << scan_columns << "\n";
    for (const auto& r : pd.cells) scan_row_csv(os, r);
    os << "# boundaries = " << pd.boundaries.size() << "\n";
    for (const auto& b : pd.boundaries) {
        os << "# boundary: " << b.ia << ',' << b.ib << ',' << (b.parity_flip ? 1 : 0) << ','
           << (b.conventional ? 1 : 0) << ',' << fmt17(b.min_gap) << ',';
        for (size_t k = 0; k < b.jumps.size(); ++k) os << (k ? ";" : "") << b.jumps[k];
        os << "\n";
    }
    os << "# near_boundary =";
    for (size_t i = 0; i < pd.near_boundary.size(); ++i)
        if (pd.near_boundary[i]) os << ' ' << i;
    os << "\n";
}

// cells recovered from an earlier partial write of the same scan
std::vector<std::optional<qrm::ScanRecord>> read_resume(const std::string& path,
                                                        const qrm::GridSpec& ga,
                                                        const qrm::GridSpec& la, int j_e) {
    std::vector<std::optional<qrm::ScanRecord>> done(size_t(ga.count) * size_t(la.count));
    std::ifstream in(path);
    if (!in) return done;
    std::string line;
    bool schema_seen = false;
    auto locate = [](const qrm::GridSpec& a, double v) -> int {
        for (int i = 0; i < a.count; ++i)
            if (std::abs(a.value(i) - v) <= 1e-9 * (1.0 + std::abs(v))) return i;
        return -1;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.find("qrm-scan-1") != std::string::npos) schema_seen = true;
            continue;
        }
        if (!schema_seen) return {};  // not our file, resume refused
        qrm::ScanRecord r;
        if (!parse_scan_row(line, r)) continue;
        if (r.j_e != j_e || !r.ok) continue;
        const int ig = locate(ga, r.g), il = locate(la, r.lambda);
        if (ig < 0 || il < 0) continue;
        done[size_t(il) * size_t(ga.count) + size_t(ig)] = std::move(r);
    }
    return done;
}

int cmd_scan(const CommonOpts& o) {
    const qrm::ModelParams p = make_params(o);
    if (o.sweeps.empty())
        throw qrm::validation_error("scan needs --sweep (one for a line, two for a grid)");
    if (o.sweeps.size() > 2) throw qrm::validation_error("scan accepts at most two --sweep");

    std::vector<SweepArg> args;
    for (const auto& s : o.sweeps) args.push_back(parse_sweep(s, o, p));

    if (args.size() == 1) {
        qrm::SweepSpec spec;
        spec.axis = args[0].axis;
        spec.lo = args[0].lo;
        spec.hi = args[0].hi;
        spec.count = args[0].count;
        spec.j_e = o.j_e;
        spec.base = p;
        spec.grid_points = o.grid_points;
        spec.topo = make_topo(o);
        spec.gap_zero_tol = o.gap_zero_tol;
        spec.validate();

        const std::vector<qrm::ScanRecord> rows = qrm::sweep_line(spec);
        const std::vector<qrm::GapEvent> events = qrm::classify_gap_events(spec, rows);

        Output out(o.out);
        std::ostream& os = out.stream();
        if (o.format == "json") {
            json data = json::array();
            for (const auto& r : rows) data.push_back(scan_row_json(r));
            json evs = json::array();
            for (const auto& e : events)
                evs.push_back(json{{"location", e.location},
                                   {"gap_at_min", e.gap_at_min},
                                   {"side", e.side},
                                   {"crossing", e.crossing},
                                   {"parity_flip", e.parity_flip},
                                   {"node_jump", e.node_jump},
                                   {"partial", e.partial}});
            os << json{{"schema", "qrm-scan-1"},
                       {"params", params_json(p)},
                       {"data", json{{"rows", data}, {"events", evs}}}}
                      .dump(2)
               << "\n";
        } else {
            os << "# qrm-scan-1\n";
            params_csv(os, p);
            os << "# sweep = " << (spec.axis == qrm::SweepAxis::g ? "g" : "lambda") << ':'
               << fmt17(spec.lo) << ':' << fmt17(spec.hi) << ':' << spec.count << "\n";
            os << "# j_e = " << spec.j_e << "\n";
            os << "# columns: " << scan_columns << "\n";
            for (const auto& r : rows) scan_row_csv(os, r);
            os << "# events = " << events.size() << "\n";
            for (const auto& e : events)
                os << "# event: " << fmt17(e.location) << ',' << fmt17(e.gap_at_min) << ','
                   << e.side << ',' << (e.crossing ? 1 : 0) << ',' << (e.parity_flip ? 1 : 0)
                   << ',' << e.node_jump << ',' << (e.partial ? 1 : 0) << "\n";
        }
        bool all_ok = true;
        for (const auto& r : rows) all_ok = all_ok && r.ok;
        return all_ok ? exit_ok : exit_numerical;
    }

    // 2D scan
    if (args[0].axis == args[1].axis)
        throw qrm::validation_error("a 2D scan needs one g sweep and one lambda sweep");
    const SweepArg& ga = args[0].axis == qrm::SweepAxis::g ? args[0] : args[1];
    const SweepArg& la = args[0].axis == qrm::SweepAxis::lambda ? args[0] : args[1];
    qrm::GridSpec g_axis{ga.lo, ga.hi, ga.count};
    qrm::GridSpec l_axis{la.lo, la.hi, la.count};
    if (g_axis.count < 8 || l_axis.count < 8)
        throw qrm::validation_error("a 2D scan needs at least an 8x8 grid");

    std::vector<std::optional<qrm::ScanRecord>> done;
    if (!o.out.empty() && !o.no_resume && std::filesystem::exists(o.out) &&
        o.format == "csv")
        done = read_resume(o.out, g_axis, l_axis, o.j_e);
    const int n = g_axis.count * l_axis.count;
    done.resize(size_t(n));

    std::vector<qrm::ScanRecord> cells(static_cast<size_t>(n));
    std::vector<int> todo;
    for (int i = 0; i < n; ++i) {
        if (done[size_t(i)])
            cells[size_t(i)] = *done[size_t(i)];
        else
            todo.push_back(i);
    }
    const qrm::TopoOptions topo = make_topo(o);
    qrm::parallel_for(int(todo.size()), o.workers, [&](int k) {
        const int idx = todo[size_t(k)];
        qrm::ModelParams q = p;
        q.g = g_axis.value(idx % g_axis.count);
        q.lambda = l_axis.value(idx / g_axis.count);
        cells[size_t(idx)] = qrm::scan_point(q, o.j_e, o.grid_points, topo);
    });

    const qrm::PhaseDiagram pd =
        qrm::assemble_phase_diagram(g_axis, l_axis, o.j_e, std::move(cells));

    Output out(o.out);
    std::ostream& os = out.stream();
    if (o.format == "json") {
        json data = json::array();
        for (const auto& r : pd.cells) data.push_back(scan_row_json(r));
        json bounds = json::array();
        for (const auto& b : pd.boundaries)
            bounds.push_back(json{{"ia", b.ia},
                                  {"ib", b.ib},
                                  {"jumps", b.jumps},
                                  {"parity_flip", b.parity_flip},
                                  {"conventional", b.conventional},
                                  {"min_gap", b.min_gap}});
        json nb = json::array();
        for (size_t i = 0; i < pd.near_boundary.size(); ++i)
            if (pd.near_boundary[i]) nb.push_back(int(i));
        os << json{{"schema", "qrm-scan-1"},
                   {"params", params_json(p)},
                   {"data", json{{"g_axis", axis_header("g-axis", pd.g_axis).substr(2)},
                                 {"lambda_axis", axis_header("lambda-axis", pd.l_axis).substr(2)},
                                 {"j_e", pd.j_e},
                                 {"cells", data},
                                 {"boundaries", bounds},
                                 {"near_boundary", nb}}}}
                  .dump(2)
           << "\n";
    } else {
        write_scan_csv(os, p, pd);
    }
    bool all_ok = true;
    for (const auto& r : pd.cells) all_ok = all_ok && r.ok;
    return all_ok ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------- code

int cmd_code(const CommonOpts& o) {
    const qrm::ModelParams p = make_params(o);
    const qrm::StateReport r = qrm::analyze_state(p, o.j_e, o.grid_points, make_topo(o));
    Output out(o.out);
    std::ostream& os = out.stream();
    const auto& t = r.topo.summary;
    if (o.format == "json") {
        os << json{{"schema", "qrm-code-1"}, {"params", params_json(p)},
                   {"data", topo_json(t)}}
                  .dump(2)
           << "\n";
    } else {
        os << t.code << "\n";
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anisotropic Rabi model spectra, spin textures and topological codes"};
    app.require_subcommand(1);

    CommonOpts os_, ot_, oc_, od_;
    CLI::App* c_spectrum = app.add_subcommand("spectrum", "energy levels, parities and gaps");
    add_common(c_spectrum, os_, true);
    CLI::App* c_state = app.add_subcommand("state", "full single-state report");
    add_common(c_state, ot_, false);
    CLI::App* c_scan = app.add_subcommand("scan", "line sweeps and 2D phase diagrams");
    add_common(c_scan, oc_, true);
    CLI::App* c_code = app.add_subcommand("code", "topological code string of one state");
    add_common(c_code, od_, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_validation;
    }

    try {
        if (c_spectrum->parsed()) return cmd_spectrum(os_);
        if (c_state->parsed()) return cmd_state(ot_);
        if (c_scan->parsed()) return cmd_scan(oc_);
        if (c_code->parsed()) return cmd_code(od_);
    } catch (const qrm::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical;
    }
    return exit_ok;
}
