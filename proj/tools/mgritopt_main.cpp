// Command-line driver: sequential runs, MGRIT solves, iteration-count tables,
// and theoretical speedup estimates.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgritopt/mgritopt.hpp"

namespace fs = std::filesystem;
using namespace mgritopt;

namespace {

struct CommonOpts {
    std::string problem = "mp1";
    long long n = 40;
    double lambda = 900.0;
    std::uint64_t seed = 0;
    double tol = 1e-8;
    int threads = 1;
    std::string out = ".";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--problem", o.problem, "Problem kind")
        ->check(CLI::IsMember({"mp1", "mp2-1d", "mp2-2d"}))
        ->capture_default_str();
    cmd->add_option("--n", o.n, "Spatial points per dimension")->capture_default_str();
    cmd->add_option("--lambda", o.lambda, "Penalty parameter (mp2 only)")->capture_default_str();
    cmd->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--tol", o.tol, "Relative halting tolerance")->capture_default_str();
    cmd->add_option("--threads", o.threads, "Worker threads for the mgrit sweeps")
        ->envname("MGRITOPT_THREADS")
        ->capture_default_str();
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

ProblemInstance make_problem(const CommonOpts& o) {
    const auto n = static_cast<Eigen::Index>(o.n);
    if (o.problem == "mp1") return build_mp1(n, o.seed);
    if (o.problem == "mp2-1d") return build_mp2(1, n, o.lambda, o.seed);
    return build_mp2(2, n, o.lambda, o.seed);
}

fs::path ensure_out(const CommonOpts& o) {
    fs::path dir(o.out);
    fs::create_directories(dir);
    return dir;
}

/// Fine-propagator run that fixes the all-at-once horizon.
SequentialResult horizon_run(const ProblemInstance& prob, double tol, long long cap) {
    return run_sequential(prob, fine_kind(prob), tol, cap, nullptr, Eigen::Index(1) << 40);
}

PropagatorKind method_from_string(const std::string& s) {
    for (PropagatorKind k :
         {PropagatorKind::GradientDescent, PropagatorKind::ProximalPoint,
          PropagatorKind::ProximalGradient, PropagatorKind::AlternatingProximal})
        if (s == to_string(k)) return k;
    throw CLI::ValidationError("--method", "unknown method: " + s);
}

MgritVariant variant_from_string(const std::string& s) {
    if (s == "auto") return MgritVariant::Auto;
    if (s == "linear") return MgritVariant::Linear;
    if (s == "fas") return MgritVariant::Fas;
    throw CLI::ValidationError("--variant", "unknown variant: " + s);
}

/// Accepts "2..7", "2,3,5", or "4".
std::vector<int> parse_level_range(const std::string& s) {
    std::vector<int> out;
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
        const int lo = std::stoi(s.substr(0, dots));
        const int hi = std::stoi(s.substr(dots + 2));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    }
    if (out.empty()) throw CLI::ValidationError("--levels", "empty level range: " + s);
    for (int v : out)
        if (v < 2) throw CLI::ValidationError("--levels", "levels must be at least 2");
    return out;
}

void write_solution_csv(const fs::path& path, const ProblemInstance& prob, const Vec& u) {
    const Vec uhat = unshift(prob, u);
    std::vector<std::vector<double>> rows;
    if (prob.A.d == 1) {
        for (Eigen::Index i = 0; i < prob.size(); ++i)
            rows.push_back({static_cast<double>(i), static_cast<double>(i + 1) * prob.A.h, u[i],
                            uhat[i]});
        write_csv(path, {"index", "x", "u", "u_unshifted"}, rows);
    } else {
        for (Eigen::Index j = 0; j < prob.A.n; ++j)
            for (Eigen::Index i = 0; i < prob.A.n; ++i) {
                const Eigen::Index q = j * prob.A.n + i;
                rows.push_back({static_cast<double>(q), static_cast<double>(i + 1) * prob.A.h,
                                static_cast<double>(j + 1) * prob.A.h, u[q], uhat[q]});
            }
        write_csv(path, {"index", "x", "y", "u", "u_unshifted"}, rows);
    }
}

int run_seq(const CommonOpts& o, const std::string& method, long long nt, long long stride,
            double step) {
    const auto prob = make_problem(o);
    const PropagatorKind kind = method.empty() ? fine_kind(prob) : method_from_string(method);
    const auto seq = run_sequential(prob, kind, o.tol, nt, nullptr,
                                    static_cast<Eigen::Index>(stride), step);
    const auto dir = ensure_out(o);
    write_json(dir / "seq_report.json", sequential_report_to_json(prob, seq));
    write_trajectory_checkpoint(dir / "trajectory.bin", prob, seq);
    std::cout << "seq: " << (seq.converged ? "converged" : "hit step cap") << " after "
              << seq.n_t << " steps, final gradient " << seq.gradient_norms.back() << "\n"
              << "seq: wrote " << (dir / "seq_report.json").string() << " and "
              << (dir / "trajectory.bin").string() << "\n";
    return seq.converged ? 0 : 2;
}

int run_mgrit(const CommonOpts& o, int m, int levels, long long nt, const std::string& variant,
              int max_iter, double step, bool figures, bool adaptive, long long horizon_guess) {
    const auto prob = make_problem(o);
    MgritConfig cfg;
    cfg.m = m;
    cfg.levels = levels;
    cfg.tol = o.tol;
    cfg.max_iter = max_iter;
    cfg.variant = variant_from_string(variant);
    cfg.threads = o.threads;
    cfg.step = step;
    const auto dir = ensure_out(o);

    if (adaptive) {
        long long guess = horizon_guess;
        if (guess <= 0) {
            guess = 1;
            for (int l = 1; l < levels; ++l) guess *= m;
            guess = std::max<long long>(guess, 1024);
        }
        const auto rep = adaptive_horizon_solve(prob, cfg, static_cast<Eigen::Index>(guess));
        write_json(dir / "adaptive_report.json", adaptive_report_to_json(rep));
        write_solution_csv(dir / "solution.csv", prob, rep.final_point);
        std::cout << "mgrit: adaptive " << to_string(rep.halted) << " after "
                  << rep.windows.size() << " windows, " << rep.total_steps
                  << " total steps, gradient " << rep.achieved_gradient << " (target "
                  << rep.target_gradient << ")\n"
                  << "mgrit: wrote " << (dir / "adaptive_report.json").string() << "\n";
        return rep.halted == HaltReason::Converged ? 0 : 2;
    }

    if (nt <= 0) {
        const auto seq = horizon_run(prob, o.tol, 10000000);
        if (!seq.converged) {
            std::cerr << "mgrit: sequential horizon run hit the step cap\n";
            return 2;
        }
        nt = seq.n_t;
        std::cout << "mgrit: derived nt=" << nt << " from a sequential run\n";
    }
    cfg.nt = static_cast<Eigen::Index>(nt);
    cfg.collect_figure_data = figures;

    const auto rep = mgrit_solve(prob, cfg);
    write_json(dir / "mgrit_report.json", report_to_json(rep));
    write_solution_csv(dir / "solution.csv", prob, rep.final_point);
    if (figures) {
        const auto hist = extract_figure_data(rep, FigurePanel::ConvergenceHistory);
        write_csv(dir / "convergence.csv", hist.header, hist.rows);
        const auto rc = extract_figure_data(rep, FigurePanel::ResidualPerCpoint);
        write_csv(dir / "residual_cpoints.csv", rc.header, rc.rows);
        const auto gc = extract_figure_data(rep, FigurePanel::GradientPerCpoint);
        write_csv(dir / "gradient_cpoints.csv", gc.header, gc.rows);
        const auto sp = extract_figure_data(rep, FigurePanel::SpatialResidual, &prob);
        write_csv(dir / "spatial_residual.csv", sp.header, sp.rows);
    }
    std::cout << "mgrit: " << to_string(rep.halted) << " in " << rep.iterations
              << " iterations (nt=" << rep.nt << ", padded " << rep.nt_padded << ", m=" << rep.m
              << ", levels=" << rep.levels << ", variant=" << rep.variant << ", rho~" << rep.rho_r
              << ")\n"
              << "mgrit: wrote " << (dir / "mgrit_report.json").string() << "\n";
    return rep.halted == HaltReason::Converged ? 0 : 2;
}

int run_tables(const CommonOpts& o, const std::vector<int>& ms, const std::string& levels_spec,
               long long nt, const std::string& variant, int max_iter) {
    const auto prob = make_problem(o);
    const auto levels = parse_level_range(levels_spec);
    if (nt <= 0) {
        const auto seq = horizon_run(prob, o.tol, 10000000);
        if (!seq.converged) {
            std::cerr << "tables: sequential horizon run hit the step cap\n";
            return 2;
        }
        nt = seq.n_t;
        std::cout << "tables: derived nt=" << nt << " from a sequential run\n";
    }

    const auto dir = ensure_out(o);
    std::ofstream os(dir / "iterations.csv");
    if (!os) {
        std::cerr << "tables: cannot open " << (dir / "iterations.csv").string() << "\n";
        return 1;
    }
    os << "m";
    for (int lv : levels) os << ",levels_" << lv;
    os << '\n';
    for (int m : ms) {
        os << m;
        std::cout << "m=" << m << ":";
        for (int lv : levels) {
            long long span = 1;
            bool feasible = true;
            for (int l = 1; l < lv; ++l) {
                span *= m;
                if (span > nt) feasible = false;
            }
            if (!feasible) {
                os << ',';
                std::cout << " -";
                continue;
            }
            MgritConfig cfg;
            cfg.m = m;
            cfg.levels = lv;
            cfg.nt = static_cast<Eigen::Index>(nt);
            cfg.tol = o.tol;
            cfg.max_iter = max_iter;
            cfg.variant = variant_from_string(variant);
            cfg.threads = o.threads;
            const auto rep = mgrit_solve(prob, cfg);
            const int cell = rep.halted == HaltReason::Converged ? rep.iterations : -1;
            os << ',' << cell;
            std::cout << ' ' << cell;
        }
        os << '\n';
        std::cout << '\n';
    }
    std::cout << "tables: wrote " << (dir / "iterations.csv").string() << "\n";
    return 0;
}

int run_speedup(const CommonOpts& o, long long nt, double alpha, int max_iter) {
    const auto prob = make_problem(o);
    if (nt <= 0) {
        const auto seq = horizon_run(prob, o.tol, 10000000);
        if (!seq.converged) {
            std::cerr << "speedup: sequential horizon run hit the step cap\n";
            return 2;
        }
        nt = seq.n_t;
        std::cout << "speedup: derived nt=" << nt << " from a sequential run\n";
    }
    if (alpha <= 0.0) {
        alpha = measure_alpha(prob, 4);
        std::cout << "speedup: measured alpha=" << alpha << "\n";
    }

    const double n_f = static_cast<double>(nt);
    std::vector<std::vector<double>> rows;
    for (int levels : {2, 3}) {
        long m_star = levels == 2 ? optimal_m_2level(n_f, alpha) : optimal_m_3level(n_f, alpha);
        m_star = std::max(m_star, 2L);
        long long span = 1;
        for (int l = 1; l < levels; ++l) span *= m_star;
        if (span > nt) {
            std::cout << "speedup: skipping " << levels << "-level row (m*^" << (levels - 1)
                      << " exceeds nt)\n";
            continue;
        }
        MgritConfig cfg;
        cfg.m = static_cast<int>(m_star);
        cfg.levels = levels;
        cfg.nt = static_cast<Eigen::Index>(nt);
        cfg.tol = o.tol;
        cfg.max_iter = max_iter;
        cfg.threads = o.threads;
        const auto rep = mgrit_solve(prob, cfg);
        const auto est = estimate_speedup(levels, n_f, alpha, m_star, rep.iterations);
        rows.push_back({static_cast<double>(levels), static_cast<double>(est.m_star),
                        static_cast<double>(est.n_it), est.s_star, static_cast<double>(est.n_p),
                        alpha, n_f});
        std::cout << "speedup: levels=" << levels << " m*=" << est.m_star
                  << " n_it=" << est.n_it << " S*=" << est.s_star << " n_p=" << est.n_p << "\n";
    }
    const auto dir = ensure_out(o);
    write_csv(dir / "speedup.csv", {"levels", "m_star", "n_it", "s_star", "n_p", "alpha", "n_f"},
              rows);
    std::cout << "speedup: wrote " << (dir / "speedup.csv").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parallel-in-iteration optimization via multigrid reduction"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML file");

    CommonOpts seq_o, mgr_o, tab_o, spd_o;
    seq_o.tol = 1e-8;

    auto* seq = app.add_subcommand("seq", "Run the sequential optimizer");
    add_common(seq, seq_o);
    std::string seq_method;
    long long seq_nt = 10000000, seq_stride = 0;
    double seq_step = 0.0;
    seq->add_option("--method", seq_method,
                    "Propagator (gradient-descent, proximal-point, proximal-gradient, "
                    "alternating-proximal); default matches the problem");
    seq->add_option("--nt", seq_nt, "Maximum steps")->capture_default_str();
    seq->add_option("--stride", seq_stride, "Checkpoint stride (0 = automatic)")
        ->capture_default_str();
    seq->add_option("--step", seq_step, "Step size (0 = 1/L)")->capture_default_str();

    auto* mgr = app.add_subcommand("mgrit", "Solve the all-at-once system with MGRIT");
    add_common(mgr, mgr_o);
    int mgr_m = 4, mgr_levels = 2, mgr_max_iter = 100;
    long long mgr_nt = 0, mgr_guess = 0;
    double mgr_step = 0.0;
    std::string mgr_variant = "auto";
    bool mgr_figures = false, mgr_adaptive = false;
    mgr->add_option("--m", mgr_m, "Coarsening factor")->capture_default_str();
    mgr->add_option("--levels", mgr_levels, "Grid levels")->capture_default_str();
    mgr->add_option("--nt", mgr_nt, "Fine steps (0 = derive from a sequential run)")
        ->capture_default_str();
    mgr->add_option("--variant", mgr_variant, "Coarse correction (auto, linear, fas)")
        ->check(CLI::IsMember({"auto", "linear", "fas"}))
        ->capture_default_str();
    mgr->add_option("--max-iter", mgr_max_iter, "V-cycle cap")->capture_default_str();
    mgr->add_option("--step", mgr_step, "Fine step size (0 = 1/L)")->capture_default_str();
    mgr->add_flag("--figures", mgr_figures, "Write per-C-point diagnostic CSV files");
    mgr->add_flag("--adaptive", mgr_adaptive,
                  "Adaptive horizon: grow windows until the gradient target is met");
    mgr->add_option("--horizon-guess", mgr_guess, "Initial window length for --adaptive")
        ->capture_default_str();

    auto* tab = app.add_subcommand("tables", "Iteration-count table over m and level counts");
    add_common(tab, tab_o);
    std::vector<int> tab_m = {4};
    std::string tab_levels = "2..7";
    long long tab_nt = 0;
    int tab_max_iter = 100;
    std::string tab_variant = "auto";
    tab->add_option("--m", tab_m, "Coarsening factors")->capture_default_str();
    tab->add_option("--levels", tab_levels, "Level range, e.g. 2..7 or 2,3,4")
        ->capture_default_str();
    tab->add_option("--nt", tab_nt, "Fine steps (0 = derive from a sequential run)")
        ->capture_default_str();
    tab->add_option("--max-iter", tab_max_iter, "V-cycle cap")->capture_default_str();
    tab->add_option("--variant", tab_variant, "Coarse correction (auto, linear, fas)")
        ->check(CLI::IsMember({"auto", "linear", "fas"}))
        ->capture_default_str();

    auto* spd = app.add_subcommand("speedup", "Theoretical speedup estimate at optimal m");
    add_common(spd, spd_o);
    long long spd_nt = 0;
    double spd_alpha = 0.0;
    int spd_max_iter = 100;
    spd->add_option("--nt", spd_nt, "Fine steps (0 = derive from a sequential run)")
        ->capture_default_str();
    spd->add_option("--alpha", spd_alpha, "Coarse/fine step time ratio (0 = measure)")
        ->capture_default_str();
    spd->add_option("--max-iter", spd_max_iter, "V-cycle cap")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (seq->parsed()) return run_seq(seq_o, seq_method, seq_nt, seq_stride, seq_step);
        if (mgr->parsed())
            return run_mgrit(mgr_o, mgr_m, mgr_levels, mgr_nt, mgr_variant, mgr_max_iter,
                             mgr_step, mgr_figures, mgr_adaptive, mgr_guess);
        if (tab->parsed())
            return run_tables(tab_o, tab_m, tab_levels, tab_nt, tab_variant, tab_max_iter);
        if (spd->parsed()) return run_speedup(spd_o, spd_nt, spd_alpha, spd_max_iter);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
