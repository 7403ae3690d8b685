// SPDX-License-Identifier: MIT
//
// Command line front end: synthetic problem generation, coupled and
// individual completion, phase-transition sweeps, method comparison and
// risk-bound tables. File formats are documented in include/ctrc/io.hpp;
// indices in files and flags are 1-based.

#include "ctrc/harness.hpp"
#include "ctrc/io.hpp"
#include "ctrc/risk_bound.hpp"
#include "ctrc/solver.hpp"
#include "ctrc/tr.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ctrc;

namespace {

Shape parse_shape(const std::string& text) {
    Shape shape;
    std::string cleaned = text;
    for (char& c : cleaned)
        if (c == 'x' || c == 'X' || c == ',')
            c = ' ';
    std::istringstream in(cleaned);
    Index v;
    while (in >> v)
        shape.push_back(v);
    if (shape.empty())
        throw CLI::ValidationError("shape", "expected a shape like 10x10x10");
    return shape;
}

struct GlobalOptions {
    std::uint64_t seed = 0;
    int threads = 1;
    double tol = 1e-8;
    int max_iters = 200;
    std::string out_dir = ".";

    SolverConfig config() const {
        SolverConfig cfg;
        cfg.seed = seed;
        cfg.threads = threads;
        cfg.parallel_rows = threads > 1;
        cfg.tol = tol;
        cfg.max_iters = max_iters;
        return cfg;
    }
};

std::string joined(const fs::path& dir, const std::string& name) {
    return (dir / name).string();
}

void print_report_summary(const SolveReport& rep) {
    std::cout << "iterations: " << rep.iterations << "\n";
    if (!rep.objective.empty())
        std::cout << "final objective: " << rep.objective.back() << "\n";
    if (!rep.relative_change.empty())
        std::cout << "final relative change: " << rep.relative_change.back() << "\n";
    for (std::size_t n = 0; n < rep.rmse.size(); ++n)
        if (!rep.rmse[n].empty())
            std::cout << "rmse tensor " << n + 1 << ": " << rep.rmse[n].back() << "\n";
    std::cout << "wall seconds: " << rep.wall_seconds << "\n";
}

int run_generate(const GlobalOptions& g, const std::vector<std::string>& shapes, int n_tensors,
                 Index rank, int coupled_modes, Index coupled_dim, std::vector<double> rates,
                 bool no_truth) {
    SyntheticSpec spec;
    for (const auto& s : shapes)
        spec.shapes.push_back(parse_shape(s));
    if (spec.shapes.size() == 1 && n_tensors > 1)
        spec.shapes.assign(static_cast<std::size_t>(n_tensors), spec.shapes[0]);
    spec.rank = rank;
    spec.shared_modes = coupled_modes;
    spec.coupled_dim = coupled_dim;
    if (rates.size() == 1 && spec.shapes.size() > 1)
        rates.assign(spec.shapes.size(), rates[0]);
    spec.sampling_rates = rates;
    spec.seed = g.seed;

    const SyntheticProblem prob = generate_synthetic(spec);
    fs::create_directories(g.out_dir);
    const fs::path dir(g.out_dir);

    std::vector<std::string> tensor_files, truth_files;
    for (std::size_t n = 0; n < prob.problem.tensors.size(); ++n) {
        const std::string tname = "t" + std::to_string(n + 1) + ".coo";
        write_coo(joined(dir, tname), prob.problem.tensors[n], prob.problem.masks[n]);
        tensor_files.push_back(tname);
        if (!no_truth) {
            const std::string dname = "t" + std::to_string(n + 1) + "_truth.dense";
            write_dense(joined(dir, dname), prob.ground_truth[n]);
            truth_files.push_back(dname);
        }
        std::cout << "tensor " << n + 1 << ": " << prob.problem.masks[n].count()
                  << " observed entries -> " << tname << "\n";
    }
    write_manifest(joined(dir, "problem.manifest"), tensor_files, truth_files, prob.problem.spec,
                   g.config());
    std::cout << "manifest: " << joined(dir, "problem.manifest") << "\n";
    return 0;
}

int run_complete(const GlobalOptions& g, const std::string& manifest_path, bool use_svd_init,
                 bool have_seed, bool have_tol, bool have_iters) {
    Manifest m = read_manifest(manifest_path);
    // command line overrides beat manifest values
    if (have_seed)
        m.config.seed = g.seed;
    if (have_tol)
        m.config.tol = g.tol;
    if (have_iters)
        m.config.max_iters = g.max_iters;
    if (g.threads > 1) {
        m.config.threads = g.threads;
        m.config.parallel_rows = true;
    }
    if (use_svd_init)
        m.config.init = InitMethod::TrSvdZeroFill;

    const SolveResult res = solve_ctrc(m.problem, m.config, m.ground_truth);

    fs::create_directories(g.out_dir);
    const fs::path dir(g.out_dir);
    for (std::size_t n = 0; n < res.factors.size(); ++n) {
        write_factors(joined(dir, "factors_" + std::to_string(n + 1) + ".trf"), res.factors[n]);
        write_dense(joined(dir, "recon_" + std::to_string(n + 1) + ".dense"),
                    res.reconstructions[n]);
    }
    write_report(joined(dir, "report.txt"), res.report);
    print_report_summary(res.report);
    return 0;
}

int run_als(const GlobalOptions& g, const std::string& coo_path, const std::string& rank_text,
            const std::string& truth_path) {
    const CooData coo = read_coo(coo_path);
    const Shape ranks = parse_shape(rank_text);
    TrRank rank(ranks.size() == 1
                    ? std::vector<Index>(static_cast<std::size_t>(coo.tensor.order()), ranks[0])
                    : ranks);

    const auto [factors, report] = tr_als_complete(coo.tensor, coo.mask, rank, g.config());

    fs::create_directories(g.out_dir);
    const fs::path dir(g.out_dir);
    const DenseTensor recon = tr_contract(factors);
    write_factors(joined(dir, "factors.trf"), factors);
    write_dense(joined(dir, "recon.dense"), recon);
    write_report(joined(dir, "report.txt"), report);
    print_report_summary(report);
    if (!truth_path.empty())
        std::cout << "rmse vs truth: " << rmse(recon, read_dense(truth_path)) << "\n";
    return 0;
}

int run_phase(const GlobalOptions& g, bool paper_scale, const std::string& shape_text,
              std::vector<double> sr1, std::vector<double> sr2, std::vector<Index> ranks,
              std::vector<int> dims_c, int reps, double threshold) {
    ExperimentGrid grid;
    SyntheticSpec base;
    if (paper_scale) {
        base.shapes.assign(2, Shape{20, 20, 20, 20});
        for (int i = 1; i <= 20; ++i)
            grid.sr1.push_back(0.005 * i);
        for (int i = 1; i <= 4; ++i)
            grid.sr2.push_back(0.05 * i);
        for (Index r = 2; r <= 8; ++r)
            grid.ranks.push_back(r);
        grid.coupled_modes = {1, 2, 3};
    } else {
        base.shapes.assign(2, parse_shape(shape_text));
        grid.sr1 = sr1;
        grid.sr2 = sr2;
        grid.ranks = ranks;
        grid.coupled_modes = dims_c;
    }
    grid.repetitions = reps;
    grid.success_threshold = threshold;
    base.rank = grid.ranks.front();
    base.shared_modes = grid.coupled_modes.front();
    base.sampling_rates.assign(2, grid.sr2.front());
    base.seed = g.seed;

    SolverConfig cfg = g.config();
    cfg.threads = 1; // cells are the parallel unit
    cfg.parallel_rows = false;

    const PhaseResult result = run_phase_transition(grid, base, cfg, g.threads, &std::cerr);
    const auto files = write_phase_csv(result, g.out_dir);
    for (const auto& f : files)
        std::cout << "wrote " << f << "\n";
    return 0;
}

int run_compare(const GlobalOptions& g, const std::vector<std::string>& truth_paths,
                std::vector<double> rates, std::vector<Index> ranks, int coupled_modes,
                Index coupled_dim, int reps, const std::string& out_name) {
    ComparisonSpec spec;
    for (const auto& p : truth_paths)
        spec.truths.push_back(read_dense(p));
    if (rates.size() == 1 && spec.truths.size() > 1)
        rates.assign(spec.truths.size(), rates[0]);
    spec.sampling_rates = rates;
    spec.shared_modes = coupled_modes;
    spec.coupled_dim = coupled_dim;
    spec.ranks = ranks;
    spec.repetitions = reps;
    spec.seed = g.seed;

    const auto rows = run_comparison(spec, g.config(), &std::cerr);
    fs::create_directories(g.out_dir);
    const std::string out = joined(g.out_dir, out_name);
    write_comparison_csv(out, rows);
    std::cout << "wrote " << out << "\n";
    for (const auto& r : rows)
        std::cout << "rank " << r.rank << " " << r.method << " tensor " << r.tensor
                  << ": rmse " << r.rmse_mean << " +/- " << r.rmse_std << " (" << r.seconds_mean
                  << " s, " << r.failed_runs << " failed)\n";
    return 0;
}

int run_bound(const GlobalOptions& g, BoundParams p, const std::string& sweep, double from,
              double to, int steps, const std::string& out_name, bool do_eps_search) {
    if (do_eps_search) {
        const EpsilonSearchResult r =
            epsilon_search(p.a, p.b, p.k, 100000, g.seed, -1.0, 1.0, 401);
        std::cout << "epsilon* = " << r.epsilon << " (moment mismatch " << r.mismatch << ")\n";
        p.epsilon = r.epsilon;
    }

    auto set_param = [&](BoundParams& q, double v) {
        if (sweep == "t1")
            q.T1 = v;
        else if (sweep == "t2")
            q.T2 = v;
        else if (sweep == "k")
            q.k = v;
        else if (sweep == "epsilon")
            q.epsilon = v;
        else if (sweep == "L")
            q.L = static_cast<int>(v);
        else if (sweep == "delta")
            q.delta = v;
        else
            throw CLI::ValidationError("--sweep", "unknown parameter: " + sweep);
    };

    std::vector<std::vector<std::string>> rows;
    const int n = sweep.empty() ? 1 : steps;
    for (int i = 0; i < n; ++i) {
        BoundParams q = p;
        double v = 0.0;
        if (!sweep.empty()) {
            v = steps > 1 ? from + (to - from) * i / (steps - 1) : from;
            set_param(q, v);
        }
        std::vector<std::string> row{sweep.empty() ? std::string("-") : format_double(v)};
        try {
            const CoupledBoundResult c = coupled_bound(q, q.epsilon);
            row.push_back(format_double(c.value));
            row.push_back(std::to_string(c.case_used));
            row.push_back(c.series.converged ? "1" : "0");
        } catch (const std::exception&) {
            row.insert(row.end(), {"nan", "-", "0"});
        }
        for (int t : {1, 2}) {
            try {
                row.push_back(format_double(individual_bound(q, t)));
            } catch (const std::exception&) {
                row.push_back("nan");
            }
        }
        try {
            row.push_back(format_double(supremum_bound(q)));
        } catch (const std::exception&) {
            row.push_back("nan");
        }
        rows.push_back(std::move(row));
    }

    fs::create_directories(g.out_dir);
    const std::string out = joined(g.out_dir, out_name);
    write_csv(out, {sweep.empty() ? "param" : sweep, "coupled", "case", "series_converged",
                    "individual_1", "individual_2", "supremum"},
              rows);
    std::cout << "wrote " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled tensor-ring completion toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "Master random seed");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    auto* tol_opt = app.add_option("--tol", g.tol, "Relative-change stopping tolerance");
    auto* iters_opt = app.add_option("--max-iters", g.max_iters, "Iteration cap");
    app.add_option("--out-dir", g.out_dir, "Output directory");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic coupled problem");
    std::vector<std::string> gen_shapes{"10x10x10x10"};
    int gen_tensors = 2;
    Index gen_rank = 3;
    int gen_coupled = 3;
    Index gen_gamma = 0;
    std::vector<double> gen_rates{0.3};
    bool gen_no_truth = false;
    gen->add_option("--shape", gen_shapes, "Tensor shape, e.g. 10x10x10x10 (repeat per tensor)");
    gen->add_option("--tensors", gen_tensors, "Tensor count when one shape is given");
    gen->add_option("--rank", gen_rank, "Uniform TR rank");
    gen->add_option("--coupled-modes", gen_coupled, "Number of shared leading modes");
    gen->add_option("--coupled-dim", gen_gamma, "Shared block size (0 = full rank)");
    gen->add_option("--sr", gen_rates, "Sampling rate per tensor (repeat or broadcast)");
    gen->add_flag("--no-truth", gen_no_truth, "Skip writing ground-truth dense files");

    // complete
    auto* cmp = app.add_subcommand("complete", "Solve a coupled completion problem");
    std::string manifest_path;
    bool svd_init = false;
    cmp->add_option("manifest", manifest_path, "Problem manifest")->required();
    cmp->add_flag("--svd-init", svd_init, "Initialize from the zero-filled decomposition");

    // als
    auto* als = app.add_subcommand("als", "Individual completion of a single tensor");
    std::string als_coo, als_rank = "3", als_truth;
    als->add_option("tensor", als_coo, "Observed tensor (COO text v1)")->required();
    als->add_option("--rank", als_rank, "TR rank (single value or per-bond list)");
    als->add_option("--truth", als_truth, "Ground-truth dense file for an RMSE report");

    // phase
    auto* phase = app.add_subcommand("phase", "Phase-transition sweep");
    bool paper_scale = false;
    std::string phase_shape = "10x10x10x10";
    std::vector<double> phase_sr1{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
    std::vector<double> phase_sr2{0.1, 0.3};
    std::vector<Index> phase_ranks{2, 3, 4, 5};
    std::vector<int> phase_dims{1, 2, 3};
    int phase_reps = 1;
    double phase_threshold = 1e-6;
    phase->add_flag("--paper-scale", paper_scale,
                    "Full-size sweep: 20^4 tensors, SR1 0.005..0.1, SR2 0.05..0.2, ranks 2..8");
    phase->add_option("--shape", phase_shape, "Tensor shape for the desk-scale sweep");
    phase->add_option("--sr1", phase_sr1, "First-tensor sampling rates");
    phase->add_option("--sr2", phase_sr2, "Second-tensor sampling rates");
    phase->add_option("--ranks", phase_ranks, "TR ranks to sweep");
    phase->add_option("--coupled-modes", phase_dims, "Shared-mode counts to sweep");
    phase->add_option("--reps", phase_reps, "Repetitions per cell");
    phase->add_option("--threshold", phase_threshold, "Success threshold on tensor-1 RMSE");

    // compare
    auto* comp = app.add_subcommand("compare", "Coupled vs individual completion table");
    std::vector<std::string> comp_truths;
    std::vector<double> comp_rates{0.3};
    std::vector<Index> comp_ranks{2, 3, 4};
    int comp_coupled = 1;
    Index comp_gamma = 0;
    int comp_reps = 10;
    std::string comp_out = "comparison.csv";
    comp->add_option("--truth", comp_truths, "Ground-truth dense file (repeat per tensor)")
        ->required();
    comp->add_option("--sr", comp_rates, "Sampling rate per tensor (repeat or broadcast)");
    comp->add_option("--ranks", comp_ranks, "TR ranks to sweep");
    comp->add_option("--coupled-modes", comp_coupled, "Number of shared leading modes");
    comp->add_option("--coupled-dim", comp_gamma, "Shared block size (0 = full rank)");
    comp->add_option("--reps", comp_reps, "Repetitions per rank");
    comp->add_option("--out", comp_out, "Output CSV name");

    // bound
    auto* bnd = app.add_subcommand("bound", "Excess-risk bound tables");
    BoundParams bp;
    std::string bound_manifest, sweep_param;
    double sweep_from = 0.0, sweep_to = 0.0;
    int sweep_steps = 1;
    std::string bound_out = "bound.csv";
    bool eps_search = false;
    bnd->add_option("--manifest", bound_manifest, "Key-value file with bound parameters");
    bnd->add_option("--a", bp.a, "Student-t shape (> 3)");
    bnd->add_option("--b", bp.b, "Student-t scale");
    bnd->add_option("--k", bp.k, "Per-core element count I*R^2");
    bnd->add_option("--d1", bp.D1, "Order of the first tensor");
    bnd->add_option("--d2", bp.D2, "Order of the second tensor");
    bnd->add_option("--coupled-modes,--L", bp.L, "Coupled mode count");
    bnd->add_option("--t1", bp.T1, "Training samples, first tensor");
    bnd->add_option("--t2", bp.T2, "Training samples, second tensor");
    bnd->add_option("--s1", bp.S1, "Test samples, first tensor");
    bnd->add_option("--s2", bp.S2, "Test samples, second tensor");
    bnd->add_option("--lipschitz", bp.lipschitz, "Loss Lipschitz constant");
    bnd->add_option("--delta", bp.delta, "Confidence level");
    bnd->add_option("--epsilon", bp.epsilon, "F moment-matching parameter");
    bnd->add_flag("--epsilon-search", eps_search, "Grid-search epsilon by moment matching first");
    bnd->add_option("--sweep", sweep_param, "Parameter to sweep: t1 t2 k epsilon L delta");
    bnd->add_option("--from", sweep_from, "Sweep start");
    bnd->add_option("--to", sweep_to, "Sweep end");
    bnd->add_option("--steps", sweep_steps, "Sweep point count");
    bnd->add_option("--out", bound_out, "Output CSV name");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return run_generate(g, gen_shapes, gen_tensors, gen_rank, gen_coupled, gen_gamma,
                                gen_rates, gen_no_truth);
        if (cmp->parsed())
            return run_complete(g, manifest_path, svd_init, !app.get_option("--seed")->empty(),
                                !tol_opt->empty(), !iters_opt->empty());
        if (als->parsed())
            return run_als(g, als_coo, als_rank, als_truth);
        if (phase->parsed())
            return run_phase(g, paper_scale, phase_shape, phase_sr1, phase_sr2, phase_ranks,
                             phase_dims, phase_reps, phase_threshold);
        if (comp->parsed())
            return run_compare(g, comp_truths, comp_rates, comp_ranks, comp_coupled, comp_gamma,
                               comp_reps, comp_out);
        if (bnd->parsed()) {
            if (!bound_manifest.empty()) {
                const KeyValues kv = KeyValues::parse_file(bound_manifest);
                if (kv.has("a")) bp.a = kv.number("a");
                if (kv.has("b")) bp.b = kv.number("b");
                if (kv.has("k")) bp.k = kv.number("k");
                if (kv.has("d1")) bp.D1 = static_cast<int>(kv.integer("d1"));
                if (kv.has("d2")) bp.D2 = static_cast<int>(kv.integer("d2"));
                if (kv.has("coupled_modes")) bp.L = static_cast<int>(kv.integer("coupled_modes"));
                if (kv.has("t1")) bp.T1 = kv.number("t1");
                if (kv.has("t2")) bp.T2 = kv.number("t2");
                if (kv.has("s1")) bp.S1 = kv.number("s1");
                if (kv.has("s2")) bp.S2 = kv.number("s2");
                if (kv.has("lipschitz")) bp.lipschitz = kv.number("lipschitz");
                if (kv.has("delta")) bp.delta = kv.number("delta");
                if (kv.has("epsilon")) bp.epsilon = kv.number("epsilon");
            }
            return run_bound(g, bp, sweep_param, sweep_from, sweep_to, sweep_steps, bound_out,
                             eps_search);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
