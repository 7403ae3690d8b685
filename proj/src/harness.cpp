// SPDX-License-Identifier: MIT
#include "ctrc/harness.hpp"

#include "ctrc/io.hpp"
#include "ctrc/rng.hpp"
#include "ctrc/tr.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace ctrc {

void SyntheticSpec::validate() const {
    if (shapes.empty())
        throw std::invalid_argument("at least one tensor shape required");
    if (sampling_rates.size() != shapes.size())
        throw std::invalid_argument("one sampling rate per tensor required");
    if (rank < 1)
        throw std::invalid_argument("rank must be positive");
    Index min_order = std::numeric_limits<Index>::max();
    for (const auto& s : shapes) {
        shape_size(s);
        min_order = std::min(min_order, static_cast<Index>(s.size()));
    }
    if (shared_modes < 0 || shared_modes > min_order)
        throw std::invalid_argument("shared modes exceed the smallest tensor order");
    for (Index d = 0; d < shared_modes; ++d)
        for (const auto& s : shapes)
            if (s[static_cast<std::size_t>(d)] != shapes[0][static_cast<std::size_t>(d)])
                throw std::invalid_argument("shared mode dimensions must agree");
    if (coupled_dim < 0 || coupled_dim > rank)
        throw std::invalid_argument("coupled block size exceeds the rank");
    for (double sr : sampling_rates)
        if (!(sr > 0.0) || sr > 1.0)
            throw std::invalid_argument("sampling rates must lie in (0, 1]");
}

SyntheticProblem generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const int N = static_cast<int>(spec.shapes.size());
    const Index g = spec.gamma();
    Rng rng(spec.seed);

    SyntheticProblem out;
    std::vector<TrFactorSet> factors;
    factors.reserve(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        const auto& shape = spec.shapes[static_cast<std::size_t>(n)];
        factors.push_back(TrFactorSet::random_normal(
            shape, TrRank::uniform(static_cast<Index>(shape.size()), spec.rank), rng));
    }
    // shared leading blocks come from the first tensor's cores
    for (int n = 1; n < N; ++n)
        for (Index d = 0; d < spec.shared_modes; ++d) {
            DenseTensor& dst = factors[static_cast<std::size_t>(n)].core(d);
            const DenseTensor& src = factors[0].core(d);
            for (Index b = 0; b < g; ++b)
                for (Index i = 0; i < dst.dim(1); ++i)
                    for (Index a = 0; a < g; ++a)
                        dst[a + dst.dim(0) * i + dst.dim(0) * dst.dim(1) * b] =
                            src[a + src.dim(0) * i + src.dim(0) * src.dim(1) * b];
        }

    out.problem.spec.n_tensors = N;
    out.problem.spec.shared_modes = spec.shared_modes;
    if (spec.shared_modes > 0)
        out.problem.spec.coupled_dims.assign(static_cast<std::size_t>(spec.shared_modes) + 1, g);

    for (int n = 0; n < N; ++n) {
        const auto& shape = spec.shapes[static_cast<std::size_t>(n)];
        out.problem.spec.ranks.push_back(
            TrRank::uniform(static_cast<Index>(shape.size()), spec.rank));
        out.ground_truth.push_back(tr_contract(factors[static_cast<std::size_t>(n)]));

        const Index total = shape_size(shape);
        const Index count =
            static_cast<Index>(std::llround(spec.sampling_rates[static_cast<std::size_t>(n)] *
                                            static_cast<double>(total)));
        if (count < 1)
            throw std::invalid_argument("sampling rate yields an empty mask");
        ObservationMask mask(shape, rng.sample_without_replacement(total, count));
        out.problem.tensors.push_back(project(out.ground_truth.back(), mask));
        out.problem.masks.push_back(std::move(mask));
    }
    return out;
}

double rmse(const DenseTensor& estimate, const DenseTensor& truth) {
    if (!estimate.same_shape(truth))
        throw std::invalid_argument("rmse: shape mismatch");
    double e2 = 0.0;
    for (Index i = 0; i < truth.size(); ++i) {
        const double d = estimate[i] - truth[i];
        e2 += d * d;
    }
    return std::sqrt(e2 / static_cast<double>(truth.size()));
}

void ExperimentGrid::validate() const {
    if (sr1.empty() || sr2.empty() || ranks.empty() || coupled_modes.empty())
        throw std::invalid_argument("grid axes must be nonempty");
    if (repetitions < 1)
        throw std::invalid_argument("repetitions must be positive");
    if (!(success_threshold > 0.0))
        throw std::invalid_argument("success threshold must be positive");
}

PhaseResult run_phase_transition(const ExperimentGrid& grid, const SyntheticSpec& base_spec,
                                 const SolverConfig& cfg, int threads, std::ostream* progress) {
    grid.validate();
    base_spec.validate();
    if (base_spec.shapes.size() < 2)
        throw std::invalid_argument("phase sweep needs two tensors");

    PhaseResult result;
    result.grid = grid;
    for (int L : grid.coupled_modes)
        for (double sr2 : grid.sr2)
            for (Index rank : grid.ranks)
                for (double sr1 : grid.sr1) {
                    PhaseCell cell;
                    cell.L = L;
                    cell.sr2 = sr2;
                    cell.rank = rank;
                    cell.sr1 = sr1;
                    result.cells.push_back(cell);
                }

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= result.cells.size())
                return;
            PhaseCell& cell = result.cells[c];
            int successes = 0;
            double rmse_sum = 0.0;
            int measured = 0;
            for (int rep = 0; rep < grid.repetitions; ++rep) {
                SyntheticSpec s = base_spec;
                s.rank = cell.rank;
                s.shared_modes = cell.L;
                s.coupled_dim = 0; // fully shared bonds
                s.sampling_rates.assign(s.shapes.size(), cell.sr2);
                s.sampling_rates[0] = cell.sr1;
                s.seed = derive_seed(base_spec.seed, c, static_cast<std::uint64_t>(rep) + 1);
                try {
                    SyntheticProblem prob = generate_synthetic(s);
                    SolverConfig run_cfg = cfg;
                    run_cfg.seed = derive_seed(s.seed, 0xc311);
                    SolveResult sol = solve_ctrc(prob.problem, run_cfg, prob.ground_truth);
                    const double err = rmse(sol.reconstructions[0], prob.ground_truth[0]);
                    rmse_sum += err;
                    ++measured;
                    if (err < grid.success_threshold)
                        ++successes;
                } catch (const std::exception&) {
                    ++cell.errors;
                }
            }
            cell.success_fraction = static_cast<double>(successes) / grid.repetitions;
            cell.mean_rmse = measured > 0 ? rmse_sum / measured
                                          : std::numeric_limits<double>::quiet_NaN();
            if (progress) {
                std::lock_guard<std::mutex> lock(log_mutex);
                *progress << "cell L=" << cell.L << " sr2=" << cell.sr2 << " rank=" << cell.rank
                          << " sr1=" << cell.sr1 << " success=" << cell.success_fraction << '\n';
            }
        }
    };

    const int workers = std::max(1, threads);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    return result;
}

std::vector<std::string> write_phase_csv(const PhaseResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    const auto& grid = result.grid;
    for (int L : grid.coupled_modes)
        for (double sr2 : grid.sr2) {
            std::vector<std::string> header{"rank"};
            for (double sr1 : grid.sr1)
                header.push_back("sr1=" + format_double(sr1));
            std::vector<std::vector<std::string>> rows;
            for (Index rank : grid.ranks) {
                std::vector<std::string> row{std::to_string(rank)};
                for (double sr1 : grid.sr1)
                    for (const auto& cell : result.cells)
                        if (cell.L == L && cell.sr2 == sr2 && cell.rank == rank && cell.sr1 == sr1)
                            row.push_back(format_double(cell.success_fraction));
                rows.push_back(std::move(row));
            }
            std::ostringstream name;
            name << "phase_L" << L << "_sr2_" << sr2 << ".csv";
            const std::string path = (fs::path(out_dir) / name.str()).string();
            write_csv(path, header, rows);
            written.push_back(path);
        }

    std::vector<std::vector<std::string>> rows;
    for (const auto& c : result.cells)
        rows.push_back({std::to_string(c.L), format_double(c.sr2), std::to_string(c.rank),
                        format_double(c.sr1), format_double(c.success_fraction),
                        format_double(c.mean_rmse), std::to_string(c.errors)});
    const std::string summary = (fs::path(out_dir) / "phase_summary.csv").string();
    write_csv(summary, {"L", "sr2", "rank", "sr1", "success_fraction", "mean_rmse", "errors"}, rows);
    written.push_back(summary);
    return written;
}

namespace {

struct RunningStats {
    int n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double stddev() const { return n > 1 ? std::sqrt(m2 / (n - 1)) : 0.0; }
};

} // namespace

std::vector<ComparisonRow> run_comparison(const ComparisonSpec& spec, const SolverConfig& cfg,
                                          std::ostream* progress) {
    const int N = static_cast<int>(spec.truths.size());
    if (N < 1 || spec.sampling_rates.size() != spec.truths.size())
        throw std::invalid_argument("one truth tensor and sampling rate per tensor required");
    if (spec.ranks.empty() || spec.repetitions < 1)
        throw std::invalid_argument("rank sweep and repetitions must be nonempty");

    std::vector<ComparisonRow> rows;
    for (std::size_t ri = 0; ri < spec.ranks.size(); ++ri) {
        const Index rank = spec.ranks[ri];
        std::vector<RunningStats> rmse_coupled(static_cast<std::size_t>(N)),
            rmse_als(static_cast<std::size_t>(N)), time_coupled(static_cast<std::size_t>(N)),
            time_als(static_cast<std::size_t>(N));
        std::vector<int> fail_coupled(static_cast<std::size_t>(N), 0),
            fail_als(static_cast<std::size_t>(N), 0);

        for (int rep = 0; rep < spec.repetitions; ++rep) {
            const std::uint64_t rep_seed = derive_seed(spec.seed, ri + 1, static_cast<std::uint64_t>(rep) + 1);

            CoupledProblem problem;
            problem.spec.n_tensors = N;
            problem.spec.shared_modes = spec.shared_modes;
            const Index g = spec.coupled_dim > 0 ? spec.coupled_dim : rank;
            if (spec.shared_modes > 0)
                problem.spec.coupled_dims.assign(static_cast<std::size_t>(spec.shared_modes) + 1,
                                                 std::min(g, rank));
            Rng mask_rng(rep_seed);
            for (int n = 0; n < N; ++n) {
                const auto& truth = spec.truths[static_cast<std::size_t>(n)];
                const Index total = truth.size();
                const Index count = static_cast<Index>(
                    std::llround(spec.sampling_rates[static_cast<std::size_t>(n)] *
                                 static_cast<double>(total)));
                ObservationMask mask(truth.shape(),
                                     mask_rng.sample_without_replacement(total, std::max<Index>(count, 1)));
                problem.tensors.push_back(project(truth, mask));
                problem.masks.push_back(std::move(mask));
                problem.spec.ranks.push_back(
                    TrRank::uniform(truth.order(), rank));
            }

            SolverConfig run_cfg = cfg;
            run_cfg.seed = derive_seed(rep_seed, 0xab);
            try {
                SolveResult sol = solve_ctrc(problem, run_cfg, spec.truths);
                for (int n = 0; n < N; ++n) {
                    rmse_coupled[static_cast<std::size_t>(n)].add(
                        rmse(sol.reconstructions[static_cast<std::size_t>(n)],
                             spec.truths[static_cast<std::size_t>(n)]));
                    time_coupled[static_cast<std::size_t>(n)].add(sol.report.wall_seconds /
                                                                  static_cast<double>(N));
                }
            } catch (const std::exception&) {
                for (auto& f : fail_coupled)
                    ++f;
            }

            for (int n = 0; n < N; ++n) {
                try {
                    auto [factors, report] = tr_als_complete(
                        problem.tensors[static_cast<std::size_t>(n)],
                        problem.masks[static_cast<std::size_t>(n)],
                        problem.spec.ranks[static_cast<std::size_t>(n)], run_cfg);
                    rmse_als[static_cast<std::size_t>(n)].add(
                        rmse(tr_contract(factors), spec.truths[static_cast<std::size_t>(n)]));
                    time_als[static_cast<std::size_t>(n)].add(report.wall_seconds);
                } catch (const std::exception&) {
                    ++fail_als[static_cast<std::size_t>(n)];
                }
            }
            if (progress)
                *progress << "rank " << rank << " rep " << rep + 1 << "/" << spec.repetitions
                          << " done\n";
        }

        for (int n = 0; n < N; ++n) {
            const auto nan = std::numeric_limits<double>::quiet_NaN();
            const auto& rc = rmse_coupled[static_cast<std::size_t>(n)];
            rows.push_back({rank, "coupled", n + 1, rc.n ? rc.mean : nan, rc.stddev(),
                            time_coupled[static_cast<std::size_t>(n)].mean,
                            fail_coupled[static_cast<std::size_t>(n)]});
            const auto& ra = rmse_als[static_cast<std::size_t>(n)];
            rows.push_back({rank, "tr-als", n + 1, ra.n ? ra.mean : nan, ra.stddev(),
                            time_als[static_cast<std::size_t>(n)].mean,
                            fail_als[static_cast<std::size_t>(n)]});
        }
    }
    return rows;
}

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows) {
    std::vector<std::vector<std::string>> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back({std::to_string(r.rank), r.method, std::to_string(r.tensor),
                       format_double(r.rmse_mean), format_double(r.rmse_std),
                       format_double(r.seconds_mean), std::to_string(r.failed_runs)});
    write_csv(path, {"rank", "method", "tensor", "rmse_mean", "rmse_std", "seconds_mean", "failed_runs"},
              out);
}

} // namespace ctrc
