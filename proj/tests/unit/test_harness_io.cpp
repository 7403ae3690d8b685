// SPDX-License-Identifier: MIT
#include "ctrc/harness.hpp"
#include "ctrc/io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace ctrc;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("ctrc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static inline int counter = 0;
};

SyntheticSpec two_tensor_spec(Index I, Index D, Index rank, int L, double sr1, double sr2,
                              std::uint64_t seed) {
    SyntheticSpec s;
    s.shapes.assign(2, Shape(static_cast<std::size_t>(D), I));
    s.rank = rank;
    s.shared_modes = L;
    s.sampling_rates = {sr1, sr2};
    s.seed = seed;
    return s;
}

} // namespace

TEST_CASE("generate_synthetic") {
    SUBCASE("full coupling on every mode gives identical ground truths") {
        SyntheticSpec s = two_tensor_spec(4, 3, 2, 3, 0.5, 0.5, 9); // L == D
        const SyntheticProblem p = generate_synthetic(s);
        REQUIRE(p.ground_truth.size() == 2);
        for (Index i = 0; i < p.ground_truth[0].size(); ++i)
            CHECK(p.ground_truth[0][i] == p.ground_truth[1][i]);
    }

    SUBCASE("mask cardinality is exactly the rounded sample count") {
        SyntheticSpec s = two_tensor_spec(5, 3, 2, 1, 0.37, 0.61, 11);
        const SyntheticProblem p = generate_synthetic(s);
        CHECK(p.problem.masks[0].count() == std::llround(0.37 * 125));
        CHECK(p.problem.masks[1].count() == std::llround(0.61 * 125));
    }

    SUBCASE("observed tensors hold the truth on the mask and zero elsewhere") {
        SyntheticSpec s = two_tensor_spec(4, 3, 2, 1, 0.4, 0.4, 13);
        const SyntheticProblem p = generate_synthetic(s);
        for (int n = 0; n < 2; ++n) {
            const DenseTensor ind = p.problem.masks[static_cast<std::size_t>(n)].indicator();
            for (Index i = 0; i < ind.size(); ++i)
                CHECK(p.problem.tensors[static_cast<std::size_t>(n)][i] ==
                      (ind[i] != 0.0 ? p.ground_truth[static_cast<std::size_t>(n)][i] : 0.0));
        }
    }

    SUBCASE("identical seeds give bit-identical problems") {
        SyntheticSpec s = two_tensor_spec(4, 4, 2, 2, 0.3, 0.5, 17);
        const SyntheticProblem a = generate_synthetic(s);
        const SyntheticProblem b = generate_synthetic(s);
        for (int n = 0; n < 2; ++n) {
            CHECK(a.problem.masks[static_cast<std::size_t>(n)].offsets() ==
                  b.problem.masks[static_cast<std::size_t>(n)].offsets());
            for (Index i = 0; i < a.ground_truth[static_cast<std::size_t>(n)].size(); ++i)
                CHECK(a.ground_truth[static_cast<std::size_t>(n)][i] ==
                      b.ground_truth[static_cast<std::size_t>(n)][i]);
        }
    }

    SUBCASE("the reference configuration generates at full size") {
        SyntheticSpec s = two_tensor_spec(20, 4, 2, 3, 0.01, 0.05, 19);
        const SyntheticProblem p = generate_synthetic(s);
        CHECK(p.ground_truth[0].shape() == Shape{20, 20, 20, 20});
        CHECK(p.ground_truth[1].shape() == Shape{20, 20, 20, 20});
        CHECK(p.problem.masks[0].count() == 1600);
    }

    SUBCASE("an empty mask is rejected") {
        SyntheticSpec s = two_tensor_spec(3, 3, 1, 1, 0.001, 0.5, 23);
        CHECK_THROWS_AS(generate_synthetic(s), std::invalid_argument);
    }
}

TEST_CASE("rmse") {
    Rng rng(505);
    const DenseTensor t = oracle::random_tensor({3, 4, 2}, rng);
    CHECK(rmse(t, t) == 0.0);

    DenseTensor ones({5, 2});
    for (Index i = 0; i < ones.size(); ++i)
        ones[i] = 1.0;
    CHECK(rmse(ones, DenseTensor({5, 2})) == doctest::Approx(1.0).epsilon(1e-15));

    SUBCASE("agrees with the norm formula") {
        const DenseTensor u = oracle::random_tensor({3, 4, 2}, rng);
        DenseTensor diff(t.shape());
        for (Index i = 0; i < t.size(); ++i)
            diff[i] = t[i] - u[i];
        CHECK(oracle::rel_err(rmse(t, u), fnorm(diff) / std::sqrt(24.0)) < 1e-12);
    }

    SUBCASE("invariant under a common mode permutation") {
        const DenseTensor u = oracle::random_tensor({3, 4, 2}, rng);
        const std::vector<Index> order{2, 0, 1};
        CHECK(oracle::rel_err(rmse(permute(t, order), permute(u, order)), rmse(t, u)) < 1e-12);
    }

    CHECK_THROWS_AS(rmse(t, DenseTensor({4, 3, 2})), std::invalid_argument);
}

TEST_CASE("phase transition sweep on easy and hard corners") {
    ExperimentGrid grid;
    grid.sr1 = {0.05, 0.9};
    grid.sr2 = {0.9};
    grid.ranks = {1, 4};
    grid.coupled_modes = {1};
    grid.repetitions = 3; // block descent can stall from a bad draw; vote

    SyntheticSpec base = two_tensor_spec(6, 3, 2, 1, 0.5, 0.5, 31);
    SolverConfig cfg;
    cfg.max_iters = 100;
    cfg.tol = 1e-10;

    const PhaseResult res = run_phase_transition(grid, base, cfg, 2);
    REQUIRE(res.cells.size() == 4);
    auto cell = [&](Index rank, double sr1) -> const PhaseCell& {
        for (const auto& c : res.cells)
            if (c.rank == rank && c.sr1 == sr1)
                return c;
        throw std::logic_error("cell not found");
    };
    CHECK(cell(1, 0.9).success_fraction >= 2.0 / 3.0); // easy corner recovers
    CHECK(cell(4, 0.05).success_fraction == 0.0);      // far past the information limit
    for (const auto& c : res.cells) {
        CHECK(c.success_fraction >= 0.0);
        CHECK(c.success_fraction <= 1.0);
        CHECK(c.errors == 0);
    }

    SUBCASE("csv emission") {
        TempDir dir;
        const auto files = write_phase_csv(res, dir.file("out"));
        CHECK(files.size() == 2); // one heatmap sheet + the summary
        for (const auto& f : files)
            CHECK(std::filesystem::exists(f));
    }
}

TEST_CASE("comparison runner prefers coupling on exact coupled data") {
    // sr1 alone is below the individual recovery threshold at this size;
    // the second tensor at sr2 pins the shared cores down
    SyntheticSpec s = two_tensor_spec(6, 3, 2, 2, 0.5, 0.8, 37);
    const SyntheticProblem data = generate_synthetic(s);

    ComparisonSpec cmp;
    cmp.truths = data.ground_truth;
    cmp.sampling_rates = {0.5, 0.8};
    cmp.shared_modes = 2;
    cmp.ranks = {2};
    cmp.repetitions = 3;
    cmp.seed = 41;

    SolverConfig cfg;
    cfg.max_iters = 150;

    const auto rows = run_comparison(cmp, cfg);
    REQUIRE(rows.size() == 4); // 2 methods x 2 tensors
    auto find = [&](const std::string& method, int tensor) {
        for (const auto& r : rows)
            if (r.method == method && r.tensor == tensor)
                return r;
        throw std::logic_error("row not found");
    };
    CHECK(find("coupled", 1).rmse_mean <= find("tr-als", 1).rmse_mean);
    CHECK(find("coupled", 1).seconds_mean > 0.0);

    SUBCASE("deterministic given the master seed") {
        const auto again = run_comparison(cmp, cfg);
        REQUIRE(again.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].rmse_mean == again[i].rmse_mean);
            CHECK(rows[i].rmse_std == again[i].rmse_std);
        }
    }

    SUBCASE("csv emission") {
        TempDir dir;
        const std::string path = dir.file("cmp.csv");
        write_comparison_csv(path, rows);
        CHECK(std::filesystem::exists(path));
    }
}

TEST_CASE("coo file round trip") {
    TempDir dir;
    Rng rng(606);
    const Shape shape{3, 4, 2};
    const DenseTensor t = oracle::random_tensor(shape, rng);
    const ObservationMask m = oracle::random_mask(shape, 0.4, rng);
    const DenseTensor observed = project(t, m);

    const std::string path = dir.file("t.coo");
    write_coo(path, observed, m);
    const CooData back = read_coo(path);
    CHECK(back.mask.offsets() == m.offsets());
    for (Index i = 0; i < observed.size(); ++i)
        CHECK(back.tensor[i] == observed[i]); // full-precision round trip

    SUBCASE("duplicate entries are rejected") {
        std::ofstream out(dir.file("dup.coo"));
        out << "2 2 2\n2\n1 1 3.0\n1 1 4.0\n";
        out.close();
        CHECK_THROWS(read_coo(dir.file("dup.coo")));
    }
    SUBCASE("out-of-bounds indices are rejected") {
        std::ofstream out(dir.file("oob.coo"));
        out << "2 2 2\n1\n3 1 3.0\n";
        out.close();
        CHECK_THROWS(read_coo(dir.file("oob.coo")));
    }
}

TEST_CASE("dense and factor file round trips") {
    TempDir dir;
    Rng rng(707);
    const DenseTensor t = oracle::random_tensor({4, 3, 2}, rng);
    write_dense(dir.file("t.dense"), t);
    const DenseTensor back = read_dense(dir.file("t.dense"));
    REQUIRE(back.shape() == t.shape());
    for (Index i = 0; i < t.size(); ++i)
        CHECK(back[i] == t[i]);

    TrFactorSet f = TrFactorSet::random_normal({3, 4, 2}, TrRank({2, 3, 2}), rng);
    write_factors(dir.file("f.trf"), f);
    const TrFactorSet g = read_factors(dir.file("f.trf"));
    REQUIRE(g.order() == 3);
    CHECK(g.rank().values == f.rank().values);
    for (Index d = 0; d < 3; ++d)
        for (Index i = 0; i < f.core(d).size(); ++i)
            CHECK(g.core(d)[i] == f.core(d)[i]);
}

TEST_CASE("manifest round trip drives a solve") {
    TempDir dir;
    SyntheticSpec s = two_tensor_spec(4, 3, 2, 1, 0.6, 0.6, 43);
    const SyntheticProblem p = generate_synthetic(s);

    write_coo(dir.file("t1.coo"), p.problem.tensors[0], p.problem.masks[0]);
    write_coo(dir.file("t2.coo"), p.problem.tensors[1], p.problem.masks[1]);
    write_dense(dir.file("t1.dense"), p.ground_truth[0]);
    write_dense(dir.file("t2.dense"), p.ground_truth[1]);

    SolverConfig cfg;
    cfg.max_iters = 40;
    cfg.seed = 5;
    write_manifest(dir.file("problem.manifest"), {"t1.coo", "t2.coo"}, {"t1.dense", "t2.dense"},
                   p.problem.spec, cfg);

    const Manifest m = read_manifest(dir.file("problem.manifest"));
    CHECK(m.problem.spec.n_tensors == 2);
    CHECK(m.problem.spec.shared_modes == 1);
    CHECK(m.config.max_iters == 40);
    REQUIRE(m.ground_truth.size() == 2);

    const SolveResult res = solve_ctrc(m.problem, m.config, m.ground_truth);
    CHECK(res.report.iterations >= 1);
    REQUIRE(res.report.rmse.size() == 2);

    const std::string report_path = dir.file("report.txt");
    write_report(report_path, res.report);
    const KeyValues kv = KeyValues::parse_file(report_path);
    CHECK(kv.integer("iterations") == res.report.iterations);
    CHECK(kv.numbers("objective").size() == res.report.objective.size());
    CHECK(oracle::rel_err(kv.numbers("objective").back(), res.report.objective.back()) < 1e-15);
}

TEST_CASE("key-value parsing details") {
    const KeyValues kv = KeyValues::parse_text("a = 1 2 3  # comment\n\n# full comment\nname = x y\n");
    CHECK(kv.integers("a") == std::vector<Index>{1, 2, 3});
    CHECK(kv.get("name") == "x y");
    CHECK(kv.get_or("missing", "fallback") == "fallback");
    CHECK_THROWS(KeyValues::parse_text("no equals sign"));
}
