// SPDX-License-Identifier: MIT
//
// numpy-facing bindings for the main operations: ring contraction and
// decomposition, individual and coupled completion, synthetic generation
// and the risk-bound formulas. Tensors cross the boundary as numpy arrays
// (any layout); masks as boolean arrays of the tensor's shape.

#include "ctrc/harness.hpp"
#include "ctrc/risk_bound.hpp"
#include "ctrc/solver.hpp"
#include "ctrc/tensor.hpp"
#include "ctrc/tr.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ctrc;

namespace {

DenseTensor tensor_from_array(const py::array_t<double, py::array::forcecast>& arr) {
    const py::buffer_info info = arr.request();
    Shape shape(info.shape.begin(), info.shape.end());
    DenseTensor t(shape);
    const auto r = arr.unchecked();
    std::vector<py::ssize_t> idx(static_cast<std::size_t>(r.ndim()), 0);
    for (Index off = 0; off < t.size(); ++off) {
        t[off] = r(idx.data(), static_cast<py::ssize_t>(idx.size()));
        for (py::ssize_t d = 0; d < r.ndim(); ++d) {
            if (++idx[static_cast<std::size_t>(d)] < r.shape(d))
                break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    return t;
}

py::array_t<double> array_from_tensor(const DenseTensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double, py::array::f_style> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

ObservationMask mask_from_array(const py::array& mask, const Shape& shape) {
    const py::array_t<bool, py::array::forcecast> b(mask);
    DenseTensor ind(shape);
    const auto r = b.request();
    if (Shape(r.shape.begin(), r.shape.end()) != shape)
        throw std::invalid_argument("mask shape must match the tensor shape");
    const py::array_t<double, py::array::forcecast> asd(mask);
    DenseTensor conv = tensor_from_array(asd);
    return ObservationMask::from_indicator(conv);
}

TrFactorSet factors_from_list(const std::vector<py::array_t<double, py::array::forcecast>>& cores) {
    std::vector<DenseTensor> cs;
    cs.reserve(cores.size());
    for (const auto& c : cores) {
        if (c.ndim() != 3)
            throw std::invalid_argument("cores must be 3-way arrays");
        cs.push_back(tensor_from_array(c));
    }
    return TrFactorSet(std::move(cs));
}

py::list factors_to_list(const TrFactorSet& f) {
    py::list out;
    for (Index d = 0; d < f.order(); ++d)
        out.append(array_from_tensor(f.core(d)));
    return out;
}

SolverConfig config_from_kwargs(int max_iters, double tol, std::uint64_t seed,
                                const std::string& init, bool parallel_rows, int threads,
                                bool track_update_objective) {
    SolverConfig cfg;
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    cfg.seed = seed;
    if (init == "random-normal")
        cfg.init = InitMethod::RandomNormal;
    else if (init == "tr-svd-zero-fill")
        cfg.init = InitMethod::TrSvdZeroFill;
    else
        throw std::invalid_argument("init must be 'random-normal' or 'tr-svd-zero-fill'");
    cfg.parallel_rows = parallel_rows;
    cfg.threads = threads;
    cfg.track_update_objective = track_update_objective;
    return cfg;
}

py::dict report_to_dict(const SolveReport& rep) {
    py::dict d;
    d["iterations"] = rep.iterations;
    d["objective"] = py::array_t<double>(static_cast<py::ssize_t>(rep.objective.size()),
                                         rep.objective.data());
    d["relative_change"] = py::array_t<double>(
        static_cast<py::ssize_t>(rep.relative_change.size()), rep.relative_change.data());
    py::list rmse_traces;
    for (const auto& trace : rep.rmse)
        rmse_traces.append(
            py::array_t<double>(static_cast<py::ssize_t>(trace.size()), trace.data()));
    d["rmse"] = rmse_traces;
    if (!rep.update_objective.empty())
        d["update_objective"] = py::array_t<double>(
            static_cast<py::ssize_t>(rep.update_objective.size()), rep.update_objective.data());
    d["wall_seconds"] = rep.wall_seconds;
    d["hessian_seconds"] = rep.hessian_seconds;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Coupled tensor-ring completion core";

    m.def("fnorm", [](const py::array_t<double, py::array::forcecast>& a) {
        return fnorm(tensor_from_array(a));
    },
          py::arg("tensor"), "Frobenius norm.");

    m.def("coupled_fnorm",
          [](const py::array_t<double, py::array::forcecast>& a,
             const py::array_t<double, py::array::forcecast>& b) {
              return coupled_fnorm(tensor_from_array(a), tensor_from_array(b));
          },
          py::arg("x"), py::arg("y"), "sqrt(|x|_F^2 + |y|_F^2); shapes may differ.");

    m.def("rmse",
          [](const py::array_t<double, py::array::forcecast>& est,
             const py::array_t<double, py::array::forcecast>& truth) {
              return rmse(tensor_from_array(est), tensor_from_array(truth));
          },
          py::arg("estimate"), py::arg("truth"),
          "Frobenius error over the square root of the element count.");

    m.def("contract",
          [](const std::vector<py::array_t<double, py::array::forcecast>>& cores) {
              return array_from_tensor(tr_contract(factors_from_list(cores)));
          },
          py::arg("cores"),
          "Contract ring cores (R_d x I_d x R_{d+1}) to the full tensor.");

    m.def("subchain",
          [](const std::vector<py::array_t<double, py::array::forcecast>>& cores, Index mode) {
              const Matrix B = subchain(factors_from_list(cores), mode);
              py::array_t<double, py::array::f_style> out({B.rows(), B.cols()});
              std::copy(B.data(), B.data() + B.size(), out.mutable_data());
              return out;
          },
          py::arg("cores"), py::arg("mode"),
          "Contraction of all cores but one (0-based mode), as a matrix.");

    m.def("tr_svd",
          [](const py::array_t<double, py::array::forcecast>& tensor, py::object rank,
             py::object tol) {
              const DenseTensor t = tensor_from_array(tensor);
              TrSvdResult res;
              if (!rank.is_none()) {
                  std::vector<Index> r = rank.cast<std::vector<Index>>();
                  if (r.size() == 1)
                      r.assign(static_cast<std::size_t>(t.order()), r[0]);
                  res = tr_svd(t, TrRank(std::move(r)));
              } else if (!tol.is_none()) {
                  res = tr_svd(t, tol.cast<double>());
              } else {
                  throw std::invalid_argument("pass rank= or tol=");
              }
              return py::make_tuple(factors_to_list(res.factors), res.rel_error, res.rank_clipped);
          },
          py::arg("tensor"), py::arg("rank") = py::none(), py::arg("tol") = py::none(),
          "Sequential-SVD ring decomposition; returns (cores, rel_error, clipped).");

    m.def("tr_als",
          [](const py::array_t<double, py::array::forcecast>& tensor, const py::array& mask,
             const std::vector<Index>& rank, int max_iters, double tol, std::uint64_t seed,
             const std::string& init, bool parallel_rows, int threads,
             bool track_update_objective) {
              const DenseTensor t = tensor_from_array(tensor);
              const ObservationMask m = mask_from_array(mask, t.shape());
              std::vector<Index> r = rank;
              if (r.size() == 1)
                  r.assign(static_cast<std::size_t>(t.order()), r[0]);
              const auto [factors, report] = tr_als_complete(
                  project(t, m), m, TrRank(std::move(r)),
                  config_from_kwargs(max_iters, tol, seed, init, parallel_rows, threads,
                                     track_update_objective));
              return py::make_tuple(factors_to_list(factors), report_to_dict(report));
          },
          py::arg("tensor"), py::arg("mask"), py::arg("rank"), py::arg("max_iters") = 200,
          py::arg("tol") = 1e-8, py::arg("seed") = 0, py::arg("init") = "random-normal",
          py::arg("parallel_rows") = false, py::arg("threads") = 1,
          py::arg("track_update_objective") = false,
          "Individual ring completion; returns (cores, report).");

    m.def("solve_coupled",
          [](const std::vector<py::array_t<double, py::array::forcecast>>& tensors,
             const std::vector<py::array>& masks, const std::vector<std::vector<Index>>& ranks,
             int coupled_modes, py::object coupled_dims, py::object ground_truth, int max_iters,
             double tol, std::uint64_t seed, const std::string& init, bool parallel_rows,
             int threads, bool track_update_objective) {
              CoupledProblem p;
              p.spec.n_tensors = static_cast<int>(tensors.size());
              p.spec.shared_modes = coupled_modes;
              for (std::size_t n = 0; n < tensors.size(); ++n) {
                  DenseTensor t = tensor_from_array(tensors[n]);
                  ObservationMask m = mask_from_array(masks.at(n), t.shape());
                  p.tensors.push_back(project(t, m));
                  p.masks.push_back(std::move(m));
                  std::vector<Index> r = ranks.at(n);
                  if (r.size() == 1)
                      r.assign(p.tensors.back().shape().size(), r[0]);
                  p.spec.ranks.emplace_back(std::move(r));
              }
              if (coupled_modes > 0) {
                  if (!coupled_dims.is_none()) {
                      p.spec.coupled_dims = coupled_dims.cast<std::vector<Index>>();
                  } else {
                      for (Index d = 0; d <= coupled_modes; ++d) {
                          Index gmin = p.spec.ranks[0].bond(d);
                          for (const auto& r : p.spec.ranks)
                              gmin = std::min(gmin, r.bond(d));
                          p.spec.coupled_dims.push_back(gmin);
                      }
                  }
              }
              std::vector<DenseTensor> truth;
              if (!ground_truth.is_none())
                  for (const auto& g :
                       ground_truth.cast<std::vector<py::array_t<double, py::array::forcecast>>>())
                      truth.push_back(tensor_from_array(g));

              const SolveResult res =
                  solve_ctrc(p,
                             config_from_kwargs(max_iters, tol, seed, init, parallel_rows, threads,
                                                track_update_objective),
                             truth);
              py::list factor_lists, recons;
              for (const auto& f : res.factors)
                  factor_lists.append(factors_to_list(f));
              for (const auto& r : res.reconstructions)
                  recons.append(array_from_tensor(r));
              return py::make_tuple(factor_lists, recons, report_to_dict(res.report));
          },
          py::arg("tensors"), py::arg("masks"), py::arg("ranks"), py::arg("coupled_modes") = 0,
          py::arg("coupled_dims") = py::none(), py::arg("ground_truth") = py::none(),
          py::arg("max_iters") = 200, py::arg("tol") = 1e-8, py::arg("seed") = 0,
          py::arg("init") = "random-normal", py::arg("parallel_rows") = false,
          py::arg("threads") = 1, py::arg("track_update_objective") = false,
          "Coupled completion; returns (factors, reconstructions, report).");

    m.def("generate",
          [](const std::vector<std::vector<Index>>& shapes, Index rank, int coupled_modes,
             const std::vector<double>& sampling_rates, Index coupled_dim, std::uint64_t seed) {
              SyntheticSpec spec;
              for (const auto& s : shapes)
                  spec.shapes.emplace_back(s);
              spec.rank = rank;
              spec.shared_modes = coupled_modes;
              spec.coupled_dim = coupled_dim;
              spec.sampling_rates = sampling_rates;
              spec.seed = seed;
              const SyntheticProblem prob = generate_synthetic(spec);
              py::list tensors, masks, truths;
              for (std::size_t n = 0; n < prob.problem.tensors.size(); ++n) {
                  tensors.append(array_from_tensor(prob.problem.tensors[n]));
                  const DenseTensor ind = prob.problem.masks[n].indicator();
                  py::array_t<bool, py::array::f_style> mask(
                      std::vector<py::ssize_t>(ind.shape().begin(), ind.shape().end()));
                  for (Index i = 0; i < ind.size(); ++i)
                      mask.mutable_data()[i] = ind[i] != 0.0;
                  masks.append(mask);
                  truths.append(array_from_tensor(prob.ground_truth[n]));
              }
              return py::make_tuple(tensors, masks, truths);
          },
          py::arg("shapes"), py::arg("rank"), py::arg("coupled_modes"),
          py::arg("sampling_rates"), py::arg("coupled_dim") = 0, py::arg("seed") = 0,
          "Exactly coupled synthetic data; returns (observed, masks, ground_truth).");

    m.def("df_star", &df_star, py::arg("a"), py::arg("k"), py::arg("epsilon"),
          "Moment-matched F degrees of freedom (df1, df2).");

    m.def("pfq",
          [](const std::vector<double>& upper, const std::vector<double>& lower, double z,
             int max_terms, double tol) {
              const PfqResult r = pfq(upper, lower, z, max_terms, tol);
              return py::make_tuple(r.value, r.converged, r.terms);
          },
          py::arg("upper"), py::arg("lower"), py::arg("z"), py::arg("max_terms") = 10000,
          py::arg("tol") = 1e-14,
          "Truncated generalized hypergeometric series; returns (value, converged, terms).");

    m.def("beta_ratio_power", &beta_ratio_power, py::arg("df1"), py::arg("df2"), py::arg("L"),
          "[B(df1+1/2, df2-1/2)/B(df1, df2)]^L.");

    auto params_from_dict = [](const py::dict& d) {
        BoundParams p;
        if (d.contains("a")) p.a = d["a"].cast<double>();
        if (d.contains("b")) p.b = d["b"].cast<double>();
        if (d.contains("k")) p.k = d["k"].cast<double>();
        if (d.contains("D1")) p.D1 = d["D1"].cast<int>();
        if (d.contains("D2")) p.D2 = d["D2"].cast<int>();
        if (d.contains("L")) p.L = d["L"].cast<int>();
        if (d.contains("T1")) p.T1 = d["T1"].cast<double>();
        if (d.contains("T2")) p.T2 = d["T2"].cast<double>();
        if (d.contains("S1")) p.S1 = d["S1"].cast<double>();
        if (d.contains("S2")) p.S2 = d["S2"].cast<double>();
        if (d.contains("lipschitz")) p.lipschitz = d["lipschitz"].cast<double>();
        if (d.contains("delta")) p.delta = d["delta"].cast<double>();
        if (d.contains("epsilon")) p.epsilon = d["epsilon"].cast<double>();
        return p;
    };

    m.def("coupled_bound",
          [params_from_dict](const py::dict& params, double epsilon) {
              const CoupledBoundResult r = coupled_bound(params_from_dict(params), epsilon);
              py::dict out;
              out["value"] = r.value;
              out["case"] = r.case_used;
              out["z"] = r.z;
              out["series_converged"] = r.series.converged;
              out["series_value"] = r.series.value;
              return out;
          },
          py::arg("params"), py::arg("epsilon") = 0.0,
          "Coupled excess-risk bound from a parameter dict "
          "(a, b, k, D1, D2, L, T1, T2, S1, S2, lipschitz, delta).");

    m.def("individual_bound",
          [params_from_dict](const py::dict& params, int n) {
              return individual_bound(params_from_dict(params), n);
          },
          py::arg("params"), py::arg("n"),
          "Excess-risk bound of tensor n (1 or 2) completed alone.");

    m.def("supremum_bound",
          [params_from_dict](const py::dict& params) {
              return supremum_bound(params_from_dict(params));
          },
          py::arg("params"), "Closed-form supremum of the coupled bound.");

    m.def("epsilon_search",
          [](double a, double b, double k, int n_samples, std::uint64_t seed, double lo, double hi,
             int grid) {
              const EpsilonSearchResult r = epsilon_search(a, b, k, n_samples, seed, lo, hi, grid);
              return py::make_tuple(r.epsilon, r.mismatch);
          },
          py::arg("a"), py::arg("b"), py::arg("k"), py::arg("n_samples") = 100000,
          py::arg("seed") = 0, py::arg("lo") = -1.0, py::arg("hi") = 1.0,
          py::arg("grid_points") = 201,
          "Moment-matching grid search; returns (epsilon, mismatch).");

#ifdef CTRC_VERSION
    m.attr("__version__") = CTRC_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
