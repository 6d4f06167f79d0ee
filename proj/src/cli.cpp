#include "tenrec/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>

#include "tenrec/coupled.hpp"
#include "tenrec/eval.hpp"
#include "tenrec/gradcheck.hpp"
#include "tenrec/io.hpp"

namespace tenrec {

namespace {

struct SolveFlags {
  std::string tensor, mask, reference, out, model_prefix, trace;
  std::vector<std::string> similarity;
  std::vector<std::size_t> ranks;
  std::vector<double> lambda, prox_factor;
  double rho = 1.0, prox_core = 0.0, tol = 1e-5;
  std::size_t iters = 50, refresh = 0;
  std::uint64_t seed = 0;
  std::string core_penalty = "none", factor_penalty = "none";
  std::string loss_support = "observed", eval_support = "missing";
};

Penalty parse_penalty(const std::string& text) {
  const auto colon = text.find(':');
  Penalty p;
  p.kind = parse_penalty_kind(text.substr(0, colon));
  if (colon != std::string::npos) p.weight = std::stod(text.substr(colon + 1));
  if (p.kind != PenaltyKind::none && colon == std::string::npos)
    throw ShapeError("penalty '" + text + "' needs a weight, e.g. l1:0.1");
  return p;
}

void add_solver_flags(CLI::App* app, SolveFlags& f, bool with_mask) {
  app->add_option("--tensor", f.tensor, "input tensor (DTNS)")->required();
  if (with_mask) app->add_option("--mask", f.mask, "observed cells (DMSK); default all");
  app->add_option("--similarity", f.similarity, "one DTNS matrix per mode")->delimiter(',');
  app->add_option("--ranks", f.ranks, "core sizes, e.g. 3,3,3")->required()->delimiter(',');
  app->add_option("--lambda", f.lambda, "lower-level weights per mode")->delimiter(',');
  app->add_option("--rho", f.rho, "augmented Lagrangian penalty");
  app->add_option("--prox-core", f.prox_core, "core prox parameter (0: estimate)");
  app->add_option("--prox-factor", f.prox_factor, "factor prox parameters (0: estimate)")
      ->delimiter(',');
  app->add_option("--core-penalty", f.core_penalty, "none | l1:w | l2_squared:w | nuclear:w");
  app->add_option("--factor-penalty", f.factor_penalty, "penalty applied to every factor");
  app->add_option("--iters", f.iters, "maximum iterations");
  app->add_option("--tol", f.tol, "relative change stopping threshold");
  app->add_option("--seed", f.seed, "seed");
  app->add_option("--refresh-similarity", f.refresh, "rebuild similarities every N iterations");
  app->add_option("--loss-support", f.loss_support, "observed | all");
  app->add_option("--reference", f.reference, "ground truth used for fit/rse");
  app->add_option("--eval-support", f.eval_support, "missing | observed | all");
  app->add_option("--out", f.out, "completed tensor output (DTNS)");
  app->add_option("--model-prefix", f.model_prefix, "writes PREFIX.core.dtns, PREFIX.factorK.dtns");
  app->add_option("--trace", f.trace, "convergence trace CSV");
}

SolverConfig config_from(const SolveFlags& f) {
  SolverConfig c;
  c.ranks = f.ranks;
  c.lambda = f.lambda;
  c.rho = f.rho;
  c.prox_core = f.prox_core;
  c.prox_factor = f.prox_factor;
  c.core_penalty = parse_penalty(f.core_penalty);
  c.factor_penalties.assign(f.ranks.size(), parse_penalty(f.factor_penalty));
  c.max_iters = f.iters;
  c.tol_rel = f.tol;
  c.seed = f.seed;
  c.refresh_similarity_every = f.refresh;
  if (f.loss_support == "observed") {
    c.loss_support = LossSupport::observed;
  } else if (f.loss_support == "all") {
    c.loss_support = LossSupport::all;
  } else {
    throw ShapeError("unknown loss support '" + f.loss_support + "'");
  }
  return c;
}

void write_model(const std::string& prefix, const TuckerModel& m) {
  save_tensor(prefix + ".core.dtns", m.core);
  for (std::size_t k = 0; k < m.factors.size(); ++k)
    save_matrix(prefix + ".factor" + std::to_string(k) + ".dtns", m.factors[k]);
}

int run_solve(const SolveFlags& f, bool full_mask, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const DenseTensor x = load_tensor(f.tensor);
  const ObservationMask mask =
      (full_mask || f.mask.empty()) ? ObservationMask::full(x.dims()) : load_mask(f.mask, x.dims());
  std::optional<SimilarityMatrices> s;
  if (!f.similarity.empty()) {
    SimilarityMatrices mats;
    for (const auto& path : f.similarity) mats.push_back(load_matrix(path));
    s = std::move(mats);
  }
  SolveOptions opts;
  if (!f.reference.empty()) opts.reference = load_tensor(f.reference);
  opts.eval_support = parse_eval_support(full_mask ? "all" : f.eval_support);
  SolverConfig cfg = config_from(f);
  if (full_mask) cfg.loss_support = LossSupport::all;

  const SolveResult r = solve(x, mask, s, cfg, opts);
  if (!f.out.empty()) save_tensor(f.out, r.completed);
  if (!f.model_prefix.empty()) write_model(f.model_prefix, r.model);
  if (!f.trace.empty()) {
    std::ofstream os(f.trace);
    if (!os) throw IoError("cannot open " + f.trace);
    write_trace_csv(os, r.trace);
  }
  const auto& last = r.trace.records.back();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[256];
  std::snprintf(buf, sizeof buf, "iters=%zu\nconverged=%d\nfit=%.6f\nrse=%.6f\nwall_time=%.3f\n",
                last.iter, r.converged ? 1 : 0, last.fit, last.rse, secs);
  out << buf;
  return 0;
}

struct CoupledRun {
  std::uint64_t seed = 0;
  double avg_err = 0.0, congruence = 0.0;
  std::size_t iters = 0;
};

CoupledRun run_coupled_seed(CoupledSpec spec, std::uint64_t seed, const SolverConfig& base) {
  spec.seed = seed;
  const CoupledProblem p = create_coupled(spec);
  SolverConfig cfg = base;
  if (cfg.ranks.empty()) cfg.ranks.assign(p.tensor.order(), spec.rank);
  cfg.seed = seed;
  const CoupledSolution sol = coupled_solve(p, cfg);
  return {seed, reconstruction_error(sol, p), coupled_congruence(sol, p), sol.iters};
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensor completion and Tucker decomposition under learned metric constraints",
               "tenrec"};
  app.set_config("--config", "", "key = value configuration file");
  app.require_subcommand(1);

  SolveFlags complete_flags, decompose_flags;
  auto* complete = app.add_subcommand("complete", "complete a partially observed tensor");
  add_solver_flags(complete, complete_flags, true);
  auto* decompose = app.add_subcommand("decompose", "Tucker decomposition of a full tensor");
  add_solver_flags(decompose, decompose_flags, false);

  std::string spec_path, results_path;
  std::size_t runs = 1;
  SolveFlags coupled_flags;
  auto* coupled = app.add_subcommand("coupled", "coupled tensor-matrix experiment from a spec file");
  coupled->add_option("--spec", spec_path, "simulation spec file")->required();
  coupled->add_option("--runs", runs, "number of consecutive seeds");
  coupled->add_option("--ranks", coupled_flags.ranks, "core sizes (default: spec rank)")
      ->delimiter(',');
  coupled->add_option("--iters", coupled_flags.iters, "maximum iterations");
  coupled->add_option("--tol", coupled_flags.tol, "relative change stopping threshold");
  coupled->add_option("--lambda", coupled_flags.lambda, "lower-level weights")->delimiter(',');
  coupled->add_option("--rho", coupled_flags.rho, "augmented Lagrangian penalty");
  coupled->add_option("--results", results_path, "results CSV");

  std::string sim_kind = "lowrank", sim_prefix;
  std::vector<std::size_t> sim_dims, sim_ranks{3, 3, 3};
  double sim_rate = 0.5;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "write a synthetic instance");
  simulate->add_option("--kind", sim_kind, "lowrank | coupled");
  simulate->add_option("--spec", spec_path, "coupled spec file");
  simulate->add_option("--dims", sim_dims, "tensor dims")->delimiter(',');
  simulate->add_option("--ranks", sim_ranks, "multilinear ranks")->delimiter(',');
  simulate->add_option("--observe", sim_rate, "observed fraction");
  simulate->add_option("--seed", sim_seed, "seed");
  simulate->add_option("--out-prefix", sim_prefix, "output file prefix")->required();

  std::uint64_t gc_seed = 0;
  std::size_t gc_instances = 20;
  bool gc_kempf = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--seed", gc_seed, "seed");
  gradcheck->add_option("--instances", gc_instances, "random instances");
  gradcheck->add_flag("--kempf-ness", gc_kempf, "also check the normalization stationarity");

  std::string ev_reference, ev_estimate, ev_mask, ev_support = "all";
  auto* eval = app.add_subcommand("eval", "fit and RSE between two tensors");
  eval->add_option("--reference", ev_reference, "reference tensor")->required();
  eval->add_option("--estimate", ev_estimate, "estimated tensor")->required();
  eval->add_option("--mask", ev_mask, "observed cells defining the support");
  eval->add_option("--support", ev_support, "all | observed | missing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (*complete) return run_solve(complete_flags, false, out);
    if (*decompose) return run_solve(decompose_flags, true, out);

    if (*coupled) {
      const CoupledSpec spec = load_coupled_spec(spec_path);
      SolverConfig base;
      base.ranks = coupled_flags.ranks;
      base.lambda = coupled_flags.lambda;
      base.rho = coupled_flags.rho;
      base.max_iters = coupled_flags.iters;
      base.tol_rel = coupled_flags.tol;
      std::vector<CoupledRun> results(runs);
      const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(worker_threads(), runs));
      for (std::size_t start = 0; start < runs; start += workers) {
        std::vector<std::future<CoupledRun>> jobs;
        for (std::size_t i = start; i < std::min(runs, start + workers); ++i)
          jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                    run_coupled_seed, spec, spec.seed + i, base));
        for (std::size_t i = 0; i < jobs.size(); ++i) results[start + i] = jobs[i].get();
      }
      std::string csv = "seed,avg_err,congruence,iters\n";
      double mean_err = 0.0, mean_cong = 0.0;
      char buf[160];
      for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%llu,%.9e,%.9e,%zu\n",
                      static_cast<unsigned long long>(r.seed), r.avg_err, r.congruence, r.iters);
        csv += buf;
        mean_err += r.avg_err / static_cast<double>(runs);
        mean_cong += r.congruence / static_cast<double>(runs);
      }
      if (!results_path.empty()) {
        std::ofstream os(results_path);
        if (!os) throw IoError("cannot open " + results_path);
        os << csv;
      } else {
        out << csv;
      }
      std::snprintf(buf, sizeof buf, "mean_avg_err=%.6f\nmean_congruence=%.6f\n", mean_err, mean_cong);
      out << buf;
      return 0;
    }

    if (*simulate) {
      if (sim_kind == "lowrank") {
        if (sim_dims.empty()) throw ShapeError("simulate lowrank needs --dims");
        const DenseTensor truth = random_lowrank(sim_dims, sim_ranks, sim_seed);
        const ObservationMask mask = mask_random(sim_dims, sim_rate, sim_seed + 1);
        DenseTensor observed(sim_dims);
        for (auto i : mask.linear()) observed[i] = truth[i];
        save_tensor(sim_prefix + ".truth.dtns", truth);
        save_tensor(sim_prefix + ".tensor.dtns", observed);
        save_mask(sim_prefix + ".mask.dmsk", mask);
      } else if (sim_kind == "coupled") {
        if (spec_path.empty()) throw ShapeError("simulate coupled needs --spec");
        const CoupledProblem p = create_coupled(load_coupled_spec(spec_path));
        save_tensor(sim_prefix + ".tensor.dtns", p.tensor);
        for (std::size_t c = 0; c < p.couplings.size(); ++c)
          save_matrix(sim_prefix + ".matrix" + std::to_string(c) + ".dtns", p.couplings[c].matrix);
        for (std::size_t s = 0; s < p.ground_truth->size(); ++s)
          save_matrix(sim_prefix + ".truth" + std::to_string(s) + ".dtns", (*p.ground_truth)[s]);
      } else {
        throw ShapeError("unknown simulation kind '" + sim_kind + "'");
      }
      return 0;
    }

    if (*gradcheck) {
      const GradcheckReport rep = run_solver_gradcheck(gc_seed, gc_instances);
      char buf[160];
      for (const auto& e : rep.errors) {
        std::snprintf(buf, sizeof buf, "%s=%.3e\n", e.name.c_str(), e.rel_error);
        out << buf;
      }
      double worst = rep.max_error;
      if (gc_kempf) {
        const KempfNessReport k = run_kempf_ness_check(gc_seed);
        std::snprintf(buf, sizeof buf, "kempf_ness/derivative=%.3e\nkempf_ness/stationarity=%.3e\n",
                      k.derivative_error, k.stationarity);
        out << buf;
        worst = std::max({worst, k.derivative_error, k.stationarity});
      }
      std::snprintf(buf, sizeof buf, "max=%.3e\n", worst);
      out << buf;
      return worst <= 1e-6 ? 0 : 2;
    }

    if (*eval) {
      const DenseTensor a = load_tensor(ev_reference);
      const DenseTensor b = load_tensor(ev_estimate);
      const EvalSupport support = parse_eval_support(ev_support);
      ObservationMask cells = ObservationMask::full(a.dims());
      std::size_t n_obs = a.size(), n_miss = 0;
      if (!ev_mask.empty()) {
        const ObservationMask m = load_mask(ev_mask, a.dims());
        cells = support_cells(support, m);
        n_obs = m.count();
        n_miss = a.size() - m.count();
      } else if (support != EvalSupport::all) {
        throw ShapeError("--support observed|missing needs --mask");
      }
      char buf[256];
      std::snprintf(buf, sizeof buf, "fit=%.6f\nrse=%.6f\nn_observed=%zu\nn_missing=%zu\n",
                    fit(a, b, cells), rse(a, b, cells), n_obs, n_miss);
      out << buf;
      return 0;
    }
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace tenrec
