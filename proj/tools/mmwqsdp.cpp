#include <cstdio>
#include <iostream>
#include <new>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <mmwqsdp/io.hpp>
#include <mmwqsdp/mmwqsdp.hpp>

namespace {

using namespace mmwqsdp;
using io::json;

struct Flags {
  std::string in, out, target, hidden, kind;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps, delta_fail, override_delta, margin, bound_b, phi, xi;
  std::optional<std::uint64_t> shots;
  std::optional<std::size_t> trials;
  std::optional<long> n, m, k, r;
  std::string backend;
  bool safety_halving = false;
};

std::uint64_t need_seed(const Flags& f, const std::string& cmd) {
  if (!f.seed) throw UsageError(cmd + ": --seed is required");
  return *f.seed;
}

const std::string& need_in(const Flags& f, const std::string& cmd) {
  if (f.in.empty()) throw UsageError(cmd + ": --in is required");
  return f.in;
}

void emit(const Flags& f, json report) {
  report["timestamp"] = io::utc_timestamp();
  if (f.out.empty())
    std::cout << io::dump(report);
  else
    io::write_file(f.out, report);
}

json run_solve(const Flags& f) {
  const std::string cmd = "solve-feasibility";
  SdpInstance inst = io::sdp_from_json(io::load_file(need_in(f, cmd)));
  if (f.eps) inst = inst.with_epsilon(*f.eps);
  const std::string backend = f.backend.empty() ? "exact" : f.backend;
  const std::uint64_t seed = backend == "exact" ? f.seed.value_or(0) : need_seed(f, cmd);
  SamplingParams params;
  if (f.shots) params.shots = *f.shots;
  if (f.delta_fail) params.delta_fail = *f.delta_fail;
  auto oracle = make_oracle(backend, inst, params);
  Rng rng(seed);
  SolveOptions opt;
  opt.delta = f.override_delta;
  opt.record_history = false;
  const FeasibilityResult res = solve_feasibility(inst, *oracle, rng, opt);
  json j = {{"kind", "feasibility-report"},
            {"seed", seed},
            {"instance", {{"dim", inst.dim()}, {"m", inst.size()}, {"epsilon", inst.epsilon()}}},
            {"result", io::to_json(res)}};
  std::cerr << cmd << ": " << to_string(res.verdict) << " after " << res.rounds_used << " of " << res.round_cap
            << " rounds\n";
  return j;
}

double gibbs_delta(const Flags& f, double eps) { return f.override_delta.value_or(eps / 8.0); }

json run_estimate(const Flags& f) {
  const std::string cmd = "estimate-partition";
  const std::uint64_t seed = need_seed(f, cmd);
  const GibbsSpec spec = io::gibbs_spec_from_json(io::load_file(need_in(f, cmd)));
  const double eps = f.eps.value_or(0.1);
  if (!(eps > 0.0 && eps < 1.0)) throw UsageError(cmd + ": --eps must lie in (0, 1)");
  const double delta = gibbs_delta(f, eps);
  Rng rng(seed);
  const ConsistentEstimator est = ConsistentEstimator::draw(delta, f.xi.value_or(0.0), rng);
  json j = {{"kind", "partition-report"}, {"seed", seed}, {"epsilon", eps}, {"delta", delta}, {"shift", est.shift()}};
  if (spec.empty()) {
    EstimatorReport z;
    z.target_error = eps;
    z.empirical_success = true;
    EstimatorReport ker;
    ker.value = static_cast<double>(spec.dim());
    ker.target_error = eps;
    ker.empirical_success = true;
    j["z_supp"] = io::to_json(z);
    j["kernel_dim"] = io::to_json(ker);
    j["lambda_min"] = nullptr;
    j["reference"] = {{"z_supp_rounded", 0.0}, {"kernel_count_rounded", spec.dim()}};
    return j;
  }
  const GibbsModel model(spec, est);
  const double lmin = estimate_lambda_min(model, 0.01, rng);
  j["lambda_min"] = io::finite_or_null(lmin);
  j["z_supp"] = io::to_json(estimate_z_supp(model, eps, rng, lmin));
  j["kernel_dim"] = io::to_json(estimate_kernel_dim(model, eps, rng));
  j["reference"] = {{"z_supp_rounded", model.z_supp_rounded(lmin)},
                    {"z_supp_expectation", model.z_supp_expectation(lmin)},
                    {"z_supp_exact", model.z_supp_exact()},
                    {"kernel_count_rounded", model.kernel_count_rounded()}};
  return j;
}

json run_sample(const Flags& f) {
  const std::string cmd = "sample-gibbs";
  const std::uint64_t seed = need_seed(f, cmd);
  const GibbsSpec spec = io::gibbs_spec_from_json(io::load_file(need_in(f, cmd)));
  const double eps = f.eps.value_or(0.25);
  PrepareOptions opt;
  opt.xi = f.xi.value_or(0.0);
  opt.safety_halving = f.safety_halving;
  opt.delta = f.override_delta;
  opt.samples = f.shots;
  Rng rng(seed);
  const GibbsPreparation prep = prepare_gibbs(spec, eps, rng, opt);
  const double td_exact = trace_distance(prep.state, exact_gibbs(spec));
  const double td_ideal = trace_distance(ideal_mixture(spec, prep.diagnostics.delta), exact_gibbs(spec));
  json j = {{"kind", "gibbs-report"},
            {"seed", seed},
            {"epsilon", eps},
            {"diagnostics", io::to_json(prep.diagnostics)},
            {"trace_distance_to_exact", td_exact},
            {"ideal_mixture_distance", td_ideal},
            {"state", io::to_json(prep.state)}};
  std::cerr << cmd << ": trace distance to exact Gibbs state " << td_exact << "\n";
  return j;
}

json run_learn(const Flags& f) {
  const std::string cmd = "learn-state";
  const MeasurementSet meas = io::measurement_set_from_json(io::load_file(need_in(f, cmd)));
  const std::string backend = f.backend.empty() ? "exact" : f.backend;
  LearnOptions opt;
  std::string state_path;
  if (backend == "exact") {
    if (f.target.empty()) throw UsageError(cmd + ": the exact backend needs --target");
    state_path = f.target;
  } else if (backend == "sampled") {
    if (f.hidden.empty()) throw UsageError(cmd + ": the sampled backend needs --hidden");
    opt.backend = LearnBackend::Sampled;
    state_path = f.hidden;
  } else {
    throw UsageError(cmd + ": unknown backend '" + backend + "' (expected exact or sampled)");
  }
  const std::uint64_t seed = backend == "exact" ? f.seed.value_or(0) : need_seed(f, cmd);
  const DensityMatrix rho = io::state_from_json(io::load_file(state_path));
  const double eps = f.eps.value_or(0.2);
  if (f.shots) opt.shots = *f.shots;
  opt.delta_fail = f.delta_fail;
  opt.delta = f.override_delta;
  Rng rng(seed);
  const LearnResult res = learn_state(meas, rho, eps, rng, opt);
  const double dev = verify_shadow(res.sigma, rho, meas);
  std::cerr << cmd << ": max deviation " << dev << " after " << res.rounds << " rounds\n";
  return {{"kind", "learn-report"},
          {"seed", seed},
          {"backend", backend},
          {"epsilon", eps},
          {"rounds", res.rounds},
          {"round_cap", res.round_cap},
          {"counters", res.counters},
          {"description", io::to_json(res.description)},
          {"verification", {{"max_deviation", dev}, {"within_eps", dev <= eps}}}};
}

json run_or_demo(const Flags& f) {
  const std::string cmd = "or-demo";
  const std::uint64_t seed = need_seed(f, cmd);
  std::optional<OrInstance> inst;
  if (!f.in.empty()) {
    inst = io::or_instance_from_json(io::load_file(f.in));
  } else {
    const auto m = static_cast<std::size_t>(f.m.value_or(8));
    const auto k = static_cast<std::size_t>(f.k.value_or(3));
    inst = fixtures::grover_or(m, k, f.eps.value_or(1.0 / 3.0), f.phi.value_or(0.0), f.xi.value_or(0.05));
  }
  const std::size_t trials = f.trials.value_or(2000);
  Rng rng(seed);
  const OrTester tester(*inst);
  const GapVerdict v = gap_verdict(tester, *inst, trials, rng);
  const auto acc = inst->acceptances();
  double max_acc = 0.0, avg = 0.0;
  for (double a : acc) {
    max_acc = std::max(max_acc, a);
    avg += a / static_cast<double>(acc.size());
  }
  const double exact = tester.accept_probability();

  std::printf("%-28s %s\n", "parameter", "value");
  std::printf("%-28s %zu\n", "m", inst->m());
  std::printf("%-28s %ld\n", "d", static_cast<long>(inst->dim()));
  std::printf("%-28s %zu\n", "ancilla", tester.iterate().ancilla_dim);
  std::printf("%-28s %.6g\n", "eps", inst->eps());
  std::printf("%-28s %.6g\n", "phi", inst->phi());
  std::printf("%-28s %.6g\n", "xi", inst->xi());
  std::printf("%-28s %.6g\n", "max tr(L_i rho)", max_acc);
  std::printf("%-28s %.6g\n", "avg tr(L_i rho)", avg);
  std::printf("%-28s %.6g\n", "case-1 lower bound", inst->case1_bound());
  std::printf("%-28s %.6g\n", "case-2 upper bound", inst->case2_bound());
  std::printf("%-28s %.6g\n", "threshold", v.threshold);
  std::printf("%-28s %.6g\n", "exact accept probability", exact);
  std::printf("%-28s %.6g (%zu/%zu)\n", "empirical rate", v.rate, v.accepted, v.trials);
  std::printf("%-28s %s\n", "verdict", v.case1 ? "case-1" : "case-2");

  return {{"kind", "or-report"},
          {"seed", seed},
          {"instance",
           {{"m", inst->m()},
            {"d", inst->dim()},
            {"ancilla", tester.iterate().ancilla_dim},
            {"eps", inst->eps()},
            {"phi", inst->phi()},
            {"xi", inst->xi()},
            {"phase_bits", tester.bits()}}},
          {"bounds", {{"case1_lower", inst->case1_bound()}, {"case2_upper", inst->case2_bound()}}},
          {"max_acceptance", max_acc},
          {"average_acceptance", avg},
          {"exact_accept_probability", exact},
          {"empirical",
           {{"rate", v.rate}, {"accepted", v.accepted}, {"trials", v.trials}, {"threshold", v.threshold}}},
          {"verdict", v.case1 ? "case-1" : "case-2"}};
}

json run_gen(const Flags& f) {
  const std::string cmd = "gen-instance";
  const std::uint64_t seed = need_seed(f, cmd);
  if (f.kind.empty()) throw UsageError(cmd + ": --kind is required");
  const long n = f.n.value_or(4), m = f.m.value_or(3);
  if (f.kind == "lower-bound") return io::to_json(fixtures::lower_bound(n, static_cast<std::size_t>(m), f.eps.value_or(0.25), seed));
  if (f.kind == "planted-feasible")
    return io::to_json(fixtures::planted_feasible(n, static_cast<std::size_t>(m), f.eps.value_or(0.25),
                                                  f.margin.value_or(0.05), seed)
                           .instance);
  if (f.kind == "grover-or")
    return io::to_json(fixtures::grover_or(static_cast<std::size_t>(f.m.value_or(8)),
                                           static_cast<std::size_t>(f.k.value_or(1)), f.eps.value_or(1.0 / 3.0),
                                           f.phi.value_or(0.0), f.xi.value_or(0.05)));
  if (f.kind == "low-rank-gibbs") {
    const long r = f.r.value_or(2);
    fixtures::check_range("r", r, 0, n);
    return io::to_json(fixtures::low_rank_gibbs(n, static_cast<int>(r), static_cast<int>(r), f.bound_b.value_or(2.0), seed));
  }
  if (f.kind == "rank1-measurements") return io::to_json(fixtures::rank1_measurements(n, static_cast<std::size_t>(m), seed));
  if (f.kind == "random-state") {
    Rng rng(seed);
    const long r = f.r.value_or(n);
    fixtures::check_range("r", r, 1, n);
    return io::to_json(fixtures::random_density(n, r, rng));
  }
  throw UsageError(cmd + ": unknown kind '" + f.kind +
                   "' (expected lower-bound, planted-feasible, grover-or, low-rank-gibbs, rank1-measurements or "
                   "random-state)");
}

// Quick end-to-end checks on tiny instances.
json run_selftest(const Flags& f) {
  const std::uint64_t seed = f.seed.value_or(1);
  json checks = json::array();
  bool all = true;
  auto check = [&](const std::string& name, bool ok, double value) {
    checks.push_back({{"name", name}, {"pass", ok}, {"value", value}});
    all = all && ok;
  };
  {
    const auto inst = fixtures::lower_bound(4, 3, 0.25, seed);
    ExactOracle oracle(inst);
    Rng rng(seed);
    const auto res = solve_feasibility(inst, oracle, rng);
    check("lower-bound instance is infeasible", res.verdict == Verdict::Infeasible, static_cast<double>(res.rounds_used));
  }
  {
    const auto p = fixtures::planted_feasible(4, 4, 0.25, 0.05, seed);
    ExactOracle oracle(p.instance);
    Rng rng(seed);
    const auto res = solve_feasibility(p.instance, oracle, rng);
    check("planted instance is feasible", res.verdict == Verdict::Feasible && res.exact_max_violation <= 0.25,
          res.exact_max_violation);
  }
  {
    const auto g = fixtures::grover_or(4, 2, 1.0 / 3.0, 0.0, 0.05);
    const OrTester t(g);
    check("grover accept probability above case-1 bound", t.accept_probability() >= g.case1_bound(),
          t.accept_probability());
  }
  {
    const auto spec = fixtures::low_rank_gibbs(4, 1, 1, 2.0, seed);
    const double td = trace_distance(ideal_mixture(spec, 0.25 / 8.0), exact_gibbs(spec));
    check("ideal mixture within 4 delta", td <= 4.0 * 0.25 / 8.0 + 1e-6, td);
  }
  {
    const auto meas = fixtures::rank1_measurements(4, 8, seed);
    Rng rng(seed);
    const auto rho = fixtures::random_density(4, 4, rng);
    const auto res = learn_state(meas, rho, 0.2, rng);
    const double dev = verify_shadow(res.sigma, rho, meas);
    check("exact learner within eps", dev <= 0.2, dev);
  }
  if (!all) {
    std::cerr << "selftest: FAILED\n" << checks.dump(2) << "\n";
    throw NumericFailure("selftest: at least one check failed");
  }
  return {{"kind", "selftest-report"}, {"seed", seed}, {"checks", checks}, {"pass", all}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix multiplicative weights SDP feasibility, Gibbs sampling and shadow tomography"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* s) {
    s->add_option("--out", f.out, "report path (stdout when omitted)");
    s->add_option("--seed", f.seed, "random seed");
  };
  auto* solve = app.add_subcommand("solve-feasibility", "decide feasibility of an sdp instance");
  common(solve);
  solve->add_option("--in", f.in, "sdp instance file");
  solve->add_option("--eps", f.eps, "override the instance epsilon");
  solve->add_option("--backend", f.backend, "exact, plain-sampled, quantum-sampled or or-sim");
  solve->add_option("--delta-fail", f.delta_fail, "oracle failure probability");
  solve->add_option("--shots", f.shots, "SWAP-test shots per threshold test");
  solve->add_option("--override-delta", f.override_delta, "MMW step size");

  auto* est = app.add_subcommand("estimate-partition", "estimate Z_supp and the kernel dimension of a Gibbs spec");
  common(est);
  est->add_option("--in", f.in, "gibbs-spec file");
  est->add_option("--eps", f.eps, "relative error target");
  est->add_option("--override-delta", f.override_delta, "kernel threshold delta");
  est->add_option("--xi", f.xi, "eigenvalue estimator corruption probability");

  auto* samp = app.add_subcommand("sample-gibbs", "prepare an approximate Gibbs state");
  common(samp);
  samp->add_option("--in", f.in, "gibbs-spec file");
  samp->add_option("--eps", f.eps, "trace distance target");
  samp->add_option("--override-delta", f.override_delta, "kernel threshold delta");
  samp->add_option("--shots", f.shots, "number of mixture samples");
  samp->add_option("--xi", f.xi, "eigenvalue estimator corruption probability");
  samp->add_flag("--safety-halving", f.safety_halving, "halve the support acceptance probability");

  auto* learn = app.add_subcommand("learn-state", "learn a Jaynes-form shadow of a state");
  common(learn);
  learn->add_option("--in", f.in, "measurement-set file");
  learn->add_option("--target", f.target, "state file (exact backend)");
  learn->add_option("--hidden", f.hidden, "state file read only through sampling (sampled backend)");
  learn->add_option("--backend", f.backend, "exact or sampled");
  learn->add_option("--eps", f.eps, "accuracy");
  learn->add_option("--delta-fail", f.delta_fail, "per-round failure probability");
  learn->add_option("--shots", f.shots, "SWAP-test shots");
  learn->add_option("--override-delta", f.override_delta, "MMW step size");

  auto* ordemo = app.add_subcommand("or-demo", "run the fast OR test");
  common(ordemo);
  ordemo->add_option("--in", f.in, "or-instance file (default: grover embedding)");
  ordemo->add_option("--trials", f.trials, "OR test repetitions");
  ordemo->add_option("--m", f.m, "projector count of the grover embedding");
  ordemo->add_option("--k", f.k, "marked index 1..m+1 of the grover embedding");
  ordemo->add_option("--eps", f.eps, "OR eps");
  ordemo->add_option("--phi", f.phi, "OR phi");
  ordemo->add_option("--xi", f.xi, "OR xi");

  auto* gen = app.add_subcommand("gen-instance", "generate a fixture instance");
  common(gen);
  gen->add_option("--kind", f.kind,
                  "lower-bound, planted-feasible, grover-or, low-rank-gibbs, rank1-measurements or random-state");
  gen->add_option("--n", f.n, "dimension");
  gen->add_option("--m", f.m, "constraint or projector count");
  gen->add_option("--k", f.k, "grover marked index");
  gen->add_option("--r", f.r, "rank");
  gen->add_option("--B", f.bound_b, "trace budget");
  gen->add_option("--margin", f.margin, "planted slack");
  gen->add_option("--eps", f.eps, "instance epsilon");
  gen->add_option("--phi", f.phi, "OR phi");
  gen->add_option("--xi", f.xi, "OR xi");

  auto* self = app.add_subcommand("selftest", "run built-in checks");
  common(self);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    json report;
    if (*solve) report = run_solve(f);
    else if (*est) report = run_estimate(f);
    else if (*samp) report = run_sample(f);
    else if (*learn) report = run_learn(f);
    else if (*ordemo) report = run_or_demo(f);
    else if (*gen) report = run_gen(f);
    else report = run_selftest(f);
    emit(f, std::move(report));
    return 0;
  } catch (const mmwqsdp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
