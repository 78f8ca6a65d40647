// otmatch command line: solve, match, simulate, diagnose, lalonde.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "otmatch/lalonde.hpp"
#include "otmatch/log.hpp"
#include "otmatch/otmatch.hpp"

using json = nlohmann::ordered_json;
using namespace otmatch;

namespace {

constexpr int schema_version = 1;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_json(const std::string& path, const json& j) {
  if (path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  auto out = io::open_output(path);
  out << j.dump(2) << "\n";
  if (!out) throw io_error("failed writing '" + path + "'");
}

// Flags shared by every subcommand that runs the OT solver.
struct SolverFlags {
  double epsilon = 1e-2;
  std::string divergence = "kl:1";
  std::size_t max_iter = 10000;
  double tol = 1e-9;

  void add(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "entropic penalty")->check(CLI::PositiveNumber);
    app->add_option("--divergence", divergence, "marginal penalty: balanced or kl:<rho>");
    app->add_option("--max-iter", max_iter, "IPFP sweep budget")->check(CLI::PositiveNumber);
    app->add_option("--tol", tol, "stop when the sup-norm potential change is below this")
        ->check(CLI::PositiveNumber);
  }
  SinkhornConfig config() const {
    SinkhornConfig c;
    c.epsilon = epsilon;
    c.max_iterations = max_iter;
    c.tolerance = tol;
    c.validate();
    return c;
  }
};

// Dataset source: CSV with named columns, or the NSW whitespace layout.
struct DataFlags {
  std::string path;
  bool nsw = false;
  std::string treatment_col = "treat";
  std::string outcome_col = "y";
  std::string covariate_cols;
  std::string standardize_cols;

  void add(CLI::App* app, bool required = true) {
    auto* o = app->add_option("--data", path, "input dataset");
    if (required) o->required();
    app->add_flag("--nsw", nsw, "input is in the NSW text layout (re78 is the outcome)");
    app->add_option("--treatment-col", treatment_col, "CSV treatment column");
    app->add_option("--outcome-col", outcome_col, "CSV outcome column");
    app->add_option("--covariate-cols", covariate_cols, "comma-separated covariates (default: all other columns)");
    app->add_option("--standardize", standardize_cols, "comma-separated columns to z-score before matching");
  }
  Dataset load() const {
    Dataset d = nsw ? io::read_nsw(path) : io::read_dataset(path, treatment_col, outcome_col, split_list(covariate_cols));
    if (!standardize_cols.empty()) d = standardize(d, split_list(standardize_cols)).dataset;
    return d;
  }
};

struct BootstrapFlags {
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::string mode = "stratified";
  bool emit_replicates = false;

  void add(CLI::App* app) {
    app->add_option("--bootstrap", replicates, "bootstrap replicates (0 disables)");
    app->add_option("--seed", seed, "master seed for resampling");
    app->add_option("--alpha", alpha, "percentile interval level")->check(CLI::Range(0.0, 1.0));
    app->add_option("--bootstrap-mode", mode, "stratified or pooled resampling");
    app->add_flag("--emit-replicates", emit_replicates, "include replicate values in the JSON");
  }
};

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::vector<std::string> inputs;
  SolverFlags solver;
  std::string coupling_out = "coupling.csv";
  std::string summary_out = "solve.json";
};

int run_solve(const SolveArgs& a) {
  if (a.inputs.size() < 2) throw usage_error("solve needs at least two point files");
  std::vector<DiscreteMeasure> ms;
  for (const auto& p : a.inputs) ms.push_back(DiscreteMeasure::empirical(io::read_points(p)));
  const auto cost = build_cost(ms);
  const auto div = Divergence::parse(a.solver.divergence);
  const std::vector<Divergence> divs(ms.size(), div);
  const auto sc = a.solver.config();
  const auto sol = solve(ms, cost, divs, sc);
  if (!sol.ipfp.converged) log::error("IPFP stopped after " + std::to_string(sol.ipfp.iterations) + " sweeps without converging");

  auto out = io::open_output(a.coupling_out);
  const auto written = io::write_coupling(out, sol.coupling);
  json j;
  j["schema"] = schema_version;
  j["command"] = "solve";
  j["epsilon"] = sc.epsilon;
  j["divergence"] = div.name();
  j["iterations"] = sol.ipfp.iterations;
  j["converged"] = sol.ipfp.converged;
  j["last_change"] = num(sol.ipfp.last_change);
  j["residual"] = num(sol.residual);
  j["dual_value"] = num(sol.dual);
  j["primal_value"] = num(primal_objective(sol.coupling, cost, ms, sc.epsilon, divs, sc.marginal_tolerance));
  j["transport_cost"] = num(transport_cost(sol.coupling, cost));
  j["total_mass"] = num(sol.coupling.total_mass);
  json errs = json::array();
  for (std::size_t m = 0; m < ms.size(); ++m) {
    double e = 0.0;
    for (std::size_t k = 0; k < ms[m].size(); ++k) e = std::max(e, std::abs(sol.coupling.marginals[m][k] - ms[m].weights()[k]));
    errs.push_back(num(e));
  }
  j["marginal_errors"] = errs;
  j["triplets"] = written;
  write_json(a.summary_out, j);
  std::cout << "solve: " << sol.ipfp.iterations << " sweeps, converged=" << (sol.ipfp.converged ? "yes" : "no")
            << ", mass " << io::fmt(sol.coupling.total_mass) << ", " << written << " entries -> " << a.coupling_out << "\n";
  return 0;
}

// ---------------------------------------------------------------- match

struct MatchArgs {
  DataFlags data;
  SolverFlags solver;
  BootstrapFlags boot;
  std::string method = "ot";
  std::string estimand = "ate,att";
  double drop_threshold = 1e-3;
  std::string weighting = "uniform";
  bool joint = false;
  std::string output = "match.json";
  std::string match_table;
  unsigned threads = 1;
};

// Point estimates for the requested estimands with one method.
struct Estimator {
  std::vector<std::string> names;
  std::function<std::vector<double>(const Dataset&)> run;
  // OT details from the full-data fit (per estimand).
  std::vector<json> extra;
};

Estimator make_estimator(const MatchArgs& a, const Dataset& data) {
  Estimator e;
  e.names = split_list(a.estimand);
  if (e.names.empty()) throw usage_error("no estimand given");
  const int J = data.arms();
  for (const auto& n : e.names) {
    if (n == "ate" || n == "att") {
      if (J != 2) throw usage_error(n + " needs a binary treatment; use epo:<j>");
    } else if (n.rfind("epo:", 0) == 0) {
      const int j = std::stoi(n.substr(4));
      if (j < 0 || j >= J) throw usage_error("epo arm out of range: " + n);
      if (a.method != "ot") throw usage_error("epo:<j> is only available for the ot method");
    } else {
      throw usage_error("unknown estimand '" + n + "' (expected ate, att or epo:<j>)");
    }
  }
  const auto names = e.names;
  if (a.method == "ot") {
    OtConfig oc;
    oc.sinkhorn = a.solver.config();
    oc.divergence = Divergence::parse(a.solver.divergence);
    oc.drop_threshold = a.drop_threshold;
    oc.weighting = parse_weighting(a.weighting);
    oc.joint = a.joint;
    e.run = [oc, names](const Dataset& d) {
      const auto arms = split_by_treatment(d);
      const auto fit = fit_couplings(arms, oc);
      std::vector<double> out;
      for (const auto& n : names) {
        if (n == "ate") out.push_back(ate(arms, fit.couplings, 1, 0, oc.drop_threshold).point);
        else if (n == "att") out.push_back(att(arms, fit.couplings, 1, 0, oc.drop_threshold, oc.weighting).point);
        else out.push_back(expected_potential_outcome(arms, fit.couplings, std::stoul(n.substr(4)), oc.drop_threshold).point);
      }
      return out;
    };
    return e;
  }
  std::function<EffectPair(const Dataset&)> pair;
  if (a.method == "unadjusted") {
    pair = [](const Dataset& d) {
      EffectPair p;
      p.ate = p.att = unadjusted(d);
      return p;
    };
  } else if (a.method.rfind("knn:", 0) == 0) {
    const auto k = static_cast<std::size_t>(std::stoul(a.method.substr(4)));
    pair = [k](const Dataset& d) { return knn_estimates(d, k); };
  } else if (a.method == "ipw" || a.method.rfind("ipw:", 0) == 0) {
    const auto style = parse_ipw_style(a.method == "ipw" ? "ht" : a.method.substr(4));
    pair = [style](const Dataset& d) { return ipw_estimates(d, fit_propensity(d), style); };
  } else {
    throw usage_error("unknown method '" + a.method + "' (expected ot, knn:<k>, ipw:<style>, unadjusted)");
  }
  e.run = [pair, names](const Dataset& d) {
    const auto p = pair(d);
    std::vector<double> out;
    for (const auto& n : names) out.push_back(n == "ate" ? p.ate : p.att);
    return out;
  };
  return e;
}

int run_match(const MatchArgs& a) {
  const Dataset data = a.data.load();
  const auto est = make_estimator(a, data);
  json j;
  j["schema"] = schema_version;
  j["command"] = "match";
  j["method"] = a.method;
  j["n"] = data.size();
  if (a.method == "ot") {
    j["epsilon"] = a.solver.epsilon;
    j["divergence"] = Divergence::parse(a.solver.divergence).name();
    j["drop_threshold"] = a.drop_threshold;
    j["weighting"] = a.weighting;
    j["mode"] = a.joint ? "joint" : "pairwise";
  }

  json estimates = json::object();
  if (a.method == "ot") {
    // Full-data fit once: point values plus drop counts and the match table.
    OtConfig oc;
    oc.sinkhorn = a.solver.config();
    oc.divergence = Divergence::parse(a.solver.divergence);
    oc.drop_threshold = a.drop_threshold;
    oc.weighting = parse_weighting(a.weighting);
    oc.joint = a.joint;
    const auto arms = split_by_treatment(data);
    const auto fit = fit_couplings(arms, oc);
    json solves = json::array();
    for (const auto& s : fit.solves) {
      solves.push_back({{"iterations", s.iterations}, {"converged", s.converged}, {"last_change", num(s.last_change)}});
      if (!s.converged) log::error("IPFP did not converge within " + std::to_string(s.iterations) + " sweeps");
    }
    j["solves"] = solves;
    for (const auto& n : est.names) {
      CausalEstimate ce;
      if (n == "ate") ce = ate(arms, fit.couplings, 1, 0, oc.drop_threshold);
      else if (n == "att") ce = att(arms, fit.couplings, 1, 0, oc.drop_threshold, oc.weighting);
      else ce = expected_potential_outcome(arms, fit.couplings, std::stoul(n.substr(4)), oc.drop_threshold);
      estimates[n] = {{"point", num(ce.point)}, {"raw", num(ce.raw)}, {"n_used", ce.n_used}, {"n_arm", ce.n_arm}};
    }
    if (!a.match_table.empty()) {
      if (arms.size() != 2) throw usage_error("--match-table needs a binary treatment");
      auto out = io::open_output(a.match_table);
      out << "unit,matched,weight,retained_mass\n";
      const auto w = fit.couplings.conditional(1, 0, oc.drop_threshold);
      for (const auto& m : match_table(w, arms[1], arms[0])) {
        out << m.unit << "," << (m.matched == static_cast<std::size_t>(-1) ? std::string("NA") : std::to_string(m.matched))
            << "," << io::fmt(m.weight) << "," << io::fmt(m.retained_mass) << "\n";
      }
    }
  } else {
    const auto v = est.run(data);
    for (std::size_t k = 0; k < est.names.size(); ++k) estimates[est.names[k]] = {{"point", num(v[k])}};
  }

  if (a.boot.replicates > 0) {
    BootstrapOptions bo;
    bo.replicates = a.boot.replicates;
    bo.seed = a.boot.seed;
    bo.alpha = a.boot.alpha;
    bo.mode = parse_bootstrap_mode(a.boot.mode);
    bo.threads = a.threads;
    const auto bs = bootstrap_multi(data, est.run, bo);
    for (std::size_t k = 0; k < est.names.size(); ++k) {
      auto& e = estimates[est.names[k]];
      e["sd"] = num(bs[k].sd);
      e["interval"] = {num(bs[k].lower), num(bs[k].upper)};
      e["bootstrap"] = {{"B", bs[k].B}, {"seed", bs[k].seed}, {"alpha", bo.alpha}, {"mode", a.boot.mode},
                        {"failed", bs[k].failed.size()}};
      if (a.boot.emit_replicates) e["replicates"] = bs[k].replicates;
    }
  }
  j["estimates"] = estimates;
  write_json(a.output, j);
  if (a.output != "-") {
    for (const auto& n : est.names) std::cout << n << " = " << io::fmt(estimates[n]["point"].get<double>()) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string which = "1";
  std::string methods = "ot,ipw,knn3,knn1,unadjusted";
  std::string eps = "1e-3,5e-3,1e-2,5e-2";
  std::size_t replications = 100;
  std::optional<std::uint64_t> seed;
  std::size_t n0 = 1000;
  std::size_t n1 = 100;
  std::string divergence = "kl:1";
  double tol = 1e-6;
  std::size_t max_iter = 100000;
  double drop_threshold = 1e-3;
  bool noise_is_sd = false;
  std::string output = "simulation.csv";
  unsigned threads = 1;
};

int run_simulate(const SimulateArgs& a) {
  if (!a.seed) throw usage_error("simulate needs --seed");
  const auto which = parse_case(a.which);
  auto out_path = a.output;
  if (which == SimCase::illustration) {
    const double e = a.eps.empty() ? 0.1 : io::parse_number(split_list(a.eps).front(), "--eps");
    const auto r = run_illustration(*a.seed, e, a.tol, a.max_iter);
    auto out = io::open_output(out_path);
    out << "arm,n,marginal_error\n";
    for (std::size_t k = 0; k < r.sizes.size(); ++k) out << k << "," << r.sizes[k] << "," << io::fmt(r.marginal_errors[k]) << "\n";
    std::cout << "illustration: " << r.cost_entries << " cost entries, " << r.ipfp.iterations
              << " sweeps, converged=" << (r.ipfp.converged ? "yes" : "no") << "\n";
    return 0;
  }
  SimulationConfig cfg;
  cfg.which = which;
  cfg.methods = split_list(a.methods);
  for (auto& m : cfg.methods) {
    if (m.rfind("knn:", 0) == 0) m = "knn" + m.substr(4);
  }
  cfg.epsilons.clear();
  for (const auto& s : split_list(a.eps)) cfg.epsilons.push_back(io::parse_number(s, "--eps"));
  cfg.replications = a.replications;
  cfg.seed = *a.seed;
  cfg.n0 = a.n0;
  cfg.n1 = a.n1;
  cfg.divergence = Divergence::parse(a.divergence);
  cfg.tolerance = a.tol;
  cfg.max_iterations = a.max_iter;
  cfg.drop_threshold = a.drop_threshold;
  cfg.noise_is_sd = a.noise_is_sd;
  cfg.threads = a.threads;
  const auto rows = run_case(cfg);
  auto out = io::open_output(out_path);
  out << "case,method,epsilon,ATE_diff,ATT_diff,ATT_sd_diff,replications,failures,seed\n";
  for (const auto& r : rows) {
    out << a.which << "," << r.method << "," << (r.epsilon ? io::fmt(*r.epsilon) : "NA") << "," << io::fmt(r.ate_diff) << ","
        << io::fmt(r.att_diff) << "," << io::fmt(r.att_sd_diff) << "," << r.replications << "," << r.failures << ","
        << r.seed << "\n";
  }
  std::cout << rows.size() << " rows -> " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  DataFlags data;
  SolverFlags solver;
  bool after = false;
  double drop_threshold = 1e-3;
  std::string round_cols;
  std::string output = "balance.csv";
};

void write_balance(std::ostream& out, const std::vector<BalanceRow>& rows) {
  out << "covariate,x0.mean,x1.mean,t.p_value,var.ratio,F.p_value,KS.p_value\n";
  for (const auto& r : rows) {
    out << r.covariate << "," << io::fmt(r.mean0) << "," << io::fmt(r.mean1) << "," << io::fmt(r.t_p) << ","
        << io::fmt(r.var_ratio) << "," << io::fmt(r.f_p) << "," << io::fmt(r.ks_p) << "\n";
  }
}

int run_diagnose(const DiagnoseArgs& a) {
  const Dataset data = a.data.load();
  std::vector<BalanceRow> rows;
  if (!a.after) {
    rows = balance_before(data, data.columns);
  } else {
    OtConfig oc;
    oc.sinkhorn = a.solver.config();
    oc.divergence = Divergence::parse(a.solver.divergence);
    oc.drop_threshold = a.drop_threshold;
    const auto arms = split_by_treatment(data, 2);
    const auto fit = fit_couplings(arms, oc);
    const auto list = split_list(a.round_cols);
    rows = balance_after(data, arms, fit.couplings.conditional(1, 0, a.drop_threshold), data.columns,
                         std::set<std::string>(list.begin(), list.end()));
  }
  auto out = io::open_output(a.output);
  write_balance(out, rows);
  std::cout << rows.size() << " covariates -> " << a.output << "\n";
  return 0;
}

// ---------------------------------------------------------------- lalonde

struct LalondeArgs {
  std::string data = "data/nsw_lalonde.txt";
  double epsilon = 1e-3;
  std::string divergence = "kl:1";
  double tol = 1e-9;
  std::size_t max_iter = 100000;
  double drop_threshold = 1e-3;
  std::string methods = "ot,ipw,knn3,knn1,unadjusted";
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
  std::string out_dir = "lalonde_out";
  unsigned threads = 1;
};

int run_lalonde(const LalondeArgs& a) {
  const Dataset raw = io::read_nsw(a.data);
  LalondeConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.divergence = Divergence::parse(a.divergence);
  cfg.tolerance = a.tol;
  cfg.max_iterations = a.max_iter;
  cfg.drop_threshold = a.drop_threshold;
  cfg.methods = split_list(a.methods);
  cfg.bootstrap = a.bootstrap;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  const auto res = lalonde_pipeline(raw, cfg);
  if (!res.solve.converged) log::error("OT solve did not converge within " + std::to_string(res.solve.iterations) + " sweeps");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw io_error("cannot create '" + a.out_dir + "': " + ec.message());
  const auto path = [&](const char* name) { return (fs::path(a.out_dir) / name).string(); };
  {
    auto out = io::open_output(path("sumstats.csv"));
    out << "variable,treated,control\n";
    out << "N," << res.n_treated << "," << res.n_control << "\n";
    for (const auto& r : res.summary) out << r.variable << "," << io::fmt(r.mean_treated) << "," << io::fmt(r.mean_control) << "\n";
  }
  {
    auto out = io::open_output(path("estimates.csv"));
    out << "method,ATE,ATT,ATE_sd,ATT_sd\n";
    for (const auto& e : res.estimates) {
      out << e.method << "," << io::fmt(e.ate) << "," << io::fmt(e.att) << "," << (e.ate_sd ? io::fmt(*e.ate_sd) : "NA")
          << "," << (e.att_sd ? io::fmt(*e.att_sd) : "NA") << "\n";
    }
  }
  {
    auto out = io::open_output(path("balance.csv"));
    out << "stage,";
    std::ostringstream body;
    write_balance(body, res.balance_before);
    std::string line;
    std::istringstream in(body.str());
    std::getline(in, line);
    out << line << "\n";
    while (std::getline(in, line)) out << "before," << line << "\n";
    std::ostringstream after;
    write_balance(after, res.balance_after);
    std::istringstream in2(after.str());
    std::getline(in2, line);
    while (std::getline(in2, line)) out << "after," << line << "\n";
  }
  json j;
  j["schema"] = schema_version;
  j["command"] = "lalonde";
  j["n_control"] = res.n_control;
  j["n_treated"] = res.n_treated;
  j["epsilon"] = a.epsilon;
  j["divergence"] = cfg.divergence.name();
  j["solve"] = {{"iterations", res.solve.iterations}, {"converged", res.solve.converged}};
  json est = json::object();
  for (const auto& e : res.estimates) {
    est[e.method] = {{"ate", num(e.ate)}, {"att", num(e.att)}};
    if (e.ate_sd) est[e.method]["ate_sd"] = num(*e.ate_sd);
    if (e.att_sd) est[e.method]["att_sd"] = num(*e.att_sd);
    if (e.method == "ot") est[e.method]["dropped"] = e.dropped;
  }
  j["estimates"] = est;
  write_json(path("lalonde.json"), j);
  std::cout << "N control " << res.n_control << ", treated " << res.n_treated << "\n";
  for (const auto& e : res.estimates) std::cout << e.method << ": ATE " << io::fmt_fixed(e.ate, 2) << ", ATT " << io::fmt_fixed(e.att, 2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbalanced entropic optimal transport matching for causal effects"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

  SolveArgs solve_args;
  solve_args.solver.divergence = "balanced";
  auto* solve_cmd = app.add_subcommand("solve", "entropic OT between point clouds (CSV files with a header)");
  solve_cmd->option_defaults()->always_capture_default();
  solve_cmd->add_option("inputs", solve_args.inputs, "point files, one per marginal")->required();
  solve_args.solver.add(solve_cmd);
  solve_cmd->add_option("--coupling", solve_args.coupling_out, "sparse coupling CSV");
  solve_cmd->add_option("--summary", solve_args.summary_out, "JSON summary ('-' for stdout)");

  MatchArgs match_args;
  auto* match_cmd = app.add_subcommand("match", "treatment effect estimates");
  match_cmd->option_defaults()->always_capture_default();
  match_args.data.add(match_cmd);
  match_args.solver.add(match_cmd);
  match_args.boot.add(match_cmd);
  match_cmd->add_option("--method", match_args.method, "ot, knn:<k>, ipw:<ht|hajek> or unadjusted");
  match_cmd->add_option("--estimand", match_args.estimand, "comma list of ate, att, epo:<j>");
  match_cmd->add_option("--drop-threshold", match_args.drop_threshold, "retained-mass cutoff relative to a uniform share");
  match_cmd->add_option("--weighting", match_args.weighting, "ATT weighting of retained units: uniform or mass");
  auto* joint = match_cmd->add_flag("--joint", match_args.joint, "one multimarginal solve instead of pairwise solves");
  match_cmd->add_flag("--pairwise{false}", match_args.joint, "pairwise solves (default)")->excludes(joint);
  match_cmd->add_option("--match-table", match_args.match_table, "per-unit match table CSV (treated to control)");
  match_cmd->add_option("--output", match_args.output, "JSON result ('-' for stdout)");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo comparison on the synthetic designs");
  sim_cmd->option_defaults()->always_capture_default();
  sim_cmd->add_option("--case", sim_args.which, "1, 2 or illustration");
  sim_cmd->add_option("--methods", sim_args.methods, "comma list of ot, ipw, knn<k>, unadjusted");
  sim_cmd->add_option("--eps", sim_args.eps, "comma list of OT penalties");
  sim_cmd->add_option("--bootstrap", sim_args.replications, "replications (samples drawn per row)");
  sim_cmd->add_option("--seed", sim_args.seed, "master seed (required)")->required();
  sim_cmd->add_option("--n0", sim_args.n0, "control sample size");
  sim_cmd->add_option("--n1", sim_args.n1, "treated sample size");
  sim_cmd->add_option("--divergence", sim_args.divergence, "balanced or kl:<rho>");
  sim_cmd->add_option("--tol", sim_args.tol, "IPFP tolerance");
  sim_cmd->add_option("--max-iter", sim_args.max_iter, "IPFP sweep budget");
  sim_cmd->add_option("--drop-threshold", sim_args.drop_threshold, "retained-mass cutoff");
  sim_cmd->add_flag("--noise-is-sd", sim_args.noise_is_sd, "read the treated outcome's 0.5 as a standard deviation");
  sim_cmd->add_option("--output", sim_args.output, "CSV result");

  DiagnoseArgs diag_args;
  auto* diag_cmd = app.add_subcommand("diagnose", "covariate balance table");
  diag_cmd->option_defaults()->always_capture_default();
  diag_args.data.add(diag_cmd);
  diag_args.solver.epsilon = 1e-3;
  diag_args.solver.add(diag_cmd);
  diag_cmd->add_flag("--after", diag_args.after, "compare controls with the OT-matched treated sample");
  diag_cmd->add_option("--drop-threshold", diag_args.drop_threshold, "retained-mass cutoff");
  diag_cmd->add_option("--round", diag_args.round_cols, "comma list of columns rounded in the matched sample");
  diag_cmd->add_option("--output", diag_args.output, "CSV result");

  LalondeArgs lal_args;
  auto* lal_cmd = app.add_subcommand("lalonde", "NSW reproduction: summary, estimates and balance tables");
  lal_cmd->option_defaults()->always_capture_default();
  lal_cmd->add_option("--data", lal_args.data, "NSW text file");
  lal_cmd->add_option("--epsilon", lal_args.epsilon, "OT penalty");
  lal_cmd->add_option("--divergence", lal_args.divergence, "balanced or kl:<rho>");
  lal_cmd->add_option("--tol", lal_args.tol, "IPFP tolerance");
  lal_cmd->add_option("--max-iter", lal_args.max_iter, "IPFP sweep budget");
  lal_cmd->add_option("--drop-threshold", lal_args.drop_threshold, "retained-mass cutoff");
  lal_cmd->add_option("--methods", lal_args.methods, "comma list of ot, ipw, knn<k>, unadjusted");
  lal_cmd->add_option("--bootstrap", lal_args.bootstrap, "bootstrap replicates for the sd columns (0 skips)");
  lal_cmd->add_option("--seed", lal_args.seed, "bootstrap seed");
  lal_cmd->add_option("--output-dir", lal_args.out_dir, "directory for the result files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "otmatch: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    match_args.threads = sim_args.threads = lal_args.threads = threads;
    if (*solve_cmd) return run_solve(solve_args);
    if (*match_cmd) return run_match(match_args);
    if (*sim_cmd) return run_simulate(sim_args);
    if (*diag_cmd) return run_diagnose(diag_args);
    if (*lal_cmd) return run_lalonde(lal_args);
  } catch (const Error& e) {
    std::cerr << "otmatch: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::invalid_argument& e) {
    std::cerr << "otmatch: invalid number (" << e.what() << ")\n";
    return static_cast<int>(ErrorKind::usage);
  } catch (const std::exception& e) {
    std::cerr << "otmatch: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::numeric);
  }
  return 0;
}
