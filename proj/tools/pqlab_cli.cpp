// pqlab command-line front end. Every subcommand reads one JSON config
// (defaults < --config file < flags) and writes CSV/JSON into --out.
//
// Exit codes: 0 ok (including "no solutions granted"), 1 usage or bad
// config, 2 numerical budget exhausted, 3 invariant violated.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pqlab/pqlab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pqlab;

namespace {

enum Exit { exit_ok = 0, exit_usage = 1, exit_budget = 2, exit_invariant = 3 };

class invariant_violation : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

json default_config() {
  return {
      {"domain", "interval:1"},
      {"n", 2048},
      {"p", 3.0},
      {"q", 1.5},
      {"alpha", 0.0},
      {"beta", 8.0},
      {"seed", 1},
      {"workers", 1},
      {"out", "pqlab_out"},
      {"pgm", false},
      {"eigs", {{"r", {1.5, 3.0}}, {"kmax", 4}}},
      {"curve", {{"alpha", nullptr}, {"alpha_min", nullptr}, {"alpha_max", nullptr}, {"samples", 32}, {"duality", false}}},
      {"classify", {{"kmax", 6}}},
      {"solve",
       {{"k", nullptr},
        {"l", nullptr},
        {"starts_per_level", 64},
        {"max_steps", 100000},
        {"min_starts", 0},
        {"sweep_beta", {{"from", nullptr}, {"to", nullptr}, {"samples", 0}, {"k", 2}}}}},
      {"beads", {{"k", 2}, {"r", 0.45}, {"eps", {0.2, 0.1, 0.05}}, {"nx", 256}, {"ny", 128}}},
      {"check", {{"sign_samples", 10000}, {"nehari_samples", 1000}, {"gradient_pairs", 100}, {"gradient_h", 1e-5}}},
      {"tolerances",
       {{"eps_reg", 1e-10},
        {"tol_curve", 1e-6},
        {"tol_eig", 1e-6},
        {"tol_res", 1e-6},
        {"tol_solve", 1e-6},
        {"tol_newton", 1e-10},
        {"tol_level", 1e-9},
        {"sep_tol", 1e-3}}},
  };
}

ProblemParams params(const json& cfg) {
  ProblemParams prm;
  prm.p = cfg.at("p");
  prm.q = cfg.at("q");
  prm.alpha = cfg.at("alpha");
  prm.beta = cfg.at("beta");
  prm.eps_reg = cfg.at("tolerances").at("eps_reg");
  prm.validate();
  return prm;
}

BeadsSpec beads_spec(const json& cfg) {
  const auto& b = cfg.at("beads");
  BeadsSpec s;
  s.k = b.at("k");
  s.r = b.at("r");
  s.nx = b.at("nx");
  s.ny = b.at("ny");
  const auto& eps = b.at("eps");
  s.eps = eps.empty() ? 0.0 : eps.front().get<double>();
  return s;
}

struct Setup {
  MeshPtr mesh;
  std::optional<BeadsSpec> beads;
};

double parse_number(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw invalid_input("cannot parse " + what + " from '" + s + "'");
  return v;
}

Setup make_setup(const json& cfg) {
  const std::string d = cfg.at("domain");
  if (d.rfind("interval:", 0) == 0)
    return {Mesh::build(Domain::interval(parse_number(d.substr(9), "interval length")), cfg.at("n")), {}};
  if (d == "beads" || d.rfind("beads:", 0) == 0) {
    BeadsSpec s = beads_spec(cfg);
    if (d.size() > 6) s.eps = parse_number(d.substr(6), "beads eps");
    return {Mesh::build(build_beads(s)), s};
  }
  throw invalid_input("unknown domain '" + d + "' (expected interval:L, beads or beads:EPS)");
}

SpectralTable make_table(const Setup& st, const std::vector<double>& rs, int kmax) {
  SpectralTable t;
  for (double r : rs) {
    if (st.mesh->dim() == 1) {
      t.merge(spectral_table_1d(r, kmax, st.mesh));
      continue;
    }
    if (kmax >= 1) t.add({r, 1, first_eigenpair(r, st.mesh).lambda, EigMethod::flow, st.mesh->id()});
    if (st.beads && st.beads->k > 1 && kmax >= st.beads->k) {
      std::vector<std::vector<std::uint8_t>> pieces;
      for (int j = 1; j <= st.beads->k; ++j) pieces.push_back(disk_mask(*st.beads, j));
      const auto bb = bump_upper_bound(r, st.mesh, pieces);
      if (bb.certified) t.add({r, st.beads->k, bb.value, EigMethod::bump_upper, st.mesh->id()});
    }
  }
  return t;
}

class Output {
 public:
  explicit Output(const json& cfg) : dir_(cfg.at("out").get<std::string>()), meta_(run_metadata(cfg)) {
    fs::create_directories(dir_);
  }
  const json& meta() const { return meta_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  std::ofstream open(const std::string& name) const {
    std::ofstream os(path(name), std::ios::binary);
    if (!os) throw invalid_input("cannot write " + path(name).string());
    return os;
  }
  template <class F>
  void csv(const std::string& name, F&& body) const {
    auto os = open(name);
    os << "# " << meta_.dump() << '\n';
    body(os);
  }
  void write_json(const std::string& name, json j) const {
    j["metadata"] = meta_;
    open(name) << j.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  json meta_;
};

json stats_json(const SearchStats& s) {
  return {{"starts", s.starts},       {"steps", s.steps},     {"accepted", s.accepted},
          {"to_zero", s.to_zero},     {"duplicates", s.duplicates}, {"failed", s.failed},
          {"barrier_crossings", s.barrier_crossings}};
}

SolveOptions solve_options(const json& cfg) {
  const auto& s = cfg.at("solve");
  const auto& t = cfg.at("tolerances");
  SolveOptions o;
  o.tol_solve = t.at("tol_solve");
  o.tol_newton = t.at("tol_newton");
  o.tol_level = t.at("tol_level");
  o.sep_tol = t.at("sep_tol");
  o.starts_per_level = s.at("starts_per_level");
  o.max_steps = s.at("max_steps");
  o.min_starts = s.at("min_starts");
  o.seed = cfg.at("seed");
  o.workers = cfg.at("workers");
  return o;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

// ---------------------------------------------------------------------------

int cmd_eigs(const json& cfg) {
  const Output out(cfg);
  const auto st = make_setup(cfg);
  const int kmax = cfg.at("eigs").at("kmax");
  if (kmax < 0) throw invalid_input("eigs: kmax must be >= 0");
  const auto table = make_table(st, cfg.at("eigs").at("r").get<std::vector<double>>(), kmax);
  out.csv("eigs.csv", [&](std::ostream& os) { table.write_csv(os); });
  json rows = json::array();
  for (const auto& e : table.entries())
    rows.push_back({{"r", e.r}, {"k", e.k}, {"value", e.value}, {"method", to_string(e.method)}});
  out.write_json("eigs.json", {{"domain", st.mesh->id()}, {"rows", rows}, {"monotone", table.is_monotone()}});
  if (!table.is_monotone()) throw invariant_violation("eigs: table is not monotone in k");
  std::cout << table.entries().size() << " rows -> " << out.path("eigs.csv").string() << '\n';
  return exit_ok;
}

int cmd_curve(const json& cfg) {
  const Output out(cfg);
  const auto st = make_setup(cfg);
  CurveSolver solver(st.mesh, params(cfg));
  const auto& c = solver.constants();
  const auto& cc = cfg.at("curve");
  std::vector<double> alphas;
  if (!cc.at("alpha").is_null()) {
    alphas = {cc.at("alpha").get<double>()};
  } else {
    const double lo = cc.at("alpha_min").is_null() ? c.lambda1p : cc.at("alpha_min").get<double>();
    const double hi = cc.at("alpha_max").is_null() ? 1.5 * c.alpha_star : cc.at("alpha_max").get<double>();
    const int n = cc.at("samples");
    if (n < 1 || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw invalid_input("curve: need samples >= 1 and a finite range alpha_min <= alpha_max");
    alphas = linspace(lo, hi, n);
  }
  const auto curve = sample_curve(solver, alphas);
  out.csv("curve.csv", [&](std::ostream& os) { curve.write_csv(os); });
  json j{{"constants",
          {{"lambda1_p", c.lambda1p}, {"lambda1_q", c.lambda1q}, {"alpha_star", c.alpha_star}, {"beta_star", c.beta_star}}},
         {"points", curve.points.size()},
         {"nonincreasing", curve.is_nonincreasing()}};
  if (cc.at("duality").get<bool>()) {
    const auto d = check_curve_duality(solver, alphas);
    j["duality"] = {{"rows", d.rows.size()}, {"max_deviation", d.max_deviation}, {"lower_side_ok", d.lower_side_ok}};
  }
  out.write_json("curve.json", j);
  if (!curve.is_nonincreasing()) throw invariant_violation("curve: beta*(alpha) is not nonincreasing");
  std::cout << "lambda1(p)=" << c.lambda1p << " lambda1(q)=" << c.lambda1q << " alpha*=" << c.alpha_star
            << " beta*=" << c.beta_star << '\n';
  return exit_ok;
}

ClassifyInputs classify_inputs(const json& cfg, const Setup& st, CurveSolver& solver) {
  const auto prm = params(cfg);
  auto in = make_classify_inputs(solver, make_table(st, {prm.p, prm.q}, cfg.at("classify").at("kmax")), prm);
  const auto& t = cfg.at("tolerances");
  in.tol_curve = t.at("tol_curve");
  in.tol_eig = t.at("tol_eig");
  in.tol_res = t.at("tol_res");
  return in;
}

int cmd_classify(const json& cfg) {
  const Output out(cfg);
  const auto st = make_setup(cfg);
  CurveSolver solver(st.mesh, params(cfg));
  const auto v = classify(classify_inputs(cfg, st, solver));
  out.write_json("classify.json", {{"verdict", v.to_json()}});
  std::cout << "k=" << v.k << " (" << v.k_citation << ") l=" << v.l << " (" << v.l_citation << ")\n";
  return exit_ok;
}

/// Numerical probe of the β range between the tabulated thresholds; it
/// reports what the search finds and issues no verdict.
int sweep_beta(const json& cfg, const Setup& st, const Output& out) {
  const auto& sw = cfg.at("solve").at("sweep_beta");
  const int n = sw.at("samples");
  if (sw.at("from").is_null() || sw.at("to").is_null()) throw invalid_input("sweep_beta: from and to are required");
  const int k = sw.at("k");
  auto prm = params(cfg);
  auto opt = solve_options(cfg);
  json rows = json::array();
  for (double b : linspace(sw.at("from"), sw.at("to"), n)) {
    SearchStats stats;
    int found = 0;
    bool exhausted = false;
    try {
      found = find_negative(k, st.mesh, prm.with(prm.alpha, b), opt, nullptr, &stats).size();
    } catch (const budget_error& e) {
      found = e.registry().size();
      exhausted = true;
    }
    rows.push_back({{"beta", b}, {"pairs_found", found}, {"budget_exhausted", exhausted}, {"stats", stats_json(stats)}});
  }
  out.csv("sweep.csv", [&](std::ostream& os) {
    os << "beta,pairs_found,budget_exhausted\n";
    for (const auto& r : rows) os << r["beta"] << ',' << r["pairs_found"] << ',' << r["budget_exhausted"] << '\n';
  });
  out.write_json("sweep.json", {{"k_probe", k}, {"rows", rows}, {"verdict", nullptr}, {"note", "exploratory"}});
  return exit_ok;
}

int cmd_solve(const json& cfg) {
  const Output out(cfg);
  const auto st = make_setup(cfg);
  if (cfg.at("solve").at("sweep_beta").at("samples").get<int>() > 0) return sweep_beta(cfg, st, out);
  const auto prm = params(cfg);
  CurveSolver solver(st.mesh, prm);
  const auto v = classify(classify_inputs(cfg, st, solver));
  const auto& sc = cfg.at("solve");
  const int k = sc.at("k").is_null() ? v.k : sc.at("k").get<int>();
  const int l = sc.at("l").is_null() ? v.l : sc.at("l").get<int>();
  const auto opt = solve_options(cfg);

  SolutionRegistry reg(prm.p, opt.sep_tol);
  SearchStats neg, pos;
  json errors = json::array();
  int code = exit_ok;
  auto collect = [&](const SolutionRegistry& r) {
    for (const auto& e : r.entries()) reg.add(e);
  };
  auto guarded = [&](auto&& search) {
    try {
      collect(search());
    } catch (const budget_error& e) {
      collect(e.registry());
      errors.push_back(e.what());
      code = exit_budget;
    }
  };
  if (k > 0) guarded([&] { return find_negative(k, st.mesh, prm, opt, nullptr, &neg); });
  if (l > 0) guarded([&] { return find_positive(l, st.mesh, prm, opt, nullptr, &pos); });
  reg.sort_by_energy();

  out.csv("registry.csv", [&](std::ostream& os) { reg.write_csv(os); });
  json sols = json::array();
  for (int i = 0; i < reg.size(); ++i) {
    const auto& e = reg.entries()[i];
    auto r = verify_solution(e.u, prm).to_json();
    r["level_tag"] = e.level_tag;
    sols.push_back(r);
    const std::string name = detail::concat("solution_", i);
    auto os = out.open(name + ".csv");
    write_grid_function(os, e.u, out.meta());
    if (cfg.at("pgm").get<bool>() && st.mesh->dim() == 2) {
      auto pg = out.open(name + ".pgm");
      write_pgm(pg, *st.mesh, &e.u);
    }
  }
  out.write_json("solve.json", {{"verdict", v.to_json()},
                                {"k_run", k},
                                {"l_run", l},
                                {"negative_search", stats_json(neg)},
                                {"positive_search", stats_json(pos)},
                                {"solutions", sols},
                                {"errors", errors}});
  std::cout << "verdict k=" << v.k << " l=" << v.l << ", " << reg.size() << " pairs found\n";
  for (const auto& e : errors) std::cerr << "budget: " << e.get<std::string>() << '\n';
  return code;
}

int cmd_beads(const json& cfg) {
  const Output out(cfg);
  const auto base = beads_spec(cfg);
  const auto eps = cfg.at("beads").at("eps").get<std::vector<double>>();
  // resolution problems are configuration errors: fail before any solve
  for (double e : eps) {
    BeadsSpec s = base;
    s.eps = e;
    const auto d = build_beads(s);
    if (cfg.at("pgm").get<bool>()) {
      auto os = out.open(detail::concat("beads_eps", e, ".pgm"));
      write_pgm(os, *Mesh::build(d));
    }
  }
  const auto rep = beads_experiment(base, eps, params(cfg), cfg.at("workers"));
  out.csv("beads.csv", [&](std::ostream& os) { rep.write_csv(os); });
  json rows = json::array();
  bool failed = false;
  for (const auto& r : rep.rows) {
    json j{{"eps", r.eps},
           {"lambda1_p", r.lambda1_p},
           {"lambda1_q", r.lambda1_q},
           {"bump_bound", r.bump_bound},
           {"bound_certified", r.bound_certified},
           {"beta_star", r.beta_star},
           {"margin", r.margin},
           {"components", r.components}};
    if (r.error) {
      j["error"] = *r.error;
      failed = true;
      std::cerr << "eps=" << r.eps << ": " << *r.error << '\n';
    }
    rows.push_back(j);
  }
  out.write_json("beads.json", {{"rows", rows},
                                {"lambda_monotone", rep.lambda_monotone},
                                {"beta_star_monotone", rep.beta_star_monotone},
                                {"margin_increasing", rep.margin_increasing},
                                {"smallest_positive", rep.smallest_positive}});
  for (const auto& r : rep.rows)
    if (!r.error) std::cout << "eps=" << r.eps << " beta*=" << r.beta_star << " bound=" << r.bump_bound << " margin=" << r.margin << '\n';
  return failed ? exit_budget : exit_ok;
}

int cmd_check(const json& cfg) {
  const Output out(cfg);
  const auto st = make_setup(cfg);
  const auto prm = params(cfg);
  const auto& cc = cfg.at("check");
  const std::uint64_t seed = cfg.at("seed");
  json j;
  bool ok = true;

  // H > 0 everywhere at α = 0, and a large β makes G < 0 on most draws
  const auto nehari = check_nehari_algebra(st.mesh, prm.with(0.0, 60.0), cc.at("nehari_samples"), seed);
  j["nehari"] = nehari.to_json();
  ok &= nehari.ok();

  const auto grad = check_gradient(st.mesh, prm.with(10.0, 3.0), cc.at("gradient_pairs"), seed, cc.at("gradient_h"));
  j["gradient"] = grad.to_json();
  ok &= grad.ok();

  CurveSolver solver(st.mesh, prm);
  const auto& c = solver.constants();
  const double a = c.lambda1p + 0.25 * (c.alpha_star - c.lambda1p);
  const auto bs = solver.beta_star_of_alpha(a);
  SignLemmaContext ctx;
  ctx.lambda1_p = c.lambda1p;
  ctx.lambda1_q = c.lambda1q;
  ctx.beta_star_alpha = bs.value.value();
  ctx.tol_curve = cfg.at("tolerances").at("tol_curve");
  ctx.tol_level = cfg.at("tolerances").at("tol_level");
  // β close to β*(α) so that [G < 0] is not a thin set
  const auto sp = prm.with(a, c.lambda1q + 0.9 * (ctx.beta_star_alpha - c.lambda1q));
  json sign = json::array();
  for (auto clause : {SignClause::h_nonpos_implies_g_pos, SignClause::g_neg_implies_h_pos,
                      SignClause::g_nonpos_implies_h_nonneg}) {
    // [G < 0] lives near φ_q, [H ≤ 0] is sharp at the β*(α) minimizer
    ctx.sharp_point = clause == SignClause::h_nonpos_implies_g_pos ? bs.minimizer : c.phi_q.phi;
    const auto r = check_sign_lemma(st.mesh, sp, clause, cc.at("sign_samples"), seed, ctx, cfg.at("workers"));
    sign.push_back(r.to_json());
    ok &= r.hypothesis_ok && r.violations == 0;
  }
  j["sign_lemma"] = sign;

  const auto table = make_table(st, {prm.p, prm.q}, cfg.at("classify").at("kmax"));
  j["spectral_monotone"] = table.is_monotone();
  ok &= table.is_monotone();
  j["ok"] = ok;
  out.write_json("check.json", j);
  std::cout << (ok ? "all property suites passed\n" : "property suite failure, see check.json\n");
  if (!ok) throw invariant_violation("check: property suite failure");
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical points of the (p,q)-Laplacian energy: spectra, curves, multiplicity"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  json over = json::object();
  std::string config_file;
  bool print_config = false;
  app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("--print-config", print_config, "print the effective config and exit");
  app.add_option_function<int>("--workers", [&](int v) { over["workers"] = v; }, "worker threads");
  app.add_option_function<std::string>("--out", [&](const std::string& v) { over["out"] = v; }, "output directory");
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { over["seed"] = v; }, "random seed");
  app.add_option_function<std::string>("--domain", [&](const std::string& v) { over["domain"] = v; },
                                       "interval:L, beads or beads:EPS");
  app.add_option_function<int>("--n", [&](int v) { over["n"] = v; }, "interior nodes (interval)");
  app.add_option_function<double>("--p", [&](double v) { over["p"] = v; });
  app.add_option_function<double>("--q", [&](double v) { over["q"] = v; });
  app.add_option_function<double>("--alpha", [&](double v) { over["alpha"] = v; });
  app.add_option_function<double>("--beta", [&](double v) { over["beta"] = v; });
  app.add_flag_function("--pgm", [&](std::int64_t) { over["pgm"] = true; }, "also dump 2D functions as PGM");

  auto* eigs = app.add_subcommand("eigs", "spectral table");
  eigs->add_option_function<std::vector<double>>("--r", [&](const std::vector<double>& v) { over["eigs"]["r"] = v; });
  eigs->add_option_function<int>("--kmax", [&](int v) { over["eigs"]["kmax"] = v; });

  auto* curve = app.add_subcommand("curve", "sample beta*(alpha)");
  curve->add_option_function<double>("--at", [&](double v) { over["curve"]["alpha"] = v; }, "single alpha");
  curve->add_option_function<int>("--samples", [&](int v) { over["curve"]["samples"] = v; });
  curve->add_flag_function("--duality", [&](std::int64_t) { over["curve"]["duality"] = true; });

  auto* cls = app.add_subcommand("classify", "which multiplicity result applies at (alpha, beta)");
  auto* solve = app.add_subcommand("solve", "classify, then search for the granted solutions");
  solve->add_option_function<int>("--k", [&](int v) { over["solve"]["k"] = v; }, "negative-energy pairs to seek");
  solve->add_option_function<int>("--l", [&](int v) { over["solve"]["l"] = v; }, "positive-energy pairs to seek");
  solve->add_option_function<int>("--starts", [&](int v) { over["solve"]["starts_per_level"] = v; });
  solve->add_option_function<std::vector<double>>(
      "--sweep-beta",
      [&](const std::vector<double>& v) {
        over["solve"]["sweep_beta"] = {{"from", v.at(0)}, {"to", v.at(1)}, {"samples", static_cast<int>(v.at(2))}};
      },
      "FROM TO N: exploratory beta sweep")
      ->expected(3);

  auto* beads = app.add_subcommand("beads", "bump bound against beta* on the beads domain");
  beads->add_option_function<std::vector<double>>("--eps", [&](const std::vector<double>& v) { over["beads"]["eps"] = v; });
  beads->add_option_function<int>("--nx", [&](int v) { over["beads"]["nx"] = v; });
  beads->add_option_function<int>("--ny", [&](int v) { over["beads"]["ny"] = v; });

  auto* check = app.add_subcommand("check", "property suites");
  check->add_option_function<int>("--samples", [&](int v) { over["check"]["sign_samples"] = v; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_usage;
  }

  try {
    json cfg = default_config();
    if (!config_file.empty()) {
      std::ifstream is(config_file);
      cfg.merge_patch(json::parse(is));
    }
    cfg.merge_patch(over);
    if (print_config) {
      std::cout << cfg.dump(2) << '\n';
      return exit_ok;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return exit_usage;
    }
    auto* sub = app.get_subcommands().front();
    if (sub == eigs) return cmd_eigs(cfg);
    if (sub == curve) return cmd_curve(cfg);
    if (sub == cls) return cmd_classify(cfg);
    if (sub == solve) return cmd_solve(cfg);
    if (sub == beads) return cmd_beads(cfg);
    if (sub == check) return cmd_check(cfg);
  } catch (const invalid_input& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const construction_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const not_applicable& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_usage;
  } catch (const convergence_error& e) {
    std::cerr << "budget: " << e.what() << '\n';
    return exit_budget;
  } catch (const std::exception& e) {
    std::cerr << "invariant: " << e.what() << '\n';
    return exit_invariant;
  }
  return exit_usage;
}
