#include "cli.hpp"

#include "rbsos/errors.hpp"
#include "rbsos/io.hpp"
#include "rbsos/sos.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace rbsos::cli {

using Eigen::VectorXd;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// invalid input detected after argument parsing
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string command;
  std::string file;
  int kmin = 0, kmax = 0, k = 0;
  std::optional<double> kappa;
  double tol = 1e-6;
  bool force = false;
  bool json = false;
  std::string dump_dir;
  std::vector<double> x, y;
  std::size_t samples = 1000;
};

struct Report {
  std::string command;
  std::string file;
  std::string digest;
  std::string status = "ok";
  json values = json::array();
  json certificates = json::array();
  std::vector<std::string> warnings;
  json timings = json::object();
  json result = json::object();
  std::vector<std::string> lines;  // text rendering
  int exit_code = ExitCode::ok;

  json to_json() const {
    return {{"command", command},
            {"input", {{"file", file}, {"sha256", digest}}},
            {"status", status},
            {"exit_code", exit_code},
            {"values", values},
            {"certificates", certificates},
            {"warnings", warnings},
            {"timings", timings},
            {"result", result}};
  }
};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

std::string fmt_vec(const VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i));
  return s + ")";
}

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json farkas_json(const FarkasCertificate& c) {
  json lam = json::array();
  for (const auto& l : c.lambda) lam.push_back(vec_json(l));
  return {{"lambda0", c.lambda0}, {"lambda", lam}, {"slack", c.slack}};
}

std::string closedness_warning(Closedness c) {
  return c == Closedness::unknown ? "closedness unknown: no sufficient condition for a closed cone holds, so a missing "
                                    "certificate is inconclusive"
                                  : "";
}

// --x/--y, or the file's feasible point
VectorXd point_from(const Options& o, const BilevelProblem& p, bool required) {
  if (!o.x.empty() || !o.y.empty()) {
    if (static_cast<int>(o.x.size()) != p.m || static_cast<int>(o.y.size()) != p.n)
      throw UsageError("--x needs " + std::to_string(p.m) + " values and --y needs " + std::to_string(p.n));
    VectorXd v(p.m + p.n);
    for (int i = 0; i < p.m; ++i) v(i) = o.x[static_cast<std::size_t>(i)];
    for (int i = 0; i < p.n; ++i) v(p.m + i) = o.y[static_cast<std::size_t>(i)];
    return v;
  }
  if (p.feasible_point) return *p.feasible_point;
  if (required) throw UsageError("no point given: pass --x and --y or set feasible_point in the file");
  return {};
}

void add_level_values(Report& rep, const std::vector<LevelResult>& levels) {
  json times = json::array();
  for (const LevelResult& l : levels) {
    json v = {{"k", l.k}, {"val", number_or_null(l.value)}, {"status", to_string(l.status)}};
    if (!l.message.empty()) v["message"] = l.message;
    v["iterations"] = l.iterations;
    v["rows"] = l.rows;
    v["variables"] = l.variables;
    v["largest_block"] = l.largest_block;
    if (l.status == LevelStatus::solved) {
      v["identity_residual"] = l.identity_residual;
      v["decomposition_residual"] = number_or_null(l.decomposition_residual);
      v["min_gram_eigenvalue"] = l.min_gram_eigenvalue;
    }
    rep.values.push_back(v);
    times.push_back({{"k", l.k}, {"seconds", l.seconds}});
  }
  rep.timings["levels"] = times;
}

std::string level_table(const std::vector<LevelResult>& levels) {
  std::ostringstream os;
  os << std::left << std::setw(4) << "k" << std::setw(16) << "value" << std::setw(11) << "status" << std::setw(7)
     << "rows" << std::setw(8) << "vars" << std::setw(7) << "block" << "seconds\n";
  for (const LevelResult& l : levels)
    os << std::setw(4) << l.k << std::setw(16) << fmt(l.value) << std::setw(11) << to_string(l.status) << std::setw(7)
       << l.rows << std::setw(8) << l.variables << std::setw(7) << l.largest_block << std::fixed
       << std::setprecision(2) << l.seconds << std::defaultfloat << "\n";
  std::string s = os.str();
  s.pop_back();
  return s;
}

std::string certificate_text(const SosMultipliers& m, const VariableLayout& layout) {
  std::ostringstream os;
  write_certificate(os, m, layout);
  return os.str();
}

std::string write_certificate_file(const Options& o, const std::string& text, int k) {
  if (o.dump_dir.empty()) return "";
  std::filesystem::create_directories(o.dump_dir);
  const auto path = std::filesystem::path(o.dump_dir) / ("certificate_k" + std::to_string(k) + ".txt");
  std::ofstream(path) << text;
  return path.string();
}

json sos_certificate_json(const CertifyResult& c, const SingleLevelProgram& slp, const Options& o) {
  const std::string text = certificate_text(*c.certificate, slp.layout);
  json j = {{"kind", "sos"},
            {"k", c.level.k},
            {"target", c.target},
            {"identity_residual", c.identity_residual},
            {"text", text}};
  const std::string path = write_certificate_file(o, text, c.level.k);
  if (!path.empty()) j["file"] = path;
  return j;
}

SosOptions sos_options(const Options& o) {
  SosOptions s;
  s.tol = o.tol;
  s.dump_dir = o.dump_dir;
  return s;
}

BilevelProblem load_bilevel(const std::string& text) {
  if (detect_problem_kind(text) != ProblemKind::bilevel)
    throw ProblemParseError("expected a bilevel problem file, found a farkas problem");
  return parse_bilevel(text);
}

void cmd_check_farkas(const Options& o, const std::string& text, Report& rep) {
  if (detect_problem_kind(text) != ProblemKind::farkas)
    throw ProblemParseError("expected \"kind\": \"farkas\" for check-farkas");
  const FarkasProblem fp = parse_farkas(text);
  const Closedness cl = closedness_sufficient(fp.constraints, fp.n);
  FarkasOptions fo;
  fo.tol = o.tol;
  const auto t0 = Clock::now();
  const FarkasSearch search = find_certificate(fp.p, fp.r, fp.constraints, fo);
  rep.timings["search_seconds"] = seconds_since(t0);
  const auto t1 = Clock::now();
  const ImplicationSample sample = check_implication_sampled(fp.p, fp.r, fp.constraints, o.samples, o.tol);
  rep.timings["sampling_seconds"] = seconds_since(t1);

  rep.result["implication"] = sample.holds ? "holds (sampled)" : "fails";
  rep.result["feasible_samples"] = sample.feasible_points;
  rep.result["min_sampled_slack"] = sample.min_value;
  if (sample.witness) rep.result["witness"] = vec_json(*sample.witness);
  rep.result["closedness"] = to_string(cl);
  rep.result["solver_status"] = conic::to_string(search.status);
  if (search.status == conic::SolveStatus::infeasible) rep.result["infeasibility_ray_residual"] = search.ray_residual;
  else rep.result["best_slack"] = search.best_slack;

  rep.lines.push_back("implication: " + rep.result["implication"].get<std::string>() + " (" +
                      std::to_string(sample.feasible_points) + " feasible samples)");
  if (!sample.holds) rep.lines.push_back("counterexample: " + fmt_vec(*sample.witness));
  if (search.certificate) {
    const bool ok = verify_certificate(*search.certificate, fp.p, fp.r, fp.constraints, o.tol);
    const CertificateResiduals res = certificate_residuals(*search.certificate, fp.p, fp.r, fp.constraints);
    json c = farkas_json(*search.certificate);
    c["kind"] = "farkas";
    c["verified"] = ok;
    c["residuals"] = {{"stationarity", res.stationarity},
                      {"slack", res.slack},
                      {"sign", res.sign},
                      {"pencil", res.pencil}};
    rep.certificates.push_back(c);
    rep.result["certificate"] = ok ? "found (verified)" : "found (failed verification)";
    rep.lines.push_back("certificate: " + rep.result["certificate"].get<std::string>());
    for (std::size_t j = 0; j < search.certificate->lambda0.size(); ++j)
      rep.lines.push_back("  constraint " + std::to_string(j + 1) + ": lambda0 = " +
                          fmt(search.certificate->lambda0[j]) + ", lambda = " + fmt_vec(search.certificate->lambda[j]));
    rep.lines.push_back("  slack = " + fmt(search.certificate->slack) + ", stationarity residual = " +
                        fmt(res.stationarity));
  } else {
    rep.result["certificate"] = "none";
    std::string why = search.status == conic::SolveStatus::infeasible
                          ? " (solver infeasibility certificate, ray residual " + fmt(search.ray_residual) + ")"
                          : " (best slack " + fmt(search.best_slack) + ")";
    rep.lines.push_back("certificate: none" + why);
  }
  rep.lines.push_back("closedness: " + to_string(cl));
  if (cl == Closedness::unknown) rep.warnings.push_back(closedness_warning(cl));
}

void cmd_solve(const Options& o, const std::string& text, Report& rep) {
  const BilevelProblem prob = load_bilevel(text);
  if (prob.kind() != LevelKind::box) throw UsageError("solve: the relaxation hierarchy needs box uncertainty sets");
  const VectorXd point = point_from(o, prob, true);
  HierarchyOptions ho;
  ho.k_min = o.kmin;
  ho.k_max = o.kmax;
  ho.kappa = o.kappa ? o.kappa : prob.kappa;
  ho.sos = sos_options(o);

  const HypothesisReport hyp = check_hypotheses(prob, point, o.tol);
  rep.warnings = hyp.warnings;
  if (prob.assert_coercive) rep.warnings.push_back("coercivity asserted in the problem file, not verified");
  rep.result["hypotheses"] = {{"point_feasible", hyp.point_feasible},
                              {"coercive", hyp.coercive},
                              {"coercivity_source", hyp.coercivity_source},
                              {"lsc", hyp.lsc},
                              {"lsc_points", hyp.lsc_points}};
  if (!hyp.point_feasible) throw HypothesisError("the point " + fmt_vec(point) + " is not robust feasible");
  if (!hyp.ok() && !o.force) {
    rep.status = "hypothesis-failure";
    rep.exit_code = ExitCode::hypothesis_failure;
    for (const auto& w : hyp.warnings) rep.lines.push_back("warning: " + w);
    rep.lines.push_back("hypotheses not met; rerun with --force to solve anyway");
    return;
  }

  const HierarchyReport hr = run_hierarchy(prob, point, ho);
  add_level_values(rep, hr.levels);
  rep.result["kappa"] = hr.kappa;
  rep.result["point"] = vec_json(point);
  rep.result["point_value"] = hr.point_value;
  rep.result["best_bound"] = number_or_null(hr.best_bound);
  rep.result["monotone"] = hr.monotone;
  rep.result["g_count"] = hr.g_count;
  rep.result["h_count"] = hr.h_count;
  rep.result["variables"] = hr.nvars;
  if (!hr.monotone) rep.warnings.push_back("level values are not monotone in k (numerical trouble)");

  rep.lines.push_back("problem: " + (prob.name.empty() ? std::string("(unnamed)") : prob.name) + ", " +
                      std::to_string(hr.g_count) + " inequalities, " + std::to_string(hr.h_count) +
                      " equalities, " + std::to_string(hr.nvars) + " variables");
  rep.lines.push_back("point: " + fmt_vec(point) + ", f = " + fmt(hr.point_value) + ", kappa = " + fmt(hr.kappa));
  rep.lines.push_back(level_table(hr.levels));
  rep.lines.push_back("best bound: " + fmt(hr.best_bound));

  // certify the point when the bound reaches f(point)
  const LevelResult* best = nullptr;
  for (const auto& l : hr.levels)
    if (l.status == LevelStatus::solved && (!best || l.value > best->value)) best = &l;
  rep.result["certified"] = false;
  if (best && best->value >= hr.point_value - o.tol) {
    const SingleLevelProgram slp = build_single_level(prob);
    const CertifyResult c = certify_from_level(slp, hr.kappa, hr.point_value, *best, o.tol);
    if (c.found) {
      rep.result["certified"] = true;
      rep.certificates.push_back(sos_certificate_json(c, slp, o));
      rep.lines.push_back("CERTIFIED: " + fmt(hr.point_value) + " is the global optimal value, attained at " +
                          fmt_vec(point) + " (degree " + std::to_string(best->k) + ")");
    } else {
      rep.lines.push_back("not certified: " + c.note);
    }
  }
  for (const auto& l : hr.levels)
    if (l.status == LevelStatus::failed) {
      rep.status = "indeterminate";
      rep.exit_code = ExitCode::indeterminate;
      rep.warnings.push_back("level k=" + std::to_string(l.k) + " failed: " + l.message);
    }
  for (const auto& w : rep.warnings) rep.lines.push_back("warning: " + w);
}

void cmd_check_feasible(const Options& o, const std::string& text, Report& rep) {
  const BilevelProblem prob = load_bilevel(text);
  const VectorXd point = point_from(o, prob, true);
  const VectorXd x = point.head(prob.m), y = point.tail(prob.n);
  rep.result["point"] = vec_json(point);
  if (prob.kind() == LevelKind::box) {
    const FeasibilityVerdict v = robust_feasible(prob, x, y, o.tol);
    rep.result["feasible"] = v.feasible;
    rep.result["upper_ok"] = v.upper_ok;
    rep.result["lower_ok"] = v.lower_ok;
    rep.result["upper_violation"] = v.upper_violation;
    if (v.mu) rep.result["mu"] = vec_json(*v.mu);
    if (v.lower) {
      rep.result["closedness"] = to_string(v.lower->closedness);
      if (v.lower->closedness_caveat) rep.warnings.push_back(closedness_warning(v.lower->closedness));
      if (v.lower->certificate) {
        json c = farkas_json(v.lower->certificate->dual);
        c["kind"] = "lower-dual";
        rep.certificates.push_back(c);
      }
    }
    rep.lines.push_back(std::string("robust feasible: ") + (v.feasible ? "true" : "false"));
    rep.lines.push_back(std::string("  upper level: ") + (v.upper_ok ? "ok" : "violated") +
                        " (worst case " + fmt(v.upper_violation) + ")");
    rep.lines.push_back(std::string("  lower level: ") + (v.lower_ok ? "y solves the robust lower problem" : "no"));
    if (v.mu) rep.lines.push_back("  multipliers: " + fmt_vec(*v.mu));
  } else {
    const BallFeasibilityVerdict v = ball_robust_feasible(prob, x, y, o.tol);
    rep.result["feasible"] = v.feasible;
    rep.result["closedness"] = to_string(v.closedness);
    if (v.certificate) {
      json c = farkas_json(v.certificate->dual);
      c["kind"] = "ball";
      c["upper_multipliers"] = v.certificate->upper_multipliers;
      c["lower_multipliers"] = v.certificate->lower_multipliers;
      rep.certificates.push_back(c);
    }
    if (!v.feasible && v.closedness == Closedness::unknown) rep.warnings.push_back(closedness_warning(v.closedness));
    rep.lines.push_back(std::string("robust feasible: ") + (v.feasible ? "true" : "false"));
  }
  for (const auto& w : rep.warnings) rep.lines.push_back("warning: " + w);
}

void cmd_check_lower(const Options& o, const std::string& text, Report& rep) {
  const BilevelProblem prob = load_bilevel(text);
  const VectorXd point = point_from(o, prob, true);
  const VectorXd x = point.head(prob.m), y = point.tail(prob.n);
  const LowerVerdict v = is_robust_solution(prob.lower, x, y, o.tol);
  rep.result["point"] = vec_json(point);
  rep.result["feasible"] = v.feasible;
  rep.result["robust_solution"] = v.robust_solution;
  rep.result["closedness"] = to_string(v.closedness);
  rep.result["closedness_caveat"] = v.closedness_caveat;
  rep.result["dual_slack"] = v.dual_slack;
  if (v.certificate) {
    json c = farkas_json(v.certificate->dual);
    c["kind"] = "lower-dual";
    if (!v.certificate->s_lemma.empty()) c["s_lemma"] = v.certificate->s_lemma;
    rep.certificates.push_back(c);
  }
  rep.lines.push_back(std::string("lower-level robust feasible: ") + (v.feasible ? "true" : "false"));
  std::string verdict = v.robust_solution ? "true" : "false";
  if (v.closedness_caveat) verdict += " (no certificate found; closedness unverified)";
  rep.lines.push_back("robust solution: " + verdict);
  rep.lines.push_back("closedness: " + to_string(v.closedness));
  if (v.closedness_caveat) rep.warnings.push_back(closedness_warning(v.closedness));
  for (const auto& w : rep.warnings) rep.lines.push_back("warning: " + w);
}

void cmd_certify(const Options& o, const std::string& text, Report& rep) {
  const BilevelProblem prob = load_bilevel(text);
  if (prob.kind() != LevelKind::box) throw UsageError("certify: the relaxation needs box uncertainty sets");
  const VectorXd point = point_from(o, prob, true);
  const SingleLevelProgram slp = build_single_level(prob);
  const double fval = prob.f.evaluate(point);
  double kappa = fval;
  if (o.kappa) kappa = *o.kappa;
  else if (prob.kappa && *prob.kappa >= fval) kappa = *prob.kappa;
  const int k = round_up_even(o.k > 0 ? o.k : slp.max_degree());
  const CertifyResult c = certify_global(prob, point, kappa, k, sos_options(o));
  add_level_values(rep, {c.level});
  rep.result["point"] = vec_json(point);
  rep.result["target"] = c.target;
  rep.result["kappa"] = kappa;
  rep.result["t_star"] = number_or_null(c.t_star);
  rep.result["found"] = c.found;
  rep.result["note"] = c.note;
  rep.lines.push_back("candidate: " + fmt_vec(point) + ", f = " + fmt(c.target) + ", kappa = " + fmt(kappa) +
                      ", k = " + std::to_string(k));
  rep.lines.push_back("best t at degree " + std::to_string(k) + ": " + fmt(c.t_star));
  if (c.found) {
    rep.certificates.push_back(sos_certificate_json(c, slp, o));
    rep.lines.push_back("certificate: found, identity residual " + fmt(c.identity_residual));
    rep.lines.push_back("CERTIFIED: " + fmt(c.target) + " is the global optimal value");
    std::istringstream is(rep.certificates.back()["text"].get<std::string>());
    for (std::string line; std::getline(is, line);) rep.lines.push_back("  " + line);
  } else {
    rep.lines.push_back("certificate: none");
    rep.lines.push_back("  " + c.note);
  }
  if (c.level.status == LevelStatus::failed) {
    rep.status = "indeterminate";
    rep.exit_code = ExitCode::indeterminate;
  }
}

void emit(const Report& rep, const Options& o, std::ostream& out) {
  if (o.json) {
    out << rep.to_json().dump(2) << "\n";
    return;
  }
  for (const auto& l : rep.lines) out << l << "\n";
  if (rep.status != "ok") out << "status: " << rep.status << "\n";
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) return "";
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Robust bilevel polynomial optimization toolkit"};
  app.name("rbsos");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto even = CLI::Validator(
      [](std::string& s) -> std::string {
        const int v = std::stoi(s);
        return v >= 0 && v % 2 == 0 ? "" : "must be an even nonnegative integer";
      },
      "EVEN");

  auto common = [&](CLI::App* sub) {
    sub->add_option("file", o.file, "problem file (JSON)")->required();
    sub->add_option("--tol", o.tol, "tolerance")->capture_default_str();
    sub->add_flag("--json", o.json, "print the machine-readable report");
  };
  auto point = [&](CLI::App* sub) {
    sub->add_option("--x", o.x, "upper-level point, comma separated")->delimiter(',')->allow_extra_args(false);
    sub->add_option("--y", o.y, "lower-level point, comma separated")->delimiter(',')->allow_extra_args(false);
  };
  auto relax = [&](CLI::App* sub) {
    sub->add_option("--kappa", o.kappa, "level bound, at least f at the point");
    sub->add_option("--dump-sdp", o.dump_dir, "write conic programs and certificates to this directory");
  };

  CLI::App* farkas = app.add_subcommand("check-farkas", "search a multiplier certificate for p^T x >= r");
  common(farkas);
  farkas->add_option("--samples", o.samples, "sampled points for the implication check")->capture_default_str();

  CLI::App* solve = app.add_subcommand("solve", "run the relaxation hierarchy");
  common(solve);
  point(solve);
  relax(solve);
  solve->add_option("--kmin", o.kmin, "smallest relaxation degree")->check(even);
  solve->add_option("--kmax", o.kmax, "largest relaxation degree")->check(even);
  solve->add_flag("--force", o.force, "solve even when a hypothesis check fails");

  CLI::App* feas = app.add_subcommand("check-feasible", "robust feasibility of (x, y)");
  common(feas);
  point(feas);

  CLI::App* lower = app.add_subcommand("check-lower", "is y a robust solution of the lower level at x");
  common(lower);
  point(lower);

  CLI::App* cert = app.add_subcommand("certify", "search a global optimality certificate at (x, y)");
  common(cert);
  point(cert);
  relax(cert);
  cert->add_option("--k", o.k, "relaxation degree")->check(even);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  for (const auto& a : args) o.json = o.json || a == "--json";
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (o.json) {
      Report rep;
      rep.status = "parse-error";
      rep.exit_code = ExitCode::parse_error;
      rep.warnings.push_back(e.what());
      out << rep.to_json().dump(2) << "\n";
    }
    return ExitCode::parse_error;
  }
  if (o.kmin > 0 && o.kmax > 0 && o.kmax < o.kmin) {
    err << "error: --kmax is below --kmin\n";
    return ExitCode::parse_error;
  }
  if (o.kmin > 0 && o.kmax == 0) o.kmax = o.kmin;

  Report rep;
  for (CLI::App* sub : app.get_subcommands()) rep.command = sub->get_name();
  rep.file = o.file;
  const auto t0 = Clock::now();
  auto fail = [&](const std::string& status, int code, const std::string& msg) {
    rep.status = status;
    rep.exit_code = code;
    rep.warnings.push_back(msg);
    rep.lines.push_back("error: " + msg);
    err << "error: " << msg << "\n";
  };
  std::string text;
  try {
    text = read_file(o.file);
  } catch (const std::exception& e) {
    fail("parse-error", ExitCode::parse_error, e.what());
    emit(rep, o, out);
    return rep.exit_code;
  }
  rep.digest = sha256_hex(text);
  try {
    if (rep.command == "check-farkas") cmd_check_farkas(o, text, rep);
    else if (rep.command == "solve") cmd_solve(o, text, rep);
    else if (rep.command == "check-feasible") cmd_check_feasible(o, text, rep);
    else if (rep.command == "check-lower") cmd_check_lower(o, text, rep);
    else cmd_certify(o, text, rep);
  } catch (const ProblemParseError& e) {
    fail("parse-error", ExitCode::parse_error, std::string(o.file) + ": " + e.what());
  } catch (const UsageError& e) {
    fail("parse-error", ExitCode::parse_error, e.what());
  } catch (const HypothesisError& e) {
    fail("hypothesis-failure", ExitCode::hypothesis_failure, e.what());
  } catch (const IndeterminateError& e) {
    fail("indeterminate", ExitCode::indeterminate, e.what());
  } catch (const CapExceededError& e) {
    fail("indeterminate", ExitCode::indeterminate, e.what());
  } catch (const std::invalid_argument& e) {
    fail("parse-error", ExitCode::parse_error, e.what());
  } catch (const std::exception& e) {
    fail("indeterminate", ExitCode::indeterminate, e.what());
  }
  rep.timings["total_seconds"] = seconds_since(t0);
  emit(rep, o, out);
  return rep.exit_code;
}

}  // namespace rbsos::cli
