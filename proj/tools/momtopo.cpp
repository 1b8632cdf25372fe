// momtopo: command-line front end. Subcommands assemble, bound, optimize,
// sensitivity, eval and verify. Exit codes: 0 ok, 1 usage or other error,
// 2 configuration, 3 I/O or file format, 4 numerical failure.

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "momtopo/config.hpp"
#include "momtopo/momtopo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace momtopo;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_config = 2;
constexpr int exit_io = 3;
constexpr int exit_numerical = 4;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

// Non-finite doubles become null rather than invalid JSON.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "" : (v > 0 ? "inf" : "-inf");
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::pair<double, double> parse_plate(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x != std::string::npos) {
      std::size_t p1 = 0, p2 = 0;
      const double a = std::stod(s.substr(0, x), &p1);
      const double b = std::stod(s.substr(x + 1), &p2);
      if (p1 == x && p2 == s.size() - x - 1) return {a, b};
    }
  } catch (const std::exception&) {
  }
  throw InvalidArgument("--plate expects LXxLY, e.g. 2x1");
}

/// Applies gap and fixed-DOF settings of a run configuration to a loaded set.
void apply_config(OperatorSet& ops, const RunConfig& rc) {
  check_config_against(rc, ops.n_dof());
  if (rc.gap_dof) {
    DofList keep;
    for (int f : ops.fixed)
      if (std::find(ops.gaps.begin(), ops.gaps.end(), f) == ops.gaps.end()) keep.push_back(f);
    ops.fixed = keep;
    ops.V = assemble_excitation(ops.mesh, ExcitationSpec::delta_gap(*rc.gap_dof), ops.k);
    ops.gaps = {*rc.gap_dof};
    ops.fixed.push_back(*rc.gap_dof);
  }
  ops.fixed.insert(ops.fixed.end(), rc.fixed_dofs.begin(), rc.fixed_dofs.end());
  std::sort(ops.fixed.begin(), ops.fixed.end());
  ops.fixed.erase(std::unique(ops.fixed.begin(), ops.fixed.end()), ops.fixed.end());
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

/// "ones", "zeros", or a gene text file.
Gene read_gene(const std::string& arg, const ParamPtr& param) {
  if (arg == "ones") return Gene::ones(param);
  if (arg == "zeros") return Gene::zeros(param);
  return gene_from_text(read_file(arg), param);
}

/// Bound on the evaluation domain, or nullopt when disabled.
std::optional<BoundResult> run_bound(const OperatorSet& ops, const RunConfig& rc) {
  if (!rc.bound_auto) return std::nullopt;
  std::optional<DofList> mask;
  if (!rc.objective.eval_domain.empty()) mask = rc.objective.eval_domain;
  return solve_bound(ops, mask);
}

std::optional<double> bound_value(const OperatorSet& ops, const RunConfig& rc) {
  if (rc.q_lb) return rc.q_lb;
  if (auto b = run_bound(ops, rc)) return b->q_lb;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

struct AssembleArgs {
  std::string plate = "2x1";
  int nx = 16, ny = 8;
  double ka = 0.5;
  double fd_delta = 1e-4;
  int l_max = 0;
  std::string out;
  int threads = 1;
};

int cmd_assemble(const AssembleArgs& a) {
  const auto [lx, ly] = parse_plate(a.plate);
  PlateSpec spec{lx, ly, a.nx, a.ny, a.ka};
  spec.validate();
  BuildOptions opt;
  opt.fd_delta = a.fd_delta;
  opt.l_max = a.l_max;
  opt.threads = a.threads;
  const auto t0 = std::chrono::steady_clock::now();
  const auto ops = build_operators(spec, opt);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_operators(ops, a.out);
  std::cout << "N_dof " << ops.n_dof() << "\n"
            << "feed_dof " << ops.gaps.front() << "\n"
            << "assembly_seconds " << std::fixed << std::setprecision(3) << dt << "\n";
  return exit_ok;
}

struct BoundArgs {
  std::string ops, out, current, config;
};

int cmd_bound(const BoundArgs& a) {
  const auto ops = load_operators(a.ops);
  const RunConfig rc = config_or_default(a.config);
  check_config_against(rc, ops.n_dof());
  std::optional<DofList> mask;
  if (!rc.objective.eval_domain.empty()) mask = rc.objective.eval_domain;
  const auto b = solve_bound(ops, mask);
  json j{{"q_lb", b.q_lb},
         {"nu", b.nu},
         {"iterations", b.iterations},
         {"primal_q", b.primal_q},
         {"constraint_residual", b.constraint_residual},
         {"normalization_residual", b.normalization_residual},
         {"eigen_residual", b.eigen_residual},
         {"n_dof", ops.n_dof()},
         {"ka", ops.ka}};
  if (a.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json(a.out, j);
  if (!a.current.empty()) {
    std::ostringstream os;
    os << "dof,re,im\n";
    for (int n = 0; n < ops.n_dof(); ++n) os << n << ',' << fmt(b.current[n].real()) << ',' << fmt(b.current[n].imag()) << '\n';
    write_file(a.current, os.str());
  }
  return exit_ok;
}

struct OptimizeArgs {
  std::string ops, config, out_dir;
  int threads = 0;
};

std::string trace_csv(const MemeticResult& r) {
  std::ostringstream os;
  os << "j,i,agent,f,q,active_dofs\n";
  for (const auto& t : r.trace)
    os << t.j << ',' << t.i << ',' << t.agent << ',' << fmt(t.f) << ',' << fmt(t.q) << ',' << t.active_dofs << '\n';
  return os.str();
}

struct OptimizeRun {
  MemeticResult result;
  std::optional<double> f_bound;
  ParamPtr param;
};

OptimizeRun run_optimize(OperatorSet& ops, const RunConfig& rc, int j_max_override = -1) {
  apply_config(ops, rc);
  const Objective obj(ops, rc.objective);
  OptimizeRun run;
  run.param = make_parameterization(ops.n_dof(), ops.fixed);
  run.f_bound = bound_value(ops, rc);
  MemeticConfig cfg = rc.memetic;
  if (j_max_override >= 0) cfg.j_max = std::min(cfg.j_max, j_max_override);
  run.result = memetic_run(ops, obj, run.param, cfg, run.f_bound);
  return run;
}

int cmd_optimize(const OptimizeArgs& a) {
  RunConfig rc = load_config(a.config);
  if (a.threads > 0) rc.memetic.threads = a.threads;
  if (!fs::is_directory(a.out_dir)) throw IoError("output directory does not exist: " + a.out_dir);
  const std::string started = utc_now();
  auto ops = load_operators(a.ops);
  const auto run = run_optimize(ops, rc);
  const auto& r = run.result;

  const fs::path dir(a.out_dir);
  const std::string trace_path = (dir / "trace.csv").string();
  const std::string result_path = (dir / "result.json").string();
  const std::string manifest_path = (dir / "manifest.json").string();
  write_file(trace_path, trace_csv(r));

  json result{{"best_f", number(r.best_f)},
              {"best_q", run.f_bound ? number(r.best_f / *run.f_bound) : json(nullptr)},
              {"f_bound", run.f_bound ? json(*run.f_bound) : json(nullptr)},
              {"gene", gene_hex(r.best)},
              {"gene_text", to_text(r.best)},
              {"active_dofs", r.best.active_dofs()},
              {"generations", r.generations},
              {"evaluations", r.evaluations},
              {"failed_agents", r.failed},
              {"termination", to_string(r.reason)}};
  json gens = json::array();
  for (const auto& s : r.stats) gens.push_back({{"j", s.j}, {"best", number(s.best)}, {"worst", number(s.worst)}, {"mean", number(s.mean)}});
  result["generation_stats"] = gens;
  write_json(result_path, result);

  json manifest{{"tool", "momtopo"},
                {"version", momtopo_version},
                {"config", {{"path", fs::absolute(a.config).string()}, {"sha256", sha256_file(a.config)}}},
                {"operators", {{"path", fs::absolute(a.ops).string()}, {"sha256", sha256_file(a.ops)}}},
                {"seed", rc.memetic.seed},
                {"threads", rc.memetic.threads},
                {"started", started},
                {"finished", utc_now()},
                {"termination", to_string(r.reason)},
                {"trace", {{"path", fs::absolute(trace_path).string()}, {"sha256", sha256_file(trace_path)}}},
                {"result", {{"path", fs::absolute(result_path).string()}, {"sha256", sha256_file(result_path)}}}};
  write_json(manifest_path, manifest);

  std::cout << "termination " << to_string(r.reason) << "\n"
            << "best_f " << fmt(r.best_f) << "\n";
  if (run.f_bound) std::cout << "best_q " << fmt(r.best_f / *run.f_bound) << "\n";
  std::cout << "generations " << r.generations << "\n";
  return exit_ok;
}

struct GeneArgs {
  std::string ops, gene = "ones", config, out;
};

int cmd_sensitivity(const GeneArgs& a) {
  auto ops = load_operators(a.ops);
  const RunConfig rc = config_or_default(a.config);
  apply_config(ops, rc);
  const Objective obj(ops, rc.objective);
  const auto param = make_parameterization(ops.n_dof(), ops.fixed);
  const Gene g = read_gene(a.gene, param);
  const auto state = init_state(ops, g, &obj);
  std::vector<bool> fixed_mask(static_cast<std::size_t>(ops.n_dof()), false);
  for (int f : ops.fixed) fixed_mask[f] = true;
  DofList R, A;
  candidate_sets(state, fixed_mask, R, A);
  const auto map = sweep_sensitivity(state, R, A, rc.memetic.threads);
  write_sensitivity_csv(a.out, map);
  const int best = map.best();
  json side{{"objective", number(map.objective_current)},
            {"gene", gene_hex(g)},
            {"gene_text", to_text(g)},
            {"active_dofs", g.count() + static_cast<int>(ops.fixed.size())},
            {"candidates", map.entries.size()},
            {"best_dof", best >= 0 ? json(map.entries[best].dof) : json(nullptr)},
            {"best_action", best >= 0 ? json(to_string(map.entries[best].action)) : json(nullptr)},
            {"best_tau", best >= 0 ? number(map.entries[best].tau) : json(nullptr)}};
  write_json(a.out + ".json", side);
  std::cout << "objective " << fmt(map.objective_current) << "\n";
  return exit_ok;
}

int cmd_eval(const GeneArgs& a) {
  auto ops = load_operators(a.ops);
  const RunConfig rc = config_or_default(a.config);
  apply_config(ops, rc);
  const Objective obj(ops, rc.objective);
  const auto param = make_parameterization(ops.n_dof(), ops.fixed);
  const Gene g = read_gene(a.gene, param);
  const auto state = init_state(ops, g, &obj);
  VecC I = VecC::Zero(ops.n_dof());
  for (int i = 0; i < state.size(); ++i) I[state.active[i]] = state.I[i];

  json j{{"objective", number(state.f)},
         {"gene", gene_hex(g)},
         {"active_dofs", state.size()},
         {"Q_U", number(q_untuned(I, ops.W, ops.R0))},
         {"Q_E", number(q_matching(I, ops.X0, ops.R0))},
         {"P_rad", radiated_power(ops.R0, I)},
         {"P_lost", lost_power(I, ops.Zrho, ops.ZL)},
         {"P_in", complex_power(I, ops.V).real()}};
  j["Q"] = number(j["Q_U"].is_null() || j["Q_E"].is_null() ? infinity
                                                              : j["Q_U"].get<double>() + 0.5 * j["Q_E"].get<double>());
  if (!ops.gaps.empty()) j["Z_in"] = complex_json(input_impedance(I, ops.Z, ops.gaps.front()));
  if (const auto fb = bound_value(ops, rc)) {
    j["f_bound"] = *fb;
    j["q"] = number(state.f / *fb);
  }
  if (a.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json(a.out, j);
  return exit_ok;
}

struct VerifyArgs {
  std::string manifest;
};

int cmd_verify(const VerifyArgs& a) {
  json m;
  try {
    m = json::parse(read_file(a.manifest));
  } catch (const json::parse_error& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("manifest is not valid JSON: ") + e.what());
  }
  bool ok = true;
  for (const char* key : {"config", "operators"}) {
    const std::string path = m.at(key).at("path");
    const std::string want = m.at(key).at("sha256");
    const std::string got = sha256_file(path);
    const bool same = got == want;
    ok = ok && same;
    std::cout << key << " hash " << (same ? "ok" : "MISMATCH") << "\n";
  }
  if (!ok) {
    std::cout << "verify FAILED\n";
    return exit_io;
  }
  // Replaying with j_max <= 2 consumes the generator identically, so its
  // trace must be a prefix of the recorded one.
  RunConfig rc = load_config(m.at("config").at("path"));
  rc.memetic.threads = m.value("threads", 1);
  auto ops = load_operators(m.at("operators").at("path"));
  const auto run = run_optimize(ops, rc, 2);
  const std::string replay = trace_csv(run.result);
  const std::string recorded = read_file(m.at("trace").at("path"));
  const bool prefix = recorded.compare(0, replay.size(), replay) == 0;
  std::cout << "replay " << (prefix ? "ok" : "MISMATCH") << " (" << run.result.trace.size() << " trace rows)\n";
  std::cout << (prefix ? "verify ok" : "verify FAILED") << "\n";
  return prefix ? exit_ok : exit_numerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology optimization of plate antennas by method-of-moments reanalysis"};
  app.set_version_flag("--version", std::string(momtopo_version));
  app.require_subcommand(1);

  AssembleArgs aa;
  auto* asmb = app.add_subcommand("assemble", "Mesh a rectangular plate and write every operator to a MOMX file");
  asmb->add_option("--plate", aa.plate, "Plate size LXxLY in metres")->capture_default_str();
  asmb->add_option("--nx", aa.nx, "Cells along x")->capture_default_str()->check(CLI::PositiveNumber);
  asmb->add_option("--ny", aa.ny, "Cells along y")->capture_default_str()->check(CLI::PositiveNumber);
  asmb->add_option("--ka", aa.ka, "Electrical size k*a")->capture_default_str()->check(CLI::PositiveNumber);
  asmb->add_option("--fd-delta", aa.fd_delta, "Relative frequency step for the stored-energy derivative")
      ->capture_default_str();
  asmb->add_option("--l-max", aa.l_max, "Spherical-wave truncation degree (0: automatic)")->capture_default_str();
  asmb->add_option("--out", aa.out, "Output MOMX file")->required();
  asmb->add_option("--threads", aa.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  BoundArgs ba;
  auto* bnd = app.add_subcommand("bound", "Compute the lower bound on Q for an operator file");
  bnd->add_option("--ops", ba.ops, "MOMX operator file")->required();
  bnd->add_option("--config", ba.config, "Run configuration (its eval_domain masks the bound)");
  bnd->add_option("--out", ba.out, "JSON report (default: stdout)");
  bnd->add_option("--current", ba.current, "CSV of the optimal current");

  OptimizeArgs oa;
  auto* opt = app.add_subcommand("optimize", "Run the memetic optimizer");
  opt->add_option("--ops", oa.ops, "MOMX operator file")->required();
  opt->add_option("--config", oa.config, "JSON run configuration")->required();
  opt->add_option("--out-dir", oa.out_dir, "Directory for trace.csv, result.json and manifest.json")->required();
  opt->add_option("--threads", oa.threads, "Worker threads (overrides the configuration)");

  GeneArgs sa;
  auto* sens = app.add_subcommand("sensitivity", "Export the topology sensitivity map of one shape");
  sens->add_option("--ops", sa.ops, "MOMX operator file")->required();
  sens->add_option("--gene", sa.gene, "Gene file, or ones / zeros")->capture_default_str();
  sens->add_option("--config", sa.config, "Run configuration (objective, gap, fixed DOFs)");
  sens->add_option("--out", sa.out, "Output CSV; a .json sidecar is written next to it")->required();

  GeneArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate the metrics of one shape");
  ev->add_option("--ops", ea.ops, "MOMX operator file")->required();
  ev->add_option("--gene", ea.gene, "Gene file, or ones / zeros")->capture_default_str();
  ev->add_option("--config", ea.config, "Run configuration (objective, gap, fixed DOFs)");
  ev->add_option("--out", ea.out, "JSON report (default: stdout)");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Re-hash the inputs of a run and replay its first two generations");
  ver->add_option("--manifest", va.manifest, "manifest.json of an optimize run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*asmb) return cmd_assemble(aa);
    if (*bnd) return cmd_bound(ba);
    if (*opt) return cmd_optimize(oa);
    if (*sens) return cmd_sensitivity(sa);
    if (*ev) return cmd_eval(ea);
    if (*ver) return cmd_verify(va);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
    return exit_config;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return exit_io;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return exit_io;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return exit_numerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "malformed JSON document: " << e.what() << "\n";
    return exit_io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}
