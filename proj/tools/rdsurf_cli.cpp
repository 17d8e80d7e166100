// Batch front end: eigen -> bifurcations -> trace -> upsample -> verify,
// plus marginal and dispersion curve emission. Every command reads one
// config file and writes deterministic CSV/VTK/OFF artifacts.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "rdsurf/config.hpp"
#include "rdsurf/multires.hpp"
#include "rdsurf/output.hpp"
#include "rdsurf/simulate.hpp"

using namespace rdsurf;
namespace fs = std::filesystem;

namespace {

struct PrereqError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SurfaceMesh mesh_from_config(const Config& cfg) {
  const std::string gen = cfg.get("mesh", "generator");
  if (gen == "rectangle")
    return generate_rectangle(cfg.get_double("mesh", "width"),
                              cfg.get_double("mesh", "height"),
                              cfg.get_int("mesh", "nx"),
                              cfg.get_int("mesh", "ny"));
  if (gen == "icosphere")
    return generate_icosphere(cfg.get_int("mesh", "subdivisions"),
                              cfg.get_double_or("mesh", "radius", 1.0));
  if (gen == "spherical_cap")
    return generate_spherical_cap(cfg.get_double("mesh", "radius"),
                                  cfg.get_double("mesh", "zeta"),
                                  cfg.get_int("mesh", "n"));
  if (gen == "file") return load_mesh(cfg.get("mesh", "path"));
  throw ConfigError("unknown mesh generator: " + gen);
}

ModelPtr model_from_config(const Config& cfg) {
  const std::string name = cfg.get("model", "name");
  std::map<std::string, double> params;
  for (const auto& s : cfg.sections())
    if (s.name == "model")
      for (const auto& e : s.entries) {
        if (e.first == "name") continue;
        params[e.first] = std::stod(e.second);
      }
  return make_model(name, params);
}

BC bc_from_config(const Config& cfg, const RDModel& model) {
  std::string bc = cfg.get_or("mesh", "bc", "");
  if (bc.empty()) return model.boundary_condition();
  if (bc == "neumann") return BC::NeumannZero;
  if (bc == "dirichlet") return BC::DirichletZero;
  if (bc == "closed") return BC::Closed;
  throw ConfigError("unknown boundary condition: " + bc);
}

std::string num(int v, int width = 4) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%0*d", width, v);
  return buf;
}

void require_file(const std::string& path, const std::string& producer) {
  if (!fs::exists(path))
    throw PrereqError("missing prerequisite " + path + "; run `" + producer +
                      "` first");
}

void save_pattern_csv(const BifurcationPattern& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  char buf[80];
  out << "u,v\n";
  for (Eigen::Index i = 0; i < p.u_field.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.u_field[i],
                  p.v_field[i]);
    out << buf;
  }
}

BifurcationPattern load_pattern_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<double> u, v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t comma = line.find(',');
    u.push_back(std::stod(line.substr(0, comma)));
    v.push_back(std::stod(line.substr(comma + 1)));
  }
  BifurcationPattern p;
  p.u_field = Eigen::Map<Vec>(u.data(), Eigen::Index(u.size()));
  p.v_field = Eigen::Map<Vec>(v.data(), Eigen::Index(v.size()));
  return p;
}

struct InventoryRow {
  std::string kind;
  double alpha = 0;
  double lambda_m = 0, lambda_n = 0;
  std::vector<int> modes;
};

std::vector<InventoryRow> load_inventory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<InventoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    InventoryRow r;
    std::getline(ss, r.kind, ',');
    std::getline(ss, tok, ',');
    r.alpha = std::stod(tok);
    std::getline(ss, tok, ',');
    r.lambda_m = std::stod(tok);
    std::getline(ss, tok, ',');
    r.lambda_n = std::stod(tok);
    std::getline(ss, tok, ',');
    std::istringstream ms(tok);
    std::string m;
    while (std::getline(ms, m, ';')) r.modes.push_back(std::stoi(m));
    rows.push_back(std::move(r));
  }
  return rows;
}

void save_branch_states(const Branch& branch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  char buf[64];
  for (const auto& st : branch.states) {
    std::snprintf(buf, sizeof(buf), "%.17g", st.alpha);
    out << buf;
    for (Eigen::Index i = 0; i < st.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", st.x[i]);
      out << buf;
    }
    out << "\n";
  }
}

Branch load_branch_states(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Branch branch;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    BranchState st;
    st.alpha = std::stod(tok);
    std::vector<double> xs;
    while (std::getline(ss, tok, ',')) xs.push_back(std::stod(tok));
    st.x = Eigen::Map<Vec>(xs.data(), Eigen::Index(xs.size()));
    branch.states.push_back(std::move(st));
  }
  return branch;
}

std::vector<int> parse_index_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(std::stoi(tok));
  return out;
}

void write_state_vtk(const FemSpace& space, const RDModel& model,
                     const Vec& x, double alpha, const std::string& path) {
  const auto h = model.primary_state(alpha);
  const double ba = space.bc == BC::DirichletZero ? h.a0 : 0.0;
  const double bb = space.bc == BC::DirichletZero ? h.b0 : 0.0;
  save_fields_vtk(*space.mesh,
                  {{"u_b", expand_field(space, x.head(space.n_dof), ba)},
                   {"v_b", expand_field(space, x.tail(space.n_dof), bb)}},
                  path);
}

// ---- commands ----

int cmd_eigen(const Config& cfg, const std::string& out, long seed) {
  auto model = model_from_config(cfg);
  auto mesh = mesh_from_config(cfg);
  auto space = make_fem_space(mesh, bc_from_config(cfg, *model));
  EigenOptions opts;
  opts.k = cfg.get_int("eigen", "k");
  opts.tol = cfg.get_double_or("eigen", "tol", opts.tol);
  opts.group_rel_tol = cfg.get_double_or("eigen", "group_tol", opts.group_rel_tol);
  opts.max_iterations = cfg.get_int_or("eigen", "max_iterations", opts.max_iterations);
  if (seed >= 0) opts.seed = uint64_t(seed);
  else opts.seed = uint64_t(cfg.get_int_or("eigen", "seed", int(opts.seed)));
  if (opts.k > space.n_dof)
    throw ConfigError("eigen.k = " + std::to_string(opts.k) +
                      " exceeds dof count " + std::to_string(space.n_dof));
  auto basis =
      solve_eigenbasis(assemble_stiffness(space), assemble_mass(space), opts);
  save_off(mesh, out + "/mesh.off");
  save_eigenbasis(basis, out + "/modes");
  fs::copy_file(out + "/modes.csv", out + "/spectrum.csv",
                fs::copy_options::overwrite_existing);
  for (size_t i = 0; i < basis.pairs.size(); ++i)
    save_fields_vtk(mesh,
                    {{"mode", expand_field(space, basis.pairs[i].vector, 0.0)}},
                    out + "/mode_" + num(int(i)) + ".vtk");
  return 0;
}

int cmd_bifurcations(const Config& cfg, const std::string& out) {
  require_file(out + "/modes.csv", "eigen");
  auto model = model_from_config(cfg);
  auto mesh = mesh_from_config(cfg);
  auto space = make_fem_space(mesh, bc_from_config(cfg, *model));
  auto basis = load_eigenbasis(out + "/modes");

  std::vector<int> simple;
  std::string req = cfg.get_or("bifurcations", "simple", "all");
  if (req == "all") {
    for (size_t i = basis.has_zero_mode ? 1 : 0; i < basis.pairs.size(); ++i)
      simple.push_back(int(i));
  } else {
    simple = parse_index_list(req);
  }

  std::vector<BifurcationPoint> points;
  std::vector<BifurcationPattern> patterns;
  for (int i : simple) {
    if (i < 0 || i >= int(basis.pairs.size()))
      throw ConfigError("bifurcations.simple index out of range: " +
                        std::to_string(i));
    try {
      auto [pt, pat] = compose_simple(basis, i, *model);
      points.push_back(pt);
      patterns.push_back(pat);
    } catch (const BifurcationError& e) {
      std::fprintf(stderr, "mode %d skipped: %s\n", i, e.what());
    }
  }
  {
    // mixed requests are flat "m n" group-index pairs
    auto mixed = parse_index_list(cfg.get_or("bifurcations", "mixed", ""));
    for (size_t p = 0; p + 1 < mixed.size(); p += 2) {
      if (mixed[p] < 0 || mixed[p] >= int(basis.groups.size()) ||
          mixed[p + 1] < 0 || mixed[p + 1] >= int(basis.groups.size()))
        throw ConfigError("bifurcations.mixed group index out of range");
      const auto& gm = basis.groups[size_t(mixed[p])];
      const auto& gn = basis.groups[size_t(mixed[p + 1])];
      std::vector<double> wm(gm.size(), 1.0), wn(gn.size(), 1.0);
      try {
        auto [pt, pat] = compose_mixed(basis, gm, gn, wm, wn, *model);
        points.push_back(pt);
        patterns.push_back(pat);
      } catch (const BifurcationError& e) {
        std::fprintf(stderr, "mixed pair (%d,%d) skipped: %s\n", mixed[p],
                     mixed[p + 1], e.what());
      }
    }
  }
  if (points.empty()) throw ConfigError("no composable bifurcation requests");
  save_inventory_csv(points, out + "/inventory.csv");
  for (size_t i = 0; i < patterns.size(); ++i) {
    save_pattern_csv(patterns[i], out + "/pattern_" + num(int(i)) + ".csv");
    save_fields_vtk(mesh,
                    {{"u_b", expand_field(space, patterns[i].u_field, 0.0)},
                     {"v_b", expand_field(space, patterns[i].v_field, 0.0)}},
                    out + "/pattern_" + num(int(i)) + ".vtk");
  }
  return 0;
}

// origin row: explicit index, or the inventory row nearest origin_alpha
int resolve_origin(const Config& cfg, const std::string& out,
                   std::vector<InventoryRow>* rows = nullptr) {
  require_file(out + "/inventory.csv", "bifurcations");
  auto inventory = load_inventory(out + "/inventory.csv");
  int origin = cfg.get_int_or("continuation", "origin", 0);
  if (origin < 0 || origin >= int(inventory.size()))
    throw ConfigError("continuation.origin out of range");
  if (cfg.has("continuation", "origin_alpha")) {
    double want = cfg.get_double("continuation", "origin_alpha");
    for (size_t i = 0; i < inventory.size(); ++i)
      if (std::abs(inventory[i].alpha - want) <
          std::abs(inventory[size_t(origin)].alpha - want))
        origin = int(i);
  }
  if (rows) *rows = std::move(inventory);
  return origin;
}

int cmd_trace(const Config& cfg, const std::string& out) {
  auto model = model_from_config(cfg);
  auto mesh = mesh_from_config(cfg);
  auto space = make_fem_space(mesh, bc_from_config(cfg, *model));
  std::vector<InventoryRow> inventory;
  int origin = resolve_origin(cfg, out, &inventory);
  require_file(out + "/pattern_" + num(origin) + ".csv", "bifurcations");

  BifurcationPoint point;
  point.alpha = inventory[size_t(origin)].alpha;
  point.lambdas = {inventory[size_t(origin)].lambda_m};
  point.mode_indices = inventory[size_t(origin)].modes;
  auto pattern = load_pattern_csv(out + "/pattern_" + num(origin) + ".csv");

  ContinuationOptions opts;
  opts.theta = cfg.get_double_or("continuation", "tangent_scale", opts.theta);
  opts.newton.tol = cfg.get_double_or("continuation", "tol", opts.newton.tol);
  double eps0 = cfg.get_double_or("continuation", "eps0", 0.01);
  double lo = cfg.get_double_or("continuation", "alpha_min", -1e30);
  double hi = cfg.get_double_or("continuation", "alpha_max", 1e30);
  int max_steps = cfg.get_int_or("continuation", "max_steps", 30);

  Branch branch = trace_branch(space, *model, point, pattern, eps0, lo, hi,
                               max_steps, opts);
  if (branch.states.empty())
    throw std::runtime_error("trace produced no states: " +
                             branch.failure_note);
  save_branch_csv(branch, out + "/branch_" + num(origin) + ".csv");
  save_branch_states(branch, out + "/branch_states_" + num(origin) + ".csv");
  int every = cfg.get_int_or("continuation", "snapshot_every", 0);
  if (every > 0)
    for (size_t i = 0; i < branch.states.size(); i += size_t(every))
      write_state_vtk(space, *model, branch.states[i].x,
                      branch.states[i].alpha,
                      out + "/trace_" + num(origin) + "_" + num(int(i)) + ".vtk");
  if (!branch.failure_note.empty())
    std::fprintf(stderr, "trace stopped early: %s\n",
                 branch.failure_note.c_str());
  return 0;
}

int cmd_upsample(const Config& cfg, const std::string& out, int workers) {
  auto model = model_from_config(cfg);
  auto mesh = mesh_from_config(cfg);
  BC bc = bc_from_config(cfg, *model);
  int origin = resolve_origin(cfg, out);
  const std::string states_path =
      out + "/branch_states_" + num(origin) + ".csv";
  require_file(states_path, "trace");
  Branch branch = load_branch_states(states_path);

  int levels = cfg.get_int_or("hierarchy", "levels", 2);
  std::string mode = cfg.get_or("hierarchy", "mode", "subdivision");
  MeshHierarchy hier =
      mode == "decimation"
          ? build_hierarchy(mesh, levels, bc,
                            cfg.get_double_or("hierarchy", "ratio", 4.0))
          : build_hierarchy_by_subdivision(mesh, levels, bc);

  std::vector<int> subset;
  std::string sel = cfg.get_or("hierarchy", "subset", "");
  if (!sel.empty()) subset = parse_index_list(sel);
  else {
    int stride = cfg.get_int_or("hierarchy", "stride", 1);
    for (int i = 0; i < int(branch.states.size()); i += stride)
      subset.push_back(i);
  }
  NewtonOptions nopts;
  nopts.tol = cfg.get_double_or("hierarchy", "tol", nopts.tol);
  auto result =
      upsample_branch(hier, branch, subset, *model, workers, nopts);
  save_reports_csv(result, out + "/upsample_reports.csv");
  save_hierarchy(hier, out, "hierarchy");
  for (int l = 1; l <= hier.n_hops(); ++l) {
    const FemSpace& space = hier.spaces[size_t(l)];
    std::vector<std::vector<double>> rows;
    for (size_t j = 0; j < subset.size(); ++j) {
      const Vec& x = result.states[size_t(l) - 1][j];
      if (x.size() == 0) continue;
      Vec xh = homogeneous_state_vector(space, *model, result.alphas[j]);
      rows.push_back({double(subset[j]), result.alphas[j],
                      (x - xh).norm() / std::sqrt(double(x.size()))});
    }
    save_table_csv({"state", "alpha", "norm"}, rows,
                   out + "/branch_" + num(origin) + "_L" + std::to_string(l) +
                       ".csv");
  }
  for (const auto& f : result.failures)
    std::fprintf(stderr, "upsample failure: %s\n", f.c_str());
  return result.failures.size() == subset.size() && !subset.empty() ? 1 : 0;
}

int cmd_verify(const Config& cfg, const std::string& out) {
  auto model = model_from_config(cfg);
  auto mesh = mesh_from_config(cfg);
  auto space = make_fem_space(mesh, bc_from_config(cfg, *model));
  int origin = resolve_origin(cfg, out);
  const std::string states_path =
      out + "/branch_states_" + num(origin) + ".csv";
  require_file(states_path, "trace");
  Branch branch = load_branch_states(states_path);

  std::vector<std::vector<double>> rows;
  bool all_ok = true;
  for (size_t i = 0; i < branch.states.size(); ++i) {
    const auto& st = branch.states[i];
    double dt = cfg.get_double_or(
        "verify", "dt", std::min(1e-3, 0.5 * imex_dt_bound(*model, st.alpha)));
    Vec x1 = imex_step(space, *model, st.x, st.alpha, dt);
    double rel = (x1 - st.x).norm() / st.x.norm();
    bool ok = rel <= cfg.get_double_or("verify", "fixed_point_tol", 1e-8);
    all_ok = all_ok && ok;
    rows.push_back({double(i), st.alpha, rel, ok ? 1.0 : 0.0});
  }
  save_table_csv({"state", "alpha", "imex_relative_change", "fixed_point"},
                 rows, out + "/verify.csv");
  return all_ok ? 0 : 1;
}

int cmd_marginal(const Config& cfg, const std::string& out) {
  auto model = model_from_config(cfg);
  double lambda_unit;
  if (cfg.has("marginal", "lambda")) {
    lambda_unit = cfg.get_double("marginal", "lambda");
  } else {
    require_file(out + "/modes.csv", "eigen");
    auto basis = load_eigenbasis(out + "/modes");
    int mode = cfg.get_int("marginal", "mode");
    if (mode < 0 || mode >= int(basis.pairs.size()))
      throw ConfigError("marginal.mode out of range");
    lambda_unit = basis.pairs[size_t(mode)].lambda;
  }
  MarginalDrive drive = cfg.get_or("marginal", "drive", "radius") == "perimeter"
                            ? MarginalDrive::Perimeter
                            : MarginalDrive::Radius;
  double lo = cfg.get_double("marginal", "lo");
  double hi = cfg.get_double("marginal", "hi");
  int n = cfg.get_int_or("marginal", "samples", 25);
  std::vector<double> scales;
  for (int i = 0; i < n; ++i)
    scales.push_back(lo + (hi - lo) * i / std::max(1, n - 1));
  auto samples = marginal_curve(*model, lambda_unit, scales, drive);
  std::vector<std::vector<double>> rows;
  for (const auto& s : samples)
    rows.push_back({s.scale, s.gamma, s.parameter, s.valid ? 1.0 : 0.0});
  save_table_csv({"scale", "gamma", "parameter", "valid"}, rows,
                 out + "/marginal.csv");
  return 0;
}

int cmd_dispersion(const Config& cfg, const std::string& out) {
  auto model = model_from_config(cfg);
  double alpha = cfg.get_double("dispersion", "alpha");
  auto h = model->primary_state(alpha);
  auto c = model->linearize(h.a0, h.b0, alpha);
  double lo = cfg.get_double_or("dispersion", "lambda_min", 1e-3);
  double hi = cfg.get_double("dispersion", "lambda_max");
  int n = cfg.get_int_or("dispersion", "samples", 200);
  std::vector<double> actual;
  if (fs::exists(out + "/modes.csv")) {
    auto basis = load_eigenbasis(out + "/modes");
    for (const auto& p : basis.pairs) actual.push_back(p.lambda);
  }
  auto curve = dispersion_curve(c, lo, hi, n, actual);
  std::vector<std::vector<double>> rows;
  for (const auto& s : curve.samples) rows.push_back({s.first, s.second});
  save_table_csv({"lambda", "xi"}, rows, out + "/dispersion.csv");
  rows.clear();
  for (const auto& s : curve.unstable) rows.push_back({s.first, s.second});
  save_table_csv({"lambda", "xi"}, rows, out + "/dispersion_unstable.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bifurcation analysis of reaction-diffusion systems on "
               "triangulated surfaces"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = ".";
  long seed = -1;
  int workers = 1;
  app.add_option("--config", config_path, "config file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "override RNG seed");
  app.add_option("--workers", workers, "parallel job width");
  const char* names[] = {"eigen",  "bifurcations", "trace",     "upsample",
                         "verify", "marginal",     "dispersion"};
  for (const char* n : names) app.add_subcommand(n);
  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    Config cfg = load_config(config_path);
    fs::create_directories(out_dir);
    if (cmd == "eigen") return cmd_eigen(cfg, out_dir, seed);
    if (cmd == "bifurcations") return cmd_bifurcations(cfg, out_dir);
    if (cmd == "trace") return cmd_trace(cfg, out_dir);
    if (cmd == "upsample") return cmd_upsample(cfg, out_dir, workers);
    if (cmd == "verify") return cmd_verify(cfg, out_dir);
    if (cmd == "marginal") return cmd_marginal(cfg, out_dir);
    if (cmd == "dispersion") return cmd_dispersion(cfg, out_dir);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["command"] = cmd;
    err["error"] = e.what();
    if (dynamic_cast<const ConfigError*>(&e)) err["type"] = "config";
    else if (dynamic_cast<const PrereqError*>(&e)) err["type"] = "missing_prerequisite";
    else err["type"] = "runtime";
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return 1;
}
