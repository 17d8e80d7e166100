#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdsurf/mesh.hpp"
#include "rdsurf/models.hpp"
#include "rdsurf/spectral.hpp"

using namespace rdsurf;
namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("RDSURF_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& args, const std::string& stderr_file = "") {
  std::string cmd = cli() + " " + args;
  if (!stderr_file.empty()) cmd += " 2>" + stderr_file;
  else cmd += " 2>/dev/null";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_murray_config(const std::string& path) {
  std::ofstream out(path);
  out << "[mesh]\n"
         "generator = rectangle\nwidth = 1\nheight = 4\nnx = 16\nny = 64\n"
         "[model]\nname = murray\n"
         "[eigen]\nk = 8\nseed = 12345\n"
         "[continuation]\norigin_alpha = 13.736\neps0 = 0.01\n"
         "alpha_min = 10\nalpha_max = 30\nmax_steps = 12\n"
         "[hierarchy]\nlevels = 1\nstride = 4\n"
         "[dispersion]\nalpha = 13.736\nlambda_max = 20\n";
}

}  // namespace

TEST_CASE("full Murray rectangle pipeline") {
  fs::remove_all("cli_murray");
  fs::create_directories("cli_murray");
  write_murray_config("cli_murray/run.cfg");
  const std::string common = "--config cli_murray/run.cfg --out cli_murray/o";

  REQUIRE(run("eigen " + common) == 0);
  auto spectrum = read_csv("cli_murray/o/spectrum.csv");
  REQUIRE(spectrum.size() == 8);
  // first nonconstant eigenvalue: analytic (pi/4)^2
  CHECK(spectrum[1][1] == doctest::Approx(0.61685).epsilon(0.01));

  // determinism with the same seed
  REQUIRE(run("eigen --config cli_murray/run.cfg --out cli_murray/o2") == 0);
  CHECK(slurp("cli_murray/o/spectrum.csv") ==
        slurp("cli_murray/o2/spectrum.csv"));

  REQUIRE(run("bifurcations " + common) == 0);
  REQUIRE(fs::exists("cli_murray/o/inventory.csv"));
  REQUIRE(fs::exists("cli_murray/o/pattern_0000.vtk"));

  REQUIRE(run("trace " + common) == 0);
  auto branch = read_csv("cli_murray/o/branch_0002.csv");
  REQUIRE(branch.size() == 12);
  // first row sits at the mode (0,3) bifurcation
  CHECK(branch[0][1] == doctest::Approx(13.736).epsilon(0.005));
  for (const auto& row : branch) CHECK(row[4] <= 1e-8);

  REQUIRE(run("verify " + common) == 0);
  auto verify = read_csv("cli_murray/o/verify.csv");
  REQUIRE(verify.size() == 12);
  for (const auto& row : verify) CHECK(row[3] == 1.0);

  REQUIRE(run("upsample " + common + " --workers 2") == 0);
  REQUIRE(fs::exists("cli_murray/o/upsample_reports.csv"));
  auto reports = read_csv("cli_murray/o/upsample_reports.csv");
  CHECK(reports.size() == 3);  // stride 4 over 12 states, one hop each

  REQUIRE(run("dispersion " + common) == 0);
  auto disp = read_csv("cli_murray/o/dispersion.csv");
  REQUIRE(disp.size() >= 100);
  // growth rate positive around the traced mode's eigenvalue at this alpha
  auto m = make_murray();
  auto h = m->primary_state(13.736);
  auto c = m->linearize(h.a0, h.b0, 13.736);
  for (const auto& row : disp)
    CHECK(row[1] == doctest::Approx(growth_rate(c, row[0])).epsilon(1e-9));
}

TEST_CASE("config error: k exceeds dof count") {
  fs::remove_all("cli_bad");
  fs::create_directories("cli_bad");
  std::ofstream out("cli_bad/run.cfg");
  out << "[mesh]\ngenerator = rectangle\nwidth = 1\nheight = 1\n"
         "nx = 2\nny = 2\n[model]\nname = murray\n[eigen]\nk = 100\n";
  out.close();
  int rc = run("eigen --config cli_bad/run.cfg --out cli_bad/o",
               "cli_bad/err.txt");
  CHECK(rc != 0);
  std::string err = slurp("cli_bad/err.txt");
  CHECK(err.find("\"type\":\"config\"") != std::string::npos);
  CHECK(err.find("\"command\":\"eigen\"") != std::string::npos);
}

TEST_CASE("trace without bifurcations reports missing prerequisite") {
  fs::remove_all("cli_pre");
  fs::create_directories("cli_pre");
  write_murray_config("cli_pre/run.cfg");
  int rc = run("trace --config cli_pre/run.cfg --out cli_pre/o",
               "cli_pre/err.txt");
  CHECK(rc != 0);
  std::string err = slurp("cli_pre/err.txt");
  CHECK(err.find("\"type\":\"missing_prerequisite\"") != std::string::npos);
  CHECK(err.find("inventory.csv") != std::string::npos);
}

TEST_CASE("Brusselator cap marginal curve matches the closed form") {
  fs::remove_all("cli_marg");
  fs::create_directories("cli_marg");
  const double pi = 3.14159265358979323846;

  // locate the first emergent mode (largest closed-form onset parameter)
  auto cap = generate_spherical_cap(1.0, 0.5, 20);
  auto model = make_brusselator();
  auto space = make_fem_space(cap, BC::DirichletZero);
  EigenOptions eo;
  eo.k = 30;
  auto basis =
      solve_eigenbasis(assemble_stiffness(space), assemble_mass(space), eo);
  int best = 0;
  double best_a = -1;
  for (int i = 0; i < 30; ++i) {
    auto a = model->continuation_closed_form(basis.pairs[size_t(i)].lambda);
    if (a && *a > best_a) {
      best_a = *a;
      best = i;
    }
  }
  CHECK(best_a == doctest::Approx(0.76520).epsilon(2e-3));

  std::ofstream out("cli_marg/run.cfg");
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "[mesh]\ngenerator = spherical_cap\nradius = 1\nzeta = 0.5\n"
                "n = 20\n[model]\nname = brusselator\n[eigen]\nk = 30\n"
                "[marginal]\nmode = %d\ndrive = perimeter\nlo = %.17g\n"
                "hi = %.17g\nsamples = 7\n",
                best, 0.9 * 2 * pi, 1.2 * 2 * pi);
  out << buf;
  out.close();

  REQUIRE(run("eigen --config cli_marg/run.cfg --out cli_marg/o") == 0);
  REQUIRE(run("marginal --config cli_marg/run.cfg --out cli_marg/o") == 0);
  auto rows = read_csv("cli_marg/o/marginal.csv");
  REQUIRE(rows.size() == 7);
  const double lam = basis.pairs[size_t(best)].lambda;
  for (const auto& row : rows) {
    CHECK(row[3] == 1.0);
    double gamma = (row[0] / (2 * pi)) * (row[0] / (2 * pi));
    CHECK(row[1] == doctest::Approx(gamma).epsilon(1e-12));
    auto expect = model->continuation_closed_form(lam / gamma);
    REQUIRE(expect.has_value());
    CHECK(row[2] == doctest::Approx(*expect).epsilon(1e-12));
  }
  // the curve peaks at the reference perimeter and falls off past it
  for (size_t i = 3; i < rows.size(); ++i) CHECK(rows[i][2] < rows[i - 1][2]);
  CHECK(rows[2][2] == doctest::Approx(best_a).epsilon(1e-6));
}
