#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rdsurf {

enum class BC { DirichletZero, NeumannZero, Closed };

// Linearised system constants at a homogeneous state:
//   du/dt = uDu lap(u) + uDv lap(v) + uKu u + uKv v
//   dv/dt = vDu lap(u) + vDv lap(v) + vKu u + vKv v
struct LinearCoefficients {
  double uDu = 0, uDv = 0, vDu = 0, vDv = 0;
  double uKu = 0, uKv = 0, vKu = 0, vKv = 0;
};

struct HomogeneousState {
  double a0 = 0, b0 = 0;
  bool is_zero_state = false;
};

class RDModel;
using ModelPtr = std::shared_ptr<const RDModel>;

// Two-component RD model with constant diffusion and an optional chemotaxis
// cross term -chi grad . (a grad b) in the a-equation. Immutable value
// object; the continuation parameter value is always passed explicitly.
class RDModel {
 public:
  virtual ~RDModel() = default;

  virtual std::string name() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual double parameter(const std::string& name) const = 0;
  virtual ModelPtr with_parameter(const std::string& name, double value) const = 0;
  virtual std::string continuation_parameter() const = 0;
  virtual BC boundary_condition() const = 0;

  // Reaction terms and their analytic partials.
  virtual double f(double a, double b, double alpha) const = 0;
  virtual double g(double a, double b, double alpha) const = 0;
  virtual double f_a(double a, double b, double alpha) const = 0;
  virtual double f_b(double a, double b, double alpha) const = 0;
  virtual double g_a(double a, double b, double alpha) const = 0;
  virtual double g_b(double a, double b, double alpha) const = 0;

  virtual double D1(double alpha) const = 0;
  virtual double D2(double alpha) const = 0;
  virtual double chemotaxis(double alpha) const { return 0.0; }

  // All real homogeneous states, primary first.
  virtual std::vector<HomogeneousState> homogeneous_states(double alpha) const = 0;
  HomogeneousState primary_state(double alpha) const {
    return homogeneous_states(alpha).front();
  }

  // Linearisation at (a0, b0); default uses the analytic reaction partials
  // and the declared diffusion descriptor.
  virtual LinearCoefficients linearize(double a0, double b0, double alpha) const;

  // Closed-form continuation parameter for a target eigenvalue, if the
  // model has one (non-exclusive mode selection).
  virtual std::optional<double> continuation_closed_form(double Lambda) const {
    return std::nullopt;
  }
  // Whether all LinearCoefficients depend at most affinely on alpha; this
  // enables the polynomial solve paths in module bifurcate.
  virtual bool linearization_affine_in_alpha() const { return false; }
};

// Murray's chemotactic model (zero Neumann):
//   da/dt = D lap(a) - alpha grad.(a grad b) + S C a (N - a)
//   db/dt =   lap(b) + S (a/(1+a) - b)
// parameters {D, C, N, S, alpha}; continuation parameter alpha.
ModelPtr make_murray(double D = 0.25, double C = 1.522, double N = 1.0,
                     double S = 1.0, double alpha = 0.0);

// Brusselator (zero Dirichlet), reactions scaled by gamma = R^2:
//   da/dt = D1 lap(a) + gamma (Astar - (Dstar + Bstar) a + Cstar a^2 b)
//   db/dt = D2 lap(b) + gamma (Bstar a - Cstar a^2 b)
// parameters {D1, D2, Bstar, Cstar, Dstar, Astar, gamma}; continuation
// parameter Astar.
ModelPtr make_brusselator(double D1 = 0.005, double D2 = 0.1,
                          double Bstar = 1.5, double Cstar = 1.8,
                          double Dstar = 0.375, double Astar = 0.1,
                          double gamma = 1.0);

// No reactions, no cross terms; Galerkin consistency checks.
ModelPtr make_pure_diffusion(double D1, double D2, BC bc);

ModelPtr make_model(const std::string& name,
                    const std::map<std::string, double>& params);

// Reaction constants by central finite differences of f, g (fallback path;
// diffusion constants still come from the model declaration).
LinearCoefficients linearize_fd(const RDModel& model, double a0, double b0,
                                double alpha);

enum class StabilityViolation { None, Trace, Determinant };
struct StabilityCheck {
  bool satisfied = false;
  StabilityViolation which = StabilityViolation::None;
};
// Linear stability in absence of diffusion: uKu + vKv < 0 and
// uKu vKv - uKv vKu > 0.
StabilityCheck stability_preconditions(const LinearCoefficients& c);

// Max real part of the eigenvalues of the 2x2 dispersion matrix at lambda.
double growth_rate(const LinearCoefficients& c, double lambda);

struct DispersionCurve {
  std::vector<std::pair<double, double>> samples;      // (lambda, xi)
  std::vector<std::pair<double, double>> unstable;     // actual eigenvalues with xi >= 0
};
DispersionCurve dispersion_curve(const LinearCoefficients& c, double lambda_lo,
                                 double lambda_hi, int n_samples,
                                 const std::vector<double>& actual_eigenvalues = {});

struct MarginalSample {
  double scale = 0;       // R or perimeter
  double gamma = 0;
  double parameter = 0;   // continuation parameter at the bifurcation
  bool valid = false;     // false if the formula yields a non-real value
};
enum class MarginalDrive { Radius, Perimeter };
// gamma = R^2 (Radius) or P^2 / 4 pi^2 (Perimeter); LambdaStar = Lambda/gamma
// fed to the model's closed-form continuation parameter.
std::vector<MarginalSample> marginal_curve(const RDModel& model,
                                           double Lambda_unit,
                                           const std::vector<double>& scales,
                                           MarginalDrive drive = MarginalDrive::Radius);

}  // namespace rdsurf
