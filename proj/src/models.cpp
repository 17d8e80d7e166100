#include "rdsurf/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdsurf {

LinearCoefficients RDModel::linearize(double a0, double b0, double alpha) const {
  LinearCoefficients c;
  c.uDu = D1(alpha);
  c.uDv = -chemotaxis(alpha) * a0;
  c.vDu = 0.0;
  c.vDv = D2(alpha);
  c.uKu = f_a(a0, b0, alpha);
  c.uKv = f_b(a0, b0, alpha);
  c.vKu = g_a(a0, b0, alpha);
  c.vKv = g_b(a0, b0, alpha);
  return c;
}

LinearCoefficients linearize_fd(const RDModel& model, double a0, double b0,
                                double alpha) {
  LinearCoefficients c;
  c.uDu = model.D1(alpha);
  c.uDv = -model.chemotaxis(alpha) * a0;
  c.vDu = 0.0;
  c.vDv = model.D2(alpha);
  const double ha = 1e-6 * std::max(1.0, std::abs(a0));
  const double hb = 1e-6 * std::max(1.0, std::abs(b0));
  c.uKu = (model.f(a0 + ha, b0, alpha) - model.f(a0 - ha, b0, alpha)) / (2 * ha);
  c.uKv = (model.f(a0, b0 + hb, alpha) - model.f(a0, b0 - hb, alpha)) / (2 * hb);
  c.vKu = (model.g(a0 + ha, b0, alpha) - model.g(a0 - ha, b0, alpha)) / (2 * ha);
  c.vKv = (model.g(a0, b0 + hb, alpha) - model.g(a0, b0 - hb, alpha)) / (2 * hb);
  return c;
}

StabilityCheck stability_preconditions(const LinearCoefficients& c) {
  StabilityCheck s;
  const double tr = c.uKu + c.vKv;
  const double det = c.uKu * c.vKv - c.uKv * c.vKu;
  if (!(tr < 0)) {
    s.which = StabilityViolation::Trace;
    return s;
  }
  if (!(det > 0)) {
    s.which = StabilityViolation::Determinant;
    return s;
  }
  s.satisfied = true;
  return s;
}

double growth_rate(const LinearCoefficients& c, double lambda) {
  const double m11 = -c.uDu * lambda + c.uKu;
  const double m12 = -c.uDv * lambda + c.uKv;
  const double m21 = -c.vDu * lambda + c.vKu;
  const double m22 = -c.vDv * lambda + c.vKv;
  const double tr = m11 + m22;
  const double disc = tr * tr - 4 * (m11 * m22 - m12 * m21);
  if (disc >= 0) return 0.5 * (tr + std::sqrt(disc));
  return 0.5 * tr;
}

DispersionCurve dispersion_curve(const LinearCoefficients& c, double lambda_lo,
                                 double lambda_hi, int n_samples,
                                 const std::vector<double>& actual_eigenvalues) {
  if (n_samples < 2) throw std::invalid_argument("dispersion_curve: n_samples < 2");
  DispersionCurve out;
  out.samples.reserve(size_t(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const double lam = lambda_lo + (lambda_hi - lambda_lo) * i / double(n_samples - 1);
    out.samples.emplace_back(lam, growth_rate(c, lam));
  }
  for (double lam : actual_eigenvalues) {
    const double xi = growth_rate(c, lam);
    if (xi >= 0) out.unstable.emplace_back(lam, xi);
  }
  return out;
}

namespace {

class Murray final : public RDModel, public std::enable_shared_from_this<Murray> {
 public:
  Murray(double D, double C, double N, double S, double alpha)
      : D_(D), C_(C), N_(N), S_(S), alpha_(alpha) {}

  std::string name() const override { return "murray"; }
  std::vector<std::string> parameter_names() const override {
    return {"D", "C", "N", "S", "alpha"};
  }
  double parameter(const std::string& n) const override {
    if (n == "D") return D_;
    if (n == "C") return C_;
    if (n == "N") return N_;
    if (n == "S") return S_;
    if (n == "alpha") return alpha_;
    throw std::invalid_argument("murray: unknown parameter " + n);
  }
  ModelPtr with_parameter(const std::string& n, double v) const override {
    double D = D_, C = C_, N = N_, S = S_, a = alpha_;
    if (n == "D") D = v;
    else if (n == "C") C = v;
    else if (n == "N") N = v;
    else if (n == "S") S = v;
    else if (n == "alpha") a = v;
    else throw std::invalid_argument("murray: unknown parameter " + n);
    return std::make_shared<Murray>(D, C, N, S, a);
  }
  std::string continuation_parameter() const override { return "alpha"; }
  BC boundary_condition() const override { return BC::NeumannZero; }

  double f(double a, double b, double alpha) const override {
    (void)b; (void)alpha;
    return S_ * C_ * a * (N_ - a);
  }
  double g(double a, double b, double alpha) const override {
    (void)alpha;
    return S_ * (a / (1.0 + a) - b);
  }
  double f_a(double a, double, double) const override { return S_ * C_ * (N_ - 2 * a); }
  double f_b(double, double, double) const override { return 0.0; }
  double g_a(double a, double, double) const override {
    const double t = 1.0 + a;
    return S_ / (t * t);
  }
  double g_b(double, double, double) const override { return -S_; }

  double D1(double) const override { return D_; }
  double D2(double) const override { return 1.0; }
  double chemotaxis(double alpha) const override { return alpha; }

  std::vector<HomogeneousState> homogeneous_states(double) const override {
    return {{N_, N_ / (1.0 + N_), false}, {0.0, 0.0, true}};
  }

  std::optional<double> continuation_closed_form(double Lambda) const override {
    if (Lambda <= 0) return std::nullopt;
    const double k = (1.0 + N_) * (1.0 + N_);
    return k * (C_ * (1.0 + S_ / Lambda) + (D_ / N_) * (1.0 + Lambda / S_));
  }
  bool linearization_affine_in_alpha() const override { return true; }

 private:
  double D_, C_, N_, S_, alpha_;
};

class Brusselator final : public RDModel {
 public:
  Brusselator(double D1, double D2, double B, double C, double D, double A,
              double gamma)
      : D1_(D1), D2_(D2), B_(B), C_(C), D_(D), A_(A), g_(gamma) {}

  std::string name() const override { return "brusselator"; }
  std::vector<std::string> parameter_names() const override {
    return {"D1", "D2", "Bstar", "Cstar", "Dstar", "Astar", "gamma"};
  }
  double parameter(const std::string& n) const override {
    if (n == "D1") return D1_;
    if (n == "D2") return D2_;
    if (n == "Bstar") return B_;
    if (n == "Cstar") return C_;
    if (n == "Dstar") return D_;
    if (n == "Astar") return A_;
    if (n == "gamma") return g_;
    throw std::invalid_argument("brusselator: unknown parameter " + n);
  }
  ModelPtr with_parameter(const std::string& n, double v) const override {
    double d1 = D1_, d2 = D2_, b = B_, c = C_, d = D_, a = A_, gm = g_;
    if (n == "D1") d1 = v;
    else if (n == "D2") d2 = v;
    else if (n == "Bstar") b = v;
    else if (n == "Cstar") c = v;
    else if (n == "Dstar") d = v;
    else if (n == "Astar") a = v;
    else if (n == "gamma") gm = v;
    else throw std::invalid_argument("brusselator: unknown parameter " + n);
    return std::make_shared<Brusselator>(d1, d2, b, c, d, a, gm);
  }
  std::string continuation_parameter() const override { return "Astar"; }
  BC boundary_condition() const override { return BC::DirichletZero; }

  double f(double a, double b, double alpha) const override {
    return g_ * (alpha - (D_ + B_) * a + C_ * a * a * b);
  }
  double g(double a, double b, double) const override {
    return g_ * (B_ * a - C_ * a * a * b);
  }
  double f_a(double a, double b, double) const override {
    return g_ * (-(D_ + B_) + 2 * C_ * a * b);
  }
  double f_b(double a, double, double) const override { return g_ * C_ * a * a; }
  double g_a(double a, double b, double) const override {
    return g_ * (B_ - 2 * C_ * a * b);
  }
  double g_b(double a, double, double) const override { return -g_ * C_ * a * a; }

  double D1(double) const override { return D1_; }
  double D2(double) const override { return D2_; }

  std::vector<HomogeneousState> homogeneous_states(double alpha) const override {
    if (alpha == 0) throw std::domain_error("brusselator: Astar = 0 has no positive state");
    return {{alpha / D_, B_ * D_ / (alpha * C_), false}};
  }

  std::optional<double> continuation_closed_form(double Lambda) const override {
    const double ls = Lambda / g_;
    const double num = D2_ * (B_ - D_) * ls - D1_ * D2_ * ls * ls;
    const double den = C_ * (D1_ * ls + D_);
    if (den <= 0 || num <= 0) return std::nullopt;
    return D_ * std::sqrt(num / den);
  }
  bool linearization_affine_in_alpha() const override { return false; }

 private:
  double D1_, D2_, B_, C_, D_, A_, g_;
};

class PureDiffusion final : public RDModel {
 public:
  PureDiffusion(double D1, double D2, BC bc) : D1_(D1), D2_(D2), bc_(bc) {}
  std::string name() const override { return "pure_diffusion"; }
  std::vector<std::string> parameter_names() const override { return {"D1", "D2"}; }
  double parameter(const std::string& n) const override {
    if (n == "D1") return D1_;
    if (n == "D2") return D2_;
    throw std::invalid_argument("pure_diffusion: unknown parameter " + n);
  }
  ModelPtr with_parameter(const std::string& n, double v) const override {
    double d1 = D1_, d2 = D2_;
    if (n == "D1") d1 = v;
    else if (n == "D2") d2 = v;
    else throw std::invalid_argument("pure_diffusion: unknown parameter " + n);
    return std::make_shared<PureDiffusion>(d1, d2, bc_);
  }
  std::string continuation_parameter() const override { return "D1"; }
  BC boundary_condition() const override { return bc_; }
  double f(double, double, double) const override { return 0.0; }
  double g(double, double, double) const override { return 0.0; }
  double f_a(double, double, double) const override { return 0.0; }
  double f_b(double, double, double) const override { return 0.0; }
  double g_a(double, double, double) const override { return 0.0; }
  double g_b(double, double, double) const override { return 0.0; }
  double D1(double) const override { return D1_; }
  double D2(double) const override { return D2_; }
  std::vector<HomogeneousState> homogeneous_states(double) const override {
    return {{0.0, 0.0, true}};
  }

 private:
  double D1_, D2_;
  BC bc_;
};

double pick(const std::map<std::string, double>& params, const std::string& key,
            double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

ModelPtr make_murray(double D, double C, double N, double S, double alpha) {
  return std::make_shared<Murray>(D, C, N, S, alpha);
}

ModelPtr make_brusselator(double D1, double D2, double Bstar, double Cstar,
                          double Dstar, double Astar, double gamma) {
  return std::make_shared<Brusselator>(D1, D2, Bstar, Cstar, Dstar, Astar, gamma);
}

ModelPtr make_pure_diffusion(double D1, double D2, BC bc) {
  return std::make_shared<PureDiffusion>(D1, D2, bc);
}

ModelPtr make_model(const std::string& name,
                    const std::map<std::string, double>& params) {
  ModelPtr m;
  if (name == "murray") {
    m = make_murray(pick(params, "D", 0.25), pick(params, "C", 1.522),
                    pick(params, "N", 1.0), pick(params, "S", 1.0),
                    pick(params, "alpha", 0.0));
  } else if (name == "brusselator") {
    m = make_brusselator(pick(params, "D1", 0.005), pick(params, "D2", 0.1),
                         pick(params, "Bstar", 1.5), pick(params, "Cstar", 1.8),
                         pick(params, "Dstar", 0.375), pick(params, "Astar", 0.1),
                         pick(params, "gamma", 1.0));
  } else {
    throw std::invalid_argument("unknown model: " + name);
  }
  for (const auto& [k, v] : params) m = m->with_parameter(k, v);
  return m;
}

std::vector<MarginalSample> marginal_curve(const RDModel& model,
                                           double Lambda_unit,
                                           const std::vector<double>& scales,
                                           MarginalDrive drive) {
  std::vector<MarginalSample> out;
  out.reserve(scales.size());
  const double pi = 3.14159265358979323846;
  for (double s : scales) {
    MarginalSample ms;
    ms.scale = s;
    ms.gamma = drive == MarginalDrive::Radius ? s * s : s * s / (4 * pi * pi);
    const double lambda_star = Lambda_unit / ms.gamma;
    // models that carry their own reaction scale divide by it inside the
    // closed form; cancel that so the formula sees lambda_star itself
    const auto names = model.parameter_names();
    double gm = 1.0;
    if (std::find(names.begin(), names.end(), "gamma") != names.end())
      gm = model.parameter("gamma");
    auto val = model.continuation_closed_form(lambda_star * gm);
    if (val) {
      ms.parameter = *val;
      ms.valid = std::isfinite(*val);
    }
    out.push_back(ms);
  }
  return out;
}

}  // namespace rdsurf
