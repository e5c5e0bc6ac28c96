#include "magswim/asymptotics.hpp"

#include <cmath>
#include <numbers>

namespace magswim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBoundaryTol = 1e-12;

// Samples used to extract Fourier coefficients of products of first harmonics.
constexpr int kHarmonicSamples = 32;

}  // namespace

std::string to_string(LowAPrediction::Regime regime) {
  switch (regime) {
    case LowAPrediction::Regime::equilibrium: return "equilibrium";
    case LowAPrediction::Regime::periodic: return "periodic";
    case LowAPrediction::Regime::boundary: return "boundary";
  }
  return "unknown";
}

std::string to_string(LowAPrediction::Direction direction) {
  switch (direction) {
    case LowAPrediction::Direction::none: return "none";
    case LowAPrediction::Direction::clockwise: return "clockwise";
    case LowAPrediction::Direction::anticlockwise: return "anticlockwise";
  }
  return "unknown";
}

double lowa_lambda_rate(const PSpectrum& sp, double psi, double lambda) {
  return std::cos(psi) - std::sin(psi) * std::tan(sp.iota) * std::sin(lambda - sp.zeta);
}

LowAPrediction lowa_predict(const PSpectrum& sp, const Parameters& params) {
  validate(params);
  const double psi = params.psi;
  const double iota = sp.iota;
  LowAPrediction out;
  const double gap = std::abs(psi - kPi / 2) - iota;
  if (std::abs(gap) < kBoundaryTol) {
    out.regime = LowAPrediction::Regime::boundary;
    out.period_T = std::numeric_limits<double>::infinity();
    out.period_t = out.period_T;
    return out;
  }
  if (gap < 0.0) {
    out.regime = LowAPrediction::Regime::equilibrium;
    const double arg = std::cos(psi) * std::cos(iota) / (std::sin(psi) * std::sin(iota));
    const double offset = std::acos(std::clamp(arg, -1.0, 1.0));
    out.lambda_stable = sp.zeta + kPi / 2 - offset;
    out.lambda_unstable = sp.zeta + kPi / 2 + offset;
    return out;
  }
  out.regime = LowAPrediction::Regime::periodic;
  out.period_T = 2 * kPi * std::cos(iota) / std::sqrt(std::cos(iota + psi) * std::cos(iota - psi));
  out.period_t = out.period_T / params.a;
  out.direction = psi < kPi / 2 ? LowAPrediction::Direction::clockwise
                                : LowAPrediction::Direction::anticlockwise;
  return out;
}

LowAFlow lowa_reduced_flow(const PSpectrum& sp, const Parameters& params, double lambda0,
                           double T_end, const IntegratorConfig& cfg) {
  validate(params);
  const VectorField rhs = [&](double, const VecX& y) -> VecX {
    return VecX::Constant(1, lowa_lambda_rate(sp, params.psi, y(0)));
  };
  IntegratorConfig run_cfg = cfg;
  run_cfg.store_dense = false;
  const IntegrationResult res = integrate(rhs, VecX::Constant(1, lambda0), 0.0, T_end, run_cfg);
  LowAFlow flow;
  flow.T = res.trajectory.times;
  flow.lambda.reserve(res.trajectory.size());
  for (const VecX& s : res.trajectory.states) flow.lambda.push_back(s(0));
  return flow;
}

Vec3 lowa_axis(const PSpectrum& sp, double psi, double lambda) {
  return std::cos(psi) * sp.beta0 +
         std::sin(psi) * (std::cos(lambda) * sp.beta1 + std::sin(lambda) * sp.beta2);
}

Vec3 higha_g1(const FrameState& c, double psi, const Mat3& p) {
  return -std::cos(psi) * (p * c.e3);
}

Vec3 higha_g2(const FrameState& c, double psi, const Mat3& p) {
  const double s = std::sin(psi);
  const Vec3 pc1 = p * c.e1;
  const Vec3 pc2 = p * c.e2;
  return 0.5 * s * s * (p * c.e1.cross(pc2) + p * pc1.cross(c.e2) - pc1.cross(pc2));
}

FrameState higha_guiding_rhs(const FrameState& c, const Parameters& params,
                             const SwimmerModel& model, int order) {
  if (order != 0 && order != 1) throw std::invalid_argument("guiding system order must be 0 or 1");
  Vec3 w = higha_g1(c, params.psi, model.p);
  if (order == 1) w += higha_g2(c, params.psi, model.p) / params.a;
  return {w.cross(c.e1), w.cross(c.e2), w.cross(c.e3)};
}

namespace {

FrameState stable_family(const PSpectrum& sp, int varsigma, double tau) {
  const double c = std::cos(tau);
  const double s = std::sin(tau);
  return {c * sp.beta1 + s * sp.beta2, varsigma * (-s * sp.beta1 + c * sp.beta2),
          varsigma * sp.beta0};
}

}  // namespace

HighAPrediction higha_predict(const PSpectrum& sp, const SwimmerModel& model,
                              const Parameters& params) {
  validate(params);
  const double cpsi = std::cos(params.psi);
  if (std::abs(cpsi) < 1e-12) {
    throw RegimeError("large-a prediction undefined at psi = pi/2: the averaged field vanishes");
  }
  const double denom = sp.sigma1 * sp.sigma2 * std::cos(sp.iota);
  const double s = std::sin(params.psi);

  HighAPrediction out;
  out.epsilon = 1.0 / params.a;
  out.varsigma = params.varsigma();
  out.aligned_axis = out.varsigma * sp.beta0;
  out.tau_rate = -out.varsigma * sp.sigma1 * sp.sigma2 * s * s / (2.0 * params.a * std::cos(sp.iota));

  const FrameState f = stable_family(sp, out.varsigma, 0.0);
  out.g2 = higha_g2(f, params.psi, model.p);
  const Mat3 proj = Mat3::Identity() - f.e3 * f.e3.transpose();
  out.x_offset = proj * model.p.transpose() * f.e3.cross(out.g2) / (denom * cpsi);
  return out;
}

FrameState higha_frames(const HighAPrediction& pred, const PSpectrum& sp, const SwimmerModel& model,
                        const Parameters& params, double t, double tau0, int order) {
  const FrameState f = stable_family(sp, pred.varsigma, tau0 + pred.tau_rate * t);
  if (order == 0) return f;
  const double T = params.a * t;
  const Vec3 u1 = std::sin(params.psi) * (-std::sin(T) * (model.p * f.e1) + std::cos(T) * (model.p * f.e2));
  const Vec3 w = pred.epsilon * (pred.x_offset + u1);
  return {f.e1 + w.cross(f.e1), f.e2 + w.cross(f.e2), f.e3 + w.cross(f.e3)};
}

Vec3 higha_curve_point(const HighAPrediction& pred, const PSpectrum& sp, const SwimmerModel& model,
                       const Parameters& params, double t, double tau0, int order) {
  const FrameState e = higha_frames(pred, sp, model, params, t, tau0, order);
  const Vec3 body(e.e1.dot(model.m), e.e2.dot(model.m), e.e3.dot(model.m));
  return rotation_z(params.a * t).transpose() * body;
}

// ---------------------------------------------------------------------------

namespace {

struct SmallPsiContext {
  const PSpectrum& sp;
  const Mat3& p;
  int varsigma;
  double a;

  Vec3 w(double th) const { return std::cos(th) * sp.beta1 + varsigma * std::sin(th) * sp.beta2; }
  Vec3 w_prime(double th) const {
    return -std::sin(th) * sp.beta1 + varsigma * std::cos(th) * sp.beta2;
  }
  Vec3 lift(const Vec2& v) const { return v(0) * sp.beta1 + v(1) * sp.beta2; }
  Vec2 project(const Vec3& v) const { return {sp.beta1.dot(v), sp.beta2.dot(v)}; }
};

}  // namespace

SmallPsiPrediction smallpsi_predict(const SwimmerModel& model, const PSpectrum& sp,
                                    const Parameters& params, int order) {
  validate(params);
  if (order != 1 && order != 2) throw std::invalid_argument("small-psi order must be 1 or 2");
  SmallPsiPrediction out;
  out.a = params.a;
  out.order = order;
  out.varsigma = params.varsigma();
  out.epsilon = std::sin(params.psi);
  if (out.epsilon > 0.35) {
    out.warnings.push_back("sin psi = " + std::to_string(out.epsilon) +
                           " exceeds 0.35; small-angle accuracy not expected");
  }

  const Mat3& P = model.p;
  const Vec3& b0 = sp.beta0;
  const Vec3& b1 = sp.beta1;
  const Vec3& b2 = sp.beta2;
  const int vs = out.varsigma;
  const double a = params.a;
  const double a2 = a * a;

  Mat2 A;
  A << -b1.dot(P * b2), b1.dot(P * b1), -b2.dot(P * b2), b2.dot(P * b1);
  out.A = A;
  const Mat2 A2 = A * A;
  const Mat2 D = a2 * Mat2::Identity() + A2;
  out.det = D.determinant();
  if (!(std::abs(out.det) > 1e-300)) throw RegimeError("det(a^2 I + A^2) vanishes");
  const Mat2 Dinv = D.inverse();

  // Closed forms, transcribed term by term.
  const double sc = sp.sigma1 * sp.sigma2 * std::cos(sp.iota);
  const double pb1b1 = (P * b1).dot(b1);
  const double pb2b2 = (P * b2).dot(b2);
  const double pb1b2 = (P * b1).dot(b2);
  const double pb2b1 = (P * b2).dot(b1);
  const double pb1b0 = (P * b1).dot(b0);
  const double pb2b0 = (P * b2).dot(b0);
  const double diff = pb1b1 - pb2b2;
  const double sum = pb1b2 + pb2b1;
  const double q = -pb1b0 * pb1b0 - pb2b0 * pb2b0 + sp.sigma1 * sp.sigma1 + sp.sigma2 * sp.sigma2;

  out.c[0] = sc * sc * (diff * diff + sum * sum);
  out.c[1] = 2 * sc * (-vs * diff * q - 4 * sum * pb1b0 * pb2b0);
  out.c[2] = -2 * sc * (diff * diff + sum * sum) + q * q + 4 * pb1b0 * pb1b0 * pb2b0 * pb2b0;
  out.c[3] = 2 * vs * q * diff + 4 * pb1b0 * pb2b0 * sum;
  out.c[4] = diff * diff + sum * sum;
  const double poly = out.c[0] + a * (out.c[1] + a * (out.c[2] + a * (out.c[3] + a * out.c[4])));
  out.radius_r = out.epsilon * a * std::sqrt(std::max(poly, 0.0)) / (2 * out.det);

  const Mat3 PPt = P * P.transpose();
  out.center_m0 = Vec3(0, 0, vs) +
                  out.epsilon / (2 * out.det) *
                      Vec3(2 * sc * sc - a2 * (b1.dot(PPt * b1) + b2.dot(PPt * b2)),
                           a * (a2 + sc) * (b2.dot(P * b1) - b1.dot(P * b2)), 0.0);

  const Vec2 proj_b0(pb2b0, -pb1b0);
  out.tilde_tau1 = vs / a * proj_b0.dot(-a * Dinv * A * Vec2(0, 1) + vs * Dinv * A2 * Vec2(1, 0)) -
                   pb2b0 / a;
  out.tilde_tau2 = vs / a * proj_b0.dot(vs * a * Dinv * A * Vec2(1, 0) + Dinv * A2 * Vec2(0, 1)) +
                   vs / a * pb1b0;

  // Harmonic solution of u' + A u = -A v, v = (-vs sin th, cos th).
  const Mat2 Sigma = Vec2(vs, 1).asDiagonal();
  Mat2 W;
  W << 0, -vs, 1, 0;
  out.K = -a * Dinv * A * Sigma - Dinv * A2 * W;

  const SmallPsiContext ctx{sp, P, vs, a};
  // vs tau1' = -b0 . P (u1 x b0 + w(th)): first harmonic g_c cos + g_s sin.
  auto tau1_rate = [&](double th) {
    const Vec3 u1 = ctx.lift(out.K * Vec2(std::cos(th), std::sin(th)));
    return -vs * b0.dot(P * (u1.cross(b0) + ctx.w(th)));
  };
  const double g_c = tau1_rate(0.0);
  const double g_s = tau1_rate(kPi / 2);
  out.tau1_cos = -g_s / a;
  out.tau1_sin = g_c / a;

  Mat2 J;
  J << 0, -1, vs, 0;
  const Mat2 L = J * out.K;
  out.harmonic_center = Vec3(0, 0, vs) + 0.5 * out.epsilon * Vec3(L(0, 0) + L(1, 1), L(1, 0) - L(0, 1), 0.0);
  out.harmonic_radius = 0.5 * out.epsilon * std::hypot(L(0, 0) - L(1, 1), L(0, 1) + L(1, 0));

  if (order == 2) {
    // Forcing of u2' + A u2 = F(th); F holds only a constant and second harmonics.
    auto forcing = [&](double th) -> std::pair<Vec2, double> {
      const double c = std::cos(th);
      const double s = std::sin(th);
      const Vec3 u1 = ctx.lift(out.K * Vec2(c, s));
      const Vec3 du1 = a * ctx.lift(out.K * Vec2(-s, c));
      const double tau1 = out.tau1_cos * c + out.tau1_sin * s;
      const double dtau1 = a * (-out.tau1_cos * s + out.tau1_sin * c);
      const Vec3 rhs = -P * (0.5 * u1.cross(u1.cross(b0)) + u1.cross(ctx.w(th)) + tau1 * ctx.w_prime(th)) -
                       0.5 * u1.cross(du1) - vs * dtau1 * u1.cross(b0);
      return {ctx.project(rhs), vs * b0.dot(rhs)};
    };
    Vec2 f0 = Vec2::Zero(), fc = Vec2::Zero(), fs = Vec2::Zero();
    double tau2 = 0.0;
    for (int k = 0; k < kHarmonicSamples; ++k) {
      const double th = 2 * kPi * k / kHarmonicSamples;
      const auto [f, t2] = forcing(th);
      f0 += f;
      fc += f * std::cos(2 * th);
      fs += f * std::sin(2 * th);
      tau2 += t2;
    }
    f0 /= kHarmonicSamples;
    fc *= 2.0 / kHarmonicSamples;
    fs *= 2.0 / kHarmonicSamples;
    out.u2_const = A.fullPivLu().solve(f0);
    // cos 2th: A Xc + 2a Xs = fc;  sin 2th: A Xs - 2a Xc = fs
    Eigen::Matrix4d M;
    M << A, 2 * a * Mat2::Identity(), -2 * a * Mat2::Identity(), A;
    Eigen::Vector4d rhs;
    rhs << fc, fs;
    const Eigen::Vector4d x = M.fullPivLu().solve(rhs);
    out.u2_cos2 = x.head<2>();
    out.u2_sin2 = x.tail<2>();
    // tau2' = vs b0 . (rhs - P (u2 x b0)); only the constant part of u2 survives averaging
    const Vec3 u2c = ctx.lift(out.u2_const);
    out.tau2_rate = tau2 / kHarmonicSamples - vs * b0.dot(P * u2c.cross(b0));
  }
  return out;
}

Vec2 smallpsi_u1(const SmallPsiPrediction& pred, double th) {
  return pred.K * Vec2(std::cos(th), std::sin(th));
}

Vec3 smallpsi_curve_point(const SmallPsiPrediction& pred, double th) {
  const double eps = pred.epsilon;
  const int vs = pred.varsigma;
  const Vec2 u = smallpsi_u1(pred, th);
  Vec3 v(-eps * u(1), eps * vs * u(0), vs);
  double angle = th;
  if (pred.order == 2) {
    const Vec2 u2 = pred.u2_const + pred.u2_cos2 * std::cos(2 * th) + pred.u2_sin2 * std::sin(2 * th);
    v += eps * eps * Vec3(-u2(1), vs * u2(0), -vs * 0.5 * u.squaredNorm());
    angle += eps * (pred.tau1_cos * std::cos(th) + pred.tau1_sin * std::sin(th));
  }
  return rotation_z(angle).transpose() * v;
}

std::vector<Vec3> smallpsi_curve(const SmallPsiPrediction& pred, int n) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pts.push_back(smallpsi_curve_point(pred, 2 * kPi * k / n));
  return pts;
}

}  // namespace magswim
