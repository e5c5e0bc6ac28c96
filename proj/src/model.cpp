#include "magswim/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <vector>

#include "magswim/hash.hpp"

namespace magswim {

namespace {

constexpr double kDegenerateRatio = 1e-8;

}  // namespace

DragMatrix drag_from_matrix(const Mat6& d) {
  DragMatrix out;
  out.entries = d;
  out.asymmetry = (d - d.transpose()).cwiseAbs().maxCoeff();
  return out;
}

DragMatrix load_drag_matrix(std::istream& source) {
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size() || !std::isfinite(v)) {
        throw ModelError("drag matrix: invalid number '" + token + "' on line " +
                         std::to_string(line_no));
      }
      values.push_back(v);
    }
  }
  if (values.size() != 36) {
    throw ModelError("drag matrix: expected 36 numbers, got " + std::to_string(values.size()));
  }
  Mat6 d;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) d(i, j) = values[static_cast<std::size_t>(6 * i + j)];
  return drag_from_matrix(d);
}

DragMatrix load_drag_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("drag matrix: cannot open '" + path + "'");
  return load_drag_matrix(in);
}

SwimmerModel build_model(const DragMatrix& drag, const Vec3& moment) {
  const double norm = moment.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ModelError("magnetic moment must be a nonzero finite vector");
  }
  Eigen::FullPivLU<Mat6> lu(drag.entries);
  if (!lu.isInvertible()) throw ModelError("drag matrix is singular");
  const Mat6 inv = lu.inverse();

  SwimmerModel model;
  model.mobility = 0.5 * (inv + inv.transpose());
  Eigen::SelfAdjointEigenSolver<Mat6> eig(model.mobility, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw ModelError("symmetrized mobility is not positive definite");
  }
  model.m22 = model.mobility.bottomRightCorner<3, 3>();
  model.m = moment / norm;
  model.p = model.m22 * cross_matrix(model.m);
  return model;
}

SwimmerModel isotropic_model(const Vec3& moment, double scale) {
  Mat6 d = Mat6::Identity();
  d.bottomRightCorner<3, 3>() /= scale;
  return build_model(drag_from_matrix(d), moment);
}

PSpectrum compute_spectrum(const SwimmerModel& model) {
  Eigen::JacobiSVD<Mat3> svd(model.p, Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) < kDegenerateRatio * s(0)) {
    throw ModelError("P has rank < 2: degenerate swimmer (sigma2 / sigma1 = " +
                     std::to_string(s(0) > 0.0 ? s(1) / s(0) : 0.0) + ")");
  }

  PSpectrum sp;
  sp.sigma1 = s(0);
  sp.sigma2 = s(1);
  sp.beta0 = model.m;

  Vec3 b1 = svd.matrixV().col(0);
  b1 -= b1.dot(sp.beta0) * sp.beta0;
  b1.normalize();
  Eigen::Index k = 0;
  b1.cwiseAbs().maxCoeff(&k);
  if (b1(k) < 0.0) b1 = -b1;
  sp.beta1 = b1;
  sp.beta2 = sp.beta0.cross(sp.beta1);

  sp.eta0 = model.m22.ldlt().solve(model.m).normalized();
  sp.eta1 = model.p * sp.beta1 / sp.sigma1;
  sp.eta2 = model.p * sp.beta2 / sp.sigma2;

  const double c = std::clamp(sp.beta0.dot(sp.eta0), -1.0, 1.0);
  sp.iota = std::acos(c);
  double zeta = std::atan2(sp.eta0.dot(sp.beta1), -sp.eta0.dot(sp.beta2));
  if (zeta < 0.0) zeta += 2.0 * std::numbers::pi;
  sp.zeta = zeta;
  return sp;
}

Vec3 helix_moment() { return {0.0, 0.1736, 0.9848}; }

Mat6 helix_drag() {
  Mat6 d;
  d << 12.4654, 0.0000, 0.0000, 0.1433, 0.0000, -0.0000,
       -0.0000, 12.4815, 0.0582, 0.0000, 0.0122, 0.1178,
       -0.0000, 0.0577, 9.2808, 0.0000, -0.5607, -0.2158,
       0.1427, -0.0000, -0.0000, 20.1070, -0.0000, 0.0000,
       -0.0000, 0.0116, -0.5610, -0.0000, 20.1725, 0.4032,
       0.0000, 0.1179, -0.2158, 0.0000, 0.4031, 1.0196;
  return d;
}

std::string model_hash(const SwimmerModel& model) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) os << model.mobility(i, j) << ' ';
  for (int i = 0; i < 3; ++i) os << model.m(i) << ' ';
  return digest_hex(os.str());
}

}  // namespace magswim
