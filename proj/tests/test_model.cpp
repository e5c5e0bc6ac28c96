#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "magswim/model.hpp"
#include "test_support.hpp"

using namespace magswim;

TEST_CASE("load_drag_matrix reads the bundled helix file") {
  const DragMatrix d = load_drag_matrix_file(MAGSWIM_DATA_DIR "/helix_drag.txt");
  CHECK(d.entries(0, 0) == doctest::Approx(12.4654).epsilon(1e-15));
  CHECK(d.entries(5, 5) == doctest::Approx(1.0196).epsilon(1e-15));
  CHECK(d.entries(2, 4) == doctest::Approx(-0.5607).epsilon(1e-15));
  CHECK(d.asymmetry == doctest::Approx(0.0006).epsilon(1e-9));
  CHECK((d.entries - helix_drag()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("load_drag_matrix: identity and comments") {
  std::stringstream ss;
  ss << "# identity\n";
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) ss << (i == j ? "1" : "0") << ' ';
    ss << "\n";
  }
  const DragMatrix d = load_drag_matrix(ss);
  CHECK(d.entries == Mat6::Identity());
  CHECK(d.asymmetry == 0.0);
}

TEST_CASE("load_drag_matrix rejects malformed input") {
  std::stringstream few("1 2 3\n4 5 6\n");
  CHECK_THROWS_AS(load_drag_matrix(few), ModelError);
  std::stringstream junk("1 2 3 4 5 x6\n");
  CHECK_THROWS_AS(load_drag_matrix(junk), ModelError);
  CHECK_THROWS_AS(load_drag_matrix_file("/nonexistent/drag.txt"), ModelError);
}

TEST_CASE("build_model rejects singular and indefinite drag") {
  Mat6 d = Mat6::Identity();
  d(3, 3) = 0.0;
  CHECK_THROWS_AS(build_model(drag_from_matrix(d), Vec3::UnitZ()), ModelError);
  d = Mat6::Identity();
  d(4, 4) = -1.0;
  CHECK_THROWS_AS(build_model(drag_from_matrix(d), Vec3::UnitZ()), ModelError);
  CHECK_THROWS_AS(build_model(drag_from_matrix(Mat6::Identity()), Vec3::Zero()), ModelError);
}

TEST_CASE("symmetrized helix mobility is symmetric positive definite") {
  const SwimmerModel model = build_model(drag_from_matrix(helix_drag()), helix_moment());
  CHECK((model.mobility - model.mobility.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Mat6> eig(model.mobility);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  // mobility is the average of the inverse and its transpose
  const Mat6 inv = helix_drag().inverse();
  CHECK((model.mobility - 0.5 * (inv + inv.transpose())).norm() < 1e-14);
}

TEST_CASE("build_model: identity drag gives P = [m x]") {
  const SwimmerModel model = build_model(drag_from_matrix(Mat6::Identity()), Vec3(0, 0, 2));
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  CHECK((model.p - expected).norm() < 1e-15);
  CHECK(model.m.norm() == doctest::Approx(1.0));
}

TEST_CASE("build_model: P annihilates m for the helix and random models") {
  const SwimmerModel helix = build_model(drag_from_matrix(helix_drag()), helix_moment());
  CHECK((helix.p * helix.m).norm() < 1e-16);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const SwimmerModel model = testing::random_model(rng);
    CHECK((model.p * model.m).norm() < 1e-14);
    Eigen::JacobiSVD<Mat3> svd(model.p);
    const Vec3 s = svd.singularValues();
    CHECK(s(1) > 1e-6 * s(0));
    CHECK(s(2) < 1e-12 * s(0));
  }
}

TEST_CASE("compute_spectrum: isotropic model") {
  const PSpectrum sp = compute_spectrum(isotropic_model());
  CHECK(sp.sigma1 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sp.sigma2 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sp.iota == doctest::Approx(0.0));
}

TEST_CASE("compute_spectrum: helix values") {
  const SwimmerModel model = build_model(drag_from_matrix(helix_drag()), helix_moment());
  const PSpectrum sp = compute_spectrum(model);
  CHECK(std::abs(sp.sigma2 - 0.0497) < 1e-3);
  CHECK(sp.sigma1 >= sp.sigma2);

  // eta0 from (iota, zeta) against M22^{-1} m computed directly
  const Vec3 direct = model.m22.inverse() * model.m;
  const Vec3 rebuilt = std::cos(sp.iota) * sp.beta0 +
                       std::sin(sp.iota) * (std::sin(sp.zeta) * sp.beta1 - std::cos(sp.zeta) * sp.beta2);
  CHECK((rebuilt - direct.normalized()).norm() < 1e-10);
  CHECK(sp.iota >= 0.0);
  CHECK(sp.iota < M_PI / 2);
  CHECK(sp.zeta >= 0.0);
  CHECK(sp.zeta < 2 * M_PI);
}

TEST_CASE("compute_spectrum invariants on random models") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const SwimmerModel model = testing::random_model(rng);
    const PSpectrum sp = compute_spectrum(model);
    for (int i = 0; i < 3; ++i) {
      CHECK((model.p * sp.beta(i) - sp.sigma(i) * sp.eta(i)).norm() <= 1e-12 * sp.sigma1);
      CHECK((model.p.transpose() * sp.eta(i) - sp.sigma(i) * sp.beta(i)).norm() <= 1e-12 * sp.sigma1);
    }
    Mat3 b, e;
    b << sp.beta0, sp.beta1, sp.beta2;
    e << sp.eta0, sp.eta1, sp.eta2;
    CHECK((b.transpose() * b - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((e.transpose() * e - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(b.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sp.beta0.dot(sp.eta0) > 0.0);
    CHECK(std::cos(sp.iota) == doctest::Approx(sp.beta0.dot(sp.eta0)).epsilon(1e-12));

    // uniform scaling of m22 scales sigma, leaves the angles alone
    SwimmerModel scaled = model;
    scaled.m22 *= 3.7;
    scaled.p *= 3.7;
    const PSpectrum sc = compute_spectrum(scaled);
    CHECK(sc.sigma1 == doctest::Approx(3.7 * sp.sigma1).epsilon(1e-12));
    CHECK(sc.sigma2 == doctest::Approx(3.7 * sp.sigma2).epsilon(1e-12));
    CHECK(sc.iota == doctest::Approx(sp.iota).epsilon(1e-10));
    CHECK(sc.zeta == doctest::Approx(sp.zeta).epsilon(1e-10));
  }
}

TEST_CASE("compute_spectrum rejects rank-deficient P") {
  SwimmerModel model = isotropic_model();
  model.p << 0, 0, 0, 1, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(compute_spectrum(model), ModelError);
}

TEST_CASE("model_hash is stable and discriminating") {
  const SwimmerModel a = build_model(drag_from_matrix(helix_drag()), helix_moment());
  const SwimmerModel b = build_model(drag_from_matrix(helix_drag()), helix_moment());
  const SwimmerModel c = isotropic_model();
  CHECK(model_hash(a) == model_hash(b));
  CHECK(model_hash(a) != model_hash(c));
  CHECK(model_hash(a).size() == 16);
}
