#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tdcr/qp.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  MatrixXd M(n, n);
  for (int i = 0; i < M.size(); ++i) M.data()[i] = N(rng);
  return M * M.transpose() + 0.1 * MatrixXd::Identity(n, n);
}

MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  MatrixXd M(r, c);
  for (int i = 0; i < M.size(); ++i) M.data()[i] = N(rng);
  return M;
}

}  // namespace

TEST_CASE("unconstrained QP returns the Newton point") {
  tdcr::qp::Problem p;
  p.H = MatrixXd::Identity(2, 2) * 2.0;
  p.g = VectorXd::Constant(2, -4.0);
  p.A.resize(0, 2);
  p.E.resize(0, 2);
  const auto r = tdcr::qp::solve(p);
  CHECK(r.status == tdcr::qp::Status::kOptimal);
  CHECK((r.x - VectorXd::Constant(2, 2.0)).norm() < 1e-14);
  CHECK(r.objective == doctest::Approx(-8.0));
}

TEST_CASE("box-constrained QP clips at the bound") {
  // min (x-3)^2 + (y+1)^2 with 0 <= x, y <= 1
  tdcr::qp::Problem p;
  p.H = 2.0 * MatrixXd::Identity(2, 2);
  p.g = VectorXd(2);
  p.g << -6.0, 2.0;
  p.A.resize(4, 2);
  p.A << 1, 0, 0, 1, -1, 0, 0, -1;
  p.b = VectorXd(4);
  p.b << 0, 0, -1, -1;
  p.E.resize(0, 2);
  const auto r = tdcr::qp::solve(p);
  REQUIRE(r.status == tdcr::qp::Status::kOptimal);
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(0.0));
  CHECK(r.lambda[2] == doctest::Approx(4.0));
  CHECK(r.lambda[1] == doctest::Approx(2.0));
}

TEST_CASE("random QPs match exhaustive active-set enumeration") {
  std::mt19937_64 rng(7);
  int solved = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 4;
    const int m = 3 + trial % 7;
    tdcr::qp::Problem p;
    p.H = random_spd(n, rng);
    p.g = random_matrix(n, 1, rng);
    p.A = random_matrix(m, n, rng);
    p.b = random_matrix(m, 1, rng);
    p.E.resize(0, n);
    const auto r = tdcr::qp::solve(p);
    VectorXd ref;
    const bool feasible = oracle::enumerate_qp(p.H, p.g, p.A, p.b, ref);
    CAPTURE(trial);
    if (!feasible) {
      CHECK(r.status == tdcr::qp::Status::kInfeasible);
      continue;
    }
    REQUIRE(r.status == tdcr::qp::Status::kOptimal);
    ++solved;
    CHECK((r.x - ref).norm() <= 1e-8 * (1.0 + ref.norm()));
    // KKT: stationarity, complementarity, dual feasibility.
    CHECK((p.H * r.x + p.g - p.A.transpose() * r.lambda).norm() <= 1e-8);
    CHECK((r.lambda.array() >= -1e-12).all());
    CHECK(std::abs(r.lambda.dot(p.A * r.x - p.b)) <= 1e-8);
  }
  CHECK(solved > 200);
}

TEST_CASE("equality constraints are honored") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    tdcr::qp::Problem p;
    p.H = random_spd(5, rng);
    p.g = random_matrix(5, 1, rng);
    p.E = random_matrix(2, 5, rng);
    p.e = random_matrix(2, 1, rng);
    p.A = MatrixXd::Identity(5, 5);
    p.b = VectorXd::Constant(5, -10.0);
    const auto r = tdcr::qp::solve(p);
    REQUIRE(r.status == tdcr::qp::Status::kOptimal);
    CHECK((p.E * r.x - p.e).norm() < 1e-10);
    CHECK((p.H * r.x + p.g - p.A.transpose() * r.lambda - p.E.transpose() * r.mu).norm() < 1e-8);
  }
}

TEST_CASE("contradictory bounds are infeasible") {
  tdcr::qp::Problem p;
  p.H = MatrixXd::Identity(1, 1);
  p.g = VectorXd::Zero(1);
  p.A.resize(2, 1);
  p.A << 1, -1;
  p.b = VectorXd(2);
  p.b << 1, 0;  // x >= 1 and x <= 0
  p.E.resize(0, 1);
  CHECK(tdcr::qp::solve(p).status == tdcr::qp::Status::kInfeasible);
}
