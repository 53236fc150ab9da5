#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <advplace/control.hpp>
#include <advplace/error.hpp>
#include <advplace/gramian.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace advplace;

namespace {

ControlSchedule constant_schedule(const CellSet& B, double dt, std::size_t K, double value) {
  auto s = zero_schedule(B, dt, K);
  for (auto& u : s.u) u = ScalarField(B.partition(), value * indicator(B).values());
  return s;
}

}  // namespace

TEST(SimulateForward, ZeroControlIsFreeEvolution) {
  const auto f = analytic_field("saddle", Domain{-1, 1, -1, 1}, 9, 9, BoundaryPolicy::absorb);
  const auto p = build_partition(Domain{-1, 1, -1, 1}, 10, 10);
  const auto op = build_operator(f, p, 0.2, {.samples_per_cell = 16, .seed = 4});
  const ScalarField rho0(p, Eigen::VectorXd::LinSpaced(100, 0, 1));
  const auto traj = simulate_forward(op, rho0, zero_schedule(CellSet(p, {5}), 0.2, 7));
  ASSERT_EQ(traj.size(), 8u);
  EXPECT_EQ(traj.back().values(), evolve(op, rho0, 7, Evolution::pf).values());
}

TEST(SimulateForward, IdentityAccumulatesControl) {
  const auto p = fixtures::strip(5);
  const CellSet B(p, {1, 2});
  const ScalarField rho0(p, Eigen::VectorXd::Constant(5, 0.5));
  const auto traj = simulate_forward(fixtures::identity(p, 0.25), rho0,
                                     constant_schedule(B, 0.25, 4, 3.0));
  Eigen::VectorXd expect = rho0.values() + 4 * 0.25 * 3.0 * indicator(B).values();
  EXPECT_EQ(traj.back().values(), expect);
}

TEST(SimulateForward, SingleImpulseIsShiftedByRemainingSteps) {
  const auto p = fixtures::strip(10);
  const auto op = fixtures::shift(p, 0.5);
  const CellSet B(p, {2});
  auto s = zero_schedule(B, 0.5, 6);
  s.u[1] = indicator(B);
  const auto end = simulate_forward(op, ScalarField(p), s).back();
  // Injected at step 1, then 6 - 1 - 1 = 4 free steps.
  EXPECT_EQ(end.values(), 0.5 * indicator(CellSet(p, {6})).values());
}

TEST(SimulateForward, PartitionMismatch) {
  const auto p = fixtures::strip(5);
  EXPECT_THROW(simulate_forward(fixtures::identity(p, 1), ScalarField(fixtures::strip(4)),
                                zero_schedule(CellSet(p, {0}), 1, 1)),
               InputError);
}

TEST(ControlEnergy, Examples) {
  const auto p = build_partition(Domain{0, 1, 0, 1}, 4, 4);
  const CellSet B(p, {0, 1, 2});
  EXPECT_EQ(control_energy(zero_schedule(B, 0.1, 5)), 0.0);
  EXPECT_DOUBLE_EQ(control_energy(constant_schedule(B, 0.1, 1, 1.0)), 0.1 * measure(B));
  const double e1 = control_energy(constant_schedule(B, 0.1, 3, 0.7));
  EXPECT_DOUBLE_EQ(control_energy(constant_schedule(B, 0.1, 3, 2.1)), 9 * e1);
}

TEST(MinEnergyControl, FreeTargetNeedsNoControl) {
  const auto p = fixtures::strip(8);
  const auto op = fixtures::shift(p, 0.1);
  const ScalarField rho0 = indicator(CellSet(p, {0, 1}));
  const auto target = evolve(op, rho0, 3, Evolution::pf);
  for (auto m : {ControlMethod::exact, ControlMethod::multiplication}) {
    const auto r = min_energy_control(op, rho0, target, CellSet(p, {3}), 3, {.method = m});
    EXPECT_EQ(r.energy, 0.0);
    EXPECT_EQ(r.target_error, 0.0);
    for (const auto& u : r.schedule.u) EXPECT_EQ(u.values(), Eigen::VectorXd::Zero(8));
  }
}

TEST(MinEnergyControl, IdentityOneStepByHand) {
  const auto p = fixtures::strip(4);
  const double dt = 0.2;
  const CellSet c(p, {2});
  const auto r = min_energy_control(fixtures::identity(p, dt), ScalarField(p), indicator(c), c, 1);
  ASSERT_EQ(r.schedule.steps(), 1u);
  EXPECT_NEAR(r.schedule.u[0][2], 1 / dt, 1e-12);
  EXPECT_NEAR(r.energy, p.cell_measure() / dt, 1e-12);
}

TEST(MinEnergyControl, ShiftSteersToCellThree) {
  const auto p = fixtures::strip(8);
  const auto op = fixtures::shift(p, 0.1);
  const CellSet B(p, {0});
  const auto target = indicator(CellSet(p, {3}));
  const auto r = min_energy_control(op, ScalarField(p), target, B, 4);
  const auto end = simulate_forward(op, ScalarField(p), r.schedule).back();
  EXPECT_LE((end.values() - target.values()).cwiseAbs().maxCoeff(), 1e-10);

  // <d, C^{-1} d> with C the discrete gramian on supp(d) = {3}.
  const double c33 = apply_discrete_gramian(op, B, 4, target.values())[3];
  EXPECT_NEAR(r.energy, p.cell_measure() / c33, 1e-10);
  const auto lsq = oracle::min_norm_control(op, {0}, 4, {3}, target.values());
  EXPECT_NEAR(r.energy, lsq.energy, 1e-10);
}

TEST(MinEnergyControl, UnreachableTargetIsInfeasible) {
  const auto p = fixtures::strip(8);
  const auto op = fixtures::shift(p, 0.1);
  try {
    min_energy_control(op, ScalarField(p), indicator(CellSet(p, {6})), CellSet(p, {0}), 4);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("target outside reachable space"), std::string::npos);
  }
}

TEST(MinEnergyControl, RejectsBadInputs) {
  const auto p = fixtures::strip(4);
  const auto op = fixtures::identity(p, 0.1);
  EXPECT_THROW(min_energy_control(op, ScalarField(p), ScalarField(p), CellSet(p), 2), InputError);
  EXPECT_THROW(min_energy_control(op, ScalarField(p), ScalarField(p), CellSet(p, {0}), 0),
               InputError);
}

TEST(MinEnergyControl, SingularSystemReportsCondition) {
  // Both cells are driven only by the single input on cell 0 through a
  // 50/50 split, so the two target values cannot be set independently.
  const auto p = fixtures::strip(3);
  const auto op = fixtures::from_entries(p, 1.0, {{0, 1, 0.5}, {0, 2, 0.5}});
  Eigen::Vector3d t(0, 1, 2);
  try {
    min_energy_control(op, ScalarField(p), ScalarField(p, t), CellSet(p, {0}), 2);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("condition estimate"), std::string::npos) << e.what();
  }
}

TEST(MinEnergyControl, ExactMatchesDenseOracleAndIsOptimal) {
  const Domain d{-1, 1, -1, 1};
  const auto f = analytic_field("rotation", d, 9, 9);
  const auto p = build_partition(d, 8, 8);
  const auto op = build_operator(f, p, 0.3, {.samples_per_cell = 25, .seed = 7});
  const auto B = rect_to_cellset(p, Domain{-0.5, 0.5, -0.5, 0.5});
  const std::size_t K = 6;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;

  // Random values on a handful of reachable cells; the free evolution of rho0
  // is added so the gap d is exactly that sparse field.
  const auto reach = support_set(controllability_gramian(op, B, K), 0.0).indices();
  std::vector<std::size_t> pick(reach.begin(), reach.end());
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(12);
  Eigen::VectorXd dvec = Eigen::VectorXd::Zero(64);
  for (auto i : pick) dvec[static_cast<Eigen::Index>(i)] = n01(rng);
  const ScalarField rho0(p, Eigen::VectorXd::Constant(64, 0.1));
  const ScalarField target(p, evolve(op, rho0, K, Evolution::pf).values() + dvec);
  const auto r = min_energy_control(op, rho0, target, B, K);
  EXPECT_LE(r.target_error, 1e-8 * r.target_norm);
  EXPECT_EQ(control_energy(r.schedule), r.energy);

  const auto S = target_support(ScalarField(p, dvec));
  EXPECT_EQ(S.size(), 12u);
  const auto lsq = oracle::min_norm_control(op, B.indices(), K, S.indices(), dvec);
  EXPECT_NEAR(r.energy, lsq.energy, 1e-8 * lsq.energy);

  // Any feasible perturbation (random direction projected onto the null space
  // of the restricted control-to-state map) costs at least as much.
  const Eigen::MatrixXd M = oracle::control_to_state(op, B.indices(), K);
  Eigen::MatrixXd MS(static_cast<Eigen::Index>(S.size()), M.cols());
  for (std::size_t r2 = 0; r2 < S.size(); ++r2) {
    MS.row(static_cast<Eigen::Index>(r2)) = M.row(static_cast<Eigen::Index>(S.indices()[r2]));
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(MS);
  const Eigen::MatrixXd N = lu.kernel();
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd coef(N.cols());
    for (auto& c : coef) c = n01(rng);
    const Eigen::VectorXd u = lsq.u + 0.1 * N * coef;
    EXPECT_LE((MS * (u - lsq.u)).norm(), 1e-10);
    EXPECT_GE(op.dt() * p.cell_measure() * u.squaredNorm(), r.energy * (1 - 1e-10));
  }
}

TEST(MinEnergyControl, DoublingGapDoublesScheduleAndQuadruplesEnergy) {
  const auto p = fixtures::strip(12);
  const auto op = fixtures::from_entries(
      p, 0.1, {{0, 1, 0.6}, {0, 2, 0.3}, {1, 2, 0.7}, {1, 3, 0.2}, {2, 3, 0.9}, {3, 4, 0.8},
               {4, 5, 1.0}, {5, 6, 0.5}, {5, 5, 0.4}});
  const CellSet B(p, {0, 1});
  Eigen::VectorXd t = Eigen::VectorXd::Zero(12);
  t[2] = 0.3;
  t[3] = -0.2;
  t[4] = 0.05;
  const auto a = min_energy_control(op, ScalarField(p), ScalarField(p, t), B, 5);
  const auto b = min_energy_control(op, ScalarField(p), ScalarField(p, 2 * t), B, 5);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_LE((b.schedule.u[k].values() - 2 * a.schedule.u[k].values()).cwiseAbs().maxCoeff(),
              1e-9 * a.schedule.u[k].values().cwiseAbs().maxCoeff() + 1e-300);
  }
  EXPECT_NEAR(b.energy, 4 * a.energy, 1e-9 * b.energy);
}

TEST(MinEnergyControl, MultiplicationEqualsExactOnShift) {
  const auto p = fixtures::strip(16);
  const auto op = fixtures::shift(p, 0.1);
  const CellSet B(p, {2});
  Eigen::VectorXd t = Eigen::VectorXd::Zero(16);
  t[3] = 1.0;
  t[5] = 2.0;
  const auto e = min_energy_control(op, ScalarField(p), ScalarField(p, t), B, 6);
  const auto m = min_energy_control(op, ScalarField(p), ScalarField(p, t), B, 6,
                                    {.method = ControlMethod::multiplication});
  EXPECT_NEAR(m.energy, e.energy, 1e-12 * e.energy);
  EXPECT_LE(m.target_error, 1e-12);
}

TEST(DiscreteGramian, ShiftActsPointwise) {
  const auto p = fixtures::strip(10);
  const auto op = fixtures::shift(p, 0.1);
  const CellSet B(p, {1, 2});
  const auto g = controllability_gramian(op, B, 4);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd z(10);
  for (auto& x : z) x = u(rng);
  const Eigen::VectorXd lhs = apply_discrete_gramian(op, B, 4, z);
  const Eigen::VectorXd rhs = g.field.values().cwiseProduct(z);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13 * rhs.cwiseAbs().maxCoeff());
}

TEST(ScheduleCsv, RoundTrip) {
  const auto p = fixtures::strip(6);
  const CellSet B(p, {1, 4});
  auto s = zero_schedule(B, 0.3, 3);
  s.u[0] = ScalarField(p, (Eigen::VectorXd(6) << 0, 1.0 / 3, 0, 0, -2e-17, 0).finished());
  s.u[2] = ScalarField(p, (Eigen::VectorXd(6) << 0, 7, 0, 0, 1e300, 0).finished());
  std::stringstream out;
  write_schedule_csv(out, s);
  const auto back = read_schedule_csv(out, B, 0.3, 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(back.u[k].values(), s.u[k].values());
  const auto h = schedule_header_json(s);
  EXPECT_EQ(h.at("K"), 3);
  EXPECT_EQ(h.at("dt"), 0.3);

  std::stringstream bad("step,cell,value\n0,2,1\n");
  EXPECT_THROW(read_schedule_csv(bad, B, 0.3, 3), InputError);
}

TEST(ControlNames, Parse) {
  EXPECT_EQ(parse_control_method("multiplication"), ControlMethod::multiplication);
  EXPECT_EQ(to_string(ControlMethod::exact), "exact");
  EXPECT_THROW(parse_control_method("lqr"), InputError);
}
