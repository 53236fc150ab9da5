#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace oracle {

void rk4_trace(const Vel& f, double x, double y, double duration, double h,
               const std::function<void(double, double, double)>& visit) {
  double t = 0.0;
  while (t < duration) {
    const double s = std::min(h, duration - t);
    const auto k1 = f(x, y);
    const auto k2 = f(x + 0.5 * s * k1[0], y + 0.5 * s * k1[1]);
    const auto k3 = f(x + 0.5 * s * k2[0], y + 0.5 * s * k2[1]);
    const auto k4 = f(x + s * k3[0], y + s * k3[1]);
    const double nx = x + s / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    const double ny = y + s / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    visit(0.5 * (x + nx), 0.5 * (y + ny), s);
    x = nx;
    y = ny;
    t += s;
  }
}

double sink_rho_average(double a, double b) {
  double s = 0.0;
  if (a < 0.5) s += 0.5 * std::log(std::min(b, 0.5) / a);
  if (b > 0.5) {
    const double lo = std::max(a, 0.5);
    s += std::log(b / lo) - (b - lo);
  }
  return s / (b - a);
}

double sink_occupation_average(double a, double b, double c, double d) {
  // Antiderivative of ln(x/c): x ln(x/c) - x.
  auto F = [c](double x) { return x * std::log(x / c) - x; };
  double s = 0.0;
  const double lo = std::max(a, c), hi = std::min(b, d);
  if (hi > lo) s += F(hi) - F(lo);
  if (b > d) s += (b - std::max(a, d)) * std::log(d / c);
  return s / (b - a);
}

double sink_residence_mc(double b0, double b1, double a0, double a1, std::size_t trajectories,
                         std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pick(b0, b1);
  const Vel f = [](double x, double) { return std::array<double, 2>{-x, 0.0}; };
  double total = 0.0;
  for (std::size_t n = 0; n < trajectories; ++n) {
    const double x0 = pick(rng);
    // Time to drift below a0 is ln(x0/a0); a small margin covers the last step.
    const double horizon = std::log(x0 / a0) + 2 * h;
    rk4_trace(f, x0, 0.0, horizon, h, [&](double x, double, double s) {
      if (x >= a0 && x <= a1) total += s;
    });
  }
  return total / static_cast<double>(trajectories) * (b1 - b0);
}

double radial_sink_occupation(double x, double y, double r0, double r1) {
  const double r = std::hypot(x, y);
  if (r <= r0) return 0.0;
  return std::log(std::min(r, r1) / r0);
}

Eigen::MatrixXd dense(const advplace::TransferOperator& op) {
  return Eigen::MatrixXd(op.matrix());
}

Eigen::MatrixXd control_to_state(const advplace::TransferOperator& op,
                                 const std::vector<std::size_t>& B, std::size_t K) {
  const Eigen::MatrixXd PT = dense(op).transpose();
  const auto n = PT.rows();
  const auto nb = static_cast<Eigen::Index>(B.size());
  const auto k_total = static_cast<Eigen::Index>(K);
  Eigen::MatrixXd M(n, nb * k_total);
  for (Eigen::Index b = 0; b < nb; ++b) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v[static_cast<Eigen::Index>(B[static_cast<std::size_t>(b)])] = 1.0;
    // v = (P^T)^m e_b fills the column of step k = K-1-m.
    for (Eigen::Index m = 0; m < k_total; ++m) {
      M.col((k_total - 1 - m) * nb + b) = op.dt() * v;
      v = PT * v;
    }
  }
  return M;
}

LeastSquares min_norm_control(const advplace::TransferOperator& op,
                              const std::vector<std::size_t>& B, std::size_t K,
                              const std::vector<std::size_t>& S, const Eigen::VectorXd& d) {
  const Eigen::MatrixXd M = control_to_state(op, B, K);
  Eigen::MatrixXd MS(static_cast<Eigen::Index>(S.size()), M.cols());
  Eigen::VectorXd dS(static_cast<Eigen::Index>(S.size()));
  for (std::size_t r = 0; r < S.size(); ++r) {
    MS.row(static_cast<Eigen::Index>(r)) = M.row(static_cast<Eigen::Index>(S[r]));
    dS[static_cast<Eigen::Index>(r)] = d[static_cast<Eigen::Index>(S[r])];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(MS);
  LeastSquares out;
  out.u = cod.solve(dS);
  out.energy = op.dt() * op.partition().cell_measure() * out.u.squaredNorm();
  return out;
}

}  // namespace oracle
