#include "advplace/control.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "advplace/error.hpp"
#include "advplace/format.hpp"
#include "advplace/gramian.hpp"

namespace advplace {

namespace {

using Vec = Eigen::VectorXd;

Vec restrict_to(const CellSet& B, const Vec& x) {
  Vec out = Vec::Zero(x.size());
  for (auto i : B.indices()) out[static_cast<Eigen::Index>(i)] = x[static_cast<Eigen::Index>(i)];
  return out;
}

double l2_over(const Vec& x, const CellSet& cells, double cell_measure) {
  double s = 0.0;
  for (auto i : cells.indices()) s += x[static_cast<Eigen::Index>(i)] * x[static_cast<Eigen::Index>(i)];
  return std::sqrt(s * cell_measure);
}

// u_k = chi_B . Koopman^{K-1-k}(w).
ControlSchedule adjoint_schedule(const TransferOperator& op, const CellSet& B, std::size_t K,
                                 Vec w) {
  ControlSchedule s = zero_schedule(B, op.dt(), K);
  for (std::size_t m = 0; m < K; ++m) {
    s.u[K - 1 - m] = ScalarField(op.partition(), restrict_to(B, w));
    if (m + 1 < K) w = koopman_step(op, w);
  }
  return s;
}

SteeringResult finish(const TransferOperator& op, const ScalarField& rho0,
                      const ScalarField& rho_target, const Vec& d, const CellSet& S,
                      ControlSchedule schedule, ControlMethod method,
                      std::optional<double> condition) {
  const double cm = op.partition().cell_measure();
  ScalarField terminal = simulate_forward(op, rho0, schedule).back();
  const Vec err = terminal.values() - rho_target.values();
  const CellSet off = set_difference(CellSet::all(op.partition()), S);
  const double energy = control_energy(schedule);
  return SteeringResult{std::move(schedule), std::move(terminal), l2_over(err, S, cm),
                        l2_over(d, S, cm),     l2_over(err, off, cm), energy,
                        method,                condition};
}

}  // namespace

ControlSchedule zero_schedule(const CellSet& B, double dt, std::size_t K) {
  return ControlSchedule{B, dt, std::vector<ScalarField>(K, ScalarField(B.partition()))};
}

std::vector<ScalarField> simulate_forward(const TransferOperator& op, const ScalarField& rho0,
                                          const ControlSchedule& schedule) {
  require_same_partition(op.partition(), rho0.partition(), "simulate_forward");
  require_same_partition(op.partition(), schedule.B.partition(), "simulate_forward");
  std::vector<ScalarField> traj;
  traj.reserve(schedule.steps() + 1);
  traj.push_back(rho0);
  Vec rho = rho0.values();
  for (const auto& uk : schedule.u) {
    require_same_partition(op.partition(), uk.partition(), "simulate_forward");
    rho = pf_step(op, rho);
    for (auto i : schedule.B.indices()) {
      const auto e = static_cast<Eigen::Index>(i);
      rho[e] += op.dt() * uk.values()[e];
    }
    traj.emplace_back(op.partition(), rho);
  }
  return traj;
}

double control_energy(const ControlSchedule& schedule) {
  double s = 0.0;
  for (const auto& uk : schedule.u) {
    for (auto i : schedule.B.indices()) s += uk[i] * uk[i];
  }
  return schedule.dt * s * schedule.B.partition().cell_measure();
}

CellSet target_support(const ScalarField& d) {
  const Vec& v = d.values();
  const double scale = v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
  std::vector<std::size_t> idx;
  if (scale > 0.0) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > 1e-12 * scale) idx.push_back(static_cast<std::size_t>(i));
    }
  }
  return CellSet(d.partition(), std::move(idx));
}

Vec apply_discrete_gramian(const TransferOperator& op, const CellSet& B, std::size_t K,
                           const Vec& z) {
  // Horner in the PF direction: acc = sum_m PF^m(y_m), y_m = chi_B . Koopman^m z.
  std::vector<Vec> y;
  y.reserve(K);
  Vec x = z;
  for (std::size_t m = 0; m < K; ++m) {
    y.push_back(restrict_to(B, x));
    if (m + 1 < K) x = koopman_step(op, x);
  }
  Vec acc = Vec::Zero(z.size());
  for (std::size_t m = K; m-- > 0;) acc = pf_step(op, acc) + y[m];
  return op.dt() * acc;
}

SteeringResult min_energy_control(const TransferOperator& op, const ScalarField& rho0,
                                  const ScalarField& rho_target, const CellSet& B, std::size_t K,
                                  const ControlOptions& options) {
  require_same_partition(op.partition(), rho0.partition(), "min_energy_control");
  require_same_partition(op.partition(), rho_target.partition(), "min_energy_control");
  require_same_partition(op.partition(), B.partition(), "min_energy_control");
  if (B.empty()) throw InputError("min_energy_control: actuation set B is empty");
  if (K < 1) throw InputError("min_energy_control: need at least one step");
  if (!(options.eps >= 0.0)) throw InputError("min_energy_control: eps must be non-negative");

  const Vec free = evolve(op, rho0, K, Evolution::pf).values();
  const ScalarField d(op.partition(), rho_target.values() - free);
  const CellSet S = target_support(d);

  const GramianField g = controllability_gramian(op, B, K);
  const double threshold = options.eps * g.field.values().maxCoeff();
  for (auto i : S.indices()) {
    if (!(g.field[i] > threshold)) {
      throw InfeasibleError("target outside reachable space: cell " + std::to_string(i) +
                            " needs a change but cannot be reached from B in " +
                            std::to_string(K) + " steps");
    }
  }

  Vec w = Vec::Zero(d.values().size());
  std::optional<double> condition;
  if (!S.empty()) {
    if (options.method == ControlMethod::multiplication) {
      for (auto i : S.indices()) {
        const auto e = static_cast<Eigen::Index>(i);
        w[e] = d.values()[e] / g.field.values()[e];
      }
    } else {
      const std::size_t s = S.size();
      if (s > options.max_exact_cells) {
        throw InputError("exact control: target support has " + std::to_string(s) +
                         " cells, limit is " + std::to_string(options.max_exact_cells) +
                         "; use the multiplication method");
      }
      // C_SS(i, j) = dt * sum_m <Koopman^m e_i, chi_B Koopman^m e_j> (plain dot).
      const auto& bidx = B.indices();
      const auto nb = static_cast<Eigen::Index>(bidx.size());
      Eigen::MatrixXd W(nb * static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(s));
      for (std::size_t j = 0; j < s; ++j) {
        Vec x = Vec::Zero(d.values().size());
        x[static_cast<Eigen::Index>(S.indices()[j])] = 1.0;
        for (std::size_t m = 0; m < K; ++m) {
          for (Eigen::Index b = 0; b < nb; ++b) {
            W(static_cast<Eigen::Index>(m) * nb + b, static_cast<Eigen::Index>(j)) =
                x[static_cast<Eigen::Index>(bidx[static_cast<std::size_t>(b)])];
          }
          if (m + 1 < K) x = koopman_step(op, x);
        }
      }
      // With W P = Q R, C = dt P R^T R P^T and the schedule u = W w reduces to
      // u = Q R^{-T} P^T d / dt, which avoids squaring the conditioning.
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
      const auto ns = static_cast<Eigen::Index>(s);
      double rcond = 0.0;
      if (W.rows() >= ns) {
        const Vec diag = qr.matrixQR().diagonal().head(ns).cwiseAbs();
        const double rmax = diag.maxCoeff();
        const double r = rmax > 0.0 ? diag.minCoeff() / rmax : 0.0;
        rcond = r * r;
      }
      condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
      if (!(rcond >= options.min_rcond)) {
        std::ostringstream msg;
        msg << "exact control: discrete gramian on supp(d) is singular or ill-conditioned "
               "(condition estimate "
            << format_double(*condition) << ")";
        throw InfeasibleError(msg.str());
      }
      Vec ds(ns);
      for (std::size_t j = 0; j < s; ++j) {
        ds[static_cast<Eigen::Index>(j)] = d.values()[static_cast<Eigen::Index>(S.indices()[j])];
      }
      const Vec y = qr.colsPermutation().transpose() * ds;
      Vec z = Vec::Zero(W.rows());
      z.head(ns) = qr.matrixQR()
                       .topLeftCorner(ns, ns)
                       .template triangularView<Eigen::Upper>()
                       .transpose()
                       .solve(y);
      const Vec u = (qr.householderQ() * z) / op.dt();
      ControlSchedule schedule = zero_schedule(B, op.dt(), K);
      for (std::size_t k = 0; k < K; ++k) {
        Vec uk = Vec::Zero(d.values().size());
        const auto m = static_cast<Eigen::Index>(K - 1 - k);
        for (Eigen::Index b = 0; b < nb; ++b) {
          uk[static_cast<Eigen::Index>(bidx[static_cast<std::size_t>(b)])] = u[m * nb + b];
        }
        schedule.u[k] = ScalarField(op.partition(), std::move(uk));
      }
      return finish(op, rho0, rho_target, d.values(), S, std::move(schedule), options.method,
                    condition);
    }
  }

  return finish(op, rho0, rho_target, d.values(), S, adjoint_schedule(op, B, K, std::move(w)),
                options.method, condition);
}


nlohmann::json schedule_header_json(const ControlSchedule& schedule) {
  return nlohmann::json{{"B", cellset_to_json(schedule.B)},
                        {"dt", schedule.dt},
                        {"K", schedule.steps()}};
}

void write_schedule_csv(std::ostream& out, const ControlSchedule& schedule) {
  out << "step,cell,value\n";
  for (std::size_t k = 0; k < schedule.steps(); ++k) {
    for (auto i : schedule.B.indices()) {
      out << k << ',' << i << ',' << format_double(schedule.u[k][i]) << '\n';
    }
  }
}

ControlSchedule read_schedule_csv(std::istream& in, const CellSet& B, double dt, std::size_t K) {
  ControlSchedule s = zero_schedule(B, dt, K);
  std::vector<Vec> values(K, Vec::Zero(static_cast<Eigen::Index>(B.partition().size())));
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cols = split_csv_line(line);
    if (cols.size() == 1 && cols[0].empty()) continue;
    if (!header) {
      if (cols.size() != 3 || cols[0] != "step" || cols[1] != "cell" || cols[2] != "value") {
        throw InputError("schedule csv: expected header 'step,cell,value'");
      }
      header = true;
      continue;
    }
    double step = 0, cell = 0, value = 0;
    if (cols.size() != 3 || !parse_double(cols[0], step) || !parse_double(cols[1], cell) ||
        !parse_double(cols[2], value) || !std::isfinite(value) || step < 0 || cell < 0 ||
        step != std::floor(step) || cell != std::floor(cell)) {
      throw InputError("schedule csv: bad row at line " + std::to_string(line_no));
    }
    const auto k = static_cast<std::size_t>(step);
    const auto c = static_cast<std::size_t>(cell);
    if (k >= K || !B.contains(c)) {
      throw InputError("schedule csv: row at line " + std::to_string(line_no) +
                       " is outside the schedule (step < K, cell in B)");
    }
    values[k][static_cast<Eigen::Index>(c)] = value;
  }
  if (!header) throw InputError("schedule csv: missing header");
  for (std::size_t k = 0; k < K; ++k) s.u[k] = ScalarField(B.partition(), std::move(values[k]));
  return s;
}

nlohmann::json steering_json(const SteeringResult& r) {
  nlohmann::json j{{"method", to_string(r.method)},
                   {"K", r.schedule.steps()},
                   {"target_error", r.target_error},
                   {"relative_target_error",
                    r.target_norm > 0.0 ? r.target_error / r.target_norm : 0.0},
                   {"spill", r.spill},
                   {"energy", r.energy},
                   {"condition", nullptr}};
  if (r.condition && std::isfinite(*r.condition)) j["condition"] = *r.condition;
  return j;
}

ControlMethod parse_control_method(std::string_view name) {
  if (name == "multiplication") return ControlMethod::multiplication;
  if (name == "exact") return ControlMethod::exact;
  throw InputError("unknown control method '" + std::string(name) + "'");
}

std::string to_string(ControlMethod method) {
  return method == ControlMethod::exact ? "exact" : "multiplication";
}

}  // namespace advplace
