#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "advplace/partition.hpp"
#include "advplace/transfer.hpp"

namespace advplace {

/// Distributed control over B: u[k] is the input applied at step k and is
/// zero outside B.
struct ControlSchedule {
  CellSet B;
  double dt = 0.0;
  std::vector<ScalarField> u;

  std::size_t steps() const { return u.size(); }
};

ControlSchedule zero_schedule(const CellSet& B, double dt, std::size_t K);

/// rho_{k+1} = PF(rho_k) + dt * (chi_B . u_k). Returns [rho_0, ..., rho_K].
std::vector<ScalarField> simulate_forward(const TransferOperator& op, const ScalarField& rho0,
                                          const ControlSchedule& schedule);

/// dt * sum_k sum_{i in B} u_k[i]^2 * cell_measure.
double control_energy(const ControlSchedule& schedule);

enum class ControlMethod {
  multiplication,  ///< w = d / rho_B^K, the pointwise inverse of the gramian
  exact,           ///< discrete normal equations on supp(d), solved through a QR
                   ///< factorization of the unrolled adjoint map
};

struct ControlOptions {
  ControlMethod method = ControlMethod::exact;
  /// Relative gramian threshold: cells with rho_B^K <= eps * max are
  /// treated as unreachable.
  double eps = 1e-9;
  /// The exact method refuses systems with a reciprocal condition estimate
  /// below this value.
  double min_rcond = 1e-14;
  std::size_t max_exact_cells = 2000;
};

struct SteeringResult {
  ControlSchedule schedule;
  ScalarField terminal;
  double target_error = 0.0;  ///< L2 distance to the target over supp(d)
  double target_norm = 0.0;   ///< L2 norm of d over supp(d)
  double spill = 0.0;         ///< L2 distance to the target off supp(d)
  double energy = 0.0;
  ControlMethod method = ControlMethod::exact;
  std::optional<double> condition;  ///< exact method only
};

/// Minimum-energy control steering rho0 to rho_target in K steps, with d the
/// gap between the target and the free evolution of rho0. Throws
/// InfeasibleError when d lives where B cannot reach within K steps or when
/// the normal equations are numerically singular.
SteeringResult min_energy_control(const TransferOperator& op, const ScalarField& rho0,
                                  const ScalarField& rho_target, const CellSet& B, std::size_t K,
                                  const ControlOptions& options = {});

/// Cells where |d| exceeds 1e-12 * max|d|.
CellSet target_support(const ScalarField& d);

/// dt * sum_{m<K} PF^m(chi_B . Koopman^m(z)).
Eigen::VectorXd apply_discrete_gramian(const TransferOperator& op, const CellSet& B,
                                       std::size_t K, const Eigen::VectorXd& z);

/// Header {B, dt, K}.
nlohmann::json schedule_header_json(const ControlSchedule& schedule);
/// `step,cell,value` rows for every step and every cell of B.
void write_schedule_csv(std::ostream& out, const ControlSchedule& schedule);
ControlSchedule read_schedule_csv(std::istream& in, const CellSet& B, double dt, std::size_t K);

nlohmann::json steering_json(const SteeringResult& result);

ControlMethod parse_control_method(std::string_view name);
std::string to_string(ControlMethod method);

}  // namespace advplace
