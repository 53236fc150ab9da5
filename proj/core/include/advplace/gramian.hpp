#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "advplace/partition.hpp"
#include "advplace/transfer.hpp"

namespace advplace {

enum class GramianKind { controllability, observability };

/// Time quadrature for the finite-horizon integral. Left-endpoint keeps the
/// K = 0 and telescoping identities exact.
enum class Quadrature { left, trapezoid };

enum class InfiniteSolver {
  summation,  ///< accumulate evolutions until the residual drops below tol
  direct,     ///< sparse LU on the cells that can carry a nonzero value
};

/// A gramian in multiplication-operator form: the operator is pointwise
/// multiplication by `field`.
struct GramianField {
  GramianKind kind = GramianKind::controllability;
  std::optional<std::size_t> horizon_steps;  ///< unset for the infinite horizon
  CellSet source_set;
  ScalarField field;
  double dt = 0.0;
  double residual = 0.0;  ///< infinite horizon only; 0 for finite sums
  std::size_t steps_used = 0;

  bool infinite() const { return !horizon_steps.has_value(); }
};

/// dt * sum_{k<K} PF^k(chi_B).
GramianField controllability_gramian(const TransferOperator& op, const CellSet& B, std::size_t K,
                                     Quadrature quadrature = Quadrature::left);
/// dt * sum_{k<K} Koopman^k(chi_A).
GramianField observability_gramian(const TransferOperator& op, const CellSet& A, std::size_t K,
                                   Quadrature quadrature = Quadrature::left);

struct InfiniteOptions {
  double tol = 1e-10;
  std::size_t max_steps = 1'000'000;
  InfiniteSolver solver = InfiniteSolver::summation;
};

/// Solves (I - PF) rho = dt chi_B. Throws InfeasibleError ("divergent
/// horizon ...") when mass from B can reach a closed class that never leaks
/// or when summation has not converged after max_steps.
GramianField infinite_controllability_gramian(const TransferOperator& op, const CellSet& B,
                                              const InfiniteOptions& options = {});
/// Solves (I - Koopman) v = dt chi_A; divergent when A meets a closed class.
GramianField infinite_observability_gramian(const TransferOperator& op, const CellSet& A,
                                            const InfiniteOptions& options = {});

/// 1e-9 * max(field), the default numerical support threshold.
double default_support_threshold(const GramianField& g);
/// Lebesgue measure of the cells whose value exceeds eps.
double support_measure(const GramianField& g, double eps);
double support_measure(const GramianField& g);
/// Cells whose value exceeds eps.
CellSet support_set(const GramianField& g, double eps);
/// sqrt(sum_i value_i^2 |D_i|).
double l2_norm(const GramianField& g);

/// Time that mass started uniformly on B spends in A: the integral of the
/// infinite-horizon controllability field over A.
double residence_time(const GramianField& g, const CellSet& A);

enum class StabilityClass { certified_stable, not_certified };

struct StabilityReport {
  StabilityClass classification = StabilityClass::not_certified;
  double residual = 0.0;   ///< +inf when divergence was detected structurally
  double min_value = 0.0;  ///< over cells outside the neighborhood
  ScalarField solution;
  std::size_t steps = 0;
  std::string reason;
};

/// Discrete steady transport certificate: v = dt * sum_k Koopman^k(v0).
/// Requires v0 >= 0 everywhere and v0 = 0 on `neighborhood`.
StabilityReport stability_certificate(const TransferOperator& op, const ScalarField& v0,
                                      const CellSet& neighborhood, double tol,
                                      std::size_t max_steps);

/// Cells that belong to a closed class of the transition graph: a strongly
/// connected component whose rows keep all of their mass inside it. Any
/// series sum_k P^k started on (or flowing into) such a class diverges.
std::vector<bool> closed_class_cells(const TransferOperator& op);

/// Cells reachable from `from` along nonzero entries of P (forward in time).
std::vector<bool> forward_reachable(const TransferOperator& op, const CellSet& from);
/// Cells from which `to` is reachable along nonzero entries of P.
std::vector<bool> backward_reachable(const TransferOperator& op, const CellSet& to);

std::string to_string(GramianKind kind);
GramianKind parse_gramian_kind(std::string_view name);
std::string to_string(StabilityClass c);

/// Sidecar {kind, K, dt, source_set, support_measure, l2_norm, residual};
/// K is null for the infinite horizon.
nlohmann::json gramian_sidecar_json(const GramianField& g, double support_eps);

}  // namespace advplace
