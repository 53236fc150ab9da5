#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/SparseCore>

#include "advplace/field.hpp"
#include "advplace/partition.hpp"

namespace advplace {

enum class Sampling {
  monte_carlo,  ///< uniform points drawn from a per-cell seeded generator
  grid,         ///< midpoints of a regular sub-grid of each cell
};

struct SubGrid {
  std::size_t nx = 10;
  std::size_t ny = 10;
};

struct BuildOptions {
  std::size_t samples_per_cell = 100;
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::monte_carlo;
  /// Grid sampling shape. Unset means a square k x k sub-grid with
  /// k*k == samples_per_cell. When set, it overrides samples_per_cell.
  std::optional<SubGrid> subgrid;
  /// Unset means RK4 with dt_integrate = dt / 10.
  std::optional<FlowConfig> flow;
  /// Worker threads for construction; 0 uses the hardware concurrency. The
  /// result does not depend on this value.
  unsigned threads = 1;
};

/// How an operator was sampled; carried into the saved file header.
struct OperatorProvenance {
  std::size_t samples_per_cell = 0;
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::monte_carlo;
};

/// Ulam approximation of the Perron-Frobenius operator over one step dt.
///
/// Row semantics: P(i, j) is the fraction of cell i's mass found in cell j
/// after dt, and leak[i] is the fraction that left the domain, so every row
/// satisfies sum_j P(i, j) + leak[i] = 1. Densities are pushed forward by
/// P^T (Perron-Frobenius) and observables are pulled back by P (Koopman).
class TransferOperator {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  using Provenance = OperatorProvenance;

  /// Validates nonnegativity, leak in [0, 1] and row conservation (1e-12).
  TransferOperator(BoxPartition partition, double dt, Matrix matrix, Eigen::VectorXd leak,
                   Provenance provenance = {});

  const BoxPartition& partition() const { return partition_; }
  std::size_t size() const { return partition_.size(); }
  double dt() const { return dt_; }
  const Matrix& matrix() const { return matrix_; }
  const Eigen::VectorXd& leak() const { return leak_; }
  const Provenance& provenance() const { return provenance_; }

  /// Largest |sum_j P(i, j) + leak[i] - 1| over rows.
  double max_row_deviation() const;

  /// Operator whose matrix is P^T with zero leak. Row conservation does not
  /// hold for the result; it exists for duality checks.
  TransferOperator transposed() const;

 private:
  struct Unchecked {};
  TransferOperator(Unchecked, BoxPartition partition, double dt, Matrix matrix,
                   Eigen::VectorXd leak, Provenance provenance);

  BoxPartition partition_;
  double dt_;
  Matrix matrix_;
  Eigen::VectorXd leak_;
  Provenance provenance_;
};

/// Builds P by mapping sample points of every cell through the flow over dt
/// and binning the endpoints. Samples absorbed by the boundary count as leak.
TransferOperator build_operator(const VectorField& field, const BoxPartition& partition,
                                double dt, const BuildOptions& options = {});

/// rho'_j = sum_i rho_i P(i, j).
ScalarField apply_pf(const TransferOperator& op, const ScalarField& rho);
/// g'_i = sum_j P(i, j) g_j.
ScalarField apply_koopman(const TransferOperator& op, const ScalarField& g);

enum class Evolution { pf, koopman };

ScalarField evolve(const TransferOperator& op, const ScalarField& x, std::size_t steps,
                   Evolution mode);

/// Raw vector versions of the single step, for inner loops.
Eigen::VectorXd pf_step(const TransferOperator& op, const Eigen::VectorXd& rho);
Eigen::VectorXd koopman_step(const TransferOperator& op, const Eigen::VectorXd& g);

/// Text format: one JSON header line, then `i,j,value` and one triplet per
/// line in row-major order. Doubles are written in shortest round-trip form,
/// so save/load reproduces the operator bit for bit.
void save_operator(std::ostream& out, const TransferOperator& op);
TransferOperator load_operator(std::istream& in);

Sampling parse_sampling(std::string_view name);
std::string to_string(Sampling sampling);

}  // namespace advplace
