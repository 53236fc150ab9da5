#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "advplace/geometry.hpp"

namespace advplace {

/// Uniform px x py box decomposition of a rectangle. Cells are numbered
/// row-major (y outer): cell (ix, iy) has index iy*px + ix. Cells are
/// half-open [x_i, x_{i+1}) x [y_j, y_{j+1}), except that the last column
/// and row also own the closing edge.
class BoxPartition {
 public:
  BoxPartition(Domain domain, std::size_t px, std::size_t py);

  const Domain& domain() const { return domain_; }
  std::size_t px() const { return px_; }
  std::size_t py() const { return py_; }
  std::size_t size() const { return px_ * py_; }
  double cell_measure() const { return cell_measure_; }
  double cell_width() const { return domain_.width() / static_cast<double>(px_); }
  double cell_height() const { return domain_.height() / static_cast<double>(py_); }

  double edge_x(std::size_t ix) const;
  double edge_y(std::size_t iy) const;
  std::size_t index(std::size_t ix, std::size_t iy) const { return iy * px_ + ix; }
  std::size_t column(std::size_t cell) const { return cell % px_; }
  std::size_t row(std::size_t cell) const { return cell / px_; }
  Point center(std::size_t cell) const;
  Domain cell_box(std::size_t cell) const;

  /// Cell containing p, or nullopt outside the domain.
  std::optional<std::size_t> locate(Point p) const;

  friend bool operator==(const BoxPartition&, const BoxPartition&) = default;

 private:
  Domain domain_;
  std::size_t px_;
  std::size_t py_;
  double cell_measure_;
};

BoxPartition build_partition(const Domain& domain, std::size_t px, std::size_t py);

/// Sorted, duplicate-free set of cells of one partition.
class CellSet {
 public:
  explicit CellSet(BoxPartition partition) : partition_(std::move(partition)) {}
  /// Sorts and de-duplicates; throws InputError on out-of-range indices.
  CellSet(BoxPartition partition, std::vector<std::size_t> indices);

  static CellSet all(const BoxPartition& partition);

  const BoxPartition& partition() const { return partition_; }
  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(std::size_t cell) const;
  /// Smallest member index; used as a deterministic anchor.
  std::size_t anchor() const;

  friend bool operator==(const CellSet&, const CellSet&) = default;

 private:
  BoxPartition partition_;
  std::vector<std::size_t> indices_;
};

CellSet set_union(const CellSet& a, const CellSet& b);
CellSet set_difference(const CellSet& a, const CellSet& b);
CellSet set_intersection(const CellSet& a, const CellSet& b);

/// Cells whose centers lie inside the closed rectangle. Throws InputError
/// ("empty actuation set") when no center qualifies.
CellSet rect_to_cellset(const BoxPartition& partition, const Domain& rect);

/// Parses {"rect": [xmin, ymin, xmax, ymax]} or {"cells": [i, ...]}.
CellSet cellset_from_json(const BoxPartition& partition, const nlohmann::json& spec);
nlohmann::json cellset_to_json(const CellSet& set);

/// One finite value per cell, piecewise constant.
class ScalarField {
 public:
  explicit ScalarField(BoxPartition partition);
  ScalarField(BoxPartition partition, Eigen::VectorXd values);

  const BoxPartition& partition() const { return partition_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t cell) const { return values_[static_cast<Eigen::Index>(cell)]; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

 private:
  BoxPartition partition_;
  Eigen::VectorXd values_;
};

ScalarField indicator(const CellSet& set);
double measure(const CellSet& set);
double integrate(const ScalarField& field, const CellSet& over);

/// <a, b> = sum_i a_i b_i |D_i|.
double inner_product(const ScalarField& a, const ScalarField& b);
/// ||a||_{L2} = sqrt(<a, a>).
double field_l2_norm(const ScalarField& a);

/// Throws InputError("partition mismatch ...") when the partitions differ.
void require_same_partition(const BoxPartition& a, const BoxPartition& b, const char* what);

/// CSV with header `cx,cy,value`, one row per cell center in index order.
void write_scalar_field_csv(std::ostream& out, const ScalarField& field);
ScalarField read_scalar_field_csv(std::istream& in, const BoxPartition& partition);

nlohmann::json partition_to_json(const BoxPartition& partition);
BoxPartition partition_from_json(const nlohmann::json& j);

}  // namespace advplace
