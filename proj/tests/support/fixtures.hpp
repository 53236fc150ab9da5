#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <advplace/field.hpp>
#include <advplace/partition.hpp>
#include <advplace/transfer.hpp>

namespace fixtures {

using advplace::BoxPartition;
using advplace::Domain;
using advplace::TransferOperator;

inline BoxPartition strip(std::size_t n) { return BoxPartition(Domain{0, 1, 0, 1}, n, 1); }

// Operator from explicit (i, j, value) entries; leak fills each row to 1.
inline TransferOperator from_entries(const BoxPartition& part, double dt,
                                     const std::vector<Eigen::Triplet<double>>& entries) {
  TransferOperator::Matrix m(static_cast<Eigen::Index>(part.size()),
                             static_cast<Eigen::Index>(part.size()));
  m.setFromTriplets(entries.begin(), entries.end());
  Eigen::VectorXd leak = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(part.size()));
  for (const auto& t : entries) leak[t.row()] -= t.value();
  leak = leak.cwiseMax(0.0);
  return TransferOperator(part, dt, std::move(m), std::move(leak));
}

inline TransferOperator identity(const BoxPartition& part, double dt) {
  std::vector<Eigen::Triplet<double>> e;
  for (std::size_t i = 0; i < part.size(); ++i) {
    e.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
  }
  return from_entries(part, dt, e);
}

inline TransferOperator full_leak(const BoxPartition& part, double dt) {
  return from_entries(part, dt, {});
}

// Cell i moves to i+1 along x; the last column leaves the domain.
inline TransferOperator shift(const BoxPartition& part, double dt) {
  std::vector<Eigen::Triplet<double>> e;
  for (std::size_t i = 0; i < part.size(); ++i) {
    if (part.column(i) + 1 < part.px()) {
      e.emplace_back(static_cast<int>(i), static_cast<int>(i + 1), 1.0);
    }
  }
  return from_entries(part, dt, e);
}

// Measure-preserving cyclic permutation of all cells, no leak.
inline TransferOperator cycle(const BoxPartition& part, double dt) {
  std::vector<Eigen::Triplet<double>> e;
  const std::size_t n = part.size();
  for (std::size_t i = 0; i < n; ++i) {
    e.emplace_back(static_cast<int>(i), static_cast<int>((i + 1) % n), 1.0);
  }
  return from_entries(part, dt, e);
}

// f = (-x, 0) sampled on a node grid over `domain`.
inline advplace::VectorField sink_x(const Domain& domain, std::size_t nx = 65,
                                    advplace::BoundaryPolicy policy =
                                        advplace::BoundaryPolicy::absorb) {
  std::vector<double> u(nx * 2), v(nx * 2, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      u[j * nx + i] = -(domain.xmin + domain.width() * static_cast<double>(i) /
                                          static_cast<double>(nx - 1));
    }
  }
  return advplace::VectorField(domain, nx, 2, std::move(u), std::move(v), policy);
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("advplace-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace fixtures
