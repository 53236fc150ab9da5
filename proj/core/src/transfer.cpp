#include "advplace/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "advplace/error.hpp"
#include "advplace/format.hpp"

namespace advplace {

constexpr double kRowTolerance = 1e-12;

TransferOperator::TransferOperator(BoxPartition partition, double dt, Matrix matrix,
                                   Eigen::VectorXd leak, Provenance provenance)
    : TransferOperator(Unchecked{}, std::move(partition), dt, std::move(matrix), std::move(leak),
                       provenance) {
  for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
    for (Matrix::InnerIterator it(matrix_, i); it; ++it) {
      if (!(it.value() >= 0.0) || !std::isfinite(it.value())) {
        throw InputError("transfer operator: negative or non-finite entry in row " +
                         std::to_string(i));
      }
    }
    if (!(leak_[i] >= 0.0 && leak_[i] <= 1.0)) {
      throw InputError("transfer operator: leak outside [0, 1] in row " + std::to_string(i));
    }
  }
  if (max_row_deviation() > kRowTolerance) {
    throw InputError("transfer operator: row sums plus leak must equal 1");
  }
}

TransferOperator::TransferOperator(Unchecked, BoxPartition partition, double dt, Matrix matrix,
                                   Eigen::VectorXd leak, Provenance provenance)
    : partition_(std::move(partition)),
      dt_(dt),
      matrix_(std::move(matrix)),
      leak_(std::move(leak)),
      provenance_(provenance) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
    throw InputError("transfer operator: dt must be positive");
  }
  const auto n = static_cast<Eigen::Index>(partition_.size());
  if (matrix_.rows() != n || matrix_.cols() != n || leak_.size() != n) {
    throw InputError("transfer operator: matrix/leak size does not match the partition");
  }
  matrix_.makeCompressed();
}

double TransferOperator::max_row_deviation() const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
    double sum = leak_[i];
    for (Matrix::InnerIterator it(matrix_, i); it; ++it) sum += it.value();
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

TransferOperator TransferOperator::transposed() const {
  Matrix t = matrix_.transpose();
  return TransferOperator(Unchecked{}, partition_, dt_, std::move(t),
                          Eigen::VectorXd::Zero(leak_.size()), provenance_);
}

// ---------------------------------------------------------------------------
// Construction

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct RowResult {
  std::vector<std::pair<std::size_t, std::size_t>> counts;  // (column, hits), sorted
  std::size_t leaked = 0;
};

}  // namespace

TransferOperator build_operator(const VectorField& field, const BoxPartition& partition,
                                double dt, const BuildOptions& options) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("build_operator: dt must be positive");

  std::size_t sx = 0, sy = 0;
  std::size_t samples = options.samples_per_cell;
  if (options.sampling == Sampling::grid) {
    if (options.subgrid) {
      sx = options.subgrid->nx;
      sy = options.subgrid->ny;
    } else {
      const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(samples))));
      if (k * k != samples) {
        throw InputError("build_operator: grid sampling needs a perfect-square samples_per_cell "
                         "or an explicit sub-grid");
      }
      sx = sy = k;
    }
    samples = sx * sy;
  }
  if (samples == 0) throw InputError("build_operator: samples_per_cell must be at least 1");

  FlowConfig flow = options.flow.value_or(FlowConfig{dt / 10.0, Integrator::rk4});
  flow.validate();

  const std::size_t n = partition.size();
  std::vector<RowResult> rows(n);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> hits;
    hits.reserve(samples);
    for (std::size_t cell = begin; cell < end; ++cell) {
      const Domain box = partition.cell_box(cell);
      hits.clear();
      std::size_t leaked = 0;
      auto push = [&](Point p) {
        const auto end_point = flow_map(field, p, dt, flow);
        const auto dest = end_point ? partition.locate(*end_point) : std::nullopt;
        if (dest) {
          hits.push_back(*dest);
        } else {
          ++leaked;
        }
      };
      if (options.sampling == Sampling::grid) {
        for (std::size_t b = 0; b < sy; ++b) {
          const double y = box.ymin + box.height() * (static_cast<double>(b) + 0.5) /
                                          static_cast<double>(sy);
          for (std::size_t a = 0; a < sx; ++a) {
            const double x = box.xmin + box.width() * (static_cast<double>(a) + 0.5) /
                                            static_cast<double>(sx);
            push({x, y});
          }
        }
      } else {
        std::mt19937_64 rng(splitmix64(options.seed ^ splitmix64(cell)));
        for (std::size_t s = 0; s < samples; ++s) {
          const double x = box.xmin + box.width() * unit_uniform(rng);
          const double y = box.ymin + box.height() * unit_uniform(rng);
          push({x, y});
        }
      }
      std::sort(hits.begin(), hits.end());
      auto& row = rows[cell];
      row.leaked = leaked;
      for (std::size_t k = 0; k < hits.size();) {
        std::size_t m = k;
        while (m < hits.size() && hits[m] == hits[k]) ++m;
        row.counts.emplace_back(hits[k], m - k);
        k = m;
      }
    }
  };

  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = std::min(n, t * chunk);
      const std::size_t e = std::min(n, b + chunk);
      pool.emplace_back(work, b, e);
    }
  }

  const double denom = static_cast<double>(samples);
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd leak(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [j, c] : rows[i].counts) {
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(j),
                            static_cast<double>(c) / denom);
    }
    leak[static_cast<Eigen::Index>(i)] = static_cast<double>(rows[i].leaked) / denom;
  }
  TransferOperator::Matrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  p.setFromTriplets(triplets.begin(), triplets.end());

  return TransferOperator(partition, dt, std::move(p), std::move(leak),
                          {samples, options.seed, options.sampling});
}

// ---------------------------------------------------------------------------
// Application

Eigen::VectorXd pf_step(const TransferOperator& op, const Eigen::VectorXd& rho) {
  return op.matrix().transpose() * rho;
}

Eigen::VectorXd koopman_step(const TransferOperator& op, const Eigen::VectorXd& g) {
  return op.matrix() * g;
}

ScalarField apply_pf(const TransferOperator& op, const ScalarField& rho) {
  require_same_partition(op.partition(), rho.partition(), "apply_pf");
  return ScalarField(op.partition(), pf_step(op, rho.values()));
}

ScalarField apply_koopman(const TransferOperator& op, const ScalarField& g) {
  require_same_partition(op.partition(), g.partition(), "apply_koopman");
  return ScalarField(op.partition(), koopman_step(op, g.values()));
}

ScalarField evolve(const TransferOperator& op, const ScalarField& x, std::size_t steps,
                   Evolution mode) {
  require_same_partition(op.partition(), x.partition(), "evolve");
  Eigen::VectorXd v = x.values();
  for (std::size_t k = 0; k < steps; ++k) {
    v = mode == Evolution::pf ? pf_step(op, v) : koopman_step(op, v);
  }
  return ScalarField(op.partition(), std::move(v));
}

// ---------------------------------------------------------------------------
// Persistence

void save_operator(std::ostream& out, const TransferOperator& op) {
  const auto& leak = op.leak();
  nlohmann::json header{
      {"format", "advplace-operator"},
      {"version", 1},
      {"N", op.size()},
      {"dt", op.dt()},
      {"seed", op.provenance().seed},
      {"samples_per_cell", op.provenance().samples_per_cell},
      {"sampling", to_string(op.provenance().sampling)},
      {"partition", partition_to_json(op.partition())},
      {"nnz", op.matrix().nonZeros()},
      {"leak", std::vector<double>(leak.data(), leak.data() + leak.size())},
  };
  out << header.dump() << '\n';
  out << "i,j,value\n";
  const auto& m = op.matrix();
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    for (TransferOperator::Matrix::InnerIterator it(m, i); it; ++it) {
      out << i << ',' << it.col() << ',' << format_double(it.value()) << '\n';
    }
  }
}

TransferOperator load_operator(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("operator file: missing JSON header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("operator file: bad JSON header: ") + e.what());
  }
  try {
    if (header.value("format", std::string()) != "advplace-operator") {
      throw InputError("operator file: unrecognised format tag");
    }
    const auto partition = partition_from_json(header.at("partition"));
    const auto n = header.at("N").get<std::size_t>();
    if (n != partition.size()) throw InputError("operator file: N does not match the partition");
    const auto leak_vec = header.at("leak").get<std::vector<double>>();
    if (leak_vec.size() != n) throw InputError("operator file: leak has the wrong length");
    TransferOperator::Provenance prov{header.at("samples_per_cell").get<std::size_t>(),
                                      header.at("seed").get<std::uint64_t>(),
                                      parse_sampling(header.at("sampling").get<std::string>())};

    if (!std::getline(in, line) || split_csv_line(line) !=
                                       std::vector<std::string_view>{"i", "j", "value"}) {
      throw InputError("operator file: expected triplet header 'i,j,value'");
    }
    std::vector<Eigen::Triplet<double>> triplets;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
      ++line_no;
      const auto cols = split_csv_line(line);
      if (cols.size() == 1 && cols[0].empty()) continue;
      double i = 0, j = 0, v = 0;
      if (cols.size() != 3 || !parse_double(cols[0], i) || !parse_double(cols[1], j) ||
          !parse_double(cols[2], v) || i < 0 || j < 0 || i >= static_cast<double>(n) ||
          j >= static_cast<double>(n)) {
        throw InputError("operator file: bad triplet at line " + std::to_string(line_no));
      }
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
    }
    TransferOperator::Matrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    p.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::VectorXd leak = Eigen::Map<const Eigen::VectorXd>(leak_vec.data(),
                                                             static_cast<Eigen::Index>(n));
    return TransferOperator(partition, header.at("dt").get<double>(), std::move(p),
                            std::move(leak), prov);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("operator file: malformed header: ") + e.what());
  }
}

Sampling parse_sampling(std::string_view name) {
  if (name == "monte-carlo") return Sampling::monte_carlo;
  if (name == "grid") return Sampling::grid;
  throw InputError("unknown sampling mode '" + std::string(name) +
                   "' (expected monte-carlo or grid)");
}

std::string to_string(Sampling sampling) {
  return sampling == Sampling::grid ? "grid" : "monte-carlo";
}

}  // namespace advplace
