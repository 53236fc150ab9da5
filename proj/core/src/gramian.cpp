#include "advplace/gramian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>
#include <nlohmann/json.hpp>

#include "advplace/error.hpp"
#include "advplace/format.hpp"

namespace advplace {

namespace {

using Vec = Eigen::VectorXd;

Vec step(const TransferOperator& op, const Vec& x, Evolution mode) {
  return mode == Evolution::pf ? pf_step(op, x) : koopman_step(op, x);
}

void require_nonempty(const CellSet& set, const char* what) {
  if (set.empty()) {
    throw InputError(std::string(what) + ": source set is empty (it must have positive measure)");
  }
}

GramianField finite_gramian(const TransferOperator& op, const CellSet& set, std::size_t K,
                            Evolution mode, Quadrature quadrature, GramianKind kind) {
  require_same_partition(op.partition(), set.partition(), "gramian");
  require_nonempty(set, kind == GramianKind::controllability ? "controllability_gramian"
                                                             : "observability_gramian");
  Vec x = indicator(set).values();
  Vec acc = Vec::Zero(x.size());
  for (std::size_t k = 0; k < K; ++k) {
    if (quadrature == Quadrature::trapezoid && k == 0) {
      acc += 0.5 * x;
    } else {
      acc += x;
    }
    x = step(op, x, mode);
  }
  if (quadrature == Quadrature::trapezoid && K > 0) acc += 0.5 * x;
  acc *= op.dt();
  return GramianField{kind, K, set, ScalarField(op.partition(), std::move(acc)), op.dt(), 0.0, K};
}

// Watches the sup norm of the iterates of a truncated Neumann series. Once the
// decay is geometric (two consecutive windows agree on a rate below one) and
// the projected step count to reach the target exceeds the budget, the series
// is reported as divergent without spending the rest of the budget. Plateaus
// (rate exactly one) are left to the max_steps fallback.
class DecayMonitor {
 public:
  DecayMonitor(double target, std::size_t max_steps) : target_(target), max_steps_(max_steps) {}

  bool hopeless(std::size_t step, double norm) {
    if (step % kWindow != 0) return false;
    bool out = false;
    if (start_norm_ > 0.0 && norm > 0.0) {
      const double rate = std::pow(norm / start_norm_, 1.0 / static_cast<double>(kWindow));
      if (rate < 1.0 && prev_rate_ < 1.0 &&
          std::abs(rate - prev_rate_) <= 0.01 * (1.0 - rate)) {
        projected_ = static_cast<double>(step) + std::log(target_ / norm) / std::log(rate);
        rate_ = rate;
        out = projected_ > static_cast<double>(max_steps_);
      }
      prev_rate_ = rate;
    }
    start_norm_ = norm;
    return out;
  }

  std::string describe() const {
    std::ostringstream s;
    s << "decay rate 1 - " << format_double(1.0 - rate_) << " per step, convergence projected after "
      << format_double(std::ceil(projected_)) << " steps (max_steps " << max_steps_ << ")";
    return s.str();
  }

 private:
  static constexpr std::size_t kWindow = 1000;
  double target_;
  std::size_t max_steps_;
  double start_norm_ = 0.0;
  double prev_rate_ = 2.0;
  double rate_ = 1.0;
  double projected_ = 0.0;
};

std::string divergence_message(GramianKind kind) {
  return kind == GramianKind::controllability
             ? "divergent horizon: field not a.e. uniformly stable w.r.t. B"
             : "divergent horizon: field not globally asymptotically stable w.r.t. A";
}

// Residual of the fixed-point equation, ||(I - E) field - dt chi||_inf.
double fixed_point_residual(const TransferOperator& op, const Vec& field, const Vec& chi,
                            Evolution mode) {
  const Vec r = field - step(op, field, mode) - op.dt() * chi;
  return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff();
}

GramianField infinite_gramian(const TransferOperator& op, const CellSet& set,
                              const InfiniteOptions& options, Evolution mode, GramianKind kind) {
  require_same_partition(op.partition(), set.partition(), "gramian");
  require_nonempty(set, kind == GramianKind::controllability ? "infinite_controllability_gramian"
                                                             : "infinite_observability_gramian");
  if (!(options.tol > 0.0)) throw InputError("infinite gramian: tol must be positive");

  // Structural divergence: mass that reaches a closed class never leaves it.
  const auto closed = closed_class_cells(op);
  const auto relevant =
      mode == Evolution::pf ? forward_reachable(op, set) : backward_reachable(op, set);
  for (std::size_t i = 0; i < closed.size(); ++i) {
    const bool hit = mode == Evolution::pf ? (relevant[i] && closed[i]) : (closed[i] && set.contains(i));
    if (hit) throw InfeasibleError(divergence_message(kind));
  }

  const Vec chi = indicator(set).values();
  const double dt = op.dt();
  Vec field;
  std::size_t steps = 0;

  if (options.solver == InfiniteSolver::summation) {
    Vec x = chi;
    Vec acc = Vec::Zero(chi.size());
    DecayMonitor monitor(0.5 * options.tol / dt, options.max_steps);
    while (true) {
      acc += x;
      x = step(op, x, mode);
      ++steps;
      // (I - E) dt*acc - dt*chi = -dt * x exactly in exact arithmetic.
      const double norm = x.cwiseAbs().maxCoeff();
      if (dt * norm <= 0.5 * options.tol) break;
      if (steps >= options.max_steps) throw InfeasibleError(divergence_message(kind));
      if (monitor.hopeless(steps, norm)) {
        throw InfeasibleError(divergence_message(kind) + " (" + monitor.describe() + ")");
      }
    }
    field = dt * acc;
  } else {
    std::vector<Eigen::Index> local(relevant.size(), -1);
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < relevant.size(); ++i) {
      if (relevant[i]) {
        local[i] = static_cast<Eigen::Index>(cells.size());
        cells.push_back(i);
      }
    }
    const auto m = static_cast<Eigen::Index>(cells.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index r = 0; r < m; ++r) trip.emplace_back(r, r, 1.0);
    const auto& p = op.matrix();
    for (std::size_t i : cells) {
      for (TransferOperator::Matrix::InnerIterator it(p, static_cast<Eigen::Index>(i)); it; ++it) {
        const auto j = static_cast<std::size_t>(it.col());
        if (local[j] < 0) continue;
        // PF: row j of (I - P^T) gets -P(i, j) at column i; Koopman: row i gets -P(i, j).
        if (mode == Evolution::pf) {
          trip.emplace_back(local[j], local[i], -it.value());
        } else {
          trip.emplace_back(local[i], local[j], -it.value());
        }
      }
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw InfeasibleError(divergence_message(kind));
    Vec rhs(m);
    for (Eigen::Index r = 0; r < m; ++r) rhs[r] = dt * chi[static_cast<Eigen::Index>(cells[r])];
    const Vec sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !sol.allFinite()) {
      throw InfeasibleError(divergence_message(kind));
    }
    field = Vec::Zero(chi.size());
    for (Eigen::Index r = 0; r < m; ++r) field[static_cast<Eigen::Index>(cells[r])] = sol[r];
    // Sparse LU can leave round-off negatives on cells with vanishing values.
    field = field.cwiseMax(0.0);
  }

  const double residual = fixed_point_residual(op, field, chi, mode);
  return GramianField{kind, std::nullopt, set, ScalarField(op.partition(), std::move(field)), dt,
                      residual, steps};
}

}  // namespace

GramianField controllability_gramian(const TransferOperator& op, const CellSet& B, std::size_t K,
                                     Quadrature quadrature) {
  return finite_gramian(op, B, K, Evolution::pf, quadrature, GramianKind::controllability);
}

GramianField observability_gramian(const TransferOperator& op, const CellSet& A, std::size_t K,
                                   Quadrature quadrature) {
  return finite_gramian(op, A, K, Evolution::koopman, quadrature, GramianKind::observability);
}

GramianField infinite_controllability_gramian(const TransferOperator& op, const CellSet& B,
                                              const InfiniteOptions& options) {
  return infinite_gramian(op, B, options, Evolution::pf, GramianKind::controllability);
}

GramianField infinite_observability_gramian(const TransferOperator& op, const CellSet& A,
                                            const InfiniteOptions& options) {
  return infinite_gramian(op, A, options, Evolution::koopman, GramianKind::observability);
}

double default_support_threshold(const GramianField& g) {
  const auto& v = g.field.values();
  return v.size() == 0 ? 0.0 : 1e-9 * v.maxCoeff();
}

CellSet support_set(const GramianField& g, double eps) {
  if (!(eps >= 0.0)) throw InputError("support threshold must be non-negative");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < g.field.size(); ++i) {
    if (g.field[i] > eps) idx.push_back(i);
  }
  return CellSet(g.field.partition(), std::move(idx));
}

double support_measure(const GramianField& g, double eps) { return measure(support_set(g, eps)); }

double support_measure(const GramianField& g) {
  return support_measure(g, default_support_threshold(g));
}

double l2_norm(const GramianField& g) { return field_l2_norm(g.field); }

double residence_time(const GramianField& g, const CellSet& A) {
  if (g.kind != GramianKind::controllability || !g.infinite()) {
    throw InputError("residence_time needs an infinite-horizon controllability gramian");
  }
  return integrate(g.field, A);
}

// ---------------------------------------------------------------------------
// Stability certificate

StabilityReport stability_certificate(const TransferOperator& op, const ScalarField& v0,
                                      const CellSet& neighborhood, double tol,
                                      std::size_t max_steps) {
  require_same_partition(op.partition(), v0.partition(), "stability_certificate");
  require_same_partition(op.partition(), neighborhood.partition(), "stability_certificate");
  if (!(tol > 0.0)) throw InputError("stability_certificate: tol must be positive");
  for (std::size_t i = 0; i < v0.size(); ++i) {
    if (v0[i] < 0.0) {
      throw InputError("stability_certificate: v0 must be non-negative (cell " +
                       std::to_string(i) + ")");
    }
  }
  for (auto i : neighborhood.indices()) {
    if (v0[i] != 0.0) {
      throw InputError("stability_certificate: v0 must vanish on the equilibrium neighborhood "
                       "(cell " + std::to_string(i) + ")");
    }
  }

  const auto n = static_cast<Eigen::Index>(v0.size());
  const double dt = op.dt();
  auto min_outside = [&](const Vec& v) {
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!neighborhood.contains(static_cast<std::size_t>(i))) m = std::min(m, v[i]);
    }
    return std::isfinite(m) ? m : 0.0;
  };

  const auto closed = closed_class_cells(op);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (closed[static_cast<std::size_t>(i)] && v0.values()[i] > 0.0) {
      return StabilityReport{StabilityClass::not_certified,
                             std::numeric_limits<double>::infinity(),
                             0.0,
                             ScalarField(op.partition()),
                             0,
                             "divergent: v0 is positive on a closed class that never leaks "
                             "(trajectories recur without reaching the neighborhood)"};
    }
  }

  Vec x = v0.values();
  Vec acc = Vec::Zero(n);
  std::size_t steps = 0;
  bool converged = x.size() == 0 || x.cwiseAbs().maxCoeff() == 0.0;
  bool hopeless = false;
  DecayMonitor monitor(0.5 * tol / dt, max_steps);
  while (!converged && !hopeless && steps < max_steps) {
    acc += x;
    x = koopman_step(op, x);
    ++steps;
    const double norm = x.cwiseAbs().maxCoeff();
    converged = dt * norm <= 0.5 * tol;
    hopeless = !converged && monitor.hopeless(steps, norm);
  }
  Vec v = dt * acc;
  const Vec r = v - koopman_step(op, v) - dt * v0.values();
  const double residual = r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff();
  const double min_value = min_outside(v);

  StabilityReport report{StabilityClass::not_certified, residual, min_value,
                         ScalarField(op.partition(), std::move(v)), steps, ""};
  if (hopeless) {
    report.reason = "divergent: occupation-time series cannot converge within max_steps, " +
                    monitor.describe();
  } else if (!converged) {
    report.reason = "no convergence within max_steps";
  } else if (residual > tol) {
    report.reason = "residual above tolerance";
  } else if (min_value < 0.0) {
    report.reason = "negative solution outside the neighborhood";
  } else {
    report.classification = StabilityClass::certified_stable;
    report.reason = "occupation-time series converged";
  }
  return report;
}

// ---------------------------------------------------------------------------
// Graph analysis

std::vector<bool> closed_class_cells(const TransferOperator& op) {
  const auto& p = op.matrix();
  const std::size_t n = op.size();
  constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0), comp(n, kUnvisited);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::size_t counter = 0, n_comp = 0;

  // Iterative Tarjan: frames hold (node, position in its adjacency).
  struct Frame {
    std::size_t node;
    const int* next;
    const int* end;
  };
  std::vector<Frame> frames;
  const int* inner = p.innerIndexPtr();
  const auto* outer = p.outerIndexPtr();

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    auto open = [&](std::size_t v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = true;
      frames.push_back({v, inner + outer[v], inner + outer[v + 1]});
    };
    open(root);
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next != f.end) {
        const auto w = static_cast<std::size_t>(*f.next++);
        if (index[w] == kUnvisited) {
          open(w);
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      const std::size_t v = f.node;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().node] = std::min(low[frames.back().node], low[v]);
      if (low[v] == index[v]) {
        while (true) {
          const std::size_t w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = n_comp;
          if (w == v) break;
        }
        ++n_comp;
      }
    }
  }

  // A component is closed when every row keeps (numerically) all its mass inside it.
  std::vector<bool> comp_closed(n_comp, true);
  for (std::size_t i = 0; i < n; ++i) {
    double inside = 0.0;
    for (TransferOperator::Matrix::InnerIterator it(p, static_cast<Eigen::Index>(i)); it; ++it) {
      if (comp[static_cast<std::size_t>(it.col())] == comp[i]) inside += it.value();
    }
    if (inside < 1.0 - 1e-12) comp_closed[comp[i]] = false;
  }
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = comp_closed[comp[i]];
  return out;
}

std::vector<bool> forward_reachable(const TransferOperator& op, const CellSet& from) {
  require_same_partition(op.partition(), from.partition(), "forward_reachable");
  const auto& p = op.matrix();
  std::vector<bool> seen(op.size(), false);
  std::vector<std::size_t> todo(from.indices().begin(), from.indices().end());
  for (auto i : todo) seen[i] = true;
  while (!todo.empty()) {
    const auto i = todo.back();
    todo.pop_back();
    for (TransferOperator::Matrix::InnerIterator it(p, static_cast<Eigen::Index>(i)); it; ++it) {
      const auto j = static_cast<std::size_t>(it.col());
      if (it.value() > 0.0 && !seen[j]) {
        seen[j] = true;
        todo.push_back(j);
      }
    }
  }
  return seen;
}

std::vector<bool> backward_reachable(const TransferOperator& op, const CellSet& to) {
  require_same_partition(op.partition(), to.partition(), "backward_reachable");
  const TransferOperator::Matrix pt = op.matrix().transpose();
  std::vector<bool> seen(op.size(), false);
  std::vector<std::size_t> todo(to.indices().begin(), to.indices().end());
  for (auto i : todo) seen[i] = true;
  while (!todo.empty()) {
    const auto j = todo.back();
    todo.pop_back();
    for (TransferOperator::Matrix::InnerIterator it(pt, static_cast<Eigen::Index>(j)); it; ++it) {
      const auto i = static_cast<std::size_t>(it.col());
      if (it.value() > 0.0 && !seen[i]) {
        seen[i] = true;
        todo.push_back(i);
      }
    }
  }
  return seen;
}

// ---------------------------------------------------------------------------

std::string to_string(GramianKind kind) {
  return kind == GramianKind::controllability ? "controllability" : "observability";
}

GramianKind parse_gramian_kind(std::string_view name) {
  if (name == "controllability") return GramianKind::controllability;
  if (name == "observability") return GramianKind::observability;
  throw InputError("unknown gramian kind '" + std::string(name) + "'");
}

std::string to_string(StabilityClass c) {
  return c == StabilityClass::certified_stable ? "certified-stable" : "not-certified";
}

nlohmann::json gramian_sidecar_json(const GramianField& g, double support_eps) {
  nlohmann::json j{
      {"kind", to_string(g.kind)},
      {"K", nullptr},
      {"dt", g.dt},
      {"source_set", cellset_to_json(g.source_set)},
      {"support_measure", support_measure(g, support_eps)},
      {"support_threshold", support_eps},
      {"l2_norm", l2_norm(g)},
      {"residual", g.residual},
      {"steps_used", g.steps_used},
  };
  if (g.horizon_steps) j["K"] = *g.horizon_steps;
  return j;
}

}  // namespace advplace
