#include "advplace/placement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "advplace/error.hpp"

namespace advplace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<Candidate> enumerate_candidates(const BoxPartition& partition,
                                            const CandidateSpec& spec) {
  std::vector<Candidate> out;
  if (spec.patch) {
    const auto& p = *spec.patch;
    if (p.width < 1 || p.height < 1 || p.width > partition.px() || p.height > partition.py()) {
      throw InputError("candidates: patch size must be between 1 and the partition size");
    }
    if (p.stride < 1) throw InputError("candidates: stride must be at least 1");
    for (std::size_t iy = 0; iy + p.height <= partition.py(); iy += p.stride) {
      for (std::size_t ix = 0; ix + p.width <= partition.px(); ix += p.stride) {
        std::vector<std::size_t> cells;
        cells.reserve(p.width * p.height);
        for (std::size_t dy = 0; dy < p.height; ++dy) {
          for (std::size_t dx = 0; dx < p.width; ++dx) {
            cells.push_back(partition.index(ix + dx, iy + dy));
          }
        }
        const Domain rect{partition.edge_x(ix), partition.edge_x(ix + p.width),
                          partition.edge_y(iy), partition.edge_y(iy + p.height)};
        out.push_back({CellSet(partition, std::move(cells)),
                       "patch-" + std::to_string(ix) + "-" + std::to_string(iy), rect});
      }
    }
  }
  for (std::size_t k = 0; k < spec.explicit_sets.size(); ++k) {
    require_same_partition(partition, spec.explicit_sets[k].partition(), "enumerate_candidates");
    out.push_back({spec.explicit_sets[k], "set-" + std::to_string(k), std::nullopt});
  }
  return out;
}

PlacementScore score_candidate(const TransferOperator& op, const Candidate& cand, std::size_t K,
                               PlacementMode mode, std::optional<double> eps) {
  if (cand.cells.empty()) throw InputError("score_candidate: empty candidate");
  const GramianField g = mode == PlacementMode::actuator
                             ? controllability_gramian(op, cand.cells, K)
                             : observability_gramian(op, cand.cells, K);
  const double threshold = eps ? *eps : default_support_threshold(g);
  return PlacementScore{cand, support_measure(g, threshold), l2_norm(g), 0};
}

std::vector<PlacementScore> score_candidates(const TransferOperator& op,
                                             const std::vector<Candidate>& candidates,
                                             std::size_t K, PlacementMode mode,
                                             std::optional<double> eps, unsigned threads) {
  std::vector<std::optional<PlacementScore>> slots(candidates.size());
  unsigned n = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(candidates.size(), 1)));

  std::vector<std::exception_ptr> errors(n);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t i = w; i < candidates.size(); i += n) {
        slots[i] = score_candidate(op, candidates[i], K, mode, eps);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (n <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<PlacementScore> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<PlacementScore> rank_placements(std::vector<PlacementScore> scores,
                                            double support_tie_tol, NormDirection direction) {
  if (scores.empty()) throw InputError("rank_placements: no candidates");
  if (!(support_tie_tol >= 0.0)) throw InputError("rank_placements: tie tolerance must be >= 0");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto anchor = [&](std::size_t i) {
    const auto& c = scores[i].candidate.cells;
    return c.empty() ? std::size_t{0} : c.anchor();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].support != scores[b].support) return scores[a].support > scores[b].support;
    return anchor(a) < anchor(b);
  });

  // Walk the support-sorted list in groups led by the largest support.
  std::vector<std::size_t> ranked;
  ranked.reserve(order.size());
  std::size_t start = 0;
  while (start < order.size()) {
    const double lead = scores[order[start]].support;
    std::size_t end = start + 1;
    while (end < order.size() &&
           lead - scores[order[end]].support <= support_tie_tol * std::abs(lead)) {
      ++end;
    }
    std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const double na = scores[a].norm, nb = scores[b].norm;
                       if (na != nb) return direction == NormDirection::max ? na > nb : na < nb;
                       if (anchor(a) != anchor(b)) return anchor(a) < anchor(b);
                       return a < b;
                     });
    start = end;
  }

  std::vector<PlacementScore> out;
  out.reserve(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.push_back(std::move(scores[order[r]]));
    out.back().rank = r + 1;
  }
  return out;
}

CellSet reachable_set_oracle(const VectorField& field, const CellSet& B, double tau,
                             std::size_t n_samples, const FlowConfig& cfg, std::uint64_t seed) {
  if (B.empty()) throw InputError("reachable_set_oracle: B is empty");
  if (n_samples < 1) throw InputError("reachable_set_oracle: need at least one sample");
  if (!(tau >= 0.0)) throw InputError("reachable_set_oracle: tau must be non-negative");
  cfg.validate();
  const auto& part = B.partition();
  std::vector<bool> hit(part.size(), false);
  for (auto c : B.indices()) hit[c] = true;

  std::mt19937_64 rng(splitmix64(seed));
  const auto& cells = B.indices();
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto pick = std::min(cells.size() - 1,
                               static_cast<std::size_t>(unit_uniform(rng) *
                                                        static_cast<double>(cells.size())));
    const Domain box = part.cell_box(cells[pick]);
    const Point p{box.xmin + unit_uniform(rng) * box.width(),
                  box.ymin + unit_uniform(rng) * box.height()};
    trace_flow(field, p, tau, cfg, [&](Point q) {
      if (auto c = part.locate(q)) hit[*c] = true;
    });
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < hit.size(); ++i) {
    if (hit[i]) idx.push_back(i);
  }
  return CellSet(part, std::move(idx));
}

PlacementMode parse_placement_mode(std::string_view name) {
  if (name == "actuator") return PlacementMode::actuator;
  if (name == "sensor") return PlacementMode::sensor;
  throw InputError("unknown placement mode '" + std::string(name) + "'");
}

NormDirection parse_norm_direction(std::string_view name) {
  if (name == "max") return NormDirection::max;
  if (name == "min") return NormDirection::min;
  throw InputError("unknown norm direction '" + std::string(name) + "'");
}

std::string to_string(PlacementMode mode) {
  return mode == PlacementMode::actuator ? "actuator" : "sensor";
}

std::string to_string(NormDirection direction) {
  return direction == NormDirection::max ? "max" : "min";
}

}  // namespace advplace
