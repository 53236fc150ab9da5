#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advplace/field.hpp"
#include "advplace/gramian.hpp"
#include "advplace/partition.hpp"
#include "advplace/transfer.hpp"

namespace advplace {

struct PatchSpec {
  std::size_t width = 1;   ///< cells along x
  std::size_t height = 1;  ///< cells along y
  std::size_t stride = 1;
};

struct CandidateSpec {
  std::optional<PatchSpec> patch;
  std::vector<CellSet> explicit_sets;
};

struct Candidate {
  CellSet cells;
  std::string label;
  std::optional<Domain> rect;  ///< bounding box when the candidate is a patch
};

/// Patches first, ordered row-major by anchor cell, then the explicit sets in
/// the order given.
std::vector<Candidate> enumerate_candidates(const BoxPartition& partition,
                                            const CandidateSpec& spec);

enum class PlacementMode { actuator, sensor };
enum class NormDirection { max, min };

struct PlacementScore {
  Candidate candidate;
  double support = 0.0;
  double norm = 0.0;
  std::size_t rank = 0;  ///< 1-based; 0 until ranked
};

/// Support measure and L2 norm of the K-step controllability (actuator) or
/// observability (sensor) gramian of the candidate. eps defaults to
/// 1e-9 * max(field).
PlacementScore score_candidate(const TransferOperator& op, const Candidate& cand, std::size_t K,
                               PlacementMode mode, std::optional<double> eps = std::nullopt);

/// Scores every candidate; `threads` workers share the operator read-only
/// (0 means hardware concurrency). Order of the result matches the input.
std::vector<PlacementScore> score_candidates(const TransferOperator& op,
                                             const std::vector<Candidate>& candidates,
                                             std::size_t K, PlacementMode mode,
                                             std::optional<double> eps = std::nullopt,
                                             unsigned threads = 1);

/// Larger support first. A run of candidates whose supports lie within
/// support_tie_tol (relative to the run's largest support) is ordered by norm
/// in `direction`; remaining ties go by anchor cell, then input position.
std::vector<PlacementScore> rank_placements(std::vector<PlacementScore> scores,
                                            double support_tie_tol = 0.02,
                                            NormDirection direction = NormDirection::max);

/// Cells visited by n_samples trajectories seeded uniformly in B and traced
/// over [0, tau] at substep resolution.
CellSet reachable_set_oracle(const VectorField& field, const CellSet& B, double tau,
                             std::size_t n_samples, const FlowConfig& cfg, std::uint64_t seed);

PlacementMode parse_placement_mode(std::string_view name);
NormDirection parse_norm_direction(std::string_view name);
std::string to_string(PlacementMode mode);
std::string to_string(NormDirection direction);

}  // namespace advplace
