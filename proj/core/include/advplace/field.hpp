#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advplace/geometry.hpp"

namespace advplace {

/// What happens to a trajectory that leaves the domain.
enum class BoundaryPolicy {
  clamp,   ///< project back onto the boundary and keep integrating
  absorb,  ///< the trajectory is lost (outflow)
};

enum class Integrator { rk4, euler };

struct FlowConfig {
  double dt_integrate = 1e-3;
  Integrator method = Integrator::rk4;

  void validate() const;
};

/// Velocity samples on a uniform (nx x ny) node grid spanning the domain.
/// Node (i, j) sits at (xmin + i*hx, ymin + j*hy); storage is row-major with
/// y outer and x inner, i.e. index j*nx + i.
class VectorField {
 public:
  VectorField(Domain domain, std::size_t nx, std::size_t ny, std::vector<double> u,
              std::vector<double> v, BoundaryPolicy policy = BoundaryPolicy::clamp);

  const Domain& domain() const { return domain_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  const std::vector<double>& u() const { return u_; }
  const std::vector<double>& v() const { return v_; }
  BoundaryPolicy boundary_policy() const { return policy_; }

  double node_x(std::size_t i) const;
  double node_y(std::size_t j) const;
  Velocity node(std::size_t i, std::size_t j) const {
    return {u_[j * nx_ + i], v_[j * nx_ + i]};
  }

  bool same_grid(const VectorField& other) const;
  VectorField with_policy(BoundaryPolicy policy) const;

 private:
  Domain domain_;
  std::size_t nx_;
  std::size_t ny_;
  std::vector<double> u_;
  std::vector<double> v_;
  BoundaryPolicy policy_;
};

/// Parses one snapshot CSV (header `x,y,u,v`, rows y-outer/x-inner).
/// `source` names the stream in diagnostics.
VectorField read_snapshot_csv(std::istream& in, std::string_view source,
                              BoundaryPolicy policy = BoundaryPolicy::clamp);
void write_snapshot_csv(std::ostream& out, const VectorField& field);

/// One field per file, in file order. All files must share grid and domain.
std::vector<VectorField> load_snapshots(std::span<const std::filesystem::path> files,
                                        BoundaryPolicy policy = BoundaryPolicy::clamp);

/// Nodewise arithmetic mean of equally spaced snapshots.
VectorField mean_field(std::span<const VectorField> snapshots);

/// Bilinear interpolation; points outside the domain are evaluated at the
/// nearest boundary point.
Velocity velocity_at(const VectorField& field, Point p);

/// Integrates dx/dt = f(x) for `duration` seconds (negative runs backwards).
/// Returns std::nullopt when an absorbing boundary swallows the trajectory.
std::optional<Point> flow_map(const VectorField& field, Point p, double duration,
                              const FlowConfig& cfg);

/// Same integration as flow_map, reporting the start point and every substep
/// endpoint to `visit`. Returns the end point (nullopt if absorbed).
std::optional<Point> trace_flow(const VectorField& field, Point p, double duration,
                                const FlowConfig& cfg, const std::function<void(Point)>& visit);

/// Central-difference divergence with spacing h. Requires p to be at least h
/// away from every wall.
double divergence_at(const VectorField& field, Point p, double h);

/// Built-in linear fields sampled on an (nx x ny) node grid:
///   linear-sink (-x,-y), rotation (-y,x), saddle (x,-y), uniform(ux,uy).
VectorField analytic_field(std::string_view name, const Domain& domain, std::size_t nx = 33,
                           std::size_t ny = 33, BoundaryPolicy policy = BoundaryPolicy::clamp);

BoundaryPolicy parse_boundary_policy(std::string_view name);
std::string to_string(BoundaryPolicy policy);

}  // namespace advplace
