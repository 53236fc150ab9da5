#include "advplace/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "advplace/error.hpp"
#include "advplace/format.hpp"

namespace advplace {

void FlowConfig::validate() const {
  if (!(dt_integrate > 0.0) || !std::isfinite(dt_integrate)) {
    throw InputError("flow config: dt_integrate must be positive and finite");
  }
}

VectorField::VectorField(Domain domain, std::size_t nx, std::size_t ny, std::vector<double> u,
                         std::vector<double> v, BoundaryPolicy policy)
    : domain_(domain), nx_(nx), ny_(ny), u_(std::move(u)), v_(std::move(v)), policy_(policy) {
  domain_.validate();
  if (nx_ < 2 || ny_ < 2) {
    throw InputError("vector field: need at least 2 grid nodes per axis");
  }
  if (u_.size() != nx_ * ny_ || v_.size() != nx_ * ny_) {
    throw InputError("vector field: u and v must each hold nx*ny values");
  }
  for (std::size_t k = 0; k < u_.size(); ++k) {
    if (!std::isfinite(u_[k]) || !std::isfinite(v_[k])) {
      throw InputError("vector field: non-finite velocity at node " + std::to_string(k));
    }
  }
}

double VectorField::node_x(std::size_t i) const {
  return domain_.xmin + domain_.width() * static_cast<double>(i) / static_cast<double>(nx_ - 1);
}

double VectorField::node_y(std::size_t j) const {
  return domain_.ymin + domain_.height() * static_cast<double>(j) / static_cast<double>(ny_ - 1);
}

bool VectorField::same_grid(const VectorField& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ && domain_ == other.domain_;
}

VectorField VectorField::with_policy(BoundaryPolicy policy) const {
  VectorField copy = *this;
  copy.policy_ = policy;
  return copy;
}

// ---------------------------------------------------------------------------
// Snapshot CSV

namespace {

struct CsvRow {
  double x, y, u, v;
  std::size_t line;
};

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  throw InputError(msg.str());
}

}  // namespace

VectorField read_snapshot_csv(std::istream& in, std::string_view source, BoundaryPolicy policy) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cols = split_csv_line(line);
    if (cols.size() == 1 && cols[0].empty()) continue;
    if (!have_header) {
      if (cols.size() != 4 || cols[0] != "x" || cols[1] != "y" || cols[2] != "u" ||
          cols[3] != "v") {
        parse_fail(source, line_no, "expected header 'x,y,u,v'");
      }
      have_header = true;
      continue;
    }
    if (cols.size() != 4) {
      parse_fail(source, line_no, "expected 4 columns, got " + std::to_string(cols.size()));
    }
    double vals[4];
    for (int c = 0; c < 4; ++c) {
      if (!parse_double(cols[c], vals[c])) {
        parse_fail(source, line_no, "cannot parse number '" + std::string(cols[c]) + "'");
      }
      if (!std::isfinite(vals[c])) {
        parse_fail(source, line_no,
                   "non-finite value in row " + std::to_string(rows.size() + 1));
      }
    }
    rows.push_back({vals[0], vals[1], vals[2], vals[3], line_no});
  }
  if (!have_header) parse_fail(source, line_no, "empty snapshot file");
  if (rows.size() < 4) parse_fail(source, line_no, "need at least a 2x2 grid of nodes");

  double xlo = rows[0].x, xhi = rows[0].x, ylo = rows[0].y, yhi = rows[0].y;
  for (const auto& r : rows) {
    xlo = std::min(xlo, r.x);
    xhi = std::max(xhi, r.x);
    ylo = std::min(ylo, r.y);
    yhi = std::max(yhi, r.y);
  }
  const double tol_x = 1e-9 * std::max(xhi - xlo, 1e-300);
  const double tol_y = 1e-9 * std::max(yhi - ylo, 1e-300);

  std::size_t nx = 0;
  while (nx < rows.size() && std::abs(rows[nx].y - rows[0].y) <= tol_y) ++nx;
  if (nx < 2 || rows.size() % nx != 0) {
    parse_fail(source, rows[std::min(nx, rows.size() - 1)].line,
               "cannot infer a rectilinear grid (rows must be y-outer, x-inner)");
  }
  const std::size_t ny = rows.size() / nx;
  if (ny < 2) parse_fail(source, rows.back().line, "need at least 2 distinct y coordinates");

  const Domain domain{rows[0].x, rows[nx - 1].x, rows[0].y, rows.back().y};
  if (!(domain.xmax > domain.xmin) || !(domain.ymax > domain.ymin)) {
    parse_fail(source, rows[0].line, "coordinates must increase along x and y");
  }
  const double hx = domain.width() / static_cast<double>(nx - 1);
  const double hy = domain.height() / static_cast<double>(ny - 1);

  std::vector<double> u(rows.size()), v(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = k % nx;
    const std::size_t j = k / nx;
    const double ex = domain.xmin + hx * static_cast<double>(i);
    const double ey = domain.ymin + hy * static_cast<double>(j);
    if (std::abs(rows[k].x - ex) > tol_x || std::abs(rows[k].y - ey) > tol_y) {
      parse_fail(source, rows[k].line,
                 "coordinates do not form a uniform row-major grid (expected " +
                     format_double(ex) + "," + format_double(ey) + ")");
    }
    u[k] = rows[k].u;
    v[k] = rows[k].v;
  }
  return VectorField(domain, nx, ny, std::move(u), std::move(v), policy);
}

void write_snapshot_csv(std::ostream& out, const VectorField& field) {
  out << "x,y,u,v\n";
  for (std::size_t j = 0; j < field.ny(); ++j) {
    for (std::size_t i = 0; i < field.nx(); ++i) {
      const auto vel = field.node(i, j);
      out << format_double(field.node_x(i)) << ',' << format_double(field.node_y(j)) << ','
          << format_double(vel.u) << ',' << format_double(vel.v) << '\n';
    }
  }
}

std::vector<VectorField> load_snapshots(std::span<const std::filesystem::path> files,
                                        BoundaryPolicy policy) {
  std::vector<VectorField> out;
  out.reserve(files.size());
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open snapshot file " + path.string());
    out.push_back(read_snapshot_csv(in, path.string(), policy));
    if (!out.back().same_grid(out.front())) {
      std::ostringstream msg;
      msg << "inconsistent grids: " << path.string() << " is " << out.back().nx() << "x"
          << out.back().ny() << " but " << files.front().string() << " is " << out.front().nx()
          << "x" << out.front().ny() << " (or the domains differ)";
      throw InputError(msg.str());
    }
  }
  return out;
}

VectorField mean_field(std::span<const VectorField> snapshots) {
  if (snapshots.empty()) throw InputError("mean_field: empty snapshot list");
  const auto& first = snapshots.front();
  std::vector<double> u(first.u().size(), 0.0), v(first.v().size(), 0.0);
  for (const auto& s : snapshots) {
    if (!s.same_grid(first)) throw InputError("mean_field: inconsistent grids");
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] += s.u()[k];
      v[k] += s.v()[k];
    }
  }
  const double n = static_cast<double>(snapshots.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    u[k] /= n;
    v[k] /= n;
  }
  return VectorField(first.domain(), first.nx(), first.ny(), std::move(u), std::move(v),
                     first.boundary_policy());
}

// ---------------------------------------------------------------------------
// Evaluation and integration

Velocity velocity_at(const VectorField& field, Point p) {
  const Domain& d = field.domain();
  p = d.clamp(p);
  const double fx = (p.x - d.xmin) / d.width() * static_cast<double>(field.nx() - 1);
  const double fy = (p.y - d.ymin) / d.height() * static_cast<double>(field.ny() - 1);
  const auto i = std::min(static_cast<std::size_t>(fx), field.nx() - 2);
  const auto j = std::min(static_cast<std::size_t>(fy), field.ny() - 2);
  const double tx = fx - static_cast<double>(i);
  const double ty = fy - static_cast<double>(j);

  const auto a = field.node(i, j);
  const auto b = field.node(i + 1, j);
  const auto c = field.node(i, j + 1);
  const auto e = field.node(i + 1, j + 1);
  const double w00 = (1.0 - tx) * (1.0 - ty);
  const double w10 = tx * (1.0 - ty);
  const double w01 = (1.0 - tx) * ty;
  const double w11 = tx * ty;
  return {w00 * a.u + w10 * b.u + w01 * c.u + w11 * e.u,
          w00 * a.v + w10 * b.v + w01 * c.v + w11 * e.v};
}

namespace {

Point advance(const VectorField& field, Point p, double h, Integrator method) {
  const auto k1 = velocity_at(field, p);
  if (method == Integrator::euler) return {p.x + h * k1.u, p.y + h * k1.v};
  const auto k2 = velocity_at(field, {p.x + 0.5 * h * k1.u, p.y + 0.5 * h * k1.v});
  const auto k3 = velocity_at(field, {p.x + 0.5 * h * k2.u, p.y + 0.5 * h * k2.v});
  const auto k4 = velocity_at(field, {p.x + h * k3.u, p.y + h * k3.v});
  return {p.x + h / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
          p.y + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

}  // namespace

std::optional<Point> trace_flow(const VectorField& field, Point p, double duration,
                                const FlowConfig& cfg, const std::function<void(Point)>& visit) {
  cfg.validate();
  if (!std::isfinite(duration)) throw InputError("flow_map: duration must be finite");
  const Domain& d = field.domain();
  if (!d.contains(p)) {
    if (field.boundary_policy() == BoundaryPolicy::absorb) return std::nullopt;
    p = d.clamp(p);
  }
  if (visit) visit(p);

  const double sign = duration < 0.0 ? -1.0 : 1.0;
  const double total = std::abs(duration);
  const auto full = static_cast<std::size_t>(std::floor(total / cfg.dt_integrate));
  const double rest = total - static_cast<double>(full) * cfg.dt_integrate;
  const std::size_t steps = full + (rest > 1e-12 * cfg.dt_integrate ? 1 : 0);

  for (std::size_t s = 0; s < steps; ++s) {
    const double h = sign * (s < full ? cfg.dt_integrate : rest);
    p = advance(field, p, h, cfg.method);
    if (!d.contains(p)) {
      if (field.boundary_policy() == BoundaryPolicy::absorb) return std::nullopt;
      p = d.clamp(p);
    }
    if (visit) visit(p);
  }
  return p;
}

std::optional<Point> flow_map(const VectorField& field, Point p, double duration,
                              const FlowConfig& cfg) {
  return trace_flow(field, p, duration, cfg, nullptr);
}

double divergence_at(const VectorField& field, Point p, double h) {
  const Domain& d = field.domain();
  if (!(h > 0.0)) throw InputError("divergence_at: spacing h must be positive");
  if (p.x - h < d.xmin || p.x + h > d.xmax || p.y - h < d.ymin || p.y + h > d.ymax) {
    throw InputError("divergence_at: point too close to boundary for spacing h");
  }
  const double dudx =
      (velocity_at(field, {p.x + h, p.y}).u - velocity_at(field, {p.x - h, p.y}).u) / (2.0 * h);
  const double dvdy =
      (velocity_at(field, {p.x, p.y + h}).v - velocity_at(field, {p.x, p.y - h}).v) / (2.0 * h);
  return dudx + dvdy;
}

// ---------------------------------------------------------------------------
// Built-in analytic fields

VectorField analytic_field(std::string_view name, const Domain& domain, std::size_t nx,
                           std::size_t ny, BoundaryPolicy policy) {
  domain.validate();
  if (nx < 2 || ny < 2) throw InputError("analytic field: need at least 2 nodes per axis");

  std::function<Velocity(double, double)> f;
  if (name == "linear-sink") {
    f = [](double x, double y) { return Velocity{-x, -y}; };
  } else if (name == "rotation") {
    f = [](double x, double y) { return Velocity{-y, x}; };
  } else if (name == "saddle") {
    f = [](double x, double y) { return Velocity{x, -y}; };
  } else if (name.starts_with("uniform(") && name.ends_with(")")) {
    const auto args = split_csv_line(name.substr(8, name.size() - 9));
    double ux = 0.0, uy = 0.0;
    if (args.size() != 2 || !parse_double(args[0], ux) || !parse_double(args[1], uy) ||
        !std::isfinite(ux) || !std::isfinite(uy)) {
      throw InputError("analytic field: expected uniform(ux,uy), got '" + std::string(name) + "'");
    }
    f = [ux, uy](double, double) { return Velocity{ux, uy}; };
  } else {
    throw InputError("unknown analytic field '" + std::string(name) +
                     "' (expected linear-sink, rotation, saddle or uniform(ux,uy))");
  }

  std::vector<double> u(nx * ny), v(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    const double y =
        domain.ymin + domain.height() * static_cast<double>(j) / static_cast<double>(ny - 1);
    for (std::size_t i = 0; i < nx; ++i) {
      const double x =
          domain.xmin + domain.width() * static_cast<double>(i) / static_cast<double>(nx - 1);
      const auto vel = f(x, y);
      u[j * nx + i] = vel.u;
      v[j * nx + i] = vel.v;
    }
  }
  return VectorField(domain, nx, ny, std::move(u), std::move(v), policy);
}

BoundaryPolicy parse_boundary_policy(std::string_view name) {
  if (name == "clamp" || name == "clamp-to-boundary") return BoundaryPolicy::clamp;
  if (name == "absorb" || name == "absorb-outside") return BoundaryPolicy::absorb;
  throw InputError("unknown boundary policy '" + std::string(name) +
                   "' (expected clamp-to-boundary or absorb-outside)");
}

std::string to_string(BoundaryPolicy policy) {
  return policy == BoundaryPolicy::clamp ? "clamp-to-boundary" : "absorb-outside";
}

}  // namespace advplace
