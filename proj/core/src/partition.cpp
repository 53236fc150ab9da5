#include "advplace/partition.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "advplace/error.hpp"
#include "advplace/format.hpp"

namespace advplace {

BoxPartition::BoxPartition(Domain domain, std::size_t px, std::size_t py)
    : domain_(domain), px_(px), py_(py), cell_measure_(0.0) {
  domain_.validate();
  if (px_ == 0 || py_ == 0) throw InputError("partition: cell counts must be at least 1");
  cell_measure_ = domain_.area() / static_cast<double>(px_ * py_);
}

double BoxPartition::edge_x(std::size_t ix) const {
  if (ix >= px_) return domain_.xmax;
  return domain_.xmin + domain_.width() * static_cast<double>(ix) / static_cast<double>(px_);
}

double BoxPartition::edge_y(std::size_t iy) const {
  if (iy >= py_) return domain_.ymax;
  return domain_.ymin + domain_.height() * static_cast<double>(iy) / static_cast<double>(py_);
}

Point BoxPartition::center(std::size_t cell) const {
  const auto ix = column(cell);
  const auto iy = row(cell);
  return {0.5 * (edge_x(ix) + edge_x(ix + 1)), 0.5 * (edge_y(iy) + edge_y(iy + 1))};
}

Domain BoxPartition::cell_box(std::size_t cell) const {
  const auto ix = column(cell);
  const auto iy = row(cell);
  return {edge_x(ix), edge_x(ix + 1), edge_y(iy), edge_y(iy + 1)};
}

namespace {

// Index of the half-open slab containing t; edges are recomputed with the
// same arithmetic as edge_x/edge_y so ties resolve consistently.
template <typename EdgeFn>
std::size_t slab(double t, double lo, double extent, std::size_t n, EdgeFn edge) {
  const double f = (t - lo) / extent * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::clamp(std::floor(f), 0.0, static_cast<double>(n - 1)));
  while (k + 1 < n && t >= edge(k + 1)) ++k;
  while (k > 0 && t < edge(k)) --k;
  return k;
}

}  // namespace

std::optional<std::size_t> BoxPartition::locate(Point p) const {
  if (!domain_.contains(p)) return std::nullopt;
  const auto ix =
      slab(p.x, domain_.xmin, domain_.width(), px_, [this](std::size_t k) { return edge_x(k); });
  const auto iy =
      slab(p.y, domain_.ymin, domain_.height(), py_, [this](std::size_t k) { return edge_y(k); });
  return index(ix, iy);
}

BoxPartition build_partition(const Domain& domain, std::size_t px, std::size_t py) {
  return BoxPartition(domain, px, py);
}

// ---------------------------------------------------------------------------
// CellSet

CellSet::CellSet(BoxPartition partition, std::vector<std::size_t> indices)
    : partition_(std::move(partition)), indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  if (!indices_.empty() && indices_.back() >= partition_.size()) {
    throw InputError("cell set: index " + std::to_string(indices_.back()) +
                     " out of range for a partition of " + std::to_string(partition_.size()) +
                     " cells");
  }
}

CellSet CellSet::all(const BoxPartition& partition) {
  std::vector<std::size_t> idx(partition.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return CellSet(partition, std::move(idx));
}

bool CellSet::contains(std::size_t cell) const {
  return std::binary_search(indices_.begin(), indices_.end(), cell);
}

std::size_t CellSet::anchor() const {
  if (indices_.empty()) throw InputError("cell set: empty set has no anchor");
  return indices_.front();
}

CellSet set_union(const CellSet& a, const CellSet& b) {
  require_same_partition(a.partition(), b.partition(), "set_union");
  std::vector<std::size_t> out;
  std::set_union(a.indices().begin(), a.indices().end(), b.indices().begin(), b.indices().end(),
                 std::back_inserter(out));
  return CellSet(a.partition(), std::move(out));
}

CellSet set_difference(const CellSet& a, const CellSet& b) {
  require_same_partition(a.partition(), b.partition(), "set_difference");
  std::vector<std::size_t> out;
  std::set_difference(a.indices().begin(), a.indices().end(), b.indices().begin(),
                      b.indices().end(), std::back_inserter(out));
  return CellSet(a.partition(), std::move(out));
}

CellSet set_intersection(const CellSet& a, const CellSet& b) {
  require_same_partition(a.partition(), b.partition(), "set_intersection");
  std::vector<std::size_t> out;
  std::set_intersection(a.indices().begin(), a.indices().end(), b.indices().begin(),
                        b.indices().end(), std::back_inserter(out));
  return CellSet(a.partition(), std::move(out));
}

CellSet rect_to_cellset(const BoxPartition& partition, const Domain& rect) {
  if (!(rect.xmax >= rect.xmin) || !(rect.ymax >= rect.ymin)) {
    throw InputError("rect: expected xmin <= xmax and ymin <= ymax");
  }
  if (!partition.domain().intersects(rect)) {
    throw InputError("rect does not intersect the domain");
  }
  std::vector<std::size_t> idx;
  for (std::size_t c = 0; c < partition.size(); ++c) {
    if (rect.contains(partition.center(c))) idx.push_back(c);
  }
  if (idx.empty()) throw InputError("empty actuation set: rect covers no cell center");
  return CellSet(partition, std::move(idx));
}

CellSet cellset_from_json(const BoxPartition& partition, const nlohmann::json& spec) {
  if (!spec.is_object()) throw InputError("cell set: expected a JSON object");
  if (spec.contains("rect")) {
    const auto& r = spec.at("rect");
    if (!r.is_array() || r.size() != 4) {
      throw InputError("cell set: \"rect\" must be [xmin, ymin, xmax, ymax]");
    }
    for (const auto& v : r) {
      if (!v.is_number()) throw InputError("cell set: \"rect\" entries must be numbers");
    }
    const Domain rect{r[0].get<double>(), r[2].get<double>(), r[1].get<double>(),
                      r[3].get<double>()};
    return rect_to_cellset(partition, rect);
  }
  if (spec.contains("cells")) {
    const auto& c = spec.at("cells");
    if (!c.is_array()) throw InputError("cell set: \"cells\" must be an array");
    std::vector<std::size_t> idx;
    for (const auto& v : c) {
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw InputError("cell set: \"cells\" entries must be non-negative integers");
      }
      idx.push_back(v.get<std::size_t>());
    }
    return CellSet(partition, std::move(idx));
  }
  throw InputError("cell set: expected \"rect\" or \"cells\"");
}

nlohmann::json cellset_to_json(const CellSet& set) {
  return nlohmann::json{{"cells", set.indices()}};
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(BoxPartition partition)
    : partition_(std::move(partition)),
      values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(partition_.size()))) {}

ScalarField::ScalarField(BoxPartition partition, Eigen::VectorXd values)
    : partition_(std::move(partition)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != partition_.size()) {
    throw InputError("scalar field: expected " + std::to_string(partition_.size()) +
                     " values, got " + std::to_string(values_.size()));
  }
  if (!values_.allFinite()) throw InputError("scalar field: values must be finite");
}

ScalarField indicator(const CellSet& set) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.partition().size()));
  for (auto i : set.indices()) v[static_cast<Eigen::Index>(i)] = 1.0;
  return ScalarField(set.partition(), std::move(v));
}

double measure(const CellSet& set) {
  return static_cast<double>(set.size()) * set.partition().cell_measure();
}

double integrate(const ScalarField& field, const CellSet& over) {
  require_same_partition(field.partition(), over.partition(), "integrate");
  double sum = 0.0;
  for (auto i : over.indices()) sum += field[i];
  return sum * field.partition().cell_measure();
}

double inner_product(const ScalarField& a, const ScalarField& b) {
  require_same_partition(a.partition(), b.partition(), "inner_product");
  return a.values().dot(b.values()) * a.partition().cell_measure();
}

double field_l2_norm(const ScalarField& a) {
  return std::sqrt(a.values().squaredNorm() * a.partition().cell_measure());
}

void require_same_partition(const BoxPartition& a, const BoxPartition& b, const char* what) {
  if (!(a == b)) throw InputError(std::string("partition mismatch in ") + what);
}

void write_scalar_field_csv(std::ostream& out, const ScalarField& field) {
  const auto& part = field.partition();
  out << "cx,cy,value\n";
  for (std::size_t c = 0; c < part.size(); ++c) {
    const auto p = part.center(c);
    out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(field[c])
        << '\n';
  }
}

ScalarField read_scalar_field_csv(std::istream& in, const BoxPartition& partition) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  Eigen::VectorXd values(static_cast<Eigen::Index>(partition.size()));
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cols = split_csv_line(line);
    if (cols.size() == 1 && cols[0].empty()) continue;
    if (!have_header) {
      if (cols.size() != 3 || cols[0] != "cx" || cols[1] != "cy" || cols[2] != "value") {
        throw InputError("scalar field csv: expected header 'cx,cy,value'");
      }
      have_header = true;
      continue;
    }
    double cx = 0, cy = 0, val = 0;
    if (cols.size() != 3 || !parse_double(cols[0], cx) || !parse_double(cols[1], cy) ||
        !parse_double(cols[2], val) || !std::isfinite(val)) {
      throw InputError("scalar field csv: bad row at line " + std::to_string(line_no));
    }
    if (n >= partition.size()) throw InputError("scalar field csv: too many rows");
    const auto cell = partition.locate({cx, cy});
    if (!cell || *cell != n) {
      throw InputError("scalar field csv: row at line " + std::to_string(line_no) +
                       " is not the center of cell " + std::to_string(n));
    }
    values[static_cast<Eigen::Index>(n++)] = val;
  }
  if (n != partition.size()) {
    throw InputError("scalar field csv: expected " + std::to_string(partition.size()) +
                     " rows, got " + std::to_string(n));
  }
  return ScalarField(partition, std::move(values));
}

nlohmann::json partition_to_json(const BoxPartition& partition) {
  const auto& d = partition.domain();
  return nlohmann::json{{"domain", {d.xmin, d.ymin, d.xmax, d.ymax}},
                        {"px", partition.px()},
                        {"py", partition.py()}};
}

BoxPartition partition_from_json(const nlohmann::json& j) {
  try {
    const auto& d = j.at("domain");
    const Domain dom{d.at(0).get<double>(), d.at(2).get<double>(), d.at(1).get<double>(),
                     d.at(3).get<double>()};
    return BoxPartition(dom, j.at("px").get<std::size_t>(), j.at("py").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("partition: malformed JSON: ") + e.what());
  }
}

}  // namespace advplace
