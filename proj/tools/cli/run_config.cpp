#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "advplace/error.hpp"

namespace advplace::cli {

namespace {

const nlohmann::json& require_key(const nlohmann::json& obj, const std::string& key,
                                  const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw InputError(where + ": missing \"" + key + "\"");
  }
  return obj.at(key);
}

std::string key_path(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

Domain domain_from(const nlohmann::json& d, const std::string& where) {
  if (!d.is_array() || d.size() != 4) {
    throw InputError(where + ": expected [xmin, ymin, xmax, ymax]");
  }
  for (const auto& v : d) {
    if (!v.is_number()) throw InputError(where + ": entries must be numbers");
  }
  Domain dom{d[0].get<double>(), d[2].get<double>(), d[1].get<double>(), d[3].get<double>()};
  dom.validate();
  return dom;
}

std::pair<std::size_t, std::size_t> pair_from(const nlohmann::json& p, const std::string& where) {
  if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() ||
      !p[1].is_number_unsigned()) {
    throw InputError(where + ": expected [nx, ny] with non-negative integers");
  }
  return {p[0].get<std::size_t>(), p[1].get<std::size_t>()};
}

}  // namespace

double get_number(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  const auto& v = require_key(obj, key, where);
  if (!v.is_number()) throw InputError(key_path(where, key) + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw InputError(key_path(where, key) + ": must be finite");
  return x;
}

double get_number_or(const nlohmann::json& obj, const std::string& key, double fallback,
                     const std::string& where) {
  return obj.is_object() && obj.contains(key) ? get_number(obj, key, where) : fallback;
}

std::size_t get_count(const nlohmann::json& obj, const std::string& key,
                      const std::string& where) {
  const auto& v = require_key(obj, key, where);
  if (!v.is_number_unsigned()) {
    throw InputError(key_path(where, key) + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::size_t get_count_or(const nlohmann::json& obj, const std::string& key, std::size_t fallback,
                         const std::string& where) {
  return obj.is_object() && obj.contains(key) ? get_count(obj, key, where) : fallback;
}

std::string get_string(const nlohmann::json& obj, const std::string& key,
                       const std::string& where) {
  const auto& v = require_key(obj, key, where);
  if (!v.is_string()) throw InputError(key_path(where, key) + ": expected a string");
  return v.get<std::string>();
}

std::string get_string_or(const nlohmann::json& obj, const std::string& key,
                          const std::string& fallback, const std::string& where) {
  return obj.is_object() && obj.contains(key) ? get_string(obj, key, where) : fallback;
}

bool get_bool_or(const nlohmann::json& obj, const std::string& key, bool fallback,
                 const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw InputError(key_path(where, key) + ": expected true or false");
  return v.get<bool>();
}

RunConfig::RunConfig(nlohmann::json doc, std::filesystem::path base_dir)
    : doc_(std::move(doc)), base_dir_(std::move(base_dir)) {
  if (!doc_.is_object()) throw InputError("config: top level must be a JSON object");
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open config file '" + file.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("config '" + file.string() + "': " + e.what());
  }
  return RunConfig(std::move(doc), file.parent_path());
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir_ / p;
}

std::uint64_t RunConfig::seed() const {
  if (seed_override_) return *seed_override_;
  if (!doc_.contains("seed")) return 0;
  const auto& v = doc_.at("seed");
  if (!v.is_number_unsigned()) throw InputError("seed: expected a non-negative integer");
  return v.get<std::uint64_t>();
}

VectorField RunConfig::field() const {
  const auto& spec = require_key(doc_, "field", "config");
  if (!spec.is_object()) throw InputError("field: expected an object");
  const auto policy = parse_boundary_policy(get_string_or(spec, "boundary", "clamp", "field"));
  const bool has_analytic = spec.contains("analytic");
  const bool has_snapshots = spec.contains("snapshots");
  if (has_analytic == has_snapshots) {
    throw InputError("field: give exactly one of \"analytic\" or \"snapshots\"");
  }
  if (has_analytic) {
    std::size_t nx = 33, ny = 33;
    if (spec.contains("nodes")) std::tie(nx, ny) = pair_from(spec.at("nodes"), "field.nodes");
    const Domain dom = domain_from(require_key(doc_, "domain", "config"), "domain");
    return analytic_field(get_string(spec, "analytic", "field"), dom, nx, ny, policy);
  }
  const auto& files = spec.at("snapshots");
  if (!files.is_array() || files.empty()) {
    throw InputError("field.snapshots: expected a non-empty list of file paths");
  }
  std::vector<std::filesystem::path> paths;
  for (const auto& f : files) {
    if (!f.is_string()) throw InputError("field.snapshots: entries must be strings");
    paths.push_back(resolve(f.get<std::string>()));
  }
  const auto snaps = load_snapshots(paths, policy);
  return mean_field(snaps);
}

BoxPartition RunConfig::partition() const {
  const auto [px, py] = pair_from(require_key(doc_, "partition", "config"), "partition");
  if (doc_.contains("domain")) {
    return build_partition(domain_from(doc_.at("domain"), "domain"), px, py);
  }
  return build_partition(field().domain(), px, py);
}

double RunConfig::dt() const {
  const double dt = get_number(doc_, "dt", "config");
  if (!(dt > 0.0)) throw InputError("dt: must be positive");
  return dt;
}

std::size_t RunConfig::steps() const {
  const bool has_k = doc_.contains("K");
  const bool has_tau = doc_.contains("tau");
  if (has_k == has_tau) throw InputError("config: give exactly one of \"K\" or \"tau\"");
  if (has_k) return get_count(doc_, "K", "");
  const double tau = get_number(doc_, "tau", "");
  if (!(tau >= 0.0)) throw InputError("tau: must be non-negative");
  return static_cast<std::size_t>(std::llround(tau / dt()));
}

BuildOptions RunConfig::build_options() const {
  BuildOptions opt;
  opt.samples_per_cell = get_count_or(doc_, "samples_per_cell", opt.samples_per_cell, "");
  opt.seed = seed();
  opt.sampling = parse_sampling(get_string_or(doc_, "sampling", "monte-carlo", ""));
  if (doc_.contains("subgrid")) {
    const auto [nx, ny] = pair_from(doc_.at("subgrid"), "subgrid");
    opt.subgrid = SubGrid{nx, ny};
  }
  if (doc_.contains("integrator")) {
    const auto& integ = doc_.at("integrator");
    FlowConfig cfg;
    const auto method = get_string_or(integ, "method", "rk4", "integrator");
    if (method == "rk4") {
      cfg.method = Integrator::rk4;
    } else if (method == "euler") {
      cfg.method = Integrator::euler;
    } else {
      throw InputError("integrator.method: expected rk4 or euler");
    }
    cfg.dt_integrate = get_number_or(integ, "dt", dt() / 10.0, "integrator");
    cfg.validate();
    opt.flow = cfg;
  }
  opt.threads = static_cast<unsigned>(get_count_or(doc_, "threads", 1, ""));
  return opt;
}

TransferOperator RunConfig::transfer_operator() const {
  if (doc_.contains("operator")) {
    const auto path = resolve(get_string(doc_, "operator", ""));
    std::ifstream in(path);
    if (!in) throw InputError("cannot open operator file '" + path.string() + "'");
    auto op = load_operator(in);
    if (doc_.contains("partition") && !(op.partition() == partition())) {
      throw InputError("operator file partition differs from the configured partition");
    }
    return op;
  }
  return build_operator(field(), partition(), dt(), build_options());
}

CellSet RunConfig::set(const BoxPartition& partition, const std::string& name) const {
  const auto& all = require_key(doc_, "sets", "config");
  if (!all.is_object() || !all.contains(name)) {
    throw InputError("sets: unknown set name '" + name + "'");
  }
  return cellset_from_json(partition, all.at(name));
}

std::map<std::string, CellSet> RunConfig::sets(const BoxPartition& partition) const {
  std::map<std::string, CellSet> out;
  if (!doc_.contains("sets")) return out;
  const auto& all = doc_.at("sets");
  if (!all.is_object()) throw InputError("sets: expected an object of named cell sets");
  for (auto it = all.begin(); it != all.end(); ++it) {
    out.emplace(it.key(), cellset_from_json(partition, it.value()));
  }
  return out;
}

nlohmann::json RunConfig::section(const std::string& name) const {
  if (!doc_.contains(name)) return nlohmann::json::object();
  const auto& s = doc_.at(name);
  if (!s.is_object()) throw InputError(name + ": expected an object");
  return s;
}

ScalarField RunConfig::scalar_field(const BoxPartition& partition, const nlohmann::json& spec,
                                    const std::string& what) const {
  if (!spec.is_object()) throw InputError(what + ": expected a field spec object");
  if (spec.contains("zero")) return ScalarField(partition);
  if (spec.contains("csv")) {
    const auto path = resolve(get_string(spec, "csv", what));
    std::ifstream in(path);
    if (!in) throw InputError("cannot open field file '" + path.string() + "'");
    return read_scalar_field_csv(in, partition);
  }
  const double scale = get_number_or(spec, "scale", 1.0, what);
  if (spec.contains("indicator")) {
    const auto s = set(partition, get_string(spec, "indicator", what));
    return ScalarField(partition, scale * indicator(s).values());
  }
  if (spec.contains("complement")) {
    const auto s = set(partition, get_string(spec, "complement", what));
    return ScalarField(partition,
                       scale * indicator(set_difference(CellSet::all(partition), s)).values());
  }
  throw InputError(what + ": expected one of \"zero\", \"csv\", \"indicator\", \"complement\"");
}

}  // namespace advplace::cli
