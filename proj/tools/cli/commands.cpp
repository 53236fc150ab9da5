#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "advplace/control.hpp"
#include "advplace/error.hpp"
#include "advplace/gramian.hpp"
#include "advplace/placement.hpp"

namespace advplace::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "'");
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw InputError("cannot open output file '" + (dir / name).string() + "'");
  return out;
}

void write_json(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
  auto out = open_output(dir, name);
  out << j.dump(2) << '\n';
}

void write_field(const fs::path& dir, const std::string& name, const ScalarField& f) {
  auto out = open_output(dir, name);
  write_scalar_field_csv(out, f);
}

InfiniteOptions infinite_options(const nlohmann::json& s, const std::string& where) {
  InfiniteOptions opt;
  opt.tol = get_number_or(s, "tol", opt.tol, where);
  opt.max_steps = get_count_or(s, "max_steps", opt.max_steps, where);
  const auto solver = get_string_or(s, "solver", "summation", where);
  if (solver == "summation") {
    opt.solver = InfiniteSolver::summation;
  } else if (solver == "direct") {
    opt.solver = InfiniteSolver::direct;
  } else {
    throw InputError(where + ".solver: expected summation or direct");
  }
  return opt;
}

nlohmann::json rect_json(const Domain& d) { return {d.xmin, d.ymin, d.xmax, d.ymax}; }

}  // namespace

void cmd_build(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto op = build_operator(cfg.field(), cfg.partition(), cfg.dt(), cfg.build_options());
  {
    auto f = open_output(out, "operator.txt");
    save_operator(f, op);
  }
  const auto& leak = op.leak();
  const nlohmann::json summary{
      {"N", op.size()},
      {"dt", op.dt()},
      {"nnz", op.matrix().nonZeros()},
      {"seed", op.provenance().seed},
      {"samples_per_cell", op.provenance().samples_per_cell},
      {"sampling", to_string(op.provenance().sampling)},
      {"leak", {{"min", leak.minCoeff()}, {"max", leak.maxCoeff()}, {"mean", leak.mean()}}},
      {"row_sum_max_deviation", op.max_row_deviation()},
  };
  write_json(out, "build_summary.json", summary);
  log << "build: N=" << op.size() << " nnz=" << op.matrix().nonZeros() << " -> "
      << (out / "operator.txt").string() << '\n';
}

void cmd_gramian(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto s = cfg.section("gramian");
  const auto op = cfg.transfer_operator();
  const auto kind = parse_gramian_kind(get_string_or(s, "kind", "controllability", "gramian"));
  const auto source = cfg.set(op.partition(), get_string(s, "set", "gramian"));
  const auto horizon = get_string_or(s, "horizon", "finite", "gramian");

  std::optional<GramianField> g;
  if (horizon == "finite") {
    const auto q = get_string_or(s, "quadrature", "left", "gramian");
    if (q != "left" && q != "trapezoid") {
      throw InputError("gramian.quadrature: expected left or trapezoid");
    }
    const auto quad = q == "left" ? Quadrature::left : Quadrature::trapezoid;
    const auto K = cfg.steps();
    g = kind == GramianKind::controllability ? controllability_gramian(op, source, K, quad)
                                             : observability_gramian(op, source, K, quad);
  } else if (horizon == "infinite") {
    const auto opt = infinite_options(s, "gramian");
    g = kind == GramianKind::controllability ? infinite_controllability_gramian(op, source, opt)
                                             : infinite_observability_gramian(op, source, opt);
  } else {
    throw InputError("gramian.horizon: expected finite or infinite");
  }
  const double eps = get_number_or(s, "eps", default_support_threshold(*g), "gramian");
  write_field(out, "gramian.csv", g->field);
  write_json(out, "gramian.json", gramian_sidecar_json(*g, eps));
  log << "gramian: " << to_string(kind) << " support=" << support_measure(*g, eps)
      << " l2=" << l2_norm(*g) << '\n';
}

void cmd_place(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto s = cfg.section("place");
  const auto op = cfg.transfer_operator();
  const auto& part = op.partition();
  const auto mode = parse_placement_mode(get_string_or(s, "mode", "actuator", "place"));
  const auto dir = parse_norm_direction(get_string_or(s, "norm_direction", "max", "place"));
  const double tie = get_number_or(s, "tie_tol", 0.02, "place");
  std::optional<double> eps;
  if (s.contains("eps")) eps = get_number(s, "eps", "place");

  CandidateSpec spec;
  if (s.contains("patch")) {
    const auto& p = s.at("patch");
    spec.patch = PatchSpec{get_count(p, "width", "place.patch"),
                           get_count(p, "height", "place.patch"),
                           get_count_or(p, "stride", 1, "place.patch")};
  }
  std::vector<std::string> names;
  if (s.contains("candidates")) {
    const auto& c = s.at("candidates");
    if (!c.is_array()) throw InputError("place.candidates: expected a list of set names");
    for (const auto& n : c) {
      if (!n.is_string()) throw InputError("place.candidates: entries must be set names");
      names.push_back(n.get<std::string>());
      spec.explicit_sets.push_back(cfg.set(part, names.back()));
    }
  }
  auto candidates = enumerate_candidates(part, spec);
  if (candidates.empty()) throw InputError("place: no candidates (give \"patch\" or \"candidates\")");
  // Explicit sets sit at the end of the list in the order given.
  const std::size_t first_named = candidates.size() - names.size();
  for (std::size_t k = 0; k < names.size(); ++k) candidates[first_named + k].label = names[k];

  const auto threads = static_cast<unsigned>(get_count_or(cfg.doc(), "threads", 1, ""));
  const auto K = cfg.steps();
  auto ranked = rank_placements(score_candidates(op, candidates, K, mode, eps, threads), tie, dir);

  nlohmann::json report = nlohmann::json::array();
  const bool export_fields = get_bool_or(s, "export_fields", false, "place");
  for (const auto& r : ranked) {
    nlohmann::json entry{{"rank", r.rank},
                         {"name", r.candidate.label},
                         {"support", r.support},
                         {"norm", r.norm}};
    if (r.candidate.rect) {
      entry["rect"] = rect_json(*r.candidate.rect);
    } else {
      entry["cells"] = r.candidate.cells.indices();
    }
    report.push_back(std::move(entry));
    if (export_fields) {
      const auto g = mode == PlacementMode::actuator
                         ? controllability_gramian(op, r.candidate.cells, K)
                         : observability_gramian(op, r.candidate.cells, K);
      write_field(out / "fields", r.candidate.label + ".csv", g.field);
    }
  }
  write_json(out, "placement.json", report);
  log << "place: " << ranked.size() << " candidates, best " << ranked.front().candidate.label
      << '\n';
}

void cmd_control(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto s = cfg.section("control");
  const auto op = cfg.transfer_operator();
  const auto& part = op.partition();
  const auto B = cfg.set(part, get_string(s, "B", "control"));
  const auto K = cfg.steps();
  const ScalarField rho0 = s.contains("rho0") ? cfg.scalar_field(part, s.at("rho0"), "control.rho0")
                                              : ScalarField(part);
  if (!s.contains("target")) throw InputError("control: missing \"target\"");
  const auto& tspec = s.at("target");
  const ScalarField target = tspec.is_object() && tspec.contains("free")
                                 ? evolve(op, rho0, K, Evolution::pf)
                                 : cfg.scalar_field(part, tspec, "control.target");
  ControlOptions opt;
  opt.method = parse_control_method(get_string_or(s, "method", "exact", "control"));
  opt.eps = get_number_or(s, "eps", opt.eps, "control");

  const auto result = min_energy_control(op, rho0, target, B, K, opt);
  write_json(out, "schedule.json", schedule_header_json(result.schedule));
  {
    auto f = open_output(out, "schedule.csv");
    write_schedule_csv(f, result.schedule);
  }
  write_field(out, "terminal.csv", result.terminal);
  write_json(out, "steering.json", steering_json(result));
  log << "control: " << to_string(result.method) << " energy=" << result.energy
      << " target_error=" << result.target_error << '\n';
}

void cmd_residence(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto s = cfg.section("residence");
  const auto op = cfg.transfer_operator();
  const auto& part = op.partition();
  const auto B = cfg.set(part, get_string(s, "B", "residence"));
  const auto A = cfg.set(part, get_string(s, "A", "residence"));
  const auto g = infinite_controllability_gramian(op, B, infinite_options(s, "residence"));
  const double T = residence_time(g, A);
  write_field(out, "residence_gramian.csv", g.field);
  write_json(out, "residence.json",
             {{"B", cellset_to_json(B)},
              {"A", cellset_to_json(A)},
              {"residence_time", T},
              {"residual", g.residual},
              {"steps_used", g.steps_used}});
  log << "residence: T=" << T << '\n';
}

void cmd_stability(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto s = cfg.section("stability");
  const auto op = cfg.transfer_operator();
  const auto& part = op.partition();
  const auto nbhd_name = get_string(s, "neighborhood", "stability");
  const auto nbhd = cfg.set(part, nbhd_name);
  const nlohmann::json default_v0{{"complement", nbhd_name}};
  const auto v0 = cfg.scalar_field(part, s.contains("v0") ? s.at("v0") : default_v0,
                                   "stability.v0");
  const double tol = get_number_or(s, "tol", 1e-8, "stability");
  const auto max_steps = get_count_or(s, "max_steps", 1'000'000, "stability");
  const auto report = stability_certificate(op, v0, nbhd, tol, max_steps);
  write_field(out, "stability.csv", report.solution);
  write_json(out, "stability.json",
             {{"classification", to_string(report.classification)},
              {"residual", report.residual},
              {"min_value", report.min_value},
              {"steps", report.steps},
              {"tol", tol},
              {"reason", report.reason}});
  log << "stability: " << to_string(report.classification) << " (" << report.reason << ")\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Transfer-operator gramians for actuator and sensor placement"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";

  using Handler = void (*)(const RunConfig&, const fs::path&, std::ostream&);
  const std::pair<const char*, Handler> commands[] = {
      {"build", cmd_build},         {"gramian", cmd_gramian},
      {"place", cmd_place},         {"control", cmd_control},
      {"residence", cmd_residence}, {"stability", cmd_stability},
  };
  const char* help[] = {
      "Build the transfer operator and write it with a summary",
      "Finite or infinite-horizon controllability/observability gramian",
      "Score and rank candidate actuator or sensor regions",
      "Minimum-energy control steering a density to a target",
      "Residence time in A of mass started on B",
      "Steady transport stability certificate",
  };
  Handler chosen = nullptr;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->callback([&chosen, h = commands[i].second] { chosen = h; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg = RunConfig::load(config_path);
    if (seed) cfg.override_seed(*seed);
    chosen(cfg, out_dir, std::cout);
    return 0;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace advplace::cli
