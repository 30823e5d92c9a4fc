#include "trajproj/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "trajproj/config.hpp"
#include "trajproj/errors.hpp"
#include "trajproj/harness.hpp"
#include "trajproj/io.hpp"

namespace trajproj {

namespace {

std::optional<RunConfig> maybe_config(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_run_config(path);
}

// Settings for an existing trajectory file: defaults for its kind, replaced
// by the config's when one is given, with grid and scheme from the file.
SystemConfig system_for(const TrajectoryFile& f, const std::optional<RunConfig>& rc) {
  const SystemKind kind = f.trajectory.grid.system;
  SystemConfig s = SystemConfig::defaults(kind);
  if (rc) {
    if (rc->experiment.system.grid.system != kind)
      throw ConfigError("config describes system '" + to_string(rc->experiment.system.grid.system) +
                        "' but the file holds '" + to_string(kind) + "'");
    s = rc->experiment.system;
  }
  GridSpec g = f.trajectory.grid;
  if (kind == SystemKind::ks) g.length[0] = s.params.ks.domain_length;
  s.grid = g;
  if (s.scheme != f.scheme) {
    s.scheme = f.scheme;
    s.micro_steps = f.scheme == Scheme::bdf1 ? 1 : default_micro_steps(kind);
  }
  return s;
}

struct Loaded {
  TrajectoryFile file;
  SystemConfig system;
};

Loaded load(const std::string& path, const std::optional<RunConfig>& rc) {
  Loaded l;
  l.file = read_trajectory_file(path);
  l.system = system_for(l.file, rc);
  l.file.trajectory.grid = l.system.grid;
  return l;
}

ConstraintSpec spec_for(const Loaded& in, const std::string& initial_path, const std::optional<RunConfig>& rc) {
  const Trajectory& u = in.file.trajectory;
  std::vector<double> u0(u.frame(0).begin(), u.frame(0).end());
  if (!initial_path.empty()) {
    const Loaded init = load(initial_path, rc);
    if (init.file.trajectory.grid.frame_size() != u.grid.frame_size())
      throw ShapeError("the initial-state file has a different frame size than the input");
    const auto f0 = init.file.trajectory.frame(0);
    u0.assign(f0.begin(), f0.end());
  }
  ConstraintSpec spec;
  spec.initial_state = std::move(u0);
  spec.scheme = in.system.scheme;
  spec.micro_steps = in.system.micro_steps;
  spec.validate(u.grid);
  return spec;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void write_records_csv(const std::filesystem::path& path, const ExperimentReport& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "seed,resolution,method,mse,residual,wall_time_s,iterations,converged,error\n" << std::setprecision(9);
  for (const auto& rec : r.records) {
    std::string error = rec.error;
    for (char& c : error)
      if (c == ',' || c == '\n') c = ';';
    out << rec.seed << ',' << rec.row.resolution << ',' << rec.row.method << ',' << rec.row.mse << ','
        << rec.row.residual << ',' << rec.row.wall_time_s << ',' << rec.row.iterations << ','
        << (rec.row.converged ? "true" : "false") << ',' << error << '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Projection of approximate trajectories onto discretized dynamics constraints", "trajproj"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration; command-line flags take precedence")
      ->check(CLI::ExistingFile);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate ground-truth trajectories");
  std::string g_system, g_out;
  std::size_t g_count = 1, g_steps = 0, g_res = 0;
  std::uint64_t g_seed = 0;
  double g_dt = 0.0;
  auto* g_system_opt = gen->add_option("--system", g_system, "lorenz, ks or ns");
  auto* g_count_opt = gen->add_option("--count", g_count, "number of trajectories");
  auto* g_seed_opt = gen->add_option("--seed", g_seed, "first seed; seeds are seed, seed+1, ...");
  gen->add_option("--out", g_out, "output directory")->required();
  auto* g_steps_opt = gen->add_option("--steps", g_steps, "stored frames per trajectory, including the initial one");
  auto* g_res_opt = gen->add_option("--resolution", g_res, "spatial points per axis");
  auto* g_dt_opt = gen->add_option("--dt", g_dt, "frame spacing");

  // degrade
  auto* deg = app.add_subcommand("degrade", "Corrupt a trajectory to stand in for a model prediction");
  std::string d_in, d_out, d_kind;
  DegradeSpec d_spec;
  deg->add_option("--in", d_in, "input trajectory file")->required()->check(CLI::ExistingFile);
  deg->add_option("--out", d_out, "output trajectory file")->required();
  auto* d_kind_opt = deg->add_option("--kind", d_kind, "spectral-truncate, gaussian-noise, coarse-time or blend");
  auto* d_keep_opt = deg->add_option("--keep-fraction", d_spec.keep_fraction);
  auto* d_sigma_opt = deg->add_option("--sigma", d_spec.noise_sigma);
  auto* d_factor_opt = deg->add_option("--coarse-factor", d_spec.coarse_factor);
  auto* d_weight_opt = deg->add_option("--blend-weight", d_spec.blend_weight);
  auto* d_seed_opt = deg->add_option("--seed", d_spec.seed);

  // project
  auto* proj = app.add_subcommand("project", "Project a trajectory onto the constraint set");
  std::string p_in, p_out, p_method, p_initial, p_lambda, p_solver;
  double p_tol = 0.0;
  std::size_t p_kmax = 0, p_iters = 0, p_memory = 0;
  bool p_unsquared = false;
  proj->add_option("--in", p_in, "trajectory to project")->required()->check(CLI::ExistingFile);
  proj->add_option("--out", p_out, "output trajectory file")->required();
  auto* p_method_opt = proj->add_option("--method", p_method, "constrained, relaxed or lbfgs");
  proj->add_option("--initial", p_initial, "file whose first frame is the initial condition (default: the input's)")
      ->check(CLI::ExistingFile);
  auto* p_lambda_opt = proj->add_option("--lambda", p_lambda, "penalty weight or 'norm-of-uhat'");
  auto* p_tol_opt = proj->add_option("--krylov-tol", p_tol);
  auto* p_kmax_opt = proj->add_option("--krylov-max-iters", p_kmax);
  auto* p_solver_opt = proj->add_option("--solver", p_solver, "cg, bicgstab or gmres");
  auto* p_iters_opt = proj->add_option("--max-iters", p_iters, "LBFGS iterations");
  auto* p_memory_opt = proj->add_option("--memory", p_memory, "LBFGS memory");
  proj->add_flag("--unsquared", p_unsquared, "LBFGS objective with unsquared norms");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "MSE against ground truth and constraint residual");
  std::string e_pred, e_truth;
  ev->add_option("--pred", e_pred, "predicted trajectory")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", e_truth, "ground-truth trajectory")->required()->check(CLI::ExistingFile);

  // landscape
  auto* land = app.add_subcommand("landscape", "Constraint violation along an LBFGS path with Taylor models");
  std::string l_in, l_initial, l_out, l_mode = "gauss-newton", l_lambda = "1000";
  std::size_t l_iters = 200;
  land->add_option("--in", l_in, "starting trajectory")->required()->check(CLI::ExistingFile);
  land->add_option("--initial", l_initial, "file whose first frame is the initial condition")
      ->check(CLI::ExistingFile);
  land->add_option("--out", l_out, "CSV output (default: stdout)");
  land->add_option("--mode", l_mode, "gauss-newton or secant-fd");
  land->add_option("--lambda", l_lambda, "penalty weight or 'norm-of-uhat'");
  land->add_option("--max-iters", l_iters, "LBFGS iterations");

  // report
  auto* rep = app.add_subcommand("report", "Run the full degrade/project/evaluate experiment from a config");
  std::string r_csv, r_table, r_records;
  std::size_t r_threads = 1;
  bool r_quiet = false;
  auto* r_csv_opt = rep->add_option("--csv", r_csv, "summary CSV path");
  auto* r_table_opt = rep->add_option("--table", r_table, "plain-text table path");
  auto* r_records_opt = rep->add_option("--records", r_records, "per-trajectory CSV path");
  auto* r_threads_opt = rep->add_option("--threads", r_threads, "worker threads");
  rep->add_flag("--quiet", r_quiet, "no progress output");

  // export-csv
  auto* exp = app.add_subcommand("export-csv", "Convert a trajectory file to CSV");
  std::string x_in, x_out;
  exp->add_option("--in", x_in)->required()->check(CLI::ExistingFile);
  exp->add_option("--out", x_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    const std::optional<RunConfig> rc = maybe_config(config_path);

    if (*gen) {
      SystemConfig s;
      std::vector<std::uint64_t> seeds;
      if (rc) {
        s = rc->experiment.system;
        seeds = rc->experiment.seeds;
        if (g_system_opt->count() && parse_system_kind(g_system) != s.grid.system)
          throw ConfigError("--system disagrees with the config file");
      } else {
        if (!g_system_opt->count()) throw ConfigError("generate: --system is required without --config");
        s = SystemConfig::defaults(parse_system_kind(g_system));
      }
      if (g_dt_opt->count()) s.grid.dt = g_dt;
      if (g_steps_opt->count()) s.grid.num_steps = g_steps;
      if (g_res_opt->count()) {
        if (s.grid.system == SystemKind::lorenz) throw ConfigError("--resolution does not apply to lorenz");
        s.grid = s.grid.with_resolution(std::vector<std::size_t>(s.grid.resolution.size(), g_res));
      }
      if (g_count_opt->count() || g_seed_opt->count() || seeds.empty()) {
        const std::uint64_t first = g_seed_opt->count() || seeds.empty() ? g_seed : seeds.front();
        seeds.clear();
        for (std::size_t i = 0; i < g_count; ++i) seeds.push_back(first + i);
      }
      if (seeds.empty()) throw ConfigError("generate: --count must be >= 1");
      const DatasetManifest m = generate_dataset(s, seeds, g_out);
      out << "wrote " << m.files.size() << " trajectories to " << g_out << '\n';
      return kExitOk;
    }

    if (*deg) {
      const Loaded in = load(d_in, rc);
      DegradeSpec spec = rc ? rc->experiment.degrade : DegradeSpec{};
      if (d_kind_opt->count()) spec.kind = parse_degrade_kind(d_kind);
      else if (!rc) throw ConfigError("degrade: --kind is required without --config");
      if (d_keep_opt->count()) spec.keep_fraction = d_spec.keep_fraction;
      if (d_sigma_opt->count()) spec.noise_sigma = d_spec.noise_sigma;
      if (d_factor_opt->count()) spec.coarse_factor = d_spec.coarse_factor;
      if (d_weight_opt->count()) spec.blend_weight = d_spec.blend_weight;
      if (d_seed_opt->count()) spec.seed = d_spec.seed;
      const Trajectory u = degrade(in.file.trajectory, spec, in.system);
      write_trajectory(d_out, u, in.file.scheme);
      out << "wrote " << d_out << '\n';
      return kExitOk;
    }

    if (*proj) {
      const Loaded in = load(p_in, rc);
      ProjectionConfig cfg;
      bool from_config = false;
      if (rc && !rc->experiment.methods.empty()) {
        const auto& ms = rc->experiment.methods;
        const MethodEntry* pick = &ms.front();
        if (p_method_opt->count()) {
          pick = nullptr;
          for (const auto& m : ms)
            if (m.name == p_method || to_string(m.config.method) == p_method) {
              pick = &m;
              break;
            }
        }
        if (pick) {
          cfg = pick->config;
          from_config = true;
        }
      }
      if (p_method_opt->count()) {
        const ProjectionMethod m = parse_projection_method(p_method);
        if (!from_config || cfg.method != m) {
          cfg = ProjectionConfig{};
          cfg.method = m;
        }
      } else if (!from_config) {
        throw ConfigError("project: --method is required without a config that lists methods");
      }
      if (p_lambda_opt->count()) cfg.lambda = LambdaSpec::parse(p_lambda);
      if (p_tol_opt->count()) cfg.krylov_tol = p_tol;
      if (p_kmax_opt->count()) cfg.krylov_max_iters = p_kmax;
      if (p_solver_opt->count()) cfg.solver = parse_krylov_method(p_solver);
      if (p_iters_opt->count()) cfg.lbfgs.max_iters = p_iters;
      if (p_memory_opt->count()) cfg.lbfgs.memory = p_memory;
      if (p_unsquared) cfg.squared_norms = false;
      cfg.validate();

      const Trajectory& uhat = in.file.trajectory;
      Constraint h(uhat.grid, spec_for(in, p_initial, rc), in.system.params);
      const double before = norm2(h.residual(uhat).values);
      const ProjectionResult p = project(uhat, h, cfg);
      if (!p.u.all_finite()) throw NumericalError("project: the projected trajectory is not finite");
      const double after = norm2(h.residual(p.u).values);
      write_trajectory(p_out, p.u, in.file.scheme);
      out << "method=" << to_string(p.method) << " residual_before=" << fmt(before) << " residual_after=" << fmt(after)
          << " iterations=" << p.iterations << " converged=" << (p.converged ? "true" : "false") << '\n';
      if (!p.note.empty()) err << "note: " << p.note << '\n';
      return kExitOk;
    }

    if (*ev) {
      const Loaded pred = load(e_pred, rc);
      const Loaded truth = load(e_truth, rc);
      const ConstraintSpec spec = spec_for(truth, "", rc);
      const MetricsRow row = evaluate(pred.file.trajectory, truth.file.trajectory, spec, truth.system.params);
      out << "mse=" << fmt(row.mse) << " residual=" << fmt(row.residual) << '\n';
      return kExitOk;
    }

    if (*land) {
      const Loaded in = load(l_in, rc);
      ProjectionConfig cfg;
      cfg.method = ProjectionMethod::lbfgs;
      cfg.lambda = LambdaSpec::parse(l_lambda);
      cfg.lbfgs.max_iters = l_iters;
      cfg.lbfgs.record_path = true;
      const SecondOrderMode mode = parse_second_order_mode(l_mode);
      Constraint h(in.file.trajectory.grid, spec_for(in, l_initial, rc), in.system.params);
      const ProjectionResult p = project(in.file.trajectory, h, cfg);
      const LandscapeCurve curve = taylor_landscape(*p.trace, h, mode);
      if (l_out.empty())
        write_landscape_csv(out, curve);
      else
        write_landscape_csv(l_out, curve);
      return kExitOk;
    }

    if (*rep) {
      if (!rc) throw ConfigError("report: --config is required");
      RunConfig run = *rc;
      if (r_threads_opt->count()) run.experiment.threads = r_threads;
      if (r_csv_opt->count()) run.output.csv = r_csv;
      if (r_table_opt->count()) run.output.table = r_table;
      if (r_records_opt->count()) run.output.records = r_records;
      ProgressFn progress;
      if (!r_quiet) progress = [&err](const std::string& msg) { err << msg << '\n'; };
      const ExperimentReport report = run_experiment(run.experiment, progress);
      const std::string table = format_report_table(report);
      out << table;
      if (run.output.csv) write_report_csv(*run.output.csv, report);
      if (run.output.table) write_text(*run.output.table, table + "\nconfiguration:\n" + report.config_json + "\n");
      if (run.output.records) write_records_csv(*run.output.records, report);
      return kExitOk;
    }

    if (*exp) {
      write_trajectory_csv(x_out, read_trajectory(x_in));
      out << "wrote " << x_out << '\n';
      return kExitOk;
    }
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace trajproj
