#include "trajproj/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "trajproj/errors.hpp"

namespace trajproj {

namespace {

using json = nlohmann::json;

// Object view that records which keys were read so leftovers can be
// reported as unknown.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const char* key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(child(key) + ": expected a number");
    return v.get<double>();
  }

  std::size_t count(const char* key, std::size_t fallback) {
    if (!has(key)) return fallback;
    return as_count(raw(key), child(key));
  }

  std::uint64_t u64(const char* key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(child(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  int integer(const char* key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(child(key) + ": expected an integer");
    return v.get<int>();
  }

  bool boolean(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(child(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(child(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::string required_text(const char* key) {
    if (!has(key)) throw ConfigError(child(key) + ": required key is missing");
    return text(key, "");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(child(it.key().c_str()) + ": unknown key");
  }

  static std::size_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
    return v.get<std::size_t>();
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::size_t> count_list(const json& v, const std::string& path) {
  std::vector<std::size_t> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(Node::as_count(v[i], path + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(Node::as_count(v, path));
  }
  return out;
}

template <class F>
auto wrap(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

LbfgsConfig parse_lbfgs(const json& j, const std::string& path, LbfgsConfig c) {
  Node n(j, path);
  c.memory = n.count("memory", c.memory);
  c.max_iters = n.count("max_iters", c.max_iters);
  c.gradient_tolerance = n.number("gradient_tolerance", c.gradient_tolerance);
  c.wolfe_c1 = n.number("wolfe_c1", c.wolfe_c1);
  c.wolfe_c2 = n.number("wolfe_c2", c.wolfe_c2);
  c.max_line_search_evals = n.count("max_line_search_evals", c.max_line_search_evals);
  c.record_path = n.boolean("record_path", c.record_path);
  n.finish();
  wrap(path, [&] { c.validate(); });
  return c;
}

MethodEntry parse_method(const json& j, const std::string& path) {
  Node n(j, path);
  MethodEntry m;
  const std::string method = n.required_text("method");
  m.config.method = wrap(n.child("method"), [&] { return parse_projection_method(method); });
  m.name = n.text("name", method);
  if (n.has("lambda")) {
    const json& l = n.raw("lambda");
    if (l.is_number()) {
      const double v = l.get<double>();
      if (!(v >= 0.0)) throw ConfigError(n.child("lambda") + ": lambda must be >= 0, got " + l.dump());
      m.config.lambda = LambdaSpec::literal(v);
    } else if (l.is_string()) {
      m.config.lambda = wrap(n.child("lambda"), [&] { return LambdaSpec::parse(l.get<std::string>()); });
    } else {
      throw ConfigError(n.child("lambda") + ": expected a number or \"norm-of-uhat\"");
    }
  }
  m.config.krylov_tol = n.number("krylov_tol", m.config.krylov_tol);
  m.config.krylov_max_iters = n.count("krylov_max_iters", m.config.krylov_max_iters);
  if (n.has("solver"))
    m.config.solver = wrap(n.child("solver"), [&] { return parse_krylov_method(n.text("solver", "")); });
  m.config.squared_norms = n.boolean("squared_norms", m.config.squared_norms);
  if (n.has("lbfgs")) m.config.lbfgs = parse_lbfgs(n.raw("lbfgs"), n.child("lbfgs"), m.config.lbfgs);
  n.finish();
  wrap(path, [&] { m.config.validate(); });
  return m;
}

DegradeSpec parse_degrade(const json& j, const std::string& path) {
  Node n(j, path);
  DegradeSpec d;
  d.kind = wrap(n.child("kind"), [&] { return parse_degrade_kind(n.required_text("kind")); });
  d.keep_fraction = n.number("keep_fraction", d.keep_fraction);
  d.noise_sigma = n.number("noise_sigma", d.noise_sigma);
  d.coarse_factor = n.count("coarse_factor", d.coarse_factor);
  d.blend_weight = n.number("blend_weight", d.blend_weight);
  d.seed = n.u64("seed", d.seed);
  n.finish();
  wrap(path, [&] { d.validate(); });
  return d;
}

void parse_params(const json& j, const std::string& path, SystemKind kind, SystemConfig& s) {
  Node n(j, path);
  switch (kind) {
    case SystemKind::lorenz:
      s.params.lorenz.sigma = n.number("sigma", s.params.lorenz.sigma);
      s.params.lorenz.rho = n.number("rho", s.params.lorenz.rho);
      s.params.lorenz.beta = n.number("beta", s.params.lorenz.beta);
      break;
    case SystemKind::ks:
      s.params.ks.domain_length = n.number("domain_length", s.params.ks.domain_length);
      break;
    case SystemKind::ns:
      s.params.ns.reynolds = n.number("reynolds", s.params.ns.reynolds);
      s.params.ns.forcing_amplitude = n.number("forcing_amplitude", s.params.ns.forcing_amplitude);
      s.params.ns.forcing_wavenumber = n.integer("forcing_wavenumber", s.params.ns.forcing_wavenumber);
      s.params.ns.drag = n.number("drag", s.params.ns.drag);
      break;
  }
  n.finish();
}

void parse_generator(const json& j, const std::string& path, SystemConfig& s, std::vector<std::uint64_t>& seeds) {
  Node n(j, path);
  if (n.has("seeds")) {
    const json& v = n.raw("seeds");
    const std::string sp = n.child("seeds");
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_unsigned()) throw ConfigError(sp + "[" + std::to_string(i) + "]: expected a non-negative integer");
        seeds.push_back(v[i].get<std::uint64_t>());
      }
    } else {
      Node r(v, sp);
      const std::uint64_t first = r.u64("first", 0);
      const std::size_t count = r.count("count", 0);
      r.finish();
      for (std::size_t i = 0; i < count; ++i) seeds.push_back(first + i);
    }
  }
  if (n.has("scheme")) s.scheme = wrap(n.child("scheme"), [&] { return parse_scheme(n.text("scheme", "")); });
  s.micro_steps = n.count("micro_steps", s.micro_steps);
  s.window_start = n.count("window_start", s.window_start);
  s.lorenz_ic_std = n.number("lorenz_ic_std", s.lorenz_ic_std);
  if (n.has("ks_init")) {
    Node k(n.raw("ks_init"), n.child("ks_init"));
    s.ks_init.num_modes = k.integer("num_modes", s.ks_init.num_modes);
    s.ks_init.amplitude_min = k.number("amplitude_min", s.ks_init.amplitude_min);
    s.ks_init.amplitude_max = k.number("amplitude_max", s.ks_init.amplitude_max);
    s.ks_init.frequency_min = k.number("frequency_min", s.ks_init.frequency_min);
    s.ks_init.frequency_max = k.number("frequency_max", s.ks_init.frequency_max);
    k.finish();
  }
  if (n.has("grf")) {
    Node g(n.raw("grf"), n.child("grf"));
    s.grf.alpha = g.number("alpha", s.grf.alpha);
    s.grf.tau = g.number("tau", s.grf.tau);
    s.grf.amplitude = g.number("amplitude", s.grf.amplitude);
    s.grf.sample_resolution = g.count("sample_resolution", s.grf.sample_resolution);
    g.finish();
  }
  if (n.has("newton")) {
    Node w(n.raw("newton"), n.child("newton"));
    s.newton.max_iters = w.count("max_iters", s.newton.max_iters);
    s.newton.abs_tolerance = w.number("abs_tolerance", s.newton.abs_tolerance);
    s.newton.gmres_restart = w.count("gmres_restart", s.newton.gmres_restart);
    w.finish();
  }
  n.finish();
}

void parse_grid(const json& j, const std::string& path, SystemConfig& s) {
  Node n(j, path);
  GridSpec& g = s.grid;
  const double dt = n.number("dt", g.dt);
  const std::size_t steps = n.count("steps", g.num_steps);
  std::vector<std::size_t> res = g.resolution;
  if (n.has("resolution")) {
    if (g.system == SystemKind::lorenz) throw ConfigError(n.child("resolution") + ": lorenz has no spatial grid");
    res = count_list(n.raw("resolution"), n.child("resolution"));
    if (g.system == SystemKind::ns && res.size() == 1) res.push_back(res[0]);
    if (res.size() != g.resolution.size())
      throw ConfigError(n.child("resolution") + ": expected " + std::to_string(g.resolution.size()) + " entries");
  }
  n.finish();
  switch (g.system) {
    case SystemKind::lorenz: g = GridSpec::lorenz(dt, steps); break;
    case SystemKind::ks: g = GridSpec::ks(res[0], dt, steps, s.params.ks.domain_length); break;
    case SystemKind::ns: g = GridSpec::ns(res[0], res[1], dt, steps); break;
  }
}

json lbfgs_json(const LbfgsConfig& c) {
  return {{"memory", c.memory},
          {"max_iters", c.max_iters},
          {"gradient_tolerance", c.gradient_tolerance},
          {"wolfe_c1", c.wolfe_c1},
          {"wolfe_c2", c.wolfe_c2},
          {"max_line_search_evals", c.max_line_search_evals},
          {"record_path", c.record_path}};
}

json system_json(const SystemConfig& s) {
  json j;
  const SystemKind kind = s.grid.system;
  j["system"] = to_string(kind);
  json grid = {{"dt", s.grid.dt}, {"steps", s.grid.num_steps}};
  if (kind != SystemKind::lorenz) grid["resolution"] = s.grid.resolution;
  j["grid"] = grid;
  switch (kind) {
    case SystemKind::lorenz:
      j["params"] = {{"sigma", s.params.lorenz.sigma}, {"rho", s.params.lorenz.rho}, {"beta", s.params.lorenz.beta}};
      break;
    case SystemKind::ks: j["params"] = {{"domain_length", s.params.ks.domain_length}}; break;
    case SystemKind::ns:
      j["params"] = {{"reynolds", s.params.ns.reynolds},
                     {"forcing_amplitude", s.params.ns.forcing_amplitude},
                     {"forcing_wavenumber", s.params.ns.forcing_wavenumber},
                     {"drag", s.params.ns.drag}};
      break;
  }
  json gen = {{"scheme", to_string(s.scheme)},
              {"micro_steps", s.micro_steps},
              {"window_start", s.window_start},
              {"newton",
               {{"max_iters", s.newton.max_iters},
                {"abs_tolerance", s.newton.abs_tolerance},
                {"gmres_restart", s.newton.gmres_restart}}}};
  if (kind == SystemKind::lorenz) gen["lorenz_ic_std"] = s.lorenz_ic_std;
  if (kind == SystemKind::ks)
    gen["ks_init"] = {{"num_modes", s.ks_init.num_modes},
                      {"amplitude_min", s.ks_init.amplitude_min},
                      {"amplitude_max", s.ks_init.amplitude_max},
                      {"frequency_min", s.ks_init.frequency_min},
                      {"frequency_max", s.ks_init.frequency_max}};
  if (kind == SystemKind::ns)
    gen["grf"] = {{"alpha", s.grf.alpha},
                  {"tau", s.grf.tau},
                  {"amplitude", s.grf.amplitude},
                  {"sample_resolution", s.grf.sample_resolution}};
  j["generator"] = gen;
  return j;
}

json experiment_json(const ExperimentConfig& e) {
  json j = system_json(e.system);
  j["generator"]["seeds"] = e.seeds;
  j["degrade"] = {{"kind", to_string(e.degrade.kind)},
                  {"keep_fraction", e.degrade.keep_fraction},
                  {"noise_sigma", e.degrade.noise_sigma},
                  {"coarse_factor", e.degrade.coarse_factor},
                  {"blend_weight", e.degrade.blend_weight},
                  {"seed", e.degrade.seed}};
  json methods = json::array();
  for (const auto& m : e.methods) {
    json mj = {{"name", m.name},
               {"method", to_string(m.config.method)},
               {"krylov_tol", m.config.krylov_tol},
               {"krylov_max_iters", m.config.krylov_max_iters},
               {"solver", to_string(m.config.solver)},
               {"squared_norms", m.config.squared_norms},
               {"lbfgs", lbfgs_json(m.config.lbfgs)}};
    if (m.config.lambda.norm_of_uhat)
      mj["lambda"] = "norm-of-uhat";
    else
      mj["lambda"] = m.config.lambda.value;
    methods.push_back(mj);
  }
  j["methods"] = methods;
  if (!e.resolutions.empty()) j["resolutions"] = e.resolutions;
  j["threads"] = e.threads;
  if (e.dataset_dir) j["dataset_dir"] = e.dataset_dir->string();
  return j;
}

SystemKind parse_system_sections(Node& n, SystemConfig& sys, std::vector<std::uint64_t>& seeds) {
  const SystemKind kind = wrap("system", [&] { return parse_system_kind(n.required_text("system")); });
  sys = SystemConfig::defaults(kind);
  if (n.has("params")) parse_params(n.raw("params"), "params", kind, sys);
  if (kind == SystemKind::ks) sys.grid.length[0] = sys.params.ks.domain_length;
  if (n.has("grid")) parse_grid(n.raw("grid"), "grid", sys);
  if (n.has("generator")) parse_generator(n.raw("generator"), "generator", sys, seeds);
  return kind;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    Node n(j, "");
    RunConfig rc;
    ExperimentConfig& e = rc.experiment;
    parse_system_sections(n, e.system, e.seeds);
    if (n.has("degrade")) e.degrade = parse_degrade(n.raw("degrade"), "degrade");
    if (n.has("methods")) {
      const json& ms = n.raw("methods");
      if (!ms.is_array()) throw ConfigError("methods: expected an array");
      for (std::size_t i = 0; i < ms.size(); ++i) e.methods.push_back(parse_method(ms[i], "methods[" + std::to_string(i) + "]"));
    }
    if (n.has("resolutions")) e.resolutions = count_list(n.raw("resolutions"), "resolutions");
    e.threads = n.count("threads", e.threads);
    if (n.has("dataset_dir")) e.dataset_dir = n.text("dataset_dir", "");
    if (n.has("output")) {
      Node o(n.raw("output"), "output");
      if (o.has("csv")) rc.output.csv = o.text("csv", "");
      if (o.has("table")) rc.output.table = o.text("table", "");
      if (o.has("records")) rc.output.records = o.text("records", "");
      o.finish();
    }
    n.finish();
    e.system.validate();
    return rc;
  } catch (const ConfigError& err) {
    throw ConfigError(source + ": " + err.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) { return experiment_json(cfg).dump(2); }

std::string system_config_to_json(const SystemConfig& cfg) { return system_json(cfg).dump(2); }

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  json j = system_json(m.config);
  j["generator"]["seeds"] = m.seeds;
  j["files"] = m.files;
  j["generator_version"] = m.generator_version;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON at byte " + std::to_string(e.byte));
  }
  try {
    Node n(j, "");
    DatasetManifest m;
    parse_system_sections(n, m.config, m.seeds);
    m.generator_version = n.text("generator_version", "");
    if (n.has("files")) {
      const json& f = n.raw("files");
      if (!f.is_array()) throw ConfigError("files: expected an array");
      for (const auto& x : f) {
        if (!x.is_string()) throw ConfigError("files: expected strings");
        m.files.push_back(x.get<std::string>());
      }
    }
    n.finish();
    if (m.files.size() != m.seeds.size()) throw ConfigError("files: expected one file per seed");
    return m;
  } catch (const ConfigError& err) {
    throw ConfigError(path.string() + ": " + err.what());
  }
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j = experiment_json(cfg.experiment);
  json out = json::object();
  if (cfg.output.csv) out["csv"] = cfg.output.csv->string();
  if (cfg.output.table) out["table"] = cfg.output.table->string();
  if (cfg.output.records) out["records"] = cfg.output.records->string();
  if (!out.empty()) j["output"] = out;
  return j.dump(2);
}

}  // namespace trajproj
