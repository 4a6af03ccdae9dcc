#include "cosaf/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cosaf/errors.hpp"
#include "json.hpp"

namespace cosaf {

using json = nlohmann::json;

namespace {

const char* kFaceNames[6] = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};
const char* kTraceVersion = "# cosserat-af trace v1";

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Collects every problem instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> errors;

  void allow(const json& o, const std::string& where, std::initializer_list<const char*> keys) {
    if (!o.is_object()) {
      errors.push_back(where + " must be an object");
      return;
    }
    for (auto it = o.begin(); it != o.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) errors.push_back(where + ": unknown key '" + it.key() + "'");
    }
  }

  double num(const json& o, const char* key, double def, const std::string& where) {
    if (!o.is_object() || !o.contains(key)) return def;
    const json& v = o.at(key);
    if (!v.is_number()) {
      errors.push_back(where + "." + key + " must be a number");
      return def;
    }
    return v.get<double>();
  }

  double need(const json& o, const char* key, const std::string& where) {
    if (!o.is_object() || !o.contains(key)) {
      errors.push_back(where + "." + key + " is required");
      return std::numeric_limits<double>::quiet_NaN();
    }
    return num(o, key, 0.0, where);
  }

  int integer(const json& o, const char* key, int def, const std::string& where) {
    if (!o.is_object() || !o.contains(key)) return def;
    const json& v = o.at(key);
    if (!v.is_number_integer()) {
      errors.push_back(where + "." + key + " must be an integer");
      return def;
    }
    return v.get<int>();
  }

  std::string str(const json& o, const char* key, const std::string& def, const std::string& where) {
    if (!o.is_object() || !o.contains(key)) return def;
    const json& v = o.at(key);
    if (!v.is_string()) {
      errors.push_back(where + "." + key + " must be a string");
      return def;
    }
    return v.get<std::string>();
  }

  std::vector<double> list(const json& o, const char* key, size_t n, const std::string& where) {
    if (!o.is_object() || !o.contains(key)) return {};
    const json& v = o.at(key);
    std::vector<double> out;
    if (!v.is_array() || (n > 0 && v.size() != n)) {
      errors.push_back(where + "." + key + " must be an array" +
                       (n > 0 ? " of " + std::to_string(n) + " numbers" : std::string(" of numbers")));
      return {};
    }
    for (const auto& x : v) {
      if (!x.is_number()) {
        errors.push_back(where + "." + key + " must contain numbers only");
        return {};
      }
      out.push_back(x.get<double>());
    }
    return out;
  }
};

Sym3 unit_shear() { return {0.0, 0.0, 0.0, 1.0 / std::sqrt(2.0), 0.0, 0.0}; }

json sym_json(const Sym3& s) {
  return json::array({json::array({s.xx, s.xy, s.xz}), json::array({s.xy, s.yy, s.yz}),
                      json::array({s.xz, s.yz, s.zz})});
}
json dev_json(const DevSym3& d) { return json::array({d.xx, d.yy, d.xy, d.xz, d.yz}); }

json resolved(const ScenarioConfig& c) {
  json j;
  const MaterialParams& p = c.material;
  j["material"] = {{"mu", p.moduli.mu}, {"lambda", p.moduli.lambda}, {"mu_c", p.mu_c},
                   {"l_c", p.l_c}, {"c", p.c}, {"d", p.d}, {"sigma_y", p.sigma_y}, {"nu", p.nu}};
  if (p.k) j["material"]["k"] = *p.k;
  if (!c.material_point) {
    json faces;
    for (int f = 0; f < 6; ++f)
      faces[kFaceNames[f]] = c.mesh.faces[f] == FaceTag::dirichlet ? "dirichlet" : "neumann";
    j["mesh"] = {{"n", c.mesh.n}, {"length", {c.mesh.length.x, c.mesh.length.y, c.mesh.length.z}},
                 {"faces", faces}};
  }
  json amp = {{"type", Amplitude::kind_name(c.amplitude.kind)},
              {"amplitude", c.amplitude.amplitude},
              {"period", c.amplitude.period},
              {"rate", c.amplitude.rate}};
  if (c.amplitude.kind == Amplitude::Kind::table) {
    json t = json::array();
    for (const auto& [a, b] : c.amplitude.table) t.push_back({a, b});
    amp["table"] = t;
  }
  j["loading"] = {{"scenario", c.scenario}, {"amplitude", amp}, {"direction", sym_json(c.direction)},
                  {"t_end", c.t_end}, {"dt", c.dt},
                  {"body_force", {c.body_force.x, c.body_force.y, c.body_force.z}}};
  if (c.traction)
    j["loading"]["traction"] = {{"face", kFaceNames[c.traction->first]},
                                {"vector", {c.traction->second.x, c.traction->second.y, c.traction->second.z}}};
  const RunConfig& r = c.run;
  j["run"] = {{"flow", r.flow == FlowMode::yosida ? "yosida" : "yosida_cut_k"},
              {"stagger_tol", r.stagger_tol},
              {"stagger_max", r.stagger_max},
              {"max_halvings", r.max_halvings},
              {"max_iterations", r.local.max_iterations},
              {"max_substep_depth", r.local.max_substep_depth},
              {"local_tol", r.local.tolerance},
              {"policy", r.policy == AdmissibilityPolicy::warn ? "warn" : "fail"},
              {"snapshot_every", c.snapshot_every}};
  j["initial"] = {{"eps_p", dev_json(c.eps_p0)}, {"b", dev_json(c.b0)}};
  j["sweep"] = {{"nu", c.sweep_nu}};
  j["verify"] = {{"energy_tol", c.verify.energy_tol},
                 {"trace_tol", c.verify.trace_tol},
                 {"backstress_tol", c.verify.backstress_tol},
                 {"coercivity_samples", c.verify.coercivity_samples}};
  j["seed"] = c.seed;
  return j;
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed config: ") + e.what());
  }
  Reader rd;
  ScenarioConfig c;
  rd.allow(j, "config", {"material", "mesh", "loading", "run", "initial", "sweep", "verify", "seed"});
  if (!j.is_object()) throw ValidationError(rd.errors);

  const json mat = j.value("material", json::object());
  rd.allow(mat, "material", {"mu", "lambda", "mu_c", "l_c", "c", "d", "sigma_y", "nu", "k"});
  MaterialParams& p = c.material;
  p.moduli.mu = rd.need(mat, "mu", "material");
  p.moduli.lambda = rd.need(mat, "lambda", "material");
  p.mu_c = rd.num(mat, "mu_c", p.moduli.mu, "material");
  p.l_c = rd.num(mat, "l_c", 1.0, "material");
  p.c = rd.need(mat, "c", "material");
  p.d = rd.need(mat, "d", "material");
  p.sigma_y = rd.need(mat, "sigma_y", "material");
  p.nu = rd.need(mat, "nu", "material");
  if (mat.is_object() && mat.contains("k")) p.k = rd.num(mat, "k", 0.0, "material");
  for (const auto& v : p.violations()) rd.errors.push_back("material: " + v);
  if (p.d == 0.0)
    c.warnings.push_back("d = 0: linear kinematic hardening, the backstress bound c/d is vacuous");

  if (j.contains("mesh")) {
    c.material_point = false;
    const json& m = j.at("mesh");
    rd.allow(m, "mesh", {"n", "length", "faces"});
    const auto n = rd.list(m, "n", 3, "mesh");
    if (!n.empty())
      for (int i = 0; i < 3; ++i) {
        c.mesh.n[i] = static_cast<int>(n[i]);
        if (n[i] < 1 || n[i] != std::floor(n[i])) rd.errors.push_back("mesh.n must hold positive integers");
      }
    const auto len = rd.list(m, "length", 3, "mesh");
    if (!len.empty()) {
      c.mesh.length = {len[0], len[1], len[2]};
      if (!(len[0] > 0.0 && len[1] > 0.0 && len[2] > 0.0)) rd.errors.push_back("mesh.length must be positive");
    }
    if (m.is_object() && m.contains("faces")) {
      const json& f = m.at("faces");
      rd.allow(f, "mesh.faces", {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"});
      for (int k = 0; k < 6; ++k) {
        const std::string tag = rd.str(f, kFaceNames[k], "dirichlet", "mesh.faces");
        if (tag == "dirichlet")
          c.mesh.faces[k] = FaceTag::dirichlet;
        else if (tag == "neumann")
          c.mesh.faces[k] = FaceTag::neumann;
        else
          rd.errors.push_back(std::string("mesh.faces.") + kFaceNames[k] + " must be dirichlet or neumann");
      }
      if (std::none_of(c.mesh.faces.begin(), c.mesh.faces.end(),
                       [](FaceTag t) { return t == FaceTag::dirichlet; }))
        rd.errors.push_back("mesh.faces: at least one face must be dirichlet");
    }
  }

  const json ld = j.value("loading", json::object());
  rd.allow(ld, "loading", {"scenario", "amplitude", "direction", "t_end", "dt", "traction", "body_force"});
  c.scenario = rd.str(ld, "scenario", "shear", "loading");
  c.t_end = rd.need(ld, "t_end", "loading");
  c.dt = rd.need(ld, "dt", "loading");
  if (!(c.t_end > 0.0)) rd.errors.push_back("loading.t_end must be > 0");
  if (!(c.dt > 0.0)) rd.errors.push_back("loading.dt must be > 0");
  if (c.scenario == "shear") {
    c.direction = unit_shear();
  } else if (c.scenario == "uniaxial") {
    c.direction = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  } else if (c.scenario == "affine") {
    if (!ld.is_object() || !ld.contains("direction") || !ld.at("direction").is_array() ||
        ld.at("direction").size() != 3) {
      rd.errors.push_back("loading.direction (3x3 symmetric matrix) is required for the affine scenario");
    } else {
      Mat3 d;
      bool ok = true;
      for (int i = 0; i < 3; ++i) {
        const json& row = ld.at("direction")[i];
        if (!row.is_array() || row.size() != 3) {
          ok = false;
          break;
        }
        for (int k = 0; k < 3; ++k) {
          if (!row[k].is_number()) ok = false;
          else d(i, k) = row[k].get<double>();
        }
      }
      if (!ok) rd.errors.push_back("loading.direction must be a 3x3 array of numbers");
      else if (norm(d - transpose(d)) > 1e-14 * (1.0 + norm(d)))
        rd.errors.push_back("loading.direction must be symmetric");
      c.direction = sym(d);
    }
  } else if (c.scenario == "torsion") {
    if (!j.contains("mesh")) rd.errors.push_back("loading.scenario torsion needs a mesh");
  } else {
    rd.errors.push_back("loading.scenario must be shear, uniaxial, affine or torsion");
  }
  if (ld.is_object() && ld.contains("amplitude")) {
    const json& a = ld.at("amplitude");
    rd.allow(a, "loading.amplitude", {"type", "amplitude", "period", "rate", "table"});
    try {
      c.amplitude.kind = Amplitude::parse_kind(rd.str(a, "type", "constant", "loading.amplitude"));
    } catch (const ParseError& e) {
      rd.errors.push_back(std::string("loading.amplitude: ") + e.what());
    }
    c.amplitude.amplitude = rd.num(a, "amplitude", 1.0, "loading.amplitude");
    c.amplitude.period = rd.num(a, "period", 1.0, "loading.amplitude");
    c.amplitude.rate = rd.num(a, "rate", 1.0, "loading.amplitude");
    if (!(c.amplitude.period > 0.0)) rd.errors.push_back("loading.amplitude.period must be > 0");
    if (a.is_object() && a.contains("table")) {
      const json& t = a.at("table");
      bool ok = t.is_array() && !t.empty();
      for (size_t i = 0; ok && i < t.size(); ++i) {
        ok = t[i].is_array() && t[i].size() == 2 && t[i][0].is_number() && t[i][1].is_number();
        if (ok) c.amplitude.table.emplace_back(t[i][0].get<double>(), t[i][1].get<double>());
        if (ok && i > 0) ok = c.amplitude.table[i].first > c.amplitude.table[i - 1].first;
      }
      if (!ok) rd.errors.push_back("loading.amplitude.table must be [[t, value], ...] with increasing t");
    } else if (c.amplitude.kind == Amplitude::Kind::table) {
      rd.errors.push_back("loading.amplitude.table is required for type table");
    }
  }
  if (ld.is_object() && ld.contains("traction")) {
    const json& t = ld.at("traction");
    rd.allow(t, "loading.traction", {"face", "vector"});
    const std::string face = rd.str(t, "face", "", "loading.traction");
    const auto v = rd.list(t, "vector", 3, "loading.traction");
    int fi = -1;
    for (int k = 0; k < 6; ++k)
      if (face == kFaceNames[k]) fi = k;
    if (fi < 0 || v.empty())
      rd.errors.push_back("loading.traction needs face (xmin..zmax) and vector [tx, ty, tz]");
    else if (c.material_point || c.mesh.faces[fi] != FaceTag::neumann)
      rd.errors.push_back("loading.traction.face must be a neumann face of the mesh");
    else
      c.traction = std::make_pair(fi, Vec3{v[0], v[1], v[2]});
  }
  if (const auto f = rd.list(ld, "body_force", 3, "loading"); !f.empty()) c.body_force = {f[0], f[1], f[2]};

  const json run = j.value("run", json::object());
  rd.allow(run, "run", {"flow", "stagger_tol", "stagger_max", "max_halvings", "max_iterations",
                        "max_substep_depth", "local_tol", "policy", "snapshot_every"});
  const std::string flow = rd.str(run, "flow", "yosida", "run");
  if (flow == "yosida") {
    c.run.flow = FlowMode::yosida;
  } else if (flow == "yosida_cut_k") {
    c.run.flow = FlowMode::yosida_cut_k;
    if (!p.k) rd.errors.push_back("run.flow yosida_cut_k needs material.k");
  } else {
    rd.errors.push_back("run.flow must be yosida or yosida_cut_k");
  }
  c.run.stagger_tol = rd.num(run, "stagger_tol", c.run.stagger_tol, "run");
  c.run.stagger_max = rd.integer(run, "stagger_max", c.run.stagger_max, "run");
  c.run.max_halvings = rd.integer(run, "max_halvings", c.run.max_halvings, "run");
  c.run.local.max_iterations = rd.integer(run, "max_iterations", c.run.local.max_iterations, "run");
  c.run.local.max_substep_depth = rd.integer(run, "max_substep_depth", c.run.local.max_substep_depth, "run");
  c.run.local.tolerance = rd.num(run, "local_tol", c.run.local.tolerance, "run");
  c.snapshot_every = rd.integer(run, "snapshot_every", 0, "run");
  const std::string policy = rd.str(run, "policy", "warn", "run");
  if (policy == "warn") c.run.policy = AdmissibilityPolicy::warn;
  else if (policy == "fail") c.run.policy = AdmissibilityPolicy::fail;
  else rd.errors.push_back("run.policy must be warn or fail");
  if (!(c.run.stagger_tol > 0.0)) rd.errors.push_back("run.stagger_tol must be > 0");
  if (c.run.stagger_max < 1) rd.errors.push_back("run.stagger_max must be >= 1");
  if (c.run.max_halvings < 0) rd.errors.push_back("run.max_halvings must be >= 0");
  if (c.run.local.max_iterations < 1) rd.errors.push_back("run.max_iterations must be >= 1");
  if (c.run.local.max_substep_depth < 0) rd.errors.push_back("run.max_substep_depth must be >= 0");
  if (!(c.run.local.tolerance > 0.0)) rd.errors.push_back("run.local_tol must be > 0");
  if (c.snapshot_every < 0) rd.errors.push_back("run.snapshot_every must be >= 0");

  const json init = j.value("initial", json::object());
  rd.allow(init, "initial", {"eps_p", "b"});
  if (const auto e = rd.list(init, "eps_p", 5, "initial"); !e.empty()) c.eps_p0 = {e[0], e[1], e[2], e[3], e[4]};
  if (const auto b = rd.list(init, "b", 5, "initial"); !b.empty()) c.b0 = {b[0], b[1], b[2], b[3], b[4]};

  const json sw = j.value("sweep", json::object());
  rd.allow(sw, "sweep", {"nu"});
  c.sweep_nu = rd.list(sw, "nu", 0, "sweep");
  for (size_t i = 0; i < c.sweep_nu.size(); ++i) {
    if (!(c.sweep_nu[i] > 0.0)) rd.errors.push_back("sweep.nu values must be > 0");
    if (i > 0 && !(c.sweep_nu[i] < c.sweep_nu[i - 1]))
      rd.errors.push_back("sweep.nu must be strictly decreasing");
  }

  const json ver = j.value("verify", json::object());
  rd.allow(ver, "verify", {"energy_tol", "trace_tol", "backstress_tol", "coercivity_samples"});
  c.verify.energy_tol = rd.num(ver, "energy_tol", c.verify.energy_tol, "verify");
  c.verify.trace_tol = rd.num(ver, "trace_tol", c.verify.trace_tol, "verify");
  c.verify.backstress_tol = rd.num(ver, "backstress_tol", c.verify.backstress_tol, "verify");
  c.verify.coercivity_samples = rd.integer(ver, "coercivity_samples", 0, "verify");
  if (c.verify.coercivity_samples < 0) rd.errors.push_back("verify.coercivity_samples must be >= 0");

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) rd.errors.push_back("seed must be a non-negative integer");
    else c.seed = j.at("seed").get<std::uint64_t>();
  }

  // Initial admissibility of the material point (field runs check it after the initial solve).
  if (rd.errors.empty() && c.material_point) {
    const Sym3 e0 = make_program(c).strain(0.0);
    const double gap = yield_gap(elastic_stress_at(e0, c.eps_p0, p), c.b0, p);
    std::vector<std::string> bad;
    if (norm(c.b0) > p.backstress_limit())
      bad.push_back("initial data violate |b0| <= c/d at the material point (|b0| = " + fmt(norm(c.b0)) + ")");
    if (gap > 0.0)
      bad.push_back("initial data violate |dev T_E0 - b0| <= sigma_y at the material point (gap " + fmt(gap) + ")");
    for (auto& s : bad) {
      if (c.run.policy == AdmissibilityPolicy::fail) rd.errors.push_back(s);
      else c.warnings.push_back(s);
    }
  }
  if (!rd.errors.empty()) throw ValidationError(rd.errors);
  c.resolved_json = resolved(c).dump();
  return c;
}

ScenarioConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void set_seed(ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.resolved_json = resolved(cfg).dump();
}

GridMesh make_mesh(const ScenarioConfig& cfg) {
  GridMesh m = GridMesh::box(cfg.mesh.n[0], cfg.mesh.n[1], cfg.mesh.n[2], cfg.mesh.length, cfg.mesh.faces);
  m.validate();
  return m;
}

LoadingProgram make_program(const ScenarioConfig& cfg) {
  LoadingProgram prog;
  prog.times = LoadingProgram::uniform_grid(cfg.t_end, cfg.dt);
  const Amplitude amp = cfg.amplitude;
  const Sym3 dir = cfg.direction;
  if (cfg.material_point) {
    prog.strain = [amp, dir](double t) { return amp.value(t) * dir; };
    return prog;
  }
  if (cfg.scenario == "torsion") {
    const Vec3 len = cfg.mesh.length;
    prog.data.g_D = [amp, len](const Vec3& x, double t) {
      const double th = amp.value(t) * x.z / len.z;  // twist angle of the top face
      return Vec3{-th * (x.y - 0.5 * len.y), th * (x.x - 0.5 * len.x), 0.0};
    };
  } else {
    prog.data.g_D = [amp, dir](const Vec3& x, double t) { return dir.to_mat() * (amp.value(t) * x); };
  }
  if (cfg.traction) {
    const Vec3 nrm = face_normal(cfg.traction->first);
    const Vec3 v = cfg.traction->second;
    prog.data.g_N = [amp, nrm, v](const Vec3&, const Vec3& n, double t) {
      return norm(n - nrm) < 1e-12 ? amp.value(t) * v : Vec3{};
    };
  }
  if (norm(cfg.body_force) > 0.0) {
    const Vec3 f = cfg.body_force;
    prog.data.f = [f](const Vec3&, double) { return f; };
  }
  return prog;
}

LoadingProgram uniform_embedding(const ScenarioConfig& cfg) {
  LoadingProgram prog;
  prog.times = LoadingProgram::uniform_grid(cfg.t_end, cfg.dt);
  const Amplitude amp = cfg.amplitude;
  const Sym3 dir = cfg.direction;
  prog.strain = [amp, dir](double t) { return amp.value(t) * dir; };
  prog.data.g_D = [amp, dir](const Vec3& x, double t) { return dir.to_mat() * (amp.value(t) * x); };
  return prog;
}

TraceWriter::TraceWriter(const std::filesystem::path& path, const ScenarioConfig& cfg,
                         const std::vector<std::string>& columns)
    : out_(path), ncol_(columns.size()) {
  if (!out_) throw Error(ErrorClass::Config, "cannot write '" + path.string() + "'");
  out_ << kTraceVersion << "\n# config: " << cfg.resolved_json << "\n";
  for (size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << "\n";
  out_.flush();
}

void TraceWriter::row(const std::vector<double>& values) {
  if (values.size() != ncol_) throw Error(ErrorClass::Internal, "trace row has the wrong width");
  for (size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << fmt(values[i]);
  out_ << "\n";
  out_.flush();
}

std::vector<std::string> point_trace_columns() {
  std::vector<std::string> c{"t"};
  const char* comp[6] = {"xx", "yy", "zz", "xy", "xz", "yz"};
  for (const char* name : {"strain", "eps_p", "b", "t_e"})
    for (const char* k : comp) c.push_back(std::string(name) + "_" + k);
  for (const char* k : {"energy", "overstress", "yield_gap", "b_ratio", "iterations", "substeps"}) c.push_back(k);
  return c;
}

std::vector<double> point_trace_row(const PointSample& s, const MaterialParams& p) {
  std::vector<double> r{s.t};
  for (const Sym3& x : {s.strain, s.state.eps_p.to_sym(), s.state.b.to_sym(), s.t_e})
    for (double v : {x.xx, x.yy, x.zz, x.xy, x.xz, x.yz}) r.push_back(v);
  const double gap = yield_gap(s.t_e, s.state.b, p);
  const double o = std::max(0.0, gap);
  const double lim = p.backstress_limit();
  r.push_back(free_energy(p, s.t_e, s.state.b).total());
  r.push_back(o * o / (2.0 * p.nu));
  r.push_back(gap);
  r.push_back(std::isfinite(lim) ? norm(s.state.b) / lim : 0.0);
  r.push_back(s.flow.iterations);
  r.push_back(s.flow.substeps);
  return r;
}

std::vector<std::string> field_trace_columns() {
  return {"t", "e_elastic", "e_couple", "e_curvature", "e_backstress", "e_total", "overstress",
          "max_yield_gap", "max_b_ratio", "max_trace", "acc_c_inv_te", "acc_couple", "acc_curvature",
          "stagger_iterations", "halvings", "local_iterations", "local_substeps", "stagger_residual"};
}

void write_snapshot(std::ostream& os, const GridMesh& mesh, const FieldState& s,
                    const ScenarioConfig& cfg) {
  os << "# cosserat-af snapshot v1\n# config: " << cfg.resolved_json << "\n";
  os << "time " << fmt(s.time) << "\n";
  os << "[nodes] " << mesh.num_nodes() << "\n# id x y z ux uy uz ax ay az\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Vec3 x = mesh.node(i);
    os << i;
    for (const Vec3& v : {x, s.u[i], s.a[i]}) os << " " << fmt(v.x) << " " << fmt(v.y) << " " << fmt(v.z);
    os << "\n";
  }
  os << "[elements] " << mesh.num_elements() << "\n# id n0 n1 n2 n3 n4 n5 n6 n7 (local node a + 2b + 4c)\n";
  for (int e = 0; e < mesh.num_elements(); ++e) {
    os << e;
    for (int n : mesh.element_nodes(e)) os << " " << n;
    os << "\n";
  }
  os << "[qp] " << s.qp.size()
     << "\n# id element x y z eps_p(xx yy xy xz yz) b(xx yy xy xz yz) t_e(xx yy zz xy xz yz)\n";
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (int q = 0; q < 8; ++q) {
      const int id = qp_index(e, q);
      const Vec3 x = mesh.qp_position(e, q);
      const PointState& st = s.qp[id];
      const Sym3& t = s.t_e[id];
      os << id << " " << e << " " << fmt(x.x) << " " << fmt(x.y) << " " << fmt(x.z);
      for (const DevSym3& d : {st.eps_p, st.b})
        for (double v : {d.xx, d.yy, d.xy, d.xz, d.yz}) os << " " << fmt(v);
      for (double v : {t.xx, t.yy, t.zz, t.xy, t.xz, t.yz}) os << " " << fmt(v);
      os << "\n";
    }
}

void write_report(std::ostream& os, const std::string& title, const std::vector<Check>& checks,
                  const std::vector<std::pair<std::string, double>>& monitors,
                  const ScenarioConfig& cfg) {
  os << "# cosserat-af report v1\n# config: " << cfg.resolved_json << "\n";
  os << "report " << title << "\n";
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.pass;
    os << "check " << c.name << " " << (c.pass ? "PASS" : "FAIL") << " value=" << fmt(c.value)
       << " limit=" << fmt(c.limit);
    if (!c.note.empty()) os << " note=\"" << c.note << "\"";
    os << "\n";
  }
  for (const auto& [k, v] : monitors) os << "monitor " << k << " " << fmt(v) << "\n";
  os << "result " << (all ? "PASS" : "FAIL") << "\n";
}

namespace {

// Running rate accumulators of a field run fed one state at a time.
class RateTracker {
 public:
  RateTracker(const GridMesh& mesh, const MaterialParams& p) : mesh_(mesh), p_(p) {}
  const RateNorms& push(const FieldState& s) {
    auto kin = kinematics(mesh_, s.u, s.a);
    if (!prev_kin_.empty()) {
      const double dt = s.time - prev_time_;
      const double w = mesh_.qp_weight();
      for (size_t q = 0; q < kin.size(); ++q) {
        const Sym3 dte = s.t_e[q] - prev_te_[q];
        acc_.c_inv_te += w * dot(compliance(dte, p_.moduli), dte) / dt;
        const Skew3 dr = kin[q].rel - prev_kin_[q].rel;
        acc_.couple += w * 2.0 * p_.mu_c * dot(dr, dr) / dt;
        const Mat3 dg = kin[q].grad_a - prev_kin_[q].grad_a;
        acc_.curvature += w * 4.0 * p_.l_c * dot(dg, dg) / dt;
      }
    }
    prev_kin_ = std::move(kin);
    prev_te_ = s.t_e;
    prev_time_ = s.time;
    return acc_;
  }

 private:
  const GridMesh& mesh_;
  MaterialParams p_;
  std::vector<QpKinematics> prev_kin_;
  std::vector<Sym3> prev_te_;
  double prev_time_ = 0.0;
  RateNorms acc_;
};

std::vector<double> field_row(const GridMesh& mesh, const MaterialParams& p, const FieldState& s,
                              const StepInfo& info, const RateNorms& acc) {
  const EnergyParts e = free_energy(mesh, p, s);
  const FieldMonitors m = field_monitors(p, s);
  return {s.time, e.elastic, e.couple, e.curvature, e.backstress, e.total(),
          overstress_functional(mesh, p, s), m.max_yield_gap, m.max_backstress_ratio, m.max_trace,
          acc.c_inv_te, acc.couple, acc.curvature,
          static_cast<double>(info.stagger_iterations), static_cast<double>(info.halvings),
          static_cast<double>(info.local_iterations), static_cast<double>(info.local_substeps),
          info.stagger_residual};
}

PointState initial_point(const ScenarioConfig& cfg) {
  PointState s;
  s.eps_p = cfg.eps_p0;
  s.b = cfg.b0;
  return s;
}

int cmd_material_point(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  if (!cfg.material_point) throw Error(ErrorClass::Config, "material-point needs a config without a mesh block");
  TraceWriter tw(out / "trace.csv", cfg, point_trace_columns());
  const MaterialParams& p = cfg.material;
  double bmax = 0.0;
  const auto tr = run_material_point(make_program(cfg), cfg.run, p, initial_point(cfg),
                                     [&](const PointSample& s) {
                                       tw.row(point_trace_row(s, p));
                                       bmax = std::max(bmax, norm(s.state.b));
                                     });
  log << "material-point: " << tr.samples.size() << " samples, max |b| = " << fmt(bmax)
      << ", trace written to " << (out / "trace.csv").string() << "\n";
  return exit_ok;
}

int cmd_solve(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  if (cfg.material_point) throw Error(ErrorClass::Config, "solve needs a mesh block in the config");
  const GridMesh mesh = make_mesh(cfg);
  const MaterialParams& p = cfg.material;
  const CosseratSolver solver(mesh, p);
  const LoadingProgram prog = make_program(cfg);
  TraceWriter tw(out / "trace.csv", cfg, field_trace_columns());
  RateTracker rates(mesh, p);
  RunConfig rc = cfg.run;
  rc.store_rates = false;
  const std::vector<DevSym3> ep0(mesh.num_qp(), cfg.eps_p0), b0(mesh.num_qp(), cfg.b0);
  int step = 0;
  const auto tr = run_quasistatic(solver, prog, rc, p, ep0, b0, [&](const FieldState& s, const StepInfo& i) {
    tw.row(field_row(mesh, p, s, i, rates.push(s)));
    if (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0) {
      std::ofstream os(out / ("snapshot_" + std::to_string(step) + ".txt"));
      write_snapshot(os, mesh, s, cfg);
    }
    ++step;
  });
  std::ofstream os(out / "snapshot_final.txt");
  write_snapshot(os, mesh, tr.snapshots.back(), cfg);
  if (tr.initial_violations > 0)
    log << "warning: initial data inadmissible at " << tr.initial_violations << " quadrature points\n";
  log << "solve: " << step << " states, trace and snapshots written to " << out.string() << "\n";
  return exit_ok;
}

int cmd_sweep(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  if (cfg.sweep_nu.empty()) throw Error(ErrorClass::Config, "sweep-nu needs sweep.nu");
  const MaterialParams& base = cfg.material;
  int idx = 0;
  std::function<std::pair<RunSeries, RateNorms>(const MaterialParams&)> run;
  std::optional<GridMesh> mesh;
  std::optional<CosseratSolver> solver;
  if (cfg.material_point) {
    run = [&](const MaterialParams& p) {
      TraceWriter tw(out / ("trace_nu_" + std::to_string(idx++) + ".csv"), cfg, point_trace_columns());
      const auto tr = run_material_point(make_program(cfg), cfg.run, p, initial_point(cfg),
                                         [&](const PointSample& s) { tw.row(point_trace_row(s, p)); });
      return std::make_pair(series_of(tr), point_rate_norms(tr, p));
    };
  } else {
    mesh = make_mesh(cfg);
    solver.emplace(*mesh, base);
    run = [&](const MaterialParams& p) {
      TraceWriter tw(out / ("trace_nu_" + std::to_string(idx++) + ".csv"), cfg, field_trace_columns());
      RateTracker rates(*mesh, p);
      const std::vector<DevSym3> ep0(mesh->num_qp(), cfg.eps_p0), b0(mesh->num_qp(), cfg.b0);
      const auto tr = run_quasistatic(*solver, make_program(cfg), cfg.run, p, ep0, b0,
                                      [&](const FieldState& s, const StepInfo& i) {
                                        tw.row(field_row(*mesh, p, s, i, rates.push(s)));
                                      });
      return std::make_pair(series_of(tr, *mesh), rate_norm_accumulators(*solver, tr, p).back());
    };
  }
  const SweepReport rep = nu_sweep(base, cfg.sweep_nu, run);

  std::ofstream sum(out / "sweep_summary.csv");
  sum << kTraceVersion << "\n# config: " << cfg.resolved_json << "\n";
  sum << "nu,overstress_weighted,ratio_to_prev,overstress_raw,overstress_sup,max_yield_gap,"
         "max_b_ratio,acc_c_inv_te,acc_couple,acc_curvature,rate_bound_sup,diff_to_prev\n";
  for (size_t i = 0; i < rep.entries.size(); ++i) {
    const SweepEntry& e = rep.entries[i];
    const double ratio = i > 0 ? e.overstress_weighted / rep.entries[i - 1].overstress_weighted : 0.0;
    sum << fmt(e.nu) << "," << fmt(e.overstress_weighted) << "," << fmt(ratio) << ","
        << fmt(e.overstress_raw) << "," << fmt(e.overstress_sup) << "," << fmt(e.max_yield_gap) << ","
        << fmt(e.max_backstress_ratio) << "," << fmt(e.rates.c_inv_te) << "," << fmt(e.rates.couple)
        << "," << fmt(e.rates.curvature) << "," << fmt(e.rate_bound_sup) << "," << fmt(e.diff_to_prev) << "\n";
  }
  std::vector<Check> checks{
      {"differences_monotone", rep.differences_monotone, 0.0, 0.0,
       "consecutive trajectory distances decrease"},
      {"energy_bounded", rep.bounded, rep.entries.back().rate_bound_sup, 1.1 * rep.entries.front().rate_bound_sup,
       "overstress functional plus rate accumulators"},
      {"admissibility_envelope", rep.admissibility_ok, std::max(0.0, rep.entries.back().max_yield_gap),
       3.0 * rep.envelope_c * std::sqrt(rep.entries.back().nu), "max yield gap at the smallest nu"}};
  std::ofstream rf(out / "sweep_report.txt");
  write_report(rf, "sweep-nu", checks, {{"envelope_c", rep.envelope_c}}, cfg);
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.pass;
    log << "sweep-nu: " << c.name << " " << (c.pass ? "PASS" : "FAIL") << "\n";
  }
  return ok ? exit_ok : exit_verification;
}

int cmd_verify(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const MaterialParams& p = cfg.material;
  const GridMesh mesh = cfg.material_point ? GridMesh::box(1, 1, 1) : make_mesh(cfg);
  const LoadingProgram prog = cfg.material_point ? uniform_embedding(cfg) : make_program(cfg);
  const CosseratSolver solver(mesh, p);
  const std::vector<DevSym3> ep0(mesh.num_qp(), cfg.eps_p0), b0(mesh.num_qp(), cfg.b0);
  // reject traction data before integrating
  build_test_functions(solver, prog.data, 0.0, ep0);

  TraceWriter tw(out / "trace.csv", cfg, field_trace_columns());
  RateTracker rates(mesh, p);
  double bratio = 0.0, trace_max = 0.0, bound_sup = 0.0, over_max = 0.0;
  bool proj = true;
  RateNorms last;
  RunConfig rc = cfg.run;
  rc.store_rates = true;
  const auto tr = run_quasistatic(solver, prog, rc, p, ep0, b0, [&](const FieldState& s, const StepInfo& i) {
    const RateNorms& acc = rates.push(s);
    last = acc;
    tw.row(field_row(mesh, p, s, i, acc));
    const FieldMonitors m = field_monitors(p, s);
    bratio = std::max(bratio, m.max_backstress_ratio);
    trace_max = std::max(trace_max, m.max_trace);
    proj = proj && m.projection_identity;
    const double o = overstress_functional(mesh, p, s);
    over_max = std::max(over_max, o);
    bound_sup = std::max(bound_sup, o + acc.c_inv_te + acc.couple + acc.curvature);
  });
  const InequalityReport ineq = energy_inequality(solver, tr, prog.data, p, ep0);

  std::vector<Check> checks;
  for (size_t k = 0; k < ineq.labels.size(); ++k) {
    const double worst = *std::max_element(ineq.residual[k].begin(), ineq.residual[k].end());
    checks.push_back({"energy_inequality_" + ineq.labels[k], worst <= cfg.verify.energy_tol * ineq.energy_scale,
                      worst, cfg.verify.energy_tol * ineq.energy_scale,
                      "max over snapshots of LHS - RHS"});
  }
  if (std::isfinite(p.backstress_limit()))
    checks.push_back({"backstress_bound", bratio <= 1.0 + cfg.verify.backstress_tol, bratio,
                      1.0 + cfg.verify.backstress_tol, "max |b| d / c"});
  checks.push_back({"trace_conservation", trace_max <= cfg.verify.trace_tol, trace_max, cfg.verify.trace_tol,
                    "relative |tr eps_p|, |tr b|"});
  checks.push_back({"projection_identity", proj, proj ? 0.0 : 1.0, 0.0, "Pi(b) = b at every point"});
  if (cfg.verify.coercivity_samples > 0) {
    const GridMesh probe_mesh = cfg.material_point ? GridMesh::box(4, 4, 4) : mesh;
    const auto cr = coercivity_probe(probe_mesh, p, cfg.verify.coercivity_samples, cfg.seed);
    checks.push_back({"coercivity_positive", cr.min_ratio > 0.0, cr.min_ratio, 0.0,
                      "min energy ratio over samples"});
  }
  std::vector<std::pair<std::string, double>> monitors{
      {"energy_scale", ineq.energy_scale},
      {"rejected_test_pairs", static_cast<double>(ineq.rejected_pairs)},
      {"initial_violations", static_cast<double>(tr.initial_violations)},
      {"overstress_functional_sup", over_max},
      {"rate_c_inv_te", last.c_inv_te},
      {"rate_couple", last.couple},
      {"rate_curvature", last.curvature},
      {"rate_bound_sup", bound_sup}};
  std::ofstream rf(out / "verification_report.txt");
  write_report(rf, "verify-energy (constructed test family only)", checks, monitors, cfg);
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.pass;
    log << "verify-energy: " << c.name << " " << (c.pass ? "PASS" : "FAIL") << " (" << fmt(c.value) << ")\n";
  }
  return ok ? exit_ok : exit_verification;
}

}  // namespace

int run_subcommand(const std::string& name, const ScenarioConfig& cfg,
                   const std::filesystem::path& out_dir, std::ostream& log) {
  try {
    for (const auto& w : cfg.warnings) log << "warning: " << w << "\n";
    std::filesystem::create_directories(out_dir);
    if (name == "material-point") return cmd_material_point(cfg, out_dir, log);
    if (name == "solve") return cmd_solve(cfg, out_dir, log);
    if (name == "sweep-nu") return cmd_sweep(cfg, out_dir, log);
    if (name == "verify-energy") return cmd_verify(cfg, out_dir, log);
    log << "error: unknown subcommand '" << name << "'\n";
    return exit_config;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    switch (e.error_class()) {
      case ErrorClass::Config: return exit_config;
      case ErrorClass::NonConvergence: return exit_nonconvergence;
      case ErrorClass::Verification: return exit_verification;
      case ErrorClass::Internal: return 1;
    }
    return 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cosaf
