#pragma once

// Configuration, scenario library, writers and subcommand drivers for the
// cosserat-af command line tool.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cosaf/diagnostics.hpp"
#include "cosaf/evolution.hpp"

namespace cosaf {

struct MeshSpec {
  std::array<int, 3> n{1, 1, 1};
  Vec3 length{1.0, 1.0, 1.0};
  std::array<FaceTag, 6> faces{FaceTag::dirichlet, FaceTag::dirichlet, FaceTag::dirichlet,
                               FaceTag::dirichlet, FaceTag::dirichlet, FaceTag::dirichlet};
};

struct VerifySpec {
  double energy_tol = 1e-6;     ///< residual limit relative to the energy scale
  double trace_tol = 1e-14;
  double backstress_tol = 1e-9; ///< allowed |b| d / c - 1
  int coercivity_samples = 0;   ///< 0 disables the probe
};

/// Scenario names: "shear" and "uniaxial" use a fixed strain direction,
/// "affine" takes `direction` from the config, "torsion" twists the top face
/// (field runs only).
struct ScenarioConfig {
  MaterialParams material;
  bool material_point = true;  ///< false when a "mesh" block is present
  MeshSpec mesh;
  std::string scenario = "shear";
  Amplitude amplitude;
  Sym3 direction;  ///< strain direction for shear/uniaxial/affine
  double t_end = 1.0;
  double dt = 1e-2;
  std::optional<std::pair<int, Vec3>> traction;  ///< (face, vector) scaled by the amplitude
  Vec3 body_force{};
  RunConfig run;
  DevSym3 eps_p0{}, b0{};
  std::vector<double> sweep_nu;
  VerifySpec verify;
  std::uint64_t seed = 0;
  int snapshot_every = 0;  ///< 0 writes only the final snapshot

  std::string resolved_json;          ///< full config with defaults, one line
  std::vector<std::string> warnings;  ///< e.g. d = 0
};

/// Parses JSON text. Throws ParseError for malformed input and
/// ValidationError listing every violation.
ScenarioConfig parse_config_text(const std::string& text);
/// Reads and parses a file (ParseError when it cannot be read).
ScenarioConfig parse_config(const std::filesystem::path& path);

/// Overrides the seed and refreshes the embedded config.
void set_seed(ScenarioConfig& cfg, std::uint64_t seed);

GridMesh make_mesh(const ScenarioConfig& cfg);
LoadingProgram make_program(const ScenarioConfig& cfg);
/// The one-element field problem driven by the material-point strain path.
LoadingProgram uniform_embedding(const ScenarioConfig& cfg);

/// CSV trace with a versioned header and the embedded resolved config.
/// Every row is flushed so a failed run leaves a readable prefix.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, const ScenarioConfig& cfg,
              const std::vector<std::string>& columns);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  size_t ncol_;
};

std::vector<std::string> point_trace_columns();
std::vector<double> point_trace_row(const PointSample& s, const MaterialParams& p);
std::vector<std::string> field_trace_columns();

/// Structured-text field snapshot: node table, element table, QP table.
void write_snapshot(std::ostream& os, const GridMesh& mesh, const FieldState& s,
                    const ScenarioConfig& cfg);

/// One verification line of a report.
struct Check {
  std::string name;
  bool pass = true;
  double value = 0.0;
  double limit = 0.0;
  std::string note;
};

void write_report(std::ostream& os, const std::string& title, const std::vector<Check>& checks,
                  const std::vector<std::pair<std::string, double>>& monitors,
                  const ScenarioConfig& cfg);

/// Exit codes of the tool.
enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_nonconvergence = 3, exit_verification = 4 };

/// Runs a subcommand and maps errors to exit codes; messages go to `log`.
int run_subcommand(const std::string& name, const ScenarioConfig& cfg,
                   const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace cosaf
