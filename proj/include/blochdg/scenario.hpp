#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blochdg/dg_operator.hpp"
#include "blochdg/oracles.hpp"
#include "blochdg/sequence.hpp"
#include "blochdg/signal.hpp"
#include "blochdg/timeint.hpp"

namespace blochdg {

using json = nlohmann::json;

/// Raised on malformed configuration; the message names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TubeRow {
    std::string label;
    double t1 = 0.0, t2 = 0.0;  // seconds
};

struct GeometryConfig {
    int dimension = 1;
    Vec3 lo{0, 0, -9e-3}, hi{0, 0, 9e-3};
    std::array<int, 3> cells{27, 1, 1};  // mesh-axis counts (1D: first entry)
    BoxMesh make_mesh() const;
    BoxMesh make_mesh(int cells_override) const;  // 1D refinement studies
};

struct ScenarioConfig {
    std::string scenario;  // static-phantom | yuan-slice | through-plane | pulsatile | custom
    std::uint64_t seed = 0;
    GeometryConfig geometry;
    TissueParams tissue;
    std::vector<TubeRow> tubes;
    FlashParams sequence;

    // yuan-slice pulse block
    double pulse_flip = units::pi / 2.0;
    double pulse_duration = 2.6794e-3;
    double pulse_g_slice = 1e-2;                 // T/m
    double pulse_reference_amplitude = 1.75e-5;  // T, reported against calibration
    int pulse_pairs = 4;
    int pulse_samples = 129;

    // velocity
    std::optional<double> uz;             // constant through-plane velocity, m/s
    std::vector<double> sweep;            // m/s
    std::vector<double> profile_samples;  // m/s over one period, periodic
    double profile_period = 0.0;          // s

    SolverConfig solver;
    int degree = 2;
    double penalty = 5e-4;
    std::string engine = "isochromat";  // static-phantom: isochromat | dg
    Region signal_region;               // default: whole domain
    int plateau_frames = 20;
    bool energy_check = true;
    bool record_steps = false;
    double convergence_uz = 0.8;  // m/s
    std::vector<int> convergence_grids{16, 32, 64, 128};
    int convergence_reference = 256;

    PhysicalConstants constants;
    json resolved;  // every parameter after defaulting, written to the manifest
};

ScenarioConfig parse_config(const json& j, const std::string& source_name = "<config>");
ScenarioConfig load_config(const std::string& path);
/// Applies a dotted-path override ("sequence.frames=10") onto raw JSON.
void apply_override(json& j, const std::string& assignment);

struct ProfilePoint {
    Vec3 r;
    Vec3 m;
};

struct RunOutput {
    std::map<std::string, FrameSeries> series;
    std::map<std::string, std::vector<SignalSample>> samples;
    std::vector<ProfilePoint> profile;
    std::vector<StepRecord> steps;  // step records of the last leg
    std::map<std::string, EnergyCheck> energy;
    std::map<std::string, double> scalars;  // named results (plateaus, counts, ...)
    ConvergenceReport convergence;
    json manifest;
};

RunOutput run_scenario(const ScenarioConfig& cfg);
RunOutput run_static_phantom(const ScenarioConfig& cfg);
RunOutput run_yuan_slice(const ScenarioConfig& cfg);
RunOutput run_through_plane(const ScenarioConfig& cfg);
RunOutput run_pulsatile(const ScenarioConfig& cfg);
/// Grid-refinement study on the yuan-slice setup; errors in L2(My) at the
/// recording time against the finest grid.
RunOutput run_convergence(const ScenarioConfig& cfg);
/// Velocity sweep: one through-plane series per entry, plateau summary.
RunOutput run_sweep(const ScenarioConfig& cfg);
/// Steady-state oracle comparison for every tube (or the single tissue).
RunOutput run_steady_state_check(const ScenarioConfig& cfg);

void write_outputs(const RunOutput& out, const std::string& dir);

/// Lower-level entry points shared by scenarios, tests and the acceptance
/// suite.
namespace detail {

struct FlashRun {
    FrameSeries series;
    std::vector<SignalSample> samples;
    std::vector<StepRecord> steps;
    std::vector<EnergySample> energy;
    std::vector<double> final_state;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t total_rhs_evals = 0;
};

/// Runs a full FLASH timeline on a DG state: per-repetition integration with
/// event snapping, echo sampling at TE, ideal spoiling between repetitions.
FlashRun run_flash_dg(const DGSpace& space, DGOperator& op, const SequenceTimeline& tl,
                      const Region& region, const SolverConfig& solver, bool collect_energy);

/// Same sequence driven on pointwise isochromats (u = 0 path).
FlashRun run_flash_isochromats(std::span<const Vec3> positions, std::span<const double> weights,
                               const TissueParams& tissue, const SequenceTimeline& tl,
                               const SolverConfig& solver, const PhysicalConstants& consts,
                               bool collect_energy);

/// Slice-selective excitation followed by the half-duration rewinder; state
/// recorded at the rewinder end.
SequenceTimeline build_yuan_timeline(const ScenarioConfig& cfg);

struct YuanRun {
    std::shared_ptr<DGSpace> space;
    std::vector<double> state;
    std::vector<StepRecord> records;
    std::vector<EnergySample> energy;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double pulse_peak = 0.0;
    double flip_integral = 0.0;
};

/// One yuan-slice leg. Overrides replace the config values when >= 0 / > 0.
YuanRun run_yuan_core(const ScenarioConfig& cfg, double uz, double penalty,
                      int cells_override = 0, const SolverConfig* solver_override = nullptr);

/// One through-plane FLASH run with the given velocity field.
FlashRun run_through_plane_core(const ScenarioConfig& cfg, const VelocityField& u);

double f_norm2_of(const TissueMap& tissue, const BoxMesh& mesh);

/// Periodic linear interpolation of a tabulated profile.
VelocityField pulsatile_velocity(std::vector<double> samples_m_s, double period);

}  // namespace detail

}  // namespace blochdg
