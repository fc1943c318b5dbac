#include "blochdg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blochdg/csv.hpp"
#include "blochdg/units.hpp"

namespace blochdg {

namespace {

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

class ConfigReader {
  public:
    ConfigReader(const json& j, std::string source) : src_(std::move(source)) {
        stack_.push_back(&j);
    }

    bool has(const std::string& key) const { return top().contains(key); }

    template <typename T>
    T get(const std::string& key, const T& fallback) {
        record(key, top().contains(key) ? top().at(key) : json(fallback));
        if (!top().contains(key)) return fallback;
        return coerce<T>(key, top().at(key));
    }
    template <typename T>
    T require(const std::string& key) {
        if (!top().contains(key)) {
            throw ConfigError(src_ + ": missing required key '" + path(key) + "'");
        }
        record(key, top().at(key));
        return coerce<T>(key, top().at(key));
    }

    void enter(const std::string& key) {
        static const json empty = json::object();
        const json& t = top();
        if (t.contains(key) && t.at(key).is_object()) {
            stack_.push_back(&t.at(key));
        } else {
            stack_.push_back(&empty);
        }
        path_.push_back(key);
    }
    void leave() {
        stack_.pop_back();
        path_.pop_back();
    }

    json resolved;  // config with all defaults filled in

    [[noreturn]] void fail(const std::string& key, const std::string& why) const {
        throw ConfigError(src_ + ": key '" + path(key) + "': " + why);
    }

  private:
    const json& top() const { return *stack_.back(); }
    std::string path(const std::string& key) const {
        std::string p;
        for (const auto& s : path_) p += s + ".";
        return p + key;
    }
    void record(const std::string& key, const json& v) {
        json* node = &resolved;
        for (const auto& s : path_) node = &((*node)[s]);
        (*node)[key] = v;
    }
    template <typename T>
    T coerce(const std::string& key, const json& v) const {
        try {
            return v.get<T>();
        } catch (const json::exception& e) {
            fail(key, std::string("wrong type (") + e.what() + ")");
        }
    }

    std::string src_;
    std::vector<const json*> stack_;
    std::vector<std::string> path_;
};

GeometryConfig parse_geometry(ConfigReader& r) {
    GeometryConfig g;
    r.enter("geometry");
    g.dimension = r.get<int>("dimension", 1);
    if (g.dimension != 1 && g.dimension != 3) r.fail("dimension", "must be 1 or 3");
    const json extents = r.get<json>("extent_mm", json::array({json::array({-9.0, 9.0})}));
    const json cells = r.get<json>("cells", json::array({27}));
    if (g.dimension == 1) {
        if (!extents.is_array() || extents.size() != 1 || extents[0].size() != 2) {
            r.fail("extent_mm", "1D geometry needs [[lo, hi]]");
        }
        if (!cells.is_array() || cells.size() != 1) r.fail("cells", "1D geometry needs [n]");
        g.lo = {0, 0, units::mm_to_m(extents[0][0].get<double>())};
        g.hi = {0, 0, units::mm_to_m(extents[0][1].get<double>())};
        g.cells = {cells[0].get<int>(), 1, 1};
    } else {
        if (!extents.is_array() || extents.size() != 3) {
            r.fail("extent_mm", "3D geometry needs [[xlo,xhi],[ylo,yhi],[zlo,zhi]]");
        }
        if (!cells.is_array() || cells.size() != 3) r.fail("cells", "3D geometry needs [nx,ny,nz]");
        const auto ext = [&](int a, int s) { return units::mm_to_m(extents[a][s].get<double>()); };
        g.lo = {ext(0, 0), ext(1, 0), ext(2, 0)};
        g.hi = {ext(0, 1), ext(1, 1), ext(2, 1)};
        g.cells = {cells[0].get<int>(), cells[1].get<int>(), cells[2].get<int>()};
    }
    r.leave();
    return g;
}

FlashParams parse_sequence(ConfigReader& r, std::uint64_t seed) {
    FlashParams p;
    r.enter("sequence");
    p.tr = units::ms_to_s(r.get<double>("tr_ms", 2.18));
    p.te = units::ms_to_s(r.get<double>("te_ms", 1.28));
    p.flip = units::deg_to_rad(r.get<double>("flip_deg", 8.0));
    p.spokes_per_frame = r.get<int>("spokes_per_frame", 27);
    p.frames = r.get<int>("frames", 100);
    p.g_slice = units::mtesla_per_m_to_tesla_per_m(r.get<double>("g_slice_mT_m", 0.0));
    p.g_readout = units::mtesla_per_m_to_tesla_per_m(r.get<double>("g_readout_mT_m", 10.0));
    p.slice_thickness = units::mm_to_m(r.get<double>("slice_thickness_mm", 6.0));
    p.fov = units::mm_to_m(r.get<double>("fov_mm", 40.0));
    p.rf_duration = units::ms_to_s(r.get<double>("rf_duration_ms", 0.0));
    p.rf_zero_crossing_pairs = r.get<int>("rf_zero_crossing_pairs", 3);
    p.rf_samples = r.get<int>("rf_samples", 129);
    p.readout_duration = units::ms_to_s(r.get<double>("readout_duration_ms", 0.0));
    p.ramp_time = units::ms_to_s(r.get<double>("ramp_time_ms", 0.0));
    const std::string sp = r.get<std::string>("spoiling", "ideal");
    try {
        p.spoiling = spoiling_from_string(sp);
    } catch (const std::invalid_argument& e) {
        r.fail("spoiling", e.what());
    }
    const std::string ord = r.get<std::string>("spoke_ordering", "sequential");
    if (ord == "sequential") {
        p.ordering = SpokeOrdering::Sequential;
    } else if (ord == "golden") {
        p.ordering = SpokeOrdering::GoldenAngle;
    } else {
        r.fail("spoke_ordering", "must be 'sequential' or 'golden'");
    }
    p.seed = seed;
    r.leave();
    return p;
}

SolverConfig parse_solver(ConfigReader& r) {
    SolverConfig s;
    r.enter("solver");
    const std::string m = r.get<std::string>("method", "rk45");
    try {
        s.method = method_from_string(m);
    } catch (const std::invalid_argument& e) {
        r.fail("method", e.what());
    }
    s.rtol = r.get<double>("rtol", 1e-6);
    s.atol = r.get<double>("atol", 1e-8);
    s.safety = r.get<double>("safety", 0.9);
    s.min_factor = r.get<double>("min_factor", 0.2);
    s.max_factor = r.get<double>("max_factor", 5.0);
    const double ms = r.get<double>("max_step_ms", 0.0);
    if (ms > 0.0) s.max_step = units::ms_to_s(ms);
    s.fixed_step = units::ms_to_s(r.get<double>("fixed_step_ms", 0.0));
    s.cfl = r.get<double>("cfl", 1.0);
    r.leave();
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    return s;
}

json make_manifest(const ScenarioConfig& cfg) {
    json m;
    m["config"] = cfg.resolved;
    m["seed"] = cfg.seed;
    m["version"] = "0.1.0";
    m["gamma_rad_s_t"] = cfg.constants.gamma;
    return m;
}

EnergyCheck run_energy_check(const std::vector<EnergySample>& samples, const TissueMap& tissue,
                             const BoxMesh& mesh) {
    double t1_max = 0.0;
    for (const auto& r : tissue.regions) t1_max = std::max(t1_max, r.t1);
    const double sigma = 1.0 / t1_max;
    return check_energy_inequality(samples, sigma, detail::f_norm2_of(tissue, mesh));
}

}  // namespace

BoxMesh GeometryConfig::make_mesh() const {
    if (dimension == 1) return BoxMesh(lo.z, hi.z, cells[0]);
    return BoxMesh(lo, hi, cells);
}

BoxMesh GeometryConfig::make_mesh(int cells_override) const {
    if (dimension != 1) throw std::invalid_argument("cell-count override requires a 1D geometry");
    return BoxMesh(lo.z, hi.z, cells_override);
}

ScenarioConfig parse_config(const json& j, const std::string& source_name) {
    if (!j.is_object()) throw ConfigError(source_name + ": config root must be an object");
    ConfigReader r(j, source_name);
    ScenarioConfig c;
    c.scenario = r.require<std::string>("scenario");
    const bool known = c.scenario == "static-phantom" || c.scenario == "yuan-slice" ||
                       c.scenario == "through-plane" || c.scenario == "pulsatile" ||
                       c.scenario == "custom";
    if (!known) r.fail("scenario", "unknown scenario '" + c.scenario + "'");
    c.seed = r.get<std::uint64_t>("seed", 0);

    const double freq = r.get<double>("proton_frequency_mhz_per_t", kProtonFreqHzPerTesla / 1e6);
    if (!(freq > 0.0)) r.fail("proton_frequency_mhz_per_t", "must be > 0");
    c.constants = PhysicalConstants::from_frequency_hz_per_tesla(freq * 1e6);

    c.geometry = parse_geometry(r);

    r.enter("tissue");
    c.tissue.t1 = units::ms_to_s(r.get<double>("t1_ms", 2700.0));
    c.tissue.t2 = units::ms_to_s(r.get<double>("t2_ms", 2100.0));
    c.tissue.m0 = r.get<double>("m0", 1.0);
    r.leave();
    try {
        c.tissue.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source_name + ": tissue: " + e.what());
    }

    if (r.has("tubes")) {
        const json tubes = r.get<json>("tubes", json::array());
        for (const auto& t : tubes) {
            TubeRow row;
            row.label = t.value("label", std::string("tube") + std::to_string(c.tubes.size()));
            if (!t.contains("t1_ms") || !t.contains("t2_ms")) {
                r.fail("tubes", "each tube needs t1_ms and t2_ms");
            }
            row.t1 = units::ms_to_s(t.at("t1_ms").get<double>());
            row.t2 = units::ms_to_s(t.at("t2_ms").get<double>());
            if (!(row.t1 >= row.t2 && row.t2 > 0.0)) {
                r.fail("tubes", "tube '" + row.label + "' violates t1 >= t2 > 0");
            }
            c.tubes.push_back(row);
        }
    }

    c.sequence = parse_sequence(r, c.seed);

    r.enter("pulse");
    c.pulse_flip = units::deg_to_rad(r.get<double>("flip_deg", 90.0));
    c.pulse_duration = units::ms_to_s(r.get<double>("duration_ms", 2.6794));
    c.pulse_g_slice = units::gauss_per_cm_to_tesla_per_m(r.get<double>("g_slice_gauss_cm", 1.0));
    c.pulse_reference_amplitude = units::gauss_to_tesla(r.get<double>("amplitude_gauss", 0.1750));
    c.pulse_pairs = r.get<int>("zero_crossing_pairs", 4);
    c.pulse_samples = r.get<int>("samples", 129);
    r.leave();

    r.enter("velocity");
    if (r.has("uz_mm_s")) c.uz = units::mm_per_s_to_m_per_s(r.get<double>("uz_mm_s", 0.0));
    if (r.has("sweep_mm_s")) {
        for (const auto& v : r.get<json>("sweep_mm_s", json::array())) {
            c.sweep.push_back(units::mm_per_s_to_m_per_s(v.get<double>()));
        }
    }
    if (r.has("profile")) {
        const json prof = r.get<json>("profile", json::object());
        if (!prof.contains("period_s") || !prof.contains("samples_mm_s")) {
            r.fail("profile", "needs period_s and samples_mm_s");
        }
        c.profile_period = prof.at("period_s").get<double>();
        for (const auto& v : prof.at("samples_mm_s")) {
            c.profile_samples.push_back(units::mm_per_s_to_m_per_s(v.get<double>()));
        }
        if (c.profile_period <= 0.0 || c.profile_samples.size() < 2) {
            r.fail("profile", "period must be > 0 with at least 2 samples");
        }
    }
    r.leave();

    c.solver = parse_solver(r);

    r.enter("dg");
    c.degree = r.get<int>("degree", 2);
    c.penalty = r.get<double>("penalty", 5e-4);
    if (c.degree < 0 || c.degree > 7) r.fail("degree", "supported range is 0..7");
    if (c.penalty < 0.0) r.fail("penalty", "must be >= 0");
    r.leave();

    c.engine = r.get<std::string>("engine", "isochromat");
    if (c.engine != "isochromat" && c.engine != "dg") r.fail("engine", "must be isochromat or dg");

    r.enter("signal");
    if (r.has("region_mm")) {
        const json reg = r.get<json>("region_mm", json::array());
        if (!reg.is_array() || reg.size() != 3) {
            r.fail("region_mm", "needs [[xlo,xhi],[ylo,yhi],[zlo,zhi]]");
        }
        const auto gg = [&](int a, int s) { return units::mm_to_m(reg[a][s].get<double>()); };
        c.signal_region.lo = {gg(0, 0), gg(1, 0), gg(2, 0)};
        c.signal_region.hi = {gg(0, 1), gg(1, 1), gg(2, 1)};
    }
    c.plateau_frames = r.get<int>("plateau_frames", 20);
    r.leave();

    c.energy_check = r.get<bool>("energy_check", true);
    c.record_steps = r.get<bool>("record_steps", false);

    r.enter("convergence");
    c.convergence_uz = units::mm_per_s_to_m_per_s(r.get<double>("uz_mm_s", 800.0));
    if (r.has("grids")) {
        c.convergence_grids.clear();
        for (const auto& g : r.get<json>("grids", json::array())) {
            c.convergence_grids.push_back(g.get<int>());
        }
    } else {
        r.get<json>("grids", json(c.convergence_grids));
    }
    c.convergence_reference = r.get<int>("reference", 256);
    r.leave();

    c.resolved = r.resolved;
    c.resolved["scenario"] = c.scenario;
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j, path);
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const std::string keypath = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json* node = &j;
    std::istringstream ks(keypath);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);
    json v;
    try {
        v = json::parse(value);
    } catch (const json::parse_error&) {
        v = value;  // plain string
    }
    (*node)[parts.back()] = v;
}

// ---------------------------------------------------------------------------
// shared run machinery
// ---------------------------------------------------------------------------

namespace detail {

double f_norm2_of(const TissueMap& tissue, const BoxMesh& mesh) {
    double acc = 0.0;
    for (int c = 0; c < mesh.cells(); ++c) {
        const TissueParams& t = tissue.of(c);
        const double rate = t.m0 / t.t1;
        acc += rate * rate * mesh.cell_volume();
    }
    return acc;
}

VelocityField pulsatile_velocity(std::vector<double> samples_m_s, double period) {
    if (samples_m_s.size() < 2 || period <= 0.0) {
        throw std::invalid_argument("pulsatile_velocity: need >= 2 samples and period > 0");
    }
    auto fn = [samples = std::move(samples_m_s), period](double t) {
        const size_t n = samples.size();
        double phase = std::fmod(t / period, 1.0);
        if (phase < 0.0) phase += 1.0;
        const double x = phase * double(n);  // samples wrap around the period
        const size_t i = std::min(size_t(x), n - 1);
        const double w = x - double(i);
        const double a = samples[i];
        const double b = samples[(i + 1) % n];
        return a + w * (b - a);
    };
    return VelocityField::axial_z(std::move(fn));
}

FlashRun run_flash_dg(const DGSpace& space, DGOperator& op, const SequenceTimeline& tl,
                      const Region& region, const SolverConfig& solver, bool collect_energy) {
    FlashRun out;
    const auto cells = region_cells(space, region);
    std::vector<double> state = space.constant_state({0.0, 0.0, 1.0});
    const int nb = space.nb();
    const auto& events = tl.event_times();

    RhsFn rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
        op.apply(t, y, dy);
    };
    ObserveFn on_accept;
    if (collect_energy) {
        on_accept = [&](double t, std::span<const double> y) {
            const auto be = op.boundary_energy(t, y);
            out.energy.push_back({t, space.l2_norm2(y), be.outflow_m2, be.inflow_data2});
        };
    }

    int current_rep = 0;
    ObserveFn observe = [&](double t, std::span<const double> y) {
        std::complex<double> s = integrate_signal(space, y, cells);
        s *= std::exp(std::complex<double>(0.0, -tl.repetition_phase(current_rep)));
        out.samples.push_back(
            {t, s, current_rep % tl.spokes_per_frame, current_rep / tl.spokes_per_frame});
    };

    for (int rep = 0; rep < tl.repetitions; ++rep) {
        current_rep = rep;
        const double t0 = tl.tr * rep;
        const double t1 = tl.tr * (rep + 1);
        const double obs[1] = {t0 + tl.te};
        auto res =
            integrate(std::move(state), t0, t1, rhs, solver, events, obs, observe, on_accept);
        if (res.aborted) {
            throw std::runtime_error("run_flash_dg: integration aborted in repetition " +
                                     std::to_string(rep) + ": " + res.abort_reason);
        }
        state = std::move(res.state);
        out.accepted += res.accepted;
        out.rejected += res.rejected;
        out.total_rhs_evals += res.rhs_evals;
        if (solver.record_steps) {
            out.steps.insert(out.steps.end(), res.records.begin(), res.records.end());
        }
        if (tl.spoiling == SpoilingMode::Ideal) {
            for (int c = 0; c < space.mesh().cells(); ++c) {
                double* cc = state.data() + space.cell_offset(c);
                std::fill(cc, cc + 2 * nb, 0.0);  // zero the Mx and My blocks
            }
        }
    }
    out.series = frame_average(out.samples, tl.spokes_per_frame);
    out.final_state = std::move(state);
    return out;
}

FlashRun run_flash_isochromats(std::span<const Vec3> positions, std::span<const double> weights,
                               const TissueParams& tissue, const SequenceTimeline& tl,
                               const SolverConfig& solver, const PhysicalConstants& consts,
                               bool collect_energy) {
    FlashRun out;
    const size_t n = positions.size();
    if (n == 0 || n != weights.size()) {
        throw std::invalid_argument("run_flash_isochromats: empty or mismatched isochromat set");
    }
    std::vector<double> state(3 * n, 0.0);
    for (size_t i = 0; i < n; ++i) state[3 * i + 2] = 1.0;
    const auto& events = tl.event_times();

    RhsFn rhs = [&, n](double t, std::span<const double> y, std::span<double> dy) {
        const FieldSample fs = tl.field_at(t);
        for (size_t i = 0; i < n; ++i) {
            const Vec3 m{y[3 * i], y[3 * i + 1], y[3 * i + 2]};
            const Vec3 r = bloch_rhs_unchecked(m, fs.at(positions[i]), tissue, consts);
            dy[3 * i] = r.x;
            dy[3 * i + 1] = r.y;
            dy[3 * i + 2] = r.z;
        }
    };
    ObserveFn on_accept;
    if (collect_energy) {
        on_accept = [&, n](double t, std::span<const double> y) {
            double norm2 = 0.0;
            for (size_t i = 0; i < n; ++i) {
                norm2 += weights[i] * (y[3 * i] * y[3 * i] + y[3 * i + 1] * y[3 * i + 1] +
                                       y[3 * i + 2] * y[3 * i + 2]);
            }
            out.energy.push_back({t, norm2, 0.0, 0.0});
        };
    }

    int current_rep = 0;
    ObserveFn observe = [&, n](double t, std::span<const double> y) {
        double re = 0.0, im = 0.0;
        for (size_t i = 0; i < n; ++i) {
            re += weights[i] * y[3 * i];
            im += weights[i] * y[3 * i + 1];
        }
        std::complex<double> s{re, im};
        s *= std::exp(std::complex<double>(0.0, -tl.repetition_phase(current_rep)));
        out.samples.push_back(
            {t, s, current_rep % tl.spokes_per_frame, current_rep / tl.spokes_per_frame});
    };

    for (int rep = 0; rep < tl.repetitions; ++rep) {
        current_rep = rep;
        const double t0 = tl.tr * rep;
        const double t1 = tl.tr * (rep + 1);
        const double obs[1] = {t0 + tl.te};
        auto res =
            integrate(std::move(state), t0, t1, rhs, solver, events, obs, observe, on_accept);
        if (res.aborted) {
            throw std::runtime_error("run_flash_isochromats: aborted in repetition " +
                                     std::to_string(rep) + ": " + res.abort_reason);
        }
        state = std::move(res.state);
        out.accepted += res.accepted;
        out.rejected += res.rejected;
        out.total_rhs_evals += res.rhs_evals;
        if (solver.record_steps) {
            out.steps.insert(out.steps.end(), res.records.begin(), res.records.end());
        }
        if (tl.spoiling == SpoilingMode::Ideal) {
            for (size_t i = 0; i < n; ++i) {
                state[3 * i] = 0.0;
                state[3 * i + 1] = 0.0;
            }
        }
    }
    out.series = frame_average(out.samples, tl.spokes_per_frame);
    out.final_state = std::move(state);
    return out;
}

SequenceTimeline build_yuan_timeline(const ScenarioConfig& cfg) {
    const double tp = cfg.pulse_duration;
    const double g = cfg.pulse_g_slice;
    SequenceTimeline tl;
    tl.tr = 1.5 * tp;  // pulse plus half-duration rewinder
    tl.te = 1.5 * tp;  // recording instant: end of the rewinder
    tl.repetitions = 1;
    tl.spokes_per_frame = 1;
    tl.rf =
        blackman_sinc_pulse(tp, cfg.pulse_flip, cfg.pulse_pairs, cfg.pulse_samples, cfg.constants);
    tl.rf_events.push_back({0.0, 0.0, 0});
    tl.spoke_angles.push_back(0.0);
    tl.spoiling = SpoilingMode::None;
    WaveformBuilder bz;
    bz.rect(0.0, tp, g);
    bz.rect(tp, 1.5 * tp, -g);  // full amplitude, half duration: nulls the moment
                                // accumulated since the pulse center
    tl.gz = bz.build();
    tl.te_markers.push_back({tl.te, 0, 0});
    tl.finalize();
    return tl;
}

YuanRun run_yuan_core(const ScenarioConfig& cfg, double uz, double penalty, int cells_override,
                      const SolverConfig* solver_override) {
    YuanRun out;
    const BoxMesh mesh =
        cells_override > 0 ? cfg.geometry.make_mesh(cells_override) : cfg.geometry.make_mesh();
    out.space = std::make_shared<DGSpace>(mesh, cfg.degree);
    SequenceTimeline tl = build_yuan_timeline(cfg);
    out.pulse_peak = tl.rf.peak_amplitude;
    out.flip_integral = tl.rf.flip_integral(cfg.constants);

    TissueMap tm = TissueMap::uniform(cfg.tissue);
    VelocityField u =
        uz != 0.0 ? VelocityField::axial_z([uz](double) { return uz; }) : VelocityField::zero();
    DGOperator op(*out.space, tm, u, BoundaryData{}, cfg.constants,
                  penalty >= 0.0 ? penalty : cfg.penalty);
    op.set_timeline(&tl);

    RhsFn rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
        op.apply(t, y, dy);
    };
    ObserveFn on_accept;
    if (cfg.energy_check) {
        on_accept = [&](double t, std::span<const double> y) {
            const auto be = op.boundary_energy(t, y);
            out.energy.push_back({t, out.space->l2_norm2(y), be.outflow_m2, be.inflow_data2});
        };
    }
    SolverConfig solver = solver_override ? *solver_override : cfg.solver;
    solver.record_steps = true;
    if (solver.method == Method::Rk2 && solver.fixed_step > 0.0) {
        const std::string warn =
            check_cfl(solver.fixed_step, op.max_speed(0.0), cfg.degree, mesh.min_spacing(),
                      solver.cfl);
        if (!warn.empty()) std::fprintf(stderr, "warning: %s\n", warn.c_str());
    }
    auto res = integrate(out.space->constant_state({0.0, 0.0, 1.0}), 0.0, tl.te, rhs, solver,
                         tl.event_times(), {}, {}, on_accept);
    if (res.aborted) throw std::runtime_error("run_yuan_core: " + res.abort_reason);
    out.state = std::move(res.state);
    out.records = std::move(res.records);
    out.accepted = res.accepted;
    out.rejected = res.rejected;
    return out;
}

FlashRun run_through_plane_core(const ScenarioConfig& cfg, const VelocityField& u) {
    const BoxMesh mesh = cfg.geometry.make_mesh();
    DGSpace space(mesh, cfg.degree);
    SequenceTimeline tl = build_flash_radial(cfg.sequence, cfg.constants);
    TissueMap tm = TissueMap::uniform(cfg.tissue);
    DGOperator op(space, tm, u, BoundaryData{}, cfg.constants, cfg.penalty);
    op.set_timeline(&tl);
    SolverConfig solver = cfg.solver;
    solver.record_steps = cfg.record_steps;
    return run_flash_dg(space, op, tl, cfg.signal_region, solver, cfg.energy_check);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scenario entry points
// ---------------------------------------------------------------------------

RunOutput run_static_phantom(const ScenarioConfig& cfg) {
    RunOutput out;
    out.manifest = make_manifest(cfg);
    const BoxMesh mesh = cfg.geometry.make_mesh();
    SequenceTimeline tl = build_flash_radial(cfg.sequence, cfg.constants);

    std::vector<TubeRow> tubes = cfg.tubes;
    if (tubes.empty()) tubes.push_back({"tissue", cfg.tissue.t1, cfg.tissue.t2});

    SolverConfig solver = cfg.solver;
    solver.record_steps = cfg.record_steps;

    for (const auto& tube : tubes) {
        TissueParams tissue{tube.t1, tube.t2, cfg.tissue.m0};
        detail::FlashRun run;
        if (cfg.engine == "dg") {
            DGSpace space(mesh, cfg.degree);
            TissueMap tm = TissueMap::uniform(tissue);
            DGOperator op(space, tm, VelocityField::zero(), BoundaryData{}, cfg.constants,
                          cfg.penalty);
            op.set_timeline(&tl);
            run = detail::run_flash_dg(space, op, tl, cfg.signal_region, solver, cfg.energy_check);
        } else {
            std::vector<Vec3> pos(mesh.cells());
            for (int c = 0; c < mesh.cells(); ++c) pos[c] = mesh.cell_center(c);
            std::vector<double> w(mesh.cells(), mesh.cell_volume());
            run = detail::run_flash_isochromats(pos, w, tissue, tl, solver, cfg.constants,
                                                cfg.energy_check);
        }
        const std::string key = "tube:" + tube.label;
        normalize(run.series, plateau(run.series, cfg.plateau_frames));
        out.scalars["plateau:" + tube.label] = run.series.reference;
        out.scalars["accepted_steps:" + tube.label] = double(run.accepted);
        if (cfg.energy_check) {
            out.energy[key] = run_energy_check(run.energy, TissueMap::uniform(tissue), mesh);
        }
        if (cfg.record_steps) out.steps = std::move(run.steps);
        out.series[key] = std::move(run.series);
        out.samples[key] = std::move(run.samples);
    }
    return out;
}

RunOutput run_yuan_slice(const ScenarioConfig& cfg) {
    RunOutput out;
    out.manifest = make_manifest(cfg);
    const double uz = cfg.uz.value_or(0.0);
    auto run = detail::run_yuan_core(cfg, uz, cfg.penalty);
    const DGSpace& space = *run.space;
    const BoxMesh& mesh = space.mesh();

    for (int c = 0; c < mesh.cells(); ++c) {
        const Vec3 center = mesh.cell_center(c);
        for (const Vec3& off : space.xq_vol()) {
            const Vec3 r = center + off;
            out.profile.push_back({r, space.eval(run.state, c, r)});
        }
    }
    std::sort(out.profile.begin(), out.profile.end(),
              [](const ProfilePoint& a, const ProfilePoint& b) { return a.r.z < b.r.z; });

    out.steps = std::move(run.records);
    out.scalars["accepted_steps"] = double(run.accepted);
    out.scalars["rejected_steps"] = double(run.rejected);
    out.scalars["uz_m_s"] = uz;
    out.scalars["pulse_peak_t"] = run.pulse_peak;
    out.scalars["pulse_reference_t"] = cfg.pulse_reference_amplitude;
    out.scalars["pulse_peak_vs_reference"] = run.pulse_peak / cfg.pulse_reference_amplitude;
    out.scalars["flip_integral_rad"] = run.flip_integral;
    if (cfg.energy_check) {
        out.energy["run"] =
            run_energy_check(run.energy, TissueMap::uniform(cfg.tissue), mesh);
    }
    return out;
}

RunOutput run_through_plane(const ScenarioConfig& cfg) {
    RunOutput out;
    out.manifest = make_manifest(cfg);
    std::vector<double> velocities = cfg.sweep;
    if (velocities.empty()) velocities.push_back(cfg.uz.value_or(0.0));
    const BoxMesh mesh = cfg.geometry.make_mesh();

    for (double uz : velocities) {
        VelocityField u = uz != 0.0 ? VelocityField::axial_z([uz](double) { return uz; })
                                    : VelocityField::zero();
        auto run = detail::run_through_plane_core(cfg, u);
        char key[64];
        std::snprintf(key, sizeof key, "uz:%.6g", units::m_per_s_to_mm_per_s(uz));
        normalize(run.series, plateau(run.series, cfg.plateau_frames));
        out.scalars[std::string("plateau:") + key] = run.series.reference;
        out.scalars[std::string("accepted_steps:") + key] = double(run.accepted);
        if (cfg.energy_check) {
            out.energy[key] = run_energy_check(run.energy, TissueMap::uniform(cfg.tissue), mesh);
        }
        if (cfg.record_steps) out.steps = std::move(run.steps);
        out.series[key] = std::move(run.series);
        out.samples[key] = std::move(run.samples);
    }
    return out;
}

RunOutput run_pulsatile(const ScenarioConfig& cfg) {
    RunOutput out;
    out.manifest = make_manifest(cfg);
    if (cfg.profile_samples.empty()) {
        throw ConfigError("pulsatile scenario requires velocity.profile");
    }
    const BoxMesh mesh = cfg.geometry.make_mesh();
    VelocityField u = detail::pulsatile_velocity(cfg.profile_samples, cfg.profile_period);
    auto run = detail::run_through_plane_core(cfg, u);
    normalize(run.series, plateau(run.series, cfg.plateau_frames));
    out.scalars["plateau"] = run.series.reference;
    out.scalars["accepted_steps"] = double(run.accepted);
    out.scalars["profile_period_s"] = cfg.profile_period;
    if (cfg.energy_check) {
        out.energy["run"] = run_energy_check(run.energy, TissueMap::uniform(cfg.tissue), mesh);
    }
    if (cfg.record_steps) out.steps = std::move(run.steps);
    out.series["pulsatile"] = std::move(run.series);
    out.samples["pulsatile"] = std::move(run.samples);
    return out;
}

RunOutput run_convergence(const ScenarioConfig& cfg) {
    RunOutput out;
    out.manifest = make_manifest(cfg);
    const double uz = cfg.convergence_uz;
    auto ref = detail::run_yuan_core(cfg, uz, cfg.penalty, cfg.convergence_reference);

    std::vector<double> hs, errs, errs_inf;
    for (int n : cfg.convergence_grids) {
        auto run = detail::run_yuan_core(cfg, uz, cfg.penalty, n);
        const DGSpace& sp = *run.space;
        const BoxMesh& mesh = sp.mesh();
        double e2 = 0.0, einf = 0.0;
        for (int c = 0; c < mesh.cells(); ++c) {
            const Vec3 center = mesh.cell_center(c);
            for (int q = 0; q < sp.nq_vol(); ++q) {
                const Vec3 r = center + sp.xq_vol()[q];
                const double my = sp.eval(run.state, c, r).y;
                const double my_ref =
                    ref.space->eval(ref.state, ref.space->locate(r), r).y;
                const double d = my - my_ref;
                e2 += sp.w_vol()[q] * d * d;
                einf = std::max(einf, std::abs(d));
            }
        }
        hs.push_back(mesh.spacing(0));
        errs.push_back(std::sqrt(e2));
        errs_inf.push_back(einf);
    }
    out.convergence = convergence_order(hs, errs, errs_inf);
    out.scalars["observed_order"] = out.convergence.observed_order;
    out.scalars["uz_m_s"] = uz;
    return out;
}

RunOutput run_sweep(const ScenarioConfig& cfg) {
    RunOutput out = run_through_plane(cfg);
    return out;
}

RunOutput run_steady_state_check(const ScenarioConfig& cfg) {
    RunOutput out = run_static_phantom(cfg);
    const double volume = cfg.geometry.make_mesh().domain_volume();
    std::vector<TubeRow> tubes = cfg.tubes;
    if (tubes.empty()) tubes.push_back({"tissue", cfg.tissue.t1, cfg.tissue.t2});
    double worst = 0.0;
    for (const auto& tube : tubes) {
        const TissueParams tissue{tube.t1, tube.t2, cfg.tissue.m0};
        const auto oracle =
            spoiled_steady_state(tissue, cfg.sequence.tr, cfg.sequence.te, cfg.sequence.flip);
        const double sim = out.scalars.at("plateau:" + tube.label) / volume;
        const double rel = std::abs(sim - oracle.signal) / oracle.signal;
        out.scalars["oracle:" + tube.label] = oracle.signal;
        out.scalars["sim_per_volume:" + tube.label] = sim;
        out.scalars["rel_err:" + tube.label] = rel;
        worst = std::max(worst, rel);
    }
    out.scalars["max_rel_err"] = worst;
    return out;
}

RunOutput run_scenario(const ScenarioConfig& cfg) {
    if (cfg.scenario == "static-phantom") return run_static_phantom(cfg);
    if (cfg.scenario == "yuan-slice") return run_yuan_slice(cfg);
    if (cfg.scenario == "through-plane" || cfg.scenario == "custom") {
        return run_through_plane(cfg);
    }
    if (cfg.scenario == "pulsatile") return run_pulsatile(cfg);
    throw ConfigError("run_scenario: unhandled scenario '" + cfg.scenario + "'");
}

// ---------------------------------------------------------------------------
// output files
// ---------------------------------------------------------------------------

namespace {

std::string sanitize(const std::string& key) {
    std::string s = key;
    for (char& c : s) {
        if (c == ':' || c == '/' || c == ' ') c = '_';
    }
    return s;
}

}  // namespace

void write_outputs(const RunOutput& out, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    for (const auto& [key, series] : out.series) {
        CsvWriter w(dir + "/frames_" + sanitize(key) + ".csv");
        w.header("frame,magnitude,normalized_magnitude");
        for (size_t i = 0; i < series.magnitude.size(); ++i) {
            w.field(int(i)).field(series.magnitude[i]).field(series.normalized[i]);
            w.endrow();
        }
    }
    for (const auto& [key, samples] : out.samples) {
        CsvWriter w(dir + "/samples_" + sanitize(key) + ".csv");
        w.header("t,re,im,spoke,frame");
        for (const auto& s : samples) {
            w.field(s.t).field(s.value.real()).field(s.value.imag()).field(s.spoke).field(s.frame);
            w.endrow();
        }
    }
    if (!out.profile.empty()) {
        CsvWriter w(dir + "/profile.csv");
        w.header("x,y,z,mx,my,mz");
        for (const auto& p : out.profile) {
            w.field(p.r.x).field(p.r.y).field(p.r.z).field(p.m.x).field(p.m.y).field(p.m.z);
            w.endrow();
        }
    }
    if (!out.steps.empty()) {
        CsvWriter w(dir + "/steps.csv");
        w.header("t,tau,accepted,error_norm");
        for (const auto& s : out.steps) {
            w.field(s.t).field(s.tau).field(int(s.accepted)).field(s.error_norm);
            w.endrow();
        }
    }
    if (!out.convergence.h.empty()) {
        CsvWriter w(dir + "/convergence.csv");
        w.header("h,error_l2_my,error_linf_my,observed_order");
        for (size_t i = 0; i < out.convergence.h.size(); ++i) {
            w.field(out.convergence.h[i]).field(out.convergence.error[i]);
            w.field(i < out.convergence.error_linf.size() ? out.convergence.error_linf[i] : 0.0);
            w.field(out.convergence.observed_order);
            w.endrow();
        }
    }
    if (!out.energy.empty()) {
        CsvWriter w(dir + "/energy.csv");
        w.header("key,pass,conclusive,min_margin,worst_ratio,samples");
        for (const auto& [key, e] : out.energy) {
            w.field(key).field(int(e.pass)).field(int(e.conclusive));
            w.field(e.min_margin).field(e.worst_ratio).field(double(e.samples));
            w.endrow();
        }
    }
    if (!out.scalars.empty()) {
        CsvWriter w(dir + "/summary.csv");
        w.header("name,value");
        for (const auto& [k, v] : out.scalars) {
            w.field(k).field(v);
            w.endrow();
        }
    }
    std::ofstream mf(dir + "/manifest.json");
    mf << out.manifest.dump(2) << "\n";
}

}  // namespace blochdg
