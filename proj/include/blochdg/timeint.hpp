#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace blochdg {

enum class Method { Rk2, Rk23, Rk45, SplitLie, SplitStrang };

Method method_from_string(const std::string& s);
const char* method_to_string(Method m);

struct SolverConfig {
    Method method = Method::Rk45;
    double rtol = 1e-6;
    double atol = 1e-8;
    double safety = 0.9;
    double min_factor = 0.2;
    double max_factor = 5.0;
    double max_step = std::numeric_limits<double>::infinity();
    double fixed_step = 0.0;   // required for rk2 and the split methods
    double initial_step = 0.0; // 0: choose automatically
    double min_step = 1e-14;   // abort when the controller drives tau below this
    double cfl = 1.0;          // advisory guard for fixed-step advection runs
    bool record_steps = true;

    void validate() const;
};

struct StepRecord {
    double t = 0.0;
    double tau = 0.0;
    bool accepted = true;
    double error_norm = 0.0;
    int rhs_evals = 0;
};

using RhsFn = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;
using ObserveFn = std::function<void(double t, std::span<const double> y)>;

struct IntegrateResult {
    std::vector<double> state;
    std::vector<StepRecord> records;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evals = 0;
    bool aborted = false;
    std::string abort_reason;
};

/// One step of the fixed two-stage scheme
///   y* = y + tau f(t, y),  y1 = (y + y*)/2 + tau/2 f(t + tau, y*).
void rk2_step(double t, double tau, std::span<const double> y, const RhsFn& rhs,
              std::span<double> out, std::vector<double>& work);

/// One embedded step (Bogacki-Shampine 3(2) or Dormand-Prince 5(4)); writes the
/// higher-order result to `out` and the componentwise embedded error to `err`.
/// `k1`, if non-null and valid, is reused (FSAL); on return it holds f(t+tau, out).
void embedded_step(Method method, double t, double tau, std::span<const double> y,
                   const RhsFn& rhs, std::span<double> out, std::span<double> err,
                   std::vector<double>& work, std::vector<double>* k1_fsal, int& evals);

/// Weighted RMS norm of the embedded error: sqrt(mean((err_i / s_i)^2)) with
/// s_i = atol + rtol * max(|y_i|, |y_new_i|). A step is accepted iff <= 1.
double error_norm(std::span<const double> err, std::span<const double> y_old,
                  std::span<const double> y_new, double atol, double rtol);

struct StepControl {
    bool accept = true;
    double tau_next = 0.0;
};

/// Elementary controller: accept iff norm <= 1 and propose
/// tau * clamp(safety * norm^(-1/(p+1)), min_factor, max_factor), where p is
/// the order of the embedded error estimate.
StepControl adapt_step(double norm, double tau, int error_order, const SolverConfig& cfg);

/// Advances y from t0 to t1. Steps never straddle an entry of `events`
/// (sorted ascending), and the integrator lands exactly on every entry of
/// `observe_times` (sorted), invoking `observe` there. Fixed-step methods walk
/// the grid t0 + n*fixed_step, splitting steps at events as needed.
/// `on_accept` fires after every accepted step (and once at t0).
IntegrateResult integrate(std::vector<double> y0, double t0, double t1, const RhsFn& rhs,
                          const SolverConfig& cfg, std::span<const double> events = {},
                          std::span<const double> observe_times = {},
                          const ObserveFn& observe = {}, const ObserveFn& on_accept = {});

/// One operator-splitting macro step over [t, t+tau]: Lie (advection then
/// reaction) or Strang (half advection, full reaction, half advection). The
/// sub-integrations run the embedded solver from `sub` with full step control.
std::vector<double> split_step(std::vector<double> y, double t, double tau, const RhsFn& adv_rhs,
                               const RhsFn& mag_rhs, Method mode, const SolverConfig& sub);

/// Split-method driver over [t0, t1] with macro step cfg.fixed_step; event and
/// observer handling as in integrate().
IntegrateResult integrate_split(std::vector<double> y0, double t0, double t1, const RhsFn& adv_rhs,
                                const RhsFn& mag_rhs, const SolverConfig& cfg,
                                std::span<const double> events = {},
                                std::span<const double> observe_times = {},
                                const ObserveFn& observe = {});

/// Fixed-step CFL guard tau * |u|max * (2k+1) / h <= cfl. Returns an empty
/// string when satisfied, otherwise a warning message.
std::string check_cfl(double tau, double max_speed, int degree, double h_min, double cfl);

}  // namespace blochdg
