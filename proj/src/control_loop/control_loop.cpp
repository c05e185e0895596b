#include "fibersync/control_loop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "fibersync/csv.hpp"
#include "fibersync/signal_core.hpp"

namespace fibersync::control {

namespace {

constexpr double kPi = std::numbers::pi;

// Loop-shape constants for for_unity_gain, relative to the crossing
// frequency w: |L| = |d - c/w^2 - j*a/w| = 1 at the design crossing.
constexpr double kIntegralShape = 1.2;      // c / w^2
constexpr double kDerivativeShape = 0.5;    // d
// a / w from (c/w^2 - d)^2 + (a/w)^2 = 1
const double kProportionalShape =
    std::sqrt(1.0 - (kIntegralShape - kDerivativeShape) * (kIntegralShape - kDerivativeShape));

double lag_coefficient(double bandwidth, double dt) { return -std::expm1(-2.0 * kPi * bandwidth * dt); }

}  // namespace

double round_trip_error(double odl_phase, double link_phase) noexcept { return 2.0 * odl_phase + 2.0 * link_phase; }

double error_signal(double round_trip_phase) noexcept { return round_trip_phase; }

double phase_to_delay(double phase, double period) {
    if (!(period > 0.0)) {
        throw InvalidArgument("phase_to_delay: period must be positive");
    }
    return phase / (2.0 * kPi) * period;
}

double delay_to_phase(double delay, double period) {
    if (!(period > 0.0)) {
        throw InvalidArgument("delay_to_phase: period must be positive");
    }
    return delay / period * (2.0 * kPi);
}

void PidConfig::validate() const {
    if (!(update_rate > 0.0)) {
        throw InvalidArgument("PidConfig: update rate must be positive");
    }
    if (!(integrator_limit > 0.0)) {
        throw InvalidArgument("PidConfig: integrator limit must be positive");
    }
    if (!std::isfinite(kp) || !std::isfinite(ki) || !std::isfinite(kd)) {
        throw InvalidArgument("PidConfig: gains must be finite");
    }
}

PidConfig PidConfig::for_unity_gain(double unity_gain_hz, double rf_hz, double update_rate, double integrator_limit) {
    if (!(unity_gain_hz > 0.0) || !(rf_hz > 0.0) || !(update_rate > 0.0)) {
        throw InvalidArgument("PidConfig::for_unity_gain: frequencies must be positive");
    }
    const double w = 2.0 * kPi * unity_gain_hz;
    const double plant = 2.0 * (2.0 * kPi * rf_hz) * update_rate;
    PidConfig cfg;
    cfg.kp = kProportionalShape * w / plant;
    cfg.ki = kIntegralShape * w * w / plant;
    cfg.kd = kDerivativeShape / plant;
    cfg.update_rate = update_rate;
    cfg.integrator_limit = integrator_limit;
    return cfg;
}

double pid_step(PidState& state, double error, double dt, const PidConfig& cfg) {
    if (!std::isfinite(error)) {
        throw SimulationError("pid_step: non-finite error input; loop halted");
    }
    if (!(dt > 0.0)) {
        throw InvalidArgument("pid_step: dt must be positive");
    }
    state.integral += error * dt;
    if (cfg.ki != 0.0) {
        const double cap = cfg.integrator_limit / std::abs(cfg.ki);
        state.integral = std::clamp(state.integral, -cap, cap);
    }
    const double derivative = state.primed ? (error - state.previous_error) / dt : 0.0;
    state.previous_error = error;
    state.primed = true;
    return cfg.kp * error + cfg.ki * state.integral + cfg.kd * derivative;
}

void ActuatorConfig::validate() const {
    if (!(thermal.bandwidth > 0.0 && pzt.bandwidth > 0.0)) {
        throw InvalidArgument("ActuatorConfig: stage bandwidths must be positive");
    }
    if (!(thermal.bandwidth < crossover && crossover < pzt.bandwidth)) {
        throw InvalidArgument("ActuatorConfig: need thermal bandwidth < crossover < pzt bandwidth");
    }
    if (!(thermal.range > 0.0 && pzt.range > 0.0)) {
        throw InvalidArgument("ActuatorConfig: stage ranges must be positive");
    }
}

DispatchResult actuator_dispatch(double command, double dt, const ActuatorConfig& cfg, ActuatorState& state) {
    if (!std::isfinite(command)) {
        throw InvalidArgument("actuator_dispatch: command must be finite");
    }
    if (!(dt > 0.0)) {
        throw InvalidArgument("actuator_dispatch: dt must be positive");
    }
    DispatchResult result;
    bool thermal_sat = false;
    bool pzt_sat = false;

    state.crossover_lowpass += lag_coefficient(cfg.crossover, dt) * (command - state.crossover_lowpass);
    double thermal_target = state.crossover_lowpass;
    if (std::abs(thermal_target) > cfg.thermal.range) {
        const double limited = std::copysign(cfg.thermal.range, thermal_target);
        result.events.push_back({"thermal", thermal_target, thermal_target - limited, 0.0});
        thermal_target = limited;
        thermal_sat = true;
    }
    state.thermal += lag_coefficient(cfg.thermal.bandwidth, dt) * (thermal_target - state.thermal);

    double pzt_target = command - state.thermal;
    if (std::abs(pzt_target) > cfg.pzt.range) {
        const double limited = std::copysign(cfg.pzt.range, pzt_target);
        result.events.push_back({"pzt", pzt_target, pzt_target - limited, 0.0});
        pzt_target = limited;
        pzt_sat = true;
    }
    state.pzt += lag_coefficient(cfg.pzt.bandwidth, dt) * (pzt_target - state.pzt);

    result.odl.thermal_delay = state.thermal;
    result.odl.pzt_delay = state.pzt;
    result.odl.thermal_range = cfg.thermal.range;
    result.odl.pzt_range = cfg.pzt.range;
    result.out_of_range = thermal_sat && pzt_sat;
    return result;
}

LoopTrace simulate_closed_loop(const LinkNoiseProcess& link, const PidConfig& pid, const ActuatorConfig& act,
                               double duration, LoopMode mode, const LoopOptions& options) {
    pid.validate();
    act.validate();
    const double dt = 1.0 / pid.update_rate;
    if (!(duration > 10.0 * dt)) {
        throw InvalidArgument("simulate_closed_loop: duration must exceed ten control ticks");
    }
    if (!(options.rf_frequency > 0.0) || !(options.dead_zone >= 0.0) || !(options.record_interval >= 0.0)) {
        throw InvalidArgument("simulate_closed_loop: invalid loop options");
    }
    const double period = 1.0 / options.rf_frequency;
    const auto ticks = static_cast<std::size_t>(std::floor(duration * pid.update_rate + 1e-9)) + 1;
    const std::size_t stride =
        options.record_interval > 0.0
            ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(options.record_interval * pid.update_rate)))
            : 1;
    const auto hold_ticks = static_cast<std::size_t>(std::ceil(options.saturation_hold * pid.update_rate));

    LoopTrace trace;
    trace.static_delay = link.static_delay();
    const std::size_t expected = ticks / stride + 1;
    for (auto* v : {&trace.time, &trace.t_link, &trace.t_odl, &trace.error, &trace.remote_rf_phase,
                    &trace.remote_time_offset}) {
        v->reserve(expected);
    }

    PidState pid_state;
    ActuatorState act_state;
    double command = 0.0;
    double odl_total = 0.0;
    double calibration = 0.0;
    double previous_reading = 0.0;
    double unwrapped = 0.0;
    bool thermal_saturated = false;
    bool pzt_saturated = false;
    std::size_t saturated_ticks = 0;

    for (std::size_t n = 0; n < ticks; ++n) {
        const double t = static_cast<double>(n) * dt;
        const double t_link = optics::sample_link_delay(link, t);
        const double offset = (t_link - link.static_delay()) + odl_total;
        const double round_trip = 2.0 * delay_to_phase(offset, period);
        if (n == 0) {
            calibration = round_trip;
            trace.calibration_phase = signal::wrap_phase(round_trip);
        }
        double reading = signal::wrap_phase(round_trip - calibration);
        if (std::abs(reading) < options.dead_zone) {
            reading = 0.0;
        }
        unwrapped = n == 0 ? reading : unwrapped + signal::wrap_phase(reading - previous_reading);
        previous_reading = reading;
        const double err = error_signal(unwrapped);

        if (n % stride == 0) {
            trace.time.push_back(t);
            trace.t_link.push_back(t_link);
            trace.t_odl.push_back(odl_total);
            trace.error.push_back(err);
            trace.remote_time_offset.push_back(offset);
            trace.remote_rf_phase.push_back(delay_to_phase(offset, period));
        }

        if (mode == LoopMode::open) {
            continue;
        }
        command -= pid_step(pid_state, err, dt, pid);
        auto res = actuator_dispatch(command, dt, act, act_state);
        odl_total = res.odl.total();

        bool thermal_now = false;
        bool pzt_now = false;
        for (auto& ev : res.events) {
            ev.time = t;
            const bool is_thermal = ev.stage == "thermal";
            (is_thermal ? thermal_now : pzt_now) = true;
            // Log the start of each saturation episode only.
            if ((is_thermal && !thermal_saturated) || (!is_thermal && !pzt_saturated)) {
                trace.saturation_events.push_back(ev);
            }
        }
        thermal_saturated = thermal_now;
        pzt_saturated = pzt_now;
        saturated_ticks = res.out_of_range ? saturated_ticks + 1 : 0;
        if (saturated_ticks > hold_ticks) {
            trace.truncated = true;
            trace.truncation_reason = "both ODL stages saturated for longer than " +
                                      std::to_string(options.saturation_hold) + " s at t = " + std::to_string(t) + " s";
            break;
        }
    }
    return trace;
}

void write_trace_csv(const LoopTrace& trace, std::ostream& out) {
    out << "time_s,t_link_s,t_odl_s,error_rad,remote_phase_rad,remote_offset_s\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << csv::number(trace.time[i]) << ',' << csv::number(trace.t_link[i]) << ',' << csv::number(trace.t_odl[i])
            << ',' << csv::number(trace.error[i]) << ',' << csv::number(trace.remote_rf_phase[i]) << ','
            << csv::number(trace.remote_time_offset[i]) << '\n';
    }
}

}  // namespace fibersync::control
