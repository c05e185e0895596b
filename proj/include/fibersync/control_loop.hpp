#pragma once

// Round-trip delay stabilization in the phase domain. The local site
// compares the returned RF tone with its reference (twice the one-way
// phase), a PID turns the unwrapped error into ODL increments, and a
// two-stage actuator (thermal spool + PZT) realizes them.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "fibersync/optics_chain.hpp"

namespace fibersync::control {

using optics::LinkNoiseProcess;
using optics::OdlState;
using optics::SaturationEvent;

/// Round-trip error from one-way ODL and link RF phases: 2*(odl + link).
double round_trip_error(double odl_phase, double link_phase) noexcept;

/// The discriminator reading of the returned tone is the error signal itself.
/// The one-way correction target is -error/2.
double error_signal(double round_trip_phase) noexcept;

/// t = phi / (2*pi) * period.
double phase_to_delay(double phase, double period);
double delay_to_phase(double delay, double period);

struct PidConfig {
    double kp = 0.0;                  ///< s of ODL increment per rad
    double ki = 0.0;                  ///< s per (rad * s)
    double kd = 0.0;                  ///< s * s per rad
    double update_rate = 1000.0;      ///< Hz
    double integrator_limit = 1e-9;   ///< s, bound on |ki * integral|

    void validate() const;

    /// Gains placing the loop's unity-gain crossing at `unity_gain_hz` for an
    /// RF tone at `rf_hz`. The ODL accumulates PID outputs, so the open loop is
    /// G/s * (kp + ki/s + kd*s) with G = 2*omega_rf*update_rate. The
    /// integral term dominates below the crossing (>= 40 dB of suppression a
    /// decade down) and the derivative term keeps the phase margin.
    static PidConfig for_unity_gain(double unity_gain_hz, double rf_hz, double update_rate = 1000.0,
                                    double integrator_limit = 1e-9);
};

struct PidState {
    double integral = 0.0;
    double previous_error = 0.0;
    bool primed = false;
};

/// Discrete PID. Returns the ODL increment in s; the integral is held once
/// |ki * integral| reaches the integrator limit. Throws SimulationError on a
/// non-finite error.
double pid_step(PidState& state, double error, double dt, const PidConfig& cfg);

struct StageConfig {
    double bandwidth = 1.0;  ///< Hz, first-order lag corner
    double range = 50e-9;    ///< s, symmetric travel
};

struct ActuatorConfig {
    StageConfig thermal{1.0, 50e-9};
    StageConfig pzt{2000.0, 20e-12};
    double crossover = 5.0;  ///< Hz

    void validate() const;
};

struct ActuatorState {
    double crossover_lowpass = 0.0;
    double thermal = 0.0;
    double pzt = 0.0;
};

struct DispatchResult {
    OdlState odl;
    std::vector<SaturationEvent> events;
    bool out_of_range = false;  ///< both stages saturated in this step
};

/// Advances the two-stage ODL by dt toward `command` (absolute t_ODL target).
/// The low-passed command (crossover) drives the thermal stage; the PZT takes
/// whatever the thermal stage has not yet delivered, so a standing PZT
/// deflection is slowly handed over to the thermal stage.
DispatchResult actuator_dispatch(double command, double dt, const ActuatorConfig& cfg, ActuatorState& state);

enum class LoopMode { open, closed };

struct LoopOptions {
    double rf_frequency = 1e9;       ///< Hz
    double dead_zone = 0.0;          ///< rad, discriminator dead zone
    double record_interval = 0.0;    ///< s between recorded samples; 0 records every tick
    double saturation_hold = 1.0;    ///< s of continuous double saturation before the run stops
};

struct LoopTrace {
    std::vector<double> time;                ///< s
    std::vector<double> t_link;              ///< s, absolute one-way link delay
    std::vector<double> t_odl;               ///< s
    std::vector<double> error;               ///< rad, unwrapped round-trip error
    std::vector<double> remote_rf_phase;     ///< rad, omega_rf * remote_time_offset
    std::vector<double> remote_time_offset;  ///< s, (t_link - static) + t_odl
    std::vector<SaturationEvent> saturation_events;
    bool truncated = false;
    std::string truncation_reason;
    double static_delay = 0.0;
    double calibration_phase = 0.0;  ///< rad, raw round-trip reading at t = 0

    std::size_t size() const noexcept { return time.size(); }
};

/// Slow-time engine: one step per control tick. Each tick samples t_link,
/// forms the round-trip discriminator reading 2*omega*(t_link - static +
/// t_odl) referenced to its value at t = 0, applies the dead zone, unwraps,
/// and (closed mode) runs PID and actuator. In open mode the ODL stays at 0.
LoopTrace simulate_closed_loop(const LinkNoiseProcess& link, const PidConfig& pid, const ActuatorConfig& act,
                               double duration, LoopMode mode, const LoopOptions& options = {});

/// CSV: time_s,t_link_s,t_odl_s,error_rad,remote_phase_rad,remote_offset_s
void write_trace_csv(const LoopTrace& trace, std::ostream& out);

}  // namespace fibersync::control
