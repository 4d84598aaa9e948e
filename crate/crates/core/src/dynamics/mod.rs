//! Torsional-mode dynamics: analytic response and stochastic simulation.

mod drive;
mod response;
mod series;
mod simulate;

pub use drive::{DriveSignal, Tone};
pub use response::{
    analytic_angle_psd, susceptibility, susceptibility_sq, thermal_angle_psd, thermal_torque_psd,
    AnglePsd, SpectralLine,
};
pub use series::AngleSeries;
pub use simulate::{simulate, Integrator, SimulationConfig, MAX_STEP_PER_PERIOD};
