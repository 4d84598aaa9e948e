//! The synthetic calibration chain: resonance sweep, calibration-tone
//! record, segment selection, peak area, transfer function and the
//! sensitivity curves derived from it.

use fmto_core::calibration::{
    oscillator_thermal_sensitivity, sensitivity_from_noise, theoretical_transfer,
    thermal_limit_curve, SensitivityCurve, SensitivityProvenance, TransferFunction,
};
use fmto_core::coils::center_field_coefficient;
use fmto_core::lockin::{derive_seed, frequency_sweep, SweepReadout, SweepResult, SweepSettings};
use fmto_core::optics::{render_and_track, Jitter, TrackerSettings};
use fmto_core::spectral::{
    peak_area, select_segments_by_snr, welch, FitOptions, LorentzianFit, SpectrumEstimate, Window,
};
use fmto_core::{
    AngleSeries, DriveSignal, Error, OscillatorParams, ReadoutGeometry, Result, SimulationConfig,
};

use crate::config::CalibrateSection;

/// Seed streams of the chain.
const SWEEP_STREAM: u64 = 1;
const RECORD_STREAM: u64 = 2;
const RENDER_STREAM: u64 = 3;
const FLOOR_STREAM: u64 = 4;

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub sweep: SweepResult,
    pub fit: LorentzianFit,
    /// Calibration field amplitude, T.
    pub b_cal: f64,
    /// Mean-square line area, px^2.
    pub area: f64,
    pub transfer: TransferFunction<f64>,
    /// `lever * mu * |chi(f_cal)|` for the simulated oscillator.
    pub theoretical_c: f64,
    /// Average of all segments.
    pub all_segments: SpectrumEstimate,
    /// Average of the selected segments.
    pub selected: SpectrumEstimate,
    pub segment_snr: Vec<(usize, f64)>,
    pub measured: SensitivityCurve,
    pub floor: Option<SensitivityCurve>,
    pub thermal: SensitivityCurve,
    /// Thermal torque limit of the oscillator, T/sqrt(Hz).
    pub thermal_eta: f64,
}

fn settle_time(params: &OscillatorParams<f64>) -> f64 {
    10.0 * params.q_factor() / params.f_res()
}

/// Runs the whole chain. The fitted `(f_r, Q)` from the sweep define the
/// oscillator used to extend the transfer function away from `f_cal`.
pub fn run_calibration(
    params: &OscillatorParams<f64>,
    temperature: f64,
    geometry: &ReadoutGeometry,
    tracker: TrackerSettings,
    cal: &CalibrateSection,
    seed: u64,
) -> Result<CalibrationOutcome> {
    let coil = cal.coil.pair()?;
    let field_per_amp = center_field_coefficient(&coil) * cal.coil.deviation_factor;
    let b_cal = field_per_amp * cal.cal_current;
    let jitter = jitter_of(cal);

    log::info!("sweep: {} points", cal.sweep.frequencies()?.len());
    let sweep = frequency_sweep(
        params,
        field_per_amp * cal.sweep.current,
        &cal.sweep.frequencies()?,
        &SweepSettings {
            temperature,
            dt: cal.dt,
            settle_time: cal.sweep.settle_time,
            measure_time: cal.sweep.measure_time,
            seed: derive_seed(seed, SWEEP_STREAM),
            readout: SweepReadout::Camera {
                geometry: *geometry,
                jitter,
                photon_noise: cal.photon_noise,
                tracker,
                use_actual_timestamps: true,
            },
        },
    )?;
    let fit = sweep.fit(FitOptions::default())?;
    let fitted = OscillatorParams::from_resonance(
        params.inertia(),
        params.moment(),
        fit.q_factor,
        fit.f_r,
        params.k_offset(),
    )?;

    log::info!(
        "calibration record: {} x {} s",
        cal.n_segments,
        cal.segment_length
    );
    let settle = settle_time(params);
    let record = SimulationConfig::new(
        *params,
        cal.dt,
        settle + cal.n_segments as f64 * cal.segment_length,
    )
    .drive(DriveSignal::sinusoid(b_cal, cal.cal_frequency, 0.0))
    .temperature(temperature)
    .seed(derive_seed(seed, RECORD_STREAM))
    .record_rates(true)
    .run()?
    .drop_before(settle);
    let track = render_and_track(
        &record,
        geometry,
        jitter,
        cal.photon_noise,
        derive_seed(seed, RENDER_STREAM),
        tracker,
    )?;
    drop(record);

    let fs = geometry.frame_rate;
    let seg = (cal.segment_length * fs).round() as usize;
    let positions = track.positions();
    let usable = (positions.len() / seg).min(cal.n_segments) * seg;
    let w = welch(&positions[..usable], fs, seg, Window::Hann, 0.0)?;
    if w.segments.len() < cal.top_n {
        return Err(Error::Precondition(format!(
            "only {} segments available for top_n = {}",
            w.segments.len(),
            cal.top_n
        )));
    }
    let ranked = fmto_core::spectral::rank_segments_by_snr(&w.segments, cal.cal_frequency)?;
    let selected = select_segments_by_snr(&w.segments, cal.cal_frequency, cal.top_n)?;
    let area = match peak_area(
        &selected,
        cal.cal_frequency,
        cal.halfwidth_bins,
        Some((fit.f_r, fit.q_factor)),
    ) {
        Ok(a) => a,
        Err(Error::ResonanceOverlap { area, .. }) => area,
        Err(e) => return Err(e),
    };
    // relative error of the area from the spread of the selected segments
    let rel_a = 1.0 / (cal.top_n as f64).sqrt() * segment_area_spread(&w.segments, &ranked, cal)?;
    let q_sigma = cal.q_sigma.unwrap_or(fit.sigma_q());
    let transfer = TransferFunction::from_calibration(
        area,
        rel_a,
        b_cal,
        cal.field_uncertainty,
        cal.cal_frequency,
        fitted,
    )?
    .with_q_sigma(q_sigma);
    let theoretical_c = theoretical_transfer(params, geometry.lever_gain(), cal.cal_frequency);

    let measured = sensitivity_from_noise(&selected, &transfer, SensitivityProvenance::Measured)?;
    let floor = if cal.floor_duration > 0.0 {
        Some(measurement_floor(geometry, tracker, cal, &transfer, seed)?)
    } else {
        None
    };
    let thermal_eta = oscillator_thermal_sensitivity(params, temperature)?;
    let thermal = thermal_limit_curve(params, temperature, measured.frequencies())?;

    Ok(CalibrationOutcome {
        sweep,
        fit,
        b_cal,
        area,
        transfer,
        theoretical_c,
        all_segments: w.average,
        selected,
        segment_snr: ranked,
        measured,
        floor,
        thermal,
        thermal_eta,
    })
}

fn jitter_of(cal: &CalibrateSection) -> Jitter {
    cal.jitter.jitter()
}

/// Relative standard deviation of the single-segment line areas over the
/// selected segments.
fn segment_area_spread(
    segments: &[SpectrumEstimate],
    ranked: &[(usize, f64)],
    cal: &CalibrateSection,
) -> Result<f64> {
    let areas: Vec<f64> = ranked[..cal.top_n]
        .iter()
        .map(|&(i, _)| peak_area(&segments[i], cal.cal_frequency, cal.halfwidth_bins, None))
        .collect::<Result<_>>()?;
    let n = areas.len() as f64;
    let mean = areas.iter().sum::<f64>() / n;
    if n < 2.0 || !(mean > 0.0) {
        return Ok(0.0);
    }
    let var = areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt() / mean)
}

/// Clamped oscillator: a static spot rendered and tracked, divided by the
/// same transfer function.
fn measurement_floor(
    geometry: &ReadoutGeometry,
    tracker: TrackerSettings,
    cal: &CalibrateSection,
    transfer: &TransferFunction<f64>,
    seed: u64,
) -> Result<SensitivityCurve> {
    let frame_dt = 1.0 / geometry.frame_rate;
    let n = (cal.floor_duration / frame_dt).round() as usize + 1;
    let still = AngleSeries::from_angles(frame_dt, vec![0.0; n], None)?;
    let track = render_and_track(
        &still,
        geometry,
        jitter_of(cal),
        cal.photon_noise,
        derive_seed(seed, FLOOR_STREAM),
        tracker,
    )?;
    let seg = ((cal.segment_length * geometry.frame_rate).round() as usize).min(track.len() / 2);
    let w = welch(
        track.positions(),
        geometry.frame_rate,
        seg,
        Window::Hann,
        0.5,
    )?;
    sensitivity_from_noise(
        &w.average,
        transfer,
        SensitivityProvenance::MeasurementFloor,
    )
}
