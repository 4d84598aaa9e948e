//! One function per subcommand. Each writes its files into `dir` and
//! returns a description of them plus scalar results for the manifest.

use std::collections::BTreeMap;
use std::path::Path;

use fmto_core::calibration::{thermal_limit_curve, thermal_limit_scan, SensitivityProvenance};
use fmto_core::coils::{center_field_coefficient, field_profile, non_uniformity, signal_field};
use fmto_core::dynamics::Tone;
use fmto_core::exotic::{
    bound_curve, lambda_grid, pseudo_field_numeric, thermal_bound_curve, truncation_fraction,
    ThermalSource,
};
use fmto_core::lockin::{derive_seed, frequency_sweep, lock_in, SweepSettings};
use fmto_core::optics::{render_and_track, render_frames};
use fmto_core::presets::PresetFile;
use fmto_core::spectral::{fit_spectrum, welch_psd, FitOptions};
use fmto_core::{
    AngleSeries, DriveSignal, Error, ExoticSourceConfig, Result, SimulationConfig, SpotTrack,
};

use crate::chain::run_calibration;
use crate::config::{grid, InputKind, Scenario};

/// Files written by a command and the numbers worth recording.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    /// File name (relative to the scenario directory) to description.
    pub files: BTreeMap<String, String>,
    pub results: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CommandOutput {
    fn file(&mut self, name: &str, description: &str) {
        self.files.insert(name.to_string(), description.to_string());
    }

    fn result(&mut self, key: &str, value: f64) {
        self.results.insert(key.to_string(), value);
    }
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// Angle series, and optionally the rendered spot track and frames.
pub fn cmd_simulate(
    s: &Scenario,
    presets: &PresetFile,
    dir: &Path,
    seed: u64,
) -> Result<CommandOutput> {
    let params = s.oscillator(presets)?;
    let sim = &s.simulate;
    let tones: Vec<Tone> = sim
        .drive
        .iter()
        .map(|t| Tone {
            amplitude: t.amplitude,
            frequency: t.frequency,
            phase: t.phase,
        })
        .collect();
    let series = SimulationConfig::new(params, sim.dt, sim.settle_time + sim.duration)
        .drive(DriveSignal::multi_tone(tones))
        .temperature(s.temperature)
        .seed(derive_seed(seed, 0))
        .record_rates(sim.render)
        .run()?
        .drop_before(sim.settle_time);
    let mut out = CommandOutput::default();
    series.write_csv(dir.join("angles.csv"))?;
    out.file("angles.csv", "time_s, angle_rad");
    out.result("samples", series.len() as f64);
    out.result("f_res_hz", params.f_res());
    if sim.render {
        let jitter = sim.jitter.jitter();
        let track = render_and_track(
            &series,
            &s.geometry,
            jitter,
            sim.photon_noise,
            derive_seed(seed, 1),
            s.tracker,
        )?;
        track.write_csv(dir.join("track.csv"))?;
        out.file(
            "track.csv",
            "time_s, position_px, quality (actual frame times)",
        );
        out.result("frames", track.len() as f64);
        if sim.write_frames {
            render_frames(
                &series,
                &s.geometry,
                jitter,
                sim.photon_noise,
                derive_seed(seed, 1),
            )?
            .write_dir(dir.join("frames"))?;
            out.file(
                "frames",
                "grey-map frames plus frames.toml (timestamps, geometry)",
            );
        }
    }
    Ok(out)
}

/// PSD, resonance fit and lock-in amplitudes of a track or angle file.
pub fn cmd_analyze(
    s: &Scenario,
    presets: &PresetFile,
    dir: &Path,
    config_dir: &Path,
) -> Result<CommandOutput> {
    let a = &s.analyze;
    if a.input.as_os_str().is_empty() {
        return Err(Error::Config("analyze needs `analyze.input`".into()));
    }
    let input = if a.input.is_absolute() {
        a.input.clone()
    } else {
        config_dir.join(&a.input)
    };
    let (series, track) = match a.kind {
        InputKind::Track => {
            let t = SpotTrack::read_csv(&input)?;
            (t.to_time_series(a.use_actual_timestamps)?, Some(t))
        }
        InputKind::Angles => (AngleSeries::read_csv(&input)?.to_time_series(), None),
    };
    let w = welch_psd(&series, a.segment_length, a.window, a.overlap)?;
    let mut out = CommandOutput::default();
    w.average.write_csv(dir.join("spectrum.csv"))?;
    out.file("spectrum.csv", "freq_hz, psd (one-sided, units^2/Hz)");
    out.result("segments", w.average.n_segments_used() as f64);

    let params = s.oscillator(presets)?;
    let [lo, hi] = a.fit_band.unwrap_or_else(|| {
        let half = 10.0 * params.f_res() / params.q_factor();
        [params.f_res() - half, params.f_res() + half]
    });
    match fit_spectrum(&w.average, lo, hi, FitOptions::default()) {
        Ok(fit) => {
            fit.write_text(dir.join("fit.toml"))?;
            out.file("fit.toml", "Lorentzian fit of the PSD");
            out.result("fit_f_r_hz", fit.f_r);
            out.result("fit_q", fit.q_factor);
        }
        Err(e) => out.notes.push(format!("resonance fit skipped: {e}")),
    }

    if !a.lock_in.is_empty() {
        let mut wr = csv_writer(
            &dir.join("lockin.csv"),
            &["freq_hz", "amp", "phase_rad", "in_phase", "quadrature"],
        )?;
        for &f in &a.lock_in {
            let r = match &track {
                Some(t) => lock_in(t, f, a.use_actual_timestamps)?,
                None => fmto_core::lockin::lock_in_series(series.times(), series.values(), f)?,
            };
            wr.write_record([
                fmt(f),
                fmt(r.amplitude),
                fmt(r.phase),
                fmt(r.in_phase),
                fmt(r.quadrature),
            ])?;
        }
        wr.flush()?;
        out.file(
            "lockin.csv",
            "freq_hz, amp, phase_rad, in_phase, quadrature",
        );
    }
    Ok(out)
}

/// The full synthetic calibration chain.
pub fn cmd_calibrate(
    s: &Scenario,
    presets: &PresetFile,
    dir: &Path,
    seed: u64,
) -> Result<CommandOutput> {
    let params = s.oscillator(presets)?;
    let c = run_calibration(
        &params,
        s.temperature,
        &s.geometry,
        s.tracker,
        &s.calibrate,
        seed,
    )?;
    let mut out = CommandOutput::default();

    c.sweep.write_csv(dir.join("sweep.csv"))?;
    out.file("sweep.csv", "freq_hz, amp (px), phase_rad");
    c.fit.write_text(dir.join("resonance_fit.toml"))?;
    out.file(
        "resonance_fit.toml",
        "Lorentzian fit of the squared sweep amplitudes",
    );
    c.all_segments.write_csv(dir.join("spectrum_all.csv"))?;
    out.file(
        "spectrum_all.csv",
        "freq_hz, psd: average of all segments, px^2/Hz",
    );
    c.selected.write_csv(dir.join("spectrum_selected.csv"))?;
    out.file(
        "spectrum_selected.csv",
        "freq_hz, psd: average of the top segments, px^2/Hz",
    );

    let mut wr = csv_writer(&dir.join("segments.csv"), &["segment", "snr", "selected"])?;
    let mut by_index = c.segment_snr.clone();
    by_index.sort_by_key(|p| p.0);
    let chosen: std::collections::BTreeSet<usize> = c.segment_snr[..s.calibrate.top_n]
        .iter()
        .map(|p| p.0)
        .collect();
    for (i, snr) in by_index {
        wr.write_record([i.to_string(), fmt(snr), chosen.contains(&i).to_string()])?;
    }
    wr.flush()?;
    out.file("segments.csv", "segment, snr, selected");

    c.measured.write_csv(dir.join("sensitivity_measured.csv"))?;
    out.file(
        "sensitivity_measured.csv",
        "freq_hz, eta_T_per_rtHz, provenance",
    );
    c.thermal.write_csv(dir.join("sensitivity_thermal.csv"))?;
    out.file(
        "sensitivity_thermal.csv",
        "freq_hz, eta_T_per_rtHz, provenance",
    );
    if let Some(floor) = &c.floor {
        floor.write_csv(dir.join("sensitivity_floor.csv"))?;
        out.file(
            "sensitivity_floor.csv",
            "freq_hz, eta_T_per_rtHz, provenance",
        );
    }

    let tf = &c.transfer;
    let text = format!(
        "c_at_cal_px_per_T = {:.17e}\nf_cal_hz = {:.17e}\nrelative_uncertainty = {:.17e}\nq_sigma = {:.17e}\nf_r_hz = {:.17e}\nq_factor = {:.17e}\nb_cal_T = {:.17e}\narea_px2 = {:.17e}\ntheoretical_c_px_per_T = {:.17e}\n",
        tf.c_at_cal(),
        tf.f_cal(),
        tf.uncertainty(),
        tf.q_sigma(),
        tf.params().f_res(),
        tf.params().q_factor(),
        c.b_cal,
        c.area,
        c.theoretical_c
    );
    std::fs::write(dir.join("transfer.toml"), text)?;
    out.file("transfer.toml", "calibrated transfer function");

    out.result("c_at_cal_px_per_T", tf.c_at_cal());
    out.result("theoretical_c_px_per_T", c.theoretical_c);
    out.result("fit_f_r_hz", c.fit.f_r);
    out.result("fit_q", c.fit.q_factor);
    out.result("fit_sigma_q", c.fit.sigma_q());
    out.result("thermal_eta_T_per_rtHz", c.thermal_eta);
    if let Some((_, eta)) = c.measured.nearest(params.f_res()) {
        out.result("measured_eta_at_f_r_T_per_rtHz", eta);
    }
    Ok(out)
}

/// Thermal-limit tables: a (radius, bias) scan of free spheres and the
/// scenario oscillator's limit over frequency.
pub fn cmd_sensitivity(s: &Scenario, presets: &PresetFile, dir: &Path) -> Result<CommandOutput> {
    let sec = &s.sensitivity;
    let material = s.material(presets)?;
    let scan = thermal_limit_scan(
        &material,
        &sec.radii,
        &sec.bias_fields,
        sec.temperature,
        sec.q_factor,
    )?;
    let mut out = CommandOutput::default();
    let mut w = csv_writer(
        &dir.join("thermal_scan.csv"),
        &["radius_m", "bias_T", "f_res_hz", "eta_T_per_rtHz"],
    )?;
    for p in &scan {
        w.write_record([fmt(p.radius), fmt(p.bias_field), fmt(p.f_res), fmt(p.eta)])?;
    }
    w.flush()?;
    out.file(
        "thermal_scan.csv",
        "radius_m, bias_T, f_res_hz, eta_T_per_rtHz",
    );

    let params = s.oscillator(presets)?;
    if !(sec.f_min > 0.0 && sec.f_max > sec.f_min && sec.n_freq >= 2) {
        return Err(Error::Config(
            "sensitivity frequency grid is invalid".into(),
        ));
    }
    let freqs = log_grid(sec.f_min, sec.f_max, sec.n_freq);
    let curve = thermal_limit_curve(&params, s.temperature, &freqs)?;
    curve.write_csv(dir.join("sensitivity_thermal.csv"))?;
    out.file(
        "sensitivity_thermal.csv",
        "freq_hz, eta_T_per_rtHz, provenance",
    );
    out.result("oscillator_thermal_eta_T_per_rtHz", curve.eta()[0]);
    debug_assert_eq!(curve.provenance(), SensitivityProvenance::ThermalLimit);
    Ok(out)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Coupling-constant bound curves.
pub fn cmd_bounds(s: &Scenario, presets: &PresetFile, dir: &Path) -> Result<CommandOutput> {
    let b = &s.bounds;
    let source_material = presets.material(&b.source_material)?;
    let config = ExoticSourceConfig::new(
        b.solid_angle,
        b.l0,
        b.lm,
        b.amplitude,
        b.f_n,
        source_material,
    )?;
    let lambdas = lambda_grid(b.lambda_min, b.lambda_max, b.n_lambda)?;
    let curve = bound_curve(&config, &lambdas, b.eta, b.t_mea)?;
    let mut out = CommandOutput::default();

    let mut w = csv_writer(&dir.join("bounds.csv"), &["lambda_m", "delta_f45"])?;
    for p in &curve {
        w.write_record([fmt(p.lambda), fmt(p.delta_f45)])?;
    }
    w.flush()?;
    out.file(
        "bounds.csv",
        "lambda_m, delta_f45 (closed-form pseudo-field)",
    );
    let best = curve
        .iter()
        .map(|p| p.delta_f45)
        .fold(f64::INFINITY, f64::min);
    out.result("best_delta_f45", best);

    if b.numeric {
        let db = b.eta / b.t_mea.sqrt();
        let mut w = csv_writer(
            &dir.join("bounds_numeric.csv"),
            &["lambda_m", "delta_f45", "truncation_fraction"],
        )?;
        for &lam in &lambdas {
            let field = pseudo_field_numeric(&config, lam, 1.0)?;
            w.write_record([
                fmt(lam),
                fmt(db / field),
                fmt(truncation_fraction(&config, lam)),
            ])?;
        }
        w.flush()?;
        out.file(
            "bounds_numeric.csv",
            "lambda_m, delta_f45, truncation_fraction (quadrature over the finite shell)",
        );
    }

    let sensor = s.material(presets)?;
    for t in &b.thermal {
        let src = ThermalSource {
            eps_a: t.eps_a,
            solid_angle: t.solid_angle,
            material: source_material,
        };
        let c = thermal_bound_curve(
            &sensor,
            t.bias_field,
            t.temperature,
            t.q_factor,
            &src,
            &lambdas,
            b.t_mea,
        )?;
        let name = format!("bounds_thermal_{}.csv", t.label);
        let mut w = csv_writer(&dir.join(&name), &["lambda_m", "delta_f45"])?;
        for p in &c {
            w.write_record([fmt(p.lambda), fmt(p.delta_f45)])?;
        }
        w.flush()?;
        out.file(
            &name,
            &format!(
                "lambda_m, delta_f45: thermal limit at B = {} T, T = {} K, Q = {}",
                t.bias_field, t.temperature, t.q_factor
            ),
        );
    }
    Ok(out)
}

/// Coil coefficients, uniformity and field tables.
pub fn cmd_coils(s: &Scenario, dir: &Path) -> Result<CommandOutput> {
    let c = &s.coils;
    let mut out = CommandOutput::default();
    let mut coeffs = csv_writer(
        &dir.join("coils.csv"),
        &[
            "name",
            "turns",
            "diameter_m",
            "separation_m",
            "coefficient_T_per_A",
            "deviation_factor",
            "effective_T_per_A",
            "non_uniformity",
        ],
    )?;
    let mut fields = csv_writer(&dir.join("fields.csv"), &["name", "current_A", "field_T"])?;
    let mut profile = csv_writer(
        &dir.join("profile.csv"),
        &["name", "offset_m", "field_T_per_A"],
    )?;
    let n = c.samples.max(3);
    let offsets: Vec<f64> = (0..n)
        .map(|i| -c.half_span + 2.0 * c.half_span * i as f64 / (n - 1) as f64)
        .collect();
    for spec in &c.pairs {
        let pair = spec.pair()?;
        let k = center_field_coefficient(&pair);
        let u = non_uniformity(&pair, c.half_span, n)?;
        coeffs.write_record([
            spec.name.clone(),
            spec.turns.to_string(),
            fmt(spec.diameter),
            fmt(spec.separation),
            fmt(k),
            fmt(spec.deviation_factor),
            fmt(k * spec.deviation_factor),
            fmt(u),
        ])?;
        for (i, b) in c
            .currents
            .iter()
            .zip(signal_field(&pair, &c.currents, spec.deviation_factor))
        {
            fields.write_record([spec.name.clone(), fmt(*i), fmt(b)])?;
        }
        for (z, b) in offsets.iter().zip(field_profile(&pair, &offsets)?) {
            profile.write_record([spec.name.clone(), fmt(*z), fmt(b)])?;
        }
        out.result(&format!("{}_T_per_A", spec.name), k);
        out.result(&format!("{}_non_uniformity", spec.name), u);
        println!(
            "{:<8} {:>4} turns  {:6.1} mm dia  {:6.1} mm apart  {:10.4} nT/mA  x{:.3}  non-uniformity {:.2} % over +-{:.1} mm",
            spec.name,
            spec.turns,
            spec.diameter * 1e3,
            spec.separation * 1e3,
            k * 1e6,
            spec.deviation_factor,
            u * 100.0,
            c.half_span * 1e3
        );
    }
    coeffs.flush()?;
    fields.flush()?;
    profile.flush()?;
    out.file("coils.csv", "per-pair coefficients and uniformity");
    out.file("fields.csv", "name, current_A, field_T");
    out.file("profile.csv", "name, offset_m, field_T_per_A (on-axis)");
    Ok(out)
}

/// Driven frequency sweep with lock-in readout.
pub fn cmd_sweep(
    s: &Scenario,
    presets: &PresetFile,
    dir: &Path,
    seed: u64,
) -> Result<CommandOutput> {
    let sw = &s.sweep;
    let params = s.oscillator(presets)?;
    let freqs = grid(sw.f_min, sw.f_max, sw.step)?;
    let settings = SweepSettings {
        temperature: s.temperature,
        dt: sw.dt,
        settle_time: sw.settle_time,
        measure_time: sw.measure_time,
        seed,
        readout: sw.readout.clone(),
    };
    let r = frequency_sweep(&params, sw.drive_amplitude, &freqs, &settings)?;
    let mut out = CommandOutput::default();
    r.write_csv(dir.join("sweep.csv"))?;
    out.file("sweep.csv", "freq_hz, amp, phase_rad");
    match r.fit(FitOptions::default()) {
        Ok(fit) => {
            fit.write_text(dir.join("fit.toml"))?;
            out.file("fit.toml", "Lorentzian fit of the squared amplitudes");
            out.result("fit_f_r_hz", fit.f_r);
            out.result("fit_q", fit.q_factor);
            out.result("fit_sigma_q", fit.sigma_q());
        }
        Err(e) => out.notes.push(format!("resonance fit skipped: {e}")),
    }
    Ok(out)
}
