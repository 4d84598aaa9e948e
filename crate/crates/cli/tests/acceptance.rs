//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use fmto_cli::chain::run_calibration;
use fmto_cli::config::{Command, RunConfig, Scenario};
use fmto_cli::PAPER_REPLICA;
use fmto_core::calibration::{oscillator_thermal_sensitivity, thermal_limit_sensitivity};
use fmto_core::coils::center_field_coefficient;
use fmto_core::dynamics::analytic_angle_psd;
use fmto_core::exotic::{c_lambda, pseudo_field_closed, pseudo_field_numeric};
use fmto_core::lockin::{lock_in, lock_in_series};
use fmto_core::optics::{render_and_track, FrameRenderer, Jitter, TrackerSettings};
use fmto_core::oscillator::sphere_bias_for_frequency;
use fmto_core::spectral::{welch, Window};
use fmto_core::{
    AngleSeries, CoilPair, DriveSignal, ExoticSourceConfig, MaterialProperties, OscillatorParams,
    ReadoutGeometry, Result, SimulationConfig, SpotTrack,
};

type Check = fn() -> Result<(bool, String)>;

fn main() {
    let checks: [(&str, Check); 10] = [
        ("C_lambda maximum", c_lambda_maximum),
        ("closed form vs quadrature", closed_vs_numeric),
        ("thermal-limit headline", thermal_headline),
        ("coil coefficients", coil_coefficients),
        ("fluctuation-dissipation closure", fdt_closure),
        ("calibration round trip", calibration_round_trip),
        ("tracker resolution and linearity", tracker_resolution),
        ("jitter correction", jitter_correction),
        (
            "thermal limit below measured sensitivity",
            thermal_plausibility,
        ),
        ("bound-curve regression", bound_regression),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2}: {} {name} ({detail}) [{:.1} s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn c_lambda_maximum() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut vals = Vec::new();
    for lam in [1e-3, 1e-2, 1e-1] {
        let v = c_lambda(2f64.sqrt() * lam, lam)?;
        worst = worst.max((v - 1.174).abs());
        vals.push(format!("{v:.5}"));
    }
    Ok((worst <= 1e-3, format!("values {}", vals.join(", "))))
}

fn closed_vs_numeric() -> Result<(bool, String)> {
    let l0 = 7.5e-3;
    let mut worst = 0.0f64;
    let mut n = 0;
    for lam in [1e-4, 3e-4, 1e-3, 3e-3, 1e-2] {
        // shells from 7 to 100 wavelengths thick; the first sits on the
        // regime edge, nudged past float rounding of lm - l0
        for k in [7.0 + 1e-9, 10.0, 20.0, 50.0, 100.0] {
            let cfg = ExoticSourceConfig::new(
                1e-2,
                l0,
                l0 + k * lam,
                1.5e-3,
                4.99,
                MaterialProperties::bgo(),
            )?;
            let closed: f64 = pseudo_field_closed(&cfg, lam, 1.0)?;
            let numeric = pseudo_field_numeric(&cfg, lam, 1.0)?;
            worst = worst.max(((closed - numeric) / closed).abs());
            n += 1;
        }
    }
    Ok((
        worst < 0.01,
        format!("{n} points, worst relative difference {worst:.3e}"),
    ))
}

fn thermal_headline() -> Result<(bool, String)> {
    let ndfeb = MaterialProperties::ndfeb();
    let r = 10e-3;
    let b = sphere_bias_for_frequency(r, &ndfeb, 1e-3)?;
    let eta = thermal_limit_sensitivity(&ndfeb, r, b, 0.05, 1e5)?;
    let at = eta / 1e-18;
    Ok((
        (0.17..=0.29).contains(&at),
        format!("eta = {at:.4} aT/sqrt(Hz) at B = {b:.3e} T"),
    ))
}

fn coil_coefficients() -> Result<(bool, String)> {
    let dc = center_field_coefficient(&CoilPair::<f64>::dc_bias()) * 1e-3;
    let ac = center_field_coefficient(&CoilPair::<f64>::ac_signal()) * 1e-3;
    let b_cal = ac * 1e3 * 2e-6;
    let ok = (dc / 2.02e-6 - 1.0).abs() < 0.01
        && (ac / 56.95e-9 - 1.0).abs() < 0.01
        && (b_cal - 113.9e-12).abs() <= 1e-12;
    Ok((
        ok,
        format!(
            "DC {:.4} uT/mA, AC {:.3} nT/mA, 2 uA -> {:.2} pT",
            dc * 1e6,
            ac * 1e9,
            b_cal * 1e12
        ),
    ))
}

/// 60 non-overlapping 100 s segments of a free thermal record. Bins are
/// compared up to 50 Hz, well below the 500 Hz Nyquist limit, where
/// aliasing of the sampled process is under 1e-5 of the PSD.
fn fdt_closure() -> Result<(bool, String)> {
    // I = 3e-10 kg m^2, f_r = 4.99 Hz, Q = 39
    let params = OscillatorParams::reference();
    let temperature = 300.0;
    let dt = 1e-3;
    let n_seg = 60;
    let seg_len = 100.0;
    let settle = 10.0 * params.q_factor() / params.f_res();
    let rec = SimulationConfig::new(params, dt, settle + n_seg as f64 * seg_len + 1.0)
        .temperature(temperature)
        .seed(5)
        .run()?
        .drop_before(settle);
    let seg = (seg_len / dt).round() as usize;
    let theta = &rec.angles()[..n_seg * seg];
    let w = welch(theta, 1.0 / dt, seg, Window::Hann, 0.0)?;
    let spec = &w.average;
    let m = spec.n_segments_used() as f64;

    let none = DriveSignal::<f64>::None;
    let (mut inside, mut total) = (0usize, 0usize);
    for (&f, &p) in spec.frequencies().iter().zip(spec.psd()) {
        if f <= 0.0 || f > 50.0 {
            continue;
        }
        let s = analytic_angle_psd(f, &params, temperature, &none)?.continuous;
        total += 1;
        if (p - s).abs() <= 3.0 * s / m.sqrt() {
            inside += 1;
        }
    }
    let frac = inside as f64 / total as f64;

    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    let var = theta.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / theta.len() as f64;
    let kt = 1.380_649e-23 * temperature;
    let expected = kt / (params.inertia() * (2.0 * PI * params.f_res()).powi(2));
    let eq = var / expected - 1.0;
    Ok((
        frac >= 0.95 && eq.abs() < 0.05,
        format!(
            "{:.2}% of {total} bins within 3 sigma, variance off by {:+.2}%",
            100.0 * frac,
            100.0 * eq
        ),
    ))
}

fn bundled_scenario(name: &str) -> Result<(RunConfig, Scenario)> {
    let cfg = RunConfig::from_toml_str(PAPER_REPLICA)?;
    let s = cfg
        .scenario
        .iter()
        .find(|s| s.name == name)
        .cloned()
        .ok_or_else(|| {
            fmto_core::Error::Config(format!("bundled config has no scenario '{name}'"))
        })?;
    Ok((cfg, s))
}

fn calibration_round_trip() -> Result<(bool, String)> {
    let (cfg, s) = bundled_scenario("calibration")?;
    assert_eq!(s.command, Command::Calibrate);
    let params = s.oscillator(&cfg.presets())?;
    let c = run_calibration(
        &params,
        s.temperature,
        &s.geometry,
        s.tracker,
        &s.calibrate,
        s.seed,
    )?;
    let c_err = c.transfer.c_at_cal() / c.theoretical_c - 1.0;
    let sq = c.fit.sigma_q();
    let ok = c_err.abs() < 0.05
        && (c.fit.q_factor - 39.0).abs() <= 0.4
        && sq <= 0.4
        && (c.fit.f_r - 4.99).abs() <= 0.01;
    Ok((
        ok,
        format!(
            "C_T {:.4e} px/T vs {:.4e} ({:+.2}%), f_r {:.5} Hz, Q {:.2} +- {:.2}",
            c.transfer.c_at_cal(),
            c.theoretical_c,
            100.0 * c_err,
            c.fit.f_r,
            c.fit.q_factor,
            sq
        ),
    ))
}

/// Spot track of a pure sinusoidal angle `amp sin(2 pi f t)`.
fn sinusoid(amp: f64, f: f64, duration: f64, dt: f64) -> Result<AngleSeries> {
    let n = (duration / dt).round() as usize + 1;
    let w = 2.0 * PI * f;
    let theta = (0..n).map(|i| amp * (w * i as f64 * dt).sin()).collect();
    let rate = (0..n)
        .map(|i| amp * w * (w * i as f64 * dt).cos())
        .collect();
    AngleSeries::from_angles(dt, theta, Some(rate))
}

/// Noise: a still spot, the standard deviation inside each 1 s window.
/// Linearity: tracked minus still track rendered with the same noise
/// draws, so the tracker response is measured without its own white
/// floor, lock-in against the true spot motion.
fn tracker_resolution() -> Result<(bool, String)> {
    let g = ReadoutGeometry::default();
    let tracker = TrackerSettings::default();
    let fs = g.frame_rate;
    let lever = g.lever_gain();

    let still = AngleSeries::from_angles(1.0 / fs, vec![0.0; (200.0 * fs) as usize + 1], None)?;
    let track = render_and_track(&still, &g, Jitter::none(), true, 11, tracker)?;
    let win = fs as usize;
    let stds: Vec<f64> = track
        .positions()
        .chunks_exact(win)
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (c.len() - 1) as f64).sqrt() / lever
        })
        .collect();
    let noise = (stds.iter().map(|s| s * s).sum::<f64>() / stds.len() as f64).sqrt();

    let f = 4.99;
    let duration = 400.0;
    let dt = 1e-3;
    let seed = 12;
    let base_series = sinusoid(0.0, f, duration, dt)?;
    let base = render_and_track(&base_series, &g, Jitter::none(), true, seed, tracker)?;
    let mut worst = 0.0f64;
    let mut gains = Vec::new();
    for amp in [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
        let series = sinusoid(amp, f, duration, dt)?;
        let tr = render_and_track(&series, &g, Jitter::none(), true, seed, tracker)?;
        let diff: Vec<f64> = tr
            .positions()
            .iter()
            .zip(base.positions())
            .map(|(a, b)| a - b)
            .collect();
        let measured = lock_in_series(tr.timestamps(), &diff, f)?.amplitude;
        let r = FrameRenderer::new(&series, g, Jitter::none(), false, 0)?;
        let truth: Vec<f64> = (0..r.len())
            .map(|i| r.spot_position(i))
            .collect::<Result<_>>()?;
        let expected = lock_in_series(r.actual_timestamps(), &truth, f)?.amplitude;
        let gain = measured / expected;
        worst = worst.max((gain - 1.0).abs());
        gains.push(format!("{gain:.4}"));
    }
    Ok((
        noise < 2e-8 && worst < 0.01,
        format!(
            "1 s window std {noise:.3e} rad, gain over 1e-8..1e-3 rad: {}",
            gains.join(" ")
        ),
    ))
}

/// Ensemble of 20 records of 1000 s, true spot positions sampled at the
/// jittered frame times.
fn jitter_correction() -> Result<(bool, String)> {
    let g = ReadoutGeometry::default();
    let f = 4.99;
    let sigma = 2e-3;
    let amp = 1e-5;
    let series = sinusoid(amp, f, 1000.0, 1e-3)?;
    let truth_px = fmto_core::optics::angle_to_displacement(amp, &g)?;
    let (mut act, mut nom) = (0.0, 0.0);
    let runs = 20;
    for k in 0..runs {
        let r = FrameRenderer::new(&series, g, Jitter::gaussian(sigma), false, 100 + k)?;
        let pos: Vec<f64> = (0..r.len())
            .map(|i| r.spot_position(i))
            .collect::<Result<_>>()?;
        let n = pos.len();
        let track = SpotTrack::new(
            pos,
            r.actual_timestamps().to_vec(),
            r.nominal_timestamps().to_vec(),
            vec![1.0; n],
            vec![0.0; n],
        )?;
        act += lock_in(&track, f, true)?.amplitude;
        nom += lock_in(&track, f, false)?.amplitude;
    }
    let act_err = act / runs as f64 / truth_px - 1.0;
    let atten = 1.0 - nom / runs as f64 / truth_px;
    let predicted = 1.0 - (-(2.0 * PI * f * sigma).powi(2) / 2.0).exp();
    let rel = atten / predicted - 1.0;
    Ok((
        act_err.abs() < 0.005 && rel.abs() < 0.2,
        format!(
            "actual-time error {:+.4}%, nominal attenuation {:.4}% vs predicted {:.4}%",
            100.0 * act_err,
            100.0 * atten,
            100.0 * predicted
        ),
    ))
}

fn thermal_plausibility() -> Result<(bool, String)> {
    let eta = oscillator_thermal_sensitivity(&OscillatorParams::reference(), 300.0)?;
    Ok((
        eta < 391e-15,
        format!("thermal eta {:.1} fT/sqrt(Hz) at 300 K", eta * 1e15),
    ))
}

fn bound_regression() -> Result<(bool, String)> {
    let (cfg, s) = bundled_scenario("bounds")?;
    let dir = tempfile::tempdir()?;
    // the bundled scenario adds numeric and thermal curves; the golden
    // file locks the measured bound only
    fmto_cli::commands::cmd_bounds(&s, &cfg.presets(), dir.path())?;
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/bounds_reference.csv");
    let read = |p: &Path| -> Result<Vec<(f64, f64)>> {
        let mut r = csv::Reader::from_path(p)?;
        r.records()
            .map(|rec| {
                let rec = rec?;
                let v = |i: usize| {
                    rec[i]
                        .parse::<f64>()
                        .map_err(|e| fmto_core::Error::Config(e.to_string()))
                };
                Ok((v(0)?, v(1)?))
            })
            .collect()
    };
    let want = read(&golden)?;
    let got = read(&dir.path().join("bounds.csv"))?;
    if want.len() != got.len() {
        return Ok((
            false,
            format!("{} rows, golden has {}", got.len(), want.len()),
        ));
    }
    let worst = want
        .iter()
        .zip(&got)
        .map(|(a, b)| ((a.0 - b.0) / a.0).abs().max(((a.1 - b.1) / a.1).abs()))
        .fold(0.0, f64::max);
    let best = got.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok((
        worst <= 1e-10,
        format!(
            "{} rows, worst relative deviation {worst:.1e}, best bound {best:.3e}",
            got.len()
        ),
    ))
}
