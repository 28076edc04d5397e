//! Figure reproduction runs: grids, fixed-angle spectra, TAM spectra and
//! (Θ, θ_κ) maps, written as CSV with a text report and a gnuplot script.

use std::fmt::Write as _;
use std::path::PathBuf;

use log::info;

use crate::cache::{write_atomic, BandCache};
use crate::config::RunConfig;
use crate::constants::omega_to_kev;
use crate::error::{Error, Result};
use crate::kinematics::doppler_edges;
use crate::model::{BuildReport, ChannelingModel};
use crate::output::{gnuplot_script, grid_csv};
use crate::scan::{
    dominant_pair, find_edges, find_lobes, fixed_theta_spectra, side_integrals, tam_spectrum,
    theta_thetak_map, total_intensity, Axis, IntensityGrid, WeightedTransition,
};

pub const FIGURES: [&str; 6] = ["fig1", "fig2", "fig3", "fig4", "fig5-spectra", "fig5-map"];

/// Minimum share of the strongest lobe for a lobe to count as dominant.
pub const LOBE_DOMINANCE: f64 = 0.1;

/// Photon parameters fixed by each figure.
pub fn apply_preset(cfg: &mut RunConfig, figure: &str) -> Result<()> {
    let (theta_k, m): (f64, &[i32]) = match figure {
        "fig1" => (30.0, &[6]),
        "fig2" => (30.0, &[3]),
        "fig3" => (30.0, &[9]),
        "fig4" => (60.0, &[]),
        "fig5-spectra" => (60.0, &[3, 6, 9]),
        "fig5-map" => (cfg.photon.theta_k_deg, &[3, 6, 9]),
        other => return Err(Error::UnknownFigure(other.to_string())),
    };
    cfg.photon.theta_k_deg = theta_k;
    if !m.is_empty() {
        cfg.photon.m = m.to_vec();
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub report: String,
    pub build: BuildReport,
}

fn nearest_index(axis: &Axis, x: f64) -> usize {
    axis.values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map_or(0, |(i, _)| i)
}

fn list(v: &[f64]) -> String {
    if v.is_empty() {
        return "none".into();
    }
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn m_tag(m: i32) -> String {
    format!("m{m}")
}

struct Pending {
    files: Vec<(String, String)>,
    plots: Vec<(String, usize)>,
}

impl Pending {
    fn grid(&mut self, name: String, title: &str, grid: &IntensityGrid, cfg: &RunConfig) {
        self.plots.push((name.clone(), grid.axes.len()));
        self.files.push((name, grid_csv(title, grid, cfg)));
    }
}

/// Doppler edges (keV) scaled to emission at `psi` from the axis, kept inside the ω window.
fn window_edges(transitions: &[WeightedTransition], beta: f64, psi: f64, omega: &Axis) -> Vec<f64> {
    let freqs: Vec<f64> = transitions.iter().map(|t| t.transition.omega_fi).collect();
    let shift = (1.0 - beta) / (1.0 - beta * psi.cos());
    let (lo, hi) = (omega.values[0], *omega.values.last().unwrap_or(&0.0));
    let mut edges: Vec<f64> = doppler_edges(&freqs, beta)
        .edges
        .into_iter()
        .map(|e| omega_to_kev(e) * shift)
        .filter(|e| (lo..=hi).contains(e))
        .collect();
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    edges
}

fn angular_figure(
    figure: &str,
    cfg: &RunConfig,
    model: &ChannelingModel,
    transitions: &[WeightedTransition],
    pending: &mut Pending,
    report: &mut String,
) -> Result<()> {
    let settings = cfg.scan_settings();
    let beta = model.beam.beta;
    let theta_k = cfg.theta_k();
    let omega = cfg.omega_axis();
    let theta = cfg.theta_axis();
    let ms = &cfg.photon.m;
    let maps = total_intensity(transitions, beta, &omega, &theta, theta_k, ms, &settings)?;
    let axis_spectra = fixed_theta_spectra(transitions, beta, &omega, theta_k, theta_k, ms, &settings)?;
    let edges = window_edges(transitions, beta, 0.0, &omega);
    let _ = writeln!(report, "doppler edges in window (keV): {}", list(&edges));
    for ((&m, map), axis_spec) in ms.iter().zip(&maps).zip(&axis_spectra) {
        let tag = m_tag(m);
        let _ = writeln!(report, "\n[{tag}, theta_k = {} deg]", cfg.photon.theta_k_deg);
        pending.grid(format!("{figure}_{tag}_map.csv"), &format!("{figure} map"), map, cfg);
        let lobes = find_lobes(map);
        let _ = writeln!(report, "lobes (Theta_deg, omega_keV, smoothed intensity), strongest first:");
        for l in lobes.iter().take(8) {
            let _ = writeln!(report, "  {:.3} {:.3} {:.6e}", l.theta, l.omega, l.value);
        }
        let (lo, hi) = dominant_pair(&lobes, cfg.photon.theta_k_deg, LOBE_DOMINANCE);
        let fmt = |l: Option<crate::scan::Lobe>| l.map_or("none".to_string(), |l| format!("{:.3} deg", l.theta));
        let _ = writeln!(report, "dominant lobes: below {}, above {}", fmt(lo), fmt(hi));
        let (below, above) = side_integrals(map, cfg.photon.theta_k_deg);
        let _ = writeln!(
            report,
            "integrated intensity: Theta < theta_k {below:.6e}, Theta > theta_k {above:.6e}"
        );
        for lobe in [lo, hi].into_iter().flatten() {
            let col = nearest_index(&theta, lobe.theta);
            let th = theta.values[col];
            let spec = IntensityGrid::new(vec![omega.clone()], map.column(col))?
                .with_metadata("m", m)
                .with_metadata("theta_k_deg", cfg.photon.theta_k_deg)
                .with_metadata("Theta_deg", th);
            let drops = find_edges(&spec, cfg.scan.edge_threshold);
            let psi = (th - cfg.photon.theta_k_deg).to_radians();
            let shifted = window_edges(transitions, beta, psi, &omega);
            let _ = writeln!(report, "spectrum at Theta = {th:.3} deg: drops at {} keV", list(&drops));
            let _ = writeln!(report, "  off-axis edges hbar*Omega/(1 - beta cos(Theta - theta_k)): {}", list(&shifted));
            pending.grid(format!("{figure}_{tag}_Theta{th:.2}.csv"), &format!("{figure} spectrum"), &spec, cfg);
        }
        let drops = find_edges(axis_spec, cfg.scan.edge_threshold);
        let _ = writeln!(report, "spectrum at Theta = theta_k: drops at {} keV", list(&drops));
        pending.grid(format!("{figure}_{tag}_axis.csv"), &format!("{figure} spectrum"), axis_spec, cfg);
    }
    Ok(())
}

fn tam_figure(
    figure: &str,
    cfg: &RunConfig,
    model: &ChannelingModel,
    transitions: &[WeightedTransition],
    pending: &mut Pending,
    report: &mut String,
) -> Result<()> {
    let ms = cfg.tam_range();
    let grid = tam_spectrum(
        transitions,
        model.beam.beta,
        &cfg.omega_axis(),
        &cfg.theta_axis(),
        cfg.theta_k(),
        &ms,
        &cfg.scan_settings(),
    )?;
    let _ = writeln!(report, "TAM spectrum at theta_k = {} deg ({} values)", cfg.photon.theta_k_deg, ms.len());
    let _ = writeln!(report, "m, intensity, I(m)/I(-m)");
    for (i, &m) in grid.axes[0].values.iter().enumerate() {
        let mirror = grid.axes[0].values.iter().position(|&x| x == -m);
        let ratio = mirror.map_or("n/a".to_string(), |j| format!("{:.6}", grid.values[i] / grid.values[j]));
        let _ = writeln!(report, "  {m} {:.6e} {ratio}", grid.values[i]);
    }
    pending.grid(format!("{figure}_tam.csv"), &format!("{figure} TAM spectrum"), &grid, cfg);
    Ok(())
}

fn map_figure(
    figure: &str,
    cfg: &RunConfig,
    model: &ChannelingModel,
    transitions: &[WeightedTransition],
    pending: &mut Pending,
    report: &mut String,
) -> Result<()> {
    let (theta, theta_k) = cfg.map_axes();
    let maps = theta_thetak_map(
        transitions,
        model.beam.beta,
        cfg.scan.map_omega_kev,
        &theta,
        &theta_k,
        &cfg.photon.m,
        &cfg.scan_settings(),
    )?;
    for (&m, map) in cfg.photon.m.iter().zip(&maps) {
        let tag = m_tag(m);
        let _ = writeln!(report, "\n[{tag}, hbar*omega = {} keV]", cfg.scan.map_omega_kev);
        let _ = writeln!(report, "theta_k_deg, Theta_deg of the maximum");
        for (c, tk) in theta_k.values.iter().enumerate() {
            let col = map.column(c);
            let best = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap_or(0);
            let _ = writeln!(report, "  {tk:.3} {:.3}", theta.values[best]);
        }
        pending.grid(format!("{figure}_{tag}_theta_thetak.csv"), &format!("{figure} map"), map, cfg);
    }
    Ok(())
}

/// Runs one figure with a fully resolved configuration and writes its files
/// into `cfg.output.directory`. Nothing is written unless every grid succeeds.
pub fn run_figure(figure: &str, cfg: &RunConfig, cache: Option<&BandCache>) -> Result<FigureOutput> {
    if !FIGURES.contains(&figure) {
        return Err(Error::UnknownFigure(figure.to_string()));
    }
    let (model, build) = ChannelingModel::build(cfg, cache)?;
    let transitions = model.weighted(cfg.numerics.weight_floor);
    if transitions.is_empty() {
        return Err(Error::NoTransitions);
    }
    let mut report = String::new();
    let _ = writeln!(report, "# twistchan {figure} report");
    let _ = writeln!(
        report,
        "gamma = {:.6}, theta_C = {:.6e} rad, theta_0 = {:.6e} rad, well depth = {:.4} eV",
        model.beam.gamma, model.beam.theta_c, model.beam.theta_0, model.well.depth
    );
    let _ = writeln!(
        report,
        "bands = {}, transitions = {} ({} above weight floor), population sum = {:.8}",
        model.band_sets[0].states.len(),
        model.transitions.len(),
        transitions.len(),
        model.populations.iter().sum::<f64>()
    );
    let mut pending = Pending {
        files: Vec::new(),
        plots: Vec::new(),
    };
    match figure {
        "fig4" => tam_figure(figure, cfg, &model, &transitions, &mut pending, &mut report)?,
        "fig5-map" => map_figure(figure, cfg, &model, &transitions, &mut pending, &mut report)?,
        _ => angular_figure(figure, cfg, &model, &transitions, &mut pending, &mut report)?,
    }
    let dir = &cfg.output.directory;
    let mut files = Vec::new();
    if cfg.output.gnuplot {
        pending.files.push((format!("{figure}.gp"), gnuplot_script(&pending.plots)));
    }
    pending.files.push((format!("{figure}_report.txt"), report.clone()));
    for (name, text) in &pending.files {
        let path = dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        info!("[cli] wrote {}", path.display());
        files.push(path);
    }
    Ok(FigureOutput { files, report, build })
}
