//! Run configuration in the line-oriented `section.key = value` format.
//!
//! Angles are in degrees and photon energies in keV at this surface; the
//! conversion helpers hand radians and SI units to the physics modules.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::kinematics::DeltaApprox;
use crate::potential::{CrystalModel, Screening};
use crate::radiation::QuadratureSettings;
use crate::scan::{Axis, HelicityPolicy, PhiAverage, ScanSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalSection {
    pub z: f64,
    pub a_p_angstrom: f64,
    pub d_string_angstrom: f64,
    pub string_offsets: Vec<[f64; 2]>,
    pub u1_angstrom: f64,
    pub screening_alpha: Vec<f64>,
    pub screening_beta: Vec<f64>,
    /// `None` selects the Thomas–Fermi length from Z.
    pub a_tf_angstrom: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSection {
    pub energy_mev: f64,
    pub energy_is_kinetic: bool,
    pub theta0_over_thetac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonSection {
    pub theta_k_deg: f64,
    pub m: Vec<i32>,
    pub helicity: HelicityPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsSection {
    pub cutoff: usize,
    pub n_azimuth: usize,
    pub extra_bands: usize,
    pub n_phi: usize,
    pub n_phi_max: usize,
    pub n_phi_avg: usize,
    pub l_coh_periods: f64,
    pub rel_tol: f64,
    pub delta_approx: DeltaApprox,
    pub phi_average: PhiAverage,
    pub weight_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSection {
    pub omega_min_kev: f64,
    pub omega_max_kev: f64,
    pub n_omega: usize,
    /// Θ runs over θ_κ ± this half-width.
    pub theta_halfwidth_deg: f64,
    pub n_theta: usize,
    pub edge_threshold: f64,
    pub tam_m_min: i32,
    pub tam_m_max: i32,
    pub map_omega_kev: f64,
    pub map_theta_min_deg: f64,
    pub map_theta_max_deg: f64,
    pub map_n_theta: usize,
    pub map_theta_k_min_deg: f64,
    pub map_theta_k_max_deg: f64,
    pub map_n_theta_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub gnuplot: bool,
    pub cache_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub crystal: CrystalSection,
    pub beam: BeamSection,
    pub photon: PhotonSection,
    pub numerics: NumericsSection,
    pub scan: ScanSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let si = CrystalModel::silicon_100();
        Self {
            crystal: CrystalSection {
                z: si.z,
                a_p_angstrom: si.a_p,
                d_string_angstrom: si.d_string,
                string_offsets: si.string_offsets,
                u1_angstrom: si.u1,
                screening_alpha: si.screening.alpha,
                screening_beta: si.screening.beta,
                a_tf_angstrom: None,
            },
            beam: BeamSection {
                energy_mev: 10.0,
                energy_is_kinetic: false,
                theta0_over_thetac: 2.0 / 15.0,
            },
            photon: PhotonSection {
                theta_k_deg: 30.0,
                m: vec![6],
                helicity: HelicityPolicy::Sum,
            },
            numerics: NumericsSection {
                cutoff: 16,
                n_azimuth: 8,
                extra_bands: 2,
                n_phi: 64,
                n_phi_max: 1 << 23,
                n_phi_avg: 8,
                l_coh_periods: 1e4,
                rel_tol: 1e-6,
                delta_approx: DeltaApprox::Exact,
                phi_average: PhiAverage::Probability,
                weight_floor: 1e-10,
            },
            scan: ScanSection {
                omega_min_kev: 5.0,
                omega_max_kev: 40.0,
                n_omega: 120,
                theta_halfwidth_deg: 15.0,
                n_theta: 90,
                edge_threshold: 0.5,
                tam_m_min: 5,
                tam_m_max: 15,
                map_omega_kev: 30.0,
                map_theta_min_deg: 10.0,
                map_theta_max_deg: 80.0,
                map_n_theta: 71,
                map_theta_k_min_deg: 10.0,
                map_theta_k_max_deg: 80.0,
                map_n_theta_k: 36,
            },
            output: OutputSection {
                directory: PathBuf::from("out"),
                gnuplot: true,
                cache_dir: PathBuf::from(".twistchan-cache"),
            },
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    if let Some((n, d)) = s.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
        let d: f64 = d.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
        return Ok(n / d);
    }
    s.parse().map_err(|_| format!("bad number '{s}'"))
}

fn parse_list<T, F>(s: &str, f: F) -> std::result::Result<Vec<T>, String>
where
    F: Fn(&str) -> std::result::Result<T, String>,
{
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| f(x.trim())).collect()
}

fn parse_int<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("bad integer '{s}'"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn parse_offsets(s: &str) -> std::result::Result<Vec<[f64; 2]>, String> {
    s.split(';')
        .map(|pair| {
            let xy: Vec<&str> = pair.split_whitespace().collect();
            match xy.as_slice() {
                [x, y] => Ok([parse_f64(x)?, parse_f64(y)?]),
                _ => Err(format!("string offset '{}' needs two numbers", pair.trim())),
            }
        })
        .collect()
}

impl RunConfig {
    /// Every key in serialization order with its current value.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let c = &self.crystal;
        let b = &self.beam;
        let p = &self.photon;
        let n = &self.numerics;
        let s = &self.scan;
        let o = &self.output;
        let offsets = c
            .string_offsets
            .iter()
            .map(|[x, y]| format!("{x} {y}"))
            .collect::<Vec<_>>()
            .join("; ");
        vec![
            ("crystal.z", c.z.to_string()),
            ("crystal.a_p_angstrom", c.a_p_angstrom.to_string()),
            ("crystal.d_string_angstrom", c.d_string_angstrom.to_string()),
            ("crystal.string_offsets", offsets),
            ("crystal.u1_angstrom", c.u1_angstrom.to_string()),
            ("crystal.screening_alpha", join(&c.screening_alpha)),
            ("crystal.screening_beta", join(&c.screening_beta)),
            (
                "crystal.a_tf_angstrom",
                c.a_tf_angstrom.map_or("auto".to_string(), |v| v.to_string()),
            ),
            ("beam.energy_mev", b.energy_mev.to_string()),
            ("beam.energy_is_kinetic", b.energy_is_kinetic.to_string()),
            ("beam.theta0_over_thetac", b.theta0_over_thetac.to_string()),
            ("photon.theta_k_deg", p.theta_k_deg.to_string()),
            ("photon.m", join(&p.m)),
            (
                "photon.helicity",
                match p.helicity {
                    HelicityPolicy::Sum => "sum",
                    HelicityPolicy::Plus => "plus",
                    HelicityPolicy::Minus => "minus",
                }
                .to_string(),
            ),
            ("numerics.cutoff", n.cutoff.to_string()),
            ("numerics.n_azimuth", n.n_azimuth.to_string()),
            ("numerics.extra_bands", n.extra_bands.to_string()),
            ("numerics.n_phi", n.n_phi.to_string()),
            ("numerics.n_phi_max", n.n_phi_max.to_string()),
            ("numerics.n_phi_avg", n.n_phi_avg.to_string()),
            ("numerics.l_coh_periods", n.l_coh_periods.to_string()),
            ("numerics.rel_tol", n.rel_tol.to_string()),
            (
                "numerics.delta_approx",
                match n.delta_approx {
                    DeltaApprox::Exact => "exact",
                    DeltaApprox::Xray => "xray",
                }
                .to_string(),
            ),
            (
                "numerics.phi_average",
                match n.phi_average {
                    PhiAverage::Probability => "probability",
                    PhiAverage::Amplitude => "amplitude",
                }
                .to_string(),
            ),
            ("numerics.weight_floor", n.weight_floor.to_string()),
            ("scan.omega_min_kev", s.omega_min_kev.to_string()),
            ("scan.omega_max_kev", s.omega_max_kev.to_string()),
            ("scan.n_omega", s.n_omega.to_string()),
            ("scan.theta_halfwidth_deg", s.theta_halfwidth_deg.to_string()),
            ("scan.n_theta", s.n_theta.to_string()),
            ("scan.edge_threshold", s.edge_threshold.to_string()),
            ("scan.tam_m_min", s.tam_m_min.to_string()),
            ("scan.tam_m_max", s.tam_m_max.to_string()),
            ("scan.map_omega_kev", s.map_omega_kev.to_string()),
            ("scan.map_theta_min_deg", s.map_theta_min_deg.to_string()),
            ("scan.map_theta_max_deg", s.map_theta_max_deg.to_string()),
            ("scan.map_n_theta", s.map_n_theta.to_string()),
            ("scan.map_theta_k_min_deg", s.map_theta_k_min_deg.to_string()),
            ("scan.map_theta_k_max_deg", s.map_theta_k_max_deg.to_string()),
            ("scan.map_n_theta_k", s.map_n_theta_k.to_string()),
            ("output.directory", o.directory.display().to_string()),
            ("output.gnuplot", o.gnuplot.to_string()),
            ("output.cache_dir", o.cache_dir.display().to_string()),
        ]
    }

    /// Assigns one key; the value is validated later by [`RunConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let c = &mut self.crystal;
        let b = &mut self.beam;
        let p = &mut self.photon;
        let n = &mut self.numerics;
        let s = &mut self.scan;
        let o = &mut self.output;
        match key {
            "crystal.z" => c.z = parse_f64(v)?,
            "crystal.a_p_angstrom" => c.a_p_angstrom = parse_f64(v)?,
            "crystal.d_string_angstrom" => c.d_string_angstrom = parse_f64(v)?,
            "crystal.string_offsets" => c.string_offsets = parse_offsets(v)?,
            "crystal.u1_angstrom" => c.u1_angstrom = parse_f64(v)?,
            "crystal.screening_alpha" => c.screening_alpha = parse_list(v, parse_f64)?,
            "crystal.screening_beta" => c.screening_beta = parse_list(v, parse_f64)?,
            "crystal.a_tf_angstrom" => {
                c.a_tf_angstrom = if v == "auto" { None } else { Some(parse_f64(v)?) }
            }
            "beam.energy_mev" => b.energy_mev = parse_f64(v)?,
            "beam.energy_is_kinetic" => b.energy_is_kinetic = parse_bool(v)?,
            "beam.theta0_over_thetac" => b.theta0_over_thetac = parse_f64(v)?,
            "photon.theta_k_deg" => p.theta_k_deg = parse_f64(v)?,
            "photon.m" => p.m = parse_list(v, parse_int)?,
            "photon.helicity" => {
                p.helicity = match v {
                    "sum" => HelicityPolicy::Sum,
                    "plus" => HelicityPolicy::Plus,
                    "minus" => HelicityPolicy::Minus,
                    _ => return Err(format!("helicity must be sum, plus or minus, got '{v}'")),
                }
            }
            "numerics.cutoff" => n.cutoff = parse_int(v)?,
            "numerics.n_azimuth" => n.n_azimuth = parse_int(v)?,
            "numerics.extra_bands" => n.extra_bands = parse_int(v)?,
            "numerics.n_phi" => n.n_phi = parse_int(v)?,
            "numerics.n_phi_max" => n.n_phi_max = parse_int(v)?,
            "numerics.n_phi_avg" => n.n_phi_avg = parse_int(v)?,
            "numerics.l_coh_periods" => n.l_coh_periods = parse_f64(v)?,
            "numerics.rel_tol" => n.rel_tol = parse_f64(v)?,
            "numerics.delta_approx" => {
                n.delta_approx = match v {
                    "exact" => DeltaApprox::Exact,
                    "xray" => DeltaApprox::Xray,
                    _ => return Err(format!("delta_approx must be exact or xray, got '{v}'")),
                }
            }
            "numerics.phi_average" => {
                n.phi_average = match v {
                    "probability" => PhiAverage::Probability,
                    "amplitude" => PhiAverage::Amplitude,
                    _ => {
                        return Err(format!(
                            "phi_average must be probability or amplitude, got '{v}'"
                        ))
                    }
                }
            }
            "numerics.weight_floor" => n.weight_floor = parse_f64(v)?,
            "scan.omega_min_kev" => s.omega_min_kev = parse_f64(v)?,
            "scan.omega_max_kev" => s.omega_max_kev = parse_f64(v)?,
            "scan.n_omega" => s.n_omega = parse_int(v)?,
            "scan.theta_halfwidth_deg" => s.theta_halfwidth_deg = parse_f64(v)?,
            "scan.n_theta" => s.n_theta = parse_int(v)?,
            "scan.edge_threshold" => s.edge_threshold = parse_f64(v)?,
            "scan.tam_m_min" => s.tam_m_min = parse_int(v)?,
            "scan.tam_m_max" => s.tam_m_max = parse_int(v)?,
            "scan.map_omega_kev" => s.map_omega_kev = parse_f64(v)?,
            "scan.map_theta_min_deg" => s.map_theta_min_deg = parse_f64(v)?,
            "scan.map_theta_max_deg" => s.map_theta_max_deg = parse_f64(v)?,
            "scan.map_n_theta" => s.map_n_theta = parse_int(v)?,
            "scan.map_theta_k_min_deg" => s.map_theta_k_min_deg = parse_f64(v)?,
            "scan.map_theta_k_max_deg" => s.map_theta_k_max_deg = parse_f64(v)?,
            "scan.map_n_theta_k" => s.map_n_theta_k = parse_int(v)?,
            "output.directory" => o.directory = PathBuf::from(v),
            "output.gnuplot" => o.gnuplot = parse_bool(v)?,
            "output.cache_dir" => o.cache_dir = PathBuf::from(v),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies `section.key = value` lines on top of `self`. Blank lines and
    /// `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'section.key = value', got '{line}'")))?;
            self.set(key.trim(), value).map_err(err)?;
        }
        Ok(())
    }

    /// Parses a full configuration over the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let err = |msg: String| Error::Config { line: 0, msg };
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| err(format!("override '{assignment}' is not section.key=value")))?;
        self.set(key.trim(), value).map_err(err)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        let positive = [
            ("crystal.a_p_angstrom", self.crystal.a_p_angstrom),
            ("crystal.d_string_angstrom", self.crystal.d_string_angstrom),
            ("beam.energy_mev", self.beam.energy_mev),
            ("photon.theta_k_deg", self.photon.theta_k_deg),
            ("numerics.l_coh_periods", self.numerics.l_coh_periods),
            ("numerics.rel_tol", self.numerics.rel_tol),
            ("scan.omega_min_kev", self.scan.omega_min_kev),
            ("scan.theta_halfwidth_deg", self.scan.theta_halfwidth_deg),
            ("scan.edge_threshold", self.scan.edge_threshold),
            ("scan.map_omega_kev", self.scan.map_omega_kev),
            ("scan.map_theta_min_deg", self.scan.map_theta_min_deg),
            ("scan.map_theta_k_min_deg", self.scan.map_theta_k_min_deg),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        for (k, v) in [
            ("crystal.z", self.crystal.z),
            ("crystal.u1_angstrom", self.crystal.u1_angstrom),
            ("beam.theta0_over_thetac", self.beam.theta0_over_thetac),
            ("numerics.weight_floor", self.numerics.weight_floor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{k} must be non-negative, got {v}"));
            }
        }
        if self.photon.theta_k_deg >= 90.0 {
            return bad(format!("photon.theta_k_deg must be below 90, got {}", self.photon.theta_k_deg));
        }
        if self.photon.m.is_empty() {
            return bad("photon.m must list at least one value".into());
        }
        if self.scan.omega_max_kev <= self.scan.omega_min_kev {
            return bad("scan.omega_max_kev must exceed scan.omega_min_kev".into());
        }
        if self.scan.map_theta_max_deg <= self.scan.map_theta_min_deg
            || self.scan.map_theta_k_max_deg <= self.scan.map_theta_k_min_deg
        {
            return bad("map ranges must be increasing".into());
        }
        if self.scan.map_theta_max_deg >= 180.0 || self.scan.map_theta_k_max_deg >= 90.0 {
            return bad("map ranges must stay below 180 deg (Theta) and 90 deg (theta_k)".into());
        }
        for (k, v) in [
            ("scan.n_omega", self.scan.n_omega),
            ("scan.n_theta", self.scan.n_theta),
            ("scan.map_n_theta", self.scan.map_n_theta),
            ("scan.map_n_theta_k", self.scan.map_n_theta_k),
            ("numerics.n_azimuth", self.numerics.n_azimuth),
        ] {
            if v < 2 {
                return bad(format!("{k} must be at least 2, got {v}"));
            }
        }
        if self.scan.tam_m_min < 3 || self.scan.tam_m_max < self.scan.tam_m_min {
            return bad(format!(
                "TAM range {}..{} must satisfy 3 <= min <= max",
                self.scan.tam_m_min, self.scan.tam_m_max
            ));
        }
        let c = &self.crystal;
        if c.screening_alpha.len() != c.screening_beta.len() || c.screening_alpha.is_empty() {
            return bad("screening_alpha and screening_beta must be non-empty and equally long".into());
        }
        self.crystal_model()
            .validate()
            .map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        self.scan_settings()
            .validate()
            .map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        Ok(())
    }

    pub fn crystal_model(&self) -> CrystalModel {
        let c = &self.crystal;
        let auto = Screening::moliere(c.z);
        CrystalModel {
            z: c.z,
            a_p: c.a_p_angstrom,
            d_string: c.d_string_angstrom,
            string_offsets: c.string_offsets.clone(),
            u1: c.u1_angstrom,
            screening: Screening {
                alpha: c.screening_alpha.clone(),
                beta: c.screening_beta.clone(),
                a_tf: c.a_tf_angstrom.unwrap_or(auto.a_tf),
            },
        }
    }

    pub fn scan_settings(&self) -> ScanSettings {
        let n = &self.numerics;
        ScanSettings {
            quadrature: QuadratureSettings {
                l_coh: n.l_coh_periods * self.crystal.d_string_angstrom * 1e-10,
                rel_tol: n.rel_tol,
                n_phi: n.n_phi,
                n_phi_max: n.n_phi_max,
                delta_approx: n.delta_approx,
            },
            n_phi_avg: n.n_phi_avg,
            phi_average: n.phi_average,
            helicity: self.photon.helicity,
        }
    }

    pub fn theta_k(&self) -> f64 {
        self.photon.theta_k_deg.to_radians()
    }

    pub fn omega_axis(&self) -> Axis {
        let s = &self.scan;
        Axis::linspace("omega_keV", s.omega_min_kev, s.omega_max_kev, s.n_omega)
    }

    /// Θ axis centred on θ_κ.
    pub fn theta_axis(&self) -> Axis {
        let s = &self.scan;
        let tk = self.photon.theta_k_deg;
        let lo = (tk - s.theta_halfwidth_deg).max(0.0);
        Axis::linspace("Theta_deg", lo, tk + s.theta_halfwidth_deg, s.n_theta)
    }

    pub fn map_axes(&self) -> (Axis, Axis) {
        let s = &self.scan;
        (
            Axis::linspace("Theta_deg", s.map_theta_min_deg, s.map_theta_max_deg, s.map_n_theta),
            Axis::linspace(
                "theta_k_deg",
                s.map_theta_k_min_deg,
                s.map_theta_k_max_deg,
                s.map_n_theta_k,
            ),
        )
    }

    /// m = min..max and −max..−min, in ascending order.
    pub fn tam_range(&self) -> Vec<i32> {
        let (lo, hi) = (self.scan.tam_m_min, self.scan.tam_m_max);
        (-hi..=-lo).chain(lo..=hi).collect()
    }
}
