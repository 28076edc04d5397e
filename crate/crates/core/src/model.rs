//! Builds everything a scan needs from a run configuration: crystal, beam,
//! band sets at every beam azimuth, capture populations and transitions.

use log::info;
use rayon::prelude::*;

use crate::bands::{
    critical_angle_from_depth, incidence_points, populations, solve_bands, BandSelection, BandSet,
    BeamModel,
};
use crate::cache::{cache_key, BandCache};
use crate::config::RunConfig;
use crate::error::Result;
use crate::potential::{well_profile, CrystalModel, WellProfile};
use crate::radiation::{build_transitions, Transition};
use crate::scan::{weight_transitions, WeightedTransition};

#[derive(Debug, Clone)]
pub struct ChannelingModel {
    pub crystal: CrystalModel,
    pub beam: BeamModel,
    pub well: WellProfile,
    pub selection: BandSelection,
    /// One band set per beam azimuth; the first one carries the radiating states.
    pub band_sets: Vec<BandSet>,
    pub populations: Vec<f64>,
    pub transitions: Vec<Transition>,
}

/// Cache statistics of one model build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub keys: Vec<String>,
    pub hits: usize,
    pub solves: usize,
}

impl ChannelingModel {
    /// Crystal, beam and band selection implied by `cfg`, without solving.
    pub fn setup(cfg: &RunConfig) -> Result<(CrystalModel, BeamModel, WellProfile, BandSelection)> {
        cfg.validate()?;
        let crystal = cfg.crystal_model();
        let well = well_profile(&crystal, cfg.numerics.cutoff)?;
        let beam = BeamModel::from_energy(cfg.beam.energy_mev, cfg.beam.energy_is_kinetic)?;
        let theta_c = critical_angle_from_depth(well.depth, &beam);
        let beam = beam.with_angles(theta_c, cfg.beam.theta0_over_thetac)?;
        let selection = BandSelection::BelowEnergy {
            energy: well.top,
            extra: cfg.numerics.extra_bands,
        };
        Ok((crystal, beam, well, selection))
    }

    /// Solves or replays the band sets and derives populations and transitions.
    pub fn build(cfg: &RunConfig, cache: Option<&BandCache>) -> Result<(Self, BuildReport)> {
        let (crystal, beam, well, selection) = Self::setup(cfg)?;
        let cutoff = cfg.numerics.cutoff;
        let points = incidence_points(&beam, crystal.a_p, cfg.numerics.n_azimuth);
        let solved: Vec<(String, BandSet, bool)> = points
            .par_iter()
            .map(|p| {
                let key = cache_key(&crystal, &beam, cutoff, p.k_bar, selection);
                if let Some(cache) = cache {
                    if let Some(set) = cache.load(&key)? {
                        return Ok((key, set, true));
                    }
                }
                let states = solve_bands(&crystal, &beam, p.k_bar, cutoff, selection)?;
                let set = BandSet {
                    k_perp: p.k_bar,
                    cutoff,
                    states,
                };
                if let Some(cache) = cache {
                    cache.store(&key, &set)?;
                }
                Ok((key, set, false))
            })
            .collect::<Result<_>>()?;
        let mut report = BuildReport::default();
        let mut band_sets = Vec::with_capacity(solved.len());
        for (key, set, hit) in solved {
            report.keys.push(key);
            if hit {
                report.hits += 1;
            } else {
                report.solves += 1;
            }
            band_sets.push(set);
        }
        let populations = populations(&band_sets, &beam, crystal.a_p, cfg.numerics.n_azimuth)?;
        let transitions = build_transitions(&band_sets[0].states, crystal.a_p)?;
        info!(
            "[bands] gamma = {:.4}, theta_C = {:.4e} rad, {} bands, {} transitions, cache hits {} / solves {}",
            beam.gamma,
            beam.theta_c,
            band_sets[0].states.len(),
            transitions.len(),
            report.hits,
            report.solves
        );
        Ok((
            Self {
                crystal,
                beam,
                well,
                selection,
                band_sets,
                populations,
                transitions,
            },
            report,
        ))
    }

    /// Transitions weighted by population, pruned at `weight_floor`.
    pub fn weighted(&self, weight_floor: f64) -> Vec<WeightedTransition> {
        weight_transitions(&self.transitions, &self.populations, weight_floor)
    }
}
