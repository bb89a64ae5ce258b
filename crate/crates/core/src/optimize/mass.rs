//! Mass-distribution design: minimize the RMS of the linearizing torque along
//! the sampled reference, subject to a centered equilibrium.

use nalgebra::Vector2;
use serde::Serialize;

use super::ga::{ga_minimize, GaConfig, GenerationStats};
use super::rms;
use crate::dynamics::{MassBounds, MassParams, MinimalFrame, MinimalTemplate};
use crate::error::{Error, Result};
use crate::mechanism::MechanismModel;
use crate::reference::{PhaseMaps, RefSample, ReferenceTrajectory};
use crate::zerodyn::{center_from_ratios, nu_from_frame, slice_frame, CenterReport, SigmaSample, SliceTerms};

/// Everything the mass objective needs, precomputed along the reference samples.
#[derive(Debug, Clone)]
pub struct MassProblem {
    pub model: MechanismModel,
    pub height: f64,
    pub samples: Vec<RefSample>,
    pub maps: PhaseMaps,
    templates: Vec<MinimalTemplate>,
}

/// Objective terms for one mass distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassEvaluation {
    pub rms: f64,
    pub nu: Vec<f64>,
    /// Ideal spring at each sample, in sample order.
    pub sigma: Vec<SigmaSample>,
    pub center: Option<CenterReport>,
}

impl MassEvaluation {
    pub fn is_feasible(&self) -> bool {
        self.center.is_some_and(|c| c.is_center())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassOptResult {
    pub pm: MassParams,
    pub rms: f64,
    pub baseline_rms: f64,
    pub sigma: Vec<SigmaSample>,
    pub center: CenterReport,
    pub telemetry: Vec<GenerationStats>,
    pub evaluations: usize,
}

impl MassOptResult {
    pub fn reduction(&self) -> f64 {
        1.0 - self.rms / self.baseline_rms
    }
}

fn evaluate_frames<I>(frames: I, problem: &MassProblem) -> Result<MassEvaluation>
where
    I: Iterator<Item = Result<MinimalFrame>>,
{
    let n = problem.samples.len();
    let mut nu = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut ratios = Vec::with_capacity(n);
    for (frame, s) in frames.zip(&problem.samples) {
        let frame = frame?;
        frame.check_positive_definite()?;
        let terms = SliceTerms::from_frame(&frame);
        terms.check_alpha()?;
        let point = SigmaSample::from_terms(&terms, &problem.maps)?;
        nu.push(nu_from_frame(&frame, s.xdot, point.sigma)?);
        xs.push(s.x);
        ratios.push(point.gamma_hat / terms.alpha);
        sigma.push(point);
    }
    Ok(MassEvaluation {
        rms: rms(&nu),
        nu,
        sigma,
        center: center_from_ratios(&xs, &ratios).ok(),
    })
}

impl MassProblem {
    /// Sample the reference `n` times and build the phase maps at the same resolution.
    pub fn new(model: &MechanismModel, reference: &ReferenceTrajectory, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("at least two reference samples required".into()));
        }
        let samples = reference.sample(n);
        let maps = reference.phase_maps(n)?;
        let height = reference.height();
        let templates = samples
            .iter()
            .map(|s| MinimalTemplate::build(model, &Vector2::new(s.x, height)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: model.clone(),
            height,
            samples,
            maps,
            templates,
        })
    }

    /// Objective via the precomputed kinematic templates (GA path).
    pub fn evaluate(&self, pm: &MassParams) -> Result<MassEvaluation> {
        evaluate_frames(self.templates.iter().map(|t| Ok(t.frame(&self.model, pm))), self)
    }

    /// Objective with the frames rebuilt from scratch at every sample.
    pub fn evaluate_direct(&self, pm: &MassParams) -> Result<MassEvaluation> {
        evaluate_frames(self.samples.iter().map(|s| slice_frame(&self.model, pm, self.height, s.x)), self)
    }
}

/// GA search over the mass box. The zero-mass design is always in the initial population.
pub fn optimize_mass(problem: &MassProblem, bounds: &MassBounds, cfg: &GaConfig, workers: usize) -> Result<MassOptResult> {
    bounds.validate()?;
    let baseline = problem.evaluate_direct(&MassParams::default())?;
    let penalty = cfg.penalty * baseline.rms.max(f64::MIN_POSITIVE);
    let fitness = |v: &[f64]| -> f64 {
        match problem.evaluate(&MassParams::from_slice(v)) {
            Ok(e) if e.is_feasible() => e.rms,
            Ok(e) => e.rms + penalty,
            Err(_) => 2.0 * penalty,
        }
    };
    let result = ga_minimize(fitness, &bounds.lower(), &bounds.upper(), cfg, &[vec![0.0; 4]], workers)?;
    let pm = MassParams::from_slice(&result.best);
    let best = problem.evaluate_direct(&pm)?;
    let center = match best.center {
        Some(c) if c.is_center() => c,
        _ => return Err(Error::InfeasibleProblem),
    };
    Ok(MassOptResult {
        pm,
        rms: best.rms,
        baseline_rms: baseline.rms,
        sigma: best.sigma,
        center,
        telemetry: result.telemetry,
        evaluations: result.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::make_cosine_reference;
    use crate::zerodyn::nu_on_reference;

    fn problem(n: usize) -> MassProblem {
        let r = make_cosine_reference(0.03, &[0.05, 0.012], 0.5, 0.15).unwrap();
        MassProblem::new(&MechanismModel::table_one(), &r, n).unwrap()
    }

    #[test]
    fn template_and_direct_routes_agree() {
        let p = problem(60);
        let pm = MassParams::new(0.07, 0.03, -0.02, 0.01);
        let a = p.evaluate(&pm).unwrap();
        let b = p.evaluate_direct(&pm).unwrap();
        assert!((a.rms - b.rms).abs() < 1e-8 * b.rms);
        assert_eq!(a.center.is_some(), b.center.is_some());
        for (s, nu) in p.samples.iter().zip(&b.nu).step_by(9) {
            let direct = nu_on_reference(&p.model, &pm, &p.maps, p.height, s).unwrap();
            assert!((direct - nu).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_design_is_centered() {
        let p = problem(100);
        let e = p.evaluate_direct(&MassParams::default()).unwrap();
        assert!(e.is_feasible());
        assert!(e.rms > 0.0);
    }

    #[test]
    fn small_budget_dominates_baseline() {
        let p = problem(50);
        let cfg = GaConfig {
            population: 20,
            generations: 10,
            restarts: 1,
            seed: 5,
            ..GaConfig::default()
        };
        let r = optimize_mass(&p, &MassBounds::default(), &cfg, 1).unwrap();
        assert!(r.rms <= r.baseline_rms);
        assert!(MassBounds::default().contains(&r.pm));
        assert!(r.center.omega_s > 0.0);
        assert_eq!(r.sigma.len(), 50);
    }
}
