//! Process generators for the simulation experiments.
//!
//! Difference curves are drawn from the Karhunen-Loeve expansion
//!
//! ```text
//! W(t) = sum_{k=1}^K  sqrt(2) / ((k - 0.5) pi) * Z_k * sin((k - 0.5) pi t)
//! ```
//!
//! on \[0,1\]. With Z_k i.i.d. standard normal this is standard Brownian
//! motion (covariance kernel min(s,t)); with Z_k = U_k / sqrt(V/df) for one
//! chi-square mixing variable V per curve it is the t process with df degrees
//! of freedom. Contaminated samples replace each curve, independently with
//! probability epsilon, by a scale-inflated Brownian path (scale 4 gives the
//! kernel 16 min(s,t)).
//!
//! Curve i of a sample depends only on `(seed, i)`, so a prefix of a larger
//! sample equals the smaller sample and generation parallelizes freely.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fspace::{axpby, same_grid, Curve, Grid, PairedDiffSample};
use crate::seeding::{mix, stream_rng};

/// Distribution family of the difference curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    /// Standard Brownian motion.
    SBm,
    /// t process: Brownian motion divided by an independent sqrt(chi2_df/df).
    TProcess { df: u32 },
}

/// A process on a grid, truncated to `kl_terms` expansion terms.
#[derive(Debug, Clone)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub kl_terms: usize,
    pub grid: Arc<Grid>,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, kl_terms: usize, grid: Arc<Grid>) -> Result<ProcessSpec> {
        if kl_terms == 0 {
            return Err(Error::invalid("need at least one expansion term"));
        }
        if let ProcessKind::TProcess { df } = kind {
            if df == 0 {
                return Err(Error::invalid(
                    "t process needs at least 1 degree of freedom",
                ));
            }
        }
        Ok(ProcessSpec {
            kind,
            kl_terms,
            grid,
        })
    }

    /// Spec with the default truncation K = m (the grid resolution).
    pub fn with_default_terms(kind: ProcessKind, grid: Arc<Grid>) -> Result<ProcessSpec> {
        let terms = grid.len();
        ProcessSpec::new(kind, terms, grid)
    }
}

/// Mixture `(1-epsilon) P + epsilon Q` where Q is the clean Brownian path
/// scaled by `contaminant_scale`.
#[derive(Debug, Clone)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    pub clean: ProcessSpec,
    pub contaminant_scale: f64,
    /// Contaminate exactly `ceil(epsilon * n)` curves instead of i.i.d.
    /// Bernoulli draws.
    pub fixed_count: bool,
}

impl ContaminationSpec {
    pub fn new(
        epsilon: f64,
        clean: ProcessSpec,
        contaminant_scale: f64,
    ) -> Result<ContaminationSpec> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid(format!(
                "epsilon must be in [0,1), got {epsilon}"
            )));
        }
        if !(contaminant_scale.is_finite() && contaminant_scale > 0.0) {
            return Err(Error::invalid("contaminant scale must be positive"));
        }
        Ok(ContaminationSpec {
            epsilon,
            clean,
            contaminant_scale,
            fixed_count: false,
        })
    }
}

/// Location shift families used in the power studies.
#[derive(Debug, Clone)]
pub enum ShiftFamily {
    /// Constant shift `c`.
    Eta1,
    /// Linear shift `c t`.
    Eta2,
    /// Parabolic shift `c t (1-t)`.
    Eta3,
    /// `c` times a caller-supplied shape on the experiment grid.
    Custom(Curve),
}

impl ShiftFamily {
    pub fn label(&self) -> &'static str {
        match self {
            ShiftFamily::Eta1 => "eta1",
            ShiftFamily::Eta2 => "eta2",
            ShiftFamily::Eta3 => "eta3",
            ShiftFamily::Custom(_) => "custom",
        }
    }
}

/// A shift family together with its magnitude.
#[derive(Debug, Clone)]
pub struct ShiftSpec {
    pub family: ShiftFamily,
    pub c: f64,
}

impl ShiftSpec {
    pub fn new(family: ShiftFamily, c: f64) -> Result<ShiftSpec> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid(format!(
                "shift magnitude must be >= 0, got {c}"
            )));
        }
        Ok(ShiftSpec { family, c })
    }
}

/// Evaluate the shift curve on a grid.
pub fn make_shift(spec: &ShiftSpec, grid: &Arc<Grid>) -> Result<Curve> {
    let c = spec.c;
    match &spec.family {
        ShiftFamily::Eta1 => Curve::from_fn(grid.clone(), |_| c),
        ShiftFamily::Eta2 => Curve::from_fn(grid.clone(), |t| c * t),
        ShiftFamily::Eta3 => Curve::from_fn(grid.clone(), |t| c * t * (1.0 - t)),
        ShiftFamily::Custom(shape) => {
            if !same_grid(shape.grid(), grid) {
                return Err(Error::GridMismatch);
            }
            Ok(shape.scale(c))
        }
    }
}

/// Translate every curve of the sample by the shift.
pub fn apply_shift(sample: &PairedDiffSample, shift: &Curve) -> Result<PairedDiffSample> {
    if !same_grid(sample.grid(), shift.grid()) {
        return Err(Error::GridMismatch);
    }
    let diffs = sample
        .diffs()
        .iter()
        .map(|w| axpby(1.0, w, 1.0, shift))
        .collect::<Result<Vec<_>>>()?;
    PairedDiffSample::new(diffs)
}

/// Reusable sampler: holds the evaluated expansion basis for one spec.
pub struct ProcessSampler {
    spec: ProcessSpec,
    /// `basis[k][j] = sqrt(2)/((k+0.5) pi) * sin((k+0.5) pi t_j)` (k from 0).
    basis: Vec<Vec<f64>>,
}

impl ProcessSampler {
    pub fn new(spec: ProcessSpec) -> ProcessSampler {
        let pi = std::f64::consts::PI;
        let basis = (0..spec.kl_terms)
            .map(|k| {
                let freq = (k as f64 + 0.5) * pi;
                let amp = 2.0_f64.sqrt() / freq;
                spec.grid
                    .points()
                    .iter()
                    .map(|&t| amp * (freq * t).sin())
                    .collect()
            })
            .collect();
        ProcessSampler { spec, basis }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.spec.grid
    }

    /// Draw curve `index` of the sample identified by `seed`.
    fn curve(&self, seed: u64, index: u64) -> Curve {
        let mut rng = stream_rng(seed, index);
        let inv_sqrt_mix = match self.spec.kind {
            ProcessKind::SBm => 1.0,
            ProcessKind::TProcess { df } => {
                let chi = ChiSquared::new(df as f64).expect("df >= 1");
                let v: f64 = chi.sample(&mut rng);
                (v / df as f64).sqrt().recip()
            }
        };
        let m = self.spec.grid.len();
        let mut values = vec![0.0; m];
        for row in &self.basis {
            let z: f64 = rng.sample(StandardNormal);
            let z = z * inv_sqrt_mix;
            for (v, b) in values.iter_mut().zip(row) {
                *v += z * b;
            }
        }
        Curve::new(self.spec.grid.clone(), values).expect("finite KL values")
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PairedDiffSample> {
        if n == 0 {
            return Err(Error::SampleTooSmall { needed: 1, got: 0 });
        }
        let diffs = (0..n as u64).map(|i| self.curve(seed, i)).collect();
        PairedDiffSample::new(diffs)
    }
}

/// n independent curves from the process; curve i is a function of (seed, i).
pub fn sample_process(spec: &ProcessSpec, n: usize, seed: u64) -> Result<PairedDiffSample> {
    ProcessSampler::new(spec.clone()).sample(n, seed)
}

const CONTAM_DECISION_TAG: u64 = 0xc0_17a1;

/// Reusable contaminated-mixture sampler.
pub struct ContaminatedSampler {
    spec: ContaminationSpec,
    clean: ProcessSampler,
}

impl ContaminatedSampler {
    pub fn new(spec: ContaminationSpec) -> ContaminatedSampler {
        let clean = ProcessSampler::new(spec.clean.clone());
        ContaminatedSampler { spec, clean }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.clean.grid()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PairedDiffSample> {
        self.sample_with_clean_shift(n, seed, None)
    }

    /// Draw a contaminated sample where a location shift, if given, is
    /// carried by the clean component only: the alternative is
    /// `(1-eps) P_shift + eps Q`. Outlier curves stay pure noise.
    pub fn sample_with_clean_shift(
        &self,
        n: usize,
        seed: u64,
        shift: Option<&Curve>,
    ) -> Result<PairedDiffSample> {
        if n == 0 {
            return Err(Error::SampleTooSmall { needed: 1, got: 0 });
        }
        if let Some(s) = shift {
            if !same_grid(s.grid(), self.grid()) {
                return Err(Error::GridMismatch);
            }
        }
        // Contamination decisions come from their own stream so that
        // epsilon = 0 reproduces the clean sample bit for bit.
        let mut decision_rng = stream_rng(mix(seed, CONTAM_DECISION_TAG), u64::MAX);
        let flags: Vec<bool> = if self.spec.fixed_count {
            let k = (self.spec.epsilon * n as f64).ceil() as usize;
            (0..n).map(|i| i < k.min(n)).collect()
        } else {
            (0..n)
                .map(|_| decision_rng.gen::<f64>() < self.spec.epsilon)
                .collect()
        };
        let diffs = (0..n as u64)
            .map(|i| {
                let path = self.clean.curve(seed, i);
                if flags[i as usize] {
                    Ok(path.scale(self.spec.contaminant_scale))
                } else if let Some(s) = shift {
                    axpby(1.0, &path, 1.0, s)
                } else {
                    Ok(path)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        PairedDiffSample::new(diffs)
    }
}

/// Contaminated mixture sample: each curve is an inflated Brownian path with
/// probability epsilon, otherwise a clean draw.
pub fn sample_contaminated(
    spec: &ContaminationSpec,
    n: usize,
    seed: u64,
) -> Result<PairedDiffSample> {
    ContaminatedSampler::new(spec.clone()).sample(n, seed)
}
