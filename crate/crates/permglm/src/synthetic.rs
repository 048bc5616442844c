//! Synthetic imaging test beds and rejection-rate experiments.
//!
//! The generator produces subject images on a pixel grid spanning `[-1, 1]^2`:
//! a correlated Gaussian field drives one of seven error structures, a group
//! (and optionally a continuous) factor adds a radially decaying signal bump,
//! and the result feeds the full testing pipeline. Error structures (a)-(g)
//! differ in skewness, bimodality, and how both vary between the centre and
//! the periphery of the image; they exist to stress measures whose power
//! depends on the homogeneity of the statistic's distribution across the
//! domain.
//!
//! [`run_experiment`] estimates rejection rates over many replicates, each
//! fully determined by a derived seed, so an experiment is reproducible under
//! any thread count. Covariance factorisations are computed once per
//! experiment and shared read-only by all replicates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{DesignSpec, Domain, FunctionalDataset};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::parallel;
use crate::pipeline::{run_test, RunSettings};
use crate::rank::MeasureKind;
use crate::rng::{mix_seed, stream_rng};

/// Standard deviations used across the experiment grid, smallest first.
pub const SIGMA_LADDER: [f64; 7] = [0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.25];

/// Correlation scale shared by every error structure except (f) and (g),
/// which mix the two scales below.
pub const BASE_RHO: f64 = 0.15;
const FINE_RHO: f64 = 0.05;
const COARSE_RHO: f64 = 0.3;

/// Radius separating "centre" from "periphery" in the mixed error structures.
const MIX_RADIUS: f64 = 0.5;

/// Largest grid accepted by the dense covariance factorisation.
const MAX_GRID_CELLS: usize = 64 * 64;

/// Error structure of the noise field. The letters follow the experiment
/// design: (a) Gaussian, (b) skewed, (c) increasingly bimodal towards the
/// periphery, (d) bimodal periphery with Gaussian centre, (e) skewed centre
/// with shifted Gaussian periphery, (f) Gaussian with two correlation scales,
/// (g) bimodal with two correlation scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "e")]
    E,
    #[serde(rename = "f")]
    F,
    #[serde(rename = "g")]
    G,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 7] = [
        ErrorKind::A,
        ErrorKind::B,
        ErrorKind::C,
        ErrorKind::D,
        ErrorKind::E,
        ErrorKind::F,
        ErrorKind::G,
    ];

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(ErrorKind::A),
            "b" => Ok(ErrorKind::B),
            "c" => Ok(ErrorKind::C),
            "d" => Ok(ErrorKind::D),
            "e" => Ok(ErrorKind::E),
            "f" => Ok(ErrorKind::F),
            "g" => Ok(ErrorKind::G),
            other => Err(Error::Config(format!(
                "unknown error kind '{other}' (expected one of a-g)"
            ))),
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            ErrorKind::A => "a",
            ErrorKind::B => "b",
            ErrorKind::C => "c",
            ErrorKind::D => "d",
            ErrorKind::E => "e",
            ErrorKind::F => "f",
            ErrorKind::G => "g",
        }
    }

    /// Structures (f) and (g) draw two fields with different correlation
    /// scales; all others draw a single field.
    fn uses_mixed_scales(self) -> bool {
        matches!(self, ErrorKind::F | ErrorKind::G)
    }
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.letter())
    }
}

/// Signal model. `M0` is pure noise; `M1` adds a central bump twice as high
/// for the second group; `M1prime` is the same bump shrunk to a few pixels;
/// `M2` scales the bump by the group factor plus a uniform subject covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "m0")]
    M0,
    #[serde(rename = "m1")]
    M1,
    #[serde(rename = "m1prime")]
    M1prime,
    #[serde(rename = "m2")]
    M2,
}

impl Model {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "m0" => Ok(Model::M0),
            "m1" => Ok(Model::M1),
            "m1prime" | "m1'" => Ok(Model::M1prime),
            "m2" => Ok(Model::M2),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected m0, m1, m1prime or m2)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::M0 => "m0",
            Model::M1 => "m1",
            Model::M1prime => "m1prime",
            Model::M2 => "m2",
        }
    }

    /// Decay rate of the radial signal bump `exp(-decay * ||r||)`; zero
    /// amplitude for the null model.
    fn signal_decay(self) -> Option<f64> {
        match self {
            Model::M0 => None,
            Model::M1 | Model::M2 => Some(10.0),
            Model::M1prime => Some(200.0),
        }
    }

    /// Group labels enter the signal as multipliers 1 and 2, so the expected
    /// group difference at radius `||r||` is exactly the bump height there.
    fn has_covariate(self) -> bool {
        matches!(self, Model::M2)
    }

    /// Nuisance-aware resampling is required once the covariate enters the
    /// design; the plain models permute raw rows.
    pub fn scheme(self) -> crate::permutation::Scheme {
        if self.has_covariate() {
            crate::permutation::Scheme::FreedmanLane
        } else {
            crate::permutation::Scheme::Raw
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Pixel grid over `[-1, 1]^2`. Pixel `(w, h)` sits at the lattice point
/// `(-1 + 2w/(W-1), -1 + 2h/(H-1))`, so the four corners touch the square's
/// corners and, for odd dimensions, the middle pixel sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Config(format!(
                "grid must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(GridSpec { width, height })
    }

    pub fn square(side: usize) -> Result<Self> {
        GridSpec::new(side, side)
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Coordinates of every pixel in location order (x varies fastest).
    pub fn coords(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.cells());
        for h in 0..self.height {
            let y = -1.0 + 2.0 * h as f64 / (self.height - 1) as f64;
            for w in 0..self.width {
                let x = -1.0 + 2.0 * w as f64 / (self.width - 1) as f64;
                out.push([x, y]);
            }
        }
        out
    }

    pub fn domain(&self) -> Domain {
        Domain::Grid {
            width: self.width,
            height: self.height,
        }
    }
}

/// Shape of the correlation function and the role `rho` plays in it. The
/// scale form `exp(-d/rho)` is the default; the rate form `exp(-d*rho)` is
/// the same family under `rho -> 1/rho`. The smooth form `exp(-(d/rho)^2)`
/// has differentiable sample paths, so nearby pixels keep nearly identical
/// values and rank orderings persist over whole patches instead of flipping
/// pixel to pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CorrelationForm {
    #[default]
    #[serde(rename = "scale")]
    Scale,
    #[serde(rename = "rate")]
    Rate,
    #[serde(rename = "smooth")]
    Smooth,
}

impl CorrelationForm {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "scale" => Ok(CorrelationForm::Scale),
            "rate" => Ok(CorrelationForm::Rate),
            "smooth" => Ok(CorrelationForm::Smooth),
            other => Err(Error::Config(format!(
                "unknown correlation form '{other}' (expected scale, rate or smooth)"
            ))),
        }
    }

    fn correlation(self, distance: f64, rho: f64) -> f64 {
        match self {
            CorrelationForm::Scale => (-distance / rho).exp(),
            CorrelationForm::Rate => (-distance * rho).exp(),
            CorrelationForm::Smooth => {
                let scaled = distance / rho;
                (-scaled * scaled).exp()
            }
        }
    }
}

/// Sampler for a stationary Gaussian field over a pixel grid.
///
/// Holds the lower Cholesky factor of the unit-variance covariance, so one
/// draw is a standard-normal vector times a triangular matrix. The factor is
/// built once; sampling borrows the sampler immutably and can run from many
/// threads at once.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    grid: GridSpec,
    rho: f64,
    sigma: f64,
    /// Lower-triangular factor of the unit-variance covariance; scaled by
    /// `sigma` at draw time so one factor serves every standard deviation.
    factor: Mat,
}

impl GrfSampler {
    pub fn new(grid: GridSpec, rho: f64, sigma: f64) -> Result<Self> {
        GrfSampler::with_form(grid, rho, sigma, CorrelationForm::Scale)
    }

    pub fn with_form(
        grid: GridSpec,
        rho: f64,
        sigma: f64,
        form: CorrelationForm,
    ) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Config(format!(
                "correlation scale must be positive, got {rho}"
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::Config(format!(
                "standard deviation must be non-negative, got {sigma}"
            )));
        }
        let n = grid.cells();
        if n > MAX_GRID_CELLS {
            return Err(Error::Config(format!(
                "grid {}x{} exceeds the dense factorisation limit of 64x64 cells",
                grid.width, grid.height
            )));
        }
        let coords = grid.coords();
        let mut cov = nalgebra::DMatrix::<f64>::zeros(n, n);
        for u in 0..n {
            for v in 0..=u {
                let dx = coords[u][0] - coords[v][0];
                let dy = coords[u][1] - coords[v][1];
                let c = form.correlation((dx * dx + dy * dy).sqrt(), rho);
                cov[(u, v)] = c;
                cov[(v, u)] = c;
            }
        }
        // Every form is positive definite on distinct points, but the
        // factorisation can still fail in floating point: the smooth form in
        // particular has eigenvalues decaying below machine precision on
        // dense grids. An escalating diagonal jitter restores positive
        // definiteness; even the largest step shifts each pixel's standard
        // deviation by under 1e-3, invisible next to the field itself.
        let mut chol = nalgebra::Cholesky::new(cov.clone());
        let mut applied = 0.0;
        for jitter in [1e-10, 1e-8, 1e-6] {
            if chol.is_some() {
                break;
            }
            log::warn!(
                "covariance factorisation failed for grid {}x{}, rho {rho}; retrying with {jitter:.0e} diagonal jitter",
                grid.width,
                grid.height
            );
            for i in 0..n {
                cov[(i, i)] += jitter - applied;
            }
            applied = jitter;
            chol = nalgebra::Cholesky::new(cov.clone());
        }
        let chol = chol.ok_or_else(|| {
            Error::Numerical(
                "covariance factorisation failed even with diagonal jitter".to_string(),
            )
        })?;
        let l = chol.l();
        let mut factor = Mat::zeros(n, n);
        for u in 0..n {
            for v in 0..=u {
                factor[(u, v)] = l[(u, v)];
            }
        }
        Ok(GrfSampler {
            grid,
            rho,
            sigma,
            factor,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// One field draw into `out` (length = grid cells).
    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let n = self.grid.cells();
        assert_eq!(out.len(), n, "output buffer does not match the grid");
        if self.sigma == 0.0 {
            out.fill(0.0);
            return;
        }
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for u in 0..n {
            let row = &self.factor.row(u)[..=u];
            let mut acc = 0.0;
            for (l, zv) in row.iter().zip(&z[..=u]) {
                acc += l * zv;
            }
            out[u] = self.sigma * acc;
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.cells()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// One draw of a stationary field; convenience wrapper building a sampler
/// for a single use. Repeated draws should construct [`GrfSampler`] once.
pub fn sample_grf(grid: GridSpec, rho: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let sampler = GrfSampler::new(grid, rho, sigma)?;
    Ok(sampler.sample(&mut stream_rng(seed, 0)))
}

/// Fifth root preserving sign; the periphery transform of structures (d) and
/// (g) pushes mass away from zero, which is what makes them bimodal.
fn odd_root5(x: f64) -> f64 {
    x.signum() * x.abs().powf(0.2)
}

/// Sampler for one of the error structures (a)-(g): one or two Gaussian
/// fields plus a pointwise transform that may depend on the pixel radius.
#[derive(Debug, Clone)]
pub struct ErrorSampler {
    kind: ErrorKind,
    base: GrfSampler,
    /// Second field for the mixed-scale structures (f) and (g): `base` holds
    /// the fine scale, `coarse` the coarse one.
    coarse: Option<GrfSampler>,
    radius: Vec<f64>,
}

impl ErrorSampler {
    pub fn new(kind: ErrorKind, grid: GridSpec, sigma: f64) -> Result<Self> {
        ErrorSampler::with_base_rho(kind, grid, sigma, BASE_RHO)
    }

    /// As [`ErrorSampler::new`] with an explicit correlation scale for the
    /// single-field structures. The mixed-scale structures (f) and (g)
    /// always use their fixed fine and coarse scales.
    pub fn with_base_rho(kind: ErrorKind, grid: GridSpec, sigma: f64, base_rho: f64) -> Result<Self> {
        ErrorSampler::with_correlation(kind, grid, sigma, base_rho, CorrelationForm::Scale)
    }

    /// As [`ErrorSampler::with_base_rho`] with the correlation form made
    /// explicit as well; the form applies to every field the structure
    /// draws, the fixed-scale pair of (f) and (g) included.
    pub fn with_correlation(
        kind: ErrorKind,
        grid: GridSpec,
        sigma: f64,
        base_rho: f64,
        form: CorrelationForm,
    ) -> Result<Self> {
        let (base, coarse) = if kind.uses_mixed_scales() {
            (
                GrfSampler::with_form(grid, FINE_RHO, sigma, form)?,
                Some(GrfSampler::with_form(grid, COARSE_RHO, sigma, form)?),
            )
        } else {
            (GrfSampler::with_form(grid, base_rho, sigma, form)?, None)
        };
        let radius = grid
            .coords()
            .iter()
            .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
            .collect();
        Ok(ErrorSampler {
            kind,
            base,
            coarse,
            radius,
        })
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    pub fn grid(&self) -> GridSpec {
        self.base.grid()
    }

    /// One error-field draw. Structures (f) and (g) consume two independent
    /// field draws from the same generator, in a fixed order.
    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.base.sample_into(rng, out);
        match self.kind {
            ErrorKind::A => {}
            ErrorKind::B => {
                for v in out.iter_mut() {
                    *v = v.exp();
                }
            }
            ErrorKind::C => {
                for (v, r) in out.iter_mut().zip(&self.radius) {
                    *v = 0.25 * v.signum() * v.abs().powf(1.0 / (2.0 * r + 1.0));
                }
            }
            ErrorKind::D => {
                for (v, r) in out.iter_mut().zip(&self.radius) {
                    if *r > MIX_RADIUS {
                        *v = 0.5 * odd_root5(*v);
                    }
                }
            }
            ErrorKind::E => {
                for (v, r) in out.iter_mut().zip(&self.radius) {
                    *v = if *r <= MIX_RADIUS {
                        0.125 * (3.0 * *v).exp()
                    } else {
                        0.125 * (*v + 1.0)
                    };
                }
            }
            ErrorKind::F | ErrorKind::G => {
                let coarse = self
                    .coarse
                    .as_ref()
                    .expect("mixed-scale structure carries a second field");
                let mut cf = vec![0.0; out.len()];
                coarse.sample_into(rng, &mut cf);
                for ((v, c), r) in out.iter_mut().zip(&cf).zip(&self.radius) {
                    if *r > MIX_RADIUS {
                        *v = *c;
                    }
                    if self.kind == ErrorKind::G {
                        *v = 0.5 * odd_root5(*v);
                    }
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.grid().cells()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// One error-field draw of the given structure; convenience wrapper around
/// [`ErrorSampler`] for single use.
pub fn sample_error(kind: ErrorKind, grid: GridSpec, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let sampler = ErrorSampler::new(kind, grid, sigma)?;
    Ok(sampler.sample(&mut stream_rng(seed, 0)))
}

/// Complete recipe for one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub grid: GridSpec,
    pub rho: f64,
    #[serde(default)]
    pub correlation: CorrelationForm,
    pub sigma: f64,
    pub error_kind: ErrorKind,
    pub model: Model,
    pub subjects_per_group: usize,
    pub seed: u64,
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config("rho must be positive".to_string()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config("sigma must be positive".to_string()));
        }
        if self.subjects_per_group < 2 {
            return Err(Error::Config(format!(
                "need at least 2 subjects per group, got {}",
                self.subjects_per_group
            )));
        }
        Ok(())
    }

    fn subjects(&self) -> usize {
        2 * self.subjects_per_group
    }
}

/// Signal bump height at each pixel, or `None` for the null model.
fn signal_profile(model: Model, grid: GridSpec) -> Option<Vec<f64>> {
    let decay = model.signal_decay()?;
    Some(
        grid.coords()
            .iter()
            .map(|c| (-decay * (c[0] * c[0] + c[1] * c[1]).sqrt()).exp())
            .collect(),
    )
}

/// Reusable generator: the error sampler (with its factorisation) plus the
/// signal profile, so many replicates can be drawn cheaply.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    spec: FieldSpec,
    errors: ErrorSampler,
    signal: Option<Vec<f64>>,
}

impl ModelSampler {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        spec.validate()?;
        let errors = ErrorSampler::with_correlation(
            spec.error_kind,
            spec.grid,
            spec.sigma,
            spec.rho,
            spec.correlation,
        )?;
        let signal = signal_profile(spec.model, spec.grid);
        Ok(ModelSampler {
            spec,
            errors,
            signal,
        })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    /// One dataset draw under the given seed. Subject `i` consumes stream
    /// `i` of the seed: first the covariate (when the model has one), then
    /// the error field, so datasets are reproducible subject by subject.
    pub fn dataset(&self, seed: u64) -> Result<(FunctionalDataset, DesignSpec)> {
        let s = self.spec.subjects();
        let per_group = self.spec.subjects_per_group;
        let n = self.spec.grid.cells();
        let mut responses = Mat::zeros(s, n);
        let mut covariate = vec![0.0; s];
        for i in 0..s {
            let mut rng = stream_rng(seed, i as u64);
            if self.spec.model.has_covariate() {
                covariate[i] = rng.gen::<f64>();
            }
            let row = responses.row_mut(i);
            self.errors.sample_into(&mut rng, row);
            if let Some(signal) = &self.signal {
                // Group labels are multipliers 1 and 2: the second group's
                // bump is twice the first's.
                let g = if i < per_group { 1.0 } else { 2.0 };
                let factor = g + if self.spec.model.has_covariate() {
                    covariate[i]
                } else {
                    0.0
                };
                for (v, amp) in row.iter_mut().zip(signal) {
                    *v += amp * factor;
                }
            }
        }
        let dataset = FunctionalDataset::new(responses, self.spec.grid.domain())?;
        let design = if self.spec.model.has_covariate() {
            let mut x = Mat::zeros(s, 1);
            for i in per_group..s {
                x[(i, 0)] = 1.0;
            }
            let mut z = Mat::zeros(s, 2);
            for i in 0..s {
                z[(i, 0)] = 1.0;
                z[(i, 1)] = covariate[i];
            }
            DesignSpec::new(x, z, Mat::from_vec(1, 1, vec![1.0]), false)?
        } else {
            DesignSpec::two_group((per_group, per_group))?
        };
        Ok((dataset, design))
    }
}

/// One dataset under the spec's own seed. Experiments should construct a
/// [`ModelSampler`] and reuse it across replicates instead.
pub fn simulate_dataset(spec: &FieldSpec) -> Result<(FunctionalDataset, DesignSpec)> {
    ModelSampler::new(*spec)?.dataset(spec.seed)
}

/// Rejection-rate estimate for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: MeasureKind,
    /// Fraction of replicates with `p <= alpha`.
    pub rejection_rate: f64,
    /// 95% normal-approximation half width, `1.96 * sqrt(rate(1-rate)/reps)`.
    pub ci_half_width: f64,
    /// Per-replicate p-values in replicate order.
    pub p_values: Vec<f64>,
}

/// Aggregated result of one experiment cell (model, error kind, sigma).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model: Model,
    pub error_kind: ErrorKind,
    pub sigma: f64,
    pub grid: GridSpec,
    pub subjects_per_group: usize,
    pub permutations: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub methods: Vec<MethodOutcome>,
}

impl ExperimentReport {
    pub fn rate(&self, method: MeasureKind) -> Option<f64> {
        self.methods
            .iter()
            .find(|m| m.method == method)
            .map(|m| m.rejection_rate)
    }
}

const PLAN_SEED_SALT: u64 = 0x706c_616e;

/// Estimates rejection rates for the given methods over independent
/// replicates. Replicate `i` draws its dataset from seed `mix(seed, i)` and
/// its permutations from a further derived seed, runs the pipeline without
/// envelopes, and records `p <= alpha` per method. The resampling scheme
/// follows the model: nuisance-aware for the covariate model, raw otherwise.
pub fn run_experiment(
    spec: &FieldSpec,
    replicates: usize,
    permutations: usize,
    alpha: f64,
    methods: &[MeasureKind],
) -> Result<ExperimentReport> {
    if replicates < 50 {
        return Err(Error::Config(format!(
            "rate estimates need at least 50 replicates, got {replicates}"
        )));
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".to_string()));
    }
    let sampler = ModelSampler::new(*spec)?;
    let settings = RunSettings {
        methods: methods.to_vec(),
        permutations,
        alpha,
        seed: 0,
        scheme: spec.model.scheme(),
        streaming: false,
        envelopes: false,
        ..RunSettings::default()
    };
    let outcomes = parallel::map_indexed(replicates, |i| -> Result<Vec<f64>> {
        let rep_seed = mix_seed(spec.seed, i as u64);
        let (dataset, design) = sampler.dataset(rep_seed)?;
        let run = run_test(
            &dataset,
            &design,
            &RunSettings {
                seed: mix_seed(rep_seed, PLAN_SEED_SALT),
                ..settings.clone()
            },
        )
        .map_err(|e| Error::Config(format!("replicate {i}: {e}")))?;
        Ok(run.p_values().to_vec())
    });
    let mut per_method: Vec<Vec<f64>> = vec![Vec::with_capacity(replicates); methods.len()];
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let ps = outcome.map_err(|e| Error::Config(format!("replicate {i}: {e}")))?;
        for (k, p) in ps.into_iter().enumerate() {
            per_method[k].push(p);
        }
    }
    let method_reports = methods
        .iter()
        .zip(per_method)
        .map(|(&method, p_values)| {
            let hits = p_values.iter().filter(|p| **p <= alpha).count();
            let rate = hits as f64 / replicates as f64;
            MethodOutcome {
                method,
                rejection_rate: rate,
                ci_half_width: 1.96 * (rate * (1.0 - rate) / replicates as f64).sqrt(),
                p_values,
            }
        })
        .collect();
    Ok(ExperimentReport {
        model: spec.model,
        error_kind: spec.error_kind,
        sigma: spec.sigma,
        grid: spec.grid,
        subjects_per_group: spec.subjects_per_group,
        permutations,
        replicates,
        alpha,
        seed: spec.seed,
        methods: method_reports,
    })
}

/// Experiment description as read from a config file: one (model, error)
/// cell swept over a list of standard deviations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: Model,
    pub error_kind: ErrorKind,
    pub sigmas: Vec<f64>,
    pub grid: GridSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub correlation: CorrelationForm,
    pub subjects_per_group: usize,
    pub permutations: usize,
    pub replicates: usize,
    pub alpha: f64,
    pub methods: Vec<MeasureKind>,
    pub seed: u64,
}

fn default_rho() -> f64 {
    BASE_RHO
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::Config("no sigma values listed".to_string()));
        }
        for &sigma in &self.sigmas {
            if !(sigma > 0.0) {
                return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".to_string()));
        }
        self.field_spec(self.sigmas[0]).validate()
    }

    pub fn field_spec(&self, sigma: f64) -> FieldSpec {
        FieldSpec {
            grid: self.grid,
            rho: self.rho,
            correlation: self.correlation,
            sigma,
            error_kind: self.error_kind,
            model: self.model,
            subjects_per_group: self.subjects_per_group,
            seed: self.seed,
        }
    }

    /// Named desk-scale configurations: `table-m0a` through `table-m0g` for
    /// the significance-level rows, `table-m1c` and `table-m1pc` for the two
    /// power rows with the largest method contrast.
    pub fn preset(name: &str) -> Result<Self> {
        let desk = |model: Model, kind: ErrorKind, sigmas: Vec<f64>, replicates: usize| {
            ExperimentConfig {
                model,
                error_kind: kind,
                sigmas,
                grid: GridSpec { width: 21, height: 21 },
                rho: BASE_RHO,
                correlation: CorrelationForm::Scale,
                subjects_per_group: 10,
                permutations: 499,
                replicates,
                alpha: 0.05,
                methods: MeasureKind::ALL.to_vec(),
                seed: 0x5eed,
            }
        };
        let lower = name.trim().to_ascii_lowercase();
        if let Some(letter) = lower.strip_prefix("table-m0") {
            let kind = ErrorKind::parse(letter)?;
            return Ok(desk(Model::M0, kind, vec![0.1], 400));
        }
        match lower.as_str() {
            // sigma_4 for the broad bump, sigma_7 for the few-pixel bump:
            // the deviations with the largest spread between the methods.
            "table-m1c" => Ok(desk(Model::M1, ErrorKind::C, vec![0.5], 200)),
            "table-m1pc" => Ok(desk(Model::M1prime, ErrorKind::C, vec![1.25], 200)),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Runs one report per sigma in the config's ladder.
pub fn run_experiment_config(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    config
        .sigmas
        .iter()
        .map(|&sigma| {
            run_experiment(
                &config.field_spec(sigma),
                config.replicates,
                config.permutations,
                config.alpha,
                &config.methods,
            )
        })
        .collect()
}

/// Rejection-rate table, one row per report: model, error kind, sigma, then
/// one column per method in the order of the first report.
pub fn report_table_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("model,error,sigma");
    let methods: Vec<MeasureKind> = reports
        .first()
        .map(|r| r.methods.iter().map(|m| m.method).collect())
        .unwrap_or_default();
    for m in &methods {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for report in reports {
        out.push_str(&format!(
            "{},{},{}",
            report.model, report.error_kind, report.sigma
        ));
        for m in &methods {
            match report.rate(*m) {
                Some(rate) => out.push_str(&format!(",{rate:.4}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
