//! Simulation from fitted models and tail probability estimation.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::{polar, Margin};
use crate::error::{invalid, Error, Result};
use crate::fitting::{ExceedanceSample, FittedModel};
use crate::gauge::{Gauge, PwlGauge};
use crate::simplex::{laplace_decompose, Domain, LaplaceAngle};
use crate::special::{gamma_ln_isf, gamma_ln_sf};
use crate::threshold::RadialThreshold;

/// Default number of simulated exceedances.
pub const DEFAULT_N_STAR: usize = 50_000;
pub const DEFAULT_BURN_IN: usize = 1000;
/// Smallest Dirichlet proposal concentration.
pub const DIRICHLET_FLOOR: f64 = 1.01;

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One draw from Gamma(shape, rate) conditioned to exceed `lower`, given
/// `ln_s0 = ln P(R > lower)`.
fn truncated_draw<R: Rng + ?Sized>(shape: usize, rate: f64, lower: f64, ln_s0: f64, rng: &mut R) -> Result<f64> {
    for _ in 0..100 {
        let target = ln_s0 + libm::log(open_unit(rng));
        let r = gamma_ln_isf(target, shape, rate, lower)?;
        if r > lower {
            return Ok(r);
        }
    }
    Err(Error::UntenableTruncation)
}

fn truncation_mass(shape: usize, rate: f64, lower: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() || !(lower >= 0.0) {
        return Err(invalid("rate must be positive and the truncation point non-negative"));
    }
    let ln_s0 = gamma_ln_sf(lower, shape, rate);
    if !ln_s0.is_finite() {
        return Err(Error::UntenableTruncation);
    }
    Ok(ln_s0)
}

/// Draws from Gamma(shape, rate) conditioned on exceeding `lower`, by
/// inverting the survival function.
pub fn sample_truncated_gamma<R: Rng + ?Sized>(shape: usize, rate: f64, lower: f64, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    let ln_s0 = truncation_mass(shape, rate, lower)?;
    (0..count).map(|_| truncated_draw(shape, rate, lower, ln_s0, rng)).collect()
}

/// Independence proposal on the proposal scale: the first coordinate for
/// two dimensions (Laplace angles rescaled to `[0, 1)`), the simplex point
/// otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    Uniform,
    Beta { a: f64, b: f64 },
    Dirichlet { alpha: Vec<f64> },
}

impl Proposal {
    /// Method of moments on values in (0, 1).
    pub fn fit_beta(xs: &[f64]) -> Result<Proposal> {
        let n = xs.len() as f64;
        if xs.len() < 2 {
            return Err(Error::ProposalFit("needs at least two angles".into()));
        }
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        let common = m * (1.0 - m) / v - 1.0;
        if !(v > 0.0) || !(common > 0.0) || !common.is_finite() {
            return Err(Error::ProposalFit("angle variance is degenerate".into()));
        }
        Ok(Proposal::Beta { a: m * common, b: (1.0 - m) * common })
    }

    /// Method of moments on simplex points, with a concentration floor.
    pub fn fit_dirichlet(points: &[Vec<f64>]) -> Result<Proposal> {
        if points.len() < 2 {
            return Err(Error::ProposalFit("needs at least two angles".into()));
        }
        let d = points[0].len();
        let n = points.len() as f64;
        let mut total = 0.0;
        let mut means = vec![0.0; d];
        for p in points {
            for j in 0..d {
                means[j] += p[j] / n;
            }
        }
        let mut used = 0.0;
        for j in 0..d {
            let v = points.iter().map(|p| (p[j] - means[j]) * (p[j] - means[j])).sum::<f64>() / (n - 1.0);
            if v > 0.0 && means[j] > 0.0 && means[j] < 1.0 {
                total += means[j] * (1.0 - means[j]) / v - 1.0;
                used += 1.0;
            }
        }
        let conc = total / used;
        if !(used > 0.0) || !(conc > 0.0) || !conc.is_finite() {
            return Err(Error::ProposalFit("angle variance is degenerate".into()));
        }
        Ok(Proposal::Dirichlet { alpha: means.iter().map(|m| (m * conc).max(DIRICHLET_FLOOR)).collect() })
    }

    /// Beta for two dimensions, Dirichlet otherwise.
    pub fn fit(domain: Domain, directions: &[Vec<f64>]) -> Result<Proposal> {
        let d = directions.first().map_or(0, |w| w.len());
        if d == 2 {
            let xs: Vec<f64> = directions.iter().map(|w| to_proposal_scale(domain, w)[0]).collect();
            Proposal::fit_beta(&xs)
        } else {
            Proposal::fit_dirichlet(directions)
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Proposal::Uniform => true,
            Proposal::Beta { a, b } => *a > 0.0 && *b > 0.0,
            Proposal::Dirichlet { alpha } => alpha.iter().all(|&a| a > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ProposalFit("proposal parameters must be positive".into()))
        }
    }

    fn ln_density(&self, p: &[f64]) -> f64 {
        match self {
            Proposal::Uniform => 0.0,
            Proposal::Beta { a, b } => (a - 1.0) * libm::log(p[0]) + (b - 1.0) * libm::log1p(-p[0]),
            Proposal::Dirichlet { alpha } => alpha.iter().zip(p).map(|(a, x)| (a - 1.0) * libm::log(*x)).sum(),
        }
    }
}

fn to_proposal_scale(domain: Domain, w: &[f64]) -> Vec<f64> {
    match domain {
        Domain::LaplaceCircle => {
            let a = laplace_decompose([w[0], w[1]]).map(|(_, a)| a.value()).unwrap_or(0.0);
            vec![(a + 2.0) / 4.0]
        }
        Domain::Simplex if w.len() == 2 => vec![w[0]],
        Domain::Simplex => w.to_vec(),
    }
}

fn from_proposal_scale(domain: Domain, dim: usize, p: &[f64]) -> Vec<f64> {
    match domain {
        Domain::LaplaceCircle => {
            let mut a = 4.0 * p[0] - 2.0;
            if a >= 2.0 {
                a -= 4.0;
            }
            LaplaceAngle::new(a).map(|a| a.direction().to_vec()).unwrap_or_else(|_| vec![-1.0, 0.0])
        }
        Domain::Simplex if dim == 2 => vec![p[0], 1.0 - p[0]],
        Domain::Simplex => p.to_vec(),
    }
}

fn draw_proposal<R: Rng + ?Sized>(prop: &Proposal, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    let scale_dim = if dim == 2 { 1 } else { dim };
    Ok(match prop {
        Proposal::Uniform if scale_dim == 1 => vec![rng.random::<f64>()],
        Proposal::Uniform => dirichlet_draw(&vec![1.0; dim], rng)?,
        Proposal::Beta { a, b } => {
            let beta = Beta::new(*a, *b).map_err(|_| Error::ProposalFit("invalid beta parameters".into()))?;
            vec![beta.sample(rng)]
        }
        Proposal::Dirichlet { alpha } => dirichlet_draw(alpha, rng)?,
    })
}

fn dirichlet_draw<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let d = Gamma::new(a, 1.0).map_err(|_| Error::ProposalFit("invalid Dirichlet parameters".into()))?;
        g.push(d.sample(rng));
    }
    let s: f64 = g.iter().sum();
    Ok(g.into_iter().map(|x| x / s).collect())
}

/// Generic independence Metropolis-Hastings. `propose` returns a state and
/// its log proposal density; `target` is the log target density. Returns
/// the retained states and the acceptance rate after burn-in.
pub fn independence_mh<S: Clone, R: Rng + ?Sized>(
    target: impl Fn(&S) -> f64,
    mut propose: impl FnMut(&mut R) -> Result<(S, f64)>,
    count: usize,
    burn_in: usize,
    thin: usize,
    rng: &mut R,
) -> Result<(Vec<S>, f64)> {
    let thin = thin.max(1);
    let (mut cur, mut cur_q) = propose(rng)?;
    let mut cur_t = target(&cur);
    let mut out = Vec::with_capacity(count);
    let mut accepted = 0usize;
    let mut steps = 0usize;
    let total = burn_in + count * thin;
    for step in 0..total {
        let (cand, cand_q) = propose(rng)?;
        let cand_t = target(&cand);
        let log_ratio = (cand_t - cur_t) + (cur_q - cand_q);
        let accept = if log_ratio.is_nan() {
            cand_t.is_finite() && !cur_t.is_finite()
        } else {
            log_ratio >= 0.0 || libm::log(open_unit(rng)) < log_ratio
        };
        if accept {
            cur = cand;
            cur_q = cand_q;
            cur_t = cand_t;
        }
        if step >= burn_in {
            steps += 1;
            if accept {
                accepted += 1;
            }
            if (step - burn_in) % thin == thin - 1 {
                out.push(cur.clone());
            }
        }
    }
    let rate = if steps == 0 { 0.0 } else { accepted as f64 / steps as f64 };
    Ok((out, rate))
}

/// Markov chain targeting the angular density of a gauge.
#[derive(Clone, Debug)]
pub struct McmcSampler {
    pub gauge: PwlGauge,
    pub proposal: Proposal,
    pub burn_in: usize,
    pub thin: usize,
}

#[derive(Clone, Debug)]
pub enum AngularSampler {
    /// Resampling of observed exceedance directions with their thresholds.
    Empirical { directions: Vec<Vec<f64>>, thresholds: Vec<f64> },
    Mcmc(McmcSampler),
}

/// Sampled directions; thresholds come along for empirical draws.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularDraws {
    pub directions: Vec<Vec<f64>>,
    pub thresholds: Option<Vec<f64>>,
    pub acceptance_rate: Option<f64>,
}

impl AngularSampler {
    pub fn empirical(sample: &ExceedanceSample) -> Self {
        AngularSampler::Empirical { directions: sample.directions().to_vec(), thresholds: sample.thresholds().to_vec() }
    }

    /// Chain with a proposal fitted by moments to the exceedance directions.
    pub fn mcmc(gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<Self> {
        let proposal = Proposal::fit(gauge.mesh().domain(), sample.directions())?;
        Ok(AngularSampler::Mcmc(McmcSampler { gauge: gauge.clone(), proposal, burn_in: DEFAULT_BURN_IN, thin: 1 }))
    }

    /// Chain when the model has an angular gauge, resampling otherwise.
    pub fn for_model(model: &FittedModel) -> Result<Self> {
        match model.angular_gauge() {
            Some(g) => AngularSampler::mcmc(g, &model.exceedances),
            None => Ok(AngularSampler::empirical(&model.exceedances)),
        }
    }

    pub fn sample_angles<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<AngularDraws> {
        match self {
            AngularSampler::Empirical { directions, thresholds } => {
                if directions.is_empty() {
                    return Err(invalid("no directions to resample"));
                }
                let mut dirs = Vec::with_capacity(count);
                let mut thr = Vec::with_capacity(count);
                for _ in 0..count {
                    let i = rng.random_range(0..directions.len());
                    dirs.push(directions[i].clone());
                    thr.push(thresholds[i]);
                }
                Ok(AngularDraws { directions: dirs, thresholds: Some(thr), acceptance_rate: None })
            }
            AngularSampler::Mcmc(s) => {
                s.proposal.validate()?;
                let domain = s.gauge.mesh().domain();
                let dim = s.gauge.dim();
                let d = dim as f64;
                let target = |w: &Vec<f64>| match s.gauge.eval(w) {
                    Ok(g) if g > 0.0 => -d * libm::log(g),
                    _ => f64::NEG_INFINITY,
                };
                let propose = |rng: &mut R| -> Result<(Vec<f64>, f64)> {
                    let p = draw_proposal(&s.proposal, dim, rng)?;
                    let q = s.proposal.ln_density(&p);
                    Ok((from_proposal_scale(domain, dim, &p), q))
                };
                let (dirs, rate) = independence_mh(target, propose, count, s.burn_in, s.thin, rng)?;
                if rate < 0.01 {
                    log::warn!("angular chain acceptance rate {rate:.4} is below 1%");
                }
                Ok(AngularDraws { directions: dirs, thresholds: None, acceptance_rate: Some(rate) })
            }
        }
    }
}

/// Simulated exceedances `x = r w`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedExceedances {
    pub points: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    pub acceptance_rate: Option<f64>,
}

/// Draws directions from `sampler` and radii from the truncated gamma
/// model above the threshold in each direction.
pub fn sample_exceedances<T: RadialThreshold, R: Rng + ?Sized>(
    gauge: &PwlGauge,
    threshold: &T,
    sampler: &AngularSampler,
    n_star: usize,
    rng: &mut R,
) -> Result<SimulatedExceedances> {
    let draws = sampler.sample_angles(n_star, rng)?;
    let d = gauge.dim();
    let mut out = SimulatedExceedances {
        points: Vec::with_capacity(n_star),
        radii: Vec::with_capacity(n_star),
        directions: Vec::with_capacity(n_star),
        thresholds: Vec::with_capacity(n_star),
        acceptance_rate: draws.acceptance_rate,
    };
    // a rejected chain move repeats the previous direction
    let mut last: Option<(Vec<f64>, f64, f64, f64)> = None;
    for (i, w) in draws.directions.into_iter().enumerate() {
        let (thr, rate, ln_s0) = match (&draws.thresholds, &last) {
            (None, Some((lw, t, g, l))) if *lw == w => (*t, *g, *l),
            _ => {
                let thr = match &draws.thresholds {
                    Some(t) => t[i],
                    None => threshold.threshold(&w)?,
                };
                let rate = gauge.eval(&w)?;
                (thr, rate, truncation_mass(d, rate, thr)?)
            }
        };
        if draws.thresholds.is_none() {
            last = Some((w.clone(), thr, rate, ln_s0));
        }
        let r = truncated_draw(d, rate, thr, ln_s0, rng)?;
        out.points.push(w.iter().map(|v| r * v).collect());
        out.radii.push(r);
        out.directions.push(w);
        out.thresholds.push(thr);
    }
    Ok(out)
}

/// Simulated exceedances from a fitted model's radial gauge.
pub fn sample_model_exceedances<T: RadialThreshold, R: Rng + ?Sized>(
    model: &FittedModel,
    threshold: &T,
    sampler: &AngularSampler,
    n_star: usize,
    rng: &mut R,
) -> Result<SimulatedExceedances> {
    let g = model.radial_gauge().ok_or_else(|| invalid("model has no radial gauge"))?;
    sample_exceedances(g, threshold, sampler, n_star, rng)
}

/// Axis-aligned box; upper bounds may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ExtremalRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("box bounds differ in length"));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || a.is_nan()) {
            return Err(invalid("box needs lower < upper in every coordinate"));
        }
        Ok(ExtremalRegion { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| v >= a && v <= b)
    }

    /// Checks numerically that the box lies beyond the threshold surface:
    /// at its finite corners and on a grid over the faces nearest the origin.
    pub fn validate<T: RadialThreshold>(&self, threshold: &T, margin: Margin) -> Result<()> {
        let d = self.dim();
        let cap = |j: usize| if self.upper[j].is_finite() { self.upper[j] } else { self.lower[j] + libm::fabs(self.lower[j]).max(1.0) };
        let check = |x: &[f64]| -> Result<()> {
            let (r, w) = polar(x, margin)?;
            if r > threshold.threshold(&w)? {
                Ok(())
            } else {
                Err(Error::RegionBelowThreshold)
            }
        };
        let mut x = vec![0.0; d];
        for mask in 0u32..(1 << d) {
            for j in 0..d {
                x[j] = if mask & (1 << j) != 0 { cap(j) } else { self.lower[j] };
            }
            check(&x)?;
        }
        let per_face = 1000 / d;
        let m = libm::ceil(libm::pow(per_face as f64, 1.0 / (d - 1) as f64)) as usize;
        let m = m.max(2);
        for j in 0..d {
            let face = if libm::fabs(self.lower[j]) <= libm::fabs(cap(j)) { self.lower[j] } else { cap(j) };
            let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
            let total = m.pow(others.len() as u32);
            for idx in 0..total {
                let mut rest = idx;
                x[j] = face;
                for &k in &others {
                    let t = (rest % m) as f64 / (m - 1) as f64;
                    rest /= m;
                    x[k] = self.lower[k] + t * (cap(k) - self.lower[k]);
                }
                check(&x)?;
            }
        }
        Ok(())
    }
}

/// Tail probability estimate from simulated exceedances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    /// Binomial standard error; with no hits, the one-sided 95% upper bound
    /// `3 / n_star` scaled by the exceedance fraction.
    pub se: f64,
    pub hits: usize,
    pub n_star: usize,
    pub exceed_fraction: f64,
}

pub fn probability_from_points(points: &[Vec<f64>], region: &ExtremalRegion, exceed_fraction: f64) -> ProbabilityEstimate {
    let n_star = points.len();
    let hits = points.iter().filter(|x| region.contains(x)).count();
    let p = hits as f64 / n_star.max(1) as f64;
    let se = if hits == 0 {
        exceed_fraction * 3.0 / n_star.max(1) as f64
    } else {
        exceed_fraction * libm::sqrt(p * (1.0 - p) / n_star as f64)
    };
    ProbabilityEstimate { estimate: p * exceed_fraction, se, hits, n_star, exceed_fraction }
}

/// Simulates `n_star` exceedances from `model` and estimates the
/// probability of `region`.
pub fn estimate_probability<T: RadialThreshold, R: Rng + ?Sized>(
    model: &FittedModel,
    threshold: &T,
    sampler: &AngularSampler,
    region: &ExtremalRegion,
    n_star: usize,
    rng: &mut R,
) -> Result<ProbabilityEstimate> {
    let sim = sample_model_exceedances(model, threshold, sampler, n_star, rng)?;
    Ok(probability_from_points(&sim.points, region, model.exceedances.exceed_fraction()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncated_draws_exceed_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = sample_truncated_gamma(2, 1.0, 5.0, 2000, &mut rng).unwrap();
        assert!(xs.iter().all(|&x| x > 5.0));
        assert!(sample_truncated_gamma(2, 0.0, 5.0, 1, &mut rng).is_err());
    }

    #[test]
    fn three_state_chain_matches_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probs = [0.2, 0.5, 0.3];
        let q = [0.5, 0.25, 0.25];
        let (states, _) = independence_mh(
            |s: &usize| libm::log(probs[*s]),
            |rng: &mut ChaCha8Rng| {
                let u: f64 = rng.random();
                let s = if u < 0.5 { 0 } else if u < 0.75 { 1 } else { 2 };
                Ok((s, libm::log(q[s])))
            },
            1_000_000,
            1000,
            1,
            &mut rng,
        )
        .unwrap();
        for k in 0..3 {
            let f = states.iter().filter(|&&s| s == k).count() as f64 / states.len() as f64;
            assert!((f - probs[k]).abs() < 1e-2, "state {k}: {f}");
        }
    }

    #[test]
    fn zero_hits_give_upper_bound() {
        let region = ExtremalRegion::new(vec![10.0, 10.0], vec![11.0, 11.0]).unwrap();
        let est = probability_from_points(&[vec![1.0, 2.0], vec![3.0, 0.5]], &region, 0.05);
        assert_eq!(est.estimate, 0.0);
        assert!((est.se - 0.05 * 1.5).abs() < 1e-15);
        assert!(ExtremalRegion::new(vec![1.0], vec![1.0]).is_err());
    }
}
