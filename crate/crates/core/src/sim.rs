//! Monte Carlo estimation of the reset-system cost and sampling rate, the
//! analytic periodic-sampling cost, and trade-off sweeps.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{ellipsoid_trigger, EllipsoidBound};
use crate::linalg::{kron, psd_sqrt};
use crate::lqg::{build_reset_system, LqgDesign, PlantModel, ResetSystem};
use crate::stefan::{grid_trigger, stefan_solve, GridOptions, ValueFunctionGrid};

/// Rule deciding when the reset system is sampled.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum TriggerScheme {
    Periodic(f64),
    Ellipsoid(EllipsoidBound),
    GridBoundary(ValueFunctionGrid),
}

impl TriggerScheme {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Periodic(_) => "periodic",
            Self::Ellipsoid(_) => "ellipsoid",
            Self::GridBoundary(_) => "grid",
        }
    }

    /// The sweep parameter: `h`, `ρ` or `J`.
    pub fn param(&self) -> f64 {
        match self {
            Self::Periodic(h) => *h,
            Self::Ellipsoid(b) => b.rho,
            Self::GridBoundary(g) => g.j,
        }
    }

    fn check(&self, n: usize, cfg: &SimConfig) -> Result<()> {
        match self {
            Self::Periodic(h) => {
                if !(*h > 0.0) || !h.is_finite() {
                    return Err(Error::Domain(format!("sampling period must be positive, got {h}")));
                }
                if cfg.h_nom > h / 10.0 {
                    return Err(Error::Domain(format!(
                        "h_nom = {} is too coarse for period {h} (need h_nom ≤ h/10)",
                        cfg.h_nom
                    )));
                }
            }
            Self::Ellipsoid(b) => {
                if b.p.nrows() != n {
                    return Err(Error::Dimension(format!(
                        "ellipsoid is {}-dimensional, system has n = {n}",
                        b.p.nrows()
                    )));
                }
            }
            Self::GridBoundary(_) => {
                if n != 2 {
                    return Err(Error::Dimension("grid triggers need n = 2".into()));
                }
            }
        }
        Ok(())
    }
}

/// Euler–Maruyama settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub h_nom: f64,
    pub horizon: f64,
    pub seed: u64,
    pub n_reps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { h_nom: 1e-3, horizon: 2000.0, seed: 0, n_reps: 20 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_nom > 0.0) || !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Domain("h_nom and horizon must be positive".into()));
        }
        if self.horizon / self.h_nom < 1e4 {
            return Err(Error::Domain(format!(
                "horizon/h_nom = {:.0} is below 10⁴",
                self.horizon / self.h_nom
            )));
        }
        if self.n_reps == 0 {
            return Err(Error::Domain("n_reps must be positive".into()));
        }
        Ok(())
    }
}

/// One point on a cost-versus-sampling-period curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub h_avg: f64,
    #[serde(rename = "J_H")]
    pub j_h_hat: f64,
    #[serde(rename = "J_z")]
    pub j_z_hat: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub scheme: String,
    pub param: f64,
}

impl TradeoffPoint {
    /// Shifts `J_z` to `γ₀ + J_H`.
    pub fn with_gamma0(mut self, gamma0: f64) -> Self {
        self.j_z_hat = gamma0 + self.j_h_hat;
        self
    }

    /// Sampling rate `1/h_avg`.
    pub fn rate(&self) -> f64 {
        1.0 / self.h_avg
    }
}

struct Replication {
    cost: f64,
    count: u64,
    time: f64,
}

/// Simulates the reset system under a trigger. `J_z` of the result equals
/// `J_H`; use [`TradeoffPoint::with_gamma0`] to add the LQG floor.
pub fn simulate(sys: &ResetSystem, trig: &TriggerScheme, cfg: &SimConfig) -> Result<TradeoffPoint> {
    cfg.validate()?;
    let n = sys.dim();
    trig.check(n, cfg)?;
    let r_half = psd_sqrt(&sys.r);

    let reps: Vec<Replication> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|k| replicate(sys, &r_half, trig, cfg, k as u64))
        .collect::<Result<_>>()?;

    let costs: Vec<f64> = reps.iter().map(|r| r.cost / r.time).collect();
    let rates: Vec<f64> = reps.iter().map(|r| r.count as f64 / r.time).collect();
    let m = reps.len() as f64;
    let j_h = costs.iter().sum::<f64>() / m;
    let f = rates.iter().sum::<f64>() / m;
    let stderr = if reps.len() > 1 {
        (costs.iter().map(|c| (c - j_h).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt()
    } else {
        0.0
    };
    Ok(TradeoffPoint {
        h_avg: if f > 0.0 { 1.0 / f } else { f64::INFINITY },
        j_h_hat: j_h,
        j_z_hat: j_h,
        stderr,
        n_samples: reps.iter().map(|r| r.count).sum(),
        scheme: trig.name().to_string(),
        param: trig.param(),
    })
}

fn replicate(
    sys: &ResetSystem,
    r_half: &DMatrix<f64>,
    trig: &TriggerScheme,
    cfg: &SimConfig,
    stream: u64,
) -> Result<Replication> {
    let n = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let h = cfg.h_nom;
    let sqrt_h = h.sqrt();
    let n_steps = (cfg.horizon / h).round() as usize;
    let burn = n_steps / 100;
    let period = match trig {
        TriggerScheme::Periodic(p) => (p / h - 1e-9).ceil().max(1.0) as usize,
        _ => 0,
    };

    let a = &sys.a;
    let q = &sys.q;
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut since_reset = 0usize;
    let (mut cost, mut count) = (0.0, 0u64);

    for step in 0..n_steps {
        let counting = step >= burn;
        if counting {
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += x[i] * q[(i, j)] * x[j];
                }
            }
            cost += quad * h;
        }
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for i in 0..n {
            let mut drift = 0.0;
            let mut noise = 0.0;
            for j in 0..n {
                drift += a[(i, j)] * x[j];
                noise += r_half[(i, j)] * xi[j];
            }
            next[i] = x[i] + h * drift + sqrt_h * noise;
        }
        std::mem::swap(&mut x, &mut next);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: (step + 1) as f64 * h });
        }
        since_reset += 1;
        let fire = match trig {
            TriggerScheme::Periodic(_) => since_reset >= period,
            TriggerScheme::Ellipsoid(b) => ellipsoid_trigger(&x, b),
            TriggerScheme::GridBoundary(g) => grid_trigger(&x, g),
        };
        if fire {
            x.iter_mut().for_each(|v| *v = 0.0);
            since_reset = 0;
            if counting {
                count += 1;
            }
        }
    }
    Ok(Replication { cost, count, time: (n_steps - burn) as f64 * h })
}

/// `(1/h)∫₀ʰ (h−u) Tr(R e^{Aᵀu} Q e^{Au}) du`, the stationary cost of sampling
/// every `h` time units, from one augmented matrix exponential.
pub fn periodic_cost(sys: &ResetSystem, h: f64) -> Result<f64> {
    check_period(h)?;
    let n = sys.dim();
    let m = n * n;
    let eye_n = DMatrix::<f64>::identity(n, n);
    let at = sys.a.transpose();
    // vec(AᵀG + GA) = K vec(G) with column-major vec
    let k = kron(&eye_n, &at) + kron(&at, &eye_n);
    // exp(h·[[K, I, 0], [0, 0, I], [0, 0, 0]]) holds ∫₀ʰ (h−u) e^{Ku} du in block (1,3)
    let mut big = DMatrix::<f64>::zeros(3 * m, 3 * m);
    big.view_mut((0, 0), (m, m)).copy_from(&(k * h));
    big.view_mut((0, m), (m, m)).fill_diagonal(h);
    big.view_mut((m, 2 * m), (m, m)).fill_diagonal(h);
    let e = big.exp();
    let block = e.view((0, 2 * m), (m, m));
    let vec_q = DMatrix::from_column_slice(m, 1, sys.q.as_slice());
    let vec_w = block * vec_q;
    let w = DMatrix::from_column_slice(n, n, vec_w.as_slice());
    let cost = (&sys.r * w).trace() / h;
    if !cost.is_finite() {
        return Err(Error::NonFiniteValue);
    }
    Ok(cost)
}

/// [`periodic_cost`] evaluated by adaptive Simpson quadrature.
pub fn periodic_cost_quadrature(sys: &ResetSystem, h: f64, rel_tol: f64) -> Result<f64> {
    check_period(h)?;
    let f = |u: f64| {
        let e = (&sys.a * u).exp();
        (h - u) * (&sys.r * e.transpose() * &sys.q * e).trace()
    };
    let (fa, fm, fb) = (f(0.0), f(0.5 * h), f(h));
    let whole = h / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let integral = simpson(&f, 0.0, h, fa, fm, fb, whole, rel_tol * scale, 40);
    Ok(integral / h)
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn check_period(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("sampling period must be positive, got {h}")));
    }
    Ok(())
}

/// Periodic cost for a plant and its LQG design.
pub fn periodic_cost_for_design(plant: &PlantModel, design: &LqgDesign, h: f64) -> Result<f64> {
    periodic_cost(&build_reset_system(plant, design), h)
}

/// Which family of triggers a sweep walks through.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepFamily {
    /// Sweep values are periods `h`; costs are analytic.
    Periodic,
    /// Sweep values are per-sample costs `ρ`; the ellipsoid shape is the
    /// drift-free optimum for `(Q, R)`.
    Ellipsoid,
    /// Sweep values are sampling costs `J`; each is solved on a grid and
    /// then simulated.
    GridBoundary(GridOptions),
}

/// Points of a sweep plus the values that failed.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub points: Vec<TradeoffPoint>,
    pub errors: Vec<(f64, Error)>,
}

/// Evaluates every sweep value (in parallel) and returns the successful
/// points sorted by `h_avg`.
pub fn tradeoff_sweep(
    sys: &ResetSystem,
    gamma0: f64,
    family: &SweepFamily,
    values: &[f64],
    cfg: &SimConfig,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Domain("sweep list is empty".into()));
    }
    let results: Vec<(f64, Result<TradeoffPoint>)> = values
        .par_iter()
        .map(|&v| (v, sweep_point(sys, family, v, cfg).map(|p| p.with_gamma0(gamma0))))
        .collect();
    let mut points = Vec::new();
    let mut errors = Vec::new();
    for (v, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => errors.push((v, e)),
        }
    }
    points.sort_by(|a, b| a.h_avg.total_cmp(&b.h_avg));
    Ok(SweepOutcome { points, errors })
}

fn sweep_point(sys: &ResetSystem, family: &SweepFamily, v: f64, cfg: &SimConfig) -> Result<TradeoffPoint> {
    match family {
        SweepFamily::Periodic => Ok(TradeoffPoint {
            h_avg: v,
            j_h_hat: periodic_cost(sys, v)?,
            j_z_hat: 0.0,
            stderr: 0.0,
            n_samples: 0,
            scheme: "periodic".into(),
            param: v,
        }),
        SweepFamily::Ellipsoid => {
            let bound = EllipsoidBound::optimal(&sys.q, &sys.r, v)?;
            simulate(sys, &TriggerScheme::Ellipsoid(bound), cfg)
        }
        SweepFamily::GridBoundary(opts) => {
            let grid = stefan_solve(sys, v, &opts.resolve(sys, v)?)?;
            simulate(sys, &TriggerScheme::GridBoundary(grid), cfg)
        }
    }
}
