//! Complex rotation numbers.
//!
//! For `Im ω > 0` the uniformizer `Φ = id + φ` of the torus `E(f + ω)` solves
//! `Φ(f(z) + ω) = Φ(z) + τ`; `φ` is expanded in Fourier modes and the equation
//! is collocated on the base circle. Boundary values at real `ω` are obtained
//! either as the limit `δ → 0` of `τ(f + ω + iδ)` or, for hyperbolic maps with
//! rotation number 0, by gluing linearizing charts along the ascending curve.

use crate::circle_maps::CircleMap;
use crate::error::{Error, Result};
use crate::linearization::{hyperbolic_data, AscendingCurve, KoenigsChart};
use crate::numerics::{richardson_extrapolate, Contour};
use crate::rotation::{rational_interval, RationalRotation};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Truncation and accuracy settings of the collocation solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteriorConfig {
    /// Initial number of modes on each side.
    pub k: usize,
    /// `K` is doubled up to this value while the residual exceeds `tol`.
    pub k_max: usize,
    pub tol: f64,
}

impl Default for InteriorConfig {
    fn default() -> Self {
        InteriorConfig {
            k: 16,
            k_max: 256,
            tol: 1e-10,
        }
    }
}

impl InteriorConfig {
    pub fn fixed(k: usize, tol: f64) -> Self {
        InteriorConfig { k, k_max: k, tol }
    }
}

/// A periodic logarithmic term `β·ℓ(z)` of `Φ` with a singularity at the
/// complex periodic point `point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogTerm {
    pub point: Complex64,
    /// Principal `Log` of the multiplier at `point`.
    pub log_multiplier: Complex64,
    /// Whether `point` lies above the strip (continued from an attractor).
    pub above: bool,
    pub coefficient: Complex64,
}

impl LogTerm {
    fn kernel(&self, z: Complex64) -> Complex64 {
        if self.above {
            (TAU * I * (self.point - z)).exp()
        } else {
            (TAU * I * (z - self.point)).exp()
        }
    }

    /// `ℓ(z) = Log(1 − e^{±2πi(A − z)})`, periodic and analytic in the strip.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        (1.0 - self.kernel(z)).ln()
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let e = self.kernel(z);
        let s = if self.above { 1.0 } else { -1.0 };
        s * TAU * I * e / (1.0 - e)
    }
}

/// A solution `(Φ, τ)` of the conjugacy equation at complex `ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugacySolution {
    pub tau: Complex64,
    pub omega: Complex64,
    /// Number of modes on each side.
    pub k: usize,
    /// `c_k` for `k = −K..=K` (index `k + K`), `c_0 = 0`. Modes with
    /// `k < 0` may underflow; evaluation uses the scaled form.
    pub coefficients: Vec<Complex64>,
    #[serde(skip)]
    scaled: Vec<Complex64>,
    pub log_terms: Vec<LogTerm>,
    /// Sup norm of `Φ(f + ω) − Φ − τ` on the collocation and offset grids.
    pub residual: f64,
    /// Collocation points on the base circle.
    #[serde(skip)]
    pub contour: Contour,
}

/// `e^{2πikz}` times the column scale of mode `k` at strip height `h`.
fn mode(k: i64, z: Complex64, h: f64) -> Complex64 {
    let log_scale = if k < 0 { -TAU * (-k) as f64 * h } else { 0.0 };
    (TAU * I * k as f64 * z + log_scale).exp()
}

fn mode_derivative(k: i64, z: Complex64, h: f64) -> Complex64 {
    TAU * I * k as f64 * mode(k, z, h)
}

impl ConjugacySolution {
    fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        let k = self.k as i64;
        (-k..=k).filter(|&m| m != 0)
    }

    fn height(&self) -> f64 {
        self.omega.im.max(0.0)
    }

    /// `Φ(z)` for `0 ≤ Im z ≤ Im ω`.
    pub fn phi(&self, z: Complex64) -> Complex64 {
        let h = self.height();
        let fourier: Complex64 = self
            .modes()
            .zip(&self.scaled)
            .map(|(m, &s)| s * mode(m, z, h))
            .sum();
        z + fourier
            + self
                .log_terms
                .iter()
                .map(|t| t.coefficient * t.eval(z))
                .sum::<Complex64>()
    }

    /// `Φ'(z)`.
    pub fn phi_prime(&self, z: Complex64) -> Complex64 {
        let h = self.height();
        let fourier: Complex64 = self
            .modes()
            .zip(&self.scaled)
            .map(|(m, &s)| s * mode_derivative(m, z, h))
            .sum();
        1.0 + fourier
            + self
                .log_terms
                .iter()
                .map(|t| t.coefficient * t.derivative(z))
                .sum::<Complex64>()
    }

    /// The defect `Φ(f(x) + ω) − Φ(x) − τ` at a real point.
    pub fn defect(&self, f: &CircleMap, x: f64) -> Complex64 {
        let fx = f.eval2(c(x, 0.0)).0 + self.omega;
        self.phi(fx) - self.phi(c(x, 0.0)) - self.tau
    }

    /// Checks that `Φ` maps the base circle to a curve winding once around
    /// the cylinder without jumps.
    pub fn winding(&self) -> f64 {
        // resolve the turn of Φ near log singularities close to the axis
        let nearest = self
            .log_terms
            .iter()
            .map(|t| t.point.im.abs().min((t.point.im - self.omega.im).abs()))
            .fold(1.0f64, f64::min);
        let n = ((8.0 / nearest) as usize).clamp(256, 1 << 16);
        let pts: Vec<Complex64> = (0..=n)
            .map(|j| self.phi(c(j as f64 / n as f64, 0.0)))
            .collect();
        if pts
            .windows(2)
            .any(|w| (w[1] - w[0]).norm() > 0.25 || !w[1].re.is_finite())
        {
            return f64::NAN;
        }
        pts[n].re - pts[0].re
    }
}

/// Data for the logarithmic enrichment: the real hyperbolic periodic orbits
/// of `f + Re ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSeed {
    pub p: i64,
    pub q: u64,
    /// `(point, multiplier)` of every periodic point.
    pub points: Vec<(f64, f64)>,
}

/// The hyperbolic periodic orbits of `f + ω` for real `ω`, if any.
pub fn orbit_seed(f: &CircleMap, omega: f64) -> Option<OrbitSeed> {
    let data = hyperbolic_data(&f.shift_real(omega)).ok()?;
    Some(OrbitSeed {
        p: data.p,
        q: data.q,
        points: data
            .orbits
            .points
            .iter()
            .map(|pt| (pt.point, pt.multiplier))
            .collect(),
    })
}

/// `(G(z), G'(z))` for `G = (f + ω)^q − p`; `None` outside the band.
fn return_map(f: &CircleMap, q: u64, p: i64, z: Complex64) -> Option<(Complex64, Complex64)> {
    let band = f.analyticity_band();
    let (mut w, mut d) = (z, c(1.0, 0.0));
    for _ in 0..q {
        if !(w.im.abs() < band) {
            return None;
        }
        let (v, d1, _) = f.eval2(w);
        d *= d1;
        w = v;
    }
    Some((w - p as f64, d))
}

/// Continues the real periodic point `a` of `f + Re ω` to a complex periodic
/// point of `f + ω`.
fn continue_point(
    f: &CircleMap,
    seed: &OrbitSeed,
    a: f64,
    omega: Complex64,
) -> Option<(Complex64, Complex64)> {
    let steps = 8;
    let mut z = c(a, 0.0);
    for s in 1..=steps {
        let g = f.shift(c(omega.re, omega.im * s as f64 / steps as f64));
        let mut converged = false;
        for _ in 0..50 {
            let (w, d) = return_map(&g, seed.q, seed.p, z)?;
            let step = (w - z) / (d - 1.0);
            if !step.re.is_finite() || !step.im.is_finite() {
                return None;
            }
            z -= step;
            if step.norm() < 1e-15 * (1.0 + z.norm()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
    }
    let (w, d) = return_map(&f.shift(omega), seed.q, seed.p, z)?;
    ((w - z).norm() < 1e-12).then_some((z, d))
}

/// Log terms for all periodic points of the seed, or `None` when some point
/// cannot be continued to the correct side of the strip.
fn log_terms(f: &CircleMap, seed: &OrbitSeed, omega: Complex64) -> Option<Vec<LogTerm>> {
    let mut out = Vec::with_capacity(seed.points.len());
    for &(a, lambda) in &seed.points {
        let (point, mult) = continue_point(f, seed, a, omega)?;
        let above = lambda < 1.0;
        let ok = if above {
            point.im > omega.im
        } else {
            point.im < 0.0
        };
        if !ok {
            return None;
        }
        out.push(LogTerm {
            point,
            log_multiplier: mult.ln(),
            above,
            coefficient: c(0.0, 0.0),
        });
    }
    Some(out)
}

fn least_squares(a: DMatrix<Complex64>, b: DVector<Complex64>) -> Result<DVector<Complex64>> {
    if !a
        .iter()
        .chain(b.iter())
        .all(|v| v.re.is_finite() && v.im.is_finite())
    {
        return Err(Error::Convergence(
            "least-squares system is not finite".into(),
        ));
    }
    let svd = a
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Convergence("SVD did not converge".into()))?;
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    svd.solve(&b, 1e-14 * smax)
        .map_err(|e| Error::Convergence(format!("least squares failed: {e}")))
}

/// One collocation solve at fixed `K`. `map` is `f` without the shift `ω`.
fn solve_once(
    map: &CircleMap,
    omega: Complex64,
    k: usize,
    logs: &[LogTerm],
    pq: (i64, u64),
) -> Result<ConjugacySolution> {
    let h = omega.im;
    let kk = k as i64;
    let modes: Vec<i64> = (-kk..=kk).filter(|&m| m != 0).collect();
    let m = 2 * (2 * k + 2);
    let ncol = modes.len() + 1;
    let (p, q) = (pq.0 as f64, pq.1 as f64);
    let mut a = DMatrix::<Complex64>::zeros(m, ncol);
    let mut b = DVector::<Complex64>::zeros(m);
    let mut xs = Vec::with_capacity(m);
    for j in 0..m {
        let x = j as f64 / m as f64;
        let z = c(x, 0.0);
        let fz = map.eval2(z).0 + omega;
        for (col, &md) in modes.iter().enumerate() {
            a[(j, col)] = mode(md, fz, h) - mode(md, z, h);
        }
        let mut tau_col = c(-1.0, 0.0);
        let mut rhs = -(fz - z);
        for t in logs {
            let dl = (t.eval(fz) - t.eval(z)) / t.log_multiplier;
            tau_col += q * dl;
            rhs += p * dl;
        }
        a[(j, ncol - 1)] = tau_col;
        b[j] = rhs;
        xs.push(z);
    }
    let sol = least_squares(a, b)?;
    let tau = sol[ncol - 1];
    let scaled: Vec<Complex64> = sol.iter().take(modes.len()).cloned().collect();
    let mut coefficients = vec![c(0.0, 0.0); 2 * k + 1];
    for (&md, &s) in modes.iter().zip(&scaled) {
        let factor = if md < 0 {
            (-TAU * (-md) as f64 * h).exp()
        } else {
            1.0
        };
        coefficients[(md + kk) as usize] = s * factor;
    }
    let log_terms: Vec<LogTerm> = logs
        .iter()
        .map(|t| LogTerm {
            coefficient: (q * tau - p) / t.log_multiplier,
            ..*t
        })
        .collect();
    let mut solution = ConjugacySolution {
        tau,
        omega,
        k,
        coefficients,
        scaled,
        log_terms,
        residual: 0.0,
        contour: Contour {
            samples: xs,
            closed: true,
        },
    };
    let mut residual: f64 = 0.0;
    for j in 0..m {
        for off in [0.0, 0.5] {
            let x = (j as f64 + off) / m as f64;
            residual = residual.max(solution.defect(map, x).norm());
        }
    }
    solution.residual = residual;
    Ok(solution)
}

fn validate(sol: ConjugacySolution) -> Result<ConjugacySolution> {
    if !(sol.tau.im > 0.0) {
        return Err(Error::InvalidSolution(format!(
            "Im τ = {} is not positive",
            sol.tau.im
        )));
    }
    let w = sol.winding();
    if !((w - 1.0).abs() < 1e-6) {
        return Err(Error::InvalidSolution(format!(
            "Φ on the base circle has winding {w}"
        )));
    }
    Ok(sol)
}

fn solve_adaptive(
    f: &CircleMap,
    omega: Complex64,
    cfg: &InteriorConfig,
    logs: &[LogTerm],
    pq: (i64, u64),
) -> Result<ConjugacySolution> {
    if cfg.k < 4 {
        return Err(Error::Contract("K must be at least 4".into()));
    }
    let mut k = cfg.k;
    let mut best: Option<ConjugacySolution> = None;
    loop {
        let sol = solve_once(f, omega, k, logs, pq)?;
        if sol.residual <= cfg.tol {
            return validate(sol);
        }
        if best.as_ref().is_none_or(|b| sol.residual < b.residual) {
            best = Some(sol);
        }
        if 2 * k > cfg.k_max {
            let r = best.map_or(f64::INFINITY, |b| b.residual);
            return Err(Error::Accuracy {
                residual: r,
                tol: cfg.tol,
            });
        }
        k *= 2;
    }
}

/// `τ(f + ω)` for `Im ω > 0` with a plain Fourier basis.
pub fn tau_interior(
    f: &CircleMap,
    omega: Complex64,
    cfg: &InteriorConfig,
) -> Result<ConjugacySolution> {
    if !(omega.im > 0.0) {
        return Err(Error::Contract(format!(
            "Im ω must be positive, got {}",
            omega.im
        )));
    }
    solve_adaptive(f, omega, cfg, &[], (0, 1))
}

/// As [`tau_interior`], adding one logarithmic term per complex periodic point
/// continued from `seed`. Falls back to the plain basis when continuation
/// fails.
pub fn tau_interior_enriched(
    f: &CircleMap,
    omega: Complex64,
    cfg: &InteriorConfig,
    seed: Option<&OrbitSeed>,
) -> Result<ConjugacySolution> {
    if !(omega.im > 0.0) {
        return Err(Error::Contract(format!(
            "Im ω must be positive, got {}",
            omega.im
        )));
    }
    if let Some(seed) = seed {
        if let Some(logs) = log_terms(f, seed, omega) {
            if let Ok(sol) = solve_adaptive(f, omega, cfg, &logs, (seed.p, seed.q)) {
                return Ok(sol);
            }
        }
    }
    solve_adaptive(f, omega, cfg, &[], (0, 1))
}

/// Settings of the boundary limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitConfig {
    /// Decreasing geometric `δ` schedule; derived from the distance to the
    /// interval endpoints when absent.
    pub schedule: Option<Vec<f64>>,
    pub levels: usize,
    pub interior: InteriorConfig,
    /// Leading exponent of the error in `δ`.
    pub order: f64,
    /// Use periodic log terms when `ω` lies in a hyperbolic interval.
    pub enrich: bool,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig {
            schedule: None,
            levels: 6,
            // log-periodic terms near the real periodic points are not in the
            // basis; for strongly hyperbolic non-Möbius maps the defect floors
            // at a few 1e-6 while τ stays accurate to well below that
            interior: InteriorConfig {
                k: 16,
                k_max: 64,
                tol: 1e-5,
            },
            order: 1.0,
            enrich: true,
        }
    }
}

/// A boundary value `τ̄(f + ω)` with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryValue {
    pub tau: Complex64,
    pub error_estimate: f64,
    pub schedule: Vec<f64>,
    pub samples: Vec<Complex64>,
    pub extrapolants: Vec<Complex64>,
    pub order: f64,
    pub enriched: bool,
    /// Largest collocation residual over the schedule.
    pub residual: f64,
}

/// Distance from `ω` to the nearest endpoint of its rotation interval.
pub fn endpoint_distance(f: &CircleMap, omega: f64, seed: &OrbitSeed) -> Result<f64> {
    let r = RationalRotation::new(seed.p.rem_euclid(seed.q as i64), seed.q)?;
    let iv = rational_interval(f, r, 1e-12)?;
    let shift = (omega - iv.left_lift).div_euclid(1.0);
    let w = omega - shift;
    Ok((w - iv.left_lift).min(iv.right_lift - w).max(0.0))
}

/// The default schedule `δ_j = δ₀ 2^{−j}` with `δ₀ = min(0.02, d/16)`.
pub fn default_schedule(distance: Option<f64>, levels: usize) -> Vec<f64> {
    let d0 = distance.map_or(0.02, |d| (d / 16.0).min(0.02));
    (0..levels).map(|j| d0 * 0.5f64.powi(j as i32)).collect()
}

/// `τ̄(f + ω)` at real `ω` as the extrapolated limit of `τ(f + ω + iδ)`.
pub fn tau_boundary_limit(f: &CircleMap, omega: f64, cfg: &LimitConfig) -> Result<BoundaryValue> {
    let seed = if cfg.enrich {
        orbit_seed(f, omega)
    } else {
        None
    };
    let schedule = match &cfg.schedule {
        Some(s) => s.clone(),
        None => {
            let d = match &seed {
                Some(s) => Some(endpoint_distance(f, omega, s)?),
                None => None,
            };
            default_schedule(d, if seed.is_some() { cfg.levels } else { 5 })
        }
    };
    tau_boundary_limit_with(f, omega, &schedule, cfg, seed.as_ref())
}

/// [`tau_boundary_limit`] with an explicit schedule and seed.
pub fn tau_boundary_limit_with(
    f: &CircleMap,
    omega: f64,
    schedule: &[f64],
    cfg: &LimitConfig,
    seed: Option<&OrbitSeed>,
) -> Result<BoundaryValue> {
    let mut samples = Vec::with_capacity(schedule.len());
    let mut residual: f64 = 0.0;
    let mut enriched = true;
    for &d in schedule {
        let sol = tau_interior_enriched(f, c(omega, d), &cfg.interior, seed)?;
        residual = residual.max(sol.residual);
        enriched &= !sol.log_terms.is_empty();
        samples.push(sol.tau);
    }
    let pairs: Vec<(f64, Complex64)> = schedule
        .iter()
        .cloned()
        .zip(samples.iter().cloned())
        .collect();
    let mut extrapolants = Vec::with_capacity(pairs.len());
    for m in 2..=pairs.len() {
        extrapolants.push(richardson_extrapolate(&pairs[..m], cfg.order)?.value);
    }
    let last = richardson_extrapolate(&pairs, cfg.order)?;
    // extrapolants must settle
    let n = extrapolants.len();
    if n >= 3 {
        let d1 = (extrapolants[n - 1] - extrapolants[n - 2]).norm();
        let d0 = (extrapolants[n - 2] - extrapolants[n - 3]).norm();
        if d1 > 1e-6 && d1 > d0 {
            return Err(Error::Divergence {
                sequence: extrapolants,
            });
        }
    }
    Ok(BoundaryValue {
        tau: last.value,
        error_estimate: last.error_estimate,
        schedule: schedule.to_vec(),
        samples,
        extrapolants,
        order: cfg.order,
        enriched: enriched && seed.is_some(),
        residual,
    })
}

/// Settings of the chart-gluing solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlueConfig {
    /// Initial number of log-periodic modes on each side per chart.
    pub modes: usize,
    pub max_modes: usize,
    /// Matching points per fundamental segment.
    pub samples: usize,
    pub tol: f64,
}

impl Default for GlueConfig {
    fn default() -> Self {
        GlueConfig {
            modes: 4,
            max_modes: 24,
            samples: 40,
            // the charts themselves are only held to 1e-9
            tol: 1e-9,
        }
    }
}

/// `τ̄` of a hyperbolic rotation-0 map from the glued chart description:
/// in chart `j`, `Φ_j(ζ) = τ·Log ζ / ln λ_j + c_j + Σ_m d_{j,m} e^{iα_j m Log ζ}`
/// with `α_j = 2π / ln λ_j`.
#[derive(Debug, Clone, Serialize)]
pub struct GluedSolution {
    pub tau: Complex64,
    pub modes: usize,
    pub residual: f64,
    /// `Φ(b_last) − Φ(b_last − 1)` along γ; equals 1.
    pub winding: f64,
    pub offsets: Vec<Complex64>,
    /// Unscaled `d_{j,m}` for `m = −M..=M`, `m ≠ 0`.
    pub coefficients: Vec<Vec<Complex64>>,
    #[serde(skip)]
    charts: Vec<KoenigsChart>,
}

/// Which half-plane the chart coordinate ranges over: repellor charts use
/// `arg ∈ [0, π]`, attractor charts `arg ∈ [−π, 0]`.
fn side(chart: &KoenigsChart) -> f64 {
    if chart.attracting {
        -1.0
    } else {
        1.0
    }
}

fn branch_log(zeta: Complex64, sgn: f64) -> Complex64 {
    let mut arg = zeta.arg();
    if sgn < 0.0 && arg > PI / 2.0 {
        arg -= TAU;
    }
    if sgn > 0.0 && arg < -PI / 2.0 {
        arg += TAU;
    }
    c(zeta.norm().ln(), arg)
}

impl GluedSolution {
    /// `Φ_j` at `L = Log ζ` (on the chart's branch).
    pub fn phi_log(&self, j: usize, log_zeta: Complex64) -> Complex64 {
        let ln_l = self.charts[j].multiplier.ln();
        let alpha = TAU / ln_l;
        let mm = self.modes as i64;
        let series: Complex64 = (-mm..=mm)
            .filter(|&m| m != 0)
            .zip(&self.coefficients[j])
            .map(|(m, &d)| d * (I * alpha * m as f64 * log_zeta).exp())
            .sum();
        self.tau * log_zeta / ln_l + self.offsets[j] + series
    }

    /// `Φ` at the chart coordinate `ζ` of chart `j`.
    pub fn phi_chart(&self, j: usize, zeta: Complex64) -> Complex64 {
        self.phi_log(j, branch_log(zeta, side(&self.charts[j])))
    }
}

fn glue_once(
    f: &CircleMap,
    curve: &AscendingCurve,
    modes: usize,
    samples: usize,
) -> Result<(GluedSolution, f64)> {
    let charts = &curve.charts;
    let n = charts.len();
    let mm = modes as i64;
    let ms: Vec<i64> = (-mm..=mm).filter(|&m| m != 0).collect();
    let nun = 1 + (n - 1) + n * ms.len();
    let col_scale = |j: usize, m: i64| {
        let alpha = TAU / charts[j].multiplier.ln();
        1f64.max((-alpha * m as f64 * side(&charts[j]) * PI).exp())
    };
    let phi_row = |j: usize, l: Complex64, row: &mut [Complex64], sign: f64| {
        let ln_l = charts[j].multiplier.ln();
        let alpha = TAU / ln_l;
        row[0] += sign * l / ln_l;
        if j > 0 {
            row[j] += c(sign, 0.0);
        }
        let base = n + j * ms.len();
        for (i, &m) in ms.iter().enumerate() {
            // scaled in log space: both factors overflow separately near the ends
            let log_scale = (-alpha * m as f64 * side(&charts[j]) * PI).max(0.0);
            row[base + i] += sign * (I * alpha * m as f64 * l - log_scale).exp();
        }
    };
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let mut rhs: Vec<Complex64> = Vec::new();
    let mut check: Vec<(Vec<Complex64>, Complex64)> = Vec::new();
    for j in 0..n {
        let k = (j + 1) % n;
        let wrap = j + 1 == n;
        let b = curve.breaks[j];
        let fb = f.eval_lift(b);
        let (lo, hi) = (b.min(fb), b.max(fb));
        for s in 0..(2 * samples - 1) {
            let x = lo + (hi - lo) * s as f64 / (2 * samples - 2) as f64;
            let t = charts[j].inverse(x)?;
            let t2 = charts[k].inverse(x - if wrap { 1.0 } else { 0.0 })?;
            if !(t > 0.0 && t2 < 0.0) {
                return Err(Error::Geometry(format!(
                    "matching point {x} is not between adjacent periodic points"
                )));
            }
            let l1 = c(t.ln(), 0.0);
            let l2 = c((-t2).ln(), side(&charts[k]) * PI);
            let mut row = vec![c(0.0, 0.0); nun];
            phi_row(j, l1, &mut row, 1.0);
            phi_row(k, l2, &mut row, -1.0);
            let r = c(if wrap { 1.0 } else { 0.0 }, 0.0);
            if s % 2 == 0 {
                rows.push(row);
                rhs.push(r);
            } else {
                check.push((row, r));
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), nun, |i, j| rows[i][j]);
    let bv = DVector::from_vec(rhs.clone());
    let sol = least_squares(a, bv)?;
    let residual = rows
        .iter()
        .zip(&rhs)
        .chain(check.iter().map(|(r, v)| (r, v)))
        .map(|(row, v)| {
            (row.iter()
                .zip(sol.iter())
                .map(|(x, y)| x * y)
                .sum::<Complex64>()
                - v)
                .norm()
        })
        .fold(0.0f64, f64::max);
    let tau = sol[0];
    let mut offsets = vec![c(0.0, 0.0); n];
    offsets[1..n].copy_from_slice(&sol.as_slice()[1..n]);
    let coefficients: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            ms.iter()
                .enumerate()
                .map(|(i, &m)| sol[n + j * ms.len() + i] / col_scale(j, m))
                .collect()
        })
        .collect();
    let glued = GluedSolution {
        tau,
        modes,
        residual,
        winding: 0.0,
        offsets,
        coefficients,
        charts: charts.clone(),
    };
    Ok((glued, residual))
}

/// `τ̄(f)` for hyperbolic `f` with rotation number 0 from the curve `γ`.
pub fn tau_boundary_hyperbolic(
    f: &CircleMap,
    curve: &AscendingCurve,
    cfg: &GlueConfig,
) -> Result<GluedSolution> {
    curve
        .check_ordering(f)
        .map_err(|e| Error::Geometry(format!("invalid ascending curve: {e}")))?;
    let mut modes = cfg.modes.max(1);
    let mut best: Option<GluedSolution> = None;
    let sol = loop {
        let (sol, res) = glue_once(f, curve, modes, cfg.samples)?;
        if res <= cfg.tol {
            break sol;
        }
        if best.as_ref().is_none_or(|b| res < b.residual) {
            best = Some(sol);
        }
        if modes + 2 > cfg.max_modes {
            let r = best.map_or(f64::INFINITY, |b| b.residual);
            return Err(Error::Accuracy {
                residual: r,
                tol: cfg.tol,
            });
        }
        modes += 2;
    };
    finish_glued(sol, curve)
}

fn finish_glued(mut sol: GluedSolution, curve: &AscendingCurve) -> Result<GluedSolution> {
    if !(sol.tau.im > 0.0) {
        return Err(Error::InvalidSolution(format!(
            "Im τ = {} is not positive",
            sol.tau.im
        )));
    }
    // Φ along γ: no jumps, total advance 1
    let mut total = c(0.0, 0.0);
    for (j, arc) in curve.arcs.iter().enumerate() {
        let steps = 64;
        let mut prev = sol.phi_chart(j, arc.zeta(0.0));
        let start = prev;
        for s in 1..=steps {
            let v = sol.phi_chart(j, arc.zeta(s as f64 / steps as f64));
            if (v - prev).norm() > 0.25 {
                return Err(Error::InvalidSolution(format!("Φ jumps along arc {j}")));
            }
            prev = v;
        }
        total += prev - start;
    }
    sol.winding = total.re;
    if (total - 1.0).norm() > 1e-6 {
        return Err(Error::InvalidSolution(format!(
            "Φ∘γ advances by {total}, not 1"
        )));
    }
    Ok(sol)
}
