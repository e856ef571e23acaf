//! Koenigs charts at hyperbolic periodic points, the transition maps between
//! adjacent charts, and the ascending curve γ.
//!
//! A chart is represented by a truncated local series `h` solving
//! `h(g(u)) = κ·h(u)` for the contracting branch `g` of the return map near
//! the point, extended to larger neighborhoods by iterating `g`.

use crate::circle_maps::CircleMap;
use crate::error::{Error, Result};
use crate::numerics::Contour;
use crate::rotation::{periodic_orbits_lifted, rational_rotation, PeriodicOrbitSet, PARABOLIC_TOL};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

const SERIES_ORDER: usize = 24;
const CAUCHY_POINTS: usize = 64;
/// Maximal number of iterates used to bring a point into the series disc.
pub const MAX_DEPTH: usize = 1 << 14;
/// Required accuracy of the Koenigs functional equation.
pub const CHART_TOL: f64 = 1e-9;

// ---- truncated power series with real coefficients ----

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Powers `g^0, …, g^{n−1}` truncated to `n` coefficients.
fn series_powers(g: &[f64]) -> Vec<Vec<f64>> {
    let n = g.len();
    let mut pw = Vec::with_capacity(n);
    let mut cur = vec![0.0; n];
    cur[0] = 1.0;
    for _ in 0..n {
        let next = series_mul(&cur, g);
        pw.push(cur);
        cur = next;
    }
    pw
}

/// Compositional inverse of `c` (`c_0 = 0`, `c_1 ≠ 0`).
fn series_revert(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut r = vec![0.0; n];
    r[1] = 1.0 / c[1];
    for k in 2..n {
        // coefficient k of c∘r with r_k = 0, then solve c_1 r_k + rest = 0
        let pw = series_powers(&r);
        let rest: f64 = (2..=k).map(|m| c[m] * pw[m][k]).sum();
        r[k] = -rest / c[1];
    }
    r
}

/// Koenigs coefficients: `h(g(u)) = κ h(u)`, `h(u) = u + O(u²)`.
fn koenigs_series(g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let kappa = g[1];
    let pw = series_powers(g);
    let mut h = vec![0.0; n];
    h[1] = 1.0;
    for m in 2..n {
        let s: f64 = (1..m).map(|k| h[k] * pw[k][m]).sum();
        h[m] = s / (kappa - kappa.powi(m as i32));
    }
    h
}

fn series_eval(c: &[f64], u: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * u + ck)
}

fn series_eval_real(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * u + ck)
}

/// Taylor coefficients of `g` at `a` from a Cauchy integral on `|z − a| = r`.
fn taylor_coefficients<G>(g: G, a: f64, r: f64) -> Result<Vec<f64>>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    let m = CAUCHY_POINTS;
    let mut buf = Vec::with_capacity(m);
    for j in 0..m {
        let e = Complex64::from_polar(r, 2.0 * PI * j as f64 / m as f64);
        buf.push(g(Complex64::new(a, 0.0) + e)?);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let coeffs: Vec<f64> = (0..SERIES_ORDER)
        .map(|k| buf[k].re / (m as f64 * r.powi(k as i32)))
        .collect();
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Convergence("non-finite Taylor coefficient".into()));
    }
    Ok(coeffs)
}

/// The return map `G = F^q − p` of an orbit with rotation number `p/q`.
#[derive(Debug, Clone, PartialEq)]
struct ReturnMap {
    map: CircleMap,
    p: i64,
    q: u64,
}

impl ReturnMap {
    fn real(&self, x: f64) -> f64 {
        (0..self.q).fold(x, |y, _| self.map.eval_lift(y)) - self.p as f64
    }

    fn real_inv(&self, y: f64) -> f64 {
        (0..self.q).fold(y + self.p as f64, |x, _| self.map.inverse_lift(x))
    }

    fn complex(&self, z: Complex64) -> Result<Complex64> {
        let mut w = z;
        for _ in 0..self.q {
            w = self.map.eval_complex(w)?.0;
        }
        Ok(w - self.p as f64)
    }

    fn complex_inv(&self, w: Complex64) -> Result<Complex64> {
        let mut z = w + self.p as f64;
        for _ in 0..self.q {
            z = self.map.inverse_complex(z)?;
            if !(z.im.abs() < self.map.analyticity_band()) {
                return Err(Error::Domain {
                    z,
                    band: self.map.analyticity_band(),
                });
            }
        }
        Ok(z)
    }
}

/// A linearizing chart `ψ` at a hyperbolic periodic point:
/// `ψ⁻¹ ∘ G ∘ ψ (ζ) = λ ζ`, `ψ(0) = a`, `ψ'(0) = 1/scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct KoenigsChart {
    /// The periodic point `a` (a lift, not reduced).
    pub point: f64,
    /// `λ = (F^q)'(a)`.
    pub multiplier: f64,
    pub attracting: bool,
    scale: f64,
    kappa: f64,
    h: Vec<f64>,
    h_inv: Vec<f64>,
    small: f64,
    taylor_radius: f64,
    neighbor_distance: f64,
    ret: ReturnMap,
}

impl KoenigsChart {
    /// `G` or `G⁻¹`, whichever contracts towards the point.
    fn contract_real(&self, x: f64) -> f64 {
        if self.attracting {
            self.ret.real(x)
        } else {
            self.ret.real_inv(x)
        }
    }

    fn expand_real(&self, x: f64) -> f64 {
        if self.attracting {
            self.ret.real_inv(x)
        } else {
            self.ret.real(x)
        }
    }

    fn contract_complex(&self, z: Complex64) -> Result<Complex64> {
        if self.attracting {
            self.ret.complex(z)
        } else {
            self.ret.complex_inv(z)
        }
    }

    fn expand_complex(&self, z: Complex64) -> Result<Complex64> {
        if self.attracting {
            self.ret.complex_inv(z)
        } else {
            self.ret.complex(z)
        }
    }

    fn depth_error(&self, what: &str) -> Error {
        Error::Coverage(format!(
            "{what} did not reach the series disc at {} within {MAX_DEPTH} iterates",
            self.point
        ))
    }

    /// `ψ⁻¹(x)` on the real line.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        let mut u = x - self.point;
        let mut n = 0;
        while u.abs() > self.small {
            u = self.contract_real(self.point + u) - self.point;
            n += 1;
            if n > MAX_DEPTH || !u.is_finite() {
                return Err(self.depth_error("ψ⁻¹"));
            }
        }
        Ok(series_eval_real(&self.h, u) / self.kappa.powi(n as i32) / self.scale)
    }

    /// `ψ⁻¹(z)` near the real axis.
    pub fn inverse_complex(&self, z: Complex64) -> Result<Complex64> {
        let a = Complex64::new(self.point, 0.0);
        let mut u = z - a;
        let mut n = 0;
        while u.norm() > self.small {
            u = self.contract_complex(a + u)? - a;
            n += 1;
            if n > MAX_DEPTH || !u.norm().is_finite() {
                return Err(self.depth_error("ψ⁻¹"));
            }
        }
        Ok(series_eval(&self.h, u) / self.kappa.powi(n as i32) / self.scale)
    }

    /// `ψ(t)` for real `t`.
    pub fn chart_real(&self, t: f64) -> Result<f64> {
        let mut v = t * self.scale;
        let mut n = 0;
        while v.abs() > self.small {
            v *= self.kappa;
            n += 1;
            if n > MAX_DEPTH {
                return Err(self.depth_error("ψ"));
            }
        }
        let mut x = self.point + series_eval_real(&self.h_inv, v);
        for _ in 0..n {
            x = self.expand_real(x);
        }
        Ok(x)
    }

    /// `ψ(ζ)` for complex `ζ`.
    pub fn chart(&self, zeta: Complex64) -> Result<Complex64> {
        let mut v = zeta * self.scale;
        let mut n = 0;
        while v.norm() > self.small {
            v *= self.kappa;
            n += 1;
            if n > MAX_DEPTH {
                return Err(self.depth_error("ψ"));
            }
        }
        let mut z = Complex64::new(self.point, 0.0) + series_eval(&self.h_inv, v);
        for _ in 0..n {
            z = self.expand_complex(z)?;
        }
        Ok(z)
    }

    /// The chart `ζ ↦ ψ(c·ζ)`.
    pub fn rescaled(&self, c: f64) -> KoenigsChart {
        let mut out = self.clone();
        out.scale *= c;
        out
    }

    /// Sup of `|ψ⁻¹(G(z)) − λ ψ⁻¹(z)|` over real points on both sides of the
    /// point and a circle of complex points around it.
    pub fn residual(&self) -> Result<f64> {
        let a = self.point;
        let mut worst: f64 = 0.0;
        let reach = 0.4 * self.neighbor_distance;
        for k in 1..=16 {
            let d = reach * k as f64 / 16.0;
            for x in [a - d, a + d] {
                let lhs = self.inverse(self.ret.real(x))?;
                let rhs = self.multiplier * self.inverse(x)?;
                worst = worst.max((lhs - rhs).abs());
            }
        }
        let rho = (0.25 * self.neighbor_distance).min(0.5 * self.taylor_radius);
        for k in 0..32 {
            let z = Complex64::new(a, 0.0) + Complex64::from_polar(rho, 2.0 * PI * k as f64 / 32.0);
            let lhs = self.inverse_complex(self.ret.complex(z)?)?;
            let rhs = self.multiplier * self.inverse_complex(z)?;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }
}

/// Builds the Koenigs chart of `F^q − p` at its fixed point `point`.
///
/// `neighbor_distance` is the distance to the closest other periodic point.
fn build_chart(
    f: &CircleMap,
    p: i64,
    q: u64,
    point: f64,
    multiplier: f64,
    neighbor_distance: f64,
) -> Result<KoenigsChart> {
    if !(multiplier > 0.0) || (multiplier - 1.0).abs() <= PARABOLIC_TOL {
        return Err(Error::NotHyperbolic(format!(
            "multiplier {multiplier} at {point}"
        )));
    }
    let ret = ReturnMap {
        map: f.clone(),
        p,
        q,
    };
    if (ret.real(point) - point).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "{point} is not fixed by F^{q} − {p}"
        )));
    }
    // the Cauchy circle must keep every iterate inside the band
    let mut growth: f64 = 1.0;
    let mut x = point;
    let mut d = 1.0;
    for _ in 0..q {
        let (y, d1, _) = f.eval_lift2(x);
        d *= d1;
        growth = growth.max(d.abs());
        x = y;
    }
    let band = f.analyticity_band();
    let r = 0.02f64
        .min(0.4 * band / growth)
        .min(0.4 * neighbor_distance);
    let local = taylor_coefficients(|z| Ok(ret.complex(z)? - point), point, r)?;
    let attracting = multiplier < 1.0;
    let g = if attracting {
        local
    } else {
        series_revert(&local)
    };
    let kappa = g[1];
    let h = koenigs_series(&g);
    let h_inv = series_revert(&h);
    let small = 1e-3f64.min(0.1 * r).min(0.1 * neighbor_distance);
    Ok(KoenigsChart {
        point,
        multiplier,
        attracting,
        scale: 1.0,
        kappa,
        h,
        h_inv,
        small,
        taylor_radius: r,
        neighbor_distance,
        ret,
    })
}

/// Koenigs chart of `f` at the periodic point `point` of the orbit with
/// rotation number `p/q` (`p` the numerator of the lift) and multiplier `λ`.
pub fn koenigs_chart(
    f: &CircleMap,
    p: i64,
    q: u64,
    point: f64,
    multiplier: f64,
) -> Result<KoenigsChart> {
    if (multiplier - 1.0).abs() <= PARABOLIC_TOL {
        return Err(Error::NotHyperbolic(format!(
            "multiplier {multiplier} at {point}"
        )));
    }
    let set = periodic_orbits_lifted(f, p, q)?;
    let nearest = set
        .points
        .iter()
        .map(|pt| {
            let d = (pt.point - point).rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .filter(|&d| d > 1e-9)
        .fold(1.0f64, f64::min);
    build_chart(f, p, q, point, multiplier, nearest)
}

/// `ψ_{j;j+1} = ψ_{j+1}⁻¹ ∘ ψ_j` on positive reals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMap {
    pub index: usize,
    from: KoenigsChart,
    to: KoenigsChart,
    /// Whether `a_{j+1}` is `a_0 + 1`.
    wrap: bool,
}

impl TransitionMap {
    pub fn eval(&self, t: f64) -> Result<f64> {
        let x = self.from.chart_real(t)?;
        self.to.inverse(x - if self.wrap { 1.0 } else { 0.0 })
    }

    /// Test parameters: 64 log-spaced `t` over two fundamental domains around
    /// the chart image of the midpoint between the two periodic points.
    pub fn test_parameters(&self) -> Result<Vec<f64>> {
        let next = self.to.point + if self.wrap { 1.0 } else { 0.0 };
        let t0 = self.from.inverse(0.5 * (self.from.point + next))?;
        let span = self.from.multiplier.ln().abs();
        Ok((0..64)
            .map(|k| t0 * (span * (2.0 * k as f64 / 63.0 - 1.0)).exp())
            .collect())
    }

    /// Sup of `|ψ_{j;j+1}(λ_j t) − λ_{j+1} ψ_{j;j+1}(t)|` over the test parameters.
    pub fn equivariance_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for t in self.test_parameters()? {
            let lhs = self.eval(self.from.multiplier * t)?;
            let rhs = self.to.multiplier * self.eval(t)?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    }

    /// The same map with both charts replaced by `ζ ↦ ψ(cζ)`.
    pub fn rescaled(&self, c: f64) -> TransitionMap {
        TransitionMap {
            index: self.index,
            from: self.from.rescaled(c),
            to: self.to.rescaled(c),
            wrap: self.wrap,
        }
    }
}

/// Hyperbolic periodic orbits with their rotation data.
pub struct HyperbolicData {
    pub p: i64,
    pub q: u64,
    pub orbits: PeriodicOrbitSet,
}

/// Certifies that `f` has rational rotation number and hyperbolic periodic
/// orbits.
pub fn hyperbolic_data(f: &CircleMap) -> Result<HyperbolicData> {
    let (r, p) = rational_rotation(f)?
        .ok_or_else(|| Error::NotHyperbolic("no rational rotation number".into()))?;
    let q = r.q();
    let orbits = match periodic_orbits_lifted(f, p, q) {
        Ok(o) => o,
        Err(Error::Consistency(m)) => return Err(Error::NotHyperbolic(m)),
        Err(e) => return Err(e),
    };
    if !orbits.is_hyperbolic() {
        return Err(Error::NotHyperbolic("a periodic orbit is parabolic".into()));
    }
    Ok(HyperbolicData { p, q, orbits })
}

/// Charts at all periodic points, sorted by position in `[0, 1)`.
pub fn all_charts(f: &CircleMap, data: &HyperbolicData) -> Result<Vec<KoenigsChart>> {
    let pts = &data.orbits.points;
    let n = pts.len();
    (0..n)
        .map(|j| {
            let prev = pts[(j + n - 1) % n].point;
            let next = pts[(j + 1) % n].point;
            let d1 = (pts[j].point - prev).rem_euclid(1.0);
            let d2 = (next - pts[j].point).rem_euclid(1.0);
            let nearest = if n == 1 { 1.0 } else { d1.min(d2) };
            build_chart(f, data.p, data.q, pts[j].point, pts[j].multiplier, nearest)
        })
        .collect()
}

/// The transition maps between cyclically adjacent charts.
pub fn transition_maps(f: &CircleMap) -> Result<Vec<TransitionMap>> {
    let data = hyperbolic_data(f)?;
    let charts = all_charts(f, &data)?;
    let n = charts.len();
    let maps: Vec<TransitionMap> = (0..n)
        .map(|j| TransitionMap {
            index: j,
            from: charts[j].clone(),
            to: charts[(j + 1) % n].clone(),
            wrap: j + 1 == n,
        })
        .collect();
    // chart domains must overlap: every test parameter has to be reachable
    for m in &maps {
        for t in m.test_parameters()? {
            m.eval(t)?;
        }
    }
    Ok(maps)
}

/// Parameters of one arc `γ_j = ψ_j(circular arc)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ArcData {
    pub point: f64,
    pub multiplier: f64,
    pub attracting: bool,
    /// Chart coordinates of the left and right endpoints (`< 0 < `).
    pub zeta_left: f64,
    pub zeta_right: f64,
    pub sagitta: f64,
}

impl ArcData {
    /// The circular arc in chart coordinates, `s ∈ [0, 1]` from left to right,
    /// below the axis for attractors and above it for repellors.
    pub fn zeta(&self, s: f64) -> Complex64 {
        let m = 0.5 * (self.zeta_left + self.zeta_right);
        let c = 0.5 * (self.zeta_right - self.zeta_left);
        let h = self.sagitta;
        let radius = (c * c + h * h) / (2.0 * h);
        let half = c.atan2(radius - h);
        let sigma = if self.attracting { -1.0 } else { 1.0 };
        let center = Complex64::new(m, -sigma * (radius - h));
        let phi = sigma * (PI / 2.0 + half * (1.0 - 2.0 * s));
        center + Complex64::from_polar(radius, phi)
    }
}

/// The curve γ: below attractors, above repellors, with `f(γ)` above `γ`.
#[derive(Debug, Clone)]
pub struct AscendingCurve {
    pub contour: Contour,
    pub arcs: Vec<ArcData>,
    /// Real points `b_j` where consecutive arcs meet; `b_j` lies between
    /// `a_j` and `a_{j+1}`.
    pub breaks: Vec<f64>,
    pub charts: Vec<KoenigsChart>,
    pub amplitude: f64,
}

const ARC_SAMPLES: usize = 64;

fn geometry(msg: String) -> Error {
    Error::Geometry(format!("{msg}; try a smaller amplitude"))
}

/// Builds γ for a hyperbolic `f` with rotation number 0.
pub fn ascending_curve(f: &CircleMap, amplitude: f64) -> Result<AscendingCurve> {
    if !(amplitude > 0.0) {
        return Err(Error::Contract("amplitude must be positive".into()));
    }
    let data = hyperbolic_data(f)?;
    if data.q != 1 {
        return Err(Error::Contract(
            "the ascending curve is only built for rotation number 0".into(),
        ));
    }
    let charts = all_charts(f, &data)?;
    let n = charts.len();
    let band = f.analyticity_band();
    let pos: Vec<f64> = charts.iter().map(|c| c.point).collect();
    let breaks: Vec<f64> = (0..n)
        .map(|j| {
            let next = if j + 1 == n { pos[0] + 1.0 } else { pos[j + 1] };
            0.5 * (pos[j] + next)
        })
        .collect();
    let mut arcs = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n * ARC_SAMPLES);
    for (j, chart) in charts.iter().enumerate() {
        let left = if j == 0 {
            breaks[n - 1] - 1.0
        } else {
            breaks[j - 1]
        };
        let arc = ArcData {
            point: chart.point,
            multiplier: chart.multiplier,
            attracting: chart.attracting,
            zeta_left: chart.inverse(left)?,
            zeta_right: chart.inverse(breaks[j])?,
            sagitta: amplitude,
        };
        for k in 0..ARC_SAMPLES {
            let s = k as f64 / ARC_SAMPLES as f64;
            let z = chart
                .chart(arc.zeta(s))
                .map_err(|e| geometry(format!("arc {j} leaves its chart ({e})")))?;
            if !(z.im.abs() < 0.9 * band) {
                return Err(geometry(format!("arc {j} reaches height {:.3e}", z.im)));
            }
            samples.push(z);
        }
        arcs.push(arc);
    }
    let curve = AscendingCurve {
        contour: Contour {
            samples,
            closed: true,
        },
        arcs,
        breaks,
        charts,
        amplitude,
    };
    curve.check_ordering(f)?;
    Ok(curve)
}

impl AscendingCurve {
    /// Height of γ above the real point `x` by linear interpolation.
    pub fn height_at(&self, x: f64) -> f64 {
        let s = &self.contour.samples;
        let n = s.len();
        let x0 = s[0].re;
        let xr = x0 + (x - x0).rem_euclid(1.0);
        for k in 0..n {
            let a = s[k];
            let mut b = s[(k + 1) % n];
            if k + 1 == n {
                b += 1.0;
            }
            if xr >= a.re && xr <= b.re {
                let w = if b.re > a.re {
                    (xr - a.re) / (b.re - a.re)
                } else {
                    0.0
                };
                return a.im + w * (b.im - a.im);
            }
        }
        f64::NAN
    }

    /// Verifies that γ is a graph over the circle passing below attractors and
    /// above repellors, and that `f(γ)` lies strictly above γ.
    pub fn check_ordering(&self, f: &CircleMap) -> Result<()> {
        let s = &self.contour.samples;
        for k in 1..s.len() {
            if !(s[k].re > s[k - 1].re) {
                return Err(geometry(format!(
                    "γ is not a graph near x = {:.6}",
                    s[k].re
                )));
            }
        }
        if !(s[0].re + 1.0 > s[s.len() - 1].re) {
            return Err(geometry("γ does not close up".into()));
        }
        for arc in &self.arcs {
            let h = self.height_at(arc.point);
            if arc.attracting == (h >= 0.0) {
                return Err(geometry(format!("γ on the wrong side of {:.6}", arc.point)));
            }
        }
        for (k, &z) in s.iter().enumerate() {
            let w = f
                .eval_complex(z)
                .map_err(|e| geometry(format!("f(γ) undefined at sample {k} ({e})")))?
                .0;
            if !(w.im > self.height_at(w.re)) {
                return Err(geometry(format!("f(γ) not above γ at x = {:.6}", w.re)));
            }
        }
        Ok(())
    }
}
