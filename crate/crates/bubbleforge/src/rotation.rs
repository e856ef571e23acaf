//! Real rotation theory: rotation numbers, comparison with rationals, the
//! intervals `I_{p/q}`, periodic orbits and the distortion `D_f`.

use crate::circle_maps::CircleMap;
use crate::error::{Error, Result};
use crate::numerics::integrate_interval;
use std::fmt;
use std::str::FromStr;

/// Largest denominator handled by the certified comparator.
pub const MAX_CERTIFIED_Q: u64 = 64;
/// Values of `F^q − id − p` within this distance of zero count as zeros.
pub const ZERO_TOL: f64 = 1e-13;
/// Multipliers within this distance of 1 are parabolic.
pub const PARABOLIC_TOL: f64 = 1e-8;
const GRID: usize = 1024;
/// Roots closer than this are one root found twice.
const SAME_ROOT: f64 = 1e-12;
const MIN_CELL: f64 = 1.0 / (1u64 << 20) as f64;

/// Value and first two derivatives of `F^q(x) − x − p` at a point.
type Jet = (f64, f64, f64);

/// `p/q` in lowest terms with `0 ≤ p/q < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct RationalRotation {
    p: i64,
    q: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl RationalRotation {
    pub fn new(p: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Contract("denominator must be positive".into()));
        }
        if p < 0 || p as u64 >= q {
            return Err(Error::Contract(format!("need 0 ≤ p/q < 1, got {p}/{q}")));
        }
        if gcd(p as u64, q) != 1 {
            return Err(Error::Contract(format!("{p}/{q} is not in lowest terms")));
        }
        Ok(RationalRotation { p, q })
    }

    pub fn zero() -> Self {
        RationalRotation { p: 0, q: 1 }
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

impl fmt::Display for RationalRotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for RationalRotation {
    type Err = Error;

    /// Parses `p/q`. A bare integer `p` means `p/1`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_int = |t: &str, offset: usize| -> Result<i64> {
            let trimmed = t.trim();
            if trimmed.is_empty() {
                return Err(Error::Parse {
                    position: offset,
                    message: "expected an integer".into(),
                });
            }
            trimmed.parse::<i64>().map_err(|e| Error::Parse {
                position: offset,
                message: format!("invalid integer {trimmed:?}: {e}"),
            })
        };
        let (p, q) = match s.find('/') {
            Some(k) => (parse_int(&s[..k], 0)?, parse_int(&s[k + 1..], k + 1)?),
            None => (parse_int(s, 0)?, 1),
        };
        if q <= 0 {
            return Err(Error::Parse {
                position: s.find('/').map_or(0, |k| k + 1),
                message: "denominator must be positive".into(),
            });
        }
        RationalRotation::new(p, q as u64).map_err(|e| Error::Parse {
            position: 0,
            message: e.to_string(),
        })
    }
}

/// Trichotomy of `rot(f)` against a rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Less,
    Equal,
    Greater,
}

/// `(F^q(x), (F^q)'(x), (F^q)''(x))`.
pub fn iterate(map: &CircleMap, q: u64, x: f64) -> (f64, f64, f64) {
    let (mut y, mut d, mut s) = (x, 1.0, 0.0);
    for _ in 0..q {
        let (f, f1, f2) = map.eval_lift2(y);
        s = f2 * d * d + f1 * s;
        d *= f1;
        y = f;
    }
    (y, d, s)
}

/// `D(x) = F^q(x) − x − p` with derivatives.
fn defect(map: &CircleMap, p: i64, q: u64, x: f64) -> Jet {
    let (y, d, s) = iterate(map, q, x);
    (y - x - p as f64, d - 1.0, s)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
        if b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Compares the rotation number of the lift `F` with `p/q` (`p` any integer).
pub fn compare_lifted(map: &CircleMap, p: i64, q: u64) -> Result<Comparison> {
    if q == 0 || q > MAX_CERTIFIED_Q {
        return Err(Error::Contract(format!(
            "denominator {q} outside the certified range 1..={MAX_CERTIFIED_Q}"
        )));
    }
    let h = 1.0 / GRID as f64;
    let vals: Vec<Jet> = (0..=GRID)
        .map(|j| defect(map, p, q, j as f64 * h))
        .collect();
    let sign = vals[0].0.signum();
    if vals.iter().any(|v| v.0 == 0.0 || v.0.signum() != sign) {
        return Ok(Comparison::Equal);
    }
    // E = sign·D > 0 on the grid; refine its local minima
    let e = |x: f64| sign * defect(map, p, q, x).0;
    for j in 0..GRID {
        let prev = vals[(j + GRID - 1) % GRID].0 * sign;
        let cur = vals[j].0 * sign;
        let next = vals[j + 1].0 * sign;
        if cur <= prev && cur <= next {
            let x = j as f64 * h;
            let (_, v) = golden_min(e, x - h, x + h);
            if v <= ZERO_TOL {
                return Ok(Comparison::Equal);
            }
        }
    }
    // certify E > 0 with a second-order Taylor bound per cell
    let lower = |a: Jet, b: Jet, w: f64| {
        let (e0, s0, c0) = (sign * a.0, sign * a.1, sign * a.2);
        let (e1, s1, c1) = (sign * b.0, sign * b.1, sign * b.2);
        let m2 = 2.0 * c0.abs().max(c1.abs()) + 1e-12;
        let from_left = e0.min(e0 + s0 * w - m2 * w * w / 2.0);
        let from_right = e1.min(e1 - s1 * w - m2 * w * w / 2.0);
        from_left.max(from_right)
    };
    let mut stack: Vec<(f64, f64, Jet, Jet)> = (0..GRID)
        .map(|j| (j as f64 * h, h, vals[j], vals[j + 1]))
        .collect();
    while let Some((x, w, a, b)) = stack.pop() {
        if lower(a, b, w) > 0.0 {
            continue;
        }
        if w <= MIN_CELL {
            return Err(Error::Undecided(format!(
                "cannot certify the sign of F^{q} − id − {p} near x = {x}"
            )));
        }
        let m = defect(map, p, q, x + w / 2.0);
        if m.0 == 0.0 || m.0.signum() != sign {
            return Ok(Comparison::Equal);
        }
        stack.push((x, w / 2.0, a, m));
        stack.push((x + w / 2.0, w / 2.0, m, b));
    }
    Ok(if sign < 0.0 {
        Comparison::Less
    } else {
        Comparison::Greater
    })
}

/// Compares `rot(F)` (of the lift) with `r`.
pub fn compare_to_rational(map: &CircleMap, r: RationalRotation) -> Result<Comparison> {
    compare_lifted(map, r.p, r.q)
}

/// The set `I_{p/q} = {ω : rot(f + ω) = p/q}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RotationInterval {
    pub rational: RationalRotation,
    /// Left endpoint reduced mod 1.
    pub left: f64,
    /// Right endpoint reduced mod 1.
    pub right: f64,
    /// Endpoints on the real line, `left_lift ≤ right_lift`.
    pub left_lift: f64,
    pub right_lift: f64,
    pub degenerate: bool,
}

impl RotationInterval {
    pub fn length(&self) -> f64 {
        self.right_lift - self.left_lift
    }

    /// `n` points uniformly spaced in the open interval.
    pub fn interior_samples(&self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|k| self.left_lift + self.length() * k as f64 / (n + 1) as f64)
            .collect()
    }

    /// `n ≥ 2` points uniformly spaced in the closed interval.
    pub fn closed_samples(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|k| self.left_lift + self.length() * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Locates `I_{p/q}` for the family `f + ω` by bisection on `ω`.
pub fn rational_interval(f: &CircleMap, r: RationalRotation, tol: f64) -> Result<RotationInterval> {
    let target = r.value();
    let (dmin, dmax) = f.displacement_range();
    let cmp = |w: f64| compare_to_rational(&f.shift_real(w), r);
    let mut lo = target - dmax - 0.01;
    let mut hi = target - dmin + 0.01;
    if cmp(lo)? != Comparison::Less || cmp(hi)? != Comparison::Greater {
        return Err(Error::NotFound(format!(
            "rotation number {r} not bracketed"
        )));
    }
    let mut inside = None;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match cmp(mid) {
            Ok(Comparison::Less) => lo = mid,
            Ok(Comparison::Greater) => hi = mid,
            Ok(Comparison::Equal) => {
                inside = Some(mid);
                break;
            }
            Err(Error::Undecided(_)) => {
                inside = Some(mid);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let (left, right) = match inside {
        None => {
            let w = 0.5 * (lo + hi);
            (w, w)
        }
        Some(w) => {
            let edge = |mut out: f64, mut inn: f64| -> Result<f64> {
                while (out - inn).abs() > tol / 4.0 {
                    let mid = 0.5 * (out + inn);
                    match cmp(mid) {
                        Ok(Comparison::Equal) => inn = mid,
                        Ok(_) => out = mid,
                        Err(Error::Undecided(_)) => return Ok(mid),
                        Err(e) => return Err(e),
                    }
                }
                Ok(0.5 * (out + inn))
            };
            (edge(lo, w)?, edge(hi, w)?)
        }
    };
    Ok(RotationInterval {
        rational: r,
        left: left.rem_euclid(1.0),
        right: right.rem_euclid(1.0),
        left_lift: left,
        right_lift: right,
        degenerate: right - left < tol,
    })
}

/// Rotation number of the lift, as a real number (not reduced).
pub fn rotation_number_lift(map: &CircleMap, tol: f64) -> Result<f64> {
    const BUDGET: u64 = 200_000_000;
    let (dmin, _) = map.displacement_range();
    let n0 = dmin.floor() as i64;
    let spent = std::cell::Cell::new(0u64);
    // sign of rot − p/q: certified for small q, one-point bracket otherwise
    let probe = |p: i64, q: u64| -> Result<Comparison> {
        spent.set(spent.get() + q);
        if q <= MAX_CERTIFIED_Q {
            match compare_lifted(map, p, q) {
                Ok(c) => return Ok(c),
                Err(Error::Undecided(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let d = iterate(map, q, 0.0).0 - p as f64;
        Ok(if d > 0.0 {
            Comparison::Greater
        } else if d < 0.0 {
            Comparison::Less
        } else {
            Comparison::Equal
        })
    };
    // brackets a/b ≤ rot ≤ c/d
    // integer bracket n ≤ rot < n + 1
    let mut n = n0;
    loop {
        match probe(n, 1)? {
            Comparison::Equal => return Ok(n as f64),
            Comparison::Less if n == n0 => {
                return Err(Error::Consistency(
                    "rotation number below displacement minimum".into(),
                ))
            }
            Comparison::Less => {
                n -= 1;
                break;
            }
            Comparison::Greater => n += 1,
        }
    }
    let (mut a, mut b, mut c, mut d) = (n, 1u64, n + 1, 1u64);
    loop {
        if (c as f64 / d as f64) - (a as f64 / b as f64) <= tol {
            return Ok(0.5 * (a as f64 / b as f64 + c as f64 / d as f64));
        }
        if spent.get() > BUDGET {
            return Err(Error::Budget {
                lo: a as f64 / b as f64,
                hi: c as f64 / d as f64,
            });
        }
        let (mp, mq) = (a + c, b + d);
        let side = probe(mp, mq)?;
        if side == Comparison::Equal {
            return Ok(mp as f64 / mq as f64);
        }
        // the mediant replaces one endpoint; gallop along (k·fixed + old)/(…)
        // for the largest k that stays on the same side of rot
        let (fp, fq, op, oq) = if side == Comparison::Less {
            (a, b, c, d)
        } else {
            (c, d, a, b)
        };
        let cand = |k: u64| (k as i64 * fp + op, k * fq + oq);
        let (mut lo, mut hi) = (1u64, None);
        let mut k = 2u64;
        while hi.is_none() && spent.get() + cand(k).1 < BUDGET {
            let (np, nq) = cand(k);
            match probe(np, nq)? {
                Comparison::Equal => return Ok(np as f64 / nq as f64),
                s if s == side => {
                    lo = k;
                    k *= 2;
                }
                _ => hi = Some(k),
            }
        }
        let crossed = hi.is_some();
        if let Some(mut hi) = hi {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                let (np, nq) = cand(mid);
                match probe(np, nq)? {
                    Comparison::Equal => return Ok(np as f64 / nq as f64),
                    s if s == side => lo = mid,
                    _ => hi = mid,
                }
            }
        }
        let (np, nq) = cand(lo);
        let (xp, xq) = cand(lo + 1);
        if side == Comparison::Less {
            c = np;
            d = nq;
            if crossed {
                a = xp;
                b = xq;
            }
        } else {
            a = np;
            b = nq;
            if crossed {
                c = xp;
                d = xq;
            }
        }
    }
}

/// Rotation number reduced to `[0, 1)`.
pub fn rotation_number(map: &CircleMap, tol: f64) -> Result<f64> {
    Ok(rotation_number_lift(map, tol)?.rem_euclid(1.0))
}

/// Identifies a rational rotation number with denominator at most
/// [`MAX_CERTIFIED_Q`]. Returns the reduced rational and the numerator of the
/// lift, or `None` when no such rational is certified.
pub fn rational_rotation(map: &CircleMap) -> Result<Option<(RationalRotation, i64)>> {
    let rho = match rotation_number_lift(map, 1e-9) {
        Ok(v) => v,
        Err(Error::Budget { lo, hi }) => 0.5 * (lo + hi),
        Err(e) => return Err(e),
    };
    for q in 1..=MAX_CERTIFIED_Q {
        let p = (rho * q as f64).round() as i64;
        if gcd(p.unsigned_abs(), q) != 1 || (rho - p as f64 / q as f64).abs() > 1e-6 {
            continue;
        }
        if compare_lifted(map, p, q)? == Comparison::Equal {
            return Ok(Some((RationalRotation::new(p.rem_euclid(q as i64), q)?, p)));
        }
    }
    Ok(None)
}

/// One periodic point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PeriodicPoint {
    /// Position in `[0, 1)`.
    pub point: f64,
    pub period: u64,
    pub multiplier: f64,
    pub hyperbolic: bool,
}

/// All periodic points of rotation `p/q`, sorted by position.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PeriodicOrbitSet {
    pub rational: RationalRotation,
    pub points: Vec<PeriodicPoint>,
}

impl PeriodicOrbitSet {
    pub fn is_hyperbolic(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.hyperbolic)
    }
}

fn polish_root(map: &CircleMap, p: i64, q: u64, mut lo: f64, mut hi: f64) -> f64 {
    let g = |x: f64| defect(map, p, q, x);
    let glo = g(lo).0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d, _) = g(x);
        if v == 0.0 {
            return x;
        }
        if (v < 0.0) == (glo < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - v / d;
        if !(next > lo.min(hi) && next < lo.max(hi)) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 || (hi - lo).abs() <= 1e-16 {
            return next;
        }
        x = next;
    }
    x
}

/// Roots of `F^q − id − p` on `[0, 1)` with multipliers `(F^q)'`.
pub fn periodic_orbits(map: &CircleMap, r: RationalRotation) -> Result<PeriodicOrbitSet> {
    periodic_orbits_lifted(map, r.p, r.q)
}

/// As [`periodic_orbits`], for a lift whose rotation number is `p/q` with `p`
/// any integer.
pub fn periodic_orbits_lifted(map: &CircleMap, p: i64, q: u64) -> Result<PeriodicOrbitSet> {
    let r = RationalRotation::new(p.rem_euclid(q as i64), q)?;
    if compare_lifted(map, p, q)? != Comparison::Equal {
        return Err(Error::Contract(format!("rotation number is not {p}/{q}")));
    }
    let n = 4096;
    let h = 1.0 / n as f64;
    let mut vals: Vec<f64> = (0..n).map(|j| defect(map, p, q, j as f64 * h).0).collect();
    // D is periodic; reusing D(0) keeps a root at 0 from being missed or doubled
    vals.push(vals[0]);
    if vals.iter().all(|v| v.abs() < 1e-12) {
        return Err(Error::Consistency(
            "every point is periodic; no isolated periodic orbits".into(),
        ));
    }
    let mut roots: Vec<(f64, bool)> = Vec::new();
    for j in 0..n {
        let (a, b) = (vals[j], vals[j + 1]);
        if a == 0.0 {
            roots.push((j as f64 * h, false));
        } else if a * b < 0.0 {
            roots.push((
                polish_root(map, p, q, j as f64 * h, (j + 1) as f64 * h),
                false,
            ));
        }
    }
    // tangential zeros: extrema of D that touch zero without a sign change
    for j in 0..n {
        let (prev, cur, next) = (vals[(j + n - 1) % n], vals[j], vals[j + 1]);
        let is_min = cur > 0.0 && cur <= prev && cur <= next;
        let is_max = cur < 0.0 && cur >= prev && cur >= next;
        if is_min || is_max {
            let s = cur.signum();
            let x = j as f64 * h;
            let (xm, v) = golden_min(|t| s * defect(map, p, q, t).0, x - h, x + h);
            if v <= 10.0 * ZERO_TOL {
                roots.push((xm, true));
            }
        }
    }
    roots.iter_mut().for_each(|r| r.0 = r.0.rem_euclid(1.0));
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // the same root reached from two grid cells
    roots.dedup_by(|b, a| {
        let same = b.0 - a.0 < SAME_ROOT;
        if same {
            a.1 |= b.1;
        }
        same
    });
    if roots.len() > 1 && roots[0].0 + 1.0 - roots[roots.len() - 1].0 < SAME_ROOT {
        let last = roots.pop().unwrap();
        roots[0].1 |= last.1;
    }
    // merge clusters of nearly coincident roots into one parabolic point
    let mut points: Vec<PeriodicPoint> = Vec::new();
    let mut k = 0;
    while k < roots.len() {
        let mut m = k + 1;
        while m < roots.len() && roots[m].0 - roots[m - 1].0 < 1e-6 {
            m += 1;
        }
        let cluster = &roots[k..m];
        let x = cluster.iter().map(|r| r.0).sum::<f64>() / cluster.len() as f64;
        let lam = iterate(map, q, x).1;
        let merged = cluster.len() > 1 || cluster[0].1;
        let multiplier = if merged { 1.0 } else { lam };
        points.push(PeriodicPoint {
            point: x,
            period: q,
            multiplier,
            hyperbolic: !merged && (lam - 1.0).abs() > PARABOLIC_TOL,
        });
        k = m;
    }
    // wrap-around cluster
    if points.len() > 1 {
        let first = points[0].point;
        let last = points[points.len() - 1].point;
        if first + 1.0 - last < 1e-6 {
            points.pop();
            points[0].multiplier = 1.0;
            points[0].hyperbolic = false;
        }
    }
    let set = PeriodicOrbitSet {
        rational: r,
        points,
    };
    if set.is_hyperbolic() && set.points.len() % 2 == 1 {
        return Err(Error::Consistency(format!(
            "odd number ({}) of hyperbolic periodic points",
            set.points.len()
        )));
    }
    Ok(set)
}

/// `D_f = ∫ |f''/f'| dx` over one period.
pub fn distortion(f: &CircleMap) -> f64 {
    let n = 4096;
    let h = 1.0 / n as f64;
    let second: Vec<f64> = (0..=n).map(|j| f.eval_lift2(j as f64 * h).2).collect();
    if second.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let f2 = |x: f64| f.eval_lift2(x).2;
    let mut zeros = Vec::new();
    for j in 0..n {
        let (a, b) = (second[j], second[j + 1]);
        if a == 0.0 {
            zeros.push(j as f64 * h);
        } else if a * b < 0.0 {
            let (mut lo, mut hi) = (j as f64 * h, (j + 1) as f64 * h);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (f2(mid) < 0.0) == (a < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
    }
    let integrand = |x: f64| {
        let (_, d1, d2) = f.eval_lift2(x);
        (d2 / d1).abs()
    };
    if zeros.is_empty() {
        return integrate_interval(&integrand, 0.0, 1.0, 1e-13);
    }
    let mut total = 0.0;
    for k in 0..zeros.len() {
        let a = zeros[k];
        let b = if k + 1 < zeros.len() {
            zeros[k + 1]
        } else {
            zeros[0] + 1.0
        };
        total += integrate_interval(&integrand, a, b, 1e-13);
    }
    total
}
