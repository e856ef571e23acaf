//! Command-line front end: map parsing, command dispatch and CSV/JSON/SVG
//! output.

use crate::bubbles::{
    bound_check_map, boundary_tau, compute_bubble, default_route, intersection_report,
    BubbleConfig, BubbleCurve, Route,
};
use crate::circle_maps::{CircleMap, TrigPoly, DEFAULT_TRIG_BAND};
use crate::complex_rot::{tau_boundary_limit, tau_interior, InteriorConfig, LimitConfig};
use crate::error::{Error, Result};
use crate::linearization::{all_charts, hyperbolic_data, transition_maps};
use crate::moebius::DiscAutomorphism;
use crate::numerics::{polyline_self_intersections, Polyline2D};
use crate::perturbation::{
    figure_epsilon, infinitesimal_bubble, InfinitesimalBubble, DEFAULT_CUTOFF, FIGURE_SAMPLES,
};
use crate::rotation::{rational_interval, rational_rotation, rotation_number, RationalRotation};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

/// Largest harmonic accepted by the map parser.
pub const MAX_HARMONIC: usize = 64;

/// Frequencies `n` drawn by `figure1`.
pub const FIGURE_PANELS: [usize; 6] = [1, 2, 3, 4, 5, 10];

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

fn parse_error(position: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        position,
        message: message.into(),
    }
}

fn parse_real(s: &str, position: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_error(position, format!("invalid number {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(position, format!("number {s:?} is not finite")));
    }
    Ok(v)
}

/// `key=value` pairs with the byte offsets of each key and value.
fn key_values(s: &str, offset: usize) -> Result<Vec<(&str, &str, usize, usize)>> {
    let mut out = Vec::new();
    let mut pos = offset;
    for item in s.split(',') {
        let eq = item
            .find('=')
            .ok_or_else(|| parse_error(pos, format!("expected key=value, got {item:?}")))?;
        let (k, v) = (&item[..eq], &item[eq + 1..]);
        if k.is_empty() {
            return Err(parse_error(pos, "empty key"));
        }
        out.push((k, v, pos, pos + eq + 1));
        pos += item.len() + 1;
    }
    Ok(out)
}

fn harmonic_index(key: &str, position: usize) -> Result<usize> {
    let k: usize = key[1..]
        .parse()
        .map_err(|_| parse_error(position, format!("unknown key {key:?}")))?;
    if k == 0 || k > MAX_HARMONIC {
        return Err(parse_error(
            position,
            format!("harmonic {k} outside 1..={MAX_HARMONIC}"),
        ));
    }
    Ok(k)
}

fn parse_base(kind: &str, body: &str, start: usize) -> Result<CircleMap> {
    let body_at = start + kind.len() + 1;
    let kv = if body.is_empty() {
        Vec::new()
    } else {
        key_values(body, body_at)?
    };
    match kind {
        "rot" => {
            let mut c = 0.0;
            for (k, v, kp, vp) in kv {
                match k {
                    "c" => c = parse_real(v, vp)?,
                    _ => return Err(parse_error(kp, format!("unknown key {k:?} for rot"))),
                }
            }
            Ok(CircleMap::rotation(c))
        }
        "trig" => {
            let (mut c, mut a, mut b, mut band) = (0.0, Vec::new(), Vec::new(), DEFAULT_TRIG_BAND);
            for (k, v, kp, vp) in kv {
                match k {
                    "c" => c = parse_real(v, vp)?,
                    "band" => band = parse_real(v, vp)?,
                    _ if k.starts_with('a') || k.starts_with('b') => {
                        let idx = harmonic_index(k, kp)?;
                        let target = if k.starts_with('a') { &mut a } else { &mut b };
                        if target.len() < idx {
                            target.resize(idx, 0.0);
                        }
                        target[idx - 1] = parse_real(v, vp)?;
                    }
                    _ => return Err(parse_error(kp, format!("unknown key {k:?} for trig"))),
                }
            }
            CircleMap::trig_with_band(TrigPoly::new(c, a, b), band)
        }
        "moebius" => {
            let (mut a, mut theta) = (None, 0.0);
            for (k, v, kp, vp) in kv {
                match k {
                    "a" => a = Some(parse_real(v, vp)?),
                    "theta" => theta = parse_real(v, vp)?,
                    _ => return Err(parse_error(kp, format!("unknown key {k:?} for moebius"))),
                }
            }
            let a = a.ok_or_else(|| parse_error(start, "moebius needs a=<real>"))?;
            CircleMap::from_automorphism(DiscAutomorphism::new(theta, Complex64::new(a, 0.0))?)
        }
        _ => Err(parse_error(start, format!("unknown map kind {kind:?}"))),
    }
}

fn parse_perturbation(kind: &str, body: &str, start: usize) -> Result<(TrigPoly, f64)> {
    let (mut n, mut eps) = (None, None);
    for (k, v, kp, vp) in key_values(body, start + kind.len() + 1)? {
        match k {
            "n" => {
                let m: usize = v
                    .parse()
                    .map_err(|_| parse_error(vp, format!("invalid harmonic {v:?}")))?;
                if m == 0 || m > MAX_HARMONIC {
                    return Err(parse_error(
                        vp,
                        format!("harmonic {m} outside 1..={MAX_HARMONIC}"),
                    ));
                }
                n = Some(m);
            }
            "eps" => eps = Some(parse_real(v, vp)?),
            _ => return Err(parse_error(kp, format!("unknown key {k:?} for {kind}"))),
        }
    }
    let n = n.ok_or_else(|| parse_error(start, format!("{kind} needs n=<int>")))?;
    let eps = eps.ok_or_else(|| parse_error(start, format!("{kind} needs eps=<real>")))?;
    let g = match kind {
        "sin" => TrigPoly::sin(n, 1.0),
        "cos" => TrigPoly::cos(n, 1.0),
        _ => return Err(parse_error(start, format!("unknown perturbation {kind:?}"))),
    };
    Ok((g, eps))
}

fn split_kind(term: &str, start: usize) -> Result<(&str, &str)> {
    let colon = term
        .find(':')
        .ok_or_else(|| parse_error(start, format!("expected kind:parameters, got {term:?}")))?;
    Ok((&term[..colon], &term[colon + 1..]))
}

/// Parses the map mini-language:
///
/// ```text
/// rot:c=<r> | trig:c=<r>,a1=<r>,b1=<r>,...[,band=<r>] | moebius:a=<r>[,theta=<r>]
/// followed by any number of +sin:n=<int>,eps=<r> or +cos:n=<int>,eps=<r>
/// ```
pub fn parse_map_spec(s: &str) -> Result<CircleMap> {
    if s.is_empty() {
        return Err(parse_error(0, "empty map specification"));
    }
    let mut terms = Vec::new();
    let mut pos = 0;
    for t in s.split('+') {
        terms.push((t, pos));
        pos += t.len() + 1;
    }
    let (first, _) = terms[0];
    let (kind, body) = split_kind(first, 0)?;
    let mut map = parse_base(kind, body, 0)?;
    for &(t, start) in &terms[1..] {
        let (kind, body) = split_kind(t, start)?;
        let (g, eps) = parse_perturbation(kind, body, start)?;
        map = CircleMap::perturbed(map, g, eps)?;
    }
    Ok(map)
}

/// Parses `p/q` (or a bare integer) in lowest terms with `0 ≤ p/q < 1`.
pub fn parse_rational(s: &str) -> Result<RationalRotation> {
    s.parse()
}

/// Parses `a`, `bi`, `a+bi` or `a-bi` (`j` is accepted for `i`; a missing
/// imaginary magnitude means 1).
pub fn parse_complex(s: &str) -> Result<Complex64> {
    if s.is_empty() {
        return Err(parse_error(0, "empty complex number"));
    }
    let Some(body) = s.strip_suffix(['i', 'j']) else {
        return Ok(Complex64::new(parse_real(s, 0)?, 0.0));
    };
    // the split is the last sign that is neither leading nor part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im_part, im_at) = match split {
        Some(k) => (parse_real(&body[..k], 0)?, &body[k..], k),
        None => (0.0, body, 0),
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => parse_real(t, im_at)?,
    };
    Ok(Complex64::new(re, im))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Rot,
    Interval,
    Tau,
    Bubble,
    Infbubble,
    Classify,
    Figure1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// A validated invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub map: CircleMap,
    pub rational: RationalRotation,
    pub omega: Option<Complex64>,
    pub eps: Option<f64>,
    /// Perturbation frequency for `infbubble`.
    pub n: usize,
    pub samples: Option<usize>,
    pub k: usize,
    pub tol: f64,
    pub cutoff: f64,
    pub rescale: bool,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command, map: CircleMap) -> Self {
        RunConfig {
            command,
            map,
            rational: RationalRotation::zero(),
            omega: None,
            eps: None,
            n: 1,
            samples: None,
            k: InteriorConfig::default().k,
            tol: 1e-10,
            cutoff: DEFAULT_CUTOFF,
            rescale: true,
            format: Format::Json,
            out: None,
            threads: None,
        }
    }

    fn real_omega(&self) -> Result<f64> {
        match self.omega {
            None => Ok(0.0),
            Some(w) if w.im == 0.0 => Ok(w.re),
            Some(w) => Err(Error::Contract(format!(
                "{:?} needs a real ω, got {w}",
                self.command
            ))),
        }
    }
}

/// Exit code for an error: 2 for unsuitable input, 3 for solver failures.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_precondition() {
        EXIT_PRECONDITION
    } else {
        EXIT_SOLVER
    }
}

/// The structured diagnostic printed for a failed run.
pub fn error_json(e: &Error) -> String {
    json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    })
    .to_string()
}

/// A real number with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str = "omega_re,omega_im,tau_re,tau_im,residual,flag";

fn csv_row(out: &mut String, omega: Complex64, tau: Option<Complex64>, residual: f64, flag: &str) {
    let (tr, ti) = tau.map_or((String::new(), String::new()), |t| {
        (fmt17(t.re), fmt17(t.im))
    });
    let _ = writeln!(
        out,
        "{},{},{tr},{ti},{},{flag}",
        fmt17(omega.re),
        fmt17(omega.im),
        fmt17(residual)
    );
}

fn svg_num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

/// Renders curves in the `τ`-plane as a self-contained SVG, with optional
/// circle markers. With `horizontal_rescale` the real axis is stretched to
/// the full width independently of the imaginary axis.
pub fn render_svg(
    curves: &[Polyline2D],
    markers: &[[f64; 2]],
    horizontal_rescale: bool,
) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Contract("nothing to render".into()));
    }
    let (w, h, m) = (640.0, 480.0, 56.0);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in curves.iter().flat_map(|c| &c.vertices) {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    lo[1] = lo[1].min(0.0);
    let mut span = [hi[0] - lo[0], hi[1] - lo[1]];
    for k in 0..2 {
        if span[k] <= 1e-12 {
            let mid = 0.5 * (lo[k] + hi[k]);
            let half = 0.5 * span[1 - k].max(1e-3);
            lo[k] = mid - half;
            span[k] = 2.0 * half;
        }
    }
    let (sx, sy) = if horizontal_rescale {
        ((w - 2.0 * m) / span[0], (h - 2.0 * m) / span[1])
    } else {
        let s = ((w - 2.0 * m) / span[0]).min((h - 2.0 * m) / span[1]);
        (s, s)
    };
    let px = |x: f64| svg_num(m + (x - lo[0]) * sx);
    let py = |y: f64| svg_num(h - m - (y - lo[1]) * sy);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (x0, x1) = (px(lo[0]), px(lo[0] + span[0]));
    let (y0, y1) = (py(lo[1]), py(lo[1] + span[1]));
    let axis = py(0.0);
    let _ = writeln!(s, r#"<g stroke="gray" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{axis}" x2="{x1}" y2="{axis}"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<g font-family="sans-serif" font-size="12" fill="black">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">Re τ</text>"#,
        svg_num(w - 8.0),
        svg_num(h - 12.0)
    );
    let _ = writeln!(s, r#"<text x="8" y="20">Im τ</text>"#);
    let _ = writeln!(
        s,
        r#"<text x="{x0}" y="{}" text-anchor="middle">{:.6}</text>"#,
        svg_num(h - 36.0),
        lo[0]
    );
    let _ = writeln!(
        s,
        r#"<text x="{x1}" y="{}" text-anchor="middle">{:.6}</text>"#,
        svg_num(h - 36.0),
        lo[0] + span[0]
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{y1}" text-anchor="end">{:.6}</text>"#,
        svg_num(m - 4.0),
        lo[1] + span[1]
    );
    let _ = writeln!(s, "</g>");
    for c in curves {
        let mut d = String::new();
        for (j, v) in c.vertices.iter().enumerate() {
            let _ = write!(
                d,
                "{}{} {}",
                if j == 0 { "M" } else { " L" },
                px(v[0]),
                py(v[1])
            );
        }
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="black" stroke-width="1.2"/>"#
        );
    }
    let mut sorted = markers.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    for p in sorted {
        let _ = writeln!(
            s,
            r#"<circle class="intersection" cx="{}" cy="{}" r="4" fill="none" stroke="red" stroke-width="1.5"/>"#,
            px(p[0]),
            py(p[1])
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Contract(format!("serialization failed: {e}")))
}

fn emit(cfg: &RunConfig, body: &str, stdout: &mut dyn Write) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Error::Contract(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(body.as_bytes())
            .map_err(|e| Error::Contract(format!("cannot write output: {e}"))),
    }
}

fn unsupported(cfg: &RunConfig) -> Error {
    Error::Contract(format!(
        "{:?} output is not available for {:?}",
        cfg.format, cfg.command
    ))
}

fn map_spec(f: &CircleMap) -> String {
    f.to_string()
}

/// Self-crossing points of an infinitesimal bubble.
pub fn infbubble_crossings(b: &InfinitesimalBubble) -> Result<Vec<[f64; 2]>> {
    let line = Polyline2D::from_complex(&b.curve())?;
    Ok(polyline_self_intersections(&line)
        .crossings
        .iter()
        .map(|x| x.point)
        .collect())
}

fn infbubble_for(cfg: &RunConfig, n: usize) -> Result<InfinitesimalBubble> {
    let eps = cfg.eps.unwrap_or_else(|| figure_epsilon(n));
    infinitesimal_bubble(
        &cfg.map,
        &TrigPoly::sin(n, 1.0),
        eps,
        cfg.samples.unwrap_or(FIGURE_SAMPLES),
        cfg.cutoff,
    )
}

fn bubble_svg(b: &BubbleCurve, rescale: bool) -> Result<String> {
    let lines: Vec<Polyline2D> = b
        .runs()
        .iter()
        .filter(|r| r.len() >= 2)
        .map(|r| Polyline2D::from_complex(&r.iter().map(|p| p.1).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let report = intersection_report(std::slice::from_ref(b));
    let marks: Vec<[f64; 2]> = report
        .self_contacts
        .iter()
        .filter(|c| c.kind == crate::numerics::ContactKind::Crossing)
        .map(|c| c.point)
        .collect();
    render_svg(&lines, &marks, rescale)
}

/// Executes a command, writing the result to `cfg.out` or `stdout`.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    match cfg.threads {
        Some(t) if t > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
            let mut buf: Vec<u8> = Vec::new();
            pool.install(|| dispatch(cfg, &mut buf))?;
            stdout
                .write_all(&buf)
                .map_err(|e| Error::Contract(format!("cannot write output: {e}")))
        }
        _ => dispatch(cfg, stdout),
    }
}

fn dispatch(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    let f = &cfg.map;
    match cfg.command {
        Command::Rot => {
            let g = f.shift_real(cfg.real_omega()?);
            let rho = rotation_number(&g, cfg.tol)?;
            let rational = rational_rotation(&g)?.map(|(r, _)| r.to_string());
            match cfg.format {
                Format::Json => emit(
                    cfg,
                    &to_json(&json!({
                        "map": map_spec(f),
                        "omega": cfg.real_omega()?,
                        "rotation_number": rho,
                        "rational": rational,
                    }))?,
                    stdout,
                ),
                _ => Err(unsupported(cfg)),
            }
        }
        Command::Interval => {
            let iv = rational_interval(f, cfg.rational, cfg.tol)?;
            match cfg.format {
                Format::Json => emit(
                    cfg,
                    &to_json(&json!({
                        "map": map_spec(f),
                        "rational": cfg.rational.to_string(),
                        "left": iv.left,
                        "right": iv.right,
                        "left_lift": iv.left_lift,
                        "right_lift": iv.right_lift,
                        "length": iv.length(),
                        "degenerate": iv.degenerate,
                    }))?,
                    stdout,
                ),
                _ => Err(unsupported(cfg)),
            }
        }
        Command::Tau => {
            let omega = cfg
                .omega
                .ok_or_else(|| Error::Contract("tau needs --omega".into()))?;
            let icfg = InteriorConfig {
                k: cfg.k,
                tol: cfg.tol,
                ..InteriorConfig::default()
            };
            let (tau, residual, kind, extra) = if omega.im > 0.0 {
                let s = tau_interior(f, omega, &icfg)?;
                (s.tau, s.residual, "interior", json!({ "k": s.k }))
            } else if omega.im == 0.0 {
                let r = rational_rotation(&f.shift_real(omega.re))?;
                match r.map(|(r, _)| default_route(f, r)) {
                    Some(Route::Glued) => {
                        let (tau, residual) =
                            boundary_tau(f, omega.re, Route::Glued, &BubbleConfig::default())?;
                        (tau, residual, "boundary", json!({ "route": "glued" }))
                    }
                    _ => {
                        let v = tau_boundary_limit(f, omega.re, &LimitConfig::default())?;
                        (
                            v.tau,
                            v.residual,
                            "boundary",
                            json!({ "route": "limit", "error_estimate": v.error_estimate, "schedule": v.schedule }),
                        )
                    }
                }
            } else {
                return Err(Error::Contract(format!("Im ω must be ≥ 0, got {omega}")));
            };
            match cfg.format {
                Format::Json => emit(
                    cfg,
                    &to_json(&json!({
                        "map": map_spec(f),
                        "omega": [omega.re, omega.im],
                        "tau": [tau.re, tau.im],
                        "residual": residual,
                        "kind": kind,
                        "details": extra,
                    }))?,
                    stdout,
                ),
                Format::Csv => {
                    let mut s = format!("{CSV_HEADER}\n");
                    csv_row(&mut s, omega, Some(tau), residual, kind);
                    emit(cfg, &s, stdout)
                }
                Format::Svg => Err(unsupported(cfg)),
            }
        }
        Command::Bubble => {
            let bcfg = BubbleConfig {
                n_samples: cfg.samples.unwrap_or(101),
                ..BubbleConfig::default()
            };
            let b = compute_bubble(f, cfg.rational, &bcfg)?;
            match cfg.format {
                Format::Json => {
                    let bound = bound_check_map(&b, f);
                    let report = intersection_report(std::slice::from_ref(&b));
                    emit(
                        cfg,
                        &to_json(&json!({
                            "map": map_spec(f),
                            "bubble": b,
                            "bound": bound,
                            "intersections": report,
                        }))?,
                        stdout,
                    )
                }
                Format::Csv => {
                    let mut s = format!("{CSV_HEADER}\n");
                    for p in &b.samples {
                        let flag = match (p.parabolic, p.tau) {
                            (true, _) => "parabolic",
                            (_, None) => "gap",
                            _ => "ok",
                        };
                        csv_row(
                            &mut s,
                            Complex64::new(p.omega, 0.0),
                            p.tau,
                            p.residual,
                            flag,
                        );
                    }
                    emit(cfg, &s, stdout)
                }
                Format::Svg => emit(cfg, &bubble_svg(&b, cfg.rescale)?, stdout),
            }
        }
        Command::Infbubble => {
            let b = infbubble_for(cfg, cfg.n)?;
            let crossings = infbubble_crossings(&b)?;
            match cfg.format {
                Format::Json => emit(
                    cfg,
                    &to_json(&json!({
                        "map": map_spec(f),
                        "n": cfg.n,
                        "bubble": b,
                        "self_crossings": crossings,
                    }))?,
                    stdout,
                ),
                Format::Csv => {
                    let mut s = format!("{CSV_HEADER}\n");
                    for p in &b.samples {
                        csv_row(
                            &mut s,
                            Complex64::new(p.omega, 0.0),
                            Some(p.tau_lin),
                            0.0,
                            "linear",
                        );
                    }
                    emit(cfg, &s, stdout)
                }
                Format::Svg => {
                    let line = Polyline2D::from_complex(&b.curve())?;
                    emit(cfg, &render_svg(&[line], &crossings, cfg.rescale)?, stdout)
                }
            }
        }
        Command::Classify => {
            let g = f.shift_real(cfg.real_omega()?);
            let data = hyperbolic_data(&g)?;
            let charts = all_charts(&g, &data)?;
            let koenigs: Vec<f64> = charts.iter().map(|c| c.residual()).collect::<Result<_>>()?;
            let transitions: Vec<f64> = transition_maps(&g)?
                .iter()
                .map(|t| t.equivariance_residual())
                .collect::<Result<_>>()?;
            match cfg.format {
                Format::Json => emit(
                    cfg,
                    &to_json(&json!({
                        "map": map_spec(f),
                        "omega": cfg.real_omega()?,
                        "rotation": format!("{}/{}", data.p, data.q),
                        "periodic_points": data.orbits.points,
                        "koenigs_residuals": koenigs,
                        "transition_residuals": transitions,
                    }))?,
                    stdout,
                ),
                _ => Err(unsupported(cfg)),
            }
        }
        Command::Figure1 => {
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("fig1"));
            std::fs::create_dir_all(&dir)
                .map_err(|e| Error::Contract(format!("cannot create {}: {e}", dir.display())))?;
            let mut summary = Vec::new();
            for n in FIGURE_PANELS {
                let b = infbubble_for(cfg, n)?;
                let crossings = infbubble_crossings(&b)?;
                let line = Polyline2D::from_complex(&b.curve())?;
                let svg = render_svg(&[line], &crossings, cfg.rescale)?;
                let path = dir.join(format!("fig1_n{n}.svg"));
                std::fs::write(&path, svg).map_err(|e| {
                    Error::Contract(format!("cannot write {}: {e}", path.display()))
                })?;
                summary.push(json!({
                    "n": n,
                    "eps": b.eps,
                    "samples": b.samples.len(),
                    "dropped": b.dropped,
                    "self_crossings": crossings.len(),
                    "file": path.file_name().map(|p| p.to_string_lossy().into_owned()),
                }));
            }
            let body = to_json(&json!({ "map": map_spec(f), "panels": summary }))?;
            std::fs::write(dir.join("figure1.json"), &body)
                .map_err(|e| Error::Contract(format!("cannot write summary: {e}")))?;
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| Error::Contract(format!("cannot write output: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn map_spec_examples() {
        let m = parse_map_spec("moebius:a=0.5").unwrap();
        assert!((m.analyticity_band() - 2f64.ln() / std::f64::consts::TAU).abs() < 1e-12);
        assert!((m.analyticity_band() - 0.11032).abs() < 1e-5);
        let r = parse_map_spec("rot:c=0.25").unwrap();
        assert_eq!(r.eval_lift(0.1), 0.35);
        let t = parse_map_spec("trig:c=0.1,a1=0.01,b2=0.02").unwrap();
        assert!((t.eval_lift(0.0) - 0.11).abs() < 1e-15);
        let p = parse_map_spec("moebius:a=0.5+sin:n=3,eps=0.001").unwrap();
        assert!(matches!(
            p.kind(),
            crate::circle_maps::MapKind::Perturbed { .. }
        ));
    }

    #[test]
    fn non_diffeomorphic_perturbation_reports_derivative() {
        let e = parse_map_spec("moebius:a=0.5+sin:n=3,eps=0.05").unwrap_err();
        match e {
            Error::NotDiffeomorphism { min_derivative, .. } => assert!(min_derivative < 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn map_spec_errors_carry_positions() {
        let cases = [
            ("", 0),
            ("moebius", 0),
            ("moebius:b=0.5", 8),
            ("moebius:a=x", 10),
            ("rot:c=0.1+sin:n=2", 10),
            ("rot:c=0.1+sin:n=0,eps=1", 16),
            ("trig:a99=0.1", 5),
            ("spiral:c=1", 0),
            ("rot:c=inf", 6),
        ];
        for (s, pos) in cases {
            match parse_map_spec(s) {
                Err(Error::Parse { position, .. }) => assert_eq!(position, pos, "{s}"),
                other => panic!("{s}: {other:?}"),
            }
        }
    }

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("0.1+0.2i").unwrap(), c(0.1, 0.2));
        assert_eq!(parse_complex("0.1-0.2i").unwrap(), c(0.1, -0.2));
        assert_eq!(parse_complex("-0.3").unwrap(), c(-0.3, 0.0));
        assert_eq!(parse_complex("0.25i").unwrap(), c(0.0, 0.25));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2e-2j").unwrap(), c(1e-3, 2e-2));
        assert_eq!(parse_complex("1e+3-i").unwrap(), c(1e3, -1.0));
        assert!(matches!(
            parse_complex("0.1+xi"),
            Err(Error::Parse { position: 3, .. })
        ));
        assert!(parse_complex("").is_err());
        assert!(parse_complex("nan").is_err());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(
            parse_rational("2/5").unwrap(),
            RationalRotation::new(2, 5).unwrap()
        );
        assert!(matches!(parse_rational("2/4"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_rational("1/x"),
            Err(Error::Parse { position: 2, .. })
        ));
    }

    #[test]
    fn printed_specs_reparse() {
        for s in [
            "rot:c=0.25",
            "moebius:a=0.5",
            "moebius:a=0.3,theta=0.1",
            "trig:c=0,a1=0.01,b1=0.02",
            "moebius:a=0.5+sin:n=3,eps=0.001",
        ] {
            let m = parse_map_spec(s).unwrap();
            let back = parse_map_spec(&m.to_string()).unwrap();
            for j in 0..64 {
                let x = j as f64 / 64.0;
                assert!((m.eval_lift(x) - back.eval_lift(x)).abs() < 1e-14, "{s}");
            }
        }
    }

    fn run_to_string(cfg: &RunConfig) -> Result<String> {
        let mut buf = Vec::new();
        run(cfg, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn interval_command() {
        let mut cfg = RunConfig::new(Command::Interval, parse_map_spec("moebius:a=0.5").unwrap());
        cfg.tol = 1e-12;
        let v: serde_json::Value = serde_json::from_str(&run_to_string(&cfg).unwrap()).unwrap();
        assert!((v["left"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-10);
        assert!((v["right"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn tau_command_for_rotation() {
        let mut cfg = RunConfig::new(Command::Tau, parse_map_spec("rot:c=0").unwrap());
        cfg.omega = Some(parse_complex("0.1+0.2i").unwrap());
        let v: serde_json::Value = serde_json::from_str(&run_to_string(&cfg).unwrap()).unwrap();
        assert!((v["tau"][0].as_f64().unwrap() - 0.1).abs() < 1e-12);
        assert!((v["tau"][1].as_f64().unwrap() - 0.2).abs() < 1e-12);
        cfg.format = Format::Csv;
        let csv = run_to_string(&cfg).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 6);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code(&Error::Parse {
                position: 0,
                message: String::new()
            }),
            EXIT_PRECONDITION
        );
        assert_eq!(
            exit_code(&Error::Accuracy {
                residual: 1.0,
                tol: 0.1
            }),
            EXIT_SOLVER
        );
        let mut cfg = RunConfig::new(Command::Tau, parse_map_spec("rot:c=0").unwrap());
        cfg.omega = Some(c(0.1, -0.2));
        let e = run_to_string(&cfg).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_PRECONDITION);
        let j: serde_json::Value = serde_json::from_str(&error_json(&e)).unwrap();
        assert_eq!(j["exit_code"], 2);
        assert_eq!(j["error"], "contract");
    }

    #[test]
    fn svg_is_deterministic_and_marks_crossings() {
        let seg = Polyline2D::new(vec![[0.0, 0.0], [0.0, 0.17], [0.0, 0.0]]).unwrap();
        let a = render_svg(std::slice::from_ref(&seg), &[], true).unwrap();
        let b = render_svg(std::slice::from_ref(&seg), &[], true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<path").count(), 1);
        assert!(render_svg(&[], &[], false).is_err());
        let mut cfg = RunConfig::new(Command::Infbubble, parse_map_spec("moebius:a=0.5").unwrap());
        cfg.n = 3;
        cfg.samples = Some(301);
        cfg.format = Format::Svg;
        let svg = run_to_string(&cfg).unwrap();
        assert!(svg.matches(r#"class="intersection""#).count() >= 1);
        assert_eq!(svg, run_to_string(&cfg).unwrap());
    }

    #[test]
    fn deterministic_across_thread_settings() {
        let mut cfg = RunConfig::new(Command::Bubble, parse_map_spec("moebius:a=0.5").unwrap());
        cfg.samples = Some(9);
        cfg.format = Format::Csv;
        cfg.threads = Some(1);
        let one = run_to_string(&cfg).unwrap();
        cfg.threads = Some(3);
        assert_eq!(one, run_to_string(&cfg).unwrap());
        assert!(one.lines().nth(1).unwrap().ends_with(",parabolic"));
    }

    proptest! {
        #[test]
        fn complex_roundtrip(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let s = format!("{re}{}{}i", if im < 0.0 { "-" } else { "+" }, im.abs());
            prop_assert_eq!(parse_complex(&s).unwrap(), c(re, im));
        }

        #[test]
        fn parsers_never_panic(s in "\\PC{0,40}") {
            let _ = parse_map_spec(&s);
            let _ = parse_complex(&s);
            let _ = parse_rational(&s);
        }
    }
}
