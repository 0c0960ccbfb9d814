//! Symmetric one-shot contamination game: payoffs, best responses and
//! equilibrium classification.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 10_000;
pub const REFINE_TOL: f64 = 1e-9;
const VALIDATION_GRID: usize = 1000;
const ENDPOINT_TOL: f64 = 1e-12;

/// Detection probability `p` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectionFn {
    /// `c^k`.
    Power { k: f64 },
    /// Logistic curve rescaled so that `p(0) = 0` and `p(1) = 1`.
    Logistic { steepness: f64, midpoint: f64 },
    /// Linear interpolation through `(c, p)` knots.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// Monotone cubic (Fritsch-Carlson) interpolation through knots.
    Monotone {
        knots: Vec<(f64, f64)>,
        slopes: Vec<f64>,
    },
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn parse_knots(s: &str) -> Result<Vec<(f64, f64)>> {
    let knots = s
        .split(';')
        .map(|pair| {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| Error::config(format!("knot `{pair}` must be `c,p`")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad number `{v}` in knot `{pair}`")))
            };
            Ok((parse(x)?, parse(y)?))
        })
        .collect::<Result<Vec<_>>>()?;
    if knots.len() < 2 {
        return Err(Error::config("a table needs at least two knots"));
    }
    if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::config("knot abscissae must be strictly increasing"));
    }
    Ok(knots)
}

fn pchip_slopes(knots: &[(f64, f64)]) -> Vec<f64> {
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let d: Vec<f64> = knots
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        return vec![d[0]; 2];
    }
    for i in 1..n - 1 {
        if d[i - 1] * d[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

impl DetectionFn {
    pub fn power(k: f64) -> Self {
        DetectionFn::Power { k }
    }

    pub fn monotone(knots: Vec<(f64, f64)>) -> Self {
        let slopes = pchip_slopes(&knots);
        DetectionFn::Monotone { knots, slopes }
    }

    pub fn eval(&self, c: f64) -> f64 {
        match self {
            DetectionFn::Power { k } => c.powf(*k),
            DetectionFn::Logistic {
                steepness,
                midpoint,
            } => {
                let lo = sigmoid(-steepness * midpoint);
                let hi = sigmoid(steepness * (1.0 - midpoint));
                (sigmoid(steepness * (c - midpoint)) - lo) / (hi - lo)
            }
            DetectionFn::PiecewiseLinear { knots } => {
                let i = segment(knots, c);
                let ((x0, y0), (x1, y1)) = (knots[i], knots[i + 1]);
                y0 + (y1 - y0) * (c - x0) / (x1 - x0)
            }
            DetectionFn::Monotone { knots, slopes } => {
                let i = segment(knots, c);
                let ((x0, y0), (x1, y1)) = (knots[i], knots[i + 1]);
                let h = x1 - x0;
                let t = (c - x0) / h;
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * slopes[i]
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * slopes[i + 1]
            }
        }
    }

    /// Derivative where available in closed form, else a central difference.
    pub fn derivative(&self, c: f64) -> f64 {
        match self {
            DetectionFn::Power { k } => k * c.powf(k - 1.0),
            DetectionFn::Logistic {
                steepness,
                midpoint,
            } => {
                let lo = sigmoid(-steepness * midpoint);
                let hi = sigmoid(steepness * (1.0 - midpoint));
                let s = sigmoid(steepness * (c - midpoint));
                steepness * s * (1.0 - s) / (hi - lo)
            }
            _ => {
                let h = 1e-6;
                let (a, b) = ((c - h).max(0.0), (c + h).min(1.0));
                (self.eval(b) - self.eval(a)) / (b - a)
            }
        }
    }

    /// First numeric parameter (`k` or steepness), the sweepable one.
    pub fn with_parameter(&self, v: f64) -> Result<Self> {
        match self {
            DetectionFn::Power { .. } => Ok(DetectionFn::Power { k: v }),
            DetectionFn::Logistic { midpoint, .. } => Ok(DetectionFn::Logistic {
                steepness: v,
                midpoint: *midpoint,
            }),
            _ => Err(Error::config(
                "tabulated detection functions have no sweepable parameter",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DetectionFn::Power { k } if !(k.is_finite() && *k > 0.0) => {
                return Err(Error::config("power exponent must be > 0"));
            }
            DetectionFn::Logistic {
                steepness,
                midpoint,
            } if !(steepness.is_finite() && *steepness > 0.0 && midpoint.is_finite()) => {
                return Err(Error::config(
                    "logistic steepness must be > 0 and midpoint finite",
                ));
            }
            DetectionFn::PiecewiseLinear { knots } | DetectionFn::Monotone { knots, .. } => {
                if knots.first().map(|k| k.0) != Some(0.0) || knots.last().map(|k| k.0) != Some(1.0)
                {
                    return Err(Error::config("table knots must span c = 0 to c = 1"));
                }
            }
            _ => {}
        }
        let (p0, p1) = (self.eval(0.0), self.eval(1.0));
        if p0.abs() > ENDPOINT_TOL || (p1 - 1.0).abs() > ENDPOINT_TOL {
            return Err(Error::config(format!(
                "p must satisfy p(0) = 0 and p(1) = 1, got {p0} and {p1}"
            )));
        }
        let mut prev = p0;
        for i in 1..=VALIDATION_GRID {
            let c = i as f64 / VALIDATION_GRID as f64;
            let v = self.eval(c);
            if !v.is_finite() || v < prev - ENDPOINT_TOL {
                return Err(Error::config(format!(
                    "p is not non-decreasing near c = {c}"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

fn segment(knots: &[(f64, f64)], c: f64) -> usize {
    let i = knots.partition_point(|k| k.0 <= c);
    i.saturating_sub(1).min(knots.len() - 2)
}

fn fmt_knots(knots: &[(f64, f64)]) -> String {
    knots
        .iter()
        .map(|(x, y)| format!("{x},{y}"))
        .collect::<Vec<_>>()
        .join(";")
}

impl fmt::Display for DetectionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectionFn::Power { k } => write!(f, "pow:{k}"),
            DetectionFn::Logistic {
                steepness,
                midpoint,
            } => write!(f, "logistic:{steepness}:{midpoint}"),
            DetectionFn::PiecewiseLinear { knots } => write!(f, "pwl:{}", fmt_knots(knots)),
            DetectionFn::Monotone { knots, .. } => write!(f, "pchip:{}", fmt_knots(knots)),
        }
    }
}

impl FromStr for DetectionFn {
    type Err = Error;

    /// `pow:K`, `logistic:STEEPNESS:MIDPOINT`, `pwl:c,p;c,p;...` or
    /// `pchip:c,p;...`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad number `{v}` in detection spec `{s}`")))
        };
        let p = match family {
            "pow" | "power" => DetectionFn::Power { k: num(rest)? },
            "logistic" => {
                let (a, b) = rest.split_once(':').ok_or_else(|| {
                    Error::config("logistic spec is `logistic:STEEPNESS:MIDPOINT`")
                })?;
                DetectionFn::Logistic {
                    steepness: num(a)?,
                    midpoint: num(b)?,
                }
            }
            "pwl" => DetectionFn::PiecewiseLinear {
                knots: parse_knots(rest)?,
            },
            "pchip" => DetectionFn::monotone(parse_knots(rest)?),
            other => return Err(Error::config(format!("unknown detection family `{other}`"))),
        };
        p.validate()?;
        Ok(p)
    }
}

impl Serialize for DetectionFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DetectionFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParams {
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: DetectionFn,
}

impl GameParams {
    pub fn kappa(&self) -> f64 {
        self.m - self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::config(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        self.p.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let params: GameParams =
            toml::from_str(text).map_err(|e| Error::config(format!("game params: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Net gain of contaminating at `c` before the entry cost.
    pub fn gain(&self, c: f64) -> f64 {
        self.kappa() * c - self.beta * self.p.eval(c)
    }
}

/// `m(c − c̄) − αc − βp(c) − γ·1{c > 0}`.
pub fn payoff(params: &GameParams, c: f64, c_bar: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) || !(0.0..=1.0).contains(&c_bar) {
        return Err(Error::config(format!(
            "c = {c} and c_bar = {c_bar} must lie in [0, 1]"
        )));
    }
    let entry = if c > 0.0 { params.gamma } else { 0.0 };
    Ok(params.m * (c - c_bar) - params.alpha * c - params.beta * params.p.eval(c) - entry)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Abstain,
    Interior,
    Boundary,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Abstain => "abstain",
            Regime::Interior => "interior",
            Regime::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub c_star: f64,
    pub regime: Regime,
    /// Payoff advantage of `c_star` over not contaminating.
    pub net_gain: f64,
    pub kappa: f64,
    /// Best contamination level before the entry check, if searched.
    pub candidate: Option<f64>,
    /// `βp'(c) − κ` at an interior candidate.
    pub foc_residual: Option<f64>,
}

/// Global maximizer of `f` on `(0, 1]`: grid argmax (first on ties),
/// golden-section refinement around it, and the better of the two.
pub fn maximize<F: Fn(f64) -> f64>(f: F) -> (f64, f64) {
    let h = 1.0 / GRID_POINTS as f64;
    let mut best = (h, f(h));
    for i in 2..=GRID_POINTS {
        let c = i as f64 * h;
        let v = f(c);
        if v > best.1 {
            best = (c, v);
        }
    }
    let (mut a, mut b) = ((best.0 - h).max(0.0), (best.0 + h).min(1.0));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > REFINE_TOL {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    if mid > 0.0 {
        let v = f(mid);
        if v > best.1 || (v == best.1 && mid < best.0) {
            best = (mid, v);
        }
    }
    best
}

fn entry_passes(gain: f64, gamma: f64) -> bool {
    gain >= gamma - 1e-12 * gamma.abs()
}

/// Golden-section search stalls near 1e-8 because the gain is flat at its
/// peak. When `p'` is exact, bisect the first-order condition around the
/// search result instead and keep the root if it is no worse.
fn polish_foc(params: &GameParams, c: f64, g: f64) -> (f64, f64) {
    if !matches!(
        params.p,
        DetectionFn::Power { .. } | DetectionFn::Logistic { .. }
    ) {
        return (c, g);
    }
    let foc = |x: f64| params.kappa() - params.beta * params.p.derivative(x);
    let h = 2.0 / GRID_POINTS as f64;
    let (mut a, mut b) = ((c - h).max(f64::MIN_POSITIVE), (c + h).min(1.0));
    if !(foc(a) > 0.0 && foc(b) < 0.0) {
        return (c, g);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if foc(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let root = 0.5 * (a + b);
    let v = params.gain(root);
    if v >= g - 4.0 * f64::EPSILON * g.abs().max(1.0) {
        (root, v)
    } else {
        (c, g)
    }
}

pub fn solve_equilibrium(params: &GameParams) -> Result<Equilibrium> {
    params.validate()?;
    let kappa = params.kappa();
    if kappa <= 0.0 {
        return Ok(Equilibrium {
            c_star: 0.0,
            regime: Regime::Abstain,
            net_gain: 0.0,
            kappa,
            candidate: None,
            foc_residual: None,
        });
    }
    let (c, g) = maximize(|c| params.gain(c));
    let (c, g) = polish_foc(params, c, g);
    let boundary = c >= 1.0 - REFINE_TOL;
    let foc_residual = (!boundary).then(|| params.beta * params.p.derivative(c) - kappa);
    let eq = if entry_passes(g, params.gamma) {
        Equilibrium {
            c_star: if boundary { 1.0 } else { c },
            regime: if boundary {
                Regime::Boundary
            } else {
                Regime::Interior
            },
            net_gain: g - params.gamma,
            kappa,
            candidate: Some(c),
            foc_residual,
        }
    } else {
        Equilibrium {
            c_star: 0.0,
            regime: Regime::Abstain,
            net_gain: 0.0,
            kappa,
            candidate: Some(c),
            foc_residual,
        }
    };
    Ok(eq)
}

/// Best response to opponents' mean level `c_bar`, maximizing the full
/// payoff rather than the reduced gain.
pub fn best_response(params: &GameParams, c_bar: f64) -> Result<f64> {
    params.validate()?;
    let zero = payoff(params, 0.0, c_bar)?;
    let (c, v) = maximize(|c| payoff(params, c, c_bar).unwrap_or(f64::NEG_INFINITY));
    let gain = v - zero + params.gamma;
    Ok(if gain > 0.0 && entry_passes(gain, params.gamma) {
        if c >= 1.0 - REFINE_TOL {
            1.0
        } else {
            c
        }
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    M,
    Alpha,
    Beta,
    Gamma,
    /// Exponent or steepness of `p`.
    P,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "m" => SweepAxis::M,
            "alpha" => SweepAxis::Alpha,
            "beta" => SweepAxis::Beta,
            "gamma" => SweepAxis::Gamma,
            "p" | "k" | "steepness" => SweepAxis::P,
            other => return Err(Error::config(format!("unknown sweep axis `{other}`"))),
        })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::M => "m",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
            SweepAxis::Gamma => "gamma",
            SweepAxis::P => "p",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub equilibrium: Equilibrium,
}

pub fn with_axis(base: &GameParams, axis: SweepAxis, v: f64) -> Result<GameParams> {
    let mut p = base.clone();
    match axis {
        SweepAxis::M => p.m = v,
        SweepAxis::Alpha => p.alpha = v,
        SweepAxis::Beta => p.beta = v,
        SweepAxis::Gamma => p.gamma = v,
        SweepAxis::P => p.p = base.p.with_parameter(v)?,
    }
    Ok(p)
}

pub fn sweep(base: &GameParams, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    values
        .par_iter()
        .map(|&v| {
            Ok(SweepPoint {
                value: v,
                equilibrium: solve_equilibrium(&with_axis(base, axis, v)?)?,
            })
        })
        .collect()
}

/// Tab-separated table, one row per swept value.
pub fn render_sweep(axis: SweepAxis, points: &[SweepPoint]) -> String {
    let mut out = format!("{axis}\tc_star\tregime\tnet_gain\tkappa\n");
    for p in points {
        let e = &p.equilibrium;
        out.push_str(&format!(
            "{}\t{:.10}\t{}\t{:.10}\t{:.10}\n",
            trim_value(p.value),
            e.c_star,
            e.regime,
            e.net_gain,
            e.kappa
        ));
    }
    out
}

/// Prints `v` without the last-digit noise of grid arithmetic.
fn trim_value(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        n => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
