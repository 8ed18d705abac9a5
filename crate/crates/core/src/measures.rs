//! One-dimensional probability measures: weighted atoms for integration, a
//! CDF representation for transport, and exact W1 distances.
//!
//! W1 between two measures is the area between their CDFs. Discrete
//! measures carry a piecewise-linear CDF (atoms give jumps, pushforwards of
//! grid measures spread each cell's mass over the cell image, which removes
//! the staircase floor h/4 that pure atoms would impose on W1). Against an
//! analytic target the segment integrals use the closed-form antiderivative
//! of the target CDF, so the only error left is the crossing search.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special;

/// Target families with analytic CDF machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetFamily {
    /// density ~ (1-x^2)^{N/2-1} on [-1, 1], N > 1
    Beta(f64),
    /// standard normal
    Gauss,
    /// density ~ (1+x^2)^{N/2-1} on R, N < -1
    Cauchy(f64),
}

/// Cumulative table in the angle variable: prefix integrals over uniform
/// cells plus an 8-point partial panel for point evaluation.
#[derive(Debug, Clone)]
struct CumTable {
    bounds: Vec<f64>,
    prefix: Vec<f64>,
}

impl CumTable {
    fn build<F: Fn(f64) -> f64 + Copy>(a: f64, b: f64, cells: usize, f: F) -> CumTable {
        let bounds: Vec<f64> = (0..=cells)
            .map(|i| a + (b - a) * i as f64 / cells as f64)
            .collect();
        let cell_vals = quadrature::cell_integrals(f, &bounds);
        let mut prefix = vec![0.0; cells + 1];
        for i in 0..cells {
            prefix[i + 1] = prefix[i] + cell_vals[i];
        }
        CumTable { bounds, prefix }
    }

    fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    fn eval<F: Fn(f64) -> f64>(&self, t: f64, f: F) -> f64 {
        let (a, b) = (self.bounds[0], *self.bounds.last().unwrap());
        if t <= a {
            return 0.0;
        }
        if t >= b {
            return self.total();
        }
        let cells = self.bounds.len() - 1;
        let j = (((t - a) / (b - a) * cells as f64) as usize).min(cells - 1);
        let lo = self.bounds[j];
        // 8-point partial panel [lo, t]
        let mid = 0.5 * (lo + t);
        let half = 0.5 * (t - lo);
        let (xs, ws) = quadrature::gauss_legendre(8);
        let mut s = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            s += w * f(mid + half * x);
        }
        self.prefix[j] + s * half
    }
}

/// An analytic target measure with CDF, its antiderivative and stop-loss
/// tails in closed or table-assisted form.
#[derive(Debug, Clone)]
pub struct Target {
    pub family: TargetFamily,
    /// density normalization: integral of the unnormalized density
    pub z: f64,
    table: Option<CumTable>,
}

impl Target {
    pub fn new(family: TargetFamily) -> Result<Target> {
        match family {
            TargetFamily::Beta(n) => {
                if !(n > 1.0) {
                    return Err(Error::Measure(format!("beta target requires N > 1, got {n}")));
                }
                let half_pi = 0.5 * std::f64::consts::PI;
                let table =
                    CumTable::build(-half_pi, half_pi, 2048, move |th: f64| th.cos().powf(n - 1.0));
                Ok(Target {
                    family,
                    z: table.total(),
                    table: Some(table),
                })
            }
            TargetFamily::Cauchy(n) => {
                if !(n < -1.0) {
                    return Err(Error::Measure(format!(
                        "cauchy target requires N < -1 (first moment), got {n}"
                    )));
                }
                let half_pi = 0.5 * std::f64::consts::PI;
                let table =
                    CumTable::build(-half_pi, half_pi, 2048, move |th: f64| th.cos().powf(-n));
                Ok(Target {
                    family,
                    z: table.total(),
                    table: Some(table),
                })
            }
            TargetFamily::Gauss => Ok(Target {
                family,
                z: 1.0,
                table: None,
            }),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self.family {
            TargetFamily::Beta(_) => (-1.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.family {
            TargetFamily::Beta(n) => {
                if x.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - x * x).powf(n / 2.0 - 1.0) / self.z
                }
            }
            TargetFamily::Gauss => special::norm_pdf(x),
            TargetFamily::Cauchy(n) => (1.0 + x * x).powf(n / 2.0 - 1.0) / self.z,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.family {
            TargetFamily::Beta(n) => {
                if x <= -1.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    let th = x.asin();
                    self.table.as_ref().unwrap().eval(th, |t: f64| t.cos().powf(n - 1.0))
                        / self.z
                }
            }
            TargetFamily::Gauss => special::norm_cdf(x),
            TargetFamily::Cauchy(n) => {
                let th = x.atan();
                self.table.as_ref().unwrap().eval(th, |t: f64| t.cos().powf(-n)) / self.z
            }
        }
    }

    /// H(t) = integral of the CDF from the left edge of the support.
    pub fn cdf_antideriv(&self, t: f64) -> f64 {
        match self.family {
            TargetFamily::Beta(n) => {
                if t <= -1.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0 + (t - 1.0)
                } else {
                    t * self.cdf(t) + (1.0 - t * t).powf(n / 2.0) / (n * self.z)
                }
            }
            TargetFamily::Gauss => t * special::norm_cdf(t) + special::norm_pdf(t),
            TargetFamily::Cauchy(n) => {
                t * self.cdf(t) - (1.0 + t * t).powf(n / 2.0) / (n * self.z)
            }
        }
    }

    /// E (X - t)_+ , computed without cancellation in the right tail.
    pub fn tail_expect_right(&self, t: f64) -> f64 {
        // symmetric targets: survival(t) = cdf(-t)
        match self.family {
            TargetFamily::Beta(n) => {
                if t >= 1.0 {
                    0.0
                } else if t <= -1.0 {
                    -t
                } else {
                    (1.0 - t * t).powf(n / 2.0) / (n * self.z) - t * self.cdf(-t)
                }
            }
            TargetFamily::Gauss => special::gauss_tail_expect(t),
            TargetFamily::Cauchy(n) => {
                (1.0 + t * t).powf(n / 2.0) / (n.abs() * self.z) - t * self.cdf(-t)
            }
        }
    }

    /// E (t - X)_+ = E (X - (-t))_+ by symmetry.
    pub fn tail_expect_left(&self, t: f64) -> f64 {
        self.tail_expect_right(-t)
    }

    /// E |X| in closed form.
    pub fn mean_abs(&self) -> f64 {
        match self.family {
            TargetFamily::Beta(n) => 2.0 / (n * self.z),
            TargetFamily::Gauss => (2.0 / std::f64::consts::PI).sqrt(),
            TargetFamily::Cauchy(n) => 2.0 / (n.abs() * self.z),
        }
    }
}

/// Piecewise-linear CDF with jumps: before `ts[0]` the value is 0, after the
/// last point it is 1; at `ts[k]` the CDF jumps from `f_lo[k]` to `f_hi[k]`
/// and is linear between consecutive points.
#[derive(Debug, Clone)]
pub struct PwCdf {
    pub ts: Vec<f64>,
    pub f_lo: Vec<f64>,
    pub f_hi: Vec<f64>,
}

impl PwCdf {
    fn left_of(&self, k: usize) -> f64 {
        self.f_lo[k]
    }
    fn right_of(&self, k: usize) -> f64 {
        self.f_hi[k]
    }

    /// right-continuous evaluation
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.ts.len();
        if t < self.ts[0] {
            return 0.0;
        }
        if t >= self.ts[n - 1] {
            return 1.0;
        }
        let k = match self.ts.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.f_hi[k],
            Err(k) => k - 1,
        };
        let (a, b) = (self.ts[k], self.ts[k + 1]);
        let frac = if b > a { (t - a) / (b - a) } else { 0.0 };
        self.f_hi[k] + frac * (self.f_lo[k + 1] - self.f_hi[k])
    }
}

#[derive(Debug, Clone)]
pub enum CdfRepr {
    Discrete(PwCdf),
    Analytic(Target),
}

/// A probability measure as sorted weighted atoms plus a CDF representation.
#[derive(Debug, Clone)]
pub struct QuadratureMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
    pub cdf: CdfRepr,
}

impl QuadratureMeasure {
    /// Purely atomic measure; points are sorted, near-duplicates (1e-13
    /// relative) merged, weights normalized.
    pub fn from_atoms(points: Vec<f64>, weights: Vec<f64>) -> Result<QuadratureMeasure> {
        let (points, weights) = clean_atoms(points, weights)?;
        let cdf = steps_cdf(&points, &weights);
        Ok(QuadratureMeasure {
            points,
            weights,
            cdf: CdfRepr::Discrete(cdf),
        })
    }

    /// Measure from mass cells: each atom carries an interval over which its
    /// mass is spread linearly in the CDF. Used for pushforwards of grid
    /// measures by smooth functions.
    pub fn from_cells(cells: Vec<MassCell>) -> Result<QuadratureMeasure> {
        let points: Vec<f64> = cells.iter().map(|c| c.point).collect();
        let weights: Vec<f64> = cells.iter().map(|c| c.weight).collect();
        let (points, weights) = clean_atoms(points, weights)?;
        let total: f64 = cells.iter().map(|c| c.weight).sum();
        let cdf = ramp_cdf(&cells, total)?;
        Ok(QuadratureMeasure {
            points,
            weights,
            cdf: CdfRepr::Discrete(cdf),
        })
    }

    /// Quadrature representation of an analytic target; `panels` panels of a
    /// 32-point rule in the smoothing angle variable.
    pub fn from_target(target: Target, panels: usize) -> QuadratureMeasure {
        let (glx, glw) = quadrature::gauss_legendre(32);
        let half_pi = 0.5 * std::f64::consts::PI;
        let mut points = Vec::with_capacity(panels * 32);
        let mut weights = Vec::with_capacity(panels * 32);
        let hp = 2.0 / panels as f64;
        for p in 0..panels {
            let lo = -1.0 + p as f64 * hp;
            for (u, w) in glx.iter().zip(&glw) {
                let psi = lo + 0.5 * hp * (u + 1.0);
                let gw = w * 0.5 * hp;
                let (x, jac) = match target.family {
                    TargetFamily::Beta(_) => {
                        let th = half_pi * psi;
                        (th.sin(), half_pi * th.cos())
                    }
                    TargetFamily::Cauchy(_) => {
                        let th = half_pi * psi;
                        (th.tan(), half_pi / (th.cos() * th.cos()))
                    }
                    TargetFamily::Gauss => (10.0 * psi, 10.0),
                };
                points.push(x);
                weights.push(gw * jac * target.pdf(x));
            }
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        QuadratureMeasure {
            points,
            weights,
            cdf: CdfRepr::Analytic(target),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// (sum |f|^p dmu)^{1/p}, p >= 1.
    pub fn lp_norm<F: Fn(f64) -> f64>(&self, f: F, p: f64) -> f64 {
        assert!(p >= 1.0);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn cdf_eval(&self, t: f64) -> f64 {
        match &self.cdf {
            CdfRepr::Discrete(pw) => pw.eval(t),
            CdfRepr::Analytic(target) => target.cdf(t),
        }
    }

    pub fn write_csv(&self) -> String {
        let mut out = String::from("point,weight\n");
        for (p, w) in self.points.iter().zip(&self.weights) {
            out.push_str(&format!("{p:.16e},{w:.16e}\n"));
        }
        out
    }

    pub fn read_csv(text: &str) -> Result<QuadratureMeasure> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("point")) {
                continue;
            }
            let mut it = line.split(',');
            let (Some(p), Some(w)) = (it.next(), it.next()) else {
                return Err(Error::Measure(format!("line {}: expected point,weight", i + 1)));
            };
            points.push(
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Measure(format!("line {}: {e}", i + 1)))?,
            );
            weights.push(
                w.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Measure(format!("line {}: {e}", i + 1)))?,
            );
        }
        QuadratureMeasure::from_atoms(points, weights)
    }
}

/// One mass cell of a pushforward: an atom plus the interval its mass is
/// spread over in the CDF.
#[derive(Debug, Clone, Copy)]
pub struct MassCell {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

fn clean_atoms(points: Vec<f64>, weights: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::Measure("need equally many points and weights".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Measure("weights must sum to a positive finite value".into()));
    }
    for (&p, &w) in points.iter().zip(&weights) {
        if !p.is_finite() || !(w >= 0.0) {
            return Err(Error::Measure(format!("bad atom ({p}, {w})")));
        }
    }
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap());
    let mut ps: Vec<f64> = Vec::with_capacity(points.len());
    let mut ws: Vec<f64> = Vec::with_capacity(points.len());
    for &i in &idx {
        let (p, w) = (points[i], weights[i] / total);
        match ps.last() {
            Some(&last) if (p - last).abs() <= 1e-13 * p.abs().max(last.abs()).max(1.0) => {
                *ws.last_mut().unwrap() += w;
            }
            _ => {
                ps.push(p);
                ws.push(w);
            }
        }
    }
    Ok((ps, ws))
}

fn steps_cdf(points: &[f64], weights: &[f64]) -> PwCdf {
    let mut f_lo = Vec::with_capacity(points.len());
    let mut f_hi = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for &w in weights {
        f_lo.push(acc);
        acc += w;
        f_hi.push(acc);
    }
    // guard against rounding: last value must be exactly 1
    if let Some(last) = f_hi.last_mut() {
        *last = 1.0;
    }
    PwCdf {
        ts: points.to_vec(),
        f_lo,
        f_hi,
    }
}

/// Sweep-accumulate possibly-overlapping ramps into one piecewise-linear CDF.
fn ramp_cdf(cells: &[MassCell], total: f64) -> Result<PwCdf> {
    #[derive(Clone, Copy)]
    struct Event {
        t: f64,
        dslope: f64,
        jump: f64,
    }
    let mut events: Vec<Event> = Vec::with_capacity(2 * cells.len());
    for c in cells {
        if !(c.lo <= c.hi) || !c.lo.is_finite() || !c.hi.is_finite() {
            return Err(Error::Measure(format!(
                "bad mass cell interval [{}, {}]",
                c.lo, c.hi
            )));
        }
        let w = c.weight / total;
        let width = c.hi - c.lo;
        if width <= 1e-300 {
            events.push(Event {
                t: c.point,
                dslope: 0.0,
                jump: w,
            });
        } else {
            let s = w / width;
            events.push(Event {
                t: c.lo,
                dslope: s,
                jump: 0.0,
            });
            events.push(Event {
                t: c.hi,
                dslope: -s,
                jump: 0.0,
            });
        }
    }
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    let mut ts = Vec::with_capacity(events.len());
    let mut f_lo = Vec::with_capacity(events.len());
    let mut f_hi = Vec::with_capacity(events.len());
    let mut acc = 0.0;
    let mut slope = 0.0;
    let mut prev_t = events[0].t;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].t;
        acc += slope * (t - prev_t);
        let lo_here = acc.clamp(0.0, 1.0);
        // absorb all events at (numerically) the same location
        let mut jump = 0.0;
        while i < events.len() && events[i].t <= t + 1e-300 {
            slope += events[i].dslope;
            jump += events[i].jump;
            i += 1;
        }
        acc += jump;
        ts.push(t);
        f_lo.push(lo_here);
        f_hi.push(acc.clamp(0.0, 1.0));
        prev_t = t;
    }
    if let Some(last) = f_hi.last_mut() {
        *last = 1.0;
    }
    Ok(PwCdf { ts, f_lo, f_hi })
}

/// Pushforward of an atomic measure by grid values of f (atoms move, weights
/// stay). The CDF becomes a pure staircase.
pub fn pushforward(mu: &QuadratureMeasure, f: &[f64]) -> Result<QuadratureMeasure> {
    if f.len() != mu.points.len() {
        return Err(Error::Measure(format!(
            "grid function has {} values for {} support points",
            f.len(),
            mu.points.len()
        )));
    }
    QuadratureMeasure::from_atoms(f.to_vec(), mu.weights.clone())
}

/// Pushforward of a cell-structured grid measure: cell i has mass
/// `weights[i]`, node value `f_nodes[i]` and image interval spanned by
/// `f_ifaces[i], f_ifaces[i+1]`.
pub fn pushforward_cells(
    weights: &[f64],
    f_nodes: &[f64],
    f_ifaces: &[f64],
) -> Result<QuadratureMeasure> {
    let n = weights.len();
    if f_nodes.len() != n || f_ifaces.len() != n + 1 {
        return Err(Error::Measure("inconsistent cell pushforward inputs".into()));
    }
    let cells: Vec<MassCell> = (0..n)
        .map(|i| {
            let (a, b) = (f_ifaces[i], f_ifaces[i + 1]);
            let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
            if !lo.is_finite() {
                lo = f_nodes[i];
            }
            if !hi.is_finite() {
                hi = f_nodes[i];
            }
            MassCell {
                point: f_nodes[i],
                lo: lo.min(f_nodes[i]),
                hi: hi.max(f_nodes[i]),
                weight: weights[i],
            }
        })
        .collect();
    QuadratureMeasure::from_cells(cells)
}

/// Target measure constructor (quadrature representation plus analytic CDF).
pub fn target_measure(family: TargetFamily, panels: usize) -> Result<QuadratureMeasure> {
    let target = Target::new(family)?;
    Ok(QuadratureMeasure::from_target(target, panels.max(8)))
}

/// Exact L1 distance between CDFs.
pub fn w1_distance(a: &QuadratureMeasure, b: &QuadratureMeasure) -> f64 {
    match (&a.cdf, &b.cdf) {
        (CdfRepr::Discrete(pa), CdfRepr::Discrete(pb)) => w1_discrete(pa, pb),
        (CdfRepr::Discrete(pa), CdfRepr::Analytic(t)) => w1_mixed(pa, t),
        (CdfRepr::Analytic(t), CdfRepr::Discrete(pb)) => w1_mixed(pb, t),
        (CdfRepr::Analytic(ta), CdfRepr::Analytic(tb)) => w1_analytic(ta, tb),
    }
}

fn w1_discrete(a: &PwCdf, b: &PwCdf) -> f64 {
    let mut ts: Vec<f64> = a.ts.iter().chain(b.ts.iter()).copied().collect();
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup();
    let mut total = 0.0;
    for w in ts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        // both CDFs are linear on the open segment
        let du = a.eval(u) - b.eval(u);
        // left limits at v
        let dv = eval_left(a, v) - eval_left(b, v);
        total += segment_abs_linear(du, dv, v - u);
    }
    total
}

fn eval_left(p: &PwCdf, t: f64) -> f64 {
    match p.ts.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
        Ok(k) => p.left_of(k),
        Err(_) => p.eval(t),
    }
}

/// integral over a segment of |linear function| with endpoint values du, dv.
fn segment_abs_linear(du: f64, dv: f64, len: f64) -> f64 {
    if du * dv >= 0.0 {
        0.5 * (du.abs() + dv.abs()) * len
    } else {
        let tau = du.abs() / (du.abs() + dv.abs());
        0.5 * (du.abs() * tau + dv.abs() * (1.0 - tau)) * len
    }
}

fn w1_mixed(p: &PwCdf, target: &Target) -> f64 {
    let n = p.ts.len();
    let mut total = 0.0;
    // tails where the discrete CDF is exactly 0 or 1
    total += target.tail_expect_left(p.ts[0]);
    total += target.tail_expect_right(p.ts[n - 1]);
    for k in 0..n - 1 {
        let (u, v) = (p.ts[k], p.ts[k + 1]);
        if v <= u {
            continue;
        }
        let fu = p.right_of(k);
        let fv = eval_left(p, v);
        total += segment_abs_vs_target(u, v, fu, fv, target);
    }
    total
}

/// integral_u^v |l(t) - G(t)| dt where l is linear with l(u) = fu, l(v) = fv.
fn segment_abs_vs_target(u: f64, v: f64, fu: f64, fv: f64, target: &Target) -> f64 {
    let slope = (fv - fu) / (v - u);
    let d = |t: f64| fu + slope * (t - u) - target.cdf(t);
    // bracket sign changes on a coarse probe, then bisect
    const PROBES: usize = 8;
    let mut cuts = vec![u];
    let mut prev_t = u;
    let mut prev_d = d(u);
    for i in 1..=PROBES {
        let t = u + (v - u) * i as f64 / PROBES as f64;
        let dt = d(t);
        if prev_d == 0.0 || prev_d.signum() != dt.signum() {
            // refine the crossing
            let (mut lo, mut hi) = (prev_t, t);
            let mut dlo = prev_d;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let dm = d(mid);
                if dm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if dlo.signum() == dm.signum() {
                    lo = mid;
                    dlo = dm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 * (v - u) {
                    break;
                }
            }
            cuts.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_d = dt;
    }
    cuts.push(v);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut s = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // exact signed integral of l - G on [a, b]
        let int_l = 0.5 * ((fu + slope * (a - u)) + (fu + slope * (b - u))) * (b - a);
        let int_g = target.cdf_antideriv(b) - target.cdf_antideriv(a);
        s += (int_l - int_g).abs();
    }
    s
}

fn w1_analytic(a: &Target, b: &Target) -> f64 {
    // panel quadrature of |F_a - F_b| over the union of effective supports
    let lo = -60.0f64;
    let hi = 60.0f64;
    let core = quadrature::integrate(|t| (a.cdf(t) - b.cdf(t)).abs(), lo, hi, 512);
    // tail remainders bounded by stop-loss transforms
    let tails = a.tail_expect_left(lo).max(b.tail_expect_left(lo))
        + a.tail_expect_right(hi).max(b.tail_expect_right(hi));
    core + tails
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn dirac(x: f64) -> QuadratureMeasure {
        QuadratureMeasure::from_atoms(vec![x], vec![1.0]).unwrap()
    }

    fn uniform_atoms(a: f64, b: f64, n: usize) -> QuadratureMeasure {
        let pts: Vec<f64> = (0..n)
            .map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64)
            .collect();
        QuadratureMeasure::from_atoms(pts, vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn w1_closed_cases() {
        assert_relative_eq!(w1_distance(&dirac(0.0), &dirac(1.0)), 1.0);
        // W1(U[-1,1], U[-1/2,1/2]) = 1/4 (quantile-integral oracle)
        let u1 = uniform_atoms(-1.0, 1.0, 4000);
        let u2 = uniform_atoms(-0.5, 0.5, 4000);
        assert_relative_eq!(w1_distance(&u1, &u2), 0.25, max_relative = 2e-3);
        // translation: W1(mu, mu + c) = |c|
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..50).map(|_| rng.gen_range(0.1..1.0)).collect();
        let mu = QuadratureMeasure::from_atoms(pts.clone(), w.clone()).unwrap();
        let shifted: Vec<f64> = pts.iter().map(|p| p + 0.7).collect();
        let nu = QuadratureMeasure::from_atoms(shifted, w).unwrap();
        assert_relative_eq!(w1_distance(&mu, &nu), 0.7, max_relative = 1e-12);
    }

    /// Independent oracle: W1 between atomic measures via the quantile
    /// coupling (two-pointer sweep over sorted atoms).
    fn w1_quantile_oracle(a: &QuadratureMeasure, b: &QuadratureMeasure) -> f64 {
        let (pa, wa) = (a.points(), a.weights());
        let (pb, wb) = (b.points(), b.weights());
        let (mut i, mut j) = (0usize, 0usize);
        let (mut ra, mut rb) = (wa[0], wb[0]);
        let mut cost = 0.0;
        loop {
            let m = ra.min(rb);
            cost += m * (pa[i] - pb[j]).abs();
            ra -= m;
            rb -= m;
            if ra <= 1e-15 {
                i += 1;
                if i >= pa.len() {
                    break;
                }
                ra = wa[i];
            }
            if rb <= 1e-15 {
                j += 1;
                if j >= pb.len() {
                    break;
                }
                rb = wb[j];
            }
        }
        cost
    }

    #[test]
    fn cdf_integral_matches_quantile_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let na = rng.gen_range(1..25);
            let nb = rng.gen_range(1..25);
            let mk = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
                let pts: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
                QuadratureMeasure::from_atoms(pts, ws).unwrap()
            };
            let a = mk(na, &mut rng);
            let b = mk(nb, &mut rng);
            let lhs = w1_distance(&a, &b);
            let rhs = w1_quantile_oracle(&a, &b);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn target_cdf_basics() {
        let beta = Target::new(TargetFamily::Beta(2.0)).unwrap();
        // N = 2 is the uniform law on [-1, 1]
        assert_relative_eq!(beta.z, 2.0, max_relative = 1e-12);
        for &x in &[-0.7, 0.0, 0.3, 0.9] {
            assert_relative_eq!(beta.cdf(x), (x + 1.0) / 2.0, max_relative = 1e-11);
        }
        let beta3 = Target::new(TargetFamily::Beta(3.0)).unwrap();
        assert_relative_eq!(beta3.z, std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
        assert_relative_eq!(beta3.cdf(0.0), 0.5, max_relative = 1e-12);
        let gauss = Target::new(TargetFamily::Gauss).unwrap();
        assert_relative_eq!(gauss.cdf(0.0), 0.5, max_relative = 1e-14);
        let cauchy = Target::new(TargetFamily::Cauchy(-3.0)).unwrap();
        assert_relative_eq!(cauchy.z, 4.0 / 3.0, max_relative = 1e-11);
        assert_relative_eq!(cauchy.cdf(0.0), 0.5, max_relative = 1e-12);
        // E|X| for cauchy(-3): 2/(3 * 4/3) = 1/2
        assert_relative_eq!(cauchy.mean_abs(), 0.5, max_relative = 1e-11);
        // antiderivative consistency: H' = F by central differences
        for t in [-1.5f64, -0.2, 0.4, 2.0] {
            let eps = 1e-5;
            let num = (gauss.cdf_antideriv(t + eps) - gauss.cdf_antideriv(t - eps)) / (2.0 * eps);
            assert_relative_eq!(num, gauss.cdf(t), max_relative = 1e-7, epsilon = 1e-9);
            let num = (cauchy.cdf_antideriv(t + eps) - cauchy.cdf_antideriv(t - eps)) / (2.0 * eps);
            assert_relative_eq!(num, cauchy.cdf(t), max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn variance_of_targets() {
        let beta3 = target_measure(TargetFamily::Beta(3.0), 64).unwrap();
        assert_relative_eq!(beta3.integrate(|x| x * x), 0.25, max_relative = 1e-10);
        let beta2 = target_measure(TargetFamily::Beta(2.0), 64).unwrap();
        assert_relative_eq!(beta2.integrate(|x| x * x), 1.0 / 3.0, max_relative = 1e-10);
        let gauss = target_measure(TargetFamily::Gauss, 64).unwrap();
        assert_relative_eq!(gauss.integrate(|x| x * x), 1.0, max_relative = 1e-10);
        let cauchy = target_measure(TargetFamily::Cauchy(-3.0), 64).unwrap();
        assert_relative_eq!(cauchy.integrate(|x| x * x), 0.5, max_relative = 1e-8);
    }

    #[test]
    fn lp_norm_examples() {
        let beta3 = target_measure(TargetFamily::Beta(3.0), 64).unwrap();
        // sqrt of the variance 1/(N+1)
        assert_relative_eq!(beta3.lp_norm(|x| x, 2.0), 0.5, max_relative = 1e-10);
        assert_relative_eq!(beta3.lp_norm(|_| -2.5, 7.0), 2.5, max_relative = 1e-12);
        let cauchy = target_measure(TargetFamily::Cauchy(-3.0), 64).unwrap();
        assert_relative_eq!(cauchy.lp_norm(|x| x, 2.0), 0.5f64.sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn pushforward_identities() {
        let beta3 = target_measure(TargetFamily::Beta(3.0), 64).unwrap();
        // constant map gives a Dirac mass
        let c = pushforward(&beta3, &vec![0.3; beta3.points().len()]).unwrap();
        assert_eq!(c.points().len(), 1);
        assert_relative_eq!(w1_distance(&c, &dirac(0.3)), 0.0, epsilon = 1e-14);
        // reflection leaves the symmetric measure invariant
        let reflected: Vec<f64> = beta3.points().iter().map(|x| -x).collect();
        let r = pushforward(&beta3, &reflected).unwrap();
        let direct = QuadratureMeasure::from_atoms(
            beta3.points().to_vec(),
            beta3.weights().to_vec(),
        )
        .unwrap();
        assert!(w1_distance(&r, &direct) < 1e-10);
    }

    #[test]
    fn grid_pushforward_tracks_target() {
        // identity pushforward of a fine cell measure vs the analytic target
        let target = Target::new(TargetFamily::Beta(3.0)).unwrap();
        let n = 1000;
        let ifaces: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
        let nodes: Vec<f64> = (0..n).map(|i| 0.5 * (ifaces[i] + ifaces[i + 1])).collect();
        let weights = quadrature::cell_integrals(|x| target.pdf(x), &ifaces);
        let nu = pushforward_cells(&weights, &nodes, &ifaces).unwrap();
        let tm = QuadratureMeasure::from_target(target, 64);
        let d = w1_distance(&nu, &tm);
        assert!(d < 5e-7, "identity pushforward W1 = {d}");
    }

    #[test]
    fn kantorovich_duality_direction() {
        // |int g dnu1 - int g dnu2| <= W1 for 1-Lipschitz g
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let n = rng.gen_range(2..20);
                let pts: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let ws: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
                QuadratureMeasure::from_atoms(pts, ws).unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let w1 = w1_distance(&a, &b);
            let h = crate::stein::LipschitzSample::generate(&mut rng, 3.0);
            let lhs = (a.integrate(|x| h.eval(x)) - b.integrate(|x| h.eval(x))).abs();
            assert!(lhs <= h.lip * w1 + 1e-10, "duality violated: {lhs} > {w1}");
        }
    }

    #[test]
    fn csv_roundtrip() {
        let mu = QuadratureMeasure::from_atoms(vec![0.1, -0.4, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let text = mu.write_csv();
        let back = QuadratureMeasure::read_csv(&text).unwrap();
        assert_eq!(mu.points(), back.points());
        for (a, b) in mu.weights().iter().zip(back.weights()) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn w1_metric_axioms(
            raw_a in proptest::collection::vec((-50i32..50, 1u8..20), 1..12),
            raw_b in proptest::collection::vec((-50i32..50, 1u8..20), 1..12),
            raw_c in proptest::collection::vec((-50i32..50, 1u8..20), 1..12),
        ) {
            let mk = |raw: &[(i32, u8)]| {
                let pts: Vec<f64> = raw.iter().map(|&(p, _)| p as f64 / 10.0).collect();
                let ws: Vec<f64> = raw.iter().map(|&(_, w)| w as f64).collect();
                QuadratureMeasure::from_atoms(pts, ws).unwrap()
            };
            let a = mk(&raw_a);
            let b = mk(&raw_b);
            let c = mk(&raw_c);
            let dab = w1_distance(&a, &b);
            let dba = w1_distance(&b, &a);
            // symmetry and nonnegativity
            prop_assert!((dab - dba).abs() <= 1e-12 * (1.0 + dab.abs()));
            prop_assert!(dab >= 0.0);
            // identity of indiscernibles
            prop_assert!(w1_distance(&a, &a) <= 1e-12);
            // triangle inequality
            let dac = w1_distance(&a, &c);
            let dcb = w1_distance(&c, &b);
            prop_assert!(dab <= dac + dcb + 1e-10);
        }
    }
}
