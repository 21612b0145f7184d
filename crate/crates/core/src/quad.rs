//! Globally adaptive Gauss–Kronrod (10/21) quadrature with first-class
//! divergence reporting.
//!
//! Integrals over (0, 1) against sharply peaked Beta weights are the common
//! case here. [`integrate_unit`] handles them with panels that are dense
//! around the peak and geometrically refined toward both endpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

// Kronrod abscissae (positive half, descending) and weights for the 21-point
// rule; the odd entries are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_745_570_749,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Bisection depth beyond which an interval is declared non-convergent.
    pub max_depth: u32,
    /// Running |integral| above which the integral is declared divergent.
    pub divergence_threshold: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { abs_tol: 1e-9, rel_tol: 1e-12, max_depth: 60, divergence_threshold: 1e12, max_intervals: 200_000 }
    }
}

impl QuadConfig {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadConfig { abs_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceReason {
    /// The integrand produced an infinite or NaN value.
    NonFinite,
    /// The running integral exceeded the divergence threshold.
    Threshold,
    /// Subdivision depth limit hit.
    DepthExceeded,
    /// Interval budget exhausted.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub reason: DivergenceReason,
    /// Abscissa where the failure was detected.
    pub location: f64,
    pub partial: f64,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} near x = {:e} (partial integral {:e})", self.reason, self.location, self.partial)
    }
}

pub type QuadResult = Result<Integral, Divergence>;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

struct RuleOutput {
    value: f64,
    error: f64,
    roundoff_limited: bool,
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<RuleOutput, f64> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(centre);
    }
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let x1 = centre - dx;
        let x2 = centre + dx;
        let f1 = f(x1);
        if !f1.is_finite() {
            return Err(x1);
        }
        let f2 = f(x2);
        if !f2.is_finite() {
            return Err(x2);
        }
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    let roundoff_limited = err <= floor;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    Ok(RuleOutput { value: result, error: err, roundoff_limited })
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, starting from
/// the panels delimited by `breakpoints` (which must be finite and sorted).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, breakpoints: &[f64], cfg: &QuadConfig) -> QuadResult {
    assert!(breakpoints.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut settled_value = 0.0;
    let mut settled_error = 0.0;
    let mut evaluations = 0usize;
    let mut total = 0.0;

    let evaluate = |f: &mut F, a: f64, b: f64, evaluations: &mut usize| {
        *evaluations += 21;
        gk21(f, a, b)
    };

    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        match evaluate(&mut f, a, b, &mut evaluations) {
            Ok(out) => {
                total += out.value;
                if out.roundoff_limited {
                    settled_value += out.value;
                    settled_error += out.error;
                } else {
                    heap.push(Panel { a, b, value: out.value, error: out.error, depth: 0 });
                }
            }
            Err(x) => return Err(Divergence { reason: DivergenceReason::NonFinite, location: x, partial: total }),
        }
    }

    let mut intervals = heap.len();
    loop {
        let pending_error: f64 = heap.iter().map(|p| p.error).sum();
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total.abs() > cfg.divergence_threshold {
            let loc = heap.peek().map(|p| 0.5 * (p.a + p.b)).unwrap_or(f64::NAN);
            return Err(Divergence { reason: DivergenceReason::Threshold, location: loc, partial: total });
        }
        if pending_error + settled_error <= tol || heap.is_empty() {
            let value = settled_value + heap.iter().map(|p| p.value).sum::<f64>();
            return Ok(Integral { value, abs_error: pending_error + settled_error, evaluations });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // cannot split further in floating point
            settled_value += worst.value;
            settled_error += worst.error;
            continue;
        }
        if worst.depth + 1 > cfg.max_depth {
            return Err(Divergence { reason: DivergenceReason::DepthExceeded, location: mid, partial: total });
        }
        intervals += 1;
        if intervals > cfg.max_intervals {
            return Err(Divergence { reason: DivergenceReason::BudgetExhausted, location: mid, partial: total });
        }
        total -= worst.value;
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            match evaluate(&mut f, a, b, &mut evaluations) {
                Ok(out) => {
                    total += out.value;
                    if out.roundoff_limited {
                        settled_value += out.value;
                        settled_error += out.error;
                    } else {
                        heap.push(Panel { a, b, value: out.value, error: out.error, depth: worst.depth + 1 });
                    }
                }
                Err(x) => return Err(Divergence { reason: DivergenceReason::NonFinite, location: x, partial: total }),
            }
        }
    }
}

/// Panel layout on (0, 1) for an integrand concentrated near `centre` with
/// spread `scale`: offsets `centre ± scale·2^j`, then geometric refinement
/// toward 0 and 1 down to `2^-60`.
pub fn unit_interval_breakpoints(centre: f64, scale: f64) -> Vec<f64> {
    let mut pts = half_breakpoints(centre, scale);
    let upper = half_breakpoints(1.0 - centre, scale);
    pts.extend(upper.iter().map(|t| 1.0 - t).filter(|&x| x < 1.0));
    pts.push(1.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Breakpoints on `[0, ½]` for a peak at `centre` (which may lie outside the
/// half), refined geometrically toward 0.
fn half_breakpoints(centre: f64, scale: f64) -> Vec<f64> {
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 0.1 };
    let mut pts = vec![0.0, 0.5];
    let inside = |x: f64| x > 0.0 && x < 0.5;
    if inside(centre) {
        pts.push(centre);
    }
    let mut step = 0.25 * scale;
    while step < 1.0 {
        for x in [centre - step, centre + step] {
            if inside(x) {
                pts.push(x);
            }
        }
        step *= 2.0;
    }
    pts.sort_by(f64::total_cmp);
    let mut x = pts[1];
    for _ in 0..60 {
        x *= 0.5;
        pts.push(x);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Integrates `f(u, 1 - u)` over (0, 1).
///
/// The interval is split at ½ and the upper half is integrated in the
/// variable `t = 1 - u`, so both arguments handed to `f` are accurate to
/// full relative precision right up to either endpoint.
pub fn integrate_unit<F: FnMut(f64, f64) -> f64>(mut f: F, centre: f64, scale: f64, cfg: &QuadConfig) -> QuadResult {
    let half_cfg = QuadConfig { abs_tol: 0.5 * cfg.abs_tol, ..*cfg };
    let lo = integrate(|u| f(u, 1.0 - u), &half_breakpoints(centre, scale), &half_cfg)?;
    let hi = integrate(|t| f(1.0 - t, t), &half_breakpoints(1.0 - centre, scale), &half_cfg)
        .map_err(|d| Divergence { location: 1.0 - d.location, partial: d.partial + lo.value, ..d })?;
    let total = lo.value + hi.value;
    if total.abs() > cfg.divergence_threshold {
        return Err(Divergence { reason: DivergenceReason::Threshold, location: centre, partial: total });
    }
    Ok(Integral { value: total, abs_error: lo.abs_error + hi.abs_error, evaluations: lo.evaluations + hi.evaluations })
}

/// Integrates over a half-line or the whole real line by mapping to a finite
/// interval (`x = a + t/(1-t)` and `x = t/(1-t²)` respectively).
pub fn integrate_real_line<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> QuadResult {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate(f, &[a, b], cfg),
        (true, false) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                let v = f(a + t / s);
                if v == 0.0 {
                    0.0
                } else {
                    v / (s * s)
                }
            };
            integrate(g, &[0.0, 0.5, 0.9, 0.99, 0.999, 1.0], cfg)
        }
        (false, true) => {
            let g = |t: f64| {
                let s = 1.0 - t;
                let v = f(b - t / s);
                if v == 0.0 {
                    0.0
                } else {
                    v / (s * s)
                }
            };
            integrate(g, &[0.0, 0.5, 0.9, 0.99, 0.999, 1.0], cfg)
        }
        (false, false) => {
            let g = |t: f64| {
                let s = 1.0 - t * t;
                let v = f(t / s);
                if v == 0.0 {
                    0.0
                } else {
                    v * (1.0 + t * t) / (s * s)
                }
            };
            integrate(g, &[-1.0, -0.99, -0.9, -0.5, 0.0, 0.5, 0.9, 0.99, 1.0], cfg)
        }
    }
}
