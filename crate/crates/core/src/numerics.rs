//! Small numerical kernels: root bracketing, golden-section search and
//! adaptive Gauss–Kronrod quadrature on finite and infinite intervals.

use crate::error::{Error, Result};

/// `log(Σ exp(x_i))` with a max shift. Returns -∞ for an empty or all -∞ input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn logaddexp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log(1 - exp(x))` for x ≤ 0, accurate on both ends.
pub fn log1mexp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Root of a function with a sign change on `[lo, hi]`, to absolute width `x_tol`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NumericalFailure {
            what: "bisection bracket".into(),
            iterations: 0,
            best: vec![lo, hi, flo, fhi],
        });
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of an increasing function given `g(x) = (f(x), f'(x))` on a bracket with
/// `f(lo) ≤ 0 ≤ f(hi)`. Newton steps that leave the bracket fall back to bisection.
/// Stops when `|f| ≤ f_tol` or the bracket collapses; returns `(root, iterations)`.
pub fn newton_bracketed(
    mut g: impl FnMut(f64) -> (f64, f64),
    lo: f64,
    hi: f64,
    f_tol: f64,
    max_iter: usize,
) -> (f64, usize) {
    let (mut lo, mut hi) = (lo, hi);
    let mut x = 0.5 * (lo + hi);
    for it in 1..=max_iter {
        let (fx, dfx) = g(x);
        if fx.abs() <= f_tol {
            return (x, it);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == x || hi - lo <= 4.0 * f64::EPSILON * (lo.abs().max(hi.abs())) {
            return (next, it);
        }
        x = next;
    }
    (x, max_iter)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
/// Returns the best point evaluated and its value.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while (b - a).abs() > x_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
        if c >= d {
            break;
        }
    }
    best
}

/// Minimise over a grid, then refine by golden section between the neighbours
/// of the best grid point. The grid must be sorted ascending.
pub fn grid_then_golden(mut f: impl FnMut(f64) -> f64, grid: &[f64], x_tol: f64) -> (f64, f64) {
    assert!(!grid.is_empty());
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut i_best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[i_best] {
            i_best = i;
        }
    }
    if grid.len() < 3 || !values[i_best].is_finite() {
        return (grid[i_best], values[i_best]);
    }
    let lo = grid[i_best.saturating_sub(1)];
    let hi = grid[(i_best + 1).min(grid.len() - 1)];
    let (x, fx) = golden_min(&mut f, lo, hi, x_tol);
    if fx < values[i_best] {
        (x, fx)
    } else {
        (grid[i_best], values[i_best])
    }
}

/// Geometric grid of `n` points between `lo` and `hi` (both > 0).
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_segments: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quad<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub converged: bool,
}

struct Segment<const N: usize> {
    piece: usize,
    a: f64,
    b: f64,
    value: [f64; N],
    abs: [f64; N],
    error: [f64; N],
}

fn gk15<const N: usize>(f: &dyn Fn(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], [f64; N], [f64; N]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let mut abs = [0.0; N];
    let fc = f(c);
    for j in 0..N {
        k[j] = WGK[7] * fc[j];
        g[j] = WG[3] * fc[j];
        abs[j] = WGK[7] * fc[j].abs();
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for j in 0..N {
            k[j] += WGK[i] * (f1[j] + f2[j]);
            abs[j] += WGK[i] * (f1[j].abs() + f2[j].abs());
            if i % 2 == 1 {
                g[j] += WG[i / 2] * (f1[j] + f2[j]);
            }
        }
    }
    let mut err = [0.0; N];
    for j in 0..N {
        err[j] = ((k[j] - g[j]) * h).abs();
        k[j] *= h;
        abs[j] *= h.abs();
    }
    (k, abs, err)
}

/// Adaptive integration of a vector-valued integrand over `[a, b]`, where either
/// end may be infinite. The interval is split at `breakpoints` (those strictly
/// inside are used), and infinite pieces are mapped to `[0, 1)` through
/// `x = x0 ± scale·t/(1−t)`, so `scale` should be the width over which the
/// integrand decays. Gauss–Kronrod nodes are interior, so integrable endpoint
/// singularities need no special care.
pub fn integrate<const N: usize>(
    f: impl Fn(f64) -> [f64; N],
    a: f64,
    b: f64,
    breakpoints: &[f64],
    scale: f64,
    opts: QuadOptions,
) -> Quad<N> {
    assert!(a <= b, "integration bounds out of order");
    assert!(scale > 0.0 && scale.is_finite());
    if a == b {
        return Quad {
            value: [0.0; N],
            error: [0.0; N],
            converged: true,
        };
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > a && *x < b)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    if cuts.is_empty() && a.is_infinite() && b.is_infinite() {
        cuts.push(0.0);
    }
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);

    let f = &f;
    // (integrand in local coordinates, lower, upper)
    type Piece<'a, const N: usize> = (Box<dyn Fn(f64) -> [f64; N] + 'a>, f64, f64);
    let mut pieces: Vec<Piece<'_, N>> = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo.is_finite() && hi.is_finite() {
            pieces.push((Box::new(f), lo, hi));
        } else if lo.is_finite() {
            pieces.push((
                Box::new(move |t: f64| {
                    let s = 1.0 - t;
                    let x = lo + scale * t / s;
                    let jac = scale / (s * s);
                    let mut v = f(x);
                    v.iter_mut().for_each(|y| *y = if *y == 0.0 { 0.0 } else { *y * jac });
                    v
                }),
                0.0,
                1.0,
            ));
        } else {
            pieces.push((
                Box::new(move |t: f64| {
                    let s = 1.0 - t;
                    let x = hi - scale * t / s;
                    let jac = scale / (s * s);
                    let mut v = f(x);
                    v.iter_mut().for_each(|y| *y = if *y == 0.0 { 0.0 } else { *y * jac });
                    v
                }),
                0.0,
                1.0,
            ));
        }
    }

    let mut segs: Vec<Segment<N>> = Vec::new();
    for (i, (g, lo, hi)) in pieces.iter().enumerate() {
        // Start each piece from a few subintervals so narrow features are seen.
        let n0 = 4;
        for k in 0..n0 {
            let sa = lo + (hi - lo) * k as f64 / n0 as f64;
            let sb = lo + (hi - lo) * (k + 1) as f64 / n0 as f64;
            let (value, abs, error) = gk15(g.as_ref(), sa, sb);
            segs.push(Segment { piece: i, a: sa, b: sb, value, abs, error });
        }
    }

    let totals = |segs: &[Segment<N>]| {
        let mut v = [0.0; N];
        let mut ab = [0.0; N];
        let mut e = [0.0; N];
        for s in segs {
            for j in 0..N {
                v[j] += s.value[j];
                ab[j] += s.abs[j];
                e[j] += s.error[j];
            }
        }
        (v, ab, e)
    };
    let badness = |s: &Segment<N>, ab: &[f64; N]| -> f64 {
        (0..N)
            .map(|j| s.error[j] / (opts.rel_tol * ab[j]).max(opts.abs_tol))
            .fold(0.0, f64::max)
    };

    loop {
        let (v, ab, e) = totals(&segs);
        let done = (0..N).all(|j| e[j] <= (opts.rel_tol * ab[j]).max(opts.abs_tol));
        if done || segs.len() >= opts.max_segments {
            return Quad {
                value: v,
                error: e,
                converged: done,
            };
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .map(|(i, s)| (i, badness(s, &ab)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // Cannot split further; accept this segment's contribution as is.
            let (v, _, e) = totals(&segs);
            let mut value = v;
            let mut error = e;
            for j in 0..N {
                value[j] += s.value[j];
                error[j] += s.error[j];
            }
            return Quad { value, error, converged: false };
        }
        let g = pieces[s.piece].0.as_ref();
        for (sa, sb) in [(s.a, mid), (mid, s.b)] {
            let (value, abs, error) = gk15(g, sa, sb);
            segs.push(Segment { piece: s.piece, a: sa, b: sb, value, abs, error });
        }
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate1(f: impl Fn(f64) -> f64, a: f64, b: f64, breakpoints: &[f64], scale: f64) -> f64 {
    integrate(|x| [f(x)], a, b, breakpoints, scale, QuadOptions::default()).value[0]
}
