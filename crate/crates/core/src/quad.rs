//! Globally adaptive Gauss-Kronrod quadrature on vector-valued integrands.
//!
//! A G7-K15 embedded rule supplies the per-panel error estimate; the panel
//! with the worst error is bisected until every component meets its
//! tolerance or the panel budget runs out. Panels are finally summed in
//! left-to-right order so the result does not depend on refinement history
//! bookkeeping.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// 15-point Kronrod abscissae on [-1, 1] (positive half), with the embedded
// 7-point Gauss weights. Standard QUADPACK values.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Result of an adaptive integration.
#[derive(Clone, Debug)]
pub struct QuadOutcome<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: u64,
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
    id: u64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority && self.id == other.id
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| self.id.cmp(&other.id))
    }
}

fn gk15<const N: usize, F: FnMut(f64, &mut [f64; N])>(
    f: &mut F,
    a: f64,
    b: f64,
) -> ([f64; N], [f64; N]) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut fc = [0.0; N];
    f(center, &mut fc);

    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    for c in 0..N {
        kronrod[c] = fc[c] * WGK[7];
        gauss[c] = fc[c] * WG[3];
    }

    let mut lo = [0.0; N];
    let mut hi = [0.0; N];
    for (j, &x) in XGK[..7].iter().enumerate() {
        let dx = half * x;
        f(center - dx, &mut lo);
        f(center + dx, &mut hi);
        for c in 0..N {
            let s = lo[c] + hi[c];
            kronrod[c] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * s;
            }
        }
    }

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for c in 0..N {
        value[c] = kronrod[c] * half;
        error[c] = ((kronrod[c] - gauss[c]) * half).abs();
        // the usual (200 * e)^1.5 sharpening is skipped: raw |K - G| is a
        // conservative estimate and keeps the ladder accounting monotone
    }
    (value, error)
}

/// Integrate `f` over [a, b] until each component's accumulated error is
/// below `max(abs_floor, rel_tol * |integral|)`.
pub fn adaptive<const N: usize, F: FnMut(f64, &mut [f64; N])>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
    max_panels: usize,
) -> QuadOutcome<N> {
    assert!(b > a, "empty or reversed interval");
    let mut evaluations = 15u64;
    let (v0, e0) = gk15(&mut f, a, b);
    let mut heap: BinaryHeap<Panel<N>> = BinaryHeap::new();
    let mut next_id = 0u64;
    let push = |heap: &mut BinaryHeap<Panel<N>>, a, b, value: [f64; N], error: [f64; N], id| {
        let priority = error.iter().fold(0.0f64, |m, e| m.max(*e));
        heap.push(Panel { a, b, value, error, priority, id });
    };
    push(&mut heap, a, b, v0, e0, next_id);
    next_id += 1;

    let mut total = v0;
    let mut toterr = e0;

    let done = |total: &[f64; N], toterr: &[f64; N]| {
        (0..N).all(|c| toterr[c] <= abs_floor.max(rel_tol * total[c].abs()))
    };

    let mut panels = 1usize;
    while panels < max_panels && !done(&total, &toterr) {
        let worst = heap.pop().expect("heap cannot be empty");
        if worst.priority == 0.0 {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (vl, el) = gk15(&mut f, worst.a, mid);
        let (vr, er) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        for c in 0..N {
            total[c] += vl[c] + vr[c] - worst.value[c];
            toterr[c] += el[c] + er[c] - worst.error[c];
        }
        push(&mut heap, worst.a, mid, vl, el, next_id);
        next_id += 1;
        push(&mut heap, mid, worst.b, vr, er, next_id);
        next_id += 1;
        panels += 1;
    }

    let converged = done(&total, &toterr);

    // recompute the sums left-to-right for a refinement-order-independent result
    let mut parts: Vec<Panel<N>> = heap.into_vec();
    parts.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for p in &parts {
        for c in 0..N {
            value[c] += p.value[c];
            error[c] += p.error[c];
        }
    }

    QuadOutcome { value, error, evaluations, converged }
}

/// Scalar convenience wrapper.
pub fn adaptive_scalar<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
    max_panels: usize,
) -> QuadOutcome<1> {
    adaptive(
        move |x, out: &mut [f64; 1]| out[0] = f(x),
        a,
        b,
        rel_tol,
        abs_floor,
        max_panels,
    )
}

/// Integrate a radial integrand over [r_lo, r_hi] in the log variable
/// u = ln r, which absorbs power-law endpoint behavior. `f(r)` must not
/// include the Jacobian r.
pub fn adaptive_log_radial<const N: usize, F: FnMut(f64, &mut [f64; N])>(
    mut f: F,
    r_lo: f64,
    r_hi: f64,
    rel_tol: f64,
    abs_floor: f64,
    max_panels: usize,
) -> QuadOutcome<N> {
    assert!(r_lo > 0.0 && r_hi > r_lo);
    adaptive(
        move |u: f64, out: &mut [f64; N]| {
            let r = u.exp();
            f(r, out);
            for c in out.iter_mut() {
                *c *= r;
            }
        },
        r_lo.ln(),
        r_hi.ln(),
        rel_tol,
        abs_floor,
        max_panels,
    )
}
