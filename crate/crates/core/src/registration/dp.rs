//! Dynamic-programming search over monotone lattice paths.
//!
//! The lattice is `(n+1) × (n+1)`; a path runs from `(0, 0)` to `(n, n)` with
//! steps drawn from [`NEIGHBORS`]. SRV values are constant on grid cells, so
//! along a step `(a, b)` starting at `(i, j)` the warped curve on cell `i + m`
//! is the SRV of the polygon piece between `j + m·b/a` and `j + (m+1)·b/a`.

use crate::curves::Vec2;

/// Admissible lattice steps `(Δt, Δγ)`. The identity step comes first so ties
/// resolve toward the identity warp.
pub const NEIGHBORS: [(usize, usize); 11] = [
    (1, 1),
    (1, 2),
    (2, 1),
    (1, 3),
    (3, 1),
    (2, 3),
    (3, 2),
    (1, 4),
    (4, 1),
    (3, 4),
    (4, 3),
];

/// Sub-grid resolution covering every step denominator (lcm of 1..=4).
const SUB: usize = 12;

/// Steepest step slope in [`NEIGHBORS`].
const MAX_SLOPE: usize = 4;

pub(crate) struct DpSolution {
    /// Sum of squared differences (without the `2π/n` quadrature factor).
    pub cost: f64,
    /// Path vertices from `(0, 0)` to `(n, n)`.
    pub path: Vec<(usize, usize)>,
}

/// The polygon `B(s) = Σ_{c<s} q_c|q_c|` traced by an SRV curve, in cell units
/// over two laps, used to evaluate `(q∘γ)√γ̇` cell by cell.
pub(crate) struct Polygon<'a> {
    values: &'a [Vec2],
    cum: Vec<Vec2>,
}

impl<'a> Polygon<'a> {
    pub(crate) fn new(values: &'a [Vec2]) -> Self {
        let n = values.len();
        let mut cum = Vec::with_capacity(2 * n + 1);
        let mut acc = Vec2::zeros();
        cum.push(acc);
        for c in 0..2 * n {
            let q = values[c % n];
            acc += q * q.norm();
            cum.push(acc);
        }
        Self { values, cum }
    }

    fn at(&self, s: f64) -> Vec2 {
        let n = self.values.len();
        let c = (s.floor().max(0.0) as usize).min(2 * n - 1);
        let q = self.values[c % n];
        self.cum[c] + q * q.norm() * (s - c as f64)
    }

    /// SRV value on one cell whose image under the warp is `[s0, s1]`.
    pub(crate) fn piece(&self, s0: f64, s1: f64) -> Vec2 {
        let n = self.values.len();
        let c = s0.floor();
        if s1 <= c + 1.0 {
            return self.values[(c.max(0.0) as usize) % n] * (s1 - s0).max(0.0).sqrt();
        }
        chord_srv(self.at(s1) - self.at(s0))
    }

    /// [`Polygon::piece`] for end points given in sub-grid units.
    fn piece_fine(&self, p0: usize, p1: usize) -> Vec2 {
        let n = self.values.len();
        let c = p0 / SUB;
        if p1 <= (c + 1) * SUB {
            return self.values[c % n] * ((p1 - p0) as f64 / SUB as f64).sqrt();
        }
        let at = |p: usize| {
            let c = p / SUB;
            let q = self.values[c % n];
            self.cum[c] + q * q.norm() * ((p % SUB) as f64 / SUB as f64)
        };
        chord_srv(at(p1) - at(p0))
    }
}

fn chord_srv(d: Vec2) -> Vec2 {
    let l = d.norm();
    if l == 0.0 {
        Vec2::zeros()
    } else {
        d / l.sqrt()
    }
}

/// Warped values of `q2` for every start column and every sub-cell of one step.
struct StepTable {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn step_table(poly: &Polygon<'_>, n: usize, a: usize, b: usize) -> StepTable {
    let len = SUB * b / a;
    let mut x = Vec::with_capacity((n + 1) * a);
    let mut y = Vec::with_capacity((n + 1) * a);
    for j0 in 0..=n {
        for m in 0..a {
            let p0 = SUB * j0 + m * len;
            let v = poly.piece_fine(p0, p0 + len);
            x.push(v.x);
            y.push(v.y);
        }
    }
    StepTable { x, y }
}

/// Squared residual along one lattice step `(A, B)` leaving `(i0, j0)`.
#[inline(always)]
fn edge<const A: usize>(q1x: &[f64], q1y: &[f64], t: &StepTable, i0: usize, j0: usize) -> f64 {
    let x = &q1x[i0..i0 + A];
    let y = &q1y[i0..i0 + A];
    let tx = &t.x[j0 * A..j0 * A + A];
    let ty = &t.y[j0 * A..j0 * A + A];
    let mut e = 0.0;
    for m in 0..A {
        let dx = x[m] - tx[m];
        let dy = y[m] - ty[m];
        e += dx * dx + dy * dy;
    }
    e
}

/// Minimizes `Σ_k |q1[k] − (q2∘γ)√γ̇[k]|²` over lattice paths. `q2` must already
/// carry the seed shift. When `want_path` is false only the cost is returned.
pub(crate) fn solve(q1: &[Vec2], q2: &[Vec2], want_path: bool) -> DpSolution {
    let n = q1.len();
    debug_assert_eq!(n, q2.len());
    let poly = Polygon::new(q2);
    let tables: Vec<StepTable> = NEIGHBORS.iter().map(|&(a, b)| step_table(&poly, n, a, b)).collect();
    let q1x: Vec<f64> = q1.iter().map(|v| v.x).collect();
    let q1y: Vec<f64> = q1.iter().map(|v| v.y).collect();

    let w = n + 1;
    let mut cost = vec![f64::INFINITY; w * w];
    let mut back = if want_path { vec![u8::MAX; w * w] } else { Vec::new() };
    cost[0] = 0.0;

    for i in 1..=n {
        // cells no admissible path passes through stay infinite
        let lo = i.div_ceil(MAX_SLOPE).max(n.saturating_sub(MAX_SLOPE * (n - i)));
        let hi = (MAX_SLOPE * i).min(n - (n - i).div_ceil(MAX_SLOPE));
        for j in lo..=hi {
            let mut best = f64::INFINITY;
            let mut best_k = u8::MAX;
            macro_rules! try_step {
                ($k:expr, $a:expr, $b:expr) => {
                    if $a <= i && $b <= j {
                        let prev = cost[(i - $a) * w + (j - $b)];
                        if prev < best {
                            let total = prev + edge::<$a>(&q1x, &q1y, &tables[$k], i - $a, j - $b);
                            if total < best {
                                best = total;
                                best_k = $k;
                            }
                        }
                    }
                };
            }
            try_step!(0, 1, 1);
            try_step!(1, 1, 2);
            try_step!(2, 2, 1);
            try_step!(3, 1, 3);
            try_step!(4, 3, 1);
            try_step!(5, 2, 3);
            try_step!(6, 3, 2);
            try_step!(7, 1, 4);
            try_step!(8, 4, 1);
            try_step!(9, 3, 4);
            try_step!(10, 4, 3);
            cost[i * w + j] = best;
            if want_path {
                back[i * w + j] = best_k;
            }
        }
    }

    let total = cost[n * w + n];
    let mut path = Vec::new();
    if want_path {
        let (mut i, mut j) = (n, n);
        path.push((i, j));
        while i > 0 || j > 0 {
            let (a, b) = NEIGHBORS[back[i * w + j] as usize];
            i -= a;
            j -= b;
            path.push((i, j));
        }
        path.reverse();
    }
    DpSolution { cost: total, path }
}

/// Warp values `γ(k)` in grid-index units at `k = 0..n−1`, linear between path vertices.
pub(crate) fn path_to_warp(path: &[(usize, usize)], n: usize) -> Vec<f64> {
    let mut warp = Vec::with_capacity(n);
    for win in path.windows(2) {
        let (i0, j0) = win[0];
        let (i1, j1) = win[1];
        let a = i1 - i0;
        let b = j1 - j0;
        for m in 0..a {
            if i0 + m < n {
                warp.push(j0 as f64 + (m * b) as f64 / a as f64);
            }
        }
    }
    debug_assert_eq!(warp.len(), n);
    warp
}

/// Piecewise-constant block average onto `m` cells.
pub(crate) fn downsample(values: &[Vec2], m: usize) -> Vec<Vec2> {
    let n = values.len();
    let ratio = n as f64 / m as f64;
    (0..m)
        .map(|c| {
            let lo = c as f64 * ratio;
            let hi = (c + 1) as f64 * ratio;
            let mut acc = Vec2::zeros();
            let mut k = lo.floor() as usize;
            while (k as f64) < hi && k < n {
                let overlap = (hi.min(k as f64 + 1.0) - lo.max(k as f64)).max(0.0);
                acc += values[k] * overlap;
                k += 1;
            }
            acc / ratio
        })
        .collect()
}
