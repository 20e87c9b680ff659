//! Bracketed scalar maximization: a uniform coarse grid locates the best
//! cell, golden-section search refines inside the neighbouring cells.
//! Ties always go to the smaller abscissa.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// The maximizer lies within `tol` of an end of the search interval.
    pub at_boundary: bool,
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Uniform grid of `n ≥ 2` points including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + step * i as f64 })
}

/// Golden-section maximization of a unimodal `f` on `[a, b]` down to an
/// interval of width `tol`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = finite_or_neg_inf(f(c));
    let mut fd = finite_or_neg_inf(f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = finite_or_neg_inf(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = finite_or_neg_inf(f(d));
        }
    }
    let x = 0.5 * (a + b);
    (x, finite_or_neg_inf(f(x)))
}

/// Maximize `f` over `[lo, hi]`: `grid_points` coarse samples, then
/// golden-section refinement to `tol` around the best sample.
pub fn grid_golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid_points: usize, tol: f64) -> Maximum {
    let grid: Vec<f64> = linspace(lo, hi, grid_points.max(2)).collect();
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let v = finite_or_neg_inf(f(x));
        if v > best_value || (i == 0 && v == f64::NEG_INFINITY) {
            best = i;
            best_value = v;
        }
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let (mut x, mut value) = golden_section_max(&mut f, a, b, tol);
    // the grid sample can beat the refined point when the peak sits on it
    if best_value > value || (best_value == value && grid[best] < x) {
        x = grid[best];
        value = best_value;
    }
    let x = x.clamp(lo, hi);
    Maximum {
        x,
        value,
        at_boundary: x - lo <= tol || hi - x <= tol,
    }
}
