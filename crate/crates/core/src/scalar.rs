//! One-dimensional search: golden-section maximization and bracketed bisection.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x: f64,
    pub value: f64,
}

impl Peak {
    /// Keeps `self` unless `other` is strictly better, or equally good at a smaller `x`.
    pub fn better(self, other: Peak) -> Peak {
        if other.value > self.value || (other.value == self.value && other.x < self.x) {
            other
        } else {
            self
        }
    }
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`, shrinking the
/// bracket until it is narrower than `tol`. The returned peak is the best point
/// evaluated, endpoints included.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Peak {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut best = Peak { x: a, value: f(a) }.better(Peak { x: b, value: f(b) });
    if b - a <= tol {
        return best;
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    best = best.better(Peak { x: c, value: fc });
    best.better(Peak { x: d, value: fd })
}

/// Evaluates `f` on `n` evenly spaced points of `[lo, hi]`, then refines the
/// best one by golden-section search over its two neighbouring cells.
/// Exact ties in the scan go to the smaller abscissa.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    n: usize,
    tol: f64,
) -> Peak {
    let n = n.max(2);
    let width = (hi - lo) / (n - 1) as f64;
    let mut best_index = 0;
    let mut best = Peak {
        x: lo,
        value: f(lo),
    };
    for i in 1..n {
        let x = if i == n - 1 {
            hi
        } else {
            lo + width * i as f64
        };
        let candidate = Peak { x, value: f(x) };
        if candidate.value > best.value {
            best = candidate;
            best_index = i;
        }
    }
    let left = lo + width * best_index.saturating_sub(1) as f64;
    let right = if best_index + 1 >= n - 1 {
        hi
    } else {
        lo + width * (best_index + 1) as f64
    };
    best.better(golden_section_max(&mut f, left, right, tol))
}

/// Bisection for a sign change of `g` on `[lo, hi]`, stopping when the bracket
/// is narrower than `tol`. Returns `(lo, hi)` with `g(lo) ≤ 0 < g(hi)` when `g`
/// is increasing across the bracket.
pub fn bisect_increasing<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Number of local maxima in a sampled curve, endpoints included. A plateau
/// counts once.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let mut compressed: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if compressed.last() != Some(&v) {
            compressed.push(v);
        }
    }
    let n = compressed.len();
    if n <= 1 {
        return n;
    }
    (0..n)
        .filter(|&i| {
            let left = i == 0 || compressed[i - 1] < compressed[i];
            let right = i == n - 1 || compressed[i + 1] < compressed[i];
            left && right
        })
        .count()
}
