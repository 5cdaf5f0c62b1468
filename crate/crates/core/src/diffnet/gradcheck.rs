//! Central finite differences, the oracle for every backward rule.

use crate::scalar::Real;

/// Numeric gradient by central differences, `(f(p + eps) - f(p - eps)) / (2 eps)`
/// per coordinate.
pub fn finite_diff_gradient<T: Real>(mut f: impl FnMut(&[T]) -> T, params: &[T], eps: T) -> Vec<T> {
    let mut p = params.to_vec();
    let two_eps = eps + eps;
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = f(&p);
            p[i] = orig - eps;
            let down = f(&p);
            p[i] = orig;
            (up - down) / two_eps
        })
        .collect()
}

/// Outcome of comparing an analytic gradient against finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradComparison {
    /// Largest coordinate-wise absolute difference.
    pub max_abs_error: f64,
    /// Max-norm of the larger of the two gradients (floored).
    pub scale: f64,
    pub relative_error: f64,
    pub checked: usize,
    /// Coordinates skipped because a perturbation flipped a discrete branch.
    pub excluded: usize,
}

impl GradComparison {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.relative_error < tolerance
    }

    /// Combines two comparisons as if their coordinates were one vector.
    pub fn merge(self, other: GradComparison) -> GradComparison {
        let max_abs_error = self.max_abs_error.max(other.max_abs_error);
        let scale = self.scale.max(other.scale);
        GradComparison {
            max_abs_error,
            scale,
            relative_error: max_abs_error / scale,
            checked: self.checked + other.checked,
            excluded: self.excluded + other.excluded,
        }
    }
}

/// Denominator floor so that all-zero gradients compare as exact.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Compares `analytic` with central differences of `f` over `coords`
/// (all coordinates when `None`). `f` returns the loss together with a
/// signature of its discrete branch choices; a coordinate whose perturbation
/// changes the signature sits within `eps` of a kink and is excluded.
pub fn compare_gradient<T: Real>(
    mut f: impl FnMut(&[T]) -> (T, u64),
    params: &[T],
    analytic: &[T],
    coords: Option<&[usize]>,
    eps: T,
) -> GradComparison {
    assert_eq!(params.len(), analytic.len(), "gradient length");
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };
    let (_, base) = f(params);
    let mut p = params.to_vec();
    let (mut max_err, mut max_a, mut max_n) = (0.0f64, 0.0f64, 0.0f64);
    let (mut checked, mut excluded) = (0, 0);
    for &i in coords {
        let orig = p[i];
        p[i] = orig + eps;
        let (up, sig_up) = f(&p);
        p[i] = orig - eps;
        let (down, sig_down) = f(&p);
        p[i] = orig;
        if sig_up != base || sig_down != base {
            excluded += 1;
            continue;
        }
        let numeric = ((up - down) / (eps + eps)).as_f64();
        let a = analytic[i].as_f64();
        max_err = max_err.max((a - numeric).abs());
        max_a = max_a.max(a.abs());
        max_n = max_n.max(numeric.abs());
        checked += 1;
    }
    let scale = max_a.max(max_n).max(SCALE_FLOOR);
    GradComparison {
        max_abs_error: max_err,
        scale,
        relative_error: max_err / scale,
        checked,
        excluded,
    }
}
