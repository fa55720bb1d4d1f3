//! Uniform distance between step-parametrized loops of equal duration:
//! inf over rotations of the sup over time of a pointwise distance.

/// A loop as cumulative step boundaries; evaluation is right-continuous.
pub struct StepLoop {
    pub points: Vec<usize>,
    /// Start time of each step, plus the total duration as a sentinel.
    pub bounds: Vec<f64>,
}

impl StepLoop {
    pub fn new(points: &[usize], steps: &[f64]) -> StepLoop {
        let mut bounds = Vec::with_capacity(steps.len() + 1);
        let mut acc = 0.0;
        bounds.push(0.0);
        for s in steps {
            acc += s;
            bounds.push(acc);
        }
        StepLoop { points: points.to_vec(), bounds }
    }

    pub fn duration(&self) -> f64 {
        *self.bounds.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> usize {
        let ell = self.duration();
        let mut t = t % ell;
        if t < 0.0 {
            t += ell;
        }
        let k = match self.bounds.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        self.points[k.min(self.points.len() - 1)]
    }
}

/// sup_t D(η1(t), η2(t+r)) for a fixed rotation r: both are step functions,
/// so the sup is attained on the interval partition induced by the two
/// boundary sets.
fn sup_at_rotation(a: &StepLoop, b: &StepLoop, r: f64, d: &impl Fn(usize, usize) -> f64) -> f64 {
    let ell = a.duration();
    let mut cuts: Vec<f64> = Vec::with_capacity(a.bounds.len() + b.bounds.len());
    for &t in &a.bounds {
        cuts.push(t % ell);
    }
    for &u in &b.bounds {
        let mut t = (u - r) % ell;
        if t < 0.0 {
            t += ell;
        }
        cuts.push(t);
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    cuts.push(ell);
    let mut worst = 0.0f64;
    for w in cuts.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        worst = worst.max(d(a.eval(t), b.eval(t + r)));
    }
    worst
}

/// Exact infimum over rotations: the objective is piecewise constant in r
/// with breakpoints at all pairwise boundary differences; both the
/// breakpoints themselves and interval midpoints are evaluated (exact
/// alignments can be strictly better than nearby rotations).
pub fn loop_uniform_distance(
    points1: &[usize],
    steps1: &[f64],
    points2: &[usize],
    steps2: &[f64],
    d: impl Fn(usize, usize) -> f64,
) -> f64 {
    let a = StepLoop::new(points1, steps1);
    let b = StepLoop::new(points2, steps2);
    debug_assert!((a.duration() - b.duration()).abs() < 1e-9 * a.duration().max(1e-300));
    let ell = a.duration();
    let mut candidates: Vec<f64> = Vec::new();
    for &u in &b.bounds {
        for &t in &a.bounds {
            let mut r = (u - t) % ell;
            if r < 0.0 {
                r += ell;
            }
            candidates.push(r);
        }
    }
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    candidates.dedup();
    let mut best = f64::INFINITY;
    for (k, &r) in candidates.iter().enumerate() {
        best = best.min(sup_at_rotation(&a, &b, r, &d));
        let next = if k + 1 < candidates.len() { candidates[k + 1] } else { candidates[0] + ell };
        best = best.min(sup_at_rotation(&a, &b, 0.5 * (r + next), &d));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_loops_are_at_zero() {
        let pts = [0usize, 1, 2, 3];
        let steps = [0.25; 4];
        let d = |i: usize, j: usize| if i == j { 0.0 } else { 1.0 };
        assert_eq!(loop_uniform_distance(&pts, &steps, &pts, &steps, d), 0.0);
    }

    #[test]
    fn rotation_is_free() {
        let pts1 = [0usize, 1, 2, 3];
        let pts2 = [2usize, 3, 0, 1];
        let steps = [0.25; 4];
        let d = |i: usize, j: usize| if i == j { 0.0 } else { 1.0 };
        assert_eq!(loop_uniform_distance(&pts1, &steps, &pts2, &steps, d), 0.0);
    }

    #[test]
    fn antipodal_square_parametrizations() {
        // 4-cycle in the square metric space (unit side, diagonal √2):
        // the loop versus its antipodal relabeling. Brute force over a fine
        // rotation grid is the oracle.
        let side = 1.0f64;
        let diag = 2.0f64.sqrt();
        let dm = move |i: usize, j: usize| -> f64 {
            if i == j {
                0.0
            } else if (i + 2) % 4 == j % 4 {
                diag
            } else {
                side
            }
        };
        let pts1 = [0usize, 1, 2, 3];
        let pts2 = [2usize, 1, 0, 3];
        let steps = [0.25; 4];
        let got = loop_uniform_distance(&pts1, &steps, &pts2, &steps, dm);
        let a = StepLoop::new(&pts1, &steps);
        let b = StepLoop::new(&pts2, &steps);
        let mut brute = f64::INFINITY;
        let m = 4096;
        for k in 0..m {
            let r = k as f64 / m as f64;
            let mut sup = 0.0f64;
            for t_idx in 0..m {
                let t = (t_idx as f64 + 0.5) / m as f64;
                sup = sup.max(dm(a.eval(t), b.eval(t + r)));
            }
            brute = brute.min(sup);
        }
        assert!((got - brute).abs() < 1e-12, "exact {got} vs brute {brute}");
    }
}
