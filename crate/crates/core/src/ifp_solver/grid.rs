use super::SolverError;

/// Grid for normalized wealth: `a_i = s (exp(i h) - 1)`, `i = 0..count`.
///
/// `h` and `s` are pinned by two anchors: the last point equals `max` and the
/// middle point (index `(count - 1) / 2`) equals `median_target`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthGrid {
    points: Vec<f64>,
    max: f64,
    median_target: f64,
}

pub const DEFAULT_GRID_COUNT: usize = 100;
pub const DEFAULT_GRID_MAX: f64 = 1e4;
pub const DEFAULT_GRID_MEDIAN: f64 = 10.0;

impl Default for WealthGrid {
    fn default() -> Self {
        build_grid(DEFAULT_GRID_COUNT, DEFAULT_GRID_MAX, DEFAULT_GRID_MEDIAN)
            .expect("default grid is feasible")
    }
}

impl WealthGrid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn median_target(&self) -> f64 {
        self.median_target
    }

    pub fn middle_index(&self) -> usize {
        (self.count() - 1) / 2
    }

    /// Grid with `2 count - 1` points containing every current point: each
    /// cell `[a_i, a_(i+1)]` is split at `s (exp((i + 1/2) h) - 1)`.
    pub fn refined(&self) -> WealthGrid {
        let p = &self.points;
        let n = p.len();
        let mut points = Vec::with_capacity(2 * n - 1);
        // With u_i = a_i / s + 1 = exp(i h), the midpoint is at sqrt(u_i u_(i+1)).
        let (h, s) = exponential_params(p);
        for i in 0..n - 1 {
            points.push(p[i]);
            let mid = match (h, s) {
                (Some(h), Some(s)) => s * ((i as f64 + 0.5) * h).exp_m1(),
                _ => 0.5 * (p[i] + p[i + 1]),
            };
            points.push(mid);
        }
        points.push(p[n - 1]);
        WealthGrid {
            points,
            max: self.max,
            median_target: self.median_target,
        }
    }
}

impl WealthGrid {
    /// The same exponential grid continued past `factor * max`; every current
    /// point is kept.
    pub fn extended(&self, factor: f64) -> WealthGrid {
        let mut points = self.points.clone();
        let target = factor * self.max;
        match exponential_params(&self.points) {
            (Some(h), Some(s)) => {
                let mut i = points.len();
                while *points.last().unwrap() < target {
                    points.push(s * (i as f64 * h).exp_m1());
                    i += 1;
                }
            }
            _ => {
                let step = self.points[1];
                while *points.last().unwrap() < target {
                    let last = *points.last().unwrap();
                    points.push(last + step);
                }
            }
        }
        let max = *points.last().unwrap();
        WealthGrid {
            points,
            max,
            median_target: self.median_target,
        }
    }
}

/// Recovers `(h, s)` from the first two and last points, or `None` for a
/// linear grid.
fn exponential_params(p: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = p.len();
    let ratio = p[1] / p[n - 1];
    let linear = 1.0 / (n - 1) as f64;
    if (ratio - linear).abs() <= 1e-12 * linear {
        return (None, None);
    }
    let h = crate::roots::bisect(
        |h| anchor_ratio(1.0, (n - 1) as f64, h) - ratio,
        0.0,
        64.0,
        |_, r| r.abs() < 1e-15 * ratio,
    );
    (Some(h), Some(p[n - 1] / ((n - 1) as f64 * h).exp_m1()))
}

/// `expm1(m h) / expm1(n h)` for `0 < m < n`, stable for large `h`.
fn anchor_ratio(m: f64, n: f64, h: f64) -> f64 {
    ((m - n) * h).exp() * (-(-m * h).exp_m1()) / (-(-n * h).exp_m1())
}

pub fn build_grid(count: usize, max: f64, median_target: f64) -> Result<WealthGrid, SolverError> {
    if count < 3 {
        return Err(SolverError::InfeasibleGrid(format!(
            "need at least 3 points, got {count}"
        )));
    }
    if !(median_target > 0.0 && median_target < max && max.is_finite()) {
        return Err(SolverError::InfeasibleGrid(format!(
            "need 0 < median ({median_target}) < max ({max})"
        )));
    }
    let mid = ((count - 1) / 2) as f64;
    let last = (count - 1) as f64;
    let target = median_target / max;
    // As h -> 0 the grid becomes linear with ratio mid/last; larger h only
    // lowers the ratio, so targets above it cannot be met.
    let linear = mid / last;
    if (target - linear).abs() <= 1e-12 * linear {
        let points = (0..count).map(|i| max * i as f64 / last).collect();
        return Ok(WealthGrid {
            points,
            max,
            median_target,
        });
    }
    if target > linear {
        return Err(SolverError::InfeasibleGrid(format!(
            "median/max = {target} exceeds the linear-grid ratio {linear}"
        )));
    }
    let mut hi = 1.0;
    while anchor_ratio(mid, last, hi) > target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(SolverError::InfeasibleGrid(
                "median too close to zero".into(),
            ));
        }
    }
    let h = crate::roots::bisect(
        |h| anchor_ratio(mid, last, h) - target,
        0.0,
        hi,
        |_, r| r.abs() < 1e-15 * target,
    );
    let s = max / (last * h).exp_m1();
    let mut points: Vec<f64> = (0..count).map(|i| s * (i as f64 * h).exp_m1()).collect();
    points[count - 1] = max;
    Ok(WealthGrid {
        points,
        max,
        median_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_anchors() {
        let g = build_grid(100, 1e4, 10.0).unwrap();
        let p = g.points();
        assert_eq!(p[0], 0.0);
        assert_eq!(p[99], 1e4);
        assert!(p[49] >= 9.9 && p[49] <= 10.1, "median point {}", p[49]);
        assert!((p[49] - 10.0).abs() < 1e-9);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn three_point_grid_is_linear() {
        let g = build_grid(3, 1.0, 0.5).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn infeasible_grids() {
        assert!(matches!(
            build_grid(100, 1e4, 1e5),
            Err(SolverError::InfeasibleGrid(_))
        ));
        assert!(matches!(
            build_grid(3, 1.0, 0.7),
            Err(SolverError::InfeasibleGrid(_))
        ));
        assert!(matches!(
            build_grid(2, 1.0, 0.5),
            Err(SolverError::InfeasibleGrid(_))
        ));
    }

    #[test]
    fn refinement_keeps_points() {
        for g in [WealthGrid::default(), build_grid(5, 4.0, 2.0).unwrap()] {
            let r = g.refined();
            assert_eq!(r.count(), 2 * g.count() - 1);
            assert!(r.points().windows(2).all(|w| w[0] < w[1]));
            for (i, a) in g.points().iter().enumerate() {
                assert!((r.points()[2 * i] - a).abs() <= 1e-9 * a.max(1.0), "{i}");
            }
        }
    }

    #[test]
    fn extension_keeps_points() {
        let g = WealthGrid::default();
        let e = g.extended(2.0);
        assert!(e.max() >= 2e4);
        assert_eq!(&e.points()[..100], g.points());
        assert!(e.points().windows(2).all(|w| w[0] < w[1]));
        let lin = build_grid(3, 1.0, 0.5).unwrap().extended(2.0);
        assert_eq!(lin.points(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn nearly_linear_grid() {
        let g = build_grid(11, 10.0, 4.99).unwrap();
        assert!((g.points()[5] - 4.99).abs() < 1e-9);
        assert!(g.points().windows(2).all(|w| w[0] < w[1]));
    }
}
