//! Spectrum-enclosing geometry in the second quadrant.
//!
//! The upper convex hull of a (scaled) spectrum, with the origin appended, is a
//! concave function of the real part. Its piecewise-linear interpolant maps the real
//! part of a pseudo-extremum to an imaginary part, which halves the number of
//! optimization variables. [`HullCurve`] is the arc-length parametrized variant used
//! for initial placement and for alpha shapes.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::{Error, Result};

/// Upper convex hull as a concave piecewise-linear function on `[x_min, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HullFunction {
    knots: Vec<(f64, f64)>,
    degenerate: bool,
}

impl HullFunction {
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// True when every point lies on the real axis and the function is `y ≡ 0`.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn x_min(&self) -> f64 {
        self.knots[0].0
    }

    pub fn x_max(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn max_height(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(0.0, f64::max)
    }

    fn segment(&self, x: f64) -> usize {
        // index j with x_j <= x < x_{j+1}; the last segment is closed on the right
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.0.total_cmp(&x)) {
            Ok(j) => j.min(n - 2),
            Err(j) => j.saturating_sub(1).min(n - 2),
        }
    }

    /// Height and slope at `x`, with `x` clamped into the domain.
    pub fn height_and_slope(&self, x: f64) -> (f64, f64) {
        let x = x.clamp(self.x_min(), self.x_max());
        let j = self.segment(x);
        let (x0, y0) = self.knots[j];
        let (x1, y1) = self.knots[j + 1];
        let slope = (y1 - y0) / (x1 - x0);
        if x == x0 {
            return (y0, slope);
        }
        if x == x1 {
            return (y1, slope);
        }
        (y0 + slope * (x - x0), slope)
    }

    pub fn to_curve(&self) -> HullCurve {
        HullCurve::from_polyline(self.knots.iter().map(|&(x, y)| Complex64::new(x, y)).collect())
            .expect("hull knots are distinct")
    }

    /// Debug dump as `x,y` rows.
    pub fn to_csv(&self) -> String {
        knots_csv(self.knots.iter().copied())
    }
}

/// Linear interpolation of the hull height at `x`.
pub fn interpolate_height(h: &HullFunction, x: f64) -> Result<f64> {
    let (lo, hi) = (h.x_min(), h.x_max());
    if !(x >= lo && x <= hi) {
        return Err(Error::OutOfRange { x, lo, hi });
    }
    Ok(h.height_and_slope(x).0)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Upper convex hull of `points` plus the origin, as a function of the real part.
///
/// Points with negative imaginary part are ignored. When every remaining point is
/// real the result is the two-knot function `y ≡ 0`, flagged degenerate.
pub fn convex_hull_upper(points: &[Complex64]) -> Result<HullFunction> {
    let mut pts: Vec<(f64, f64)> = points.iter().filter(|p| p.im >= 0.0).map(|p| (p.re, p.im)).collect();
    pts.push((0.0, 0.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // highest point per abscissa
    let mut columns: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        match columns.last_mut() {
            Some(last) if last.0 == p.0 => last.1 = last.1.max(p.1),
            _ => columns.push(p),
        }
    }
    if columns.len() < 2 {
        return Err(Error::InvalidArgument("hull needs at least two distinct abscissae".into()));
    }
    let scale = columns.iter().map(|p| p.0.abs().max(p.1.abs())).fold(0.0, f64::max);
    if columns.iter().all(|p| p.1 <= 1e-14 * scale) {
        return Ok(HullFunction {
            knots: vec![(columns[0].0, 0.0), (columns[columns.len() - 1].0, 0.0)],
            degenerate: true,
        });
    }
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in columns {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Ok(HullFunction { knots: hull, degenerate: false })
}

/// Polyline parametrized by normalized cumulative arc length `τ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HullCurve {
    points: Vec<Complex64>,
    tau: Vec<f64>,
    length: f64,
}

impl HullCurve {
    /// Builds the curve; consecutive duplicate points are dropped.
    pub fn from_polyline(mut points: Vec<Complex64>) -> Result<Self> {
        points.dedup();
        if points.len() < 2 {
            return Err(Error::InvalidArgument("curve needs two distinct points".into()));
        }
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            acc += (w[1] - w[0]).norm();
            cum.push(acc);
        }
        let tau = cum.iter().map(|s| s / acc).collect::<Vec<_>>();
        Ok(Self { points, tau, length: acc })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn at_normalized(&self, tau: f64) -> Complex64 {
        let n = self.points.len();
        if tau >= 1.0 {
            return self.points[n - 1];
        }
        let j = match self.tau.binary_search_by(|t| t.total_cmp(&tau)) {
            Ok(j) => return self.points[j],
            Err(j) => j - 1,
        };
        let w = (tau - self.tau[j]) / (self.tau[j + 1] - self.tau[j]);
        self.points[j] + (self.points[j + 1] - self.points[j]) * w
    }

    /// Point at arc length `s` measured from the first point.
    pub fn at_arclength(&self, s: f64) -> Complex64 {
        self.at_normalized((s / self.length).clamp(0.0, 1.0))
    }

    /// Arc length from the first point to the curve point closest in real part to `x`
    /// (for curves that are graphs over the real axis).
    pub fn arclength_at_re(&self, x: f64) -> f64 {
        let n = self.points.len();
        for j in 0..n - 1 {
            let (a, b) = (self.points[j], self.points[j + 1]);
            let (lo, hi) = (a.re.min(b.re), a.re.max(b.re));
            if x >= lo && x <= hi {
                let w = if b.re == a.re { 0.0 } else { (x - a.re) / (b.re - a.re) };
                return self.tau[j] * self.length + w * (b - a).norm();
            }
        }
        if x < self.points[0].re {
            0.0
        } else {
            self.length
        }
    }

    pub fn to_csv(&self) -> String {
        knots_csv(self.points.iter().map(|p| (p.re, p.im)))
    }
}

/// Linear interpolation of real and imaginary parts in the arc-length parameter.
pub fn curve_interpolate(c: &HullCurve, tau: f64) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::OutOfRange { x: tau, lo: 0.0, hi: 1.0 });
    }
    Ok(c.at_normalized(tau))
}

/// `n` points on the curve with equal arc-length spacing.
///
/// With `include_left_endpoint` the first point is the start of the curve and the
/// spacing is `L/n`, leaving one full spacing between the last point and the end of
/// the curve (the origin). Mirrored at the real axis, the gap straddling the origin is
/// then twice the regular spacing. Without it the first point sits half a spacing
/// from the start, spacing `L/(n + 1/2)`, which is the placement of the conjugate
/// pairs of odd-degree disk polynomials.
pub fn equal_arclength_points(c: &HullCurve, n: usize, include_left_endpoint: bool) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    let (spacing, offset) = if include_left_endpoint {
        (c.length / n as f64, 0.0)
    } else {
        let h = c.length / (n as f64 + 0.5);
        (h, 0.5 * h)
    };
    if !(spacing > 1e-14 * c.length.max(f64::MIN_POSITIVE)) {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot be distinguished on a curve of length {}",
            c.length
        )));
    }
    Ok((0..n).map(|j| c.at_arclength(offset + spacing * j as f64)).collect())
}

/// Upper boundary of an alpha shape as an ordered polyline from the leftmost point to
/// the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaShapeBoundary {
    pub alpha: f64,
    pub vertices: Vec<Complex64>,
}

impl AlphaShapeBoundary {
    pub fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn to_curve(&self) -> Result<HullCurve> {
        HullCurve::from_polyline(self.vertices.clone())
    }

    pub fn to_csv(&self) -> String {
        knots_csv(self.vertices.iter().map(|p| (p.re, p.im)))
    }
}

/// Alpha shape of the spectrum (mirrored at the real axis, origin added), returned as
/// its upper boundary. `alpha = 0` yields the convex hull.
///
/// Edge detection is the brute-force empty-circle test: `{p, q}` is a boundary edge if
/// one of the two circles of radius `1/alpha` through `p` and `q` contains no other
/// point.
pub fn alpha_shape_upper(points: &[Complex64], alpha: f64) -> Result<AlphaShapeBoundary> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument("alpha must be non-negative".into()));
    }
    if alpha == 0.0 {
        let hull = convex_hull_upper(points)?;
        return Ok(AlphaShapeBoundary {
            alpha,
            vertices: hull.knots.iter().map(|&(x, y)| Complex64::new(x, y)).collect(),
        });
    }
    let mut upper: Vec<Complex64> = points.iter().copied().filter(|p| p.im >= 0.0).collect();
    if !upper.iter().any(|p| p.norm() == 0.0) {
        upper.push(Complex64::new(0.0, 0.0));
    }
    upper.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    upper.dedup();
    let mut all = upper.clone();
    all.extend(upper.iter().filter(|p| p.im > 0.0).map(|p| p.conj()));
    all.sort_by(|a, b| a.re.total_cmp(&b.re));

    let rho = 1.0 / alpha;
    let scale = all.iter().map(|p| p.norm()).fold(0.0, f64::max).max(rho);
    let eps = 1e-12 * scale;
    let empty = |center: Complex64, p: Complex64, q: Complex64| {
        let lo = all.partition_point(|w| w.re < center.re - rho);
        all[lo..]
            .iter()
            .take_while(|w| w.re <= center.re + rho)
            .all(|&w| w == p || w == q || (w - center).norm() >= rho - eps)
    };

    let n = upper.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let (p, q) = (upper[i], upper[j]);
            let d = (q - p).norm();
            if d > 2.0 * rho {
                if q.re - p.re > 2.0 * rho {
                    break;
                }
                continue;
            }
            let mid = (p + q) * 0.5;
            let normal = Complex64::new(-(q - p).im, (q - p).re) / d;
            let h = (rho * rho - 0.25 * d * d).max(0.0).sqrt();
            if empty(mid + normal * h, p, q) || empty(mid - normal * h, p, q) {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }

    let start = (0..n)
        .min_by(|&a, &b| upper[a].re.total_cmp(&upper[b].re).then(upper[a].im.total_cmp(&upper[b].im)))
        .expect("non-empty");
    let target = (0..n).find(|&k| upper[k].norm() == 0.0).expect("origin present");
    let mut path = vec![start];
    let mut back = Complex64::new(0.0, -1.0);
    let mut current = start;
    let two_pi = 2.0 * std::f64::consts::PI;
    while current != target {
        if path.len() > n {
            return Err(Error::AlphaTooLarge("boundary walk did not reach the origin".into()));
        }
        let from = upper[current];
        let next = adjacency[current]
            .iter()
            .copied()
            .map(|k| {
                let dir = upper[k] - from;
                // clockwise angle from the back direction, in (0, 2π]
                let mut ang = back.arg() - dir.arg();
                while ang <= 1e-15 {
                    ang += two_pi;
                }
                while ang > two_pi {
                    ang -= two_pi;
                }
                (k, ang)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k);
        let Some(next) = next else {
            return Err(Error::AlphaTooLarge(format!("isolated vertex {from}")));
        };
        if path.contains(&next) {
            return Err(Error::AlphaTooLarge("boundary walk closed before the origin".into()));
        }
        back = from - upper[next];
        path.push(next);
        current = next;
    }
    Ok(AlphaShapeBoundary { alpha, vertices: path.into_iter().map(|k| upper[k]).collect() })
}

fn knots_csv(rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in rows {
        let _ = writeln!(out, "{x:.16e},{y:.16e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{generate_fv_advection_circle, reduce_to_upper};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tri() -> HullFunction {
        convex_hull_upper(&[c(-2.0, 0.0), c(-1.0, 1.0), c(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn three_point_hull() {
        let h = tri();
        assert_eq!(h.knots(), &[(-2.0, 0.0), (-1.0, 1.0), (0.0, 0.0)]);
        assert!(!h.is_degenerate());
    }

    #[test]
    fn interior_points_are_dropped() {
        let h = convex_hull_upper(&[c(-2.0, 0.0), c(-1.0, 1.0), c(-1.0, 0.5), c(-0.5, 0.2)]).unwrap();
        assert_eq!(h.knots(), &[(-2.0, 0.0), (-1.0, 1.0), (0.0, 0.0)]);
    }

    #[test]
    fn real_points_are_degenerate() {
        let h = convex_hull_upper(&[c(-1.0, 0.0), c(-0.5, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(h.is_degenerate());
        assert_eq!(h.knots(), &[(-1.0, 0.0), (0.0, 0.0)]);
        assert_eq!(interpolate_height(&h, -0.3).unwrap(), 0.0);
    }

    #[test]
    fn interpolation_examples() {
        let h = tri();
        assert_eq!(interpolate_height(&h, -1.5).unwrap(), 0.5);
        assert_eq!(interpolate_height(&h, -1.0).unwrap(), 1.0);
        assert_eq!(interpolate_height(&h, -2.0).unwrap(), 0.0);
        assert_eq!(interpolate_height(&h, -0.25).unwrap(), 0.25);
        assert!(matches!(interpolate_height(&h, -2.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(interpolate_height(&h, 0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn circle_hull_sag_is_bounded() {
        let s = generate_fv_advection_circle(500, 2.0, 1.0).unwrap();
        let r = reduce_to_upper(&s, s.default_dedup_tol());
        let dt = 0.01;
        let scaled: Vec<Complex64> = r.eigenvalues().iter().map(|l| l * dt).collect();
        let h = convex_hull_upper(&scaled).unwrap();
        let radius = 250.0 * dt;
        let sag = radius * (1.0 - (PI / 500.0).cos());
        for &(x, y) in h.knots() {
            assert!(((x + radius).powi(2) + y * y).sqrt() - radius < 1e-12);
        }
        for i in 0..=1000 {
            let x = -2.0 * radius * i as f64 / 1000.0;
            // radial distance from the hull polyline to the circle
            let gap = radius - c(x + radius, interpolate_height(&h, x).unwrap()).norm();
            assert!(gap >= -1e-12 && gap <= sag + 1e-12, "gap {gap} at {x}");
        }
    }

    #[test]
    fn curve_interpolation() {
        let line = HullCurve::from_polyline(vec![c(-2.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(curve_interpolate(&line, 0.5).unwrap(), c(-1.0, 0.0));
        assert_eq!(curve_interpolate(&line, 1.0).unwrap(), c(0.0, 0.0));

        let curve = tri().to_curve();
        assert_eq!(curve_interpolate(&curve, curve.tau()[1]).unwrap(), c(-1.0, 1.0));
        // both segments have length √2, so the arc-length midpoint is the apex
        let mid = curve_interpolate(&curve, 0.5).unwrap();
        assert!((mid - c(-1.0, 1.0)).norm() < 1e-15);
        let q = curve_interpolate(&curve, 0.25).unwrap();
        assert!((q - c(-1.5, 0.5)).norm() < 1e-15);
        assert!(curve_interpolate(&curve, 1.5).is_err());
    }

    #[test]
    fn arclength_on_segment() {
        let line = HullCurve::from_polyline(vec![c(-2.0, 0.0), c(0.0, 0.0)]).unwrap();
        let pts = equal_arclength_points(&line, 2, true).unwrap();
        assert_eq!(pts, vec![c(-2.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(equal_arclength_points(&line, 1, true).unwrap(), vec![c(-2.0, 0.0)]);
        assert!(equal_arclength_points(&line, 0, true).is_err());
    }

    fn semicircle(radius: f64, n: usize) -> HullCurve {
        HullCurve::from_polyline(
            (0..=n)
                .map(|k| {
                    let phi = PI * (1.0 - k as f64 / n as f64);
                    c(radius * (phi.cos() - 1.0), radius * phi.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn arclength_on_semicircle_matches_disk_points() {
        for s in [8usize, 12, 16] {
            let r = s as f64;
            let curve = semicircle(r, 200_000);
            let pts = equal_arclength_points(&curve, s / 2, true).unwrap();
            for (i, p) in pts.iter().enumerate() {
                let j = s / 2 - i;
                let angle = 2.0 * j as f64 * PI / r;
                let expected = c(r * (angle.cos() - 1.0), r * angle.sin());
                assert!((p - expected).norm() < 1e-6 * r, "S={s} j={j}: {p} vs {expected}");
            }
        }
    }

    #[test]
    fn arclength_without_left_endpoint_matches_odd_degree() {
        let s = 13usize;
        let r = s as f64;
        let curve = semicircle(r, 200_000);
        let pts = equal_arclength_points(&curve, (s - 1) / 2, false).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let j = (s - 1) / 2 - i;
            let angle = 2.0 * j as f64 * PI / r;
            assert!((p - c(r * (angle.cos() - 1.0), r * angle.sin())).norm() < 1e-6 * r);
        }
    }

    #[test]
    fn alpha_zero_is_hull() {
        let s = generate_fv_advection_circle(64, 2.0, 1.0).unwrap();
        let pts = reduce_to_upper(&s, 1e-12).eigenvalues().to_vec();
        let a = alpha_shape_upper(&pts, 0.0).unwrap();
        let h = convex_hull_upper(&pts).unwrap();
        let hv: Vec<Complex64> = h.knots().iter().map(|&(x, y)| c(x, y)).collect();
        assert_eq!(a.vertices, hv);
    }

    #[test]
    fn square_boundary() {
        let pts = [c(-2.0, 0.0), c(-2.0, 2.0), c(0.0, 2.0), c(0.0, 0.0)];
        let a = alpha_shape_upper(&pts, 0.01).unwrap();
        assert_eq!(a.vertices, pts.to_vec());
    }

    /// Brute-force O(n³) reference: every pair is tested against every point.
    fn brute_force_edge(all: &[Complex64], p: Complex64, q: Complex64, rho: f64) -> bool {
        let d = (q - p).norm();
        if d > 2.0 * rho {
            return false;
        }
        let mid = (p + q) * 0.5;
        let normal = c(-(q - p).im, (q - p).re) / d;
        let h = (rho * rho - 0.25 * d * d).sqrt();
        [mid + normal * h, mid - normal * h]
            .iter()
            .any(|&ctr| all.iter().all(|&w| w == p || w == q || (w - ctr).norm() >= rho - 1e-9))
    }

    #[test]
    fn notch_is_followed_by_small_disks() {
        // circle spectrum with a notch carved into its top
        let mut pts: Vec<Complex64> = (0..=40)
            .map(|k| {
                let phi = PI * k as f64 / 40.0;
                c(10.0 * (phi.cos() - 1.0), 10.0 * phi.sin())
            })
            .collect();
        for p in pts.iter_mut() {
            if (p.re + 10.0).abs() < 2.5 {
                p.im -= 3.0;
            }
        }
        let hull = alpha_shape_upper(&pts, 0.0).unwrap();
        let shape = alpha_shape_upper(&pts, 1.0 / 3.0).unwrap();
        // the alpha shape visits the notch, the hull bridges it
        let notch = |v: &[Complex64]| v.iter().filter(|p| (p.re + 10.0).abs() < 2.5).count();
        assert_eq!(notch(&hull.vertices), 0);
        assert!(notch(&shape.vertices) > 0);
        let mut all = pts.clone();
        all.extend(pts.iter().filter(|p| p.im > 0.0).map(|p| p.conj()));
        for (p, q) in shape.edges() {
            assert!(brute_force_edge(&all, p, q, 3.0), "{p} -> {q}");
        }
        let curve = shape.to_curve().unwrap();
        assert!(curve.length() > hull.to_curve().unwrap().length());
    }

    #[test]
    fn too_large_alpha_is_rejected() {
        let pts = [c(-10.0, 0.0), c(-5.0, 5.0), c(0.0, 0.0)];
        assert!(matches!(alpha_shape_upper(&pts, 10.0), Err(Error::AlphaTooLarge(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hull_is_concave_and_covers_points(pts in prop::collection::vec((-10.0f64..-0.01, 0.0f64..5.0), 2..60)) {
                let pts: Vec<Complex64> = pts.into_iter().map(|(x, y)| c(x, y)).collect();
                let h = convex_hull_upper(&pts).unwrap();
                prop_assume!(!h.is_degenerate());
                for p in &pts {
                    prop_assert!(p.im <= interpolate_height(&h, p.re).unwrap() + 1e-12);
                }
                let (lo, hi) = (h.x_min(), h.x_max());
                for k in 0..50 {
                    let x1 = (lo + (hi - lo) * (k as f64 / 49.0)).clamp(lo, hi);
                    let x2 = (lo + (hi - lo) * (((k * 37) % 50) as f64 / 49.0)).clamp(lo, hi);
                    for t in [0.1, 0.5, 0.9] {
                        let mid = interpolate_height(&h, (t * x1 + (1.0 - t) * x2).clamp(lo, hi)).unwrap();
                        let chord = t * interpolate_height(&h, x1).unwrap() + (1.0 - t) * interpolate_height(&h, x2).unwrap();
                        prop_assert!(mid >= chord - 1e-12);
                    }
                }
            }

            #[test]
            fn arclength_gaps_are_equal(n in 1usize..30, include_left in any::<bool>()) {
                let h = convex_hull_upper(&[c(-7.0, 0.0), c(-6.0, 3.0), c(-3.0, 4.0), c(-0.5, 2.0)]).unwrap();
                let curve = h.to_curve();
                let pts = equal_arclength_points(&curve, n, include_left).unwrap();
                let s: Vec<f64> = pts.iter().map(|p| curve.arclength_at_re(p.re)).collect();
                let gaps: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
                for g in &gaps {
                    prop_assert!((g - gaps[0]).abs() <= 1e-10 * gaps[0]);
                }
            }
        }
    }
}
