//! Stability polynomials in pseudo-extrema form.
//!
//! A degree-`S` polynomial with `P(0) = 1` and `P'(0) = 1` is written as
//!
//! ```text
//! P(z) = 1 + z · ∏_j (1 − z / r_j)
//! ```
//!
//! where the `S − 1` roots `r_j` of `(P(z) − 1) / z` are the pseudo-extrema. For real
//! coefficients they are real or come in conjugate pairs; only the upper member of a
//! pair is stored. Evaluating the product directly avoids the catastrophic
//! cancellation of the monomial basis at high degree.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest degree accepted by [`monomial_expand`].
pub const MONOMIAL_MAX_DEGREE: usize = 40;

/// Pseudo-extrema of a real polynomial: real roots plus the upper members of the
/// conjugate pairs.
///
/// A pair may have zero imaginary part, which encodes a double real root (as for the
/// shifted Chebyshev polynomials).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoExtremaSet {
    real_pe: Vec<f64>,
    upper_pe: Vec<Complex64>,
}

impl PseudoExtremaSet {
    /// Validates and stores the roots. At most one simple real root is allowed, so the
    /// degree parity is fixed by its presence. Pairs given with negative imaginary
    /// part are flipped to the upper half-plane.
    pub fn new(real_pe: Vec<f64>, upper_pe: Vec<Complex64>) -> Result<Self> {
        if real_pe.len() > 1 {
            return Err(Error::InvalidArgument(format!(
                "{} simple real pseudo-extrema; at most one is allowed",
                real_pe.len()
            )));
        }
        for &r in &real_pe {
            if !(r < 0.0) || !r.is_finite() {
                return Err(Error::InvalidArgument(format!("real pseudo-extremum {r} must be negative")));
            }
        }
        let mut upper_pe = upper_pe;
        for r in upper_pe.iter_mut() {
            if !r.re.is_finite() || !r.im.is_finite() || r.norm() == 0.0 {
                return Err(Error::InvalidArgument(format!("invalid pseudo-extremum {r}")));
            }
            r.im = r.im.abs();
        }
        Ok(Self { real_pe, upper_pe })
    }

    pub fn real_pe(&self) -> &[f64] {
        &self.real_pe
    }

    pub fn upper_pe(&self) -> &[Complex64] {
        &self.upper_pe
    }

    pub fn degree(&self) -> usize {
        1 + self.real_pe.len() + 2 * self.upper_pe.len()
    }

    /// All `S − 1` roots including conjugates.
    pub fn all_roots(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.real_pe.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        for r in &self.upper_pe {
            out.push(*r);
            out.push(r.conj());
        }
        out
    }

    /// Every root multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            real_pe: self.real_pe.iter().map(|r| r * s).collect(),
            upper_pe: self.upper_pe.iter().map(|r| r * s).collect(),
        }
    }

    /// Number of free real parameters: one per real root, two per pair.
    pub fn n_params(&self) -> usize {
        self.real_pe.len() + 2 * self.upper_pe.len()
    }
}

/// Factor values at `z`: `1 − z/r` for real roots, `(1 − z/r)(1 − z/r̄)` for pairs,
/// the latter formed as the real quadratic `1 − 2Re(1/r) z + |1/r|² z²`.
fn factors(pe: &PseudoExtremaSet, z: Complex64) -> Vec<Complex64> {
    let mut f = Vec::with_capacity(pe.real_pe.len() + pe.upper_pe.len());
    for &r in &pe.real_pe {
        f.push(1.0 - z / r);
    }
    for &r in &pe.upper_pe {
        let w = r.inv();
        f.push(1.0 - z * (2.0 * w.re) + z * z * w.norm_sqr());
    }
    f
}

/// `P(z) = 1 + z ∏ (1 − z/r_j)`.
pub fn eval(pe: &PseudoExtremaSet, z: Complex64) -> Complex64 {
    let prod = factors(pe, z).into_iter().fold(Complex64::new(1.0, 0.0), |a, f| a * f);
    let p = 1.0 + z * prod;
    if z.im == 0.0 {
        Complex64::new(p.re, 0.0)
    } else {
        p
    }
}

/// `|P(z)|²` and its gradient with respect to the pseudo-extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct PeGradient {
    pub value: Complex64,
    pub modulus_sq: f64,
    /// `∂|P|²/∂r` for each real root.
    pub d_real: Vec<f64>,
    /// `(∂|P|²/∂Re r, ∂|P|²/∂Im r)` for each upper root, the conjugate moving along.
    pub d_upper: Vec<(f64, f64)>,
}

impl PeGradient {
    /// Gradient flattened as `[real..., (re, im) per pair...]`.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = self.d_real.clone();
        for &(a, b) in &self.d_upper {
            out.push(a);
            out.push(b);
        }
        out
    }
}

/// Exact gradient of `|P(z)|²` via prefix/suffix products of the factors (no division,
/// so it stays valid when `z` coincides with a root).
pub fn eval_gradient(pe: &PseudoExtremaSet, z: Complex64) -> PeGradient {
    let f = factors(pe, z);
    let n = f.len();
    let one = Complex64::new(1.0, 0.0);
    let mut prefix = vec![one; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] * f[k];
    }
    let mut suffix = vec![one; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] * f[k];
    }
    let value = 1.0 + z * prefix[n];
    let conj_p = value.conj();
    // ∂|P|²/∂t = 2 Re(conj(P) ∂P/∂t)
    let d = |dp: Complex64| 2.0 * (conj_p * dp).re;
    let nr = pe.real_pe.len();
    let mut d_real = Vec::with_capacity(nr);
    for (k, &r) in pe.real_pe.iter().enumerate() {
        let rest = prefix[k] * suffix[k + 1];
        d_real.push(d(z * rest * (z / (r * r))));
    }
    let mut d_upper = Vec::with_capacity(pe.upper_pe.len());
    for (j, &r) in pe.upper_pe.iter().enumerate() {
        let k = nr + j;
        let rest = z * prefix[k] * suffix[k + 1];
        let rc = r.conj();
        let a = (z / (r * r)) * (1.0 - z / rc);
        let b = (1.0 - z / r) * (z / (rc * rc));
        let i = Complex64::new(0.0, 1.0);
        d_upper.push((d(rest * (a + b)), d(rest * i * (a - b))));
    }
    PeGradient { value, modulus_sq: value.norm_sqr(), d_real, d_upper }
}

/// Linear order-condition residuals: `−Σ 1/r − 1/2` for `p ≥ 2` and
/// `Σ_{a<b} 1/(r_a r_b) − 1/6` for `p = 3`, sums over all roots including conjugates.
pub fn check_order_constraints(pe: &PseudoExtremaSet, p: u8) -> Vec<f64> {
    order_constraints_with_jacobian(pe, p).0
}

/// Residuals together with their Jacobian rows in the flat parameter layout of
/// [`PeGradient::flat`].
pub fn order_constraints_with_jacobian(pe: &PseudoExtremaSet, p: u8) -> (Vec<f64>, Vec<Vec<f64>>) {
    if p < 2 {
        return (Vec::new(), Vec::new());
    }
    let n = pe.n_params();
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    // gradients of s1 = Σw and s2 = Σw², w = 1/r
    let mut ds1 = Vec::with_capacity(n);
    let mut ds2 = Vec::with_capacity(n);
    for &r in &pe.real_pe {
        let w = 1.0 / r;
        s1 += w;
        s2 += w * w;
        ds1.push(-w * w);
        ds2.push(-2.0 * w * w * w);
    }
    for &r in &pe.upper_pe {
        let w = r.inv();
        s1 += 2.0 * w.re;
        s2 += 2.0 * (w * w).re;
        // for a pair contributing 2 Re g(r): ∂/∂Re = 2 Re g', ∂/∂Im = −2 Im g'
        let g1 = -(w * w);
        let g2 = -2.0 * w * w * w;
        ds1.push(2.0 * g1.re);
        ds1.push(-2.0 * g1.im);
        ds2.push(2.0 * g2.re);
        ds2.push(-2.0 * g2.im);
    }
    let mut res = vec![-s1 - 0.5];
    let mut jac = vec![ds1.iter().map(|v| -v).collect::<Vec<_>>()];
    if p >= 3 {
        res.push(0.5 * (s1 * s1 - s2) - 1.0 / 6.0);
        jac.push(ds1.iter().zip(&ds2).map(|(a, b)| s1 * a - 0.5 * b).collect());
    }
    (res, jac)
}

/// Monomial coefficients `α_0..α_S`. Only meant as a cross-check at low degree.
pub fn monomial_expand(pe: &PseudoExtremaSet) -> Result<Vec<f64>> {
    let degree = pe.degree();
    if degree > MONOMIAL_MAX_DEGREE {
        return Err(Error::DegreeTooLarge { degree, max: MONOMIAL_MAX_DEGREE });
    }
    let mut q = vec![1.0];
    let mul = |q: &Vec<f64>, f: &[f64]| {
        let mut out = vec![0.0; q.len() + f.len() - 1];
        for (i, a) in q.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for &r in &pe.real_pe {
        q = mul(&q, &[1.0, -1.0 / r]);
    }
    for &r in &pe.upper_pe {
        let w = r.inv();
        q = mul(&q, &[1.0, -2.0 * w.re, w.norm_sqr()]);
    }
    let mut alpha = vec![1.0];
    alpha.extend(q);
    Ok(alpha)
}

/// Pseudo-extrema of a polynomial whose stability region contains a disk of radius
/// `radius` centred at `−radius`, placed at the roots of unity on that circle:
/// `P(z) = (1 − radius/S) + (radius/S)(1 + z/radius)^S`.
pub fn circle_pe(degree: usize, radius: f64) -> Result<PseudoExtremaSet> {
    if degree < 2 || !degree.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("degree {degree} must be even and at least 2")));
    }
    let s = degree as f64;
    let upper = (1..degree / 2)
        .map(|j| {
            let phi = 2.0 * j as f64 * PI / s;
            Complex64::new(radius * (phi.cos() - 1.0), radius * phi.sin())
        })
        .collect();
    PseudoExtremaSet::new(vec![-2.0 * radius], upper)
}

/// Optimal disk polynomials: radius `S` for first order (`(1 + z/S)^S`) and `S − 1`
/// for second order.
pub fn disk_polynomial_pe(degree: usize, p: u8) -> Result<PseudoExtremaSet> {
    if degree < 4 || !degree.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("disk polynomials need even degree ≥ 4, got {degree}")));
    }
    let radius = match p {
        1 => degree as f64,
        2 => degree as f64 - 1.0,
        _ => return Err(Error::InvalidArgument(format!("no closed-form disk polynomial of order {p}"))),
    };
    circle_pe(degree, radius)
}

/// Real pseudo-extrema of the shifted Chebyshev polynomial `T_S(1 + z/S²)` as
/// `(value, multiplicity)`, ordered from the origin outwards.
pub fn chebyshev_pe(degree: usize) -> Result<Vec<(f64, usize)>> {
    if degree < 2 {
        return Err(Error::InvalidArgument("Chebyshev degree must be at least 2".into()));
    }
    let s = degree as f64;
    Ok((1..=degree / 2)
        .map(|j| {
            let value = s * s * ((2.0 * j as f64 * PI / s).cos() - 1.0);
            (value, if 2 * j == degree { 1 } else { 2 })
        })
        .collect())
}

/// The shifted Chebyshev pseudo-extrema as a [`PseudoExtremaSet`]; double roots become
/// pairs with zero imaginary part.
pub fn chebyshev_pseudo_extrema_set(degree: usize) -> Result<PseudoExtremaSet> {
    let mut real = Vec::new();
    let mut upper = Vec::new();
    for (v, m) in chebyshev_pe(degree)? {
        if m == 1 {
            real.push(v);
        } else {
            upper.push(Complex64::new(v, 0.0));
        }
    }
    PseudoExtremaSet::new(real, upper)
}

/// A polynomial of given order tied to the timestep it was optimized for. The
/// pseudo-extrema live in the scaled plane `z = dt·λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPolynomial {
    pub pe: PseudoExtremaSet,
    pub order: u8,
    pub dt: f64,
}

impl StabilityPolynomial {
    pub fn new(pe: PseudoExtremaSet, order: u8, dt: f64) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidArgument(format!("order {order} not in 1..=3")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("timestep {dt} must be positive")));
        }
        Ok(Self { pe, order, dt })
    }

    pub fn degree(&self) -> usize {
        self.pe.degree()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        eval(&self.pe, z)
    }

    pub fn order_residuals(&self) -> Vec<f64> {
        check_order_constraints(&self.pe, self.order)
    }

    /// The same polynomial shape used at timestep `dt`: roots scaled by `dt / self.dt`.
    pub fn rescaled(&self, dt: f64) -> Self {
        Self { pe: self.pe.scaled(dt / self.dt), order: self.order, dt }
    }

    /// CSV with rows `re,im,multiplicity`. A row with positive imaginary part stands
    /// for a conjugate pair (multiplicity 2); real rows have multiplicity 1, or 2 for
    /// a double root.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# degree={}", self.degree());
        let _ = writeln!(out, "# order={}", self.order);
        let _ = writeln!(out, "# dt={:.16e}", self.dt);
        out.push_str("re,im,multiplicity\n");
        for r in &self.pe.real_pe {
            let _ = writeln!(out, "{r:.16e},{:.16e},1", 0.0);
        }
        for r in &self.pe.upper_pe {
            let _ = writeln!(out, "{:.16e},{:.16e},2", r.re, r.im);
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut order = None;
        let mut dt = None;
        let mut degree = None;
        let mut real = Vec::new();
        let mut upper = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            let perr = |message: String| Error::Parse { line: line_no, message };
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let v = v.trim();
                    match k.trim() {
                        "order" => order = Some(v.parse::<u8>().map_err(|e| perr(e.to_string()))?),
                        "dt" => dt = Some(v.parse::<f64>().map_err(|e| perr(e.to_string()))?),
                        "degree" => degree = Some(v.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with("re,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(perr(format!("expected 3 fields, found {}", fields.len())));
            }
            let re: f64 = fields[0].parse().map_err(|_| perr(format!("bad number {:?}", fields[0])))?;
            let im: f64 = fields[1].parse().map_err(|_| perr(format!("bad number {:?}", fields[1])))?;
            let m: usize = fields[2].parse().map_err(|_| perr(format!("bad multiplicity {:?}", fields[2])))?;
            match (im == 0.0, m) {
                (true, 1) => real.push(re),
                (_, 2) => upper.push(Complex64::new(re, im)),
                _ => return Err(perr(format!("multiplicity {m} invalid for {re}{im:+}i"))),
            }
        }
        let pe = PseudoExtremaSet::new(real, upper).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
        if let Some(d) = degree {
            if d != pe.degree() {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("header says degree {d}, rows give {}", pe.degree()),
                });
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, message: format!("missing `# {what}=` header") };
        Self::new(pe, order.ok_or_else(|| missing("order"))?, dt.ok_or_else(|| missing("dt"))?)
    }
}
