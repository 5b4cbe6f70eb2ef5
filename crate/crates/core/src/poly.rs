//! Roots of the model's quadratic (interior equilibria) and of the
//! characteristic cubic of a 3x3 Jacobian.

use num_complex::Complex64;

/// Real roots of `x^2 + b x + c = 0` without cancellation, or `None` when
/// the discriminant is negative. Roots are returned in ascending order.
pub fn real_quadratic_roots(b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return None;
    }
    Some(stable_pair(b, c, disc.sqrt()))
}

fn stable_pair(b: f64, c: f64, sqrt_disc: f64) -> (f64, f64) {
    let q = -0.5 * (b + b.signum() * sqrt_disc);
    if q == 0.0 {
        return (0.0, 0.0);
    }
    let (r1, r2) = (q, c / q);
    if r1 <= r2 {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

/// Both roots of `x^2 + b x + c = 0` as complex numbers.
pub fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let (r1, r2) = stable_pair(b, c, disc.sqrt());
        [Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Roots of the monic cubic `l^3 + b2 l^2 + b1 l + b0`.
///
/// One real root is found in closed form, polished by Newton iteration on the
/// original cubic, and deflated; the remaining pair comes from the quadratic.
pub fn cubic_roots(b2: f64, b1: f64, b0: f64) -> [Complex64; 3] {
    let shift = b2 / 3.0;
    let p = b1 - b2 * b2 / 3.0;
    let q = 2.0 * b2 * b2 * b2 / 27.0 - b2 * b1 / 3.0 + b0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    let t = if disc > 0.0 {
        let u = (-q / 2.0 - q.signum() * disc.sqrt()).cbrt();
        if u == 0.0 {
            0.0
        } else {
            u - p / (3.0 * u)
        }
    } else if p == 0.0 {
        (-q).cbrt()
    } else {
        // three real roots; take the one of largest magnitude
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let candidates = [
            m * theta.cos(),
            m * (theta - 2.0 * std::f64::consts::PI / 3.0).cos(),
            m * (theta - 4.0 * std::f64::consts::PI / 3.0).cos(),
        ];
        candidates.into_iter().fold(0.0, |acc: f64, r| if r.abs() > acc.abs() { r } else { acc })
    };

    let mut r = t - shift;
    for _ in 0..4 {
        let f = ((r + b2) * r + b1) * r + b0;
        let df = (3.0 * r + 2.0 * b2) * r + b1;
        if df == 0.0 {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        r -= step;
        if step.abs() <= 1e-16 * r.abs().max(1.0) {
            break;
        }
    }

    let c1 = b2 + r;
    let c0 = b1 + r * c1;
    let [q1, q2] = quadratic_roots(c1, c0);
    [Complex64::new(r, 0.0), q1, q2]
}

/// `(b2, b1, b0)` of `det(l I - J)` for a 3x3 matrix.
pub fn characteristic_coefficients(j: &[[f64; 3]; 3]) -> (f64, f64, f64) {
    let trace = j[0][0] + j[1][1] + j[2][2];
    let minors = j[0][0] * j[1][1] - j[0][1] * j[1][0] + j[0][0] * j[2][2] - j[0][2] * j[2][0]
        + j[1][1] * j[2][2]
        - j[1][2] * j[2][1];
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    (-trace, minors, -det)
}
