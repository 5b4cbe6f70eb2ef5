//! Dormand–Prince 5(4) stepper with the standard fourth-order continuous
//! extension, generic over the dimension of the system.
//!
//! The stepper advances one accepted step at a time so callers can inspect
//! every step (section crossings, renormalisation, dense sampling).

use crate::error::IntegrationError;

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N];

    /// Steps producing an inadmissible state are rejected and retried with a
    /// smaller step.
    fn admissible(&self, _y: &[f64; N]) -> bool {
        true
    }

    /// Applied to every accepted state.
    fn project(&self, _y: &mut [f64; N]) {}
}

impl<const N: usize, S: OdeSystem<N> + ?Sized> OdeSystem<N> for &S {
    fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (**self).eval(t, y)
    }

    fn admissible(&self, y: &[f64; N]) -> bool {
        (**self).admissible(y)
    }

    fn project(&self, y: &mut [f64; N]) {
        (**self).project(y)
    }
}

/// Adapts a closure to [`OdeSystem`].
pub struct FnSystem<F>(pub F);

impl<const N: usize, F> OdeSystem<N> for FnSystem<F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn eval(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (self.0)(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_step: 1.0, max_steps: 50_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// Continuous extension over the last accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> [f64; N] {
        self.rcont[0]
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            let r = &self.rcont;
            *o = r[0][i]
                + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
        out
    }
}

/// Failure of a single step attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    Underflow { t: f64, h: f64 },
    NonFinite { t: f64 },
    TooManySteps { t: f64, max_steps: usize },
}

impl From<StepFailure> for IntegrationError {
    fn from(f: StepFailure) -> Self {
        match f {
            StepFailure::Underflow { t, h } => {
                IntegrationError::StepSizeUnderflow { t, h, partial: None }
            }
            StepFailure::NonFinite { t } => IntegrationError::NonFinite { t, partial: None },
            StepFailure::TooManySteps { t, max_steps } => {
                IntegrationError::TooManySteps { t, max_steps }
            }
        }
    }
}

pub struct Dopri5<const N: usize, S: OdeSystem<N>> {
    sys: S,
    opts: StepOptions,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    facold: f64,
    dense: Option<DenseSegment<N>>,
    pub nfev: usize,
    pub naccept: usize,
    pub nreject: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

impl<const N: usize, S: OdeSystem<N>> Dopri5<N, S> {
    pub fn new(sys: S, t0: f64, y0: [f64; N], opts: StepOptions) -> Result<Self, IntegrationError> {
        if !(opts.rtol > 0.0 && opts.atol > 0.0 && opts.max_step > 0.0) {
            return Err(IntegrationError::InvalidConfig(format!(
                "rtol, atol and max_step must be positive (got {}, {}, {})",
                opts.rtol, opts.atol, opts.max_step
            )));
        }
        let mut y = y0;
        sys.project(&mut y);
        let k1 = sys.eval(t0, &y);
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(IntegrationError::NonFinite { t: t0, partial: None });
        }
        let mut s = Self {
            sys,
            opts,
            t: t0,
            y,
            k1,
            h: 0.0,
            facold: 1e-4,
            dense: None,
            nfev: 1,
            naccept: 0,
            nreject: 0,
        };
        s.h = s.initial_step();
        Ok(s)
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            dnf += (self.k1[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(self.opts.max_step);
        let y1 = axpy(&self.y, h, &[(1.0, &self.k1)]);
        let f1 = self.sys.eval(self.t + h, &y1);
        self.nfev += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.scale(self.y[i], 0.0);
            der2 += ((f1[i] - self.k1[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
        if !h1.is_finite() {
            return h;
        }
        (100.0 * h).min(h1).min(self.opts.max_step)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    /// Derivative at the current state.
    pub fn dy(&self) -> &[f64; N] {
        &self.k1
    }

    pub fn system(&self) -> &S {
        &self.sys
    }

    /// Continuous extension of the last accepted step.
    pub fn dense(&self) -> Option<&DenseSegment<N>> {
        self.dense.as_ref()
    }

    /// Replaces the current state (e.g. after renormalising a tangent vector).
    pub fn reset_state(&mut self, y: [f64; N]) {
        self.y = y;
        self.sys.project(&mut self.y);
        self.k1 = self.sys.eval(self.t, &self.y);
        self.nfev += 1;
        self.dense = None;
    }

    /// Takes one accepted step without passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<(), StepFailure> {
        let mut rejected = false;
        loop {
            if self.naccept + self.nreject >= self.opts.max_steps {
                return Err(StepFailure::TooManySteps { t: self.t, max_steps: self.opts.max_steps });
            }
            let remaining = t_end - self.t;
            let mut h = self.h.min(self.opts.max_step);
            if h >= remaining || remaining - h < 1e-10 * h {
                h = remaining;
            }
            let h_floor = 1e-14 * self.t.abs().max(1.0);
            if h < h_floor && h < remaining {
                return Err(StepFailure::Underflow { t: self.t, h });
            }

            let t = self.t;
            let y = &self.y;
            let k1 = &self.k1;
            let k2 = self.sys.eval(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
            let k3 = self.sys.eval(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
            let k4 = self.sys.eval(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
            let k5 = self.sys.eval(
                t + C5 * h,
                &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = self.sys.eval(
                t + h,
                &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new =
                axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = self.sys.eval(t + h, &y_new);
            self.nfev += 6;

            let mut err = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sk = self.scale(y[i], y_new[i]);
                err += (e / sk).powi(2);
            }
            let err = (err / N as f64).sqrt();

            let finite = err.is_finite() && y_new.iter().all(|v| v.is_finite());
            if !finite || !self.sys.admissible(&y_new) {
                self.nreject += 1;
                self.h = h * 0.25;
                rejected = true;
                if self.h < h_floor {
                    return Err(if finite {
                        StepFailure::Underflow { t, h: self.h }
                    } else {
                        StepFailure::NonFinite { t }
                    });
                }
                continue;
            }

            let fac11 = err.powf(0.2 - BETA * 0.75);
            if err <= 1.0 {
                let mut fac = fac11 / self.facold.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if rejected {
                    h_new = h_new.min(h);
                }
                self.facold = err.max(1e-4);

                let mut rcont = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y_new[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    rcont[0][i] = y[i];
                    rcont[1][i] = dy;
                    rcont[2][i] = bspl;
                    rcont[3][i] = dy - h * k7[i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                self.dense = Some(DenseSegment { t0: t, h, rcont });

                let mut y_acc = y_new;
                self.sys.project(&mut y_acc);
                let k_next = if y_acc == y_new { k7 } else {
                    self.nfev += 1;
                    self.sys.eval(t + h, &y_acc)
                };
                self.t = if h == remaining { t_end } else { t + h };
                self.y = y_acc;
                self.k1 = k_next;
                self.h = h_new;
                self.naccept += 1;
                return Ok(());
            } else {
                self.nreject += 1;
                rejected = true;
                self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
            }
        }
    }

    /// Steps until `t_end` is reached, calling `on_step` after each accepted step.
    pub fn run_to<F>(&mut self, t_end: f64, mut on_step: F) -> Result<(), StepFailure>
    where
        F: FnMut(&Self),
    {
        while self.t < t_end {
            self.step(t_end)?;
            on_step(self);
        }
        Ok(())
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<const N: usize, S: OdeSystem<N>>(sys: &S, t: f64, y: &[f64; N], h: f64) -> [f64; N] {
    let k1 = sys.eval(t, y);
    let k2 = sys.eval(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]));
    let k3 = sys.eval(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]));
    let k4 = sys.eval(t + h, &axpy(y, h, &[(1.0, &k3)]));
    axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)])
}
