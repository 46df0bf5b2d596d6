//! Dormand–Prince 5(4) with embedded error control and continuous output.

use crate::real::Real;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-20,
            h_init: 1e-4,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep<T, const D: usize> {
    pub t: T,
    pub h: T,
    rcont: [[T; D]; 5],
}

impl<T: Real, const D: usize> DenseStep<T, D> {
    pub fn start(&self) -> T {
        self.t
    }

    pub fn end(&self) -> T {
        self.t + self.h
    }

    pub fn y_start(&self) -> [T; D] {
        self.rcont[0]
    }

    pub fn y_end(&self) -> [T; D] {
        let mut y = self.rcont[0];
        for (yi, di) in y.iter_mut().zip(&self.rcont[1]) {
            *yi += *di;
        }
        y
    }

    /// Fourth-order continuous extension at `t` in `[start, end]`.
    pub fn eval(&self, t: T) -> [T; D] {
        let th = (t - self.t) / self.h;
        let th1 = T::one() - th;
        let r = &self.rcont;
        let mut y = [T::zero(); D];
        for i in 0..D {
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct StepFailure<T, const D: usize> {
    pub t: T,
    pub y: [T; D],
    pub reason: String,
}

struct Tableau<T> {
    c: [T; 6],
    a2: [T; 1],
    a3: [T; 2],
    a4: [T; 3],
    a5: [T; 4],
    a6: [T; 5],
    b: [T; 6],
    e: [T; 7],
    d: [T; 7],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        let q = T::ratio;
        Self {
            c: [q(1, 5), q(3, 10), q(4, 5), q(8, 9), T::one(), T::one()],
            a2: [q(1, 5)],
            a3: [q(3, 40), q(9, 40)],
            a4: [q(44, 45), q(-56, 15), q(32, 9)],
            a5: [q(19372, 6561), q(-25360, 2187), q(64448, 6561), q(-212, 729)],
            a6: [q(9017, 3168), q(-355, 33), q(46732, 5247), q(49, 176), q(-5103, 18656)],
            // b1, b3, b4, b5, b6 (b2 = b7 = 0)
            b: [q(35, 384), q(500, 1113), q(125, 192), q(-2187, 6784), q(11, 84), T::zero()],
            e: [
                q(71, 57600),
                T::zero(),
                q(-71, 16695),
                q(71, 1920),
                q(-17253, 339200),
                q(22, 525),
                q(-1, 40),
            ],
            d: [
                q(-12715105075, 11282082432),
                T::zero(),
                q(87487479700, 32700410799),
                q(-10690763975, 1880347072),
                q(701980252875, 199316789632),
                q(-1453857185, 822651844),
                q(69997945, 29380423),
            ],
        }
    }
}

fn axpy<T: Real, const D: usize>(y: &[T; D], h: T, terms: &[(T, &[T; D])]) -> [T; D] {
    let mut out = *y;
    for i in 0..D {
        let mut s = T::zero();
        for (c, k) in terms {
            s += *c * k[i];
        }
        out[i] += h * s;
    }
    out
}

struct Trial<T, const D: usize> {
    y1: [T; D],
    k7: [T; D],
    err: f64,
    step: DenseStep<T, D>,
}

/// One Dormand–Prince step of size `h` from `(t, y)` landing on `t1`.
#[allow(clippy::too_many_arguments)]
fn trial<T: Real, const D: usize, F: FnMut(T, &[T; D]) -> [T; D]>(
    f: &mut F,
    tb: &Tableau<T>,
    t: T,
    y: &[T; D],
    k1: &[T; D],
    h: T,
    t1: T,
    groups: &[usize; D],
    ctl: &StepControl,
) -> Trial<T, D> {
    let k2 = f(t + tb.c[0] * h, &axpy(y, h, &[(tb.a2[0], k1)]));
    let k3 = f(t + tb.c[1] * h, &axpy(y, h, &[(tb.a3[0], k1), (tb.a3[1], &k2)]));
    let k4 = f(t + tb.c[2] * h, &axpy(y, h, &[(tb.a4[0], k1), (tb.a4[1], &k2), (tb.a4[2], &k3)]));
    let k5 = f(
        t + tb.c[3] * h,
        &axpy(y, h, &[(tb.a5[0], k1), (tb.a5[1], &k2), (tb.a5[2], &k3), (tb.a5[3], &k4)]),
    );
    let k6 = f(
        t + h,
        &axpy(y, h, &[(tb.a6[0], k1), (tb.a6[1], &k2), (tb.a6[2], &k3), (tb.a6[3], &k4), (tb.a6[4], &k5)]),
    );
    let y1 = axpy(y, h, &[(tb.b[0], k1), (tb.b[1], &k3), (tb.b[2], &k4), (tb.b[3], &k5), (tb.b[4], &k6)]);
    let k7 = f(t1, &y1);

    let hf = h.to_f64();
    let mut scale = [0.0f64; D];
    for i in 0..D {
        let s = y[i].abs().to_f64().max(y1[i].abs().to_f64());
        for j in 0..D {
            if groups[j] == groups[i] {
                scale[j] = scale[j].max(s);
            }
        }
    }
    let mut err2 = 0.0;
    let mut finite = true;
    for i in 0..D {
        let ei = hf
            * (tb.e[0] * k1[i] + tb.e[2] * k3[i] + tb.e[3] * k4[i] + tb.e[4] * k5[i] + tb.e[5] * k6[i] + tb.e[6] * k7[i])
                .to_f64();
        let r = ei / (ctl.atol + ctl.rtol * scale[i]);
        finite &= r.is_finite() && y1[i].is_finite();
        err2 += r * r;
    }
    let err = if finite { (err2 / D as f64).sqrt() } else { f64::INFINITY };

    let mut ydiff = [T::zero(); D];
    let mut bspl = [T::zero(); D];
    let mut r3 = [T::zero(); D];
    let mut r4 = [T::zero(); D];
    for i in 0..D {
        ydiff[i] = y1[i] - y[i];
        bspl[i] = h * k1[i] - ydiff[i];
        r3[i] = ydiff[i] - h * k7[i] - bspl[i];
        r4[i] = h * (tb.d[0] * k1[i] + tb.d[2] * k3[i] + tb.d[3] * k4[i] + tb.d[4] * k5[i] + tb.d[5] * k6[i] + tb.d[6] * k7[i]);
    }
    Trial {
        y1,
        k7,
        err,
        step: DenseStep {
            t,
            h: t1 - t,
            rcont: [*y, ydiff, bspl, r3, r4],
        },
    }
}

/// Integrates `y' = f(t, y)` from `t0` toward `t_end`, handing every accepted
/// step to `observer` until it returns [`Flow::Stop`].
///
/// Components sharing a `groups` label share one error scale,
/// `atol + rtol·max|y_i|` over the group.
pub fn integrate<T, const D: usize, F, O>(
    mut f: F,
    t0: T,
    y0: [T; D],
    t_end: T,
    groups: [usize; D],
    ctl: &StepControl,
    mut observer: O,
) -> Result<(T, [T; D]), StepFailure<T, D>>
where
    T: Real,
    F: FnMut(T, &[T; D]) -> [T; D],
    O: FnMut(&DenseStep<T, D>) -> Flow,
{
    let tb = Tableau::<T>::new();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = T::from_f64(ctl.h_init.min(ctl.h_max));
    let mut fac_old: f64 = 1e-4;
    let mut rejected = false;
    let span = (t_end - t0).to_f64();

    for _ in 0..ctl.max_steps {
        if t >= t_end {
            return Ok((t, y));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let hf = h.to_f64();
        if hf <= 1e-14 * t.to_f64().abs().max(span.abs() * 1e-6) {
            return Err(StepFailure {
                t,
                y,
                reason: format!("step size underflow (h = {hf:e})"),
            });
        }
        let t1 = if last { t_end } else { t + h };
        let tr = trial(&mut f, &tb, t, &y, &k1, h, t1, &groups, ctl);
        let err = tr.err;

        if err <= 1.0 {
            t = t1;
            y = tr.y1;
            k1 = tr.k7;
            if let Flow::Stop = observer(&tr.step) {
                return Ok((t, y));
            }
            // Lund-stabilised step size controller
            let beta = 0.04;
            let fac11 = err.max(1e-10).powf(0.2 - 0.75 * beta);
            let mut fac = (fac11 / fac_old.powf(beta) / 0.9).clamp(0.1, 5.0);
            fac_old = err.max(1e-4);
            if rejected {
                fac = fac.max(1.0);
            }
            rejected = false;
            h = T::from_f64((hf / fac).min(ctl.h_max));
        } else {
            rejected = true;
            let fac = if err.is_finite() {
                (err.powf(0.2) / 0.9).clamp(1.0, 10.0)
            } else {
                10.0
            };
            h = T::from_f64(hf / fac);
        }
    }
    Err(StepFailure {
        t,
        y,
        reason: format!("exceeded {} steps", ctl.max_steps),
    })
}

/// Integrates across the fixed breakpoints `mesh` without error control.
///
/// The result is a smooth function of `y0`, unlike the adaptive path whose
/// step sequence jumps as the data change.
pub fn integrate_mesh<T, const D: usize, F, O>(
    mut f: F,
    mesh: &[T],
    y0: [T; D],
    mut observer: O,
) -> Result<(T, [T; D]), StepFailure<T, D>>
where
    T: Real,
    F: FnMut(T, &[T; D]) -> [T; D],
    O: FnMut(&DenseStep<T, D>) -> Flow,
{
    let tb = Tableau::<T>::new();
    let ctl = StepControl::default();
    let Some(&t0) = mesh.first() else {
        return Err(StepFailure {
            t: T::zero(),
            y: y0,
            reason: "empty mesh".into(),
        });
    };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    for &t1 in &mesh[1..] {
        let tr = trial(&mut f, &tb, t, &y, &k1, t1 - t, t1, &[0; D], &ctl);
        if !tr.y1.iter().all(|v| v.is_finite()) {
            return Err(StepFailure {
                t,
                y,
                reason: "non-finite state on fixed mesh".into(),
            });
        }
        t = t1;
        y = tr.y1;
        k1 = tr.k7;
        if let Flow::Stop = observer(&tr.step) {
            break;
        }
    }
    Ok((t, y))
}
