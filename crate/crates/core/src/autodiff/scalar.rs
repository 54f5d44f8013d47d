//! Scalar types the tape is generic over.
//!
//! Running the tape with [`f64`] gives values and gradients. Running it with
//! [`Dual`] carries a directional derivative through every value, so the
//! forward pass yields a Jacobian-vector product and the reverse pass yields
//! the directional derivative of the gradient, i.e. a Hessian-vector product.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    fn from_f64(x: f64) -> Self;
    /// The primal (value) part.
    fn re(self) -> f64;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn scale(self, f: f64) -> Self {
        self * Self::from_f64(f)
    }

    /// `c += a · b` where `a` is `m×k` and `b` is `k×n`, both addressed through
    /// (row stride, column stride) pairs, and `c` is a contiguous row-major `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        c: &mut [Self],
    );
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        (rsa, csa): (usize, usize),
        b: &[f64],
        (rsb, csb): (usize, usize),
        c: &mut [f64],
    ) {
        if m == 0 || n == 0 || k == 0 {
            return;
        }
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
        assert!(c.len() >= m * n);
        // SAFETY: the asserts above bound every index the kernel touches.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa as isize,
                csa as isize,
                b.as_ptr(),
                rsb as isize,
                csb as isize,
                1.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

/// First-order dual number `re + du·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub const fn new(re: f64, du: f64) -> Self {
        Dual { re, du }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.du + o.du)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.du - o.du)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.du + self.du * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let q = self.re / o.re;
        Dual::new(q, (self.du - q * o.du) / o.re)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.du)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.re += o.re;
        self.du += o.du;
    }
}

impl Scalar for Dual {
    fn from_f64(x: f64) -> Self {
        Dual::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual::new(t, self.du * (1.0 - t * t))
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.du / (2.0 * s))
    }
    fn abs(self) -> Self {
        if self.re < 0.0 {
            -self
        } else {
            self
        }
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.du.is_finite()
    }
    fn scale(self, f: f64) -> Self {
        Dual::new(self.re * f, self.du * f)
    }

    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Dual],
        (rsa, csa): (usize, usize),
        b: &[Dual],
        (rsb, csb): (usize, usize),
        c: &mut [Dual],
    ) {
        if m == 0 || n == 0 || k == 0 {
            return;
        }
        // Split into primal/tangent planes and reuse the f64 kernel:
        // (A + εA')(B + εB') = AB + ε(AB' + A'B).
        let split = |x: &[Dual], rows: usize, cols: usize, rs: usize, cs: usize| {
            let mut re = Vec::with_capacity(rows * cols);
            let mut du = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for j in 0..cols {
                    let v = x[i * rs + j * cs];
                    re.push(v.re);
                    du.push(v.du);
                }
            }
            (re, du)
        };
        let (a_re, a_du) = split(a, m, k, rsa, csa);
        let (b_re, b_du) = split(b, k, n, rsb, csb);
        let mut c_re: Vec<f64> = c[..m * n].iter().map(|v| v.re).collect();
        let mut c_du: Vec<f64> = c[..m * n].iter().map(|v| v.du).collect();
        f64::gemm_acc(m, k, n, &a_re, (k, 1), &b_re, (n, 1), &mut c_re);
        f64::gemm_acc(m, k, n, &a_re, (k, 1), &b_du, (n, 1), &mut c_du);
        f64::gemm_acc(m, k, n, &a_du, (k, 1), &b_re, (n, 1), &mut c_du);
        for (dst, (re, du)) in c.iter_mut().zip(c_re.into_iter().zip(c_du)) {
            *dst = Dual::new(re, du);
        }
    }
}
