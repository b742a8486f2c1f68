//! Negative-sampling SGD update kernels.
//!
//! The math is generic over the scalar type: training runs in `f32`, while
//! gradient checks instantiate the very same code in `f64` so that central
//! finite differences are not swamped by rounding error.

use crate::model::MatrixOf;

/// Scalar type the update kernels are generic over.
pub trait Real:
    Copy
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn exp(self) -> Self;
    fn ln_1p(self) -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln_1p(self) -> Self {
                self.ln_1p()
            }
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Rows of the output matrix, however they are stored. Hogwild training
/// hands out rows that may alias across threads; the single-threaded path
/// borrows them from a plain matrix.
pub trait OutputRows<F> {
    fn out_row(&mut self, word: u32) -> &mut [F];
}

impl<F: Copy + Default> OutputRows<F> for MatrixOf<F> {
    #[inline]
    fn out_row(&mut self, word: u32) -> &mut [F] {
        self.row_mut(word)
    }
}

#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::ZERO;
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `out += a * x`
#[inline]
pub fn axpy<F: Real>(out: &mut [F], a: F, x: &[F]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, &v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// `-ln sigma(x)` computed as `ln(1 + e^(-x))`, kept finite for large
/// magnitudes.
#[inline]
fn neg_log_sigmoid<F: Real>(x: F) -> F {
    let z = -x;
    if z > F::from_f64(30.0) {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// One negative-sampling step against a fixed hidden vector.
///
/// For the positive `target` and each word in `negatives` (label 0), the
/// output row is moved one SGD step along `-lr * dL/du`, and `dL/dh` is
/// accumulated into `grad_hidden` (which must come in zeroed). Output rows
/// see the pre-update hidden vector, and `grad_hidden` sees the pre-update
/// output rows, so the step is taken at a single point.
///
/// Returns the pre-update loss
/// `-ln sigma(u_t . h) - sum_k ln sigma(-u_k . h)`.
pub fn ns_step<F: Real, O: OutputRows<F> + ?Sized>(
    out: &mut O,
    hidden: &[F],
    grad_hidden: &mut [F],
    target: u32,
    negatives: &[u32],
    lr: F,
) -> F {
    let mut loss = one_output(out.out_row(target), hidden, grad_hidden, true, lr);
    for &neg in negatives {
        debug_assert_ne!(neg, target, "negative draw must exclude the target");
        loss += one_output(out.out_row(neg), hidden, grad_hidden, false, lr);
    }
    loss
}

#[inline]
fn one_output<F: Real>(row: &mut [F], hidden: &[F], grad_hidden: &mut [F], positive: bool, lr: F) -> F {
    let logit = dot(row, hidden);
    let sigma = F::ONE / (F::ONE + (-logit).exp());
    // dL/dlogit
    let g = if positive { sigma - F::ONE } else { sigma };
    axpy(grad_hidden, g, row);
    axpy(row, -(lr * g), hidden);
    if positive {
        neg_log_sigmoid(logit)
    } else {
        neg_log_sigmoid(-logit)
    }
}

/// Full skip-gram update on split matrices: `center` indexes the input
/// matrix, `target`/`negatives` the output matrix. Returns the pre-update
/// loss.
pub fn sgns_step<F: Real + Default, O: OutputRows<F> + ?Sized>(
    input: &mut MatrixOf<F>,
    out: &mut O,
    center: u32,
    target: u32,
    negatives: &[u32],
    lr: F,
    grad_hidden: &mut Vec<F>,
) -> F {
    let dim = input.dim();
    grad_hidden.clear();
    grad_hidden.resize(dim, F::ZERO);
    let loss = ns_step(out, input.row(center), grad_hidden, target, negatives, lr);
    axpy(input.row_mut(center), -lr, grad_hidden);
    loss
}

/// Full CBOW update: the hidden vector is the mean (or sum) of the context
/// input rows, and the hidden gradient is distributed back over them.
/// An empty context is a no-op with zero loss.
#[allow(clippy::too_many_arguments)]
pub fn cbow_step<F: Real + Default, O: OutputRows<F> + ?Sized>(
    input: &mut MatrixOf<F>,
    out: &mut O,
    context: &[u32],
    target: u32,
    negatives: &[u32],
    lr: F,
    mean: bool,
    hidden: &mut Vec<F>,
    grad_hidden: &mut Vec<F>,
) -> F {
    if context.is_empty() {
        return F::ZERO;
    }
    let dim = input.dim();
    hidden.clear();
    hidden.resize(dim, F::ZERO);
    for &c in context {
        axpy(hidden, F::ONE, input.row(c));
    }
    let scale = if mean {
        F::ONE / F::from_f64(context.len() as f64)
    } else {
        F::ONE
    };
    if mean {
        for h in hidden.iter_mut() {
            *h = *h * scale;
        }
    }

    grad_hidden.clear();
    grad_hidden.resize(dim, F::ZERO);
    let loss = ns_step(out, hidden, grad_hidden, target, negatives, lr);

    // d hidden / d v_c is `scale`, so each context row steps by
    // -lr * scale * grad_hidden.
    for &c in context {
        axpy(input.row_mut(c), -(lr * scale), grad_hidden);
    }
    loss
}

/// Loss of one (hidden, target, negatives) instance without updating
/// anything. Used by finite-difference checks.
pub fn ns_loss<F: Real + Default>(
    out: &MatrixOf<F>,
    hidden: &[F],
    target: u32,
    negatives: &[u32],
) -> F {
    let mut loss = neg_log_sigmoid(dot(out.row(target), hidden));
    for &neg in negatives {
        loss += neg_log_sigmoid(-dot(out.row(neg), hidden));
    }
    loss
}
