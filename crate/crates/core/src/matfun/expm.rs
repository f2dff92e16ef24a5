//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! of degree 3, 5, 7, 9 or 13, selected from the 1-norm of the argument.

use nalgebra::DMatrix;

use super::{ensure_finite, ensure_square, norm1, Scalar};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Past this many squarings the result is not representable anyway.
const MAX_SQUARINGS: i32 = 1100;

/// Matrix exponential `e^A`.
///
/// Works for any square matrix, diagonalizable or not. Returns
/// [`Error::Overflow`] when the result cannot be represented in double
/// precision.
pub fn mat_exp<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = ensure_square(a, "exponent")?;
    ensure_finite(a, "exponent")?;
    let norm = norm1(a);
    let ident = DMatrix::<T>::identity(n, n);
    if norm == 0.0 {
        return Ok(ident);
    }

    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return finish(pade_low(a, coeffs, &ident), 0, norm);
        }
    }

    let s = libm::ceil(libm::log2(norm / THETA_13)).max(0.0) as i32;
    if s > MAX_SQUARINGS {
        return Err(Error::Overflow { norm });
    }
    let scaled = a * T::from_real(libm::ldexp(1.0, -s));
    finish(pade13(&scaled, &ident), s, norm)
}

fn finish<T: Scalar>(
    parts: (DMatrix<T>, DMatrix<T>),
    squarings: i32,
    norm: f64,
) -> Result<DMatrix<T>> {
    let (u, v) = parts;
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or(Error::NumericalBreakdown {
            stage: "Pade denominator",
            step: None,
        })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.modulus().is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}

// Returns (U, V) with U odd and V even in A.
fn pade_low<T: Scalar>(
    a: &DMatrix<T>,
    b: &[f64],
    ident: &DMatrix<T>,
) -> (DMatrix<T>, DMatrix<T>) {
    let a2 = a * a;
    let mut powers = alloc::vec![ident.clone(), a2.clone()];
    let half = (b.len() - 1) / 2;
    for k in 2..=half {
        let next = &powers[k - 1] * &a2;
        powers.push(next);
    }
    let mut u_inner = DMatrix::<T>::zeros(a.nrows(), a.ncols());
    let mut v = DMatrix::<T>::zeros(a.nrows(), a.ncols());
    for (k, p) in powers.iter().enumerate() {
        u_inner += p * T::from_real(b[2 * k + 1]);
        v += p * T::from_real(b[2 * k]);
    }
    (a * u_inner, v)
}

fn pade13<T: Scalar>(a: &DMatrix<T>, ident: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let c = |i: usize| T::from_real(B13[i]);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * c(13) + &a4 * c(11) + &a2 * c(9);
    let u_inner = &a6 * u_hi + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + ident * c(1);
    let v_hi = &a6 * c(12) + &a4 * c(10) + &a2 * c(8);
    let v = &a6 * v_hi + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + ident * c(0);
    (a * u_inner, v)
}
