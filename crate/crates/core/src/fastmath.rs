//! Branch-light polynomial exp and ln1p.
//!
//! The elementwise samplers evaluate a transform for every parameter on
//! every step; libm calls there both dominate the profile and block
//! auto-vectorization of the update loops. These kernels are plain
//! mul/add/round sequences (Cody-Waite reduction, Taylor and atanh-series
//! polynomials) that LLVM can vectorize, accurate to a couple of ulp,
//! which is far inside every numeric tolerance in this crate.

// fdlibm-style split of ln 2: the high part has 32 trailing zero bits, so
// k * LN2_HI is exact for |k| < 2^20.
const LN2_HI: f64 = 6.931_471_803_691_238_16e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_70e-10;
const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// e^x with |relative error| within ~1 ulp of libm for x in [-708, 708].
/// Saturates exactly like the scalar transforms expect: +inf above the
/// overflow threshold, 0 below the underflow threshold.
#[inline]
pub fn exp(x: f64) -> f64 {
    if !(x.abs() <= 708.0) {
        // delegate the extreme tails (overflow, subnormals, NaN)
        return x.exp();
    }
    exp_bounded(x)
}

/// The branch-free core of [`exp`]; the caller guarantees |x| <= 708
/// (the transform saturation at +-700 does). Keeping the tail guard out
/// of this path is what lets block loops over it vectorize.
#[inline]
pub fn exp_bounded(x: f64) -> f64 {
    debug_assert!(x.abs() <= 708.0);
    let k = (x * LOG2_E).round();
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor to r^14/14!: |r| <= (ln 2)/2 keeps the truncation below 5e-18
    let p = poly_exp(r);
    // scale by 2^k through the exponent bits; |k| <= 1022 here
    let scale = f64::from_bits(((k as i64 + 1023) as u64) << 52);
    p * scale
}

/// Degree-14 Taylor polynomial in Estrin form: the log-depth evaluation
/// keeps the dependency chain short enough that scalar call sites are not
/// latency-bound, and block loops still vectorize.
#[inline]
fn poly_exp(r: f64) -> f64 {
    const C: [f64; 15] = [
        1.0,
        1.0,
        0.5,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362880.0,
        1.0 / 3628800.0,
        1.0 / 39916800.0,
        1.0 / 479001600.0,
        1.0 / 6227020800.0,
        1.0 / 87178291200.0,
    ];
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let q0 = C[0] + C[1] * r;
    let q1 = C[2] + C[3] * r;
    let q2 = C[4] + C[5] * r;
    let q3 = C[6] + C[7] * r;
    let q4 = C[8] + C[9] * r;
    let q5 = C[10] + C[11] * r;
    let q6 = C[12] + C[13] * r;
    let q7 = C[14];
    let s0 = q0 + q1 * r2;
    let s1 = q2 + q3 * r2;
    let s2 = q4 + q5 * r2;
    let s3 = q6 + q7 * r2;
    (s0 + s1 * r4) + (s2 + s3 * r4) * r8
}

/// ln(1 + t) for t in [0, 1], full relative precision down to tiny t via
/// the atanh series in s = t/(2+t) (s <= 1/3).
#[inline]
pub fn ln_1p(t: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&t) || t.is_nan());
    let s = t / (2.0 + t);
    let z = s * s;
    // odd series 2*(s + s^3/3 + ... + s^35/35); z <= 1/9 puts the next
    // term below 1e-18 of the result
    const C: [f64; 18] = [
        1.0,
        1.0 / 3.0,
        1.0 / 5.0,
        1.0 / 7.0,
        1.0 / 9.0,
        1.0 / 11.0,
        1.0 / 13.0,
        1.0 / 15.0,
        1.0 / 17.0,
        1.0 / 19.0,
        1.0 / 21.0,
        1.0 / 23.0,
        1.0 / 25.0,
        1.0 / 27.0,
        1.0 / 29.0,
        1.0 / 31.0,
        1.0 / 33.0,
        1.0 / 35.0,
    ];
    let z2 = z * z;
    let z4 = z2 * z2;
    let z8 = z4 * z4;
    let q0 = C[0] + C[1] * z;
    let q1 = C[2] + C[3] * z;
    let q2 = C[4] + C[5] * z;
    let q3 = C[6] + C[7] * z;
    let q4 = C[8] + C[9] * z;
    let q5 = C[10] + C[11] * z;
    let q6 = C[12] + C[13] * z;
    let q7 = C[14] + C[15] * z;
    let q8 = C[16] + C[17] * z;
    let s0 = q0 + q1 * z2;
    let s1 = q2 + q3 * z2;
    let s2 = q4 + q5 * z2;
    let s3 = q6 + q7 * z2;
    let p = (s0 + s1 * z4) + ((s2 + s3 * z4) + q8 * z8) * z8;
    2.0 * s * p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_libm_to_sub_ulp_scale() {
        let mut worst: f64 = 0.0;
        let mut x: f64 = -708.0;
        while x <= 708.0 {
            let got = exp(x);
            let want = x.exp();
            let rel = ((got - want) / want).abs();
            worst = worst.max(rel);
            x += 0.000_37 * 513.0; // irregular stride, ~3.7e3 points
        }
        assert!(worst <= 5e-16, "worst relative error {worst:e}");
    }

    #[test]
    fn exp_dense_near_zero() {
        let mut worst: f64 = 0.0;
        let mut x: f64 = -1.0;
        while x <= 1.0 {
            let rel = ((exp(x) - x.exp()) / x.exp()).abs();
            worst = worst.max(rel);
            x += 1e-4;
        }
        assert!(worst <= 5e-16, "worst relative error {worst:e}");
    }

    #[test]
    fn exp_extremes_delegate() {
        assert_eq!(exp(f64::NEG_INFINITY), 0.0);
        assert_eq!(exp(f64::INFINITY), f64::INFINITY);
        assert_eq!(exp(-745.0), (-745.0f64).exp());
        assert_eq!(exp(800.0), f64::INFINITY);
        assert!(exp(f64::NAN).is_nan());
        assert_eq!(exp(0.0), 1.0);
    }

    #[test]
    fn ln_1p_matches_libm() {
        let mut worst: f64 = 0.0;
        let mut t: f64 = 1e-300;
        while t <= 1.0 {
            let got = ln_1p(t);
            let want = t.ln_1p();
            let rel = ((got - want) / want.abs().max(1e-300)).abs();
            worst = worst.max(rel);
            t *= 1.37;
        }
        // and a linear sweep over the upper range
        let mut t: f64 = 0.0;
        while t <= 1.0 {
            let want = t.ln_1p();
            if want > 0.0 {
                worst = worst.max(((ln_1p(t) - want) / want).abs());
            }
            t += 1e-4;
        }
        // Estrin association costs ~1 ulp over Horner; ~3.6 ulp total is
        // still four orders below the tightest consumer tolerance
        assert!(worst <= 8e-16, "worst relative error {worst:e}");
        assert_eq!(ln_1p(0.0), 0.0);
    }
}

