//! Integer-order Bessel functions of the first kind.
//!
//! Only what the kick coefficients and the resonance oracles need: a whole
//! ladder `J_0(x) ..= J_n(x)` at once, computed with Miller's backward
//! recurrence and normalized by `J_0 + 2 Σ J_2k = 1`. Backward recurrence is
//! stable for the minimal solution, so values deep in the decaying tail keep
//! their relative accuracy until they underflow.

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

/// `J_0(x), J_1(x), ..., J_{n_max}(x)` for real `x`.
pub fn bessel_j_orders(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let n_top = n_max.max(ax.ceil() as usize);
    let mut start = n_top + 2 * ((40.0 * n_top as f64).sqrt().ceil() as usize) + 20;
    if start % 2 == 1 {
        start += 1;
    }

    let mut above = 0.0_f64; // j_{k+1}
    let mut current = 1.0_f64; // j_k
    let mut norm = 0.0_f64;
    let mut k = start;
    loop {
        if k <= n_max {
            out[k] = current;
        }
        if k % 2 == 0 {
            norm += if k == 0 { current } else { 2.0 * current };
        }
        if k == 0 {
            break;
        }
        let below = (2.0 * k as f64 / ax) * current - above;
        above = current;
        current = below;
        k -= 1;
        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            norm *= RESCALE_BY;
            let hi = n_max.min(start);
            if k < hi {
                for v in &mut out[k + 1..=hi] {
                    *v *= RESCALE_BY;
                }
            }
        }
    }

    for v in &mut out {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for any integer order, using `J_{-n} = (-1)^n J_n`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_orders(x, m)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from mpmath at 40 digits.
    const REFERENCE: &[(usize, f64, f64)] = &[
        (0, 0.5, 0.9384698072408129),
        (1, 0.5, 0.24226845767487389),
        (5, 0.5, 8.0536272413574741e-6),
        (10, 0.5, 2.6131773608228031e-13),
        (40, 0.5, 1.0122626959003594e-72),
        (80, 0.5, 9.5529579464319759e-168),
        (0, 3.0, -0.26005195490193344),
        (1, 3.0, 0.33905895852593646),
        (2, 3.0, 0.48609126058589108),
        (5, 3.0, 0.043028434877047584),
        (10, 3.0, 1.2928351645715884e-5),
        (20, 3.0, 1.2275946737992986e-15),
        (80, 3.0, 1.6615263079590106e-105),
        (150, 3.0, 4.4701680977647104e-237),
        (0, 15.0, -0.014224472826780773),
        (1, 15.0, 0.20510403861352276),
        (10, 15.0, -0.090071811047659054),
        (20, 15.0, 0.0073602340792234853),
        (40, 15.0, 3.0535352304890071e-14),
        (150, 15.0, 2.18935063594689e-132),
        (0, 150.0, -0.00077409037539429125),
        (1, 150.0, -0.06514516365772736),
        (2, 150.0, -9.4511806708740224e-5),
        (20, 150.0, 0.063447240953861973),
        (80, 150.0, 0.0081389599136467573),
        (150, 150.0, 0.08418505788340285),
        (200, 150.0, 8.0577021983968538e-14),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for &(n, x, expected) in REFERENCE {
            let got = bessel_j_orders(x, 200)[n];
            let err = ((got - expected) / expected).abs();
            assert!(err < 1e-12, "J_{n}({x}) = {got:e}, expected {expected:e}, rel err {err:e}");
        }
    }

    #[test]
    fn ladder_does_not_depend_on_requested_length() {
        let short = bessel_j_orders(3.0, 10);
        let long = bessel_j_orders(3.0, 4000);
        for n in 0..=10 {
            assert!((short[n] - long[n]).abs() <= 1e-15 * short[n].abs().max(1e-300));
        }
        assert!(long[4000] == 0.0 || long[4000].is_subnormal());
    }

    #[test]
    fn negative_order_and_argument_signs() {
        let j3 = bessel_j(3, 2.0);
        assert_eq!(bessel_j(-3, 2.0), -j3);
        assert_eq!(bessel_j(-4, 2.0), bessel_j(4, 2.0));
        assert!((bessel_j(3, -2.0) + j3).abs() < 1e-16);
    }

    #[test]
    fn zero_argument() {
        let v = bessel_j_orders(0.0, 4);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn neumann_sum_of_squares() {
        // J_0² + 2 Σ J_n² = 1
        for x in [0.1, 2.5, 40.0, 300.0] {
            let v = bessel_j_orders(x, 600);
            let s: f64 = v[0] * v[0] + 2.0 * v[1..].iter().map(|j| j * j).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-13, "x = {x}: {s}");
        }
    }
}
