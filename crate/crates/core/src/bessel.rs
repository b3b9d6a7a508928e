//! Integer-order Bessel functions of the first kind.

/// `J_m(x)` for integer `m` by Miller's backward recurrence, normalized
/// with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j(m: i32, x: f64) -> f64 {
    let order = m.unsigned_abs() as usize;
    let sign = if m < 0 && order % 2 == 1 { -1.0 } else { 1.0 };
    let x_abs = x.abs();
    let xsign = if x < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
    if x_abs == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    // Start well above both the order and the argument.
    let start = 2 * ((order.max(x_abs as usize) + 20 + (40.0 * x_abs.sqrt()) as usize) / 2);
    let mut next = 0.0f64; // J_{k+1}
    let mut cur = 1e-300f64; // J_k
    let mut norm = 0.0f64;
    let mut result = 0.0f64;
    for k in (0..=start).rev() {
        if k == order {
            result = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x_abs * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            result *= 1e-250;
        }
    }
    sign * xsign * result / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series `sum_k (-1)^k (x/2)^(2k+m) / (k! (k+m)!)`.
    fn series(m: u32, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(m as i32) / (1..=m).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..80 {
            term *= -(x / 2.0).powi(2) / (k as f64 * (k + m) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn matches_series() {
        for &x in &[0.1, 0.5, 1.0, 2.4, 2.404825557695773, 5.0, 9.7] {
            for m in 0..8 {
                let a = bessel_j(m as i32, x);
                let b = series(m, x);
                assert!((a - b).abs() < 1e-11, "m={m} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn negative_orders_and_zero() {
        for m in 1..6 {
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((bessel_j(-m, 2.4) - s * bessel_j(m, 2.4)).abs() < 1e-15);
        }
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
    }

    #[test]
    fn first_zero_of_j0() {
        assert!(bessel_j(0, 2.404825557695773).abs() < 1e-14);
        let j0 = series(0, 2.4);
        assert!(j0.abs() <= 0.0026, "series oracle J0(2.4) = {j0}");
        assert!((bessel_j(0, 2.4) - j0).abs() < 1e-14);
    }
}
