use std::f64::consts::PI;

use crate::{C64, Error, Result};

/// Length of the primary synchronization sequence.
pub const PSS_LENGTH: usize = 63;

/// Default root (LTE `N_ID^(2) = 0`).
pub const PSS_ROOT: u32 = 25;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zadoff-Chu sequence `x(n) = exp(−jπ·u·n(n+1)/L)`, `n = 0..L`.
pub fn zadoff_chu(root: u32, length: usize) -> Result<Vec<C64>> {
    if length == 0 || root == 0 || gcd(u64::from(root), length as u64) != 1 {
        return Err(Error::Parameter(format!(
            "Zadoff-Chu root {root} is not coprime with length {length}"
        )));
    }
    let l = length as u64;
    let u = u64::from(root);
    Ok((0..l)
        .map(|n| {
            // Reduce u·n(n+1) modulo 2L before scaling to keep the phase exact.
            let m = (u * ((n * (n + 1)) % (2 * l))) % (2 * l);
            C64::from_polar(1.0, -PI * m as f64 / l as f64)
        })
        .collect())
}

/// Circular autocorrelation `R(τ) = Σ_n x(n) x*(n+τ mod L)` for every shift.
pub fn circular_autocorrelation(x: &[C64]) -> Vec<C64> {
    let l = x.len();
    (0..l)
        .map(|tau| (0..l).map(|n| x[n] * x[(n + tau) % l].conj()).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_element_is_one() {
        for root in [1, 2, 25, 29, 34, 62] {
            let x = zadoff_chu(root, 63).unwrap();
            assert!((x[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
            assert_eq!(x.len(), 63);
        }
    }

    #[test]
    fn root_25_second_element() {
        let x = zadoff_chu(25, 63).unwrap();
        let expect = C64::from_polar(1.0, -PI * 50.0 / 63.0);
        assert!((x[1] - expect).norm() < 1e-14);
    }

    #[test]
    fn non_coprime_root_rejected() {
        for root in [3, 7, 9, 21, 63] {
            assert!(matches!(zadoff_chu(root, 63), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn constant_amplitude_zero_autocorrelation() {
        for root in [25, 29, 34] {
            let x = zadoff_chu(root, 63).unwrap();
            assert!(x.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
            let r = circular_autocorrelation(&x);
            assert!((r[0].norm() - 63.0).abs() < 1e-9);
            for v in &r[1..] {
                assert!(v.norm() < 1e-9, "{}", v.norm());
            }
        }
    }
}
