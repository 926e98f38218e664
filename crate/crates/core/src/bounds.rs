//! Probability that random documents realize a query by chance.
//!
//! With a dictionary of `|D|` equally likely document symbols and a query of
//! `N` components, the unordered bound is `C(|D|, N) · |D|^(−N)`; requiring
//! the components in query order divides it by `N!`. Both are evaluated as
//! exact rationals.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn binomial(n: u64, k: u64) -> BigUint {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn check(dictionary: u64, components: u64) -> Result<()> {
    if components == 0 || dictionary == 0 {
        return Err(Error::Argument("dictionary and component counts must be >= 1".into()));
    }
    if components > dictionary {
        return Err(Error::Argument(format!(
            "{components} components exceed a dictionary of {dictionary}"
        )));
    }
    Ok(())
}

/// Exact chance-match bound.
pub fn random_match_bound(dictionary: u64, components: u64, ordered: bool) -> Result<BigRational> {
    check(dictionary, components)?;
    let mut den = BigUint::from(dictionary).pow(components as u32);
    if ordered {
        den *= factorial(components);
    }
    let num = binomial(dictionary, components);
    Ok(BigRational::new(num.into(), den.into()))
}

/// The large-dictionary approximation `exp(−N log(|D|/Δ))` for a window of
/// `Δ` documents, divided by `N!` when ordered.
pub fn windowed_bound(dictionary: u64, components: u64, window: u64, ordered: bool) -> Result<f64> {
    check(dictionary, components)?;
    if window == 0 {
        return Err(Error::Argument("window must be >= 1".into()));
    }
    let n = components as f64;
    let mut p = (-n * (dictionary as f64 / window as f64).ln()).exp();
    if ordered {
        p /= (1..=components).map(|k| k as f64).product::<f64>();
    }
    Ok(p)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn ten_choose_two() {
        let b = random_match_bound(10, 2, false).unwrap();
        assert_eq!(b, BigRational::new(BigInt::from(45), BigInt::from(100)));
        assert_eq!(to_f64(&b), 0.45);
        let o = random_match_bound(10, 2, true).unwrap();
        assert_eq!(o, b / BigInt::from(2));
    }

    #[test]
    fn single_component_is_order_free() {
        for d in 1..20 {
            assert_eq!(
                random_match_bound(d, 1, false).unwrap(),
                random_match_bound(d, 1, true).unwrap()
            );
        }
    }

    #[test]
    fn rejects_oversized_queries() {
        assert!(random_match_bound(3, 4, false).is_err());
        assert!(random_match_bound(3, 0, false).is_err());
        assert!(windowed_bound(3, 1, 0, false).is_err());
    }

    #[test]
    fn windowed_form() {
        let p = windowed_bound(20, 3, 10, false).unwrap();
        assert!((p - 0.125).abs() < 1e-12);
        assert!((windowed_bound(20, 3, 10, true).unwrap() - 0.125 / 6.0).abs() < 1e-12);
    }
}
