//! The integer sequences attached to the spin-`n/2` system.
//!
//! `d_m` is the dimension of the degree-`m` fiber and `mu_m = d_m d_{m-1} / d_1`
//! the squared norm constant of the lifting maps. Everything here is exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::report::IdentityReport;

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Unsupported("n must be at least 1".into()));
    }
    Ok(())
}

/// `d_0, ..., d_{m_max}` with `d_0 = 1`, `d_1 = n + 1`,
/// `d_m = d_1 d_{m-1} - d_{m-2}`.
pub fn dims(n: usize, m_max: usize) -> Result<Vec<BigInt>> {
    check_n(n)?;
    let d1 = BigInt::from(n + 1);
    let mut d = vec![BigInt::one()];
    let mut prev = BigInt::zero();
    for _ in 0..m_max {
        let next = &d1 * d.last().unwrap() - &prev;
        prev = d.last().unwrap().clone();
        d.push(next);
    }
    Ok(d)
}

/// `mu_0, ..., mu_{m_max}` with `mu_0 = 0`.
pub fn mu(n: usize, m_max: usize) -> Result<Vec<BigInt>> {
    let d = dims(n, m_max)?;
    let d1 = BigInt::from(n + 1);
    let mut out = vec![BigInt::zero()];
    for m in 1..=m_max {
        let prod = &d[m] * &d[m - 1];
        let q = &prod / &d1;
        if &q * &d1 != prod {
            return Err(Error::Consistency(format!(
                "d_1 does not divide d_{m} d_{}",
                m - 1
            )));
        }
        out.push(q);
    }
    Ok(out)
}

/// The smaller root of `x^2 - (n+1) x + 1`, which is the limit of `d_{m-1}/d_m`.
pub fn gamma(n: usize) -> f64 {
    let a = (n + 1) as f64;
    // Written to avoid cancellation: product of the roots is 1.
    2.0 / (a + (a * a - 4.0).max(0.0).sqrt())
}

/// Floating-point view of `d_m` with `d_{-1} = 0`, used by the numerical code.
#[derive(Clone, Debug)]
pub struct DimTable {
    n: usize,
    d: Vec<f64>,
}

impl DimTable {
    pub fn new(n: usize, m_max: usize) -> Result<Self> {
        let d = dims(n, m_max)?
            .iter()
            .map(|x| x.to_string().parse::<f64>().expect("integer parses as f64"))
            .collect();
        Ok(DimTable { n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_index(&self) -> usize {
        self.d.len() - 1
    }

    /// `d_m` for `m >= -1`.
    pub fn d(&self, m: isize) -> f64 {
        match m {
            -1 => 0.0,
            m if m >= 0 => self.d[m as usize],
            _ => panic!("d_m requested for m = {m}"),
        }
    }

    /// `d_m` as an exact `usize`, for `m >= 0`.
    pub fn dim(&self, m: usize) -> usize {
        self.d[m] as usize
    }

    /// `mu_m = d_m d_{m-1} / d_1`.
    pub fn mu(&self, m: usize) -> f64 {
        self.d(m as isize) * self.d(m as isize - 1) / self.d(1)
    }
}

/// Exact checks of the sequence identities for `m <= m_max`.
pub fn check_identities(n: usize, m_max: usize) -> Result<Vec<IdentityReport>> {
    let d = dims(n, m_max + 2)?;
    let mu = mu(n, m_max + 1)?;
    let dd = |m: isize| -> BigInt {
        if m < 0 {
            BigInt::zero()
        } else {
            d[m as usize].clone()
        }
    };
    let mut out = Vec::new();

    let mut ok = true;
    for m in 0..=m_max as isize {
        ok &= dd(m) * dd(m) - dd(m - 1) * dd(m + 1) == BigInt::one();
    }
    out.push(
        IdentityReport::exact("seq_cassini", ok)
            .with("n", n)
            .with("m_max", m_max),
    );

    let mut ok = true;
    for k in 0..=m_max as isize {
        for m in 0..=(m_max as isize - k) {
            let mut l = 0;
            while k + m + 2 * l <= m_max as isize {
                let lhs: BigInt = (0..=l).map(|i| dd(k + m + 2 * i)).sum();
                ok &= lhs == dd(k + l) * dd(m + l) - dd(k - 1) * dd(m - 1);
                l += 1;
            }
        }
    }
    out.push(
        IdentityReport::exact("seq_sum_product", ok)
            .with("n", n)
            .with("m_max", m_max),
    );

    let mut ok = true;
    for m in 0..=m_max {
        ok &= &d[m] * &d[m] == &mu[m] + &mu[m + 1];
    }
    out.push(
        IdentityReport::exact("seq_square_mu", ok)
            .with("n", n)
            .with("m_max", m_max),
    );

    let c = BigInt::from((n + 1) * (n + 1) - 2);
    let mut ok = true;
    for m in 1..m_max {
        ok &= mu[m + 1] == &c * &mu[m] - &mu[m - 1] + BigInt::one();
    }
    out.push(
        IdentityReport::exact("seq_mu_recursion", ok)
            .with("n", n)
            .with("m_max", m_max),
    );

    let mut ok = true;
    let mut acc = BigRational::zero();
    for m in 1..=m_max {
        acc += BigRational::new(BigInt::one(), &d[m - 1] * &d[m]);
        ok &= acc == BigRational::new(d[m - 1].clone(), d[m].clone());
    }
    out.push(
        IdentityReport::exact("seq_telescoping", ok)
            .with("n", n)
            .with("m_max", m_max),
    );

    let g = gamma(n);
    let a = (n + 1) as f64;
    out.push(
        IdentityReport::new("seq_gamma_root", (g * g - a * g + 1.0).abs(), 1e-12).with("n", n),
    );

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        let d: Vec<String> = dims(2, 5).unwrap().iter().map(|x| x.to_string()).collect();
        assert_eq!(d, ["1", "3", "8", "21", "55", "144"]);
        let d: Vec<String> = dims(1, 4).unwrap().iter().map(|x| x.to_string()).collect();
        assert_eq!(d, ["1", "2", "3", "4", "5"]);
        let m: Vec<String> = mu(2, 4).unwrap().iter().map(|x| x.to_string()).collect();
        assert_eq!(m, ["0", "1", "8", "56", "385"]);
    }

    #[test]
    fn n_zero_is_rejected() {
        assert!(dims(0, 3).is_err());
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(1) - 1.0).abs() < 1e-15);
        assert!((gamma(2) - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn table_handles_minus_one() {
        let t = DimTable::new(3, 4).unwrap();
        assert_eq!(t.d(-1), 0.0);
        assert_eq!(t.dim(3), 56);
        assert_eq!(t.mu(1), 1.0);
    }

    #[test]
    fn identities_hold() {
        for n in 1..=4 {
            for r in check_identities(n, 20).unwrap() {
                assert!(r.pass, "{r}");
            }
        }
    }
}
