use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Problem dimensions: `users` (M), `subchannels` (N) and the per-subchannel
/// quota (A). Valid dimensions satisfy `M = A * N` and `M >= N >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub users: usize,
    pub subchannels: usize,
    pub quota: usize,
}

impl Dims {
    pub fn new(users: usize, subchannels: usize, quota: usize) -> Result<Self> {
        let d = Self { users, subchannels, quota };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subchannels == 0 || self.quota == 0 {
            return Err(Error::Dimension(format!("{self}: N and A must be at least 1")));
        }
        if self.users != self.quota * self.subchannels {
            return Err(Error::Dimension(format!(
                "{self}: M = {} but A * N = {}",
                self.users,
                self.quota * self.subchannels
            )));
        }
        Ok(())
    }

    /// Length of a flattened effective-gain feature row.
    pub fn feature_len(&self) -> usize {
        self.users * self.subchannels
    }

    /// Number of feasible assignments, `M! / (A!)^N`, or `None` on overflow.
    pub fn assignment_count(&self) -> Option<u128> {
        // Product of binomials C(M - kA, A) for k = 0..N avoids the big factorials.
        let mut total: u128 = 1;
        let mut remaining = self.users as u128;
        for _ in 0..self.subchannels {
            total = total.checked_mul(binomial(remaining, self.quota as u128)?)?;
            remaining -= self.quota as u128;
        }
        Some(total)
    }
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.users, self.subchannels, self.quota)
    }
}

impl FromStr for Dims {
    type Err = Error;

    /// Parses `MxNxA`, e.g. `4x2x2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected MxNxA, got {s:?}")));
        }
        let mut v = [0usize; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| Error::Parse(format!("bad dimension {p:?} in {s:?}")))?;
        }
        Self::new(v[0], v[1], v[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let d: Dims = "4x2x2".parse().unwrap();
        assert_eq!(d, Dims { users: 4, subchannels: 2, quota: 2 });
        assert_eq!(d.to_string(), "4x2x2");
        assert!(matches!("3x2x2".parse::<Dims>(), Err(Error::Dimension(_))));
        assert!(matches!("3x2".parse::<Dims>(), Err(Error::Parse(_))));
        assert!(Dims::new(0, 0, 1).is_err());
    }

    #[test]
    fn multinomial_counts() {
        assert_eq!(Dims::new(2, 2, 1).unwrap().assignment_count(), Some(2));
        assert_eq!(Dims::new(4, 2, 2).unwrap().assignment_count(), Some(6));
        assert_eq!(Dims::new(8, 4, 2).unwrap().assignment_count(), Some(2520));
        assert_eq!(Dims::new(10, 5, 2).unwrap().assignment_count(), Some(113_400));
        assert_eq!(Dims::new(12, 6, 2).unwrap().assignment_count(), Some(7_484_400));
    }
}
