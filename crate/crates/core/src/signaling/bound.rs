use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N / (4^n + N - 1)` as an exact ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub numerator: u64,
    pub denominator: u64,
}

impl Bound {
    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.numerator, self.denominator)
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

fn four_pow(n: usize) -> Result<u64> {
    if n == 0 || n > 30 {
        return Err(Error::IndexOutOfRange { index: n, min: 1, max: 30 });
    }
    Ok(1u64 << (2 * n))
}

/// Upper bound on the success probability of `n`-qubit PBT with `N` ports,
/// in lowest terms.
pub fn bound(n: usize, ports: usize) -> Result<Bound> {
    if ports == 0 {
        return Err(Error::IndexOutOfRange { index: 0, min: 1, max: usize::MAX });
    }
    let r = Ratio::new(ports as u64, four_pow(n)? + ports as u64 - 1);
    Ok(Bound { numerator: *r.numer(), denominator: *r.denom() })
}

/// `N / (N + 3)`, the optimal qubit success probability.
pub fn p_max_qubit(ports: usize) -> f64 {
    ports as f64 / (ports as f64 + 3.0)
}

/// `(N / (N + 3))^n`: running qubit-optimal PBT on each of `n` qubits.
pub fn per_qubit_power(n: usize, ports: usize) -> f64 {
    p_max_qubit(ports).powi(n as i32)
}

/// `f_{n,N}(R)` with its range flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FOfR {
    pub value: f64,
    /// `0 <= R <= 4^-n N`.
    pub feasible: bool,
    /// `R = 4^-n N`, where `f` is defined by its limit `0`.
    pub boundary: bool,
}

/// `(1 + (4^n - 1) / (N - 4^n R))^-1`.
pub fn f_of_r(n: usize, ports: usize, r: f64) -> Result<FOfR> {
    let four = four_pow(n)? as f64;
    let gap = ports as f64 - four * r;
    let feasible = r >= 0.0 && gap >= 0.0;
    if gap == 0.0 {
        return Ok(FOfR { value: 0.0, feasible, boundary: true });
    }
    Ok(FOfR { value: 1.0 / (1.0 + (four - 1.0) / gap), feasible, boundary: false })
}

/// Exact `f_{n,N}(R)`; `None` at the boundary `R = 4^-n N`.
pub fn f_of_r_exact(n: usize, ports: usize, r: Ratio<i128>) -> Result<Option<Ratio<i128>>> {
    let four = four_pow(n)? as i128;
    let gap = Ratio::from_integer(ports as i128) - r * four;
    if gap == Ratio::from_integer(0) {
        return Ok(None);
    }
    let one = Ratio::from_integer(1);
    Ok(Some(one / (one + Ratio::from_integer(four - 1) / gap)))
}
