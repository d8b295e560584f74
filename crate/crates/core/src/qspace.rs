//! Special Q-points with real target: sorted Q-tuples carrying a sign, with
//! the identification of `(Q[[p]], +)` and `(Q[[p]], -)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used only when detecting a collapsed point.
pub const COLLAPSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Sign of a real number, zero mapping to `Plus`.
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Sorts `values` in place and returns the canonical sign. Values whose
/// spread is within [`COLLAPSE_TOL`] are snapped to their mean and get `Plus`.
pub fn canonicalize(values: &mut [f64], sign: Sign) -> Sign {
    values.sort_by(|a, b| a.total_cmp(b));
    if values.is_empty() {
        return Sign::Plus;
    }
    let lo = values[0];
    let hi = values[values.len() - 1];
    if hi - lo <= COLLAPSE_TOL {
        if hi != lo {
            let m = mean(values);
            values.iter_mut().for_each(|v| *v = m);
        }
        Sign::Plus
    } else {
        sign
    }
}

/// True when every entry is identical.
pub fn is_collapsed(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Arithmetic mean, returning the common value exactly for collapsed input.
pub fn mean(values: &[f64]) -> f64 {
    if is_collapsed(values) {
        return values.first().copied().unwrap_or(0.0);
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// `|T ⊖ η(T)|²` on a slice.
pub fn centered_norm2(values: &[f64]) -> f64 {
    let e = mean(values);
    values.iter().map(|v| (v - e) * (v - e)).sum()
}

/// Squared sorted-matching distance between two sorted slices.
pub fn g2_sorted(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared `Gs` distance on raw canonical slices.
pub fn gs2_raw(a: &[f64], sa: Sign, b: &[f64], sb: Sign) -> f64 {
    if sa == sb {
        return g2_sorted(a, b);
    }
    let q = a.len() as f64;
    let de = mean(a) - mean(b);
    centered_norm2(a) + centered_norm2(b) + q * de * de
}

/// Squared length distance on raw canonical slices. Across a sign change it
/// is the length of the shortest path through a collapsed point.
pub fn intrinsic2_raw(a: &[f64], sa: Sign, b: &[f64], sb: Sign) -> f64 {
    if sa == sb {
        return g2_sorted(a, b);
    }
    let q = a.len() as f64;
    let de = mean(a) - mean(b);
    let s = centered_norm2(a).sqrt() + centered_norm2(b).sqrt();
    s * s + q * de * de
}

/// A special Q-point: sorted values plus a sign, stored in canonical form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QPoint {
    values: Vec<f64>,
    sign: Sign,
}

impl PartialEq for QPoint {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && self.values == other.values
    }
}

impl QPoint {
    pub fn new(mut values: Vec<f64>, sign: Sign) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("a Q-point needs q >= 1 values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Q-point values must be finite".into()));
        }
        let sign = canonicalize(&mut values, sign);
        Ok(QPoint { values, sign })
    }

    /// Builds from a slice that is already canonical. Used by the field store.
    pub(crate) fn from_canonical(values: &[f64], sign: Sign) -> Self {
        QPoint {
            values: values.to_vec(),
            sign,
        }
    }

    /// `Q[[c]]`.
    pub fn collapsed(q: usize, c: f64) -> Self {
        QPoint {
            values: vec![c; q],
            sign: Sign::Plus,
        }
    }

    pub fn zero(q: usize) -> Self {
        Self::collapsed(q, 0.0)
    }

    pub fn q(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn is_collapsed(&self) -> bool {
        is_collapsed(&self.values)
    }

    pub fn eta(&self) -> f64 {
        mean(&self.values)
    }

    pub fn ominus(&self, c: f64) -> QPoint {
        let mut v: Vec<f64> = self.values.iter().map(|x| x - c).collect();
        let sign = canonicalize(&mut v, self.sign);
        QPoint { values: v, sign }
    }

    pub fn with_sign(&self, sign: Sign) -> QPoint {
        let mut v = self.values.clone();
        let sign = canonicalize(&mut v, sign);
        QPoint { values: v, sign }
    }

    pub fn flip_sign(&self) -> QPoint {
        self.with_sign(self.sign.flip())
    }

    pub fn scale(&self, lambda: f64) -> QPoint {
        let mut v: Vec<f64> = self.values.iter().map(|x| x * lambda).collect();
        let sign = canonicalize(&mut v, self.sign);
        QPoint { values: v, sign }
    }

    /// `|u|² = Gs(u, Q[[0]])²`.
    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn pos_part(&self) -> ClassicalQPoint {
        match self.sign {
            Sign::Plus => ClassicalQPoint {
                values: self.values.clone(),
            },
            Sign::Minus => ClassicalQPoint {
                values: vec![self.eta(); self.q()],
            },
        }
    }

    pub fn neg_part(&self) -> ClassicalQPoint {
        match self.sign {
            Sign::Minus => ClassicalQPoint {
                values: self.values.clone(),
            },
            Sign::Plus => ClassicalQPoint {
                values: vec![self.eta(); self.q()],
            },
        }
    }
}

impl fmt::Display for QPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.sign.symbol())?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v:?}")?;
        }
        Ok(())
    }
}

impl FromStr for QPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("missing ':' in Q-point `{s}`")))?;
        let sign = match head {
            "+" => Sign::Plus,
            "-" | "\u{2212}" => Sign::Minus,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "bad sign `{head}` in Q-point `{s}`"
                )))
            }
        };
        let values = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .replace('\u{2212}', "-")
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad value `{t}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        QPoint::new(values, sign)
    }
}

/// A classical Q-point in the real line: a sorted Q-tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalQPoint {
    values: Vec<f64>,
}

impl ClassicalQPoint {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("a Q-point needs q >= 1 values".into()));
        }
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(ClassicalQPoint { values })
    }

    pub fn q(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_q(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Multiplicity {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Wasserstein-type distance between classical Q-points.
pub fn g_metric(t: &ClassicalQPoint, s: &ClassicalQPoint) -> Result<f64> {
    check_q(t.q(), s.q())?;
    Ok(g2_sorted(&t.values, &s.values).sqrt())
}

/// The pseudometric on special Q-points.
pub fn gs_metric(a: &QPoint, b: &QPoint) -> Result<f64> {
    check_q(a.q(), b.q())?;
    Ok(gs2_raw(&a.values, a.sign, &b.values, b.sign).sqrt())
}

/// Length metric induced by [`gs_metric`]. Equal to it for matching signs;
/// across a sign change it is `sqrt((|T⊖η_T| + |S⊖η_S|)² + Q|η_T − η_S|²)`,
/// which dominates `gs_metric` and is what the discrete energy uses.
pub fn intrinsic_distance(a: &QPoint, b: &QPoint) -> Result<f64> {
    check_q(a.q(), b.q())?;
    Ok(intrinsic2_raw(&a.values, a.sign, &b.values, b.sign).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(v: &[f64], s: Sign) -> QPoint {
        QPoint::new(v.to_vec(), s).unwrap()
    }

    fn cq(v: &[f64]) -> ClassicalQPoint {
        ClassicalQPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn g_metric_examples() {
        assert_eq!(g_metric(&cq(&[0.0]), &cq(&[0.0])).unwrap(), 0.0);
        let d = g_metric(&cq(&[0.0, 2.0]), &cq(&[1.0, 3.0])).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g_metric(&cq(&[-1.0, 0.0, 1.0]), &cq(&[1.0, 0.0, -1.0])).unwrap(), 0.0);
        assert!(matches!(
            g_metric(&cq(&[0.0]), &cq(&[0.0, 1.0])),
            Err(Error::Multiplicity { .. })
        ));
    }

    #[test]
    fn gs_metric_examples() {
        let a = qp(&[1.0, -1.0], Sign::Plus);
        assert_eq!(gs_metric(&a, &a).unwrap(), 0.0);
        let b = qp(&[1.0, -1.0], Sign::Minus);
        assert!((gs_metric(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        let z1 = qp(&[0.0, 0.0], Sign::Plus);
        let z2 = qp(&[0.0, 0.0], Sign::Minus);
        assert_eq!(z1, z2);
        assert_eq!(gs_metric(&z1, &z2).unwrap(), 0.0);
    }

    #[test]
    fn intrinsic_vs_gs() {
        let a = qp(&[1.0, -1.0], Sign::Plus);
        let b = qp(&[1.0, -1.0], Sign::Minus);
        let d = intrinsic_distance(&a, &b).unwrap();
        assert!((d - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(d >= gs_metric(&a, &b).unwrap());
    }

    #[test]
    fn eta_and_ominus() {
        assert_eq!(qp(&[1.0, -1.0], Sign::Plus).eta(), 0.0);
        assert_eq!(qp(&[1.0, 3.0], Sign::Minus).eta(), 2.0);
        assert_eq!(qp(&[5.0], Sign::Plus).eta(), 5.0);
        assert_eq!(qp(&[1.0, 3.0], Sign::Plus).ominus(2.0), qp(&[-1.0, 1.0], Sign::Plus));
        let c = qp(&[2.0, 2.0], Sign::Minus).ominus(2.0);
        assert_eq!(c.values(), &[0.0, 0.0]);
        assert_eq!(c.sign(), Sign::Plus);
        assert_eq!(qp(&[0.0], Sign::Plus).ominus(0.0), qp(&[0.0], Sign::Plus));
    }

    #[test]
    fn parts() {
        let a = qp(&[1.0, -1.0], Sign::Plus);
        assert_eq!(a.pos_part().values(), &[-1.0, 1.0]);
        assert_eq!(a.neg_part().values(), &[0.0, 0.0]);
        let b = qp(&[2.0, 4.0], Sign::Minus);
        assert_eq!(b.pos_part().values(), &[3.0, 3.0]);
        assert_eq!(b.neg_part().values(), &[2.0, 4.0]);
        let z = qp(&[0.0, 0.0], Sign::Minus);
        assert_eq!(z.pos_part(), z.neg_part());
    }

    #[test]
    fn encoding_round_trip() {
        let a = qp(&[0.1, -2.5, 3.0], Sign::Minus);
        let s = a.to_string();
        assert_eq!(s, "-:-2.5,0.1,3.0");
        assert_eq!(s.parse::<QPoint>().unwrap(), a);
        let b: QPoint = "\u{2212}:3,1".parse().unwrap();
        assert_eq!(b.values(), &[1.0, 3.0]);
        assert_eq!(b.sign(), Sign::Minus);
        assert!("*:1".parse::<QPoint>().is_err());
        assert!("+1,2".parse::<QPoint>().is_err());
    }

    #[test]
    fn near_collapse_snaps() {
        let a = qp(&[1.0, 1.0 + 1e-13], Sign::Minus);
        assert_eq!(a.sign(), Sign::Plus);
        assert!(a.is_collapsed());
        assert_eq!(gs_metric(&a, &QPoint::collapsed(2, a.eta())).unwrap(), 0.0);
    }
}
