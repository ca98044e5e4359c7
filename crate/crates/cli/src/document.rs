//! Versioned JSON document describing a model set and, optionally, one model in it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use netident::model::{
    Block, EntryPattern, ModelSetStructure, PatternGrid, Position, Properness, ThetaAssignment,
};
use netident::{Poly, Rat, Scalar};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

pub const VERSION: &str = "netident/1";

/// Exact polynomial coefficient. Accepts JSON integers, decimal literals and
/// `"p/q"` strings; decimals are read from their shortest text form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coeff(pub Scalar);

pub fn parse_scalar(text: &str) -> Result<Scalar, String> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| format!("bad numerator in {text:?}"))?;
        let d = BigInt::from_str(d.trim()).map_err(|_| format!("bad denominator in {text:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {text:?}"));
        }
        return Ok(Scalar::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = t[i + 1..]
                .parse()
                .map_err(|_| format!("bad exponent in {text:?}"))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("not a number: {text:?}"));
    }
    let mut value = Scalar::from_integer(BigInt::from_str(&digits).unwrap());
    let shift = exp - frac_part.len() as i32;
    let ten = Scalar::from_integer(BigInt::from(10));
    for _ in 0..shift.unsigned_abs() {
        value = if shift > 0 {
            value * &ten
        } else {
            value / &ten
        };
    }
    Ok(if neg { -value } else { value })
}

impl Serialize for Coeff {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            if let Some(v) = self.0.numer().to_i64() {
                return s.serialize_i64(v);
            }
            return s.serialize_str(&self.0.numer().to_string());
        }
        s.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
    }
}

impl<'de> Deserialize<'de> for Coeff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CoeffVisitor;
        impl Visitor<'_> for CoeffVisitor {
            type Value = Coeff;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a \"p/q\" string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Coeff, E> {
                Ok(Coeff(Scalar::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Coeff, E> {
                Ok(Coeff(Scalar::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Coeff, E> {
                if !v.is_finite() {
                    return Err(E::custom("coefficient must be finite"));
                }
                parse_scalar(&format!("{v:e}"))
                    .map(Coeff)
                    .map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Coeff, E> {
                parse_scalar(v).map(Coeff).map_err(E::custom)
            }
        }
        d.deserialize_any(CoeffVisitor)
    }
}

/// Rational function as ascending coefficient lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatSpec {
    pub num: Vec<Coeff>,
    pub den: Vec<Coeff>,
}

impl RatSpec {
    pub fn from_rat(r: &Rat) -> Self {
        let conv = |p: &Poly| {
            if p.is_zero() {
                vec![Coeff(Scalar::zero())]
            } else {
                p.coeffs().iter().cloned().map(Coeff).collect()
            }
        };
        RatSpec {
            num: conv(r.num()),
            den: conv(r.den()),
        }
    }

    pub fn to_rat(&self) -> Result<Rat, String> {
        let poly = |c: &[Coeff]| Poly::new(c.iter().map(|x| x.0.clone()).collect());
        Rat::new(poly(&self.num), poly(&self.den)).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProperSpec {
    Strict,
    Proper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub properness: ProperSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    #[serde(rename = "0")]
    Zero,
    Fixed(RatSpec),
    Param(ParamSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaParam {
    #[serde(default)]
    pub diagonal_feedthrough: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSpec {
    Fixed(Vec<Vec<f64>>),
    Param(LambdaParam),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSpec {
    /// Keys are 1-based positions such as `"G[2][1]"`.
    pub entries: BTreeMap<String, RatSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDocument {
    pub version: String,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p: usize,
    #[serde(rename = "G")]
    pub g: Vec<Vec<Cell>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<Cell>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
}

/// Parsed and validated document.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub structure: ModelSetStructure,
    pub theta: Option<ThetaAssignment>,
}

fn cell_to_pattern(c: &Cell, at: &str) -> Result<EntryPattern, CliError> {
    Ok(match c {
        Cell::Zero => EntryPattern::Zero,
        Cell::Fixed(r) => EntryPattern::Fixed(
            r.to_rat()
                .map_err(|e| CliError::Invalid(format!("{at}: {e}")))?,
        ),
        Cell::Param(p) => EntryPattern::Param(match p.properness {
            ProperSpec::Strict => Properness::Strict,
            ProperSpec::Proper => Properness::Proper,
        }),
    })
}

fn pattern_to_cell(p: &EntryPattern) -> Cell {
    match p {
        EntryPattern::Zero => Cell::Zero,
        EntryPattern::Fixed(r) => Cell::Fixed(RatSpec::from_rat(r)),
        EntryPattern::Param(Properness::Strict) => Cell::Param(ParamSpec {
            properness: ProperSpec::Strict,
        }),
        EntryPattern::Param(Properness::Proper) => Cell::Param(ParamSpec {
            properness: ProperSpec::Proper,
        }),
    }
}

fn grid(
    block: Block,
    cells: &[Vec<Cell>],
    rows: usize,
    cols: usize,
) -> Result<PatternGrid, CliError> {
    let got_cols = cells.first().map_or(0, Vec::len);
    if cells.len() != rows || cells.iter().any(|r| r.len() != cols) {
        return Err(CliError::Invalid(format!(
            "dimension mismatch: {block} must be {rows}x{cols}, got {}x{got_cols}",
            cells.len()
        )));
    }
    let mut out = PatternGrid::zeros(rows, cols);
    for (i, row) in cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            out.set(
                i,
                j,
                cell_to_pattern(c, &Position::new(block, i, j).to_string())?,
            );
        }
    }
    Ok(out)
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Invalid(format!(
            "dimension mismatch: {what} must be {n}x{n}"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `"G[2][1]"` to a 0-based position.
pub fn parse_position(key: &str) -> Option<Position> {
    let block = match key.get(..1)? {
        "G" => Block::G,
        "R" => Block::R,
        "H" => Block::H,
        _ => return None,
    };
    let rest = key[1..].strip_prefix('[')?.strip_suffix(']')?;
    let (a, b) = rest.split_once("][")?;
    let (i, j): (usize, usize) = (a.parse().ok()?, b.parse().ok()?);
    (i >= 1 && j >= 1).then(|| Position::new(block, i - 1, j - 1))
}

pub fn parse_spec(text: &str) -> Result<SpecDocument, CliError> {
    let raw: RawDocument =
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    from_raw(&raw)
}

pub fn from_raw(raw: &RawDocument) -> Result<SpecDocument, CliError> {
    if raw.version != VERSION {
        return Err(CliError::Parse(format!(
            "unsupported version {:?} (expected {VERSION:?})",
            raw.version
        )));
    }
    let (l, k, p) = (raw.l, raw.k, raw.p);
    let g = grid(Block::G, &raw.g, l, l)?;
    let r = grid(Block::R, &raw.r, l, k)?;
    let h = grid(Block::H, &raw.h, l, p)?;
    let (lambda, flag) = match &raw.lambda {
        None => (None, false),
        Some(LambdaSpec::Param(lp)) => (None, lp.diagonal_feedthrough),
        Some(LambdaSpec::Fixed(rows)) => (Some(matrix(rows, p, "lambda")?), false),
    };
    let structure = ModelSetStructure::new(g, r, h, lambda, flag)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let theta = match &raw.theta {
        None => None,
        Some(t) => {
            let mut out = ThetaAssignment::new();
            for (key, value) in &t.entries {
                let pos = parse_position(key)
                    .ok_or_else(|| CliError::Invalid(format!("theta: bad position {key:?}")))?;
                let rat = value
                    .to_rat()
                    .map_err(|e| CliError::Invalid(format!("theta {key}: {e}")))?;
                out.entries.insert(pos, rat);
            }
            if let Some(rows) = &t.lambda {
                out.lambda = Some(matrix(rows, p, "theta lambda")?);
            }
            Some(out)
        }
    };
    Ok(SpecDocument { structure, theta })
}

pub fn to_raw(doc: &SpecDocument) -> RawDocument {
    let s = &doc.structure;
    let cells = |g: &PatternGrid| -> Vec<Vec<Cell>> {
        (0..g.rows())
            .map(|i| g.row(i).iter().map(pattern_to_cell).collect())
            .collect()
    };
    let lambda = match s.fixed_lambda() {
        Some(l) => Some(LambdaSpec::Fixed(rows_of(l))),
        None if s.lambda_diagonal_feedthrough() => Some(LambdaSpec::Param(LambdaParam {
            diagonal_feedthrough: true,
        })),
        None => None,
    };
    let theta = doc.theta.as_ref().map(|t| ThetaSpec {
        entries: t
            .entries
            .iter()
            .map(|(pos, r)| (pos.to_string(), RatSpec::from_rat(r)))
            .collect(),
        lambda: t.lambda.as_ref().map(rows_of),
    });
    RawDocument {
        version: VERSION.to_string(),
        l: s.l(),
        k: s.k(),
        p: s.p(),
        g: cells(s.g()),
        r: cells(s.r()),
        h: cells(s.h()),
        lambda,
        theta,
    }
}

pub fn to_json(doc: &SpecDocument) -> String {
    serde_json::to_string_pretty(&to_raw(doc)).expect("document serializes")
}

/// Compact text for a coefficient, used in reports.
pub fn scalar_text(q: &Scalar) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else if q.is_negative() {
        format!("-{}/{}", q.numer().abs(), q.denom())
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(
            parse_scalar("0.3").unwrap(),
            Scalar::new(3.into(), 10.into())
        );
        assert_eq!(
            parse_scalar("-1.25e-2").unwrap(),
            Scalar::new((-1).into(), 80.into())
        );
        assert_eq!(
            parse_scalar("2/-4").unwrap(),
            Scalar::new((-1).into(), 2.into())
        );
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("abc").is_err());
    }

    #[test]
    fn float_coefficients_read_as_written() {
        let c: Coeff = serde_json::from_str("0.1").unwrap();
        assert_eq!(c.0, Scalar::new(1.into(), 10.into()));
        let c: Coeff = serde_json::from_str("1e3").unwrap();
        assert_eq!(c.0, Scalar::from_integer(1000.into()));
    }

    #[test]
    fn positions() {
        assert_eq!(
            parse_position("G[2][1]"),
            Some(Position::new(Block::G, 1, 0))
        );
        assert_eq!(
            parse_position("H[10][3]"),
            Some(Position::new(Block::H, 9, 2))
        );
        assert_eq!(parse_position("G[0][1]"), None);
        assert_eq!(parse_position("X[1][1]"), None);
    }

    #[test]
    fn cell_forms() {
        let c: Vec<Cell> = serde_json::from_str(
            r#"["0", {"param": {"properness": "strict"}}, {"fixed": {"num": [1], "den": [1]}}]"#,
        )
        .unwrap();
        assert_eq!(c[0], Cell::Zero);
        assert!(matches!(c[1], Cell::Param(_)));
        assert_eq!(serde_json::to_string(&c[0]).unwrap(), "\"0\"");
        assert!(
            serde_json::from_str::<Cell>(r#"{"param": {"properness": "strict", "x": 1}}"#).is_err()
        );
    }
}
