use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `12`, `-0.25`, `3/8` or `1e-3` into an exact rational.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rat(n)?;
        let d = parse_rat(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}0").parse::<BigInt>().ok()? / BigInt::from(10);
    let mut r = Rat::new(digits, BigInt::from(10).pow(frac.len() as u32));
    if exp > 0 {
        r *= Rat::from_integer(BigInt::from(10).pow(exp as u32));
    } else if exp < 0 {
        r /= Rat::from_integer(BigInt::from(10).pow((-exp) as u32));
    }
    Some(if neg { -r } else { r })
}

/// Exact decimal expansion when the denominator has only factors 2 and 5.
pub fn exact_decimal(r: &Rat) -> Option<String> {
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scaled = r * Rat::from_integer(BigInt::from(10).pow(places));
    let n = scaled.to_integer();
    let neg = n.is_negative();
    let digits = n.abs().to_string();
    if places == 0 {
        return Some(if neg { format!("-{digits}") } else { digits });
    }
    let p = places as usize;
    let padded = if digits.len() <= p { format!("{}{}", "0".repeat(p + 1 - digits.len()), digits) } else { digits };
    let (a, b) = padded.split_at(padded.len() - p);
    Some(format!("{}{}.{}", if neg { "-" } else { "" }, a, b))
}

/// Decimal when exact, `p/q` otherwise.
pub fn fmt_rat(r: &Rat) -> String {
    exact_decimal(r).unwrap_or_else(|| format!("{}/{}", r.numer(), r.denom()))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn f64_to_rat(x: f64) -> Option<Rat> {
    Rat::from_float(x)
}

/// Exact value appearing in literals, sorts and keys.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Num(Rat),
    Sym(String),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Num(rat(n))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(r) => write!(f, "{}", fmt_rat(r)),
            Value::Sym(s) => write!(f, "{s}"),
        }
    }
}

/// A real number that is exact until a transcendental function or a float input touches it.
#[derive(Clone, Debug)]
pub enum Number {
    Exact(Rat),
    Approx(f64),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => rat_to_f64(r),
            Number::Approx(x) => *x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Exact(r) => r.is_zero(),
            Number::Approx(x) => *x == 0.0,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    fn lift(a: &Number, b: &Number, fe: impl Fn(&Rat, &Rat) -> Rat, ff: impl Fn(f64, f64) -> f64) -> Number {
        match (a, b) {
            (Number::Exact(x), Number::Exact(y)) => Number::Exact(fe(x, y)),
            _ => Number::Approx(ff(a.to_f64(), b.to_f64())),
        }
    }

    pub fn add(&self, o: &Number) -> Number {
        Number::lift(self, o, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, o: &Number) -> Number {
        Number::lift(self, o, |a, b| a - b, |a, b| a - b)
    }

    pub fn mul(&self, o: &Number) -> Number {
        Number::lift(self, o, |a, b| a * b, |a, b| a * b)
    }

    /// `None` on division by zero.
    pub fn div(&self, o: &Number) -> Option<Number> {
        if o.is_zero() {
            return None;
        }
        Some(Number::lift(self, o, |a, b| a / b, |a, b| a / b))
    }

    pub fn neg(&self) -> Number {
        match self {
            Number::Exact(r) => Number::Exact(-r),
            Number::Approx(x) => Number::Approx(-x),
        }
    }

    pub fn cmp_num(&self, o: &Number) -> Option<Ordering> {
        match (self, o) {
            (Number::Exact(a), Number::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&o.to_f64()),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => write!(f, "{}", fmt_rat(r)),
            Number::Approx(x) => write!(f, "{x}"),
        }
    }
}

/// Result of evaluation and the content of interpretations.
#[derive(Clone, Debug)]
pub enum Val {
    Bool(bool),
    Num(Number),
    Sym(String),
}

impl Val {
    pub fn exact(r: Rat) -> Val {
        Val::Num(Number::Exact(r))
    }

    pub fn approx(x: f64) -> Val {
        Val::Num(Number::Approx(x))
    }

    pub fn as_number(&self) -> Option<&Number> {
        match self {
            Val::Num(n) => Some(n),
            _ => None,
        }
    }

    /// Exact value, if this is not a float.
    pub fn to_value(&self) -> Option<Value> {
        match self {
            Val::Bool(b) => Some(Value::Bool(*b)),
            Val::Num(Number::Exact(r)) => Some(Value::Num(r.clone())),
            Val::Num(Number::Approx(_)) => None,
            Val::Sym(s) => Some(Value::Sym(s.clone())),
        }
    }

    /// Equality as used by `=` atoms; numbers compare numerically.
    pub fn same(&self, o: &Val) -> Option<bool> {
        match (self, o) {
            (Val::Bool(a), Val::Bool(b)) => Some(a == b),
            (Val::Sym(a), Val::Sym(b)) => Some(a == b),
            (Val::Num(a), Val::Num(b)) => a.cmp_num(b).map(|o| o == Ordering::Equal),
            _ => None,
        }
    }
}

impl From<&Value> for Val {
    fn from(v: &Value) -> Val {
        match v {
            Value::Bool(b) => Val::Bool(*b),
            Value::Num(r) => Val::Num(Number::Exact(r.clone())),
            Value::Sym(s) => Val::Sym(s.clone()),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Bool(b) => write!(f, "{b}"),
            Val::Num(n) => write!(f, "{n}"),
            Val::Sym(s) => write!(f, "{s}"),
        }
    }
}

/// Parses a plan/CLI value: `true`/`false`, a rational, or a symbol.
pub fn parse_value(s: &str) -> Value {
    match s.trim() {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        t => match parse_rat(t) {
            Some(r) => Value::Num(r),
            None => Value::Sym(t.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_round_trip() {
        for s in ["0", "1.6", "-0.25", "7.5", "0.001", "-12"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(exact_decimal(&r).unwrap(), s);
        }
        assert_eq!(parse_rat("3/8").unwrap(), ratio(3, 8));
        assert_eq!(parse_rat("1e-3").unwrap(), ratio(1, 1000));
        assert!(exact_decimal(&ratio(1, 3)).is_none());
        assert_eq!(fmt_rat(&ratio(-1, 3)), "-1/3");
        assert!(parse_rat("abc").is_none());
        assert!(parse_rat(".").is_none());
    }

    #[test]
    fn numbers_stay_exact() {
        let a = Number::Exact(ratio(1, 3));
        let b = Number::Exact(ratio(2, 3));
        assert!(matches!(a.add(&b), Number::Exact(r) if r == rat(1)));
        assert!(a.div(&Number::Exact(rat(0))).is_none());
        assert!(matches!(a.mul(&Number::Approx(3.0)), Number::Approx(_)));
    }
}
