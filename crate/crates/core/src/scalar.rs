//! Scalar coefficient fields with exact first and second partial derivatives.
//!
//! Every analytic field kind compiles its components down to `ScalarExpr`
//! trees; evaluating a tree propagates the full 2-jet (value, gradient,
//! Hessian) through each node, so metric jets carry no truncation error.
//! A minimal expression grammar (`+ - * / ^`, `x1..xn`, constants) is parsed
//! for user-supplied coefficient strings.

use crate::error::{Error, Result};
use crate::tensor::MAX_DIM;

/// Value, gradient and Hessian of a scalar field at a point.
///
/// Storage is fixed at `MAX_DIM` so jet propagation never allocates; only
/// the first `n` slots are meaningful.
#[derive(Debug, Clone, Copy)]
pub struct ScalarJet2 {
    pub n: usize,
    pub v: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl ScalarJet2 {
    pub fn constant(n: usize, v: f64) -> Self {
        ScalarJet2 {
            n,
            v,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn variable(n: usize, idx: usize, x: f64) -> Self {
        let mut j = Self::constant(n, x);
        j.grad[idx] = 1.0;
        j
    }

    pub fn add(&self, o: &ScalarJet2) -> Self {
        let mut r = *self;
        r.v += o.v;
        for a in 0..self.n {
            r.grad[a] += o.grad[a];
            for b in 0..self.n {
                r.hess[a][b] += o.hess[a][b];
            }
        }
        r
    }

    pub fn neg(&self) -> Self {
        let mut r = *self;
        r.v = -r.v;
        for a in 0..self.n {
            r.grad[a] = -r.grad[a];
            for b in 0..self.n {
                r.hess[a][b] = -r.hess[a][b];
            }
        }
        r
    }

    pub fn mul(&self, o: &ScalarJet2) -> Self {
        let mut r = ScalarJet2::constant(self.n, self.v * o.v);
        for a in 0..self.n {
            r.grad[a] = self.grad[a] * o.v + self.v * o.grad[a];
            for b in 0..self.n {
                r.hess[a][b] = self.hess[a][b] * o.v
                    + self.grad[a] * o.grad[b]
                    + self.grad[b] * o.grad[a]
                    + self.v * o.hess[a][b];
            }
        }
        r
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut r = *self;
        r.v *= c;
        for a in 0..self.n {
            r.grad[a] *= c;
            for b in 0..self.n {
                r.hess[a][b] *= c;
            }
        }
        r
    }

    /// Chain rule for f(u) given f'(u) and f''(u).
    fn compose(&self, f: f64, df: f64, ddf: f64) -> Self {
        let mut r = ScalarJet2::constant(self.n, f);
        for a in 0..self.n {
            r.grad[a] = df * self.grad[a];
            for b in 0..self.n {
                r.hess[a][b] = ddf * self.grad[a] * self.grad[b] + df * self.hess[a][b];
            }
        }
        r
    }

    pub fn recip(&self) -> Self {
        let u = self.v;
        self.compose(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u))
    }

    pub fn div(&self, o: &ScalarJet2) -> Self {
        self.mul(&o.recip())
    }

    pub fn powi(&self, k: i32) -> Self {
        let u = self.v;
        let kf = k as f64;
        self.compose(
            u.powi(k),
            kf * u.powi(k - 1),
            kf * (kf - 1.0) * u.powi(k - 2),
        )
    }

    pub fn powf(&self, p: f64) -> Self {
        let u = self.v;
        self.compose(
            u.powf(p),
            p * u.powf(p - 1.0),
            p * (p - 1.0) * u.powf(p - 2.0),
        )
    }

    pub fn sin(&self) -> Self {
        self.compose(self.v.sin(), self.v.cos(), -self.v.sin())
    }

    pub fn cos(&self) -> Self {
        self.compose(self.v.cos(), -self.v.sin(), -self.v.cos())
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
}

/// Expression tree for analytic scalar coefficient fields.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Const(f64),
    /// Coordinate x^{i+1} (0-based index).
    Var(usize),
    Add(Vec<ScalarExpr>),
    Mul(Vec<ScalarExpr>),
    Neg(Box<ScalarExpr>),
    Div(Box<ScalarExpr>, Box<ScalarExpr>),
    Powi(Box<ScalarExpr>, i32),
    Powf(Box<ScalarExpr>, f64),
    Sin(Box<ScalarExpr>),
    Cos(Box<ScalarExpr>),
    Exp(Box<ScalarExpr>),
}

impl ScalarExpr {
    pub fn constant(v: f64) -> Self {
        ScalarExpr::Const(v)
    }

    /// Inner product a·x + b as an expression.
    pub fn affine(a: &[f64], b: f64) -> Self {
        let mut terms = vec![ScalarExpr::Const(b)];
        for (i, &c) in a.iter().enumerate() {
            if c != 0.0 {
                terms.push(ScalarExpr::Mul(vec![
                    ScalarExpr::Const(c),
                    ScalarExpr::Var(i),
                ]));
            }
        }
        ScalarExpr::Add(terms)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.jet2(x).v
    }

    pub fn jet2(&self, x: &[f64]) -> ScalarJet2 {
        let n = x.len();
        match self {
            ScalarExpr::Const(v) => ScalarJet2::constant(n, *v),
            ScalarExpr::Var(i) => ScalarJet2::variable(n, *i, x[*i]),
            ScalarExpr::Add(terms) => {
                let mut acc = ScalarJet2::constant(n, 0.0);
                for t in terms {
                    acc = acc.add(&t.jet2(x));
                }
                acc
            }
            ScalarExpr::Mul(factors) => {
                let mut acc = ScalarJet2::constant(n, 1.0);
                for f in factors {
                    acc = acc.mul(&f.jet2(x));
                }
                acc
            }
            ScalarExpr::Neg(e) => e.jet2(x).neg(),
            ScalarExpr::Div(a, b) => a.jet2(x).div(&b.jet2(x)),
            ScalarExpr::Powi(e, k) => e.jet2(x).powi(*k),
            ScalarExpr::Powf(e, p) => e.jet2(x).powf(*p),
            ScalarExpr::Sin(e) => e.jet2(x).sin(),
            ScalarExpr::Cos(e) => e.jet2(x).cos(),
            ScalarExpr::Exp(e) => e.jet2(x).exp(),
        }
    }
}

/// Parse a coefficient expression over `x1..xn`.
///
/// Grammar: `expr := term (('+'|'-') term)*`, `term := unary (('*'|'/') unary)*`,
/// `unary := '-' unary | power`, `power := atom ('^' unary)?` with a constant
/// exponent, `atom := number | 'x'<digits> | '(' expr ')'`.
pub fn parse_expr(src: &str, n: usize) -> Result<ScalarExpr> {
    let mut p = Parser {
        chars: src.chars().collect(),
        pos: 0,
        n,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(Error::ConfigInvalid(format!(
            "unexpected trailing input at offset {} in expression '{src}'",
            p.pos
        )));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expr(&mut self) -> Result<ScalarExpr> {
        let mut acc = self.term()?;
        while let Some(op) = self.peek() {
            match op {
                '+' => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = ScalarExpr::Add(vec![acc, rhs]);
                }
                '-' => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = ScalarExpr::Add(vec![acc, ScalarExpr::Neg(Box::new(rhs))]);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<ScalarExpr> {
        let mut acc = self.unary()?;
        while let Some(op) = self.peek() {
            match op {
                '*' => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = ScalarExpr::Mul(vec![acc, rhs]);
                }
                '/' => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = ScalarExpr::Div(Box::new(acc), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ScalarExpr> {
        if self.peek() == Some('-') {
            self.bump();
            let e = self.unary()?;
            return Ok(ScalarExpr::Neg(Box::new(e)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.bump();
            let exponent = self.unary()?;
            let p = const_fold(&exponent).ok_or_else(|| {
                Error::ConfigInvalid("exponent must be a constant expression".into())
            })?;
            if p.fract() == 0.0 && p.abs() < 64.0 {
                return Ok(ScalarExpr::Powi(Box::new(base), p as i32));
            }
            return Ok(ScalarExpr::Powf(Box::new(base), p));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ScalarExpr> {
        match self.peek() {
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                if self.bump() != Some(')') {
                    return Err(Error::ConfigInvalid("expected ')'".into()));
                }
                Ok(e)
            }
            Some('x') => {
                self.bump();
                let start = self.pos;
                while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let digits: String = self.chars[start..self.pos].iter().collect();
                let idx: usize = digits
                    .parse()
                    .map_err(|_| Error::ConfigInvalid("expected coordinate index after 'x'".into()))?;
                if idx == 0 || idx > self.n {
                    return Err(Error::ConfigInvalid(format!(
                        "coordinate x{idx} out of range for dimension {}",
                        self.n
                    )));
                }
                Ok(ScalarExpr::Var(idx - 1))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                let mut seen_e = false;
                while self.pos < self.chars.len() {
                    let c = self.chars[self.pos];
                    let ok = c.is_ascii_digit()
                        || c == '.'
                        || c == 'e'
                        || c == 'E'
                        || (seen_e && (c == '+' || c == '-'));
                    if !ok {
                        break;
                    }
                    seen_e = c == 'e' || c == 'E';
                    self.pos += 1;
                }
                let lit: String = self.chars[start..self.pos].iter().collect();
                lit.parse::<f64>()
                    .map(ScalarExpr::Const)
                    .map_err(|_| Error::ConfigInvalid(format!("bad numeric literal '{lit}'")))
            }
            other => Err(Error::ConfigInvalid(format!(
                "unexpected token {other:?} in expression"
            ))),
        }
    }
}

fn const_fold(e: &ScalarExpr) -> Option<f64> {
    match e {
        ScalarExpr::Const(v) => Some(*v),
        ScalarExpr::Neg(inner) => const_fold(inner).map(|v| -v),
        ScalarExpr::Add(terms) => terms.iter().map(const_fold).try_fold(0.0, |a, b| Some(a + b?)),
        ScalarExpr::Mul(terms) => terms.iter().map(const_fold).try_fold(1.0, |a, b| Some(a * b?)),
        ScalarExpr::Div(a, b) => Some(const_fold(a)? / const_fold(b)?),
        ScalarExpr::Powi(a, k) => Some(const_fold(a)?.powi(*k)),
        ScalarExpr::Powf(a, p) => Some(const_fold(a)?.powf(*p)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(e: &ScalarExpr, x: &[f64]) {
        let n = x.len();
        let jet = e.jet2(x);
        let h = 1e-5;
        for a in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[a] += h;
            xm[a] -= h;
            let fd = (e.value(&xp) - e.value(&xm)) / (2.0 * h);
            assert!(
                (fd - jet.grad[a]).abs() < 1e-6 * (1.0 + fd.abs()),
                "grad[{a}] mismatch: {fd} vs {}",
                jet.grad[a]
            );
        }
        let h2 = 1e-4;
        for a in 0..n {
            for b in 0..n {
                let fd = if a == b {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[a] += h2;
                    xm[a] -= h2;
                    (e.value(&xp) - 2.0 * e.value(x) + e.value(&xm)) / (h2 * h2)
                } else {
                    let mut xpp = x.to_vec();
                    let mut xpm = x.to_vec();
                    let mut xmp = x.to_vec();
                    let mut xmm = x.to_vec();
                    xpp[a] += h2;
                    xpp[b] += h2;
                    xpm[a] += h2;
                    xpm[b] -= h2;
                    xmp[a] -= h2;
                    xmp[b] += h2;
                    xmm[a] -= h2;
                    xmm[b] -= h2;
                    (e.value(&xpp) - e.value(&xpm) - e.value(&xmp) + e.value(&xmm))
                        / (4.0 * h2 * h2)
                };
                assert!(
                    (fd - jet.hess[a][b]).abs() < 1e-5 * (1.0 + fd.abs()),
                    "hess[{a}][{b}] mismatch: {fd} vs {}",
                    jet.hess[a][b]
                );
            }
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let x = [0.3, -0.2];
        let exprs = [
            parse_expr("1 + x1^2", 2).unwrap(),
            parse_expr("x1*x2 - 3*x2^3", 2).unwrap(),
            parse_expr("(x1 + 2*x2)/(1 + x1^2)", 2).unwrap(),
            ScalarExpr::Sin(Box::new(ScalarExpr::affine(&[1.5, -0.5], 0.2))),
            ScalarExpr::Exp(Box::new(parse_expr("0.3*x1 - 0.1*x2^2", 2).unwrap())),
        ];
        for e in &exprs {
            fd_check(e, &x);
        }
    }

    #[test]
    fn parser_rejects_bad_input() {
        assert!(parse_expr("x3", 2).is_err());
        assert!(parse_expr("1 +", 2).is_err());
        assert!(parse_expr("x1 ^ x2", 2).is_err());
        assert!(parse_expr("(x1", 2).is_err());
    }

    #[test]
    fn parser_precedence() {
        let e = parse_expr("1 + 2*x1^2", 1).unwrap();
        assert!((e.value(&[3.0]) - 19.0).abs() < 1e-14);
        let e = parse_expr("-x1^2", 1).unwrap();
        assert!((e.value(&[2.0]) + 4.0).abs() < 1e-14);
        let e = parse_expr("2^-1", 1).unwrap();
        assert!((e.value(&[0.0]) - 0.5).abs() < 1e-14);
    }
}
