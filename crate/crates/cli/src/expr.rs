//! Expression grammar shared by all subcommands.
//!
//! Atoms: rationals, `zeta[w]`, `z(n1,...)`, `P[w]`, `P0[w]`, `L[w]`, `Lb[w]`, `z`, `zb`,
//! `(z-1)`, `(zb-1)`; operators `+ - * /` and `^<int>`; an optional trailing `/(z-zb)`
//! turns the expression into a B-element. Whitespace is ignored.

use std::fmt;

use gfperiod_core::mzv::MzvExpr;
use gfperiod_core::ratfield::{AExpr, BElement, Prefactor};
use gfperiod_core::svmp::{p_basis, p_zero, SvExpr};
use gfperiod_core::{Error, SeqWord, Word, Q};
use num_bigint::BigInt;
use num_traits::{One, Zero};

/// A parsed value, in the smallest space that contains it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Value {
    Mzv(MzvExpr),
    Sv(SvExpr),
    A(AExpr),
    B(BElement),
}

impl Value {
    /// Moves the value to the smallest space that contains it.
    pub fn normalize(self) -> Value {
        match self {
            Value::A(a) => {
                if a.iter().all(|(p, _)| *p == Prefactor::default()) {
                    Value::Sv(a.coeff(Default::default())).normalize()
                } else {
                    Value::A(a)
                }
            }
            Value::Sv(s) => {
                if s.iter().all(|((u, v), _)| u.is_empty() && v.is_empty()) {
                    Value::Mzv(s.coeff(Word::EMPTY, Word::EMPTY))
                } else {
                    Value::Sv(s)
                }
            }
            v => v,
        }
    }

    /// The value as an A-expression; B-elements are rejected.
    pub fn into_a(self) -> Result<AExpr, Error> {
        match self {
            Value::Mzv(m) => Ok(AExpr::constant(m)),
            Value::Sv(s) => Ok(AExpr::from_sv(s)),
            Value::A(a) => Ok(a),
            Value::B(_) => Err(Error::Invalid("expected an expression without /(z-zb)".into())),
        }
    }

    pub fn into_mzv(self) -> Result<MzvExpr, Error> {
        match self.normalize() {
            Value::Mzv(m) => Ok(m),
            _ => Err(Error::Invalid("expected a constant MZV expression".into())),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Mzv(_) => "mzv",
            Value::Sv(_) => "svmp",
            Value::A(_) => "a",
            Value::B(_) => "b",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Mzv(m) => f.write_str(&m.to_report_string()),
            Value::Sv(s) => write!(f, "{s}"),
            Value::A(a) => write!(f, "{a}"),
            Value::B(b) => {
                let n = b.numerator.to_string();
                if is_wrapped(&n) {
                    write!(f, "{n}/(z-zb)")
                } else {
                    write!(f, "({n})/(z-zb)")
                }
            }
        }
    }
}

/// Whether the whole string is one parenthesized group.
fn is_wrapped(s: &str) -> bool {
    if !s.starts_with('(') {
        return false;
    }
    let mut depth = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return i == s.len() - 1;
                }
            }
            _ => {}
        }
    }
    false
}

pub fn print_b(b: &BElement) -> String {
    Value::B(b.clone()).to_string()
}

/// Parses an expression and returns it in the smallest containing space.
pub fn parse_expression(text: &str) -> Result<Value, Error> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0, text };
    let a = p.expr()?.into_a();
    p.skip_ws();
    if p.rest_is("/(z-zb)") {
        p.consume_literal("/(z-zb)");
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(p.error("unexpected input after /(z-zb)"));
        }
        return Ok(Value::B(BElement::new(a).map_err(|e| p.error(&e.to_string()))?));
    }
    if p.pos != p.chars.len() {
        return Err(p.error(&format!("unexpected {:?}", p.chars[p.pos])));
    }
    Ok(Value::A(a).normalize())
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let (mut line, mut col) = (1, 1);
        for c in self.chars.iter().take(self.pos) {
            if *c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        Error::Parse(format!("{msg} at line {line}, column {col} in {:?}", self.text))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    /// Whether the non-whitespace input from here starts with `lit`.
    fn rest_is(&self, lit: &str) -> bool {
        let mut it = self.chars[self.pos..].iter().filter(|c| !c.is_whitespace());
        lit.chars().all(|c| it.next() == Some(&c))
    }

    fn consume_literal(&mut self, lit: &str) {
        for c in lit.chars() {
            self.skip_ws();
            debug_assert_eq!(self.chars[self.pos], c);
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), Error> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected {c:?}")))
        }
    }

    /// Whether `/(z-zb)` closes the whole expression from here.
    fn at_trailing_b(&self) -> bool {
        if !self.rest_is("/(z-zb)") {
            return false;
        }
        let mut n = 0;
        let mut i = self.pos;
        while n < 7 {
            if !self.chars[i].is_whitespace() {
                n += 1;
            }
            i += 1;
        }
        self.chars[i..].iter().all(|c| c.is_whitespace())
    }

    fn expr(&mut self) -> Result<Node, Error> {
        let mut acc = match self.peek() {
            Some('-') => {
                self.pos += 1;
                self.term()?.neg()
            }
            Some('+') => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = Node::Expr(acc.into_a().add(&self.term()?.into_a()));
                }
                Some('-') => {
                    self.pos += 1;
                    acc = Node::Expr(acc.into_a().sub(&self.term()?.into_a()));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Node, Error> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(self.power()?);
                }
                Some('/') if !self.at_trailing_b() => {
                    self.pos += 1;
                    let start = self.pos;
                    let d = self.power()?;
                    let Some(inv) = d.invert() else {
                        self.pos = start;
                        return Err(self.error("can only divide by rationals and z, zb, (z-1), (zb-1) powers"));
                    };
                    acc = acc.mul(inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Node, Error> {
        let start = self.pos;
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let neg = match self.peek() {
            Some('-') => {
                self.pos += 1;
                true
            }
            _ => false,
        };
        let n = self.integer()?;
        let n: u32 = n.try_into().map_err(|_| self.error("exponent too large"))?;
        let b = if neg {
            let Some(inv) = base.invert() else {
                self.pos = start;
                return Err(self.error("negative powers need rationals or z, zb, (z-1), (zb-1)"));
            };
            inv
        } else {
            base
        };
        let mut out = Node::Mono([0; 4], Q::one());
        for _ in 0..n {
            out = out.mul(b.clone());
        }
        Ok(out)
    }

    fn integer(&mut self) -> Result<BigInt, Error> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer"));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        Ok(s.parse().expect("digits"))
    }

    fn bracket_word(&mut self) -> Result<String, Error> {
        self.expect('[')?;
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos] != ']' {
            self.pos += 1;
        }
        if self.pos == self.chars.len() {
            self.pos = start;
            return Err(self.error("unterminated ["));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        self.pos += 1;
        Ok(s)
    }

    fn word01(&mut self) -> Result<Word, Error> {
        let start = self.pos;
        let s = self.bracket_word()?;
        s.parse::<Word>().map_err(|e| {
            self.pos = start;
            self.error(&e.to_string())
        })
    }

    fn atom(&mut self) -> Result<Node, Error> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of input"));
        };
        if c.is_ascii_digit() {
            let n = self.integer()?;
            return Ok(Node::Mono([0; 4], Q::from_integer(n)));
        }
        if c == '(' {
            if self.rest_is("(z-1)") {
                self.consume_literal("(z-1)");
                return Ok(Node::Mono([0, 0, 1, 0], Q::one()));
            }
            if self.rest_is("(zb-1)") {
                self.consume_literal("(zb-1)");
                return Ok(Node::Mono([0, 0, 0, 1], Q::one()));
            }
            self.pos += 1;
            let e = self.expr()?;
            self.expect(')')?;
            return Ok(e);
        }
        if !c.is_ascii_alphabetic() {
            return Err(self.error(&format!("unexpected {c:?}")));
        }
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let ident: String = self.chars[start..self.pos].iter().collect();
        let sv = |s: SvExpr| Ok(Node::Expr(AExpr::from_sv(s)));
        match ident.as_str() {
            "zeta" => {
                let w = self.word01()?;
                Ok(Node::Expr(AExpr::constant(MzvExpr::zeta_word(w))))
            }
            "z" if self.peek() == Some('(') => {
                self.pos += 1;
                let mut parts = Vec::new();
                loop {
                    let n = self.integer()?;
                    parts.push(u32::try_from(n).map_err(|_| self.error("index too large"))?);
                    match self.peek() {
                        Some(',') => self.pos += 1,
                        _ => break,
                    }
                }
                self.expect(')')?;
                if parts.is_empty() || *parts.last().unwrap() < 2 || parts.contains(&0) {
                    self.pos = start;
                    return Err(self.error("z(...) needs positive indices ending with one ≥ 2"));
                }
                Ok(Node::Expr(AExpr::constant(MzvExpr::zeta(&parts))))
            }
            "z" => Ok(Node::Mono([1, 0, 0, 0], Q::one())),
            "zb" => Ok(Node::Mono([0, 1, 0, 0], Q::one())),
            "P" => {
                let w = self.word01()?;
                sv((*p_basis(w)).clone())
            }
            "P0" => {
                let at = self.pos;
                let s = self.bracket_word()?;
                let w: SeqWord = s.parse().map_err(|e: Error| {
                    self.pos = at;
                    self.error(&e.to_string())
                })?;
                sv(p_zero(&w))
            }
            "L" => {
                let w = self.word01()?;
                sv(SvExpr::hol(w))
            }
            "Lb" => {
                let w = self.word01()?;
                sv(SvExpr::antihol(w))
            }
            _ => {
                self.pos = start;
                Err(self.error(&format!("unknown atom {ident:?}")))
            }
        }
    }
}

/// Products of prefactor powers stay unexpanded so that they can be inverted.
#[derive(Clone)]
enum Node {
    /// `c · z^i zb^j (z-1)^k (zb-1)^l`.
    Mono([i32; 4], Q),
    Expr(AExpr),
}

impl Node {
    fn into_a(self) -> AExpr {
        match self {
            Node::Mono([i, j, k, l], c) => AExpr::monomial(i, j, k, l, &SvExpr::constant(MzvExpr::rational(c))),
            Node::Expr(a) => a,
        }
    }

    fn neg(self) -> Node {
        match self {
            Node::Mono(e, c) => Node::Mono(e, -c),
            Node::Expr(a) => Node::Expr(a.neg()),
        }
    }

    fn mul(self, other: Node) -> Node {
        match (self, other) {
            (Node::Mono(a, c), Node::Mono(b, d)) => Node::Mono([0, 1, 2, 3].map(|i| a[i] + b[i]), c * d),
            (x, y) => Node::Expr(x.into_a().mul(&y.into_a())),
        }
    }

    fn invert(&self) -> Option<Node> {
        match self {
            Node::Mono(e, c) if !c.is_zero() => Some(Node::Mono(e.map(|x| -x), Q::one() / c)),
            Node::Mono(..) => None,
            Node::Expr(a) => {
                let mut it = a.iter();
                let (p, s) = it.next()?;
                if it.next().is_some() || s.len() != 1 {
                    return None;
                }
                let c = s.coeff(Word::EMPTY, Word::EMPTY).as_rational()?;
                Node::Mono([p.hol.zero, p.anti.zero, p.hol.one, p.anti.one], c).invert()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gfperiod_core::graphfn::{f_i, letter_factor};

    #[test]
    fn grammar_examples() {
        let z2 = MzvExpr::zeta(&[2]);
        assert_eq!(parse_expression("zeta[10]").unwrap(), Value::Mzv(z2.neg()));
        assert_eq!(parse_expression(" z( 2 ) ").unwrap(), Value::Mzv(z2.clone()));
        let d = (*p_basis("01".parse().unwrap())).sub(&p_basis("10".parse().unwrap()));
        assert_eq!(parse_expression("P[01]-P[10]").unwrap(), Value::Sv(d));
        let fi = parse_expression("1/(z^1*zb^1*(z-1)^1*(zb-1)^1)").unwrap();
        assert_eq!(fi, Value::A(letter_factor(2)));
        let b = parse_expression("(z-zb)/(z*zb*(z-1)*(zb-1))/(z-zb)").unwrap();
        assert_eq!(b, Value::B(f_i()));
        assert_eq!(parse_expression("441/8*z(7)").unwrap().to_string(), "441/8*z(7)");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_expression("zeta[10] + \n  Q[1]").unwrap_err().to_string();
        assert!(e.contains("line 2, column 3"), "{e}");
        assert!(parse_expression("z(1)").is_err());
        assert!(parse_expression("1/(z+1)").is_err());
        assert!(parse_expression("L[01]/(z-zb)").is_err());
        assert!(parse_expression("zeta[012]").is_err());
    }

    #[test]
    fn printed_values_parse_back() {
        for s in [
            "-11/2*z(5)+3*z(2)*z(3)",
            "z(3)^2+1/3",
            "P[011]-2*P0[21]",
            "z^-1*(z-1)^-2*L[01]+zb^3*Lb[1]*L[0]",
            "(z(3)*(L[0]-Lb[0]))/(z-zb)",
        ] {
            let v = parse_expression(s).unwrap();
            assert_eq!(parse_expression(&v.to_string()).unwrap(), v, "{s} -> {v}");
        }
    }
}
