//! Scalar expression language for defining functions on the command line:
//! variables x1..xN (x, y, z accepted for the first three), arithmetic,
//! rational powers, a fixed set of unary functions, and piecewise
//! definitions guarded by comparisons combined with && and ||.
//!
//! Equality comparisons inside guards hold within 1e-12 absolute.

use std::fmt;

use conekit::geom::Vector;

pub const EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sqrt,
    Cbrt,
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Cbrt => "cbrt",
            UnaryFn::Abs => "abs",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sqrt" => UnaryFn::Sqrt,
            "cbrt" => UnaryFn::Cbrt,
            "abs" => UnaryFn::Abs,
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "exp" => UnaryFn::Exp,
            "log" => UnaryFn::Log,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            UnaryFn::Sqrt => v.sqrt(),
            UnaryFn::Cbrt => v.cbrt(),
            UnaryFn::Abs => v.abs(),
            UnaryFn::Sin => v.sin(),
            UnaryFn::Cos => v.cos(),
            UnaryFn::Exp => v.exp(),
            UnaryFn::Log => v.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn sym(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Exponents are rational constants so powers stay well-defined symbolically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Lit(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Rational),
    Call(UnaryFn, Box<Expr>),
    Piecewise(Box<Guard>, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Guard {
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Expr {
    pub fn eval(&self, p: &Vector) -> f64 {
        match self {
            Expr::Var(i) => p[*i],
            Expr::Lit(v) => *v,
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Neg(a) => -a.eval(p),
            Expr::Pow(a, r) => {
                let base = a.eval(p);
                if r.den == 1 {
                    base.powi(r.num as i32)
                } else {
                    base.powf(r.as_f64())
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(p)),
            Expr::Piecewise(g, t, e) => {
                if g.eval(p) { t.eval(p) } else { e.eval(p) }
            }
        }
    }

    /// Highest variable index used, as a dimension (0 for constants).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Var(i) => i + 1,
            Expr::Lit(_) => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.arity(),
            Expr::Piecewise(g, t, e) => g.arity().max(t.arity()).max(e.arity()),
        }
    }
}

impl Guard {
    pub fn eval(&self, p: &Vector) -> bool {
        match self {
            Guard::Cmp(op, a, b) => {
                let (x, y) = (a.eval(p), b.eval(p));
                match op {
                    CmpOp::Lt => x < y,
                    CmpOp::Le => x <= y,
                    CmpOp::Gt => x > y,
                    CmpOp::Ge => x >= y,
                    CmpOp::Eq => (x - y).abs() <= EQ_TOL,
                    CmpOp::Ne => (x - y).abs() > EQ_TOL,
                }
            }
            Guard::And(a, b) => a.eval(p) && b.eval(p),
            Guard::Or(a, b) => a.eval(p) || b.eval(p),
        }
    }

    fn arity(&self) -> usize {
        match self {
            Guard::Cmp(_, a, b) => a.arity().max(b.arity()),
            Guard::And(a, b) | Guard::Or(a, b) => a.arity().max(b.arity()),
        }
    }
}

// ---------------------------------------------------------------------------
// printing (fully parenthesized, so print -> parse is structurally stable)

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Lit(v) => {
                if *v == v.trunc() && v.abs() < 1e15 {
                    write!(f, "{}", *v as i64)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, r) => write!(f, "pow({a}, {}/{})", r.num, r.den),
            Expr::Call(u, a) => write!(f, "{}({a})", u.name()),
            Expr::Piecewise(g, t, e) => write!(f, "piecewise({g}, {t}, {e})"),
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.sym()),
            Guard::And(a, b) => write!(f, "({a} && {b})"),
            Guard::Or(a, b) => write!(f, "({a} || {b})"),
        }
    }
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Cmp(CmpOp),
    AndAnd,
    OrOr,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Cmp(op) => format!("'{}'", op.sym()),
            Tok::AndAnd => "'&&'".into(),
            Tok::OrOr => "'||'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at byte {}: found {}, expected {}",
            self.offset,
            self.found,
            self.expected.join(" or ")
        )
    }
}

impl std::error::Error for ParseError {}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0usize;
    while i < text.len() {
        let rest = &text[i..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        // the unicode minus sign is accepted as '-'
        if c == '\u{2212}' {
            toks.push((i, Tok::Minus));
            i += c.len_utf8();
            continue;
        }
        let tok = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = tok {
            toks.push((i, t));
            i += 1;
            continue;
        }
        if c == '&' || c == '|' {
            if i + 1 < text.len() && bytes[i + 1] == c as u8 {
                toks.push((i, if c == '&' { Tok::AndAnd } else { Tok::OrOr }));
                i += 2;
                continue;
            }
            return Err(ParseError {
                offset: i,
                found: format!("'{c}'"),
                expected: vec![format!("'{c}{c}'")],
            });
        }
        if c == '<' || c == '>' || c == '=' || c == '!' {
            let two = i + 1 < text.len() && bytes[i + 1] == b'=';
            let op = match (c, two) {
                ('<', true) => CmpOp::Le,
                ('<', false) => CmpOp::Lt,
                ('>', true) => CmpOp::Ge,
                ('>', false) => CmpOp::Gt,
                ('=', true) => CmpOp::Eq,
                ('!', true) => CmpOp::Ne,
                _ => {
                    return Err(ParseError {
                        offset: i,
                        found: format!("'{c}'"),
                        expected: vec!["comparison operator".into()],
                    })
                }
            };
            toks.push((i, Tok::Cmp(op)));
            i += if two { 2 } else { 1 };
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            let mut seen_e = false;
            while j < text.len() {
                let d = bytes[j] as char;
                if d.is_ascii_digit() || d == '.' {
                    j += 1;
                } else if (d == 'e' || d == 'E') && !seen_e {
                    seen_e = true;
                    j += 1;
                    if j < text.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                } else {
                    break;
                }
            }
            let v: f64 = text[i..j].parse().map_err(|_| ParseError {
                offset: i,
                found: format!("'{}'", &text[i..j]),
                expected: vec!["number".into()],
            })?;
            toks.push((i, Tok::Num(v)));
            i = j;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < text.len()
                && ((bytes[j] as char).is_ascii_alphanumeric() || bytes[j] == b'_')
            {
                j += 1;
            }
            toks.push((i, Tok::Ident(text[i..j].to_string())));
            i = j;
            continue;
        }
        return Err(ParseError {
            offset: i,
            found: format!("'{c}'"),
            expected: vec!["token".into()],
        });
    }
    toks.push((text.len(), Tok::Eof));
    Ok(toks)
}

// ---------------------------------------------------------------------------
// parser: pow > unary minus > * / > + -, all binary operators left
// associative; guards appear only inside piecewise(...)

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            found: self.peek().describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, want: &Tok, desc: &str) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.err(&[desc]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while matches!(self.peek(), Tok::Caret) {
            self.bump();
            let r = self.rational()?;
            base = Expr::Pow(Box::new(base), r);
        }
        Ok(base)
    }

    /// A rational constant: `3`, `-2`, `3/2`, or any of those in parentheses.
    fn rational(&mut self) -> Result<Rational, ParseError> {
        let parens = matches!(self.peek(), Tok::LParen);
        if parens {
            self.bump();
        }
        let neg = matches!(self.peek(), Tok::Minus);
        if neg {
            self.bump();
        }
        let num = self.integer("integer exponent")?;
        let mut den = 1i64;
        if matches!(self.peek(), Tok::Slash) {
            self.bump();
            den = self.integer("integer denominator")?;
            if den == 0 {
                return Err(self.err(&["nonzero denominator"]));
            }
        }
        if parens {
            self.expect(&Tok::RParen, "')'")?;
        }
        Ok(Rational { num: if neg { -num } else { num }, den })
    }

    fn integer(&mut self, desc: &str) -> Result<i64, ParseError> {
        match self.peek() {
            Tok::Num(v) if *v == v.trunc() && v.abs() < 1e15 => {
                let n = *v as i64;
                self.bump();
                Ok(n)
            }
            _ => Err(self.err(&[desc])),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Lit(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let off = self.offset();
                self.bump();
                if let Some(idx) = var_index(&name) {
                    return Ok(Expr::Var(idx));
                }
                if let Some(f) = UnaryFn::from_name(&name) {
                    self.expect(&Tok::LParen, "'('")?;
                    let a = self.expr()?;
                    self.expect(&Tok::RParen, "')'")?;
                    return Ok(Expr::Call(f, Box::new(a)));
                }
                if name == "pow" {
                    self.expect(&Tok::LParen, "'('")?;
                    let a = self.expr()?;
                    self.expect(&Tok::Comma, "','")?;
                    let r = self.rational()?;
                    self.expect(&Tok::RParen, "')'")?;
                    return Ok(Expr::Pow(Box::new(a), r));
                }
                if name == "piecewise" {
                    self.expect(&Tok::LParen, "'('")?;
                    let g = self.guard()?;
                    self.expect(&Tok::Comma, "','")?;
                    let t = self.expr()?;
                    self.expect(&Tok::Comma, "','")?;
                    let e = self.expr()?;
                    self.expect(&Tok::RParen, "')'")?;
                    return Ok(Expr::Piecewise(Box::new(g), Box::new(t), Box::new(e)));
                }
                Err(ParseError {
                    offset: off,
                    found: format!("unknown identifier '{name}'"),
                    expected: vec![
                        "variable x1..xN (or x, y, z)".into(),
                        "function name".into(),
                    ],
                })
            }
            _ => Err(self.err(&["number", "variable", "function call", "'('"])),
        }
    }

    fn guard(&mut self) -> Result<Guard, ParseError> {
        let mut lhs = self.guard_and()?;
        while matches!(self.peek(), Tok::OrOr) {
            self.bump();
            lhs = Guard::Or(Box::new(lhs), Box::new(self.guard_and()?));
        }
        Ok(lhs)
    }

    fn guard_and(&mut self) -> Result<Guard, ParseError> {
        let mut lhs = self.guard_atom()?;
        while matches!(self.peek(), Tok::AndAnd) {
            self.bump();
            lhs = Guard::And(Box::new(lhs), Box::new(self.guard_atom()?));
        }
        Ok(lhs)
    }

    fn guard_atom(&mut self) -> Result<Guard, ParseError> {
        // a '(' could open a nested guard or a parenthesized operand of a
        // comparison; try the guard reading first and rewind on failure
        if matches!(self.peek(), Tok::LParen) {
            let save = self.pos;
            self.bump();
            if let Ok(g) = self.guard() {
                if matches!(self.peek(), Tok::RParen) {
                    self.bump();
                    return Ok(g);
                }
            }
            self.pos = save;
        }
        let a = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(self.err(&["comparison operator"])),
        };
        self.bump();
        let b = self.expr()?;
        Ok(Guard::Cmp(op, Box::new(a), Box::new(b)))
    }
}

fn var_index(name: &str) -> Option<usize> {
    match name {
        "x" => return Some(0),
        "y" => return Some(1),
        "z" => return Some(2),
        "t" => return Some(0),
        _ => {}
    }
    let rest = name.strip_prefix('x')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: usize = rest.parse().ok()?;
    if n == 0 { None } else { Some(n - 1) }
}

pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.err(&["operator", "end of input"]));
    }
    Ok(e)
}

/// Parses a standalone guard (used by sublevel-set model files).
pub fn parse_guard(text: &str) -> Result<Guard, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let g = p.guard()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.err(&["'&&'", "'||'", "end of input"]));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use conekit::geom::vec_from;

    fn ev(src: &str, p: &[f64]) -> f64 {
        parse_expression(src).unwrap().eval(&vec_from(p))
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2*3", &[]), 7.0);
        assert_eq!(ev("2^3^2", &[]), 64.0); // left associative
        assert_eq!(ev("-2^2", &[]), -4.0); // pow binds tighter than unary minus
        assert_eq!(ev("10 - 4 - 3", &[]), 3.0);
        assert_eq!(ev("12 / 4 / 3", &[]), 1.0);
        assert_eq!(ev("x1*x2/(x1^2+x2^2)", &[1.0, 1.0]), 0.5);
    }

    #[test]
    fn radical_expression_evaluates() {
        let v = ev("x1 + x2 + sqrt(x2^3*(x1-x2)^3)", &[1.0, 0.0]);
        assert_eq!(v, 1.0);
        // unicode minus accepted
        let v2 = ev("x1 + x2 + sqrt(x2^3*(x1\u{2212}x2)^3)", &[1.0, 0.0]);
        assert_eq!(v2, 1.0);
    }

    #[test]
    fn aliases_and_rational_powers() {
        assert_eq!(ev("x + y + z", &[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(ev("pow(x1, 3/2)", &[4.0]), 8.0);
        assert_eq!(ev("x1^(1/2)", &[9.0]), 3.0);
        assert_eq!(ev("x1^-1", &[4.0]), 0.25);
    }

    #[test]
    fn piecewise_guards_with_tolerant_equality() {
        let src = "piecewise(y == x^2 && x != 0, 1, 0)";
        let e = parse_expression(src).unwrap();
        assert_eq!(e.eval(&vec_from(&[0.5, 0.25])), 1.0);
        assert_eq!(e.eval(&vec_from(&[0.5, 0.25 + 5e-13])), 1.0); // within 1e-12
        assert_eq!(e.eval(&vec_from(&[0.5, 0.3])), 0.0);
        assert_eq!(e.eval(&vec_from(&[0.0, 0.0])), 0.0);
        let or = parse_expression("piecewise(x < 0 || (x > 1 && y > 0), 1, 2)").unwrap();
        assert_eq!(or.eval(&vec_from(&[-1.0, 0.0])), 1.0);
        assert_eq!(or.eval(&vec_from(&[2.0, 1.0])), 1.0);
        assert_eq!(or.eval(&vec_from(&[0.5, 1.0])), 2.0);
    }

    #[test]
    fn errors_carry_byte_offsets() {
        let e = parse_expression("1 +").unwrap_err();
        assert_eq!(e.offset, 3);
        let e = parse_expression("foo(1)").unwrap_err();
        assert_eq!(e.offset, 0);
        assert!(e.found.contains("foo"));
        let e = parse_expression("x1 + )").unwrap_err();
        assert_eq!(e.offset, 5);
        assert!(!e.expected.is_empty());
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "x1 + x2 + sqrt(x2^3*(x1-x2)^3)",
            "piecewise(y == x^2 && x != 0, 1, 0)",
            "-x1^(3/2) * cbrt(x2) / (1 - exp(x3))",
            "piecewise(x < 0 || (x >= 1 && y > 0), sin(x), cos(x))",
            "pow(abs(x1), -2/3) + log(x2)",
        ] {
            let e = parse_expression(src).unwrap();
            let printed = e.to_string();
            let again = parse_expression(&printed)
                .unwrap_or_else(|err| panic!("reparse of {printed:?}: {err}"));
            assert_eq!(e, again, "round trip through {printed:?}");
        }
    }

    #[test]
    fn arity_reports_dimension() {
        assert_eq!(parse_expression("x1 + x3").unwrap().arity(), 3);
        assert_eq!(parse_expression("42").unwrap().arity(), 0);
        assert_eq!(parse_expression("y").unwrap().arity(), 2);
    }
}
