//! Field-expression language.
//!
//! ```text
//! expr    := term (("+"|"-") term)* ;
//! term    := factor (("*"|"/") factor)* ;
//! factor  := unary ("^" factor)? ;
//! unary   := "-" unary | primary ;
//! primary := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")" .
//! ```
//!
//! `^` is right-associative and its base is a `unary`, so `-2^2` is `(-2)^2`.

use std::fmt;

use crate::error::{Error, Result, SourceSpan};
use crate::spinor::FourVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    T,
    X,
    Y,
    Z,
    Rho,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan2,
}

impl Function {
    pub fn arity(self) -> usize {
        match self {
            Function::Atan2 => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Tan => "tan",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sqrt => "sqrt",
            Function::Atan2 => "atan2",
        }
    }

    const ALL: [Function; 7] =
        [Function::Sin, Function::Cos, Function::Tan, Function::Exp, Function::Log, Function::Sqrt, Function::Atan2];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Number(f64),
    Var(Variable),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

/// Expression node with its source span. Equality compares structure only.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

impl PartialEq for ExprKind {
    fn eq(&self, other: &Self) -> bool {
        use ExprKind::*;
        match (self, other) {
            (Number(a), Number(b)) => a.to_bits() == b.to_bits(),
            (Var(a), Var(b)) => a == b,
            (Const(a), Const(b)) => a == b,
            (Neg(a), Neg(b)) => a == b,
            (Binary(o1, l1, r1), Binary(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (Call(f1, a1), Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    fn new(kind: ExprKind, span: SourceSpan) -> Self {
        Self { kind, span }
    }

    /// Unspanned constructor, mostly for building expressions in code.
    pub fn from_kind(kind: ExprKind) -> Self {
        Self::new(kind, SourceSpan { start: 0, end: 0 })
    }

    pub fn depends_on(&self, var: Variable) -> bool {
        match &self.kind {
            ExprKind::Var(v) => *v == var,
            ExprKind::Number(_) | ExprKind::Const(_) => false,
            ExprKind::Neg(a) => a.depends_on(var),
            ExprKind::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
            ExprKind::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    pub fn eval(&self, event: &FourVector) -> Result<f64> {
        let value = match &self.kind {
            ExprKind::Number(v) => *v,
            ExprKind::Const(Constant::Pi) => std::f64::consts::PI,
            ExprKind::Const(Constant::E) => std::f64::consts::E,
            ExprKind::Var(v) => match v {
                Variable::T => event[0],
                Variable::X => event[1],
                Variable::Y => event[2],
                Variable::Z => event[3],
                Variable::Rho => event[1].hypot(event[2]),
                Variable::Phi => {
                    if event[1] == 0.0 && event[2] == 0.0 {
                        return Err(self.domain("azimuth undefined on the axis"));
                    }
                    event[2].atan2(event[1])
                }
            },
            ExprKind::Neg(a) => -a.eval(event)?,
            ExprKind::Binary(op, l, r) => {
                let a = l.eval(event)?;
                let b = r.eval(event)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain("division by zero"));
                        }
                        a / b
                    }
                    BinaryOp::Pow => a.powf(b),
                }
            }
            ExprKind::Call(f, args) => {
                let a = args[0].eval(event)?;
                match f {
                    Function::Sin => a.sin(),
                    Function::Cos => a.cos(),
                    Function::Tan => a.tan(),
                    Function::Exp => a.exp(),
                    Function::Log => {
                        if a <= 0.0 {
                            return Err(self.domain(format!("log of non-positive value {a}")));
                        }
                        a.ln()
                    }
                    Function::Sqrt => {
                        if a < 0.0 {
                            return Err(self.domain(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                    Function::Atan2 => {
                        let b = args[1].eval(event)?;
                        if a == 0.0 && b == 0.0 {
                            return Err(self.domain("atan2(0, 0) is undefined"));
                        }
                        a.atan2(b)
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.domain(format!("non-finite result {value}")))
        }
    }

    fn domain(&self, message: impl Into<String>) -> Error {
        Error::ExpressionDomain { span: self.span, message: message.into() }
    }
}

/// Fully parenthesized rendering that re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(v) => write!(f, "{v:?}"),
            ExprKind::Var(v) => f.write_str(match v {
                Variable::T => "t",
                Variable::X => "x",
                Variable::Y => "y",
                Variable::Z => "z",
                Variable::Rho => "rho",
                Variable::Phi => "phi",
            }),
            ExprKind::Const(Constant::Pi) => f.write_str("pi"),
            ExprKind::Const(Constant::E) => f.write_str("e"),
            ExprKind::Neg(a) => write!(f, "-{a}"),
            ExprKind::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

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
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn syntax(offset: usize, found: impl ToString, expected: &[&str]) -> Error {
    Error::Syntax { offset, found: found.to_string(), expected: expected.iter().map(|s| s.to_string()).collect() }
}

fn lex(src: &str) -> Result<Vec<(Tok, SourceSpan)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 =
                    text.parse().map_err(|_| syntax(start, format!("malformed number `{text}`"), &["number"]))?;
                out.push((Tok::Num(value), SourceSpan { start, end: i }));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), SourceSpan { start, end: i }));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("character `{ch}`"), &["expression"]));
            }
        };
        i += 1;
        out.push((tok, SourceSpan { start, end: i }));
    }
    out.push((Tok::Eof, SourceSpan { start: src.len(), end: src.len() }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
}

const PRIMARY_START: &[&str] = &["number", "identifier", "`(`", "`-`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(syntax(self.span().start, self.peek(), &[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            let span = SourceSpan { start: lhs.span.start, end: rhs.span.end };
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            let span = SourceSpan { start: lhs.span.start, end: rhs.span.end };
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            let span = SourceSpan { start: base.span.start, end: exponent.span.end };
            return Ok(Expr::new(ExprKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)), span));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            let start = self.bump().1.start;
            let inner = self.unary()?;
            let span = SourceSpan { start, end: inner.span.end };
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let (tok, span) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::new(ExprKind::Number(v), span)),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::new(inner.kind, SourceSpan { start: span.start, end: close.end }))
            }
            Tok::Ident(name) => self.identifier(&name, span),
            other => Err(syntax(span.start, other, PRIMARY_START)),
        }
    }

    fn identifier(&mut self, name: &str, span: SourceSpan) -> Result<Expr> {
        let kind = match name {
            "t" => ExprKind::Var(Variable::T),
            "x" => ExprKind::Var(Variable::X),
            "y" => ExprKind::Var(Variable::Y),
            "z" => ExprKind::Var(Variable::Z),
            "rho" => ExprKind::Var(Variable::Rho),
            "phi" => ExprKind::Var(Variable::Phi),
            "pi" => ExprKind::Const(Constant::Pi),
            "e" => ExprKind::Const(Constant::E),
            _ => {
                let Some(func) = Function::ALL.into_iter().find(|f| f.name() == name) else {
                    return Err(syntax(
                        span.start,
                        format!("unknown identifier `{name}`"),
                        &["t", "x", "y", "z", "rho", "phi", "pi", "e", "function name"],
                    ));
                };
                return self.call(func, span);
            }
        };
        Ok(Expr::new(kind, span))
    }

    fn call(&mut self, func: Function, name_span: SourceSpan) -> Result<Expr> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        let close = self.span();
        if args.len() != func.arity() {
            let expected = if args.len() < func.arity() { "`,`" } else { "`)`" };
            return Err(syntax(close.start, format!("{} argument(s) to {}", args.len(), func.name()), &[expected]));
        }
        let close = self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::new(ExprKind::Call(func, args), SourceSpan { start: name_span.start, end: close.end }))
    }
}

pub fn parse_field_expression(source: &str) -> Result<Expr> {
    let mut parser = Parser { toks: lex(source)?, pos: 0 };
    let expr = parser.expr()?;
    match parser.peek() {
        Tok::Eof => Ok(expr),
        other => Err(syntax(parser.span().start, other, &["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(src: &str, x: f64, y: f64) -> f64 {
        parse_field_expression(src).unwrap().eval(&FourVector::new(0.0, x, y, 0.0)).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("2+3*4", 0.0, 0.0), 14.0);
        assert_eq!(eval("(2+3)*4", 0.0, 0.0), 20.0);
        assert_eq!(eval("2 - 3 - 4", 0.0, 0.0), -5.0);
        assert_eq!(eval("8 / 4 / 2", 0.0, 0.0), 1.0);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(eval("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(eval("-2^2", 0.0, 0.0), 4.0);
        assert_eq!(eval("3*2^2", 0.0, 0.0), 12.0);
    }

    #[test]
    fn atan2_quadrant() {
        assert!((eval("atan2(y, x)", 0.0, 2.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn constants_and_variables() {
        assert!((eval("sin(pi/2) * x", 3.0, 0.0) - 3.0).abs() < 1e-15);
        assert_eq!(eval("rho", 3.0, 4.0), 5.0);
        assert!((eval("log(e)", 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(eval("1.5e2 + 2E-1", 0.0, 0.0), 150.2);
    }

    #[test]
    fn syntax_errors_carry_offset_and_expectations() {
        match parse_field_expression("2 + * 3") {
            Err(Error::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 4);
                assert!(expected.iter().any(|e| e == "number"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_field_expression("foo(x)"), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse_field_expression("(x + 1"), Err(Error::Syntax { offset: 6, .. })));
        assert!(matches!(parse_field_expression("atan2(x)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_field_expression("x y"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse_field_expression(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse_field_expression("x $ 2"), Err(Error::Syntax { offset: 2, .. })));
    }

    #[test]
    fn domain_errors_report_location() {
        let e = parse_field_expression("1 + log(x - 5)").unwrap();
        match e.eval(&FourVector::new(0.0, 1.0, 0.0, 0.0)) {
            Err(Error::ExpressionDomain { span, .. }) => {
                assert_eq!(span, SourceSpan { start: 4, end: 14 });
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_field_expression("x / y").unwrap();
        assert!(e.eval(&FourVector::new(0.0, 1.0, 0.0, 0.0)).is_err());
        let e = parse_field_expression("sqrt(-1)").unwrap();
        assert!(e.eval(&FourVector::default()).is_err());
    }

    #[test]
    fn time_dependence_is_detected() {
        assert!(parse_field_expression("sin(t) * x").unwrap().depends_on(Variable::T));
        assert!(!parse_field_expression("x^2").unwrap().depends_on(Variable::T));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(|v| Expr::from_kind(ExprKind::Number(v))),
            prop_oneof![
                Just(Variable::T),
                Just(Variable::X),
                Just(Variable::Y),
                Just(Variable::Z),
                Just(Variable::Rho),
                Just(Variable::Phi)
            ]
            .prop_map(|v| Expr::from_kind(ExprKind::Var(v))),
            prop_oneof![Just(Constant::Pi), Just(Constant::E)].prop_map(|c| Expr::from_kind(ExprKind::Const(c))),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::from_kind(ExprKind::Neg(Box::new(a)))),
                (
                    prop_oneof![
                        Just(BinaryOp::Add),
                        Just(BinaryOp::Sub),
                        Just(BinaryOp::Mul),
                        Just(BinaryOp::Div),
                        Just(BinaryOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| { Expr::from_kind(ExprKind::Binary(op, Box::new(l), Box::new(r))) }),
                (0usize..6, inner.clone())
                    .prop_map(|(i, a)| { Expr::from_kind(ExprKind::Call(Function::ALL[i], vec![a])) }),
                (inner.clone(), inner)
                    .prop_map(|(a, b)| { Expr::from_kind(ExprKind::Call(Function::Atan2, vec![a, b])) }),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn pretty_print_round_trips(expr in arb_expr()) {
            let printed = expr.to_string();
            let reparsed = parse_field_expression(&printed).unwrap();
            prop_assert_eq!(reparsed, expr);
        }
    }
}
