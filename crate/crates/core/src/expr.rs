//! Coefficient expressions in the time variable `t`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 't' | func '(' expr ')' | '(' expr ')'
//! func    := exp | sin | cos | cosh | sinh | abs | sqrt
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-t^2`
//! is `-(t^2)` and `2^-1` is `0.5`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("function `{name}` at offset {offset} takes 1 argument, got {found}")]
    Arity { offset: usize, name: String, found: usize },
    #[error("division by zero at t = {t}")]
    DivisionByZero { t: f64 },
    #[error("domain error at t = {t}: {message}")]
    Domain { t: f64, message: String },
    #[error("non-finite result at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Cosh,
    Sinh,
    Abs,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    T,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn contains_t(&self) -> bool {
        match self {
            Node::Num(_) => false,
            Node::T => true,
            Node::Neg(inner) | Node::Call(_, inner) => inner.contains_t(),
            Node::Binary(_, l, r) => l.contains_t() || r.contains_t(),
        }
    }

    fn eval(&self, t: f64) -> Result<f64, ExprError> {
        let v = match self {
            Node::Num(v) => *v,
            Node::T => t,
            Node::Neg(inner) => -inner.eval(t)?,
            Node::Binary(op, l, r) => {
                let l = l.eval(t)?;
                let r = r.eval(t)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(ExprError::DivisionByZero { t });
                        }
                        l / r
                    }
                    BinOp::Pow => {
                        if l < 0.0 && r.fract() != 0.0 {
                            return Err(ExprError::Domain {
                                t,
                                message: format!("negative base {l} with fractional exponent {r}"),
                            });
                        }
                        if l == 0.0 && r < 0.0 {
                            return Err(ExprError::DivisionByZero { t });
                        }
                        l.powf(r)
                    }
                }
            }
            Node::Call(func, arg) => {
                let x = arg.eval(t)?;
                match func {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Cosh => x.cosh(),
                    Func::Sinh => x.sinh(),
                    Func::Abs => x.abs(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::Domain { t, message: format!("sqrt of negative value {x}") });
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite { t })
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::T => f.write_str("t"),
            Node::Neg(inner) => {
                f.write_str("(-")?;
                inner.write(f)?;
                f.write_str(")")
            }
            Node::Binary(op, l, r) => {
                f.write_str("(")?;
                match (op, l.as_ref()) {
                    // a bare negative literal would re-parse as -(x^y)
                    (BinOp::Pow, Node::Num(v)) if v.is_sign_negative() => write!(f, "({v})")?,
                    _ => l.write(f)?,
                }
                write!(f, "{}", op.symbol())?;
                r.write(f)?;
                f.write_str(")")
            }
            Node::Call(func, arg) => {
                write!(f, "{}(", func.name())?;
                arg.write(f)?;
                f.write_str(")")
            }
        }
    }
}

/// A parsed coefficient function of `t`. Immutable after parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffExpr {
    root: Node,
}

impl CoeffExpr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        Parser::new(text).parse()
    }

    /// Constant expression with the given value.
    pub fn constant(value: f64) -> Self {
        CoeffExpr { root: Node::Num(value) }
    }

    pub fn from_node(root: Node) -> Self {
        CoeffExpr { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, t: f64) -> Result<f64, ExprError> {
        self.root.eval(t)
    }

    /// True when the expression does not reference `t`.
    pub fn is_constant(&self) -> bool {
        !self.root.contains_t()
    }

    /// Value of a `t`-free expression, `None` otherwise or if it fails to evaluate.
    pub fn constant_value(&self) -> Option<f64> {
        if self.is_constant() {
            self.root.eval(0.0).ok()
        } else {
            None
        }
    }
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f)
    }
}

impl std::str::FromStr for CoeffExpr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoeffExpr::parse(s)
    }
}

/// Canonical fully parenthesized text of an expression.
pub fn format(e: &CoeffExpr) -> String {
    e.to_string()
}

// Largest magnitude for which integer folding stays exact in f64.
const EXACT_INT_LIMIT: f64 = 9_007_199_254_740_992.0;

fn is_exact_int(v: f64) -> bool {
    v.fract() == 0.0 && v.abs() <= EXACT_INT_LIMIT
}

fn fold_binary(op: BinOp, l: Node, r: Node) -> Node {
    if let (Node::Num(x), Node::Num(y)) = (&l, &r) {
        if is_exact_int(*x) && is_exact_int(*y) {
            let folded = match op {
                BinOp::Add => Some(x + y),
                BinOp::Sub => Some(x - y),
                BinOp::Mul => Some(x * y),
                BinOp::Div | BinOp::Pow => None,
            };
            if let Some(v) = folded.filter(|v| is_exact_int(*v)) {
                return Node::Num(v);
            }
        }
    }
    Node::Binary(op, Box::new(l), Box::new(r))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { src: text.as_bytes(), pos: 0 }
    }

    fn error<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { offset, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn describe(&mut self) -> String {
        match self.peek() {
            Some(c) => format!("unexpected `{}`", c as char),
            None => "unexpected end of input".to_string(),
        }
    }

    fn parse(mut self) -> Result<CoeffExpr, ExprError> {
        if self.peek().is_none() {
            return self.error(self.pos, "empty expression");
        }
        let root = self.expr()?;
        if self.peek().is_some() {
            let msg = self.describe();
            return self.error(self.pos, msg);
        }
        Ok(CoeffExpr { root })
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut node = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(node),
            };
            self.pos += 1;
            let rhs = self.term()?;
            node = fold_binary(op, node, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut node = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(node),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            node = fold_binary(op, node, rhs);
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Node::Num(v) => Node::Num(-v),
                other => Node::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    let offset = self.pos;
                    let msg = format!("expected `)`, {}", self.describe());
                    return self.error(offset, msg);
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            _ => {
                let offset = self.pos.max(start);
                let msg = self.describe();
                self.error(offset, msg)
            }
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let begin = p.pos;
            while p.src.get(p.pos).is_some_and(u8::is_ascii_digit) {
                p.pos += 1;
            }
            p.pos - begin
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return self.error(start, "malformed number");
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return self.error(save, "malformed exponent");
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Node::Num(v)),
            _ => self.error(start, format!("number `{text}` is not a finite real")),
        }
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        if name == "t" {
            return Ok(Node::T);
        }
        let Some(func) = Func::from_name(name) else {
            return Err(ExprError::UnknownIdentifier { offset: start, name: name.to_string() });
        };
        if self.peek() != Some(b'(') {
            return Err(ExprError::Arity { offset: start, name: name.to_string(), found: 0 });
        }
        self.pos += 1;
        if self.peek() == Some(b')') {
            return Err(ExprError::Arity { offset: start, name: name.to_string(), found: 0 });
        }
        let arg = self.expr()?;
        let mut found = 1;
        while self.peek() == Some(b',') {
            self.pos += 1;
            self.expr()?;
            found += 1;
        }
        if found != 1 {
            return Err(ExprError::Arity { offset: start, name: name.to_string(), found });
        }
        if self.peek() != Some(b')') {
            let offset = self.pos;
            let msg = format!("expected `)`, {}", self.describe());
            return self.error(offset, msg);
        }
        self.pos += 1;
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn num(v: f64) -> Box<Node> {
        Box::new(Node::Num(v))
    }

    #[test]
    fn zero_literal() {
        let e = CoeffExpr::parse("0").unwrap();
        assert_eq!(e.root(), &Node::Num(0.0));
        assert_eq!(format(&e), "0");
    }

    #[test]
    fn decaying_coefficient_tree() {
        let e = CoeffExpr::parse("4*exp(-0.1*t)").unwrap();
        let expected = Node::Binary(
            BinOp::Mul,
            num(4.0),
            Box::new(Node::Call(Func::Exp, Box::new(Node::Binary(BinOp::Mul, num(-0.1), Box::new(Node::T))))),
        );
        assert_eq!(e.root(), &expected);
        assert_eq!(format(&e), "(4*exp((-0.1*t)))");
    }

    #[test]
    fn syntax_error_offset() {
        match CoeffExpr::parse("2**") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(CoeffExpr::parse(""), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(CoeffExpr::parse("(1+t"), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(CoeffExpr::parse("1 t"), Err(ExprError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(CoeffExpr::parse("2*x"), Err(ExprError::UnknownIdentifier { offset: 2, .. })));
        assert!(matches!(CoeffExpr::parse("exp()"), Err(ExprError::Arity { found: 0, .. })));
        assert!(matches!(CoeffExpr::parse("sin(1,2)"), Err(ExprError::Arity { found: 2, .. })));
        assert!(matches!(CoeffExpr::parse("cos"), Err(ExprError::Arity { found: 0, .. })));
    }

    #[test]
    fn eval_examples() {
        let e = CoeffExpr::parse("exp(-0.1*t)").unwrap();
        assert_eq!(e.eval(0.0).unwrap(), 1.0);
        let e = CoeffExpr::parse("4*exp(-0.1*t)").unwrap();
        // 4/e to 40 digits: 1.471517764685769286382095080645843469783
        assert!((e.eval(10.0).unwrap() - 1.471_517_764_685_769_3).abs() < 1e-15);
        let e = CoeffExpr::parse("1/t").unwrap();
        assert!(matches!(e.eval(0.0), Err(ExprError::DivisionByZero { .. })));
        let e = CoeffExpr::parse("sqrt(t)").unwrap();
        assert!(matches!(e.eval(-1.0), Err(ExprError::Domain { .. })));
        let e = CoeffExpr::parse("exp(t)").unwrap();
        assert!(matches!(e.eval(1e4), Err(ExprError::NonFinite { .. })));
        let e = CoeffExpr::parse("t^0.5").unwrap();
        assert!(matches!(e.eval(-2.0), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn precedence_rules() {
        let e = CoeffExpr::parse("2+3*4").unwrap();
        assert_eq!(e.eval(7.0).unwrap(), 14.0);
        assert_eq!(CoeffExpr::parse("-t^2").unwrap().eval(3.0).unwrap(), -9.0);
        assert_eq!(CoeffExpr::parse("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
        assert_eq!(CoeffExpr::parse("2^-1").unwrap().eval(0.0).unwrap(), 0.5);
        assert_eq!(CoeffExpr::parse("8-3-2").unwrap().eval(0.0).unwrap(), 3.0);
        assert_eq!(CoeffExpr::parse("t/2/4").unwrap().eval(16.0).unwrap(), 2.0);
        assert_eq!(CoeffExpr::parse("(-2)^2").unwrap().eval(0.0).unwrap(), 4.0);
    }

    #[test]
    fn integer_folding_only() {
        assert_eq!(CoeffExpr::parse("2+3*4").unwrap().root(), &Node::Num(14.0));
        // non-integer literals are kept as written
        assert!(matches!(CoeffExpr::parse("0.1+0.2").unwrap().root(), Node::Binary(..)));
        assert!(matches!(CoeffExpr::parse("1/3").unwrap().root(), Node::Binary(..)));
    }

    #[test]
    fn constness() {
        assert_eq!(CoeffExpr::parse("sqrt(1.1)").unwrap().constant_value(), Some(1.1f64.sqrt()));
        assert!(!CoeffExpr::parse("1+0*t").unwrap().is_constant());
    }

    #[test]
    fn negative_literal_power_base_round_trip() {
        let e = CoeffExpr::from_node(Node::Binary(BinOp::Pow, num(-2.0), num(2.0)));
        let text = format(&e);
        assert_eq!(text, "((-2)^2)");
        assert_eq!(CoeffExpr::parse(&text).unwrap().eval(0.0).unwrap(), 4.0);
    }

    fn arb_node() -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(Node::Num),
            (-3i32..4).prop_map(|v| Node::Num(v as f64)),
            Just(Node::T),
        ];
        leaf.prop_recursive(5, 32, 2, |inner| {
            let op =
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow),];
            let func = prop_oneof![
                Just(Func::Exp),
                Just(Func::Sin),
                Just(Func::Cos),
                Just(Func::Cosh),
                Just(Func::Sinh),
                Just(Func::Abs),
                Just(Func::Sqrt),
            ];
            prop_oneof![
                inner.clone().prop_map(|n| Node::Neg(Box::new(n))),
                (op, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Node::Binary(op, Box::new(l), Box::new(r))),
                (func, inner).prop_map(|(f, a)| Node::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(node in arb_node(), ts in prop::collection::vec(-20.0f64..20.0, 1000)) {
            let e = CoeffExpr::from_node(node);
            let back = CoeffExpr::parse(&format(&e)).unwrap();
            for t in ts {
                match (e.eval(t), back.eval(t)) {
                    (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
                    (Err(_), Err(_)) => {}
                    (x, y) => prop_assert!(false, "mismatch at t={}: {:?} vs {:?}", t, x, y),
                }
            }
        }

        #[test]
        fn eval_is_pure(node in arb_node(), t in -20.0f64..20.0) {
            let e = CoeffExpr::from_node(node);
            let first = e.eval(t);
            let second = e.eval(t);
            match (first, second) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
                (Err(x), Err(y)) => prop_assert_eq!(x, y),
                _ => prop_assert!(false),
            }
        }
    }
}
