//! Recursive descent parser for the core language.
//!
//! `a[i]` and `a[i] = x` are sugar for `select` and `store`. Declarations
//! (`Int x = e;`, `Bool b;`) and `nondet` extend the base grammar; see
//! `docs/language.md`.

use std::collections::BTreeMap;

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{Lexer, Pos, Tok, Token};

const RESERVED: &[&str] = &[
    "skip", "while", "if", "else", "assert", "assume", "true", "false", "nondet", "const",
    "select", "store", "ite", "neginf", "posinf", "Int", "Bool", "Array",
];

pub struct Parser {
    toks: Vec<Token>,
    idx: usize,
    schematic: bool,
}

/// Parse a complete program. Control point ids are assigned densely in
/// pre-order, which coincides with source order.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(text, false).tokenize()?;
    let mut p = Parser {
        toks,
        idx: 0,
        schematic: false,
    };
    let mut vocab = BTreeMap::new();
    let stmts = p.stmt_list(&mut vocab, /*stop_at_rbrace=*/ false)?;
    p.expect_eof()?;
    let mut prog = Program::new(vocab, Stmt::block(stmts));
    prog.renumber();
    Ok(prog)
}

/// Parse a statement sequence in schematic mode (meta-variables allowed).
/// Used by operator definitions; declarations are not allowed in templates.
pub fn parse_schematic_stmts(text: &str) -> Result<Vec<Stmt>, ParseError> {
    let toks = Lexer::new(text, true).tokenize()?;
    let mut p = Parser {
        toks,
        idx: 0,
        schematic: true,
    };
    let mut vocab = BTreeMap::new();
    let stmts = p.stmt_list(&mut vocab, false)?;
    p.expect_eof()?;
    Ok(stmts)
}

/// Parse a single expression in schematic mode.
pub fn parse_schematic_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::new(text, true).tokenize()?;
    let mut p = Parser {
        toks,
        idx: 0,
        schematic: true,
    };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parse a single expression (no meta-variables).
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer::new(text, false).tokenize()?;
    let mut p = Parser {
        toks,
        idx: 0,
        schematic: false,
    };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.idx].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.idx].tok.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.err("end of input"))
        }
    }

    fn err(&self, expected: &str) -> ParseError {
        ParseError::syntax(self.pos(), expected).with_found(self.peek().describe())
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(self.err(what));
                }
                self.bump();
                Ok(name)
            }
            _ => Err(self.err(what)),
        }
    }

    fn at_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "Int" || s == "Bool" || s == "Array")
    }

    fn type_expr(&mut self) -> Result<TypeExpr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "Int" => {
                self.bump();
                Ok(TypeExpr::Int)
            }
            Tok::Ident(s) if s == "Bool" => {
                self.bump();
                Ok(TypeExpr::Bool)
            }
            Tok::Ident(s) if s == "Array" => {
                self.bump();
                let inner = self.type_expr()?;
                Ok(TypeExpr::array(inner))
            }
            _ => Err(self.err("a type (`Int`, `Bool`, or `Array`)")),
        }
    }

    fn stmt_list(
        &mut self,
        vocab: &mut BTreeMap<String, TypeExpr>,
        stop_at_rbrace: bool,
    ) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(out),
                Tok::RBrace if stop_at_rbrace => return Ok(out),
                _ => out.push(self.stmt(vocab)?),
            }
        }
    }

    fn block(&mut self, vocab: &mut BTreeMap<String, TypeExpr>) -> Result<Stmt, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let stmts = self.stmt_list(vocab, true)?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Stmt::block(stmts))
    }

    fn stmt(&mut self, vocab: &mut BTreeMap<String, TypeExpr>) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "skip" => {
                self.bump();
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::skip())
            }
            Tok::Ident(kw) if kw == "while" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block(vocab)?;
                Ok(Stmt::while_loop(cond, body))
            }
            Tok::Ident(kw) if kw == "if" => self.if_stmt(vocab),
            Tok::Ident(kw) if kw == "assert" || kw == "assume" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(if kw == "assert" {
                    Stmt::assert(cond)
                } else {
                    Stmt::assume(cond)
                })
            }
            _ if self.at_type() => {
                let ty = self.type_expr()?;
                let name = self.ident("a variable name")?;
                let rhs = if *self.peek() == Tok::Assign {
                    self.bump();
                    Some(self.rhs_expr(Some(&ty))?)
                } else {
                    None
                };
                self.expect(Tok::Semi, "`;`")?;
                vocab.insert(name.clone(), ty.clone());
                Ok(Stmt::decl(name, ty, rhs))
            }
            Tok::Ident(_) => {
                let lhs = self.ident("a statement")?;
                if *self.peek() == Tok::LBracket {
                    // a[i] = x  desugars to  a = store(a, i, x)
                    self.bump();
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    self.expect(Tok::Assign, "`=`")?;
                    let val = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    let rhs = Expr::store(Expr::var(lhs.clone()), idx, val);
                    Ok(Stmt::assign(lhs, rhs))
                } else {
                    self.expect(Tok::Assign, "`=`")?;
                    let ty = vocab.get(&lhs).cloned();
                    let rhs = self.rhs_expr(ty.as_ref())?;
                    self.expect(Tok::Semi, "`;`")?;
                    Ok(Stmt::assign(lhs, rhs))
                }
            }
            Tok::Meta(_) if self.schematic => {
                // `$r = ...;` template assignment to the matched left-hand side.
                let Tok::Meta(name) = self.bump() else {
                    unreachable!()
                };
                self.expect(Tok::Assign, "`=`")?;
                let rhs = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::new(StmtKind::Assign {
                    lhs: format!("${name}"),
                    rhs,
                }))
            }
            _ => Err(self.err("a statement")),
        }
    }

    fn if_stmt(&mut self, vocab: &mut BTreeMap<String, TypeExpr>) -> Result<Stmt, ParseError> {
        self.bump(); // `if`
        self.expect(Tok::LParen, "`(`")?;
        let cond = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        let then_branch = self.block(vocab)?;
        let else_branch = if matches!(self.peek(), Tok::Ident(s) if s == "else") {
            self.bump();
            if matches!(self.peek(), Tok::Ident(s) if s == "if") {
                // `else if` chain: wrap the nested if in a block.
                let nested = self.if_stmt(vocab)?;
                Stmt::block(vec![nested])
            } else {
                self.block(vocab)?
            }
        } else {
            Stmt::skip()
        };
        Ok(Stmt::if_else(cond, then_branch, else_branch))
    }

    /// An assignment right-hand side; `nondet` picks up the declared type.
    fn rhs_expr(&mut self, expected: Option<&TypeExpr>) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "nondet") {
            self.bump();
            return Ok(Expr::Nondet(expected.cloned()));
        }
        self.expr()
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            e = Expr::or(e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.cmp_expr()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            e = Expr::and(e, self.cmp_expr()?);
        }
        Ok(e)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let l = self.sum_expr()?;
        let op = self.peek().clone();
        match op {
            Tok::EqEq | Tok::NotEq | Tok::Leq | Tok::Lt | Tok::Geq | Tok::Gt => {
                self.bump();
                let r = self.sum_expr()?;
                Ok(match op {
                    Tok::EqEq => Expr::eq(l, r),
                    Tok::NotEq => Expr::not(Expr::eq(l, r)),
                    Tok::Leq => Expr::leq(l, r),
                    Tok::Lt => Expr::lt(l, r),
                    Tok::Geq => Expr::geq(l, r),
                    Tok::Gt => Expr::gt(l, r),
                    _ => unreachable!(),
                })
            }
            _ => Ok(l),
        }
    }

    fn sum_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term_expr()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    e = Expr::add(e, self.term_expr()?);
                }
                Tok::Minus => {
                    self.bump();
                    e = Expr::sub(e, self.term_expr()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn term_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary_expr()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    e = Expr::mul(e, self.unary_expr()?);
                }
                Tok::Slash => {
                    self.bump();
                    e = Expr::div(e, self.unary_expr()?);
                }
                _ => return Ok(e),
            }
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::not(self.unary_expr()?))
            }
            Tok::Minus => {
                self.bump();
                let inner = self.unary_expr()?;
                Ok(match inner {
                    Expr::IntLit(n) => Expr::IntLit(-n),
                    other => Expr::sub(Expr::int(0), other),
                })
            }
            _ => self.primary_expr(),
        }
    }

    fn call_args(&mut self, n: usize) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                self.expect(Tok::Comma, "`,`")?;
            }
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn lambda(&mut self) -> Result<LambdaPred, ParseError> {
        match self.peek().clone() {
            Tok::BackslashKw(kw) if kw == "lambda" => {
                self.bump();
            }
            _ => return Err(self.err("`\\lambda`")),
        }
        self.expect(Tok::LParen, "`(`")?;
        let value_var = self.ident("the value binder")?;
        self.expect(Tok::Comma, "`,`")?;
        let index_var = self.ident("the index binder")?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Dot, "`.`")?;
        let body = self.expr()?;
        Ok(LambdaPred::new(value_var, index_var, body))
    }

    fn quant_or_agg(&mut self, kw: &str) -> Result<Expr, ParseError> {
        let quant_kind = match kw {
            "forall" => Some(QuantKind::Forall),
            "exists" => Some(QuantKind::Exists),
            _ => None,
        };
        if let Some(kind) = quant_kind {
            self.expect(Tok::LParen, "`(`")?;
            let array = self.expr()?;
            self.expect(Tok::Comma, "`,`")?;
            let lo = self.expr()?;
            self.expect(Tok::Comma, "`,`")?;
            let hi = self.expr()?;
            self.expect(Tok::Comma, "`,`")?;
            let pred = self.lambda()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Quant {
                kind,
                array: Box::new(array),
                lo: Box::new(lo),
                hi: Box::new(hi),
                pred,
            });
        }
        let agg = match kw {
            "sum" => AggName::Sum,
            "min" => AggName::Min,
            "max" => AggName::Max,
            "product" => AggName::Product,
            "numof" => AggName::Numof,
            other => {
                return Err(self.err(&format!(
                    "a quantifier or aggregation keyword, found `\\{other}`"
                )))
            }
        };
        self.expect(Tok::LParen, "`(`")?;
        let array = self.expr()?;
        self.expect(Tok::Comma, "`,`")?;
        let lo = self.expr()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.expr()?;
        let pred = if agg.takes_pred() {
            self.expect(Tok::Comma, "`,`")?;
            Some(self.lambda()?)
        } else {
            None
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::Aggregate {
            agg,
            array: Box::new(array),
            lo: Box::new(lo),
            hi: Box::new(hi),
            pred,
        })
    }

    fn primary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::IntLit(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::BackslashKw(kw) => {
                self.bump();
                self.quant_or_agg(&kw)
            }
            Tok::Meta(name) => {
                if !self.schematic {
                    return Err(self.err("an expression"));
                }
                self.bump();
                let kind = if *self.peek() == Tok::Colon {
                    self.bump();
                    match self.peek().clone() {
                        Tok::Ident(k) if k == "var" => {
                            self.bump();
                            MetaKind::Var
                        }
                        Tok::Ident(k) if k == "lit" => {
                            self.bump();
                            MetaKind::Lit
                        }
                        _ => return Err(self.err("`var` or `lit` after `:`")),
                    }
                } else {
                    MetaKind::Expr
                };
                Ok(Expr::MetaVar { name, kind })
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => {
                    self.bump();
                    Ok(Expr::BoolLit(true))
                }
                "false" => {
                    self.bump();
                    Ok(Expr::BoolLit(false))
                }
                "neginf" => {
                    self.bump();
                    Ok(Expr::InfLit(false))
                }
                "posinf" => {
                    self.bump();
                    Ok(Expr::InfLit(true))
                }
                "nondet" => {
                    self.bump();
                    Ok(Expr::Nondet(None))
                }
                "const" => {
                    self.bump();
                    let mut args = self.call_args(1)?;
                    Ok(Expr::const_array(args.remove(0)))
                }
                "select" => {
                    self.bump();
                    let mut args = self.call_args(2)?;
                    let i = args.remove(1);
                    let a = args.remove(0);
                    Ok(Expr::select(a, i))
                }
                "store" => {
                    self.bump();
                    let mut args = self.call_args(3)?;
                    let x = args.remove(2);
                    let i = args.remove(1);
                    let a = args.remove(0);
                    Ok(Expr::store(a, i, x))
                }
                "ite" => {
                    self.bump();
                    let mut args = self.call_args(3)?;
                    let e = args.remove(2);
                    let t = args.remove(1);
                    let c = args.remove(0);
                    Ok(Expr::ite(c, t, e))
                }
                _ if RESERVED.contains(&name.as_str()) => Err(self.err("an expression")),
                _ => {
                    self.bump();
                    if *self.peek() == Tok::LBracket {
                        self.bump();
                        let idx = self.expr()?;
                        self.expect(Tok::RBracket, "`]`")?;
                        Ok(Expr::select(Expr::var(name), idx))
                    } else {
                        Ok(Expr::var(name))
                    }
                }
            },
            _ => Err(self.err("an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("Int x = 1; assert(x == 1);").unwrap();
        let StmtKind::Block(ss) = &p.body.kind else {
            panic!()
        };
        assert_eq!(ss.len(), 2);
        assert!(matches!(&ss[0].kind, StmtKind::Decl { name, .. } if name == "x"));
        assert!(matches!(&ss[1].kind, StmtKind::Assert(_)));
    }

    #[test]
    fn assign_without_decl_parses() {
        let p = parse("x = 1; assert(x == 1);").unwrap();
        let StmtKind::Block(ss) = &p.body.kind else {
            panic!()
        };
        assert!(matches!(&ss[0].kind, StmtKind::Assign { lhs, .. } if lhs == "x"));
    }

    #[test]
    fn malformed_while_reports_column() {
        let err = parse("while (").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.col, 8);
    }

    #[test]
    fn select_store_sugar() {
        let p = parse("Array Int a = const(0); a[3] = 7; Int x = a[3];").unwrap();
        let StmtKind::Block(ss) = &p.body.kind else {
            panic!()
        };
        assert!(matches!(
            ss[1].as_assignment(),
            Some((lhs, Expr::Store(..))) if lhs == "a"
        ));
        assert!(matches!(
            ss[2].as_assignment(),
            Some((_, Expr::Select(..)))
        ));
    }

    #[test]
    fn comparison_desugaring() {
        assert_eq!(parse_expr("a < b").unwrap(), Expr::lt(Expr::var("a"), Expr::var("b")));
        assert_eq!(parse_expr("a > b").unwrap(), Expr::gt(Expr::var("a"), Expr::var("b")));
        assert_eq!(parse_expr("a >= b").unwrap(), Expr::geq(Expr::var("a"), Expr::var("b")));
        assert_eq!(
            parse_expr("a != b").unwrap(),
            Expr::not(Expr::eq(Expr::var("a"), Expr::var("b")))
        );
    }

    #[test]
    fn negative_literal() {
        assert_eq!(parse_expr("-3").unwrap(), Expr::int(-3));
        assert_eq!(
            parse_expr("-x").unwrap(),
            Expr::sub(Expr::int(0), Expr::var("x"))
        );
    }

    #[test]
    fn quantifier_with_lambda() {
        let e = parse_expr("\\forall(a, 0, N, \\lambda(x, i). x == i)").unwrap();
        let Expr::Quant { kind, pred, .. } = e else {
            panic!()
        };
        assert_eq!(kind, QuantKind::Forall);
        assert_eq!(*pred.body, Expr::eq(Expr::var("x"), Expr::var("i")));
    }

    #[test]
    fn else_if_chain() {
        let p = parse("if (x == 0) { skip; } else if (x == 1) { skip; }").unwrap();
        let StmtKind::Block(ss) = &p.body.kind else {
            panic!()
        };
        let StmtKind::If { else_branch, .. } = &ss[0].kind else {
            panic!()
        };
        let StmtKind::Block(inner) = &else_branch.kind else {
            panic!()
        };
        assert!(matches!(&inner[0].kind, StmtKind::If { .. }));
    }

    #[test]
    fn nondet_in_decl_carries_type() {
        let p = parse("Int N = nondet;").unwrap();
        let StmtKind::Block(ss) = &p.body.kind else {
            panic!()
        };
        assert!(matches!(
            &ss[0].kind,
            StmtKind::Decl {
                rhs: Some(Expr::Nondet(Some(TypeExpr::Int))),
                ..
            }
        ));
    }

    #[test]
    fn meta_variables_only_in_schematic_mode() {
        assert!(parse("x = $y;").is_err());
        let stmts = parse_schematic_stmts("$r = $x + $alpha:lit;").unwrap();
        assert_eq!(stmts.len(), 1);
    }

    #[test]
    fn primed_identifiers_accepted() {
        let p = parse("Array Int a' = const(0); a' = store(a', 0, 1);").unwrap();
        assert!(p.vocab.contains_key("a'"));
    }

    #[test]
    fn control_points_dense_preorder() {
        let p = parse("Int x = 0; while (x <= 2) { x = x + 1; } assert(x == 3);").unwrap();
        let mut ids = Vec::new();
        p.body.visit(&mut |s| ids.push(s.id.0));
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert_eq!(ids, (0..ids.len() as u32).collect::<Vec<_>>());
    }
}
