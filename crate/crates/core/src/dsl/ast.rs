//! Abstract syntax of the hybrid language and recognition of the
//! three-hole sketch.
//!
//! ```text
//! e ::= n | x | f(e, ..) | !e
//! c ::= x := e | c; c | while e do c | act e
//! f ::= R | f R | ??
//! ```
//!
//! Functions are declarative: a body is either a clause list or a hole.

use std::fmt;

use crate::hole::Hole;
use crate::logic::Clause;

use super::SketchError;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(i64),
    Var(String),
    Call { func: String, args: Vec<Expr> },
    Not(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cmd {
    Assign { var: String, expr: Expr },
    Seq(Vec<Cmd>),
    While { cond: Expr, body: Box<Cmd> },
    /// Executes the action held by an expression in the environment.
    Act(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FuncBody {
    Clauses(Vec<Clause>),
    Hole(Hole),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncDef {
    pub name: String,
    pub body: FuncBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: Vec<FuncDef>,
    pub main: Cmd,
}

fn var(x: &str) -> Expr {
    Expr::Var(x.into())
}

fn call(f: &str, args: Vec<Expr>) -> Expr {
    Expr::Call {
        func: f.into(),
        args,
    }
}

impl Program {
    /// The standard sketch:
    ///
    /// ```text
    /// while !done(s) do
    ///   l := where(s);
    ///   while !arrived(s, l) do
    ///     d := how(pos(s, l)); act d
    ///   a := what(s, l); act a
    /// ```
    pub fn sketch() -> Program {
        let inner = Cmd::While {
            cond: Expr::Not(Box::new(call("arrived", vec![var("s"), var("l")]))),
            body: Box::new(Cmd::Seq(vec![
                Cmd::Assign {
                    var: "d".into(),
                    expr: call("how", vec![call("pos", vec![var("s"), var("l")])]),
                },
                Cmd::Act(var("d")),
            ])),
        };
        let body = Cmd::Seq(vec![
            Cmd::Assign {
                var: "l".into(),
                expr: call("where", vec![var("s")]),
            },
            inner,
            Cmd::Assign {
                var: "a".into(),
                expr: call("what", vec![var("s"), var("l")]),
            },
            Cmd::Act(var("a")),
        ]);
        Program {
            functions: Hole::ALL
                .iter()
                .map(|h| FuncDef {
                    name: h.name().into(),
                    body: FuncBody::Hole(*h),
                })
                .collect(),
            main: Cmd::While {
                cond: Expr::Not(Box::new(call("done", vec![var("s")]))),
                body: Box::new(body),
            },
        }
    }

    pub fn function(&self, name: &str) -> Option<&FuncDef> {
        self.functions.iter().find(|f| f.name == name)
    }
}

/// Checks that `program` has the shape of [`Program::sketch`], with each
/// of `where`, `how`, `what` defined either as its hole or as clauses.
/// Anything else parses as a program but cannot be executed.
pub fn recognize(program: &Program) -> Result<(), SketchError> {
    let want = Program::sketch();
    if program.main != want.main {
        return Err(SketchError::Unsupported(
            "only the three-hole sketch `while !done(s) do l := where(s); while !arrived(s, l) do \
             d := how(pos(s, l)); act d; a := what(s, l); act a` can be executed"
                .into(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for f in &program.functions {
        if !seen.insert(f.name.as_str()) {
            return Err(SketchError::Unsupported(format!("function `{}` defined twice", f.name)));
        }
        match (f.name.parse::<Hole>(), &f.body) {
            (Ok(h), FuncBody::Hole(g)) if h == *g => {}
            (Ok(_), FuncBody::Clauses(_)) => {}
            (Ok(h), FuncBody::Hole(g)) => {
                return Err(SketchError::Unsupported(format!(
                    "function `{h}` is bound to the {g} hole"
                )))
            }
            (Err(_), _) => {
                return Err(SketchError::Unsupported(format!(
                    "the sketch has no function named `{}`",
                    f.name
                )))
            }
        }
    }
    for h in Hole::ALL {
        if !seen.contains(h.name()) {
            return Err(SketchError::Unsupported(format!("function `{h}` is missing")));
        }
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(n) => write!(f, "{n}"),
            Expr::Var(x) => f.write_str(x),
            Expr::Not(e) => write!(f, "!{e}"),
            Expr::Call { func, args } => {
                write!(f, "{func}(")?;
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

impl Cmd {
    fn write(&self, f: &mut fmt::Formatter<'_>, indent: usize) -> fmt::Result {
        let pad = "  ".repeat(indent);
        match self {
            Cmd::Assign { var, expr } => writeln!(f, "{pad}{var} := {expr}"),
            Cmd::Act(e) => writeln!(f, "{pad}act {e}"),
            Cmd::Seq(cs) => cs.iter().try_for_each(|c| c.write(f, indent)),
            Cmd::While { cond, body } => {
                writeln!(f, "{pad}while {cond} do")?;
                body.write(f, indent + 1)
            }
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for func in &self.functions {
            match &func.body {
                FuncBody::Hole(h) => writeln!(f, "fn {} = ??{}", func.name, h.name().to_uppercase())?,
                FuncBody::Clauses(cs) => {
                    writeln!(f, "fn {} =", func.name)?;
                    for c in cs {
                        writeln!(f, "  {c}")?;
                    }
                }
            }
        }
        self.main.write(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sketch_is_recognized() {
        assert!(recognize(&Program::sketch()).is_ok());
        let text = Program::sketch().to_string();
        assert!(text.contains("l := where(s)"));
        assert!(text.contains("fn how = ??HOW"));
    }

    #[test]
    fn other_programs_are_rejected() {
        let mut p = Program::sketch();
        p.main = Cmd::Assign {
            var: "x".into(),
            expr: Expr::Const(1),
        };
        assert!(matches!(recognize(&p), Err(SketchError::Unsupported(_))));

        let mut q = Program::sketch();
        q.functions.pop();
        assert!(recognize(&q).is_err());

        let mut r = Program::sketch();
        r.functions[0].body = FuncBody::Hole(Hole::How);
        assert!(recognize(&r).is_err());
    }
}
