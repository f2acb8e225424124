//! Printing of surface programs in a form the parser reads back.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_program(p: &Program) -> String {
    let mut s = String::new();
    for d in &p.decls {
        match d {
            Decl::Data(d) => {
                write!(s, "data {}", d.name).unwrap();
                for a in &d.params {
                    write!(s, " {a}").unwrap();
                }
                s.push_str(" =");
                for (i, c) in d.ctors.iter().enumerate() {
                    s.push_str(if i == 0 { " " } else { " | " });
                    s.push_str(&c.name);
                    for a in &c.args {
                        s.push(' ');
                        atype(&mut s, a);
                    }
                }
            }
            Decl::Extern(e) => {
                write!(s, "extern {} : ", e.name).unwrap();
                scheme(&mut s, &e.scheme);
            }
            Decl::Let(l) => {
                write!(s, "let {} : ", l.name).unwrap();
                scheme(&mut s, &l.scheme);
                s.push_str(" =\n  ");
                expr(&mut s, &l.body, 1);
            }
        }
        s.push('\n');
    }
    s
}

fn scheme(s: &mut String, sc: &SchemeExpr) {
    if let Some(vs) = &sc.vars {
        write!(s, "forall {}. ", vs.join(" ")).unwrap();
    }
    ty(s, &sc.ty);
}

pub fn pretty_type(t: &TypeExpr) -> String {
    let mut s = String::new();
    ty(&mut s, t);
    s
}

fn ty(s: &mut String, t: &TypeExpr) {
    match t {
        TypeExpr::Arrow(a, b) => {
            if matches!(**a, TypeExpr::Arrow(..)) {
                s.push('(');
                ty(s, a);
                s.push(')');
            } else {
                ty(s, a);
            }
            s.push_str(" -> ");
            ty(s, b);
        }
        TypeExpr::Con(n, args, _) => {
            s.push_str(n);
            for a in args {
                s.push(' ');
                atype(s, a);
            }
        }
        TypeExpr::Var(v, _) => s.push_str(v),
    }
}

fn atype(s: &mut String, t: &TypeExpr) {
    match t {
        TypeExpr::Con(_, args, _) if args.is_empty() => ty(s, t),
        TypeExpr::Var(..) => ty(s, t),
        _ => {
            s.push('(');
            ty(s, t);
            s.push(')');
        }
    }
}

fn indent(s: &mut String, level: usize) {
    s.push('\n');
    for _ in 0..level {
        s.push_str("  ");
    }
}

fn expr(s: &mut String, e: &Expr, level: usize) {
    match e {
        Expr::Lam { param, ann, body, .. } => {
            write!(s, "\\{param}").unwrap();
            if let Some(t) = ann {
                s.push_str(" : ");
                atype(s, t);
            }
            s.push_str(" -> ");
            expr(s, body, level);
        }
        Expr::Case { scrut, arms, .. } => {
            s.push_str("case ");
            expr(s, scrut, level);
            s.push_str(" of {");
            for (i, a) in arms.iter().enumerate() {
                if i > 0 {
                    s.push_str(" ;");
                }
                indent(s, level + 1);
                match &a.pat {
                    Pattern::Wildcard => s.push('_'),
                    Pattern::Ctor(k, bs) => {
                        s.push_str(k);
                        for b in bs {
                            write!(s, " {b}").unwrap();
                        }
                    }
                }
                s.push_str(" -> ");
                expr(s, &a.body, level + 1);
            }
            indent(s, level);
            s.push('}');
        }
        Expr::App(f, a) => {
            match **f {
                Expr::Lam { .. } | Expr::Case { .. } => paren(s, f, level),
                _ => expr(s, f, level),
            }
            s.push(' ');
            aexpr(s, a, level);
        }
        _ => aexpr(s, e, level),
    }
}

fn paren(s: &mut String, e: &Expr, level: usize) {
    s.push('(');
    expr(s, e, level);
    s.push(')');
}

fn aexpr(s: &mut String, e: &Expr, level: usize) {
    match e {
        Expr::Var(v, _) => s.push_str(v),
        Expr::Con(c, _) => s.push_str(c),
        Expr::Int(n, _) => write!(s, "{n}").unwrap(),
        Expr::Str(v, _) => {
            s.push('"');
            for c in v.chars() {
                match c {
                    '"' => s.push_str("\\\""),
                    '\\' => s.push_str("\\\\"),
                    '\n' => s.push_str("\\n"),
                    '\t' => s.push_str("\\t"),
                    c => s.push(c),
                }
            }
            s.push('"');
        }
        _ => paren(s, e, level),
    }
}
