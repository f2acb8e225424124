//! Subtyping between refinement types.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::constraint::{Cell, ConstraintSet, GuardAtom, RawConstraint, SetExpr};
use crate::refinement::{inject, ChoiceFunction, ExtType, Refinement};
use crate::types::{DatatypeEnv, DatatypeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    SShape,
    SMis,
    SSim,
    SArrL,
    SArrR,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::SShape => "SShape",
            Rule::SMis => "SMis",
            Rule::SSim => "SSim",
            Rule::SArrL => "SArrL",
            Rule::SArrR => "SArrR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefutationStep {
    pub rule: Rule,
    pub detail: String,
}

/// A derivation of non-subtyping, from the goal down to the failing leaf.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Refutation {
    pub steps: Vec<RefutationStep>,
}

impl Refutation {
    pub fn rules(&self) -> Vec<Rule> {
        self.steps.iter().map(|s| s.rule).collect()
    }
}

impl fmt::Display for Refutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" / ")?;
            }
            write!(f, "{}: {}", s.rule, s.detail)?;
        }
        Ok(())
    }
}

fn choice_of(env: &DatatypeEnv, d: DatatypeId, r: &Refinement) -> ChoiceFunction {
    match r {
        Refinement::Choice(f) => f.restrict_to(env, d),
        Refinement::Var(x) => panic!("ground subtyping on open refinement {x}"),
    }
}

/// Decides `t1 ⊑ t2` for ground types, returning a refutation on failure.
pub fn check_subtype_ground(env: &DatatypeEnv, t1: &ExtType, t2: &ExtType) -> Result<(), Refutation> {
    check(env, t1, t2, true)
}

/// As [`check_subtype_ground`], but always unfolds datatypes instead of
/// comparing choices pointwise.
pub fn check_subtype_by_simulation(env: &DatatypeEnv, t1: &ExtType, t2: &ExtType) -> Result<(), Refutation> {
    check(env, t1, t2, false)
}

fn check(env: &DatatypeEnv, t1: &ExtType, t2: &ExtType, fast: bool) -> Result<(), Refutation> {
    if t1.under() != t2.under() {
        return Err(Refutation {
            steps: vec![RefutationStep {
                rule: Rule::SShape,
                detail: format!("{} vs {}", t1.under().display(env), t2.under().display(env)),
            }],
        });
    }
    let mut g = Ground { env, fast, assumed: HashSet::new(), path: Vec::new() };
    g.check(t1, t2).map_err(|leaf| {
        let mut steps = std::mem::take(&mut g.path);
        steps.push(leaf);
        Refutation { steps }
    })
}

pub fn is_subtype_ground(env: &DatatypeEnv, t1: &ExtType, t2: &ExtType) -> bool {
    check_subtype_ground(env, t1, t2).is_ok()
}

struct Ground<'a> {
    env: &'a DatatypeEnv,
    fast: bool,
    // Pairs already assumed related; every obligation is necessary, so a
    // single failure anywhere refutes the goal.
    assumed: HashSet<(ExtType, ExtType)>,
    path: Vec<RefutationStep>,
}

impl Ground<'_> {
    fn check(&mut self, t1: &ExtType, t2: &ExtType) -> Result<(), RefutationStep> {
        match (t1, t2) {
            (ExtType::Arrow(a1, b1), ExtType::Arrow(a2, b2)) => {
                self.path.push(RefutationStep { rule: Rule::SArrL, detail: "argument".into() });
                self.check(a2, a1)?;
                self.path.pop();
                self.path.push(RefutationStep { rule: Rule::SArrR, detail: "result".into() });
                self.check(b1, b2)?;
                self.path.pop();
                Ok(())
            }
            (ExtType::Data(d, r1, args1), ExtType::Data(_, r2, args2)) => {
                let env = self.env;
                let f1 = choice_of(env, *d, r1);
                let f2 = choice_of(env, *d, r2);
                let key = (
                    ExtType::Data(*d, Refinement::Choice(Arc::new(f1.clone())), args1.clone()),
                    ExtType::Data(*d, Refinement::Choice(Arc::new(f2.clone())), args2.clone()),
                );
                if self.fast
                    && args1.is_empty()
                    && env.is_positive(*d)
                    && subrefinement_pointwise(env, *d, &f1, &f2)
                {
                    return Ok(());
                }
                if !self.assumed.insert(key) {
                    return Ok(());
                }
                let m1 = f1.get(*d).unwrap();
                let m2 = f2.get(*d).unwrap();
                if m1 & !m2 != 0 {
                    let missing: Vec<_> = env.ctors_in_mask(*d, m1 & !m2).map(|k| env.ctor_name(k)).collect();
                    return Err(RefutationStep {
                        rule: Rule::SMis,
                        detail: format!("{} not in {}", missing.join(","), f2.display(env)),
                    });
                }
                let r1 = Refinement::Choice(Arc::new(f1));
                let r2 = Refinement::Choice(Arc::new(f2));
                for k in env.ctors_in_mask(*d, m1) {
                    for (i, u) in env.ctor(k).args.iter().enumerate() {
                        let a = instantiate_arg(env, *d, &r1, u, args1);
                        let b = instantiate_arg(env, *d, &r2, u, args2);
                        self.path.push(RefutationStep {
                            rule: Rule::SSim,
                            detail: format!("{} argument {}", env.ctor_name(k), i + 1),
                        });
                        self.check(&a, &b)?;
                        self.path.pop();
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// `inj_R(U)[args/params]` for an argument type `U` of a constructor of `d`.
pub fn instantiate_arg(env: &DatatypeEnv, d: DatatypeId, r: &Refinement, u: &crate::types::UType, args: &[ExtType]) -> ExtType {
    let t = inject(env, r, u);
    if args.is_empty() {
        return t;
    }
    let sub: BTreeMap<_, _> = env.datatype(d).params.iter().cloned().zip(args.iter().cloned()).collect();
    t.subst(&sub)
}

/// Pointwise inclusion of `f1` in `f2` over the datatypes reachable from `d`
/// through constructors chosen by `f1`. For positive datatypes this
/// coincides with subtyping.
pub fn subrefinement_pointwise(env: &DatatypeEnv, d: DatatypeId, f1: &ChoiceFunction, f2: &ChoiceFunction) -> bool {
    let mut seen = HashSet::new();
    let mut stack = vec![d];
    while let Some(e) = stack.pop() {
        if !seen.insert(e) {
            continue;
        }
        let m1 = f1.get(e).unwrap_or(0);
        if m1 & !f2.get(e).unwrap_or(0) != 0 {
            return false;
        }
        for k in env.ctors_in_mask(e, m1) {
            for u in &env.ctor(k).args {
                collect_datatypes(u, &mut stack);
            }
        }
    }
    true
}

fn collect_datatypes(u: &crate::types::UType, out: &mut Vec<DatatypeId>) {
    use crate::types::UType;
    match u {
        UType::Var(_) | UType::Base(_) => {}
        UType::Data(d, args) => {
            out.push(*d);
            args.iter().for_each(|a| collect_datatypes(a, out));
        }
        UType::Arrow(a, b) => {
            collect_datatypes(a, out);
            collect_datatypes(b, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("subtyping between different underlying types `{lhs}` and `{rhs}`")]
pub struct ShapeMismatch {
    pub lhs: String,
    pub rhs: String,
}

/// Generates constraints equivalent to `t1 ⊑ t2` and adds them to `out`.
pub fn infer_subtype(env: &DatatypeEnv, t1: &ExtType, t2: &ExtType, out: &mut ConstraintSet) -> Result<(), ShapeMismatch> {
    if t1.under() != t2.under() {
        return Err(ShapeMismatch {
            lhs: t1.under().display(env).to_string(),
            rhs: t2.under().display(env).to_string(),
        });
    }
    let mut inf = Infer { env, visited: HashMap::new(), out };
    inf.go(t1, t2, &[]);
    Ok(())
}

struct Infer<'a> {
    env: &'a DatatypeEnv,
    // Guards under which a pair has already been expanded; an expansion under
    // a smaller guard implies every constraint a larger one would produce.
    visited: HashMap<(ExtType, ExtType), Vec<Vec<GuardAtom>>>,
    out: &'a mut ConstraintSet,
}

fn set_expr(env: &DatatypeEnv, d: DatatypeId, r: &Refinement) -> SetExpr {
    match r {
        Refinement::Var(x) => SetExpr::Cell(Cell::new(*x, d)),
        Refinement::Choice(f) => SetExpr::Lit(d, f.restrict_to(env, d).get(d).unwrap()),
    }
}

impl Infer<'_> {
    fn go(&mut self, t1: &ExtType, t2: &ExtType, guard: &[GuardAtom]) {
        if t1 == t2 {
            return;
        }
        match (t1, t2) {
            (ExtType::Arrow(a1, b1), ExtType::Arrow(a2, b2)) => {
                self.go(a2, a1, guard);
                self.go(b1, b2, guard);
            }
            (ExtType::Data(d, r1, args1), ExtType::Data(_, r2, args2)) => {
                let env = self.env;
                let key = (t1.clone(), t2.clone());
                let seen = self.visited.entry(key).or_default();
                if seen.iter().any(|g| g.iter().all(|a| guard.contains(a))) {
                    return;
                }
                seen.push(guard.to_vec());
                let lhs = set_expr(env, *d, r1);
                let rhs = set_expr(env, *d, r2);
                self.out.insert_raw(env, &RawConstraint::new(guard.to_vec(), lhs, rhs), None);
                for &k in env.ctors_of(*d) {
                    let inner = match lhs {
                        SetExpr::Cell(c) => {
                            let mut g = guard.to_vec();
                            let atom = GuardAtom::new(k, c);
                            if !g.contains(&atom) {
                                g.push(atom);
                                g.sort_unstable();
                            }
                            g
                        }
                        SetExpr::Lit(_, m) if m & env.ctor_bit(k) != 0 => guard.to_vec(),
                        SetExpr::Lit(..) => continue,
                    };
                    for u in &env.ctor(k).args {
                        let a = instantiate_arg(env, *d, r1, u, args1);
                        let b = instantiate_arg(env, *d, r2, u, args2);
                        self.go(&a, &b, &inner);
                    }
                }
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{enumerate_assignments, satisfies};
    use crate::refinement::{RefinementVar, VarScopes, VarSupply};
    use crate::types::fixtures::lam_env;
    use crate::types::{BaseType, UType};

    fn choice(env: &DatatypeEnv, d: &str, names: &[&str]) -> ExtType {
        let d = env.lookup_datatype(d).unwrap();
        let f = ChoiceFunction::from_ctor_names(env, d, names).unwrap();
        ExtType::Data(d, Refinement::Choice(Arc::new(f)), vec![])
    }

    fn string() -> ExtType {
        ExtType::Base(BaseType::String)
    }

    #[test]
    fn atms_refutation() {
        let env = lam_env();
        let latm0 = ExtType::arrow(choice(&env, "Lam", &["Lit", "Add", "Cst", "App"]), string());
        let atm0 = ExtType::arrow(choice(&env, "Lam", &["Lit", "Add", "Mul", "Cst", "App"]), string());
        let err = check_subtype_ground(&env, &latm0, &atm0).unwrap_err();
        assert_eq!(err.rules(), vec![Rule::SArrL, Rule::SSim, Rule::SMis]);
        assert!(err.steps[2].detail.starts_with("Mul"));
        assert!(check_subtype_ground(&env, &atm0, &latm0).is_ok());
    }

    #[test]
    fn reflexive_on_all_lam_choices_sample() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let x = RefinementVar(0);
        let scopes: VarScopes = [(x, env.slice(lam).members.clone())].into();
        for theta in enumerate_assignments(&env, &scopes) {
            let t = ExtType::Data(lam, Refinement::Var(x), vec![]).ground(&env, &theta).unwrap();
            assert!(is_subtype_ground(&env, &t, &t));
        }
    }

    #[test]
    fn pointwise_agrees_with_simulation() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let (x, y) = (RefinementVar(0), RefinementVar(1));
        let scopes: VarScopes = [(x, env.slice(lam).members.clone()), (y, env.slice(lam).members.clone())].into();
        for theta in enumerate_assignments(&env, &scopes) {
            let f1 = theta.choice_function(&env, x, lam).unwrap();
            let f2 = theta.choice_function(&env, y, lam).unwrap();
            let t1 = ExtType::Data(lam, Refinement::Choice(Arc::new(f1.clone())), vec![]);
            let t2 = ExtType::Data(lam, Refinement::Choice(Arc::new(f2.clone())), vec![]);
            assert_eq!(
                subrefinement_pointwise(&env, lam, &f1, &f2),
                check_subtype_by_simulation(&env, &t1, &t2).is_ok()
            );
        }
    }

    #[test]
    fn shape_mismatch() {
        let env = lam_env();
        let err = check_subtype_ground(&env, &choice(&env, "Lam", &[]), &choice(&env, "Arith", &[])).unwrap_err();
        assert_eq!(err.rules(), vec![Rule::SShape]);
    }

    #[test]
    fn lam_constraints() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let mut s = VarSupply::new();
        let x = s.fresh_type(&UType::Data(lam, vec![]));
        let y = s.fresh_type(&UType::Data(lam, vec![]));
        let mut out = ConstraintSet::new();
        infer_subtype(&env, &x, &y, &mut out).unwrap();
        assert_eq!(out.render(&env), "[Cst in X0(Lam)] ? X0(Arith) <= X1(Arith)\n? X0(Lam) <= X1(Lam)\n");
    }

    #[test]
    fn arith_and_base() {
        let env = lam_env();
        let arith = env.lookup_datatype("Arith").unwrap();
        let mut s = VarSupply::new();
        let x = s.fresh_type(&UType::Data(arith, vec![]));
        let y = s.fresh_type(&UType::Data(arith, vec![]));
        let mut out = ConstraintSet::new();
        infer_subtype(&env, &x, &y, &mut out).unwrap();
        assert_eq!(out.render(&env), "? X0(Arith) <= X1(Arith)\n");
        let int = UType::arrow(UType::Base(BaseType::Int), UType::Base(BaseType::Int));
        let mut out = ConstraintSet::new();
        infer_subtype(&env, &s.fresh_type(&int), &s.fresh_type(&int), &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn inference_matches_ground_on_lam_pairs() {
        let env = lam_env();
        let lam = env.lookup_datatype("Lam").unwrap();
        let mut s = VarSupply::new();
        let l = UType::Data(lam, vec![]);
        let t1 = s.fresh_type(&UType::arrow(l.clone(), UType::Base(BaseType::String)));
        let t2 = s.fresh_type(&UType::arrow(l, UType::Base(BaseType::String)));
        let mut out = ConstraintSet::new();
        infer_subtype(&env, &t1, &t2, &mut out).unwrap();
        let mut scopes = VarScopes::new();
        t1.var_scopes(&env, &mut scopes);
        t2.var_scopes(&env, &mut scopes);
        for theta in enumerate_assignments(&env, &scopes) {
            let g1 = t1.ground(&env, &theta).unwrap();
            let g2 = t2.ground(&env, &theta).unwrap();
            assert_eq!(satisfies(&env, &theta, &out).unwrap(), is_subtype_ground(&env, &g1, &g2));
        }
    }
}
