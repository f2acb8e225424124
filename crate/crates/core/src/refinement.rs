//! Refinement variables, choice functions and extended types.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::constraint::ConstraintSet;
use crate::types::{BaseType, DatatypeEnv, DatatypeId, UType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RefinementVar(pub u32);

impl fmt::Display for RefinementVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{}", self.0)
    }
}

/// For each variable, the set of datatypes at which its cells are meaningful.
pub type VarScopes = BTreeMap<RefinementVar, BTreeSet<DatatypeId>>;

/// A choice of constructor subset for every datatype in the slice of `root`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChoiceFunction {
    root: DatatypeId,
    choices: BTreeMap<DatatypeId, u64>,
}

impl ChoiceFunction {
    /// Builds a choice over `slice(root)`; datatypes absent from `choices`
    /// get the empty set and bits outside a datatype's constructors are dropped.
    pub fn new(env: &DatatypeEnv, root: DatatypeId, choices: &BTreeMap<DatatypeId, u64>) -> Self {
        let choices = env
            .slice(root)
            .members
            .iter()
            .map(|&d| (d, choices.get(&d).copied().unwrap_or(0) & env.full_mask(d)))
            .collect();
        ChoiceFunction { root, choices }
    }

    pub fn full(env: &DatatypeEnv, root: DatatypeId) -> Self {
        let choices = env.slice(root).members.iter().map(|&d| (d, env.full_mask(d))).collect();
        ChoiceFunction { root, choices }
    }

    pub fn empty(env: &DatatypeEnv, root: DatatypeId) -> Self {
        Self::new(env, root, &BTreeMap::new())
    }

    /// Builds a choice from constructor names; names belong to their own
    /// datatype, unmentioned datatypes get the empty set.
    pub fn from_ctor_names(env: &DatatypeEnv, root: DatatypeId, names: &[&str]) -> Option<Self> {
        let mut choices = BTreeMap::new();
        for n in names {
            let k = env.lookup_ctor(n)?;
            *choices.entry(env.ctor(k).datatype).or_insert(0) |= env.ctor_bit(k);
        }
        if choices.keys().any(|d| !env.slice(root).contains(*d)) {
            return None;
        }
        Some(Self::new(env, root, &choices))
    }

    pub fn root(&self) -> DatatypeId {
        self.root
    }

    pub fn get(&self, d: DatatypeId) -> Option<u64> {
        self.choices.get(&d).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DatatypeId, u64)> + '_ {
        self.choices.iter().map(|(d, m)| (*d, *m))
    }

    /// The same choices seen from a datatype inside the slice.
    pub fn restrict_to(&self, env: &DatatypeEnv, d: DatatypeId) -> ChoiceFunction {
        if d == self.root {
            return self.clone();
        }
        let choices = env.slice(d).members.iter().map(|m| (*m, self.choices[m])).collect();
        ChoiceFunction { root: d, choices }
    }

    /// Pointwise union; both must share the same root.
    pub fn join(&self, other: &ChoiceFunction) -> ChoiceFunction {
        assert_eq!(self.root, other.root);
        let choices = self.choices.iter().map(|(d, m)| (*d, m | other.choices[d])).collect();
        ChoiceFunction { root: self.root, choices }
    }

    pub fn display<'a>(&'a self, env: &'a DatatypeEnv) -> impl fmt::Display + 'a {
        DisplayChoice { f: self, env }
    }
}

struct DisplayChoice<'a> {
    f: &'a ChoiceFunction,
    env: &'a DatatypeEnv,
}

impl fmt::Display for DisplayChoice<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let env = self.env;
        write!(out, "{}{{", env.datatype_name(self.f.root))?;
        let mut first = true;
        for d in env.datatype_ids().filter(|d| self.f.choices.contains_key(d)) {
            for k in env.ctors_in_mask(d, self.f.choices[&d]) {
                if !first {
                    out.write_str(",")?;
                }
                first = false;
                out.write_str(env.ctor_name(k))?;
            }
        }
        out.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Refinement {
    Var(RefinementVar),
    Choice(Arc<ChoiceFunction>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtType {
    Var(String),
    Base(BaseType),
    Data(DatatypeId, Refinement, Vec<ExtType>),
    Arrow(Box<ExtType>, Box<ExtType>),
}

impl ExtType {
    pub fn arrow(dom: ExtType, cod: ExtType) -> ExtType {
        ExtType::Arrow(Box::new(dom), Box::new(cod))
    }

    pub fn under(&self) -> UType {
        match self {
            ExtType::Var(a) => UType::Var(a.clone()),
            ExtType::Base(b) => UType::Base(*b),
            ExtType::Data(d, _, args) => UType::Data(*d, args.iter().map(ExtType::under).collect()),
            ExtType::Arrow(a, b) => UType::arrow(a.under(), b.under()),
        }
    }

    pub fn frv(&self) -> BTreeSet<RefinementVar> {
        let mut out = BTreeSet::new();
        self.collect_frv(&mut out);
        out
    }

    pub fn collect_frv(&self, out: &mut BTreeSet<RefinementVar>) {
        match self {
            ExtType::Var(_) | ExtType::Base(_) => {}
            ExtType::Data(_, r, args) => {
                if let Refinement::Var(x) = r {
                    out.insert(*x);
                }
                args.iter().for_each(|t| t.collect_frv(out));
            }
            ExtType::Arrow(a, b) => {
                a.collect_frv(out);
                b.collect_frv(out);
            }
        }
    }

    /// Scopes of the variables in this type: each variable ranges over the
    /// slice of the datatype it decorates.
    pub fn var_scopes(&self, env: &DatatypeEnv, out: &mut VarScopes) {
        match self {
            ExtType::Var(_) | ExtType::Base(_) => {}
            ExtType::Data(d, r, args) => {
                if let Refinement::Var(x) = r {
                    out.entry(*x).or_default().extend(env.slice(*d).members.iter().copied());
                }
                args.iter().for_each(|t| t.var_scopes(env, out));
            }
            ExtType::Arrow(a, b) => {
                a.var_scopes(env, out);
                b.var_scopes(env, out);
            }
        }
    }

    pub fn is_ground(&self) -> bool {
        self.frv().is_empty()
    }

    pub fn subst(&self, sub: &BTreeMap<String, ExtType>) -> ExtType {
        match self {
            ExtType::Var(a) => sub.get(a).cloned().unwrap_or_else(|| self.clone()),
            ExtType::Base(_) => self.clone(),
            ExtType::Data(d, r, args) => {
                ExtType::Data(*d, r.clone(), args.iter().map(|t| t.subst(sub)).collect())
            }
            ExtType::Arrow(a, b) => ExtType::arrow(a.subst(sub), b.subst(sub)),
        }
    }

    pub fn rename(&self, ren: &BTreeMap<RefinementVar, RefinementVar>) -> ExtType {
        match self {
            ExtType::Var(_) | ExtType::Base(_) => self.clone(),
            ExtType::Data(d, r, args) => {
                let r = match r {
                    Refinement::Var(x) => Refinement::Var(*ren.get(x).unwrap_or(x)),
                    Refinement::Choice(_) => r.clone(),
                };
                ExtType::Data(*d, r, args.iter().map(|t| t.rename(ren)).collect())
            }
            ExtType::Arrow(a, b) => ExtType::arrow(a.rename(ren), b.rename(ren)),
        }
    }

    /// Replaces every variable refinement by its choice under `theta`,
    /// restricted to the slice of the decorated datatype.
    pub fn ground(&self, env: &DatatypeEnv, theta: &crate::constraint::Assignment) -> Option<ExtType> {
        Some(match self {
            ExtType::Var(_) | ExtType::Base(_) => self.clone(),
            ExtType::Data(d, r, args) => {
                let f = match r {
                    Refinement::Var(x) => {
                        let mut choices = BTreeMap::new();
                        for &m in &env.slice(*d).members {
                            choices.insert(m, theta.get(*x, m)?);
                        }
                        ChoiceFunction::new(env, *d, &choices)
                    }
                    Refinement::Choice(f) => f.restrict_to(env, *d),
                };
                let args = args.iter().map(|t| t.ground(env, theta)).collect::<Option<_>>()?;
                ExtType::Data(*d, Refinement::Choice(Arc::new(f)), args)
            }
            ExtType::Arrow(a, b) => ExtType::arrow(a.ground(env, theta)?, b.ground(env, theta)?),
        })
    }

    pub fn display<'a>(&'a self, env: &'a DatatypeEnv) -> impl fmt::Display + 'a {
        DisplayExt { ty: self, env, prec: 0 }
    }
}

struct DisplayExt<'a> {
    ty: &'a ExtType,
    env: &'a DatatypeEnv,
    prec: u8,
}

impl fmt::Display for DisplayExt<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |ty, prec| DisplayExt { ty, env: self.env, prec };
        match self.ty {
            ExtType::Var(a) => f.write_str(a),
            ExtType::Base(b) => write!(f, "{b}"),
            ExtType::Data(d, r, args) => {
                let paren = self.prec > 1 && (!args.is_empty() || matches!(r, Refinement::Var(_)));
                if paren {
                    f.write_str("(")?;
                }
                match r {
                    Refinement::Var(x) => write!(f, "inj{{{x}}} {}", self.env.datatype_name(*d))?,
                    Refinement::Choice(c) => write!(f, "{}", c.restrict_to(self.env, *d).display(self.env))?,
                }
                for a in args {
                    write!(f, " {}", sub(a, 2))?;
                }
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            ExtType::Arrow(a, b) => {
                if self.prec > 0 {
                    f.write_str("(")?;
                }
                write!(f, "{} -> {}", sub(a, 1), sub(b, 0))?;
                if self.prec > 0 {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// Embeds a constructor argument type under the refinement of its owner:
/// every datatype occurrence is decorated by the same refinement.
pub fn inject(env: &DatatypeEnv, r: &Refinement, u: &UType) -> ExtType {
    match u {
        UType::Var(a) => ExtType::Var(a.clone()),
        UType::Base(b) => ExtType::Base(*b),
        UType::Data(d, args) => {
            let r = match r {
                Refinement::Var(_) => r.clone(),
                Refinement::Choice(f) if f.root() == *d => r.clone(),
                Refinement::Choice(f) => Refinement::Choice(Arc::new(f.restrict_to(env, *d))),
            };
            ExtType::Data(*d, r.clone(), args.iter().map(|t| inject(env, &r, t)).collect())
        }
        UType::Arrow(a, b) => ExtType::arrow(inject(env, r, a), inject(env, r, b)),
    }
}

/// Allocates refinement variables; the id counter is shared by a whole
/// checking run, so allocation order is deterministic.
#[derive(Debug, Clone, Default)]
pub struct VarSupply {
    roots: Vec<DatatypeId>,
}

impl VarSupply {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self, root: DatatypeId) -> RefinementVar {
        self.roots.push(root);
        RefinementVar(self.roots.len() as u32 - 1)
    }

    pub fn allocated(&self) -> usize {
        self.roots.len()
    }

    pub fn root(&self, x: RefinementVar) -> DatatypeId {
        self.roots[x.0 as usize]
    }

    pub fn scopes<'a>(
        &self,
        env: &DatatypeEnv,
        vars: impl IntoIterator<Item = &'a RefinementVar>,
    ) -> VarScopes {
        vars.into_iter()
            .map(|x| (*x, env.slice(self.root(*x)).members.clone()))
            .collect()
    }

    /// A type with the shape of `ul` whose datatype occurrences carry
    /// pairwise distinct new variables, allocated left to right.
    pub fn fresh_type(&mut self, ul: &UType) -> ExtType {
        match ul {
            UType::Var(a) => ExtType::Var(a.clone()),
            UType::Base(b) => ExtType::Base(*b),
            UType::Data(d, args) => {
                let x = self.fresh(*d);
                ExtType::Data(*d, Refinement::Var(x), args.iter().map(|t| self.fresh_type(t)).collect())
            }
            UType::Arrow(a, b) => {
                let a = self.fresh_type(a);
                ExtType::arrow(a, self.fresh_type(b))
            }
        }
    }
}

/// `forall tyvars. forall vars. constraints => body`.
#[derive(Debug, Clone)]
pub struct ConstrainedScheme {
    pub tyvars: Vec<String>,
    pub vars: Vec<RefinementVar>,
    pub constraints: ConstraintSet,
    pub body: ExtType,
}

impl ConstrainedScheme {
    /// Renames the quantified variables apart and substitutes `type_args`
    /// for the type variables.
    pub fn instantiate(&self, supply: &mut VarSupply, type_args: &[ExtType]) -> (ExtType, ConstraintSet) {
        assert_eq!(type_args.len(), self.tyvars.len(), "type argument arity mismatch");
        let ren: BTreeMap<_, _> = self.vars.iter().map(|x| (*x, supply.fresh(supply.root(*x)))).collect();
        let sub: BTreeMap<_, _> = self.tyvars.iter().cloned().zip(type_args.iter().cloned()).collect();
        (self.body.rename(&ren).subst(&sub), self.constraints.rename(&ren))
    }
}
