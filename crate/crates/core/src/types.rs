//! Underlying (programmer-visible) types and the datatype environment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Index of a datatype in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DatatypeId(pub u32);

/// Program-wide constructor index in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CtorId(pub u32);

/// Constructor sets are bitsets over a datatype's constructors, indexed by
/// their position in the declaration.
pub const MAX_CTORS_PER_DATATYPE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseType {
    Int,
    String,
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseType::Int => f.write_str("Int"),
            BaseType::String => f.write_str("String"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UType {
    Var(String),
    Base(BaseType),
    Data(DatatypeId, Vec<UType>),
    Arrow(Box<UType>, Box<UType>),
}

impl UType {
    pub fn arrow(dom: UType, cod: UType) -> UType {
        UType::Arrow(Box::new(dom), Box::new(cod))
    }

    /// Builds `a1 -> ... -> an -> res`.
    pub fn arrows(args: impl IntoIterator<Item = UType>, res: UType) -> UType {
        let args: Vec<_> = args.into_iter().collect();
        args.into_iter()
            .rev()
            .fold(res, |acc, a| UType::arrow(a, acc))
    }

    pub fn subst(&self, sub: &BTreeMap<String, UType>) -> UType {
        match self {
            UType::Var(a) => sub.get(a).cloned().unwrap_or_else(|| self.clone()),
            UType::Base(_) => self.clone(),
            UType::Data(d, args) => UType::Data(*d, args.iter().map(|t| t.subst(sub)).collect()),
            UType::Arrow(a, b) => UType::arrow(a.subst(sub), b.subst(sub)),
        }
    }

    /// Splits `a1 -> ... -> an -> r` into its argument list and result.
    pub fn uncurry(&self) -> (Vec<&UType>, &UType) {
        let mut args = Vec::new();
        let mut cur = self;
        while let UType::Arrow(a, b) = cur {
            args.push(a.as_ref());
            cur = b;
        }
        (args, cur)
    }

    pub fn is_first_order(&self) -> bool {
        match self {
            UType::Var(_) | UType::Base(_) => true,
            UType::Data(_, args) => args.iter().all(UType::is_first_order),
            UType::Arrow(..) => false,
        }
    }

    pub fn datatype_occurrences(&self) -> usize {
        match self {
            UType::Var(_) | UType::Base(_) => 0,
            UType::Data(_, args) => 1 + args.iter().map(UType::datatype_occurrences).sum::<usize>(),
            UType::Arrow(a, b) => a.datatype_occurrences() + b.datatype_occurrences(),
        }
    }

    fn collect_datatypes(&self, out: &mut BTreeSet<DatatypeId>) {
        match self {
            UType::Var(_) | UType::Base(_) => {}
            UType::Data(d, args) => {
                out.insert(*d);
                args.iter().for_each(|t| t.collect_datatypes(out));
            }
            UType::Arrow(a, b) => {
                a.collect_datatypes(out);
                b.collect_datatypes(out);
            }
        }
    }

    pub fn display<'a>(&'a self, env: &'a DatatypeEnv) -> impl fmt::Display + 'a {
        DisplayUType { ty: self, env, prec: 0 }
    }
}

struct DisplayUType<'a> {
    ty: &'a UType,
    env: &'a DatatypeEnv,
    prec: u8,
}

impl fmt::Display for DisplayUType<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |ty, prec| DisplayUType { ty, env: self.env, prec };
        match self.ty {
            UType::Var(a) => f.write_str(a),
            UType::Base(b) => write!(f, "{b}"),
            UType::Data(d, args) if args.is_empty() => f.write_str(self.env.datatype_name(*d)),
            UType::Data(d, args) => {
                if self.prec > 1 {
                    f.write_str("(")?;
                }
                f.write_str(self.env.datatype_name(*d))?;
                for a in args {
                    write!(f, " {}", sub(a, 2))?;
                }
                if self.prec > 1 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            UType::Arrow(a, b) => {
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

/// A polymorphic type `forall a1 .. an. body`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UScheme {
    pub vars: Vec<String>,
    pub body: UType,
}

impl UScheme {
    pub fn mono(body: UType) -> Self {
        UScheme { vars: Vec::new(), body }
    }

    pub fn instantiate(&self, args: &[UType]) -> UType {
        let sub: BTreeMap<_, _> = self.vars.iter().cloned().zip(args.iter().cloned()).collect();
        self.body.subst(&sub)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatatypeDef {
    pub name: String,
    pub params: Vec<String>,
    pub ctors: Vec<CtorId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtorDef {
    pub name: String,
    pub datatype: DatatypeId,
    /// Position within the owning datatype; the bit used in constructor sets.
    pub index: u32,
    /// Argument types over the datatype's parameters.
    pub args: Vec<UType>,
}

/// The least dependency-closed set of datatypes containing `root`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub root: DatatypeId,
    pub members: BTreeSet<DatatypeId>,
}

impl Slice {
    pub fn contains(&self, d: DatatypeId) -> bool {
        self.members.contains(&d)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("duplicate datatype `{0}`")]
    DuplicateDatatype(String),
    #[error("duplicate constructor `{0}`")]
    DuplicateCtor(String),
    #[error("unknown datatype `{0}`")]
    UnknownDatatype(String),
    #[error("datatype `{name}` has {count} constructors; at most {MAX_CTORS_PER_DATATYPE} are supported")]
    TooManyCtors { name: String, count: usize },
    #[error("datatype `{0}` is applied at a type that is not one of its parameters inside its own recursive group (non-regular datatype)")]
    NonRegular(String),
}

/// Datatype definitions: each datatype maps to its parameters and an ordered
/// map from constructors to argument types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatatypeEnv {
    datatypes: Vec<DatatypeDef>,
    ctors: Vec<CtorDef>,
    datatype_names: BTreeMap<String, DatatypeId>,
    ctor_names: BTreeMap<String, CtorId>,
    slices: Vec<Slice>,
    positive: Vec<bool>,
}

/// Builder used while datatype declarations are collected; the argument types
/// may mention datatypes declared later, so they are resolved in a second pass.
#[derive(Debug, Default)]
pub struct DatatypeEnvBuilder {
    env: DatatypeEnv,
}

impl DatatypeEnvBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, params: Vec<String>) -> Result<DatatypeId, EnvError> {
        if self.env.datatype_names.contains_key(name) {
            return Err(EnvError::DuplicateDatatype(name.to_string()));
        }
        let id = DatatypeId(self.env.datatypes.len() as u32);
        self.env.datatypes.push(DatatypeDef { name: name.to_string(), params, ctors: Vec::new() });
        self.env.datatype_names.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn lookup(&self, name: &str) -> Option<DatatypeId> {
        self.env.datatype_names.get(name).copied()
    }

    pub fn params(&self, d: DatatypeId) -> &[String] {
        &self.env.datatypes[d.0 as usize].params
    }

    pub fn add_ctor(&mut self, d: DatatypeId, name: &str, args: Vec<UType>) -> Result<CtorId, EnvError> {
        if self.env.ctor_names.contains_key(name) {
            return Err(EnvError::DuplicateCtor(name.to_string()));
        }
        let id = CtorId(self.env.ctors.len() as u32);
        let def = &mut self.env.datatypes[d.0 as usize];
        let index = def.ctors.len() as u32;
        def.ctors.push(id);
        self.env.ctors.push(CtorDef { name: name.to_string(), datatype: d, index, args });
        self.env.ctor_names.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn finish(mut self) -> Result<DatatypeEnv, EnvError> {
        for def in &self.env.datatypes {
            if def.ctors.len() > MAX_CTORS_PER_DATATYPE {
                return Err(EnvError::TooManyCtors { name: def.name.clone(), count: def.ctors.len() });
            }
        }
        let n = self.env.datatypes.len();
        self.env.slices = (0..n).map(|i| self.env.compute_slice_uncached(DatatypeId(i as u32))).collect();
        self.env.check_regular()?;
        self.env.positive = (0..n).map(|i| self.env.compute_positive(DatatypeId(i as u32))).collect();
        Ok(self.env)
    }
}

impl DatatypeEnv {
    /// Convenience constructor used by tests and generated programs:
    /// `(name, params, [(ctor, args)])`, where args may refer to datatypes by
    /// name through `resolve`.
    pub fn from_defs(
        defs: &[(&str, &[&str], &[(&str, &[UTypeSpec])])],
    ) -> Result<DatatypeEnv, EnvError> {
        let mut b = DatatypeEnvBuilder::new();
        let ids: Vec<_> = defs
            .iter()
            .map(|(name, params, _)| b.declare(name, params.iter().map(|s| s.to_string()).collect()))
            .collect::<Result<_, _>>()?;
        for ((_, _, ctors), id) in defs.iter().zip(ids) {
            for (cname, args) in ctors.iter() {
                let args = args.iter().map(|a| a.resolve(&b)).collect::<Result<_, _>>()?;
                b.add_ctor(id, cname, args)?;
            }
        }
        b.finish()
    }

    pub fn datatype_count(&self) -> usize {
        self.datatypes.len()
    }

    pub fn datatype_ids(&self) -> impl Iterator<Item = DatatypeId> {
        (0..self.datatypes.len() as u32).map(DatatypeId)
    }

    pub fn datatype(&self, d: DatatypeId) -> &DatatypeDef {
        &self.datatypes[d.0 as usize]
    }

    pub fn datatype_name(&self, d: DatatypeId) -> &str {
        &self.datatypes[d.0 as usize].name
    }

    pub fn lookup_datatype(&self, name: &str) -> Option<DatatypeId> {
        self.datatype_names.get(name).copied()
    }

    pub fn ctor(&self, k: CtorId) -> &CtorDef {
        &self.ctors[k.0 as usize]
    }

    pub fn ctor_name(&self, k: CtorId) -> &str {
        &self.ctors[k.0 as usize].name
    }

    pub fn lookup_ctor(&self, name: &str) -> Option<CtorId> {
        self.ctor_names.get(name).copied()
    }

    pub fn ctors_of(&self, d: DatatypeId) -> &[CtorId] {
        &self.datatypes[d.0 as usize].ctors
    }

    /// Bitmask with a bit set for every constructor of `d`.
    pub fn full_mask(&self, d: DatatypeId) -> u64 {
        let n = self.ctors_of(d).len();
        if n == 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }

    pub fn ctor_bit(&self, k: CtorId) -> u64 {
        1u64 << self.ctor(k).index
    }

    /// Constructors of `d` whose bit is set in `mask`, in declaration order.
    pub fn ctors_in_mask(&self, d: DatatypeId, mask: u64) -> impl Iterator<Item = CtorId> + '_ {
        self.ctors_of(d)
            .iter()
            .copied()
            .filter(move |k| mask & self.ctor_bit(*k) != 0)
    }

    /// Type of constructor `k` as a scheme over its datatype's parameters:
    /// `forall params. args -> d params`.
    pub fn ctor_scheme(&self, k: CtorId) -> UScheme {
        let c = self.ctor(k);
        let def = self.datatype(c.datatype);
        let result = UType::Data(c.datatype, def.params.iter().cloned().map(UType::Var).collect());
        UScheme { vars: def.params.clone(), body: UType::arrows(c.args.iter().cloned(), result) }
    }

    /// Argument types of `k` instantiated at `type_args`.
    pub fn ctor_args_at(&self, k: CtorId, type_args: &[UType]) -> Vec<UType> {
        let c = self.ctor(k);
        let def = self.datatype(c.datatype);
        let sub: BTreeMap<_, _> = def.params.iter().cloned().zip(type_args.iter().cloned()).collect();
        c.args.iter().map(|t| t.subst(&sub)).collect()
    }

    pub fn slice(&self, d: DatatypeId) -> &Slice {
        &self.slices[d.0 as usize]
    }

    /// Whether every datatype in `d`'s slice occurs only positively within
    /// the slice's constructor argument types.
    pub fn is_positive(&self, d: DatatypeId) -> bool {
        self.positive[d.0 as usize]
    }

    pub fn max_ctors(&self) -> usize {
        self.datatypes.iter().map(|d| d.ctors.len()).max().unwrap_or(0)
    }

    pub fn max_slice(&self) -> usize {
        self.slices.iter().map(|s| s.members.len()).max().unwrap_or(0)
    }

    fn compute_slice_uncached(&self, root: DatatypeId) -> Slice {
        let mut members = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(d) = stack.pop() {
            if !members.insert(d) {
                continue;
            }
            let mut mentioned = BTreeSet::new();
            for &k in self.ctors_of(d) {
                for a in &self.ctor(k).args {
                    a.collect_datatypes(&mut mentioned);
                }
            }
            stack.extend(mentioned.into_iter().filter(|m| !members.contains(m)));
        }
        Slice { root, members }
    }

    // Inside a recursive group every occurrence must be applied to bare type
    // variables, which keeps the set of reachable instantiations finite.
    fn check_regular(&self) -> Result<(), EnvError> {
        fn visit(env: &DatatypeEnv, owner: DatatypeId, t: &UType) -> Result<(), EnvError> {
            match t {
                UType::Var(_) | UType::Base(_) => Ok(()),
                UType::Arrow(a, b) => {
                    visit(env, owner, a)?;
                    visit(env, owner, b)
                }
                UType::Data(d, args) => {
                    if env.slice(*d).contains(owner) && !args.iter().all(|a| matches!(a, UType::Var(_))) {
                        return Err(EnvError::NonRegular(env.datatype_name(*d).to_string()));
                    }
                    args.iter().try_for_each(|a| visit(env, owner, a))
                }
            }
        }
        for d in self.datatype_ids() {
            for &k in self.ctors_of(d) {
                for a in &self.ctor(k).args {
                    visit(self, d, a)?;
                }
            }
        }
        Ok(())
    }

    fn compute_positive(&self, root: DatatypeId) -> bool {
        fn ok(t: &UType, members: &BTreeSet<DatatypeId>, positive: bool) -> bool {
            match t {
                UType::Var(_) | UType::Base(_) => true,
                UType::Data(d, args) => {
                    (positive || !members.contains(d)) && args.iter().all(|a| ok(a, members, positive))
                }
                UType::Arrow(a, b) => ok(a, members, !positive) && ok(b, members, positive),
            }
        }
        let members = &self.slice(root).members;
        members.iter().all(|&d| {
            self.ctors_of(d)
                .iter()
                .all(|&k| self.ctor(k).args.iter().all(|a| ok(a, members, true)))
        })
    }
}

/// Name-based type description used to build environments in code.
#[derive(Debug, Clone)]
pub enum UTypeSpec {
    Var(&'static str),
    Int,
    Str,
    Data(&'static str, Vec<UTypeSpec>),
    Arrow(Box<UTypeSpec>, Box<UTypeSpec>),
}

impl UTypeSpec {
    pub fn data(name: &'static str) -> Self {
        UTypeSpec::Data(name, Vec::new())
    }

    fn resolve(&self, b: &DatatypeEnvBuilder) -> Result<UType, EnvError> {
        Ok(match self {
            UTypeSpec::Var(a) => UType::Var(a.to_string()),
            UTypeSpec::Int => UType::Base(BaseType::Int),
            UTypeSpec::Str => UType::Base(BaseType::String),
            UTypeSpec::Data(name, args) => {
                let d = b.lookup(name).ok_or_else(|| EnvError::UnknownDatatype(name.to_string()))?;
                UType::Data(d, args.iter().map(|a| a.resolve(b)).collect::<Result<_, _>>()?)
            }
            UTypeSpec::Arrow(a, r) => UType::arrow(a.resolve(b)?, r.resolve(b)?),
        })
    }
}
