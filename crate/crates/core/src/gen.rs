//! Fixture environments and seeded random constraint sets, used to compare
//! the solver against brute-force enumeration.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::constraint::{Body, Cell, Constraint, ConstraintSet, GuardAtom};
use crate::refinement::{RefinementVar, VarScopes};
use crate::types::{DatatypeEnv, DatatypeId, UTypeSpec as S};

/// `data Arith = Lit Int | Add | Mul`, `data Lam = Cst Arith | BVr Int | FVr String | Abs Lam | App Lam Lam`.
pub fn lam_env() -> DatatypeEnv {
    DatatypeEnv::from_defs(&[
        ("Arith", &[], &[("Lit", &[S::Int]), ("Add", &[]), ("Mul", &[])]),
        (
            "Lam",
            &[],
            &[
                ("Cst", &[S::data("Arith")]),
                ("BVr", &[S::Int]),
                ("FVr", &[S::Str]),
                ("Abs", &[S::data("Lam")]),
                ("App", &[S::data("Lam"), S::data("Lam")]),
            ],
        ),
    ])
    .expect("Lam environment is well formed")
}

/// `data B = B1 | B2`, `data A = A1 | A2 B | A3 A`, `data C = C1 | C2 | C3`.
pub fn oracle_env() -> DatatypeEnv {
    DatatypeEnv::from_defs(&[
        ("B", &[], &[("B1", &[]), ("B2", &[])]),
        ("A", &[], &[("A1", &[]), ("A2", &[S::data("B")]), ("A3", &[S::data("A")])]),
        ("C", &[], &[("C1", &[]), ("C2", &[]), ("C3", &[])]),
    ])
    .expect("oracle environment is well formed")
}

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_vars: usize,
    pub max_constraints: usize,
    pub max_guard: usize,
    /// Upper bound on the total number of cell bits, which bounds the
    /// enumeration space at `2^max_bits`.
    pub max_bits: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_vars: 3, max_constraints: 12, max_guard: 2, max_bits: 12 }
    }
}

/// Picks variable roots whose slices fit in `cfg.max_bits`.
pub fn random_scopes(env: &DatatypeEnv, rng: &mut impl Rng, cfg: &GenConfig) -> VarScopes {
    let roots: Vec<DatatypeId> = env.datatype_ids().collect();
    loop {
        let n = rng.gen_range(1..=cfg.max_vars);
        let scopes: VarScopes = (0..n)
            .map(|i| {
                let d = *roots.choose(rng).unwrap();
                (RefinementVar(i as u32 + 1), env.slice(d).members.clone())
            })
            .collect();
        let bits: usize = scopes.values().flatten().map(|d| env.ctors_of(*d).len()).sum();
        if bits <= cfg.max_bits {
            return scopes;
        }
    }
}

fn random_cell(rng: &mut impl Rng, cells: &[Cell]) -> Cell {
    *cells.choose(rng).unwrap()
}

/// A random atomic constraint set over `scopes`.
pub fn random_atomic_set(env: &DatatypeEnv, rng: &mut impl Rng, scopes: &VarScopes, cfg: &GenConfig) -> ConstraintSet {
    let cells: Vec<Cell> = scopes
        .iter()
        .flat_map(|(x, ds)| ds.iter().map(|d| Cell::new(*x, *d)))
        .collect();
    let n = rng.gen_range(1..=cfg.max_constraints);
    let mut set = ConstraintSet::new();
    while set.len() < n {
        let guard: Vec<GuardAtom> = (0..rng.gen_range(0..=cfg.max_guard))
            .map(|_| {
                let c = random_cell(rng, &cells);
                GuardAtom::new(*env.ctors_of(c.dt).choose(rng).unwrap(), c)
            })
            .collect();
        let c = random_cell(rng, &cells);
        let body = match rng.gen_range(0..16) {
            0..=5 => {
                let same: Vec<Cell> = cells.iter().copied().filter(|o| o.dt == c.dt && *o != c).collect();
                match same.choose(rng) {
                    Some(o) => Body::Sub(c, *o),
                    None => continue,
                }
            }
            6..=9 => Body::Upper(c, rng.gen_range(0..env.full_mask(c.dt))),
            10..=14 => Body::Mem(*env.ctors_of(c.dt).choose(rng).unwrap(), c),
            _ => Body::Empty(*env.ctors_of(c.dt).choose(rng).unwrap()),
        };
        let c = Constraint::new(guard, body);
        if !c.is_tautology(env) {
            set.insert(c);
        }
    }
    set
}
