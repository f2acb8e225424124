//! Synthetic chain programs for measuring how checking time grows with
//! program size.

use std::fmt::Write;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::infer::{check_program, CheckError, CheckOptions, RunStats};
use crate::surface::{load, SurfaceSyntaxError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("generated program failed to load: {0}")]
    Load(#[from] SurfaceSyntaxError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// A program of `n` definitions over formulas where definition `i` calls
/// only definition `i - 1`. The first removes `Not` and `Imp`; every later one
/// matches only on the constructors its predecessor can return.
pub fn chain_program(n: usize) -> String {
    let mut s = String::from(
        "data L a = Atom a | NegAtom a\n\
         data Fm a = Lit (L a) | Not (Fm a) | And (Fm a) (Fm a) | Or (Fm a) (Fm a) | Imp (Fm a) (Fm a)\n\n\
         let f0 : Fm Int -> Fm Int =\n  \\x -> case x of {\n    Lit l -> Lit l ; Not p -> Or p p ; And p q -> And p q ;\n    Or p q -> Or p q ; Imp p q -> Or p q\n  }\n",
    );
    for i in 1..n {
        let _ = write!(
            s,
            "\nlet f{i} : Fm Int -> Fm Int =\n  \\x -> case f{} x of {{ Lit l -> Lit l ; And p q -> Or q p ; Or p q -> And q p }}\n",
            i - 1
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub n: usize,
    pub stats: RunStats,
    /// Restricted summary size of each definition, in order.
    pub sizes: Vec<usize>,
    pub safe: bool,
    /// Load plus check.
    pub elapsed: Duration,
}

impl ChainRun {
    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

pub fn bench_chain(n: usize, opts: &CheckOptions) -> Result<ChainRun, BenchError> {
    let src = chain_program(n.max(1));
    let start = Instant::now();
    let p = load(&src)?;
    let r = check_program(&p, opts)?;
    let elapsed = start.elapsed();
    Ok(ChainRun {
        n,
        stats: r.stats,
        sizes: r.defs.iter().map(|d| d.scheme.constraints.len()).collect(),
        safe: r.is_safe(),
        elapsed,
    })
}
