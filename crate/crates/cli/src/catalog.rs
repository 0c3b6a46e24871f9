//! Scenarios bundled with the binary, addressable as `builtin:<name>`.

use std::fs;
use std::path::Path;

use crate::CliError;

pub struct Entry {
    pub name: &'static str,
    /// The property the scenario exercises.
    pub checks: &'static str,
    pub text: &'static str,
}

pub const CATALOG: &[Entry] = &[
    Entry {
        name: "manufactured-sine",
        checks: "second-order L2 convergence of the u and theta solvers against an exact solution",
        text: include_str!("../scenarios/manufactured-sine.ini"),
    },
    Entry {
        name: "small-data",
        checks: "small-data existence: norms shrink with the data, geometric Picard increments, ball radius certificate",
        text: include_str!("../scenarios/small-data.ini"),
    },
    Entry {
        name: "epsilon-linear",
        checks: "approximation by truncated nonlinearities f(T_{1/eps}) as eps -> 0",
        text: include_str!("../scenarios/epsilon-linear.ini"),
    },
    Entry {
        name: "positivity-r0",
        checks: "lower bound theta >= r0 when f vanishes below r0 = -1",
        text: include_str!("../scenarios/positivity-r0.ini"),
    },
    Entry {
        name: "positivity-zero",
        checks: "lower bound theta >= 0 when f vanishes on the negative half-line",
        text: include_str!("../scenarios/positivity-zero.ini"),
    },
    Entry {
        name: "uniqueness-small-g",
        checks: "uniqueness for small data: all initializations reach the same limit; contraction chain below one",
        text: include_str!("../scenarios/uniqueness-small-g.ini"),
    },
    Entry {
        name: "audit-all",
        checks: "a priori estimates: gradient bounds from truncation energies, L^q and log-H1 bounds, energy inequalities, comparison slack, scaling invariance",
        text: include_str!("../scenarios/audit-all.ini"),
    },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.name == name)
}

/// Writes every bundled scenario as `<dir>/<name>.ini`.
pub fn export(dir: &Path) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(dir)?;
    CATALOG
        .iter()
        .map(|e| {
            let file = format!("{}.ini", e.name);
            fs::write(dir.join(&file), e.text)?;
            Ok(file)
        })
        .collect()
}
