//! Exact operation-count formulas for the dictionary learning methods,
//! evaluated in wide integer arithmetic.

use crate::error::{Error, Result};

/// Which method's per-iteration (or per-training) operation count to
/// evaluate. The plain variants come from the patch-classification
/// comparison; the O-/E- variants count original versus efficient updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodId {
    Dfdl,
    LcKsvd,
    Nayak,
    Fddl,
    ODlsi,
    EDlsi,
    ODlsiD,
    EDlsiD,
    OFddl,
    EFddl,
    OFddlX,
    EFddlX,
    OFddlD,
    EFddlD,
    OCopar,
    ECopar,
    Lrsdl,
}

impl MethodId {
    pub fn parse(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "dfdl" => Self::Dfdl,
            "lc-ksvd" | "lcksvd" => Self::LcKsvd,
            "nayak" => Self::Nayak,
            "fddl" => Self::Fddl,
            "o-dlsi" => Self::ODlsi,
            "e-dlsi" => Self::EDlsi,
            "o-dlsi-d" => Self::ODlsiD,
            "e-dlsi-d" => Self::EDlsiD,
            "o-fddl" => Self::OFddl,
            "e-fddl" => Self::EFddl,
            "o-fddl-x" => Self::OFddlX,
            "e-fddl-x" => Self::EFddlX,
            "o-fddl-d" => Self::OFddlD,
            "e-fddl-d" => Self::EFddlD,
            "o-copar" => Self::OCopar,
            "e-copar" => Self::ECopar,
            "lrsdl" => Self::Lrsdl,
            other => return Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        })
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Dfdl => "dfdl",
            Self::LcKsvd => "lc-ksvd",
            Self::Nayak => "nayak",
            Self::Fddl => "fddl",
            Self::ODlsi => "o-dlsi",
            Self::EDlsi => "e-dlsi",
            Self::ODlsiD => "o-dlsi-d",
            Self::EDlsiD => "e-dlsi-d",
            Self::OFddl => "o-fddl",
            Self::EFddl => "e-fddl",
            Self::OFddlX => "o-fddl-x",
            Self::EFddlX => "e-fddl-x",
            Self::OFddlD => "o-fddl-d",
            Self::EFddlD => "e-fddl-d",
            Self::OCopar => "o-copar",
            Self::ECopar => "e-copar",
            Self::Lrsdl => "lrsdl",
        };
        write!(f, "{s}")
    }
}

/// Symbol values the formulas consume. `n` doubles as the patch-table `N`;
/// `l` is the OMP sparsity level; `q`/`q2` are iteration counts.
#[derive(Debug, Clone, Copy)]
pub struct ComplexityQuery {
    pub method: MethodId,
    pub c: u128,
    pub k: u128,
    pub n: u128,
    pub d: u128,
    pub l: u128,
    pub q: u128,
    pub q2: u128,
}

impl ComplexityQuery {
    fn validate(&self) -> Result<()> {
        let needs_l = matches!(self.method, MethodId::Dfdl | MethodId::LcKsvd);
        let mut required = vec![
            ("c", self.c),
            ("k", self.k),
            ("n", self.n),
            ("d", self.d),
            ("q", self.q),
            ("q2", self.q2),
        ];
        if needs_l {
            required.push(("l", self.l));
        }
        for (name, v) in required {
            if v == 0 {
                return Err(Error::InvalidArgument(format!(
                    "parameter {name} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluates the method's closed-form operation count exactly.
pub fn complexity_eval(q: &ComplexityQuery) -> Result<u128> {
    q.validate()?;
    let ComplexityQuery {
        c, k, n, d, l, q: it, q2, ..
    } = *q;
    let d3 = d * d * d;
    Ok(match q.method {
        // patch-classification comparison table
        MethodId::Dfdl => c * c * k * n * (2 * d + l * l),
        MethodId::LcKsvd => c * c * k * n * (2 * d + 2 * c * k + l * l),
        MethodId::Nayak => c * c * k * n * (2 * d + 2 * it * c * k) + c * c * d * k * k,
        MethodId::Fddl => c * c * k * n * (2 * d + 2 * it * c * k) + c * c * c * d * k * k,

        // per-update subproblem counts
        MethodId::ODlsiD => c * it * k * d3,
        MethodId::EDlsiD => c * d3 + c * it * d * k * (it * k + k),
        MethodId::OFddlX => c * c * k * (d * n + it * c * k * n + c * d * k),
        MethodId::EFddlX => c * c * k * (d * n + it * c * n * k + d * k),
        MethodId::OFddlD => c * d * k * (it * k + c * c * n),
        MethodId::EFddlD => c * d * k * (c * n + c * it * k) + c * c * c * k * k * n,

        // whole-method counts per iteration
        MethodId::ODlsi => c * k * (k * d + d * n + it * k * n) + c * it * k * d3,
        MethodId::EDlsi => {
            c * k * (k * d + d * n + it * k * n) + c * d3 + c * it * d * k * (it * k + d)
        }
        MethodId::OFddl => {
            c * c * d * k * (n + c * k + c * n) + c * k * k * it * (d + c * c * n)
        }
        MethodId::EFddl => c * c * k * ((it + 1) * k * (d + c * n) + 2 * d * n),
        MethodId::OCopar => c * c * c * k * k * (2 * d + c * k + it * n) + c * it * k * d3,
        MethodId::ECopar => {
            c * c * c * k * k * (2 * d + c * k + it * n)
                + c * d3
                + c * it * d * k * (it * k + d)
        }
        MethodId::Lrsdl => {
            c * c * k * ((it + 1) * k * (d + c * n) + 2 * d * n)
                + c * c * d * k * n
                + (it + q2) * d * k * k
        }
    })
}
