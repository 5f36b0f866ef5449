use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the eight simulation graphs.
///
/// DAGs 1-4 toggle the covariate chain (X1 -> X2 -> X3) and the indicator
/// chain (R2 -> R3); DAGs 5-8 repeat them with direct R -> Y edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DagSpec {
    pub dag_id: u8,
    pub x_chain: bool,
    pub r_chain: bool,
    pub r_to_y: bool,
}

impl DagSpec {
    pub fn new(dag_id: u8) -> Result<Self> {
        if !(1..=8).contains(&dag_id) {
            return Err(Error::Config(format!("dag id must be in 1..=8, got {dag_id}")));
        }
        let base = (dag_id - 1) % 4;
        Ok(DagSpec {
            dag_id,
            x_chain: base == 1 || base == 3,
            r_chain: base == 2 || base == 3,
            r_to_y: dag_id >= 5,
        })
    }

    pub fn from_flags(x_chain: bool, r_chain: bool, r_to_y: bool) -> Self {
        let base = x_chain as u8 + 2 * r_chain as u8;
        DagSpec {
            dag_id: base + 1 + if r_to_y { 4 } else { 0 },
            x_chain,
            r_chain,
            r_to_y,
        }
    }

    pub fn all() -> Vec<DagSpec> {
        (1..=8).map(|d| DagSpec::new(d).unwrap()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_match_table() {
        let expect = [
            (false, false, false),
            (true, false, false),
            (false, true, false),
            (true, true, false),
            (false, false, true),
            (true, false, true),
            (false, true, true),
            (true, true, true),
        ];
        for (d, &(x, r, y)) in (1..=8).zip(expect.iter()) {
            let dag = DagSpec::new(d).unwrap();
            assert_eq!((dag.x_chain, dag.r_chain, dag.r_to_y), (x, r, y), "dag {d}");
            assert_eq!(DagSpec::from_flags(x, r, y), dag);
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(DagSpec::new(0).is_err());
        assert!(DagSpec::new(9).is_err());
    }
}
