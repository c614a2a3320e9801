//! Regularization sweeps over small built-in frequency tables.
//!
//! The tables are hand-sized worked examples: four bigrams sharing
//! `n_de = 10^7` and `n_nu = 10^4`, first with joint counts only, then with
//! the counts of their two wildcard units. They show how each parameter
//! trades rare against frequent evidence.

use crate::error::EstimatorError;
use crate::estimators::{
    clamp_sum, dependency_beta, itemized_ratio, mle_ratio, regularized_ratio, EstimateValue,
};

/// Joint counts of one N-gram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyRow {
    pub name: &'static str,
    pub n_de: u64,
    pub c_de: u64,
    pub n_nu: u64,
    pub c_nu: u64,
}

/// Joint counts of a bigram plus the counts of `a1 •` and `• a2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemizedRow {
    pub joint: FrequencyRow,
    pub unit_de: [u64; 2],
    pub unit_nu: [u64; 2],
}

const fn row(name: &'static str, c_de: u64, c_nu: u64) -> FrequencyRow {
    FrequencyRow {
        name,
        n_de: 10_000_000,
        c_de,
        n_nu: 10_000,
        c_nu,
    }
}

/// Joint-count example. Expected MLE ratios: 20, 20, 40, 0.
pub const JOINT_EXAMPLE: [FrequencyRow; 4] = [
    row("w_A", 5_000, 100),
    row("w_B", 50, 1),
    row("w_C", 50, 2),
    row("w_D", 14, 0),
];

/// Same joint counts with unit counts; every row has an unregularized
/// itemized ratio of 12500.
pub const ITEMIZED_EXAMPLE: [ItemizedRow; 4] = [
    ItemizedRow {
        joint: row("w_A", 5_000, 100),
        unit_de: [8_000, 5_000],
        unit_nu: [1_000, 500],
    },
    ItemizedRow {
        joint: row("w_B", 50, 1),
        unit_de: [240, 150],
        unit_nu: [30, 15],
    },
    ItemizedRow {
        joint: row("w_C", 50, 2),
        unit_de: [80, 50],
        unit_nu: [10, 5],
    },
    ItemizedRow {
        joint: row("w_D", 14, 0),
        unit_de: [80, 50],
        unit_nu: [10, 5],
    },
];

/// `10^-9, 10^-8, …, 10^-1`.
pub const LAMBDA_GRID: [f64; 9] = [1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

/// `λ_d` held fixed while sweeping `λ_item`.
pub const FIXED_LAMBDA_D: f64 = 1e-5;
/// `λ_item` held fixed while sweeping `λ_d`.
pub const FIXED_LAMBDA_ITEM: f64 = 1e-4;

impl FrequencyRow {
    pub fn mle(&self) -> Result<EstimateValue, EstimatorError> {
        mle_ratio(self.c_de, self.n_de, self.c_nu, self.n_nu)
    }

    pub fn k(&self, lambda: f64) -> Result<f64, EstimatorError> {
        regularized_ratio(self.c_de, self.n_de, self.c_nu, self.n_nu, lambda)
    }
}

impl ItemizedRow {
    pub fn item(&self, lambda_item: f64) -> Result<f64, EstimatorError> {
        let units = [
            (self.unit_de[0], self.unit_nu[0], lambda_item),
            (self.unit_de[1], self.unit_nu[1], lambda_item),
        ];
        itemized_ratio(&units, self.joint.n_de, self.joint.n_nu)
    }

    /// `(r_item, t_d, clamped sum)`.
    pub fn ours_parts(
        &self,
        lambda_item: f64,
        lambda_d: f64,
    ) -> Result<(f64, f64, f64), EstimatorError> {
        let r_item = self.item(lambda_item)?;
        let j = &self.joint;
        let t_d = dependency_beta(j.c_de, j.n_de, j.c_nu, j.n_nu, r_item, lambda_d)?;
        Ok((r_item, t_d, clamp_sum(r_item, t_d)))
    }

    pub fn ours(&self, lambda_item: f64, lambda_d: f64) -> Result<f64, EstimatorError> {
        self.ours_parts(lambda_item, lambda_d).map(|p| p.2)
    }
}

/// Estimates of several N-grams over a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: &'static str,
    pub grid: Vec<f64>,
    pub names: Vec<&'static str>,
    /// `values[i][j]`: estimate of N-gram `j` at `grid[i]`.
    pub values: Vec<Vec<f64>>,
}

impl Sweep {
    pub fn series(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(self.parameter);
        for name in &self.names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (x, row) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{x:e}"));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn sweep(
    parameter: &'static str,
    names: Vec<&'static str>,
    f: impl Fn(f64) -> Result<Vec<f64>, EstimatorError>,
) -> Result<Sweep, EstimatorError> {
    let values = LAMBDA_GRID
        .iter()
        .map(|&x| f(x))
        .collect::<Result<_, _>>()?;
    Ok(Sweep {
        parameter,
        grid: LAMBDA_GRID.to_vec(),
        names,
        values,
    })
}

/// `K` on the joint-count example across `λ`.
pub fn sweep_k() -> Result<Sweep, EstimatorError> {
    sweep(
        "lambda",
        JOINT_EXAMPLE.iter().map(|r| r.name).collect(),
        |lambda| JOINT_EXAMPLE.iter().map(|r| r.k(lambda)).collect(),
    )
}

/// `OURS` on the itemized example across `λ_item` with `λ_d` fixed.
pub fn sweep_ours_lambda_item(lambda_d: f64) -> Result<Sweep, EstimatorError> {
    sweep(
        "lambda_item",
        ITEMIZED_EXAMPLE.iter().map(|r| r.joint.name).collect(),
        |li| {
            ITEMIZED_EXAMPLE
                .iter()
                .map(|r| r.ours(li, lambda_d))
                .collect()
        },
    )
}

/// `OURS` on the itemized example across `λ_d` with `λ_item` fixed.
pub fn sweep_ours_lambda_d(lambda_item: f64) -> Result<Sweep, EstimatorError> {
    sweep(
        "lambda_d",
        ITEMIZED_EXAMPLE.iter().map(|r| r.joint.name).collect(),
        |ld| {
            ITEMIZED_EXAMPLE
                .iter()
                .map(|r| r.ours(lambda_item, ld))
                .collect()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_example_mle_is_exact() {
        let got: Vec<f64> = JOINT_EXAMPLE
            .iter()
            .map(|r| r.mle().unwrap().finite().unwrap())
            .collect();
        assert_eq!(got, [20.0, 20.0, 40.0, 0.0]);
    }

    #[test]
    fn itemized_example_is_12500() {
        for r in &ITEMIZED_EXAMPLE {
            assert_eq!(r.item(0.0).unwrap(), 12_500.0, "{}", r.joint.name);
        }
    }

    #[test]
    fn csv_shape() {
        let csv = sweep_k().unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "lambda,w_A,w_B,w_C,w_D");
        assert!(lines[1].starts_with("1e-9,"));
    }

    #[test]
    fn k_sweep_scale_behavior() {
        let sweep = sweep_k().unwrap();
        for row in &sweep.values {
            assert!(row[1] <= row[0]);
            assert!(row[2] <= 2.0 * row[1] + 1e-9);
            assert_eq!(row[3], 0.0);
        }
    }

    #[test]
    fn ours_sweeps_are_finite_and_non_negative() {
        for sweep in [
            sweep_ours_lambda_item(FIXED_LAMBDA_D).unwrap(),
            sweep_ours_lambda_d(FIXED_LAMBDA_ITEM).unwrap(),
        ] {
            assert!(sweep
                .values
                .iter()
                .flatten()
                .all(|v| v.is_finite() && *v >= 0.0));
        }
    }
}
