//! Time-step schedule for growing a hypertree, in units of one type-II
//! fusion duration.

use serde::{Deserialize, Serialize};

use super::{BranchVector, TreeError};

/// Steps for GHZ creation plus the first fusion, joins and logical X.
pub const C_RANGE: std::ops::RangeInclusive<u32> = 5..=8;
pub const DEFAULT_C: u32 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleItem {
    /// Branch level, where one applies.
    pub i: Option<usize>,
    pub action: String,
    /// Whole steps.
    pub count: u32,
    /// Steps without rounding doublings up.
    pub exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: Vec<ScheduleItem>,
    /// `Σ⌈log2 b_i⌉ + m + ⌈log2 kn⌉ + C`.
    pub total_steps: u32,
    /// Same sum with exact logarithms.
    pub total_exact: f64,
    /// Sum of the itemized counts. The fixed items contribute 7, so this
    /// exceeds `total_steps` by `7 - C`.
    pub itemized_total: u32,
    pub constant_c: u32,
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Build the schedule for one hypertree with `k·n` nodes.
pub fn schedule(branch: &BranchVector, k: u32, n: u32, c: u32) -> Result<Schedule, TreeError> {
    if !C_RANGE.contains(&c) {
        return Err(TreeError::BadConstant(c));
    }
    if k == 0 || n == 0 {
        return Err(TreeError::BadHypertree(format!("k = {k}, n = {n}; both must be ≥ 1")));
    }
    let item = |i: Option<usize>, action: &str, count: u32, exact: f64| ScheduleItem {
        i,
        action: action.to_string(),
        count,
        exact,
    };
    let mut steps = vec![item(None, "ghz", 1, 1.0), item(None, "two_tree_fuse", 1, 1.0)];
    let mut doubling = 0;
    let mut doubling_exact = 0.0;
    for (i, &b) in branch.as_slice().iter().enumerate() {
        let c = ceil_log2(u64::from(b));
        let e = f64::from(b).log2();
        doubling += c;
        doubling_exact += e;
        steps.push(item(Some(i), "double_level", c, e));
    }
    let m = branch.m() as u32;
    steps.push(item(None, "add_level", m, f64::from(m)));
    let kn = u64::from(k) * u64::from(n);
    let h = ceil_log2(kn);
    let h_exact = (kn as f64).log2();
    steps.push(item(None, "hypertree_level", h, h_exact));
    steps.push(item(None, "join", 3, 3.0));
    steps.push(item(None, "logical_x", 2, 2.0));
    let itemized_total = steps.iter().map(|s| s.count).sum();
    Ok(Schedule {
        steps,
        total_steps: doubling + m + h + c,
        total_exact: doubling_exact + f64::from(m) + h_exact + f64::from(c),
        itemized_total,
        constant_c: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_values() {
        let got: Vec<u32> = [1, 2, 3, 4, 5, 8, 9, 148].into_iter().map(ceil_log2).collect();
        assert_eq!(got, vec![0, 1, 2, 2, 3, 3, 4, 8]);
    }

    #[test]
    fn reference_schedule() {
        let s = schedule(&"11,23,22,4,1".parse().unwrap(), 74, 2, 5).unwrap();
        // 4 + 5 + 5 + 2 + 0 doublings, 4 level additions, 8 for 148 nodes.
        assert_eq!(s.total_steps, 16 + 4 + 8 + 5);
        assert_eq!(s.itemized_total, 35);
        let exact = (11f64 * 23.0 * 22.0 * 4.0).log2() + 4.0 + 148f64.log2() + 5.0;
        assert!((s.total_exact - exact).abs() < 1e-12);
        assert!((s.total_exact - 30.65).abs() < 0.01);
    }

    #[test]
    fn constant_is_checked() {
        let b: BranchVector = "2".parse().unwrap();
        assert_eq!(schedule(&b, 1, 1, 4), Err(TreeError::BadConstant(4)));
        assert_eq!(schedule(&b, 1, 1, 8).unwrap().total_steps, 9); // ⌈log2 2⌉ + m + ⌈log2 kn⌉ + C with m = 0, kn = 1
        assert_eq!(schedule(&b, 1, 1, 7).unwrap().itemized_total, 8);
        let json = serde_json::to_value(schedule(&b, 1, 1, 5).unwrap()).unwrap();
        assert!(json["steps"].is_array());
    }
}
