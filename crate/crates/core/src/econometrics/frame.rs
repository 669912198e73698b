use std::collections::{BTreeMap, HashMap};

use super::EconError;
use crate::panel_synth::{DemandRow, PanelRow};

/// Long-format panel: one row per (unit, time) observation with named numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFrame {
    unit_keys: Vec<u64>,
    time_values: Vec<i64>,
    unit_codes: Vec<u32>,
    time_codes: Vec<u32>,
    n_units: usize,
    n_times: usize,
    columns: BTreeMap<String, Vec<f64>>,
}

fn dense_codes<K: Copy + Eq + std::hash::Hash + Ord>(keys: &[K]) -> (Vec<u32>, usize) {
    let mut distinct: Vec<K> = keys.to_vec();
    distinct.sort();
    distinct.dedup();
    let index: HashMap<K, u32> = distinct.iter().enumerate().map(|(i, &k)| (k, i as u32)).collect();
    (keys.iter().map(|k| index[k]).collect(), distinct.len())
}

impl PanelFrame {
    pub fn new(unit_keys: Vec<u64>, time_values: Vec<i64>) -> Result<Self, EconError> {
        if unit_keys.len() != time_values.len() {
            return Err(EconError::InvalidSpec(format!(
                "unit ({}) and time ({}) lengths differ",
                unit_keys.len(),
                time_values.len()
            )));
        }
        let (unit_codes, n_units) = dense_codes(&unit_keys);
        let (time_codes, n_times) = dense_codes(&time_values);
        Ok(Self { unit_keys, time_values, unit_codes, time_codes, n_units, n_times, columns: BTreeMap::new() })
    }

    pub fn with_column(mut self, name: &str, values: Vec<f64>) -> Result<Self, EconError> {
        self.insert(name, values)?;
        Ok(self)
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>) -> Result<(), EconError> {
        if values.len() != self.len() {
            return Err(EconError::InvalidSpec(format!(
                "column {name} has {} values for {} rows",
                values.len(),
                self.len()
            )));
        }
        self.columns.insert(name.to_string(), values);
        Ok(())
    }

    pub fn from_panel_rows(rows: &[PanelRow]) -> Self {
        let units = rows.iter().map(|r| r.worker_id).collect();
        let times = rows.iter().map(|r| r.month_index as i64).collect();
        let mut f = Self::new(units, times).expect("equal lengths");
        let col = |g: &dyn Fn(&PanelRow) -> f64| rows.iter().map(g).collect::<Vec<f64>>();
        let cols: [(&str, Vec<f64>); 10] = [
            ("treat", col(&|r| r.treat as f64)),
            ("post35", col(&|r| r.post35 as f64)),
            ("post40", col(&|r| r.post40 as f64)),
            ("fjobnum", col(&|r| r.fjobnum as f64)),
            ("fjobearn", col(&|r| r.fjobearn)),
            ("fjobratio", col(&|r| r.fjobratio)),
            ("tenure", col(&|r| r.tenure as f64)),
            ("us", col(&|r| r.us as f64)),
            ("experienced", col(&|r| r.experienced as f64)),
            ("month_index", col(&|r| r.month_index as f64)),
        ];
        for (name, v) in cols {
            f.columns.insert(name.into(), v);
        }
        f
    }

    /// Market-week frame; markets are coded in order of first appearance.
    pub fn from_demand_rows(rows: &[DemandRow]) -> Self {
        let mut ids: Vec<&str> = Vec::new();
        let units = rows
            .iter()
            .map(|r| match ids.iter().position(|m| *m == r.market_id) {
                Some(k) => k as u64,
                None => {
                    ids.push(&r.market_id);
                    (ids.len() - 1) as u64
                }
            })
            .collect();
        let times = rows.iter().map(|r| r.week_index as i64).collect();
        let mut f = Self::new(units, times).expect("equal lengths");
        f.columns.insert("postnum".into(), rows.iter().map(|r| r.postnum as f64).collect());
        f.columns.insert("treat".into(), rows.iter().map(|r| r.treat as f64).collect());
        f.columns.insert("post".into(), rows.iter().map(|r| r.post as f64).collect());
        f
    }

    pub fn len(&self) -> usize {
        self.unit_keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_keys.is_empty()
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn unit_codes(&self) -> &[u32] {
        &self.unit_codes
    }

    pub fn time_codes(&self) -> &[u32] {
        &self.time_codes
    }

    pub fn unit_keys(&self) -> &[u64] {
        &self.unit_keys
    }

    pub fn time_values(&self) -> &[i64] {
        &self.time_values
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64], EconError> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| EconError::MissingColumn(name.to_string()))
    }

    /// Rows where `keep` is true.
    pub fn filter(&self, keep: &[bool]) -> Self {
        let pick = |v: &[f64]| v.iter().zip(keep).filter(|(_, &k)| k).map(|(&x, _)| x).collect::<Vec<f64>>();
        let units: Vec<u64> = self.unit_keys.iter().zip(keep).filter(|(_, &k)| k).map(|(&u, _)| u).collect();
        let times: Vec<i64> = self.time_values.iter().zip(keep).filter(|(_, &k)| k).map(|(&t, _)| t).collect();
        let mut f = Self::new(units, times).expect("equal lengths");
        for (name, v) in &self.columns {
            f.columns.insert(name.clone(), pick(v));
        }
        f
    }

    /// Rows whose unit key is in `units`.
    pub fn filter_units(&self, units: &std::collections::HashSet<u64>) -> Self {
        let keep: Vec<bool> = self.unit_keys.iter().map(|u| units.contains(u)).collect();
        self.filter(&keep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_coding_and_filter() {
        let f = PanelFrame::new(vec![10, 10, 3, 3], vec![5, 7, 5, 7])
            .unwrap()
            .with_column("y", vec![1.0, 2.0, 3.0, 4.0])
            .unwrap();
        assert_eq!(f.unit_codes(), &[1, 1, 0, 0]);
        assert_eq!(f.time_codes(), &[0, 1, 0, 1]);
        assert_eq!((f.n_units(), f.n_times()), (2, 2));
        let g = f.filter(&[true, false, true, true]);
        assert_eq!(g.column("y").unwrap(), &[1.0, 3.0, 4.0]);
        assert_eq!(g.unit_codes(), &[1, 0, 0]);
        assert!(matches!(f.column("nope"), Err(EconError::MissingColumn(_))));
        assert!(f.clone().with_column("z", vec![1.0]).is_err());
    }

    #[test]
    fn demand_rows_coded_by_first_appearance() {
        let rows: Vec<DemandRow> = ["b", "b", "a", "a"]
            .iter()
            .enumerate()
            .map(|(i, m)| DemandRow {
                market_id: m.to_string(),
                week_index: (i % 2) as u32,
                postnum: i as u64,
                treat: 0,
                post: 0,
            })
            .collect();
        let f = PanelFrame::from_demand_rows(&rows);
        assert_eq!(f.unit_keys(), &[0, 0, 1, 1]);
        assert_eq!(f.column("postnum").unwrap(), &[0.0, 1.0, 2.0, 3.0]);
    }
}
