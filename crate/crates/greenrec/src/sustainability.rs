//! Carbon accounting: convert measured runtime reductions into modeled
//! CO2e savings under a linear runtime-energy-emissions relation.

use std::collections::BTreeMap;

use crate::evaluation::MetricRecord;
use crate::{Error, Result};

/// Constants of the emission model. Defaults describe one tuned
/// experiment run on a desktop-class machine against the global
/// average grid intensity, scaled to a 40-run research workflow.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EmissionModel {
    pub energy_per_run_kwh: f64,
    pub tuning_configs: u32,
    pub intensity_g_per_kwh: f64,
    pub scale_factor: f64,
}

impl Default for EmissionModel {
    fn default() -> EmissionModel {
        EmissionModel {
            energy_per_run_kwh: 0.51,
            tuning_configs: 10,
            intensity_g_per_kwh: 481.0,
            scale_factor: 40.0,
        }
    }
}

impl EmissionModel {
    pub fn validate(&self) -> Result<()> {
        if self.energy_per_run_kwh <= 0.0
            || self.tuning_configs == 0
            || self.intensity_g_per_kwh <= 0.0
            || self.scale_factor <= 0.0
        {
            return Err(Error::Config(
                "emission model constants must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Kilograms of CO2e saved when runtime drops to `relative_runtime`
/// of the full-size baseline:
/// `(1 - rel) * kWh/run * configs * gCO2e/kWh * scale / 1000`.
pub fn co2e_savings_kg(relative_runtime: f64, model: &EmissionModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&relative_runtime) {
        return Err(Error::RelativeRuntimeOutOfRange(relative_runtime));
    }
    model.validate()?;
    Ok((1.0 - relative_runtime)
        * model.energy_per_run_kwh
        * model.tuning_configs as f64
        * model.intensity_g_per_kwh
        * model.scale_factor
        / 1000.0)
}

/// Mean runtime per portion and its fraction of the p = 1.0 mean.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RuntimeProfile {
    /// Portion-sorted (portion, mean runtime seconds).
    pub mean_runtime_s: Vec<(f64, f64)>,
    /// Portion-sorted (portion, mean(p) / mean(1.0)).
    pub relative_runtime: Vec<(f64, f64)>,
}

impl RuntimeProfile {
    pub fn relative_at(&self, portion: f64) -> Option<f64> {
        self.relative_runtime
            .iter()
            .find(|(p, _)| *p == portion)
            .map(|&(_, r)| r)
    }
}

/// Average runtime across all records per portion, expressed relative
/// to the full-size baseline; every cell weighs equally.
pub fn build_runtime_profile(records: &[MetricRecord]) -> Result<RuntimeProfile> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.portion.to_bits()).or_insert((0.0, 0));
        e.0 += r.runtime_s;
        e.1 += 1;
    }
    let baseline = acc
        .get(&1.0f64.to_bits())
        .map(|&(s, n)| s / n as f64)
        .ok_or_else(|| Error::MissingBaseline("no portion 1.0 runtimes".into()))?;
    if baseline <= 0.0 {
        return Err(Error::MissingBaseline("baseline mean runtime is zero".into()));
    }
    let mut mean_runtime_s: Vec<(f64, f64)> = acc
        .into_iter()
        .map(|(p, (s, n))| (f64::from_bits(p), s / n as f64))
        .collect();
    mean_runtime_s.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let relative_runtime = mean_runtime_s
        .iter()
        .map(|&(p, m)| (p, if p == 1.0 { 1.0 } else { m / baseline }))
        .collect();
    Ok(RuntimeProfile {
        mean_runtime_s,
        relative_runtime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Kind;
    use crate::sampling::Method;

    #[test]
    fn reference_constants_reproduce() {
        let m = EmissionModel::default();
        for (rel, expect) in [
            (0.64, 35.32),
            (0.73, 26.49),
            (0.82, 17.66),
            (0.48, 51.02),
            (0.61, 38.26),
            (0.76, 23.54),
        ] {
            let got = co2e_savings_kg(rel, &m).unwrap();
            assert!((got - expect).abs() <= 0.01, "rel {rel}: got {got}");
        }
    }

    #[test]
    fn no_reduction_no_savings_and_maximum() {
        let m = EmissionModel::default();
        assert_eq!(co2e_savings_kg(1.0, &m).unwrap(), 0.0);
        let max = co2e_savings_kg(0.0, &m).unwrap();
        assert!((max - 0.51 * 10.0 * 481.0 * 40.0 / 1000.0).abs() < 1e-9);
    }

    #[test]
    fn linearity_in_reduction_and_parameters() {
        let m = EmissionModel::default();
        let a = co2e_savings_kg(0.8, &m).unwrap();
        let b = co2e_savings_kg(0.6, &m).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-9);
        let doubled = EmissionModel {
            scale_factor: 80.0,
            ..m
        };
        assert!((co2e_savings_kg(0.8, &doubled).unwrap() - 2.0 * a).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_rejected() {
        let m = EmissionModel::default();
        assert!(matches!(
            co2e_savings_kg(1.2, &m),
            Err(Error::RelativeRuntimeOutOfRange(_))
        ));
        assert!(matches!(
            co2e_savings_kg(-0.1, &m),
            Err(Error::RelativeRuntimeOutOfRange(_))
        ));
    }

    fn rec(portion: f64, runtime: f64) -> MetricRecord {
        MetricRecord {
            dataset: "d".into(),
            algorithm: Kind::Popularity,
            method: Method::UserBased,
            portion,
            seed: 21,
            ndcg_at_10: 0.1,
            runtime_s: runtime,
            n_eval_users: 1,
        }
    }

    #[test]
    fn profile_ratio_and_self_ratio() {
        let profile =
            build_runtime_profile(&[rec(0.5, 30.0), rec(1.0, 60.0), rec(1.0, 60.0)]).unwrap();
        assert_eq!(profile.relative_at(0.5), Some(0.5));
        assert_eq!(profile.relative_at(1.0), Some(1.0));
    }

    #[test]
    fn profile_requires_baseline() {
        assert!(matches!(
            build_runtime_profile(&[rec(0.5, 30.0)]),
            Err(Error::MissingBaseline(_))
        ));
    }
}
