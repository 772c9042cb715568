//! Expected income of a drug-design campaign as a function of a single-step
//! model's false-positive and false-negative rates.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EconError {
    #[error("rate {name} = {value} is outside [0, 1]")]
    Rate { name: &'static str, value: f64 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EconConfig {
    pub route_length: u32,
    pub alpha: f64,
    pub beta: f64,
    pub profit: f64,
    pub cost: f64,
    pub m_max: u32,
}

impl EconConfig {
    pub fn validate(&self) -> Result<(), EconError> {
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(EconError::Rate { name, value });
            }
        }
        if self.route_length == 0 {
            return Err(EconError::NonPositive("route_length"));
        }
        if self.profit <= 0.0 {
            return Err(EconError::NonPositive("profit"));
        }
        if self.cost <= 0.0 {
            return Err(EconError::NonPositive("cost"));
        }
        if self.m_max == 0 {
            return Err(EconError::NonPositive("m_max"));
        }
        Ok(())
    }
}

/// Probability the true route is retrieved within `m` trials:
/// (1-beta)^n * (1 - (1 - (1-alpha)^n)^m).
pub fn route_prob(alpha: f64, beta: f64, m: u32, n: u32) -> f64 {
    let p1 = (1.0 - beta).powi(n as i32);
    let p2 = (1.0 - (1.0 - alpha).powi(n as i32)).powi(m as i32);
    p1 * (1.0 - p2)
}

/// Best (income, m) over m in [0, m_max]; smallest m wins ties.
pub fn expected_income(cfg: &EconConfig) -> Result<(f64, u32), EconError> {
    cfg.validate()?;
    let mut best = (0.0, 0);
    for m in 1..=cfg.m_max {
        let income = cfg.profit * route_prob(cfg.alpha, cfg.beta, m, cfg.route_length) - cfg.cost * f64::from(m);
        if income > best.0 {
            best = (income, m);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRates {
    pub alpha: f64,
    pub beta: f64,
}

pub const RT_OPTIMAL: ModelRates = ModelRates { alpha: 0.10, beta: 0.025 };
pub const ACC_OPTIMAL: ModelRates = ModelRates { alpha: 0.0, beta: 0.05 };
pub const DEFAULT_COST: f64 = 200.0;
pub const DEFAULT_RATIOS: [f64; 3] = [10.0, 100.0, 1000.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub ratio: f64,
    pub model: String,
    pub best_m: u32,
    pub income: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub models: Vec<(String, ModelRates)>,
    pub ratios: Vec<f64>,
    pub cost: f64,
    pub route_length: u32,
    pub m_max: u32,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            models: vec![("RT-optimal".into(), RT_OPTIMAL), ("ACC-optimal".into(), ACC_OPTIMAL)],
            ratios: DEFAULT_RATIOS.to_vec(),
            cost: DEFAULT_COST,
            route_length: 5,
            m_max: 1000,
        }
    }
}

pub fn scenario_table_with(spec: &ScenarioSpec) -> Result<Vec<ScenarioResult>, EconError> {
    let mut out = Vec::new();
    for (name, rates) in &spec.models {
        for &ratio in &spec.ratios {
            let cfg = EconConfig {
                route_length: spec.route_length,
                alpha: rates.alpha,
                beta: rates.beta,
                profit: ratio * spec.cost,
                cost: spec.cost,
                m_max: spec.m_max,
            };
            let (income, best_m) = expected_income(&cfg)?;
            out.push(ScenarioResult {
                ratio,
                model: name.clone(),
                best_m,
                income,
            });
        }
    }
    Ok(out)
}

pub fn scenario_table() -> Vec<ScenarioResult> {
    scenario_table_with(&ScenarioSpec::default()).expect("default scenarios are valid")
}

/// `1.1e3` style: two significant figures.
pub fn two_sig(x: f64) -> String {
    format!("{x:.1e}")
}

/// Aligned text table, one row per model and one column per ratio.
pub fn format_table(rows: &[ScenarioResult]) -> String {
    let mut ratios: Vec<f64> = Vec::new();
    let mut models: Vec<&str> = Vec::new();
    for r in rows {
        if !ratios.contains(&r.ratio) {
            ratios.push(r.ratio);
        }
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
    }
    let mut s = format!("{:<14}", "P/C");
    for r in &ratios {
        s.push_str(&format!("{:>10}", format!("{r}")));
    }
    s.push('\n');
    for m in models {
        s.push_str(&format!("{m:<14}"));
        for ratio in &ratios {
            let cell = rows
                .iter()
                .find(|r| r.model == m && r.ratio == *ratio)
                .map_or("-".to_string(), |r| two_sig(r.income));
            s.push_str(&format!("{cell:>10}"));
        }
        s.push('\n');
    }
    s
}

/// Income grid over alpha x beta for external plotting.
pub fn income_grid_csv(alphas: &[f64], betas: &[f64], ratio: f64, cost: f64, route_length: u32, m_max: u32) -> Result<String, EconError> {
    let mut s = String::from("alpha,beta,best_m,income\n");
    for &alpha in alphas {
        for &beta in betas {
            let (income, m) = expected_income(&EconConfig {
                route_length,
                alpha,
                beta,
                profit: ratio * cost,
                cost,
                m_max,
            })?;
            s.push_str(&format!("{alpha},{beta},{m},{income:.6}\n"));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_acc_income() {
        let cfg = EconConfig {
            route_length: 5,
            alpha: 0.0,
            beta: 0.05,
            profit: 2000.0,
            cost: 200.0,
            m_max: 1000,
        };
        let (income, m) = expected_income(&cfg).unwrap();
        assert_eq!(m, 1);
        assert!((income - (2000.0 * 0.95f64.powi(5) - 200.0)).abs() < 1e-9);
    }

    #[test]
    fn zero_trials_and_certain_failure() {
        assert_eq!(route_prob(0.1, 0.0, 0, 5), 0.0);
        assert_eq!(route_prob(0.1, 1.0, 7, 5), 0.0);
    }

    #[test]
    fn rejects_bad_rates() {
        let cfg = EconConfig {
            route_length: 5,
            alpha: 1.5,
            beta: 0.0,
            profit: 1.0,
            cost: 1.0,
            m_max: 1,
        };
        assert!(matches!(expected_income(&cfg), Err(EconError::Rate { .. })));
    }
}
