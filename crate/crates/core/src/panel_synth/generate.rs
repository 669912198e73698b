use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::{DemandRow, MarketEntry, PanelError, PanelRow, ScenarioConfig, WorkerRecord};

/// Position of the first and second release inside a demand window, as a
/// fraction of its length (weekly calendar from January 2022 to October 2023).
pub const DEMAND_SHOCK1_FRACTION: f64 = 47.0 / 95.0;
pub const DEMAND_SHOCK2_FRACTION: f64 = 62.0 / 95.0;

const TAG_WORKER: u64 = 0x5752_4b52;
const TAG_MONTH: u64 = 0x4d4f_4e54;
const TAG_CELL: u64 = 0x4345_4c4c;
const TAG_WEEK: u64 = 0x5745_454b;
const TAG_POSTING: u64 = 0x504f_5354;

/// (mean, sd, sign of the market shift) per matching covariate.
const COVARIATE_SHAPE: [(f64, f64, f64); 5] =
    [(3.0, 1.2, 1.0), (3.5, 1.0, 1.0), (5.7, 1.3, -1.0), (2.8, 0.55, -1.0), (4.6, 0.2, 1.0)];

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream keyed by (seed, tag, coordinates).
pub(crate) fn stream(seed: u64, tag: u64, coords: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed ^ splitmix(tag));
    for &c in coords {
        h = splitmix(h ^ c);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) struct WorkerDraw {
    pub eta: f64,
    pub tenure0: u32,
    pub us: bool,
    pub experienced: bool,
    pub covariates: [f64; 5],
}

pub(crate) fn draw_worker(cfg: &ScenarioConfig, market_idx: usize, worker: usize) -> WorkerDraw {
    let mut rng = stream(cfg.seed, TAG_WORKER, &[market_idx as u64, worker as u64]);
    let eta = cfg.worker_fe_sigma * normal(&mut rng);
    let tenure0 = rng.random_range(0..=cfg.dgp.max_initial_tenure);
    let us = rng.random_bool(cfg.dgp.us_share);
    let experienced = rng.random_bool(cfg.dgp.experienced_share);
    let shift = cfg.markets[market_idx].covariate_shift;
    let mut covariates = [0.0; 5];
    for (k, &(mean, sd, sign)) in COVARIATE_SHAPE.iter().enumerate() {
        covariates[k] = mean + sd * (sign * shift + normal(&mut rng));
    }
    covariates[4] = covariates[4].clamp(1.0, 5.0);
    WorkerDraw { eta, tenure0, us, experienced, covariates }
}

pub(crate) fn month_effects(cfg: &ScenarioConfig) -> Vec<f64> {
    (0..cfg.months.len())
        .map(|t| {
            let mut rng = stream(cfg.seed, TAG_MONTH, &[t as u64]);
            cfg.month_fe_sigma * normal(&mut rng)
        })
        .collect()
}

/// Calendar offsets in months, so tenure skips excluded months.
/// Labels not of the form `YYYY-MM` fall back to consecutive offsets.
pub(crate) fn month_offsets(months: &[String]) -> Vec<u32> {
    let parse = |s: &str| -> Option<i64> {
        let (y, m) = s.split_once('-')?;
        let (y, m): (i64, i64) = (y.parse().ok()?, m.parse().ok()?);
        (1..=12).contains(&m).then_some(y * 12 + m - 1)
    };
    let ordinals: Option<Vec<i64>> = months.iter().map(|s| parse(s)).collect();
    match ordinals {
        Some(o) if o.windows(2).all(|w| w[1] > w[0]) => o.iter().map(|&x| (x - o[0]) as u32).collect(),
        _ => (0..months.len() as u32).collect(),
    }
}

/// Per-market constants of the outcome link.
pub(crate) struct MarketLink {
    pub treated: bool,
    pub q_pre: f64,
    pub p_pre: f64,
}

impl MarketLink {
    pub fn new(cfg: &ScenarioConfig, entry: &MarketEntry) -> Self {
        let eq = cfg.equilibrium(entry, entry.a_path.a_pre.get());
        Self { treated: cfg.is_treated(&entry.market_id), q_pre: eq.q, p_pre: eq.p }
    }
}

/// Realized outcomes of one worker-month.
pub(crate) struct CellOutcome {
    pub fjobnum: u64,
    pub fjobearn: f64,
    pub fjobratio: f64,
}

/// Draws one cell. `a` is the AI level in force; the random draws depend only
/// on the coordinates, so factual and counterfactual levels share them.
#[allow(clippy::too_many_arguments)]
pub(crate) fn draw_cell(
    cfg: &ScenarioConfig,
    entry: &MarketEntry,
    link: &MarketLink,
    worker: &WorkerDraw,
    coords: (usize, usize, usize),
    tau: f64,
    a: f64,
) -> CellOutcome {
    let (market_idx, worker_idx, month) = coords;
    let eq = cfg.equilibrium(entry, a);
    let mut ratio = eq.q / link.q_pre;
    if let Some(m) = cfg.moderation {
        let moderated = match m.moderator {
            super::Moderator::Us => worker.us,
            super::Moderator::Experienced => worker.experienced,
        };
        if moderated && link.treated && ratio > 0.0 {
            ratio = ratio.powf(m.multiplier);
        }
    }
    let lambda = cfg.dgp.job_rate * ratio * (worker.eta + tau + entry.trend * month as f64).exp();
    let price = cfg.dgp.price_level * eq.p / link.p_pre;

    let mut rng = stream(cfg.seed, TAG_CELL, &[market_idx as u64, worker_idx as u64, month as u64]);
    let eps = cfg.noise_sigma * normal(&mut rng);
    let background = poisson(&mut rng, cfg.dgp.background_rate);
    let fjobnum = poisson(&mut rng, lambda);
    let fjobearn = if fjobnum == 0 { 0.0 } else { fjobnum as f64 * price * eps.exp() };
    let fjobratio = if fjobnum == 0 { 0.0 } else { fjobnum as f64 / (fjobnum + background) as f64 };
    CellOutcome { fjobnum, fjobearn, fjobratio }
}

fn global_worker_id(cfg: &ScenarioConfig, market_idx: usize, worker: usize) -> u64 {
    (market_idx * cfg.workers_per_market + worker) as u64
}

/// Worker-month panel; rows ordered by market, worker, month.
pub fn generate_panel(cfg: &ScenarioConfig) -> Result<Vec<PanelRow>, PanelError> {
    cfg.validate()?;
    let taus = month_effects(cfg);
    let offsets = month_offsets(&cfg.months);
    let mut rows = Vec::with_capacity(cfg.markets.len() * cfg.workers_per_market * cfg.months.len());
    for (mi, entry) in cfg.markets.iter().enumerate() {
        let link = MarketLink::new(cfg, entry);
        for wi in 0..cfg.workers_per_market {
            let w = draw_worker(cfg, mi, wi);
            for t in 0..cfg.months.len() {
                let cell = draw_cell(cfg, entry, &link, &w, (mi, wi, t), taus[t], cfg.a_at_month(entry, t));
                rows.push(PanelRow {
                    worker_id: global_worker_id(cfg, mi, wi),
                    market_id: entry.market_id.clone(),
                    month_index: t as u32,
                    treat: link.treated as u8,
                    post35: (t >= cfg.shock1_index) as u8,
                    post40: (t >= cfg.shock2_index) as u8,
                    fjobnum: cell.fjobnum,
                    fjobearn: cell.fjobearn,
                    fjobratio: cell.fjobratio,
                    tenure: w.tenure0 + offsets[t],
                    us: w.us as u8,
                    experienced: w.experienced as u8,
                });
            }
        }
    }
    Ok(rows)
}

/// Pre-shock worker characteristics, one record per worker, same ids as the panel.
pub fn generate_workers(cfg: &ScenarioConfig) -> Result<Vec<WorkerRecord>, PanelError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.markets.len() * cfg.workers_per_market);
    for (mi, entry) in cfg.markets.iter().enumerate() {
        let treat = cfg.is_treated(&entry.market_id) as u8;
        for wi in 0..cfg.workers_per_market {
            let w = draw_worker(cfg, mi, wi);
            let [c0, c1, c2, c3, c4] = w.covariates;
            out.push(WorkerRecord {
                worker_id: global_worker_id(cfg, mi, wi),
                market_id: entry.market_id.clone(),
                treat,
                us: w.us as u8,
                experienced: w.experienced as u8,
                log_acc_fjobnum: c0,
                log_experience: c1,
                log_avg_fjobprice: c2,
                log_avg_fhourprice: c3,
                avg_rating: c4,
            });
        }
    }
    Ok(out)
}

/// Week indices of the two releases inside a window of `weeks` weeks.
pub(crate) fn demand_shock_weeks(weeks: usize) -> (usize, usize) {
    let s1 = (weeks as f64 * DEMAND_SHOCK1_FRACTION).round() as usize;
    let s2 = (weeks as f64 * DEMAND_SHOCK2_FRACTION).round() as usize;
    (s1, s2.max(s1))
}

/// Market-week fulfilled postings; rows ordered by market, week.
pub fn generate_demand_series(cfg: &ScenarioConfig, weeks: usize) -> Result<Vec<DemandRow>, PanelError> {
    cfg.validate()?;
    if weeks < 8 {
        return Err(PanelError::InvalidConfig(format!("demand window needs at least 8 weeks, got {weeks}")));
    }
    let (s1, s2) = demand_shock_weeks(weeks);
    let week_fe: Vec<f64> = (0..weeks)
        .map(|w| {
            let mut rng = stream(cfg.seed, TAG_WEEK, &[w as u64]);
            cfg.dgp.week_fe_sigma * normal(&mut rng)
        })
        .collect();
    let mut rows = Vec::with_capacity(cfg.markets.len() * weeks);
    for (mi, entry) in cfg.markets.iter().enumerate() {
        let treated = cfg.is_treated(&entry.market_id);
        for (w, fe) in week_fe.iter().enumerate() {
            let a = if w < s1 {
                entry.a_path.a_pre.get()
            } else if w < s2 {
                entry.a_path.a_post35.get()
            } else {
                entry.a_path.a_post40.get()
            };
            let eq = cfg.equilibrium(entry, a);
            let mean = entry.market.n as f64 * eq.q * cfg.dgp.weekly_scale * fe.exp();
            let mut rng = stream(cfg.seed, TAG_POSTING, &[mi as u64, w as u64]);
            rows.push(DemandRow {
                market_id: entry.market_id.clone(),
                week_index: w as u32,
                postnum: poisson(&mut rng, mean),
                treat: treated as u8,
                post: (w >= s1) as u8,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::config;
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn deterministic_given_seed() {
        let cfg = config((0.2, 0.4, 0.6), 50);
        assert_eq!(generate_panel(&cfg).unwrap(), generate_panel(&cfg).unwrap());
        assert_eq!(generate_demand_series(&cfg, 40).unwrap(), generate_demand_series(&cfg, 40).unwrap());
        assert_ne!(generate_panel(&cfg).unwrap(), generate_panel(&cfg.replicate(1)).unwrap());
    }

    #[test]
    fn schema_invariants_hold_on_fuzzed_rows() {
        let mut cfg = config((0.1, 0.45, 0.9), 320);
        cfg.noise_sigma = 1.5;
        let rows = generate_panel(&cfg).unwrap();
        assert!(rows.len() >= 10_000);
        for r in &rows {
            r.check().unwrap();
        }
        assert!(rows.iter().any(|r| r.fjobnum == 0) && rows.iter().any(|r| r.fjobnum > 0));
    }

    #[test]
    fn degenerate_dgp_has_constant_rate() {
        // No heterogeneity and a constant path: every cell of a market draws
        // from the same Poisson, so the mean is flat over months.
        let mut cfg = config((0.2, 0.2, 0.2), 3000);
        cfg.worker_fe_sigma = 0.0;
        cfg.month_fe_sigma = 0.0;
        cfg.noise_sigma = 0.0;
        let rows = generate_panel(&cfg).unwrap();
        let rate = cfg.dgp.job_rate;
        for t in 0..16u32 {
            let cells: Vec<f64> = rows.iter().filter(|r| r.month_index == t).map(|r| r.fjobnum as f64).collect();
            let mean = cells.iter().sum::<f64>() / cells.len() as f64;
            // sd of a mean of 6000 Poisson(0.8) draws is about 0.0115
            assert!((mean - rate).abs() < 0.05, "month {t}: {mean}");
        }
        // prices are flat too
        for r in rows.iter().filter(|r| r.fjobnum > 0) {
            assert!((r.fjobearn / r.fjobnum as f64 - cfg.dgp.price_level).abs() < 1e-9);
        }
    }

    #[test]
    fn honeymoon_shock_raises_treated_log_jobs() {
        // a* = 0.5; moving from 0.2 to 0.4 stays in the honeymoon phase.
        let cfg = config((0.2, 0.4, 0.4), 200);
        let diffs: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|r| {
                let rows = generate_panel(&cfg.replicate(r)).unwrap();
                let mean = |treat: u8, post: u8| {
                    let v: Vec<f64> = rows
                        .iter()
                        .filter(|x| x.treat == treat && x.post35 == post)
                        .map(|x| (x.fjobnum as f64).ln_1p())
                        .collect();
                    v.iter().sum::<f64>() / v.len() as f64
                };
                (mean(1, 1) - mean(1, 0)) - (mean(0, 1) - mean(0, 0))
            })
            .collect();
        let avg = diffs.iter().sum::<f64>() / diffs.len() as f64;
        assert!(avg > 0.0, "{avg}");
    }

    #[test]
    fn demand_series_shape_and_stationarity() {
        let mut cfg = config((0.2, 0.2, 0.2), 10);
        cfg.dgp.week_fe_sigma = 0.0;
        let rows = generate_demand_series(&cfg, 95).unwrap();
        assert_eq!(rows.len(), 2 * 95);
        let (s1, s2) = demand_shock_weeks(95);
        assert_eq!((s1, s2), (47, 62));
        assert!(rows.iter().all(|r| r.post == (r.week_index as usize >= s1) as u8));
        let eq = cfg.equilibrium(&cfg.markets[0], 0.2);
        let expected = cfg.markets[0].market.n as f64 * eq.q * cfg.dgp.weekly_scale;
        let ctrl: Vec<f64> = rows.iter().filter(|r| r.treat == 0).map(|r| r.postnum as f64).collect();
        let (first, second) = ctrl.split_at(47);
        let m1 = first.iter().sum::<f64>() / first.len() as f64;
        let m2 = second.iter().sum::<f64>() / second.len() as f64;
        let sd = (expected / 47.0).sqrt();
        assert!((m1 - expected).abs() < 5.0 * sd && (m2 - expected).abs() < 5.0 * sd);
        assert!(generate_demand_series(&cfg, 7).is_err());
    }

    #[test]
    fn substitution_shock_lowers_treated_postings() {
        let cfg = config((0.6, 0.9, 0.9), 10);
        let diffs: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|r| {
                let rows = generate_demand_series(&cfg.replicate(r), 40).unwrap();
                let mean = |post: u8| {
                    let v: Vec<f64> =
                        rows.iter().filter(|x| x.treat == 1 && x.post == post).map(|x| x.postnum as f64).collect();
                    v.iter().sum::<f64>() / v.len() as f64
                };
                mean(1) - mean(0)
            })
            .collect();
        assert!(diffs.iter().sum::<f64>() < 0.0);
    }

    #[test]
    fn tenure_skips_excluded_holiday_months() {
        let offs = month_offsets(&super::super::default_months());
        assert_eq!(offs[5], 5);
        assert_eq!(offs[6], 8);
        assert_eq!(offs[15], 17);
        assert_eq!(month_offsets(&["x".into(), "y".into()]), vec![0, 1]);
    }

    #[test]
    fn covariate_shift_moves_means() {
        let mut cfg = config((0.2, 0.4, 0.4), 2000);
        cfg.markets[1].covariate_shift = 0.5;
        let w = generate_workers(&cfg).unwrap();
        let mean = |treat: u8, k: usize| {
            let v: Vec<f64> = w.iter().filter(|r| r.treat == treat).map(|r| r.covariates()[k]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(1, 0) - mean(0, 0) > 0.4);
        assert!(mean(1, 2) - mean(0, 2) < -0.4);
        assert!(w.iter().all(|r| (1.0..=5.0).contains(&r.avg_rating)));
    }
}
