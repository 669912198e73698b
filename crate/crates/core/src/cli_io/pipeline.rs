use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::csvio::{ingest_demand_csv, ingest_panel_csv, write_demand_csv, write_panel_csv};
use super::quadrant::{classify_quadrant, QuadrantLabel};
use super::scenario::parse_scenario;
use super::CliError;
use crate::econometrics::{
    demand_did_fit, did_fit, dual_shock_fit, event_study_fit, fit_csv, heterogeneity_fit, outcome_sd, regression_table,
    tost_pretrends, FitResult, OutcomeSpec, PanelFrame, RegressionSpec, TableColumn, TostResult, CHATGPT35, CHATGPT40,
};
use crate::market_model::{cournot_equilibrium, inflection_point, statics_csv, sweep_comparative_statics, AiLevel};
use crate::matching::{match_workers, MatchOptions, WorkerMatch};
use crate::panel_synth::{
    generate_demand_series, generate_panel, generate_workers, DemandRow, MarketEntry, Moderator, Outcome, PanelRow,
    ScenarioConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Match,
    Estimate,
    Tost,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Simulate, Stage::Match, Stage::Estimate, Stage::Tost, Stage::Report];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Simulate => "simulate",
            Stage::Match => "match",
            Stage::Estimate => "estimate",
            Stage::Tost => "tost",
            Stage::Report => "report",
        })
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.to_string() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Models fitted by the estimate stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Did,
    Trend,
    Event,
    Dual,
    Heterogeneity,
    Demand,
}

impl Model {
    pub const ALL: [Model; 6] =
        [Model::Did, Model::Trend, Model::Event, Model::Dual, Model::Heterogeneity, Model::Demand];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub alpha: f64,
    /// Caliper on the propensity-score probability scale.
    pub caliper: f64,
    /// Absolute TOST bound; `None` uses `bounds_sd_multiple` times the outcome SD.
    pub bounds: Option<f64>,
    pub bounds_sd_multiple: f64,
    pub tost_alpha: f64,
    pub demand_weeks: usize,
    pub statics_grid: usize,
    pub models: Vec<Model>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            caliper: 0.005,
            bounds: None,
            bounds_sd_multiple: 0.36,
            tost_alpha: 0.05,
            demand_weeks: 95,
            statics_grid: 101,
            models: Model::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub options: PipelineOptions,
    pub outputs: Vec<OutputFile>,
    /// Wall-clock milliseconds per stage; excluded from `manifest_hash`.
    pub timings_ms: BTreeMap<String, f64>,
    pub manifest_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn slug(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

#[derive(Default)]
struct MarketFits {
    market_id: String,
    did: Option<Vec<FitResult>>,
    trend: Option<Vec<FitResult>>,
    event: Option<Vec<FitResult>>,
    dual: Option<Vec<FitResult>>,
    het: Option<Vec<(Moderator, Vec<FitResult>)>>,
    demand: Option<FitResult>,
    tost: Option<Vec<TostResult>>,
}

struct Run<'a> {
    cfg: ScenarioConfig,
    out: &'a Path,
    opts: PipelineOptions,
    outputs: Vec<String>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn pair_rows(&self, rows: &[PanelRow], entry: &MarketEntry, keep: &HashSet<u64>) -> Vec<PanelRow> {
        let control = &self.cfg.control_market_id;
        rows.iter()
            .filter(|r| (r.market_id == entry.market_id || &r.market_id == control) && keep.contains(&r.worker_id))
            .cloned()
            .collect()
    }

    fn event_spec(&self, outcome: Outcome) -> RegressionSpec {
        let s = self.cfg.shock1_index as i64;
        RegressionSpec::event_study(OutcomeSpec::from(outcome), s, -s, self.cfg.months.len() as i64 - 1 - s)
    }

    fn fit_market(
        &self,
        entry: &MarketEntry,
        rows: &[PanelRow],
        demand: &[DemandRow],
        matched: &WorkerMatch,
        needed: &HashSet<Model>,
        tost: bool,
    ) -> Result<MarketFits, CliError> {
        let frame = PanelFrame::from_panel_rows(&self.pair_rows(rows, entry, &matched.matched_set()));
        let per_outcome = |f: &dyn Fn(Outcome) -> Result<FitResult, CliError>| -> Result<Vec<FitResult>, CliError> {
            Outcome::ALL.iter().map(|&o| f(o)).collect()
        };
        let mut out = MarketFits { market_id: entry.market_id.clone(), ..Default::default() };
        if needed.contains(&Model::Did) {
            out.did = Some(per_outcome(&|o| Ok(did_fit(&frame, &RegressionSpec::did(o))?))?);
        }
        if needed.contains(&Model::Trend) {
            out.trend = Some(per_outcome(&|o| Ok(did_fit(&frame, &RegressionSpec::did(o).with_market_trend(true))?))?);
        }
        if needed.contains(&Model::Event) || tost {
            out.event = Some(per_outcome(&|o| Ok(event_study_fit(&frame, &self.event_spec(o))?))?);
        }
        if needed.contains(&Model::Dual) {
            out.dual = Some(per_outcome(&|o| Ok(dual_shock_fit(&frame, &RegressionSpec::dual_shock(o))?))?);
        }
        if needed.contains(&Model::Heterogeneity) {
            let het = [Moderator::Us, Moderator::Experienced]
                .into_iter()
                .map(|m| {
                    per_outcome(&|o| Ok(heterogeneity_fit(&frame, &RegressionSpec::did(o), m.column())?))
                        .map(|v| (m, v))
                })
                .collect::<Result<_, _>>()?;
            out.het = Some(het);
        }
        if needed.contains(&Model::Demand) {
            let control = &self.cfg.control_market_id;
            let pair: Vec<DemandRow> =
                demand.iter().filter(|r| r.market_id == entry.market_id || &r.market_id == control).cloned().collect();
            out.demand = Some(demand_did_fit(&pair)?);
        }
        if tost {
            let event = out.event.as_ref().expect("event fits computed");
            let results = Outcome::ALL
                .iter()
                .zip(event)
                .map(|(&o, fit)| {
                    let delta = match self.opts.bounds {
                        Some(d) => d,
                        None => self.opts.bounds_sd_multiple * outcome_sd(&frame, &OutcomeSpec::from(o))?,
                    };
                    Ok(tost_pretrends(fit, delta, self.opts.tost_alpha)?)
                })
                .collect::<Result<_, CliError>>()?;
            out.tost = Some(results);
        }
        Ok(out)
    }

    fn write_fits(&mut self, fits: &MarketFits) -> Result<(), CliError> {
        let m = slug(&fits.market_id);
        let groups: [(&str, &Option<Vec<FitResult>>); 4] =
            [("did", &fits.did), ("trend", &fits.trend), ("event", &fits.event), ("dual", &fits.dual)];
        for (kind, group) in groups {
            let Some(group) = group else { continue };
            if !self.opts.models.contains(&model_of(kind)) {
                continue;
            }
            self.write_group(&format!("{kind}_{m}"), group)?;
        }
        if let (Some(het), true) = (&fits.het, self.opts.models.contains(&Model::Heterogeneity)) {
            for (moderator, group) in het {
                self.write_group(&format!("het_{m}_{}", moderator.column()), group)?;
            }
        }
        if let (Some(d), true) = (&fits.demand, self.opts.models.contains(&Model::Demand)) {
            self.write(&format!("demand_{m}.csv"), &fit_csv(d))?;
        }
        Ok(())
    }

    fn write_group(&mut self, stem: &str, group: &[FitResult]) -> Result<(), CliError> {
        for (o, f) in Outcome::ALL.iter().zip(group) {
            self.write(&format!("{stem}_{}.csv", o.column()), &fit_csv(f))?;
        }
        let cols: Vec<TableColumn> =
            Outcome::ALL.iter().zip(group).map(|(o, f)| TableColumn { label: o.label(), fit: f }).collect();
        self.write(&format!("{stem}.txt"), &regression_table(&cols))
    }
}

fn model_of(kind: &str) -> Model {
    match kind {
        "did" => Model::Did,
        "trend" => Model::Trend,
        "event" => Model::Event,
        _ => Model::Dual,
    }
}

fn q_sign(entry: &MarketEntry, from: AiLevel, to: AiLevel) -> &'static str {
    let (a, b) = (cournot_equilibrium(&entry.market, from).q, cournot_equilibrium(&entry.market, to).q);
    if b > a {
        "+"
    } else if b < a {
        "-"
    } else {
        "0"
    }
}

/// Runs the requested stages on a scenario, writing every artifact and a
/// `manifest.json` into `out_dir`. `seed` overrides the scenario seed.
pub fn run_pipeline(
    config: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    stages: &[Stage],
    opts: &PipelineOptions,
) -> Result<RunManifest, CliError> {
    let mut cfg = parse_scenario(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run_config(cfg, out_dir, stages, opts)
}

/// [`run_pipeline`] on an already parsed scenario.
pub fn run_config(
    cfg: ScenarioConfig,
    out_dir: &Path,
    stages: &[Stage],
    opts: &PipelineOptions,
) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(CliError::Validation(format!("alpha must lie in (0,1), got {}", opts.alpha)));
    }
    if !(opts.caliper > 0.0) {
        return Err(CliError::Validation(format!("caliper must be positive, got {}", opts.caliper)));
    }
    if let Some(b) = opts.bounds {
        if !(b > 0.0) {
            return Err(CliError::Validation(format!("bounds must be positive, got {b}")));
        }
    }
    let mut stages: Vec<Stage> = stages.to_vec();
    stages.sort();
    stages.dedup();
    if stages.is_empty() {
        return Err(CliError::Validation("no stages requested".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let config_sha256 = sha256_hex(serde_json::to_string(&cfg).expect("config serializes").as_bytes());
    let seed = cfg.seed;
    let mut run = Run { cfg, out: out_dir, opts: opts.clone(), outputs: Vec::new() };
    let mut timings = BTreeMap::new();
    let has = |s: Stage| stages.contains(&s);
    let needs_fits = has(Stage::Estimate) || has(Stage::Tost) || has(Stage::Report);

    let clock = Instant::now();
    let (panel, demand) = if has(Stage::Simulate) {
        let sim = || -> Result<_, CliError> {
            let panel = generate_panel(&run.cfg)?;
            let demand = generate_demand_series(&run.cfg, run.opts.demand_weeks)?;
            write_panel_csv(&out_dir.join("panel.csv"), &panel)?;
            write_demand_csv(&out_dir.join("demand.csv"), &demand)?;
            Ok((panel, demand))
        };
        let r = sim().map_err(|e| e.in_stage(Stage::Simulate))?;
        run.outputs.extend(["panel.csv".to_string(), "demand.csv".to_string()]);
        timings.insert(Stage::Simulate.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        r
    } else if needs_fits {
        let stage = stages[0];
        let panel = ingest_panel_csv(&out_dir.join("panel.csv")).map_err(|e| e.in_stage(stage))?;
        let demand = ingest_demand_csv(&out_dir.join("demand.csv")).map_err(|e| e.in_stage(stage))?;
        (panel, demand)
    } else {
        (Vec::new(), Vec::new())
    };

    let treated: Vec<MarketEntry> = run.cfg.treated_markets().cloned().collect();
    let mut matches: Vec<WorkerMatch> = Vec::new();
    if has(Stage::Match) || needs_fits {
        let clock = Instant::now();
        let workers = generate_workers(&run.cfg).map_err(|e| CliError::from(e).in_stage(Stage::Match))?;
        let control = run.cfg.control_market_id.clone();
        let match_opts = MatchOptions::with_caliper(run.opts.caliper);
        matches = treated
            .par_iter()
            .map(|entry| {
                let subset: Vec<_> = workers
                    .iter()
                    .filter(|w| w.market_id == entry.market_id || w.market_id == control)
                    .cloned()
                    .collect();
                match_workers(&subset, match_opts)
                    .map_err(|e| CliError::Numeric(format!("market {}: {e}", entry.market_id)))
            })
            .collect::<Result<_, _>>()
            .map_err(|e: CliError| e.in_stage(Stage::Match))?;
        if has(Stage::Match) {
            for (entry, m) in treated.iter().zip(&matches) {
                let s = slug(&entry.market_id);
                let mut pairs = String::from("treated_id,control_id,distance\n");
                for p in &m.result.pairs {
                    pairs.push_str(&format!("{},{},{}\n", p.treated_id, p.control_id, p.distance));
                }
                let mut dropped = String::from("id,side,reason\n");
                for (side, list) in [("treated", &m.result.dropped_treated), ("control", &m.result.dropped_control)] {
                    for d in list {
                        let reason = serde_json::to_value(d.reason).expect("reason serializes");
                        dropped.push_str(&format!("{},{side},{}\n", d.id, reason.as_str().unwrap_or_default()));
                    }
                }
                let mut model = String::from("term,estimate,se\n");
                for ((n, b), se) in m.model.names.iter().zip(&m.model.coefficients).zip(&m.model.se) {
                    model.push_str(&format!("{n},{b},{se}\n"));
                }
                run.write(&format!("match_{s}.csv"), &pairs).map_err(|e| e.in_stage(Stage::Match))?;
                run.write(&format!("match_{s}_dropped.csv"), &dropped).map_err(|e| e.in_stage(Stage::Match))?;
                run.write(&format!("propensity_{s}.csv"), &model).map_err(|e| e.in_stage(Stage::Match))?;
                run.write(&format!("balance_{s}.csv"), &m.balance.to_csv()).map_err(|e| e.in_stage(Stage::Match))?;
                run.write(&format!("balance_{s}.txt"), &m.balance.to_text()).map_err(|e| e.in_stage(Stage::Match))?;
            }
            timings.insert(Stage::Match.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        }
    }

    if needs_fits {
        let clock = Instant::now();
        let mut needed: HashSet<Model> = HashSet::new();
        if has(Stage::Estimate) {
            needed.extend(run.opts.models.iter().copied());
        }
        if has(Stage::Report) {
            needed.insert(Model::Dual);
        }
        let tost = has(Stage::Tost);
        let stage = if has(Stage::Estimate) {
            Stage::Estimate
        } else if tost {
            Stage::Tost
        } else {
            Stage::Report
        };
        let fits: Vec<MarketFits> = treated
            .par_iter()
            .zip(&matches)
            .map(|(entry, m)| {
                run.fit_market(entry, &panel, &demand, m, &needed, tost)
                    .map_err(|e| CliError::Numeric(format!("market {}: {e}", entry.market_id)))
            })
            .collect::<Result<_, _>>()
            .map_err(|e: CliError| e.in_stage(stage))?;

        if has(Stage::Estimate) {
            for f in &fits {
                run.write_fits(f).map_err(|e| e.in_stage(Stage::Estimate))?;
            }
            if run.opts.models.contains(&Model::Demand) {
                let cols: Vec<TableColumn> = fits
                    .iter()
                    .filter_map(|f| f.demand.as_ref().map(|d| TableColumn { label: &f.market_id, fit: d }))
                    .collect();
                let table = regression_table(&cols);
                run.write("demand.txt", &table).map_err(|e| e.in_stage(Stage::Estimate))?;
            }
            timings.insert(Stage::Estimate.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        }

        if tost {
            let clock = Instant::now();
            let mut detail = String::from("market_id,outcome,term,sigma,coefficient,se,t_lower,t_upper,pass\n");
            let mut summary = String::from("market_id,outcome,delta,alpha,t_crit,pass\n");
            for f in &fits {
                for (o, t) in Outcome::ALL.iter().zip(f.tost.as_ref().expect("tost computed")) {
                    for p in &t.periods {
                        detail.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{}\n",
                            f.market_id,
                            o.column(),
                            p.term,
                            p.sigma,
                            p.coefficient,
                            p.se,
                            p.t_lower,
                            p.t_upper,
                            p.pass
                        ));
                    }
                    summary.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        f.market_id,
                        o.column(),
                        t.delta,
                        t.alpha,
                        t.t_crit,
                        t.pass
                    ));
                }
            }
            run.write("tost.csv", &detail).map_err(|e| e.in_stage(Stage::Tost))?;
            run.write("tost_summary.csv", &summary).map_err(|e| e.in_stage(Stage::Tost))?;
            timings.insert(Stage::Tost.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        }

        if has(Stage::Report) {
            let clock = Instant::now();
            report(&mut run, &treated, &fits).map_err(|e| e.in_stage(Stage::Report))?;
            timings.insert(Stage::Report.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        }
    }

    let mut outputs = Vec::new();
    let mut names = run.outputs.clone();
    names.sort();
    names.dedup();
    for name in names {
        let path = out_dir.join(&name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        outputs.push(OutputFile { path: name, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
    }
    #[derive(Serialize)]
    struct Hashed<'a> {
        version: &'a str,
        config_sha256: &'a str,
        seed: u64,
        stages: &'a [Stage],
        options: &'a PipelineOptions,
        outputs: &'a [OutputFile],
    }
    let hashed = Hashed {
        version: VERSION,
        config_sha256: &config_sha256,
        seed,
        stages: &stages,
        options: &run.opts,
        outputs: &outputs,
    };
    let manifest_hash = sha256_hex(serde_json::to_string(&hashed).expect("manifest serializes").as_bytes());
    let manifest = RunManifest {
        version: VERSION.to_string(),
        config_sha256,
        seed,
        stages,
        options: run.opts.clone(),
        outputs,
        timings_ms: timings,
        manifest_hash,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

fn report(run: &mut Run, treated: &[MarketEntry], fits: &[MarketFits]) -> Result<(), CliError> {
    let alpha = run.opts.alpha;
    let mut csv =
        String::from("market_id,a_pre,a_post35,a_post40,a_star,model_q35,model_q40,beta11,p11,beta12,p12,label\n");
    let mut rows: Vec<[String; 8]> = vec![[
        "market".into(),
        "a path".into(),
        "a*".into(),
        "model".into(),
        "ChatGPT3.5".into(),
        "ChatGPT4.0".into(),
        "label".into(),
        String::new(),
    ]];
    for (entry, f) in treated.iter().zip(fits) {
        let dual = &f.dual.as_ref().expect("dual fits computed")[0];
        let (b11, b12) = (dual.get(CHATGPT35).expect("term"), dual.get(CHATGPT40).expect("term"));
        let label = classify_quadrant(b11.estimate, b11.p, b12.estimate, b12.p, alpha);
        let a = entry.a_path;
        let a_star = inflection_point(&entry.market).map_err(|e| CliError::Numeric(e.to_string()))?;
        let (s35, s40) = (q_sign(entry, a.a_pre, a.a_post35), q_sign(entry, a.a_post35, a.a_post40));
        csv.push_str(&format!(
            "{},{},{},{},{},{s35},{s40},{},{},{},{},{label}\n",
            entry.market_id,
            a.a_pre.get(),
            a.a_post35.get(),
            a.a_post40.get(),
            a_star,
            b11.estimate,
            b11.p,
            b12.estimate,
            b12.p
        ));
        rows.push([
            entry.market_id.clone(),
            format!("{:.2} -> {:.2} -> {:.2}", a.a_pre.get(), a.a_post35.get(), a.a_post40.get()),
            format!("{a_star:.3}"),
            format!("({s35},{s40})"),
            format!("{:.3} (p={:.3})", b11.estimate, b11.p),
            format!("{:.3} (p={:.3})", b12.estimate, b12.p),
            label.to_string(),
            if label == QuadrantLabel::DispToProd { "excluded by the model".into() } else { String::new() },
        ]);
    }
    let widths: Vec<usize> = (0..8).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let mut text = format!("Quadrant classification of log(Fjobnum) effects at alpha = {alpha}\n");
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        text.push_str(line.join("  ").trim_end());
        text.push('\n');
    }
    run.write("quadrant.csv", &csv)?;
    run.write("quadrant.txt", &text)?;

    let markets: Vec<MarketEntry> = run.cfg.markets.clone();
    for entry in &markets {
        let rows = sweep_comparative_statics(&entry.market, run.opts.statics_grid)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        run.write(&format!("statics_{}.csv", slug(&entry.market_id)), &statics_csv(&rows))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::scenario_to_json;
    use crate::panel_synth::fixtures::config;

    fn small_config() -> ScenarioConfig {
        config((0.2, 0.35, 0.45), 300)
    }

    fn write_config(dir: &Path, cfg: &ScenarioConfig) -> std::path::PathBuf {
        let p = dir.join("scenario.json");
        std::fs::write(&p, scenario_to_json(cfg)).unwrap();
        p
    }

    #[test]
    fn simulate_only_writes_panel_and_demand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(dir.path(), &small_config());
        let out = dir.path().join("out");
        let m = run_pipeline(&cfg_path, &out, None, &[Stage::Simulate], &PipelineOptions::default()).unwrap();
        let names: Vec<&str> = m.outputs.iter().map(|o| o.path.as_str()).collect();
        assert_eq!(names, ["demand.csv", "panel.csv"]);
        let mut on_disk: Vec<String> =
            std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        on_disk.sort();
        assert_eq!(on_disk, ["demand.csv", "manifest.json", "panel.csv"]);
    }

    #[test]
    fn full_run_is_deterministic_and_stages_resume() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(dir.path(), &small_config());
        let opts = PipelineOptions { caliper: 0.02, ..Default::default() };
        let a = run_pipeline(&cfg_path, &dir.path().join("a"), Some(11), &Stage::ALL, &opts).unwrap();
        let b = run_pipeline(&cfg_path, &dir.path().join("b"), Some(11), &Stage::ALL, &opts).unwrap();
        assert_eq!(a.manifest_hash, b.manifest_hash);
        assert_eq!(a.outputs, b.outputs);
        assert!(a.outputs.iter().any(|o| o.path == "quadrant.csv"));
        assert!(a.outputs.iter().any(|o| o.path == "tost_summary.csv"));
        assert!(a.outputs.iter().any(|o| o.path == "het_treated_us_fjobnum.csv"));
        let c = run_pipeline(&cfg_path, &dir.path().join("c"), Some(12), &Stage::ALL, &opts).unwrap();
        assert_ne!(a.manifest_hash, c.manifest_hash);

        // estimate alone reads the simulated CSVs back
        let resumed = run_pipeline(&cfg_path, &dir.path().join("a"), Some(11), &[Stage::Estimate], &opts).unwrap();
        let did_a = a.outputs.iter().find(|o| o.path == "did_treated_fjobnum.csv").unwrap();
        let did_r = resumed.outputs.iter().find(|o| o.path == "did_treated_fjobnum.csv").unwrap();
        assert_eq!(did_a, did_r);
    }

    #[test]
    fn missing_inputs_name_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_config(dir.path(), &small_config());
        let e = run_pipeline(&cfg_path, &dir.path().join("empty"), None, &[Stage::Tost], &PipelineOptions::default())
            .unwrap_err();
        assert!(e.to_string().starts_with("stage tost:"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn invalid_options_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad = PipelineOptions { caliper: 0.0, ..Default::default() };
        let e = run_config(small_config(), dir.path(), &[Stage::Match], &bad).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn stage_names_parse() {
        for s in Stage::ALL {
            assert_eq!(s.to_string().parse::<Stage>().unwrap(), s);
        }
        assert!("plot".parse::<Stage>().is_err());
    }
}
