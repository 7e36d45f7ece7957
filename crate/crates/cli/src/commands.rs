use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use occexpo::annotate::{
    annotate_taxonomy, read_records, AnnotateOptions, AnnotationRecord, ClassifierClient, CommandClient, DecodeConfig,
    MockClient, Rubric,
};
use occexpo::exposure::{demographic_exposure, industry_exposure, DemographicShares, IntensityMatrix};
use occexpo::model::{
    contour_grid, linspace, optimal_decisions, scenario_report, sort_by_exposure, ExposureSource, Scenario,
};
use occexpo::scores::{ExpertPanel, ScoreColumn, ScoreTable};
use occexpo::stats::{
    correlation_matrix, paired, pearson, scatter_report, share_growth, summarize, CorrResult, CorrelationMatrix,
    FitLine, OutcomeKind, OutcomeSeries, StarThresholds, SummaryEntry,
};
use occexpo::table::{format_value, write_csv};
use occexpo::taxonomy::{OccupationCode, Taxonomy};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{to_json_text, Inputs, Outputs};
use crate::{
    AggregateArgs, AnnotateArgs, CliError, Command, ContourArgs, DemographicArgs, IndustryArgs, PipelineArgs,
    ScenarioInput, ScoreArgs, ScoreInput, SimulateArgs, StatsArgs, CLIENT_CMD_ENV,
};

type Params = BTreeMap<String, Value>;

pub fn dispatch(command: &Command, decimals: Option<usize>) -> Result<String, CliError> {
    match command {
        Command::Annotate(a) => annotate(a),
        Command::Score(a) => score(a, decimals),
        Command::Aggregate(a) => aggregate(a, decimals),
        Command::Industry(a) => industry(a, decimals),
        Command::Demographic(a) => demographic(a, decimals),
        Command::Stats(a) => stats(a, decimals),
        Command::Simulate(a) => simulate(a, decimals),
        Command::Contour(a) => contour(a, decimals),
        Command::Validate(a) => {
            let diagnostics = crate::validate(a);
            if diagnostics.is_empty() {
                Ok("ok: no problems found\n".to_owned())
            } else {
                let lines: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
                Err(CliError::input(format!(
                    "{} problem(s) found\n{}",
                    diagnostics.len(),
                    lines.join("\n")
                )))
            }
        }
        Command::Pipeline(a) => pipeline(a, decimals),
    }
}

fn at(path: &Path) -> impl Fn(&dyn std::fmt::Display) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

fn base_params(decimals: Option<usize>) -> Params {
    let mut p = Params::new();
    p.insert("full_precision".into(), json!(decimals.is_none()));
    p
}

fn load_taxonomy(inputs: &mut Inputs, path: &Path) -> Result<Taxonomy, CliError> {
    Taxonomy::parse(&inputs.read(path)?).map_err(|e| CliError::input(at(path)(&e)))
}

fn load_scores(inputs: &mut Inputs, path: &Path) -> Result<ScoreTable, CliError> {
    ScoreTable::parse(&inputs.read(path)?).map_err(|e| CliError::input(at(path)(&e)))
}

fn load_intensity(inputs: &mut Inputs, path: &Path) -> Result<IntensityMatrix, CliError> {
    IntensityMatrix::parse(&inputs.read(path)?).map_err(|e| CliError::input(at(path)(&e)))
}

fn load_demographics(inputs: &mut Inputs, path: &Path) -> Result<DemographicShares, CliError> {
    DemographicShares::parse(&inputs.read(path)?).map_err(|e| CliError::input(at(path)(&e)))
}

fn column(table: &ScoreTable, name: &str) -> Result<BTreeMap<OccupationCode, f64>, CliError> {
    let values = table
        .column(&ScoreColumn::parse(name))
        .map_err(|e| CliError::config(e.to_string()))?;
    if values.is_empty() {
        return Err(CliError::input(format!("score column `{name}` has no values")));
    }
    Ok(values)
}

fn thresholds(cutoffs: &[f64]) -> Result<StarThresholds, CliError> {
    StarThresholds::new(cutoffs).map_err(|e| CliError::config(e.to_string()))
}

fn computation(e: impl std::fmt::Display) -> CliError {
    CliError::computation(e.to_string())
}

/// Store timestamp. `SOURCE_DATE_EPOCH` wins; otherwise mock runs use the
/// epoch so that their output is reproducible, and live runs use the clock.
fn store_timestamp(live: bool) -> Result<String, CliError> {
    let secs = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .map_err(|_| CliError::config(format!("SOURCE_DATE_EPOCH `{v}` is not an integer")))?,
        Err(_) if live => std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0),
        Err(_) => 0,
    };
    let t = chrono::DateTime::from_timestamp(secs, 0)
        .ok_or_else(|| CliError::config(format!("timestamp {secs} is out of range")))?;
    Ok(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn annotate(a: &AnnotateArgs) -> Result<String, CliError> {
    if a.n_samples == 0 {
        return Err(CliError::config("--n-samples must be at least 1"));
    }
    if a.models.is_empty() || a.models.iter().any(|m| m.trim().is_empty()) {
        return Err(CliError::config("--models must name at least one model"));
    }
    let mut inputs = Inputs::default();
    let taxonomy = load_taxonomy(&mut inputs, &a.taxonomy)?;
    let rubric = match &a.rubric {
        Some(p) => Rubric::from_toml(&inputs.read(p)?).map_err(|e| CliError::config(at(p)(&e)))?,
        None => Rubric::default(),
    };

    let mut default_mock = "seeded".to_owned();
    let mut model_mocks: BTreeMap<String, String> = BTreeMap::new();
    for spec in &a.mock {
        match spec.split_once('=') {
            Some((model, s)) => {
                if !a.models.iter().any(|m| m == model) {
                    return Err(CliError::config(format!("--mock targets unknown model `{model}`")));
                }
                model_mocks.insert(model.to_owned(), s.to_owned());
            }
            None => default_mock = spec.clone(),
        }
    }
    let live = std::env::var(CLIENT_CMD_ENV).ok().filter(|s| !s.trim().is_empty());

    let mut params = Params::new();
    let mut clients: Vec<(String, Box<dyn ClassifierClient>)> = Vec::new();
    for model in &a.models {
        let client: Box<dyn ClassifierClient> = match &live {
            Some(cmd) => {
                let mut parts = cmd.split_whitespace();
                let program = parts.next().expect("non-blank command");
                params.insert(format!("client.{model}"), json!(format!("command:{program}")));
                Box::new(CommandClient {
                    program: program.into(),
                    args: parts.map(str::to_owned).chain([model.clone()]).collect(),
                })
            }
            None => {
                let spec = model_mocks.get(model).unwrap_or(&default_mock);
                if let Some(p) = spec.strip_prefix("script:") {
                    inputs.record(Path::new(p))?;
                }
                params.insert(format!("client.{model}"), json!(format!("mock:{spec}")));
                Box::new(MockClient::from_spec(spec, a.seed, model).map_err(|e| CliError::config(e.to_string()))?)
            }
        };
        clients.push((model.clone(), client));
    }

    let mut runs = Vec::new();
    let mut refused = BTreeSet::new();
    for (model, client) in &clients {
        let opts = AnnotateOptions {
            model_id: model.clone(),
            n_samples: a.n_samples,
            max_retries: a.max_retries,
            max_in_flight: a.in_flight.max(1),
            decode: DecodeConfig {
                temperature: a.temperature,
                ..DecodeConfig::default()
            },
            rubric: rubric.clone(),
            language_tag: a.language.clone(),
        };
        let result = annotate_taxonomy(client.as_ref(), &taxonomy, &opts).map_err(computation)?;
        log::info!("{model}: annotated {} occupations", result.runs.len());
        runs.extend(result.runs);
        refused.extend(result.refused);
    }
    if !refused.is_empty() {
        let codes: Vec<String> = refused.iter().map(ToString::to_string).collect();
        log::warn!(
            "skipped {} occupations without a description: {}",
            codes.len(),
            codes.join(", ")
        );
    }
    if runs.is_empty() {
        return Err(CliError::input(format!(
            "{}: no scoreable occupation has a description",
            a.taxonomy.display()
        )));
    }

    let timestamp = store_timestamp(live.is_some())?;
    let mut store = if a.out.exists() {
        inputs.read(&a.out)?
    } else {
        String::new()
    };
    if !store.is_empty() && !store.ends_with('\n') {
        store.push('\n');
    }
    for run in &runs {
        store.push_str(&AnnotationRecord::from_run(run, &timestamp).to_line());
    }

    params.insert("models".into(), json!(a.models));
    params.insert("n_samples".into(), json!(a.n_samples));
    params.insert("max_retries".into(), json!(a.max_retries));
    params.insert("in_flight".into(), json!(a.in_flight));
    params.insert("seed".into(), json!(a.seed));
    params.insert("language".into(), json!(a.language));
    params.insert("temperature".into(), json!(a.temperature));
    params.insert("timestamp".into(), json!(timestamp));
    let mut out = Outputs::default();
    out.file(a.out.clone(), store.into_bytes());
    out.commit("annotate", params, inputs)
}

fn score(a: &ScoreArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let mut inputs = Inputs::default();
    let taxonomy = match &a.taxonomy {
        Some(p) => Some(load_taxonomy(&mut inputs, p)?),
        None => None,
    };
    let experts = match &a.experts {
        Some(p) => Some(ExpertPanel::parse(&inputs.read(p)?).map_err(|e| CliError::input(at(p)(&e)))?),
        None => None,
    };
    let mut params = base_params(decimals);
    let table = match (&a.scores, &a.annotations) {
        (Some(p), _) => {
            let mut t = load_scores(&mut inputs, p)?;
            if let Some(panel) = &experts {
                t.attach_experts(panel);
            }
            if let Some((code, dev)) = t.max_ensemble_deviation() {
                log::info!("largest stated/recomputed ensemble difference: {dev:.2e} at {code}");
            }
            params.insert("source".into(), json!("score_table"));
            t
        }
        (None, Some(p)) => {
            inputs.record(p)?;
            let records = read_records(p).map_err(|e| CliError::input(e.to_string()))?;
            let runs: Vec<_> = records.into_iter().map(AnnotationRecord::into_run).collect();
            params.insert("source".into(), json!("annotations"));
            ScoreTable::from_runs(&runs, taxonomy.as_ref(), experts.as_ref()).map_err(computation)?
        }
        (None, None) => return Err(CliError::config("give --scores or --annotations")),
    };
    let mut out = Outputs::default();
    out.emit(a.out.as_deref(), table.to_csv(decimals));
    out.commit("score", params, inputs)
}

fn aggregate_csv(
    taxonomy: &Taxonomy,
    scores: &BTreeMap<OccupationCode, f64>,
    decimals: Option<usize>,
) -> Result<String, CliError> {
    let agg = taxonomy.aggregate_up(scores).map_err(computation)?;
    Ok(write_csv(
        &["code", "level", "title", "score"],
        taxonomy.iter().filter_map(|n| {
            agg.get(&n.code).map(|v| {
                vec![
                    n.code.to_string(),
                    n.level().to_string(),
                    n.title.clone(),
                    format_value(*v, decimals),
                ]
            })
        }),
    ))
}

fn exposure_csv(key: &str, rows: &[(String, f64)], decimals: Option<usize>) -> String {
    write_csv(
        &[key, "exposure"],
        rows.iter().map(|(k, v)| vec![k.clone(), format_value(*v, decimals)]),
    )
}

fn score_params(params: &mut Params, s: &ScoreInput) {
    params.insert("column".into(), json!(s.column));
}

fn aggregate(a: &AggregateArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let mut inputs = Inputs::default();
    let taxonomy = load_taxonomy(&mut inputs, &a.taxonomy)?;
    let table = load_scores(&mut inputs, &a.scores.scores)?;
    let scores = column(&table, &a.scores.column)?;
    let text = aggregate_csv(&taxonomy, &scores, decimals)?;
    let mut params = base_params(decimals);
    score_params(&mut params, &a.scores);
    let mut out = Outputs::default();
    out.emit(a.out.as_deref(), text);
    out.commit("aggregate", params, inputs)
}

fn industry(a: &IndustryArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let mut inputs = Inputs::default();
    let beta = load_intensity(&mut inputs, &a.intensity)?;
    let table = load_scores(&mut inputs, &a.scores.scores)?;
    let scores = column(&table, &a.scores.column)?;
    let rows = industry_exposure(&beta, &scores).map_err(computation)?;
    let mut params = base_params(decimals);
    score_params(&mut params, &a.scores);
    let mut out = Outputs::default();
    out.emit(a.out.as_deref(), exposure_csv(IntensityMatrix::KEY, &rows, decimals));
    out.commit("industry", params, inputs)
}

fn demographic(a: &DemographicArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let mut inputs = Inputs::default();
    let shares = load_demographics(&mut inputs, &a.demographics)?;
    let beta = load_intensity(&mut inputs, &a.intensity)?;
    let table = load_scores(&mut inputs, &a.scores.scores)?;
    let scores = column(&table, &a.scores.column)?;
    let by_industry: BTreeMap<String, f64> = industry_exposure(&beta, &scores)
        .map_err(computation)?
        .into_iter()
        .collect();
    let rows = demographic_exposure(&shares, &by_industry).map_err(computation)?;
    let mut params = base_params(decimals);
    score_params(&mut params, &a.scores);
    let mut out = Outputs::default();
    out.emit(a.out.as_deref(), exposure_csv(DemographicShares::KEY, &rows, decimals));
    out.commit("demographic", params, inputs)
}

#[derive(Debug, Serialize)]
struct NamedSummary {
    name: String,
    #[serde(flatten)]
    summary: SummaryEntry,
}

#[derive(Debug, Serialize)]
struct PairReport {
    a: String,
    b: String,
    #[serde(flatten)]
    result: CorrResult,
}

#[derive(Debug, Serialize)]
struct ScatterSummary {
    exposure_column: String,
    outcome: OutcomeKind,
    n: usize,
    dropped: Vec<OccupationCode>,
    r: f64,
    correlation: Option<CorrResult>,
    fit: FitLine,
}

#[derive(Debug, Serialize)]
struct StatsReport {
    n_occupations: usize,
    summary: Vec<NamedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    correlations: Option<CorrelationMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble_expert: Option<CorrResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<PairReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scatter: Option<ScatterSummary>,
}

fn stats_report(table: &ScoreTable, th: &StarThresholds, pair: Option<(&str, &str)>) -> Result<StatsReport, CliError> {
    let mut names: Vec<String> = table.models.clone();
    names.push("ensemble".into());
    if table.records.iter().any(|r| r.expert_score.is_some()) {
        names.push("expert".into());
    }
    let mut summary = Vec::with_capacity(names.len());
    for name in &names {
        let values: Vec<f64> = column(table, name)?.into_values().collect();
        summary.push(NamedSummary {
            name: name.clone(),
            summary: summarize(&values).map_err(computation)?,
        });
    }
    let correlations = if table.models.len() >= 2 {
        let series = table
            .models
            .iter()
            .map(|m| Ok((m.clone(), column(table, m)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        Some(correlation_matrix(&series, th).map_err(computation)?)
    } else {
        None
    };
    let ensemble_expert = if names.iter().any(|n| n == "expert") {
        let (_, x, y) = paired(&column(table, "ensemble")?, &column(table, "expert")?);
        Some(pearson(&x, &y, th).map_err(computation)?)
    } else {
        None
    };
    let pair = match pair {
        Some((a, b)) => {
            let (_, x, y) = paired(&column(table, a)?, &column(table, b)?);
            Some(PairReport {
                a: a.to_owned(),
                b: b.to_owned(),
                result: pearson(&x, &y, th).map_err(computation)?,
            })
        }
        None => None,
    };
    Ok(StatsReport {
        n_occupations: table.records.len(),
        summary,
        correlations,
        ensemble_expert,
        pair,
        scatter: None,
    })
}

fn load_outcome(inputs: &mut Inputs, path: &Path) -> Result<OutcomeSeries, CliError> {
    OutcomeSeries::parse(&inputs.read(path)?)
        .and_then(|o| o.into_series())
        .map_err(|e| CliError::input(at(path)(&e)))
}

fn scatter(
    table: &ScoreTable,
    exposure_column: &str,
    outcome: &OutcomeSeries,
    th: &StarThresholds,
) -> Result<(ScatterSummary, occexpo::stats::ScatterReport), CliError> {
    let exposure = column(table, exposure_column)?;
    let titles = table
        .records
        .iter()
        .map(|r| (r.code.clone(), r.title.clone()))
        .collect();
    let report = scatter_report(&exposure, outcome, &titles, th).map_err(computation)?;
    let summary = ScatterSummary {
        exposure_column: exposure_column.to_owned(),
        outcome: report.outcome_kind,
        n: report.n,
        dropped: report.dropped.clone(),
        r: report.r,
        correlation: report.correlation.clone(),
        fit: report.fit,
    };
    Ok((summary, report))
}

fn stats(a: &StatsArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let th = thresholds(&a.thresholds)?;
    let mut inputs = Inputs::default();
    let table = load_scores(&mut inputs, &a.scores.scores)?;
    let pair = a.pair.as_ref().map(|p| (p[0].as_str(), p[1].as_str()));
    let mut report = stats_report(&table, &th, pair)?;
    let mut out = Outputs::default();
    let mut params = base_params(decimals);
    score_params(&mut params, &a.scores);
    params.insert("thresholds".into(), json!(a.thresholds));
    if let Some(p) = &a.pair {
        params.insert("pair".into(), json!(p));
    }
    if let Some(path) = &a.outcomes {
        let mut outcome = load_outcome(&mut inputs, path)?;
        if let Some(base) = &a.baseline_outcomes {
            let t0 = load_outcome(&mut inputs, base)?;
            outcome = share_growth(&t0, &outcome).map_err(computation)?;
        }
        let (summary, full) = scatter(&table, &a.scores.column, &outcome, &th)?;
        if let Some(plot) = &a.plot_data {
            out.file(plot.clone(), full.plot_data(decimals).into_bytes());
        }
        report.scatter = Some(summary);
    }
    out.emit(a.out.as_deref(), to_json_text(&report, decimals));
    out.commit("stats", params, inputs)
}

fn load_scenario(inputs: &mut Inputs, s: &ScenarioInput, params: &mut Params) -> Result<Scenario, CliError> {
    if let Some(rho) = s.rho {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(CliError::config(format!("--rho must be positive, got {rho}")));
        }
        params.insert("rho".into(), json!(rho));
    }
    let text = inputs.read(&s.scenario)?;
    let scenario = match (&s.intensity, &s.scores) {
        (Some(ip), Some(sp)) => {
            let beta = load_intensity(inputs, ip)?;
            let table = load_scores(inputs, sp)?;
            let scores = column(&table, &s.column)?;
            params.insert("column".into(), json!(s.column));
            Scenario::parse(
                &text,
                s.rho,
                Some(ExposureSource {
                    intensity: &beta,
                    occupation_scores: &scores,
                }),
            )
        }
        _ => Scenario::parse(&text, s.rho, None),
    };
    scenario.map_err(|e| CliError::input(at(&s.scenario)(&e)))
}

fn parse_decisions(spec: &str, scenario: &Scenario) -> Result<Vec<bool>, CliError> {
    let n = scenario.sectors.len();
    match spec {
        "optimal" => optimal_decisions(&scenario.sectors, &scenario.law).map_err(computation),
        "none" => Ok(vec![false; n]),
        "all" => Ok(vec![true; n]),
        list => {
            let d = list
                .split(',')
                .map(|t| match t.trim() {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    other => Err(CliError::config(format!("--decisions: `{other}` is not 0 or 1"))),
                })
                .collect::<Result<Vec<bool>, _>>()?;
            if d.len() != n {
                return Err(CliError::config(format!(
                    "--decisions has {} entries for {n} sectors",
                    d.len()
                )));
            }
            Ok(d)
        }
    }
}

fn simulate(a: &SimulateArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let mut inputs = Inputs::default();
    let mut params = base_params(decimals);
    let scenario = load_scenario(&mut inputs, &a.scenario, &mut params)?;
    let decisions = parse_decisions(&a.decisions, &scenario)?;
    params.insert("decisions".into(), json!(a.decisions));
    let report = scenario_report(&scenario.sectors, &scenario.law, &decisions).map_err(computation)?;
    let mut out = Outputs::default();
    out.emit(a.out.as_deref(), to_json_text(&report, decimals));
    out.commit("simulate", params, inputs)
}

fn contour(a: &ContourArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let dp = a.delta_points.unwrap_or(a.points);
    let rp = a.ratio_points.unwrap_or(a.points);
    if dp == 0 || rp == 0 {
        return Err(CliError::config("grids need at least one point"));
    }
    if !(0.0..1.0).contains(&a.delta_max) {
        return Err(CliError::config(format!(
            "--delta-max must lie in [0, 1), got {}",
            a.delta_max
        )));
    }
    let mut inputs = Inputs::default();
    let mut params = base_params(decimals);
    let mut scenario = load_scenario(&mut inputs, &a.scenario, &mut params)?;
    sort_by_exposure(&mut scenario.sectors);
    let grid = contour_grid(
        &scenario.sectors,
        &scenario.law,
        &linspace(0.0, a.delta_max, dp),
        &linspace(0.0, 1.0, rp),
    )
    .map_err(computation)?;
    params.insert("delta_points".into(), json!(dp));
    params.insert("ratio_points".into(), json!(rp));
    params.insert("delta_max".into(), json!(a.delta_max));
    let mut out = Outputs::default();
    out.emit(a.out.as_deref(), grid.to_csv(decimals));
    out.commit("contour", params, inputs)
}

fn pipeline(a: &PipelineArgs, decimals: Option<usize>) -> Result<String, CliError> {
    let th = thresholds(&a.thresholds)?;
    let mut inputs = Inputs::default();
    let taxonomy = load_taxonomy(&mut inputs, &a.taxonomy)?;
    let table = load_scores(&mut inputs, &a.scores)?;
    let scores = column(&table, &a.column)?;
    let mut out = Outputs::default();
    let dir = &a.out;

    out.file(dir.join("scores.csv"), table.to_csv(decimals).into_bytes());
    out.file(
        dir.join("aggregate.csv"),
        aggregate_csv(&taxonomy, &scores, decimals)?.into_bytes(),
    );
    if let Some(ip) = &a.intensity {
        let beta = load_intensity(&mut inputs, ip)?;
        let rows = industry_exposure(&beta, &scores).map_err(computation)?;
        out.file(
            dir.join("industry.csv"),
            exposure_csv(IntensityMatrix::KEY, &rows, decimals).into_bytes(),
        );
        if let Some(dp) = &a.demographics {
            let shares = load_demographics(&mut inputs, dp)?;
            let by_industry: BTreeMap<String, f64> = rows.into_iter().collect();
            let demo = demographic_exposure(&shares, &by_industry).map_err(computation)?;
            out.file(
                dir.join("demographic.csv"),
                exposure_csv(DemographicShares::KEY, &demo, decimals).into_bytes(),
            );
        }
    }
    let mut report = stats_report(&table, &th, None)?;
    if let Some(op) = &a.outcomes {
        let outcome = load_outcome(&mut inputs, op)?;
        let (summary, full) = scatter(&table, &a.column, &outcome, &th)?;
        out.file(dir.join("scatter.csv"), full.plot_data(decimals).into_bytes());
        report.scatter = Some(summary);
    }
    out.file(dir.join("stats.json"), to_json_text(&report, decimals).into_bytes());

    std::fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    out.shared_manifest(dir.join("manifest.json"));
    let mut params = base_params(decimals);
    params.insert("column".into(), json!(a.column));
    params.insert("thresholds".into(), json!(a.thresholds));
    out.commit("pipeline", params, inputs)
}
