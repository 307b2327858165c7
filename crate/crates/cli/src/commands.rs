use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rxits::arima::{auto_fit_with, fit_with, forecast, ArimaOrders, AutoOptions, FitOptions};
use rxits::geoclass::{classify, read_classified_csv, write_classified_csv, Thresholds};
use rxits::intervention::{its_batch, ItsOptions};
use rxits::series::{aggregate_all, aggregate_monthly, pre_post_table, read_series_csv, summarize_classes, write_series_csv, GroupBy};
use rxits::syngen::{default_config, generate, ScenarioConfig};
use rxits::{ingest, report, stats, ClassifiedRecord, DrugFamily, MonthKey, SeriesGroup};
use serde::{Deserialize, Serialize};

use crate::manifest::Recorder;
use crate::{
    AggregateArgs, AnovaArgs, ClassifyArgs, Cli, Command, Failure, FitArgs, IngestArgs, ItsArgs, ReportArgs, SimulateArgs,
    SummaryTableArgs, TtestArgs, TtestUnit,
};

type Result<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

pub fn run(cli: &Cli, argv: Vec<String>) -> Result<()> {
    if cli.threads == 0 {
        return usage("--threads must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Failure::Data(anyhow!("thread pool: {e}")))?;
    let args = serde_json::to_value(&cli.command).map_err(|e| Failure::Data(e.into()))?;
    let mut rec = Recorder::new(cli.command.name(), argv, args, cli.threads);
    let default_manifest = match &cli.command {
        Command::Simulate(a) => simulate(a, &mut rec)?,
        Command::Ingest(a) => ingest_cmd(a, &mut rec)?,
        Command::Classify(a) => classify_cmd(a, &mut rec)?,
        Command::Aggregate(a) => aggregate(a, &mut rec)?,
        Command::SummaryTable(a) => summary_table(a, &mut rec)?,
        Command::Anova(a) => anova(a, &mut rec)?,
        Command::Ttest(a) => ttest(a, &mut rec)?,
        Command::Fit(a) => fit(a, &mut rec)?,
        Command::Its(a) => its(a, &mut rec)?,
        Command::Report(a) => report_cmd(a, &mut rec)?,
    };
    let path = cli.manifest.clone().unwrap_or(default_manifest);
    rec.finish(&path)?;
    Ok(())
}

// ---------------------------------------------------------------- file helpers

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read_input(rec: &mut Recorder, path: &Path) -> Result<Vec<u8>> {
    let data = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    rec.input(path)?;
    Ok(data)
}

fn write_output(rec: &mut Recorder, path: &Path, data: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, data).with_context(|| format!("cannot write {}", path.display()))?;
    rec.output(path)?;
    Ok(())
}

fn write_json<T: Serialize>(rec: &mut Recorder, path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.into()))?;
    write_output(rec, path, (text + "\n").as_bytes())
}

fn render<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> rxits::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn read_classified(rec: &mut Recorder, path: &Path) -> Result<Vec<ClassifiedRecord>> {
    let data = read_input(rec, path)?;
    read_classified_csv(&data[..]).map_err(|e| Failure::Data(anyhow!("{}: {e}", path.display())))
}

fn families_present(records: &[ClassifiedRecord]) -> Vec<DrugFamily> {
    DrugFamily::ALL.into_iter().filter(|f| records.iter().any(|r| r.record.drug_family == *f)).collect()
}

// ---------------------------------------------------------------- stages

fn simulate(a: &SimulateArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let config: ScenarioConfig = match &a.config {
        Some(p) => {
            let data = read_input(rec, p)?;
            serde_json::from_slice(&data).with_context(|| format!("{}: invalid scenario", p.display()))?
        }
        None => default_config(),
    };
    let seed = a.seed.unwrap_or(config.seed);
    rec.seed(seed);
    let records = generate(&config, a.n, seed)?;
    log::info!("generated {} records", records.len());
    let data = render(|b| ingest::write_csv(&records, b))?;
    write_output(rec, &a.out, &data)?;
    if let Some(p) = &a.dump_config {
        write_json(rec, p, &ScenarioConfig { seed, ..config })?;
    }
    Ok(sibling(&a.out, ".manifest.json"))
}

#[derive(Serialize)]
struct IngestReport<'a> {
    filter: &'a ingest::FilterReport,
    malformed_rows: &'a [ingest::RowError],
}

fn ingest_cmd(a: &IngestArgs, rec: &mut Recorder) -> Result<PathBuf> {
    if !(a.cap > 0.0) {
        return usage("--cap must be positive");
    }
    let data = read_input(rec, &a.input)?;
    let (kept, filter, errors) = ingest::ingest(&data[..], a.cap, a.cutoff)?;
    for e in errors.iter().take(5) {
        log::warn!("{}: line {}: {}", a.input.display(), e.line, e.reason);
    }
    let out = render(|b| ingest::write_csv(&kept, b))?;
    write_output(rec, &a.out, &out)?;
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.out, ".filter_report.json"));
    write_json(rec, &report_path, &IngestReport { filter: &filter, malformed_rows: &errors })?;
    Ok(sibling(&a.out, ".manifest.json"))
}

fn classify_cmd(a: &ClassifyArgs, rec: &mut Recorder) -> Result<PathBuf> {
    if !(a.near > 0.0) || !(a.ratio >= 1.0) {
        return usage("--near must be positive and --ratio at least 1");
    }
    let data = read_input(rec, &a.input)?;
    let parsed = ingest::parse_csv(&data[..])?;
    if let Some(e) = parsed.errors.first() {
        return Err(Failure::Data(anyhow!(
            "{}: {} malformed rows (first at line {}: {}); run `ingest` first",
            a.input.display(),
            parsed.errors.len(),
            e.line,
            e.reason
        )));
    }
    let classified = classify(&parsed.records, &Thresholds { near_miles: a.near, isolation_ratio: a.ratio })?;
    let out = render(|b| write_classified_csv(&classified, b))?;
    write_output(rec, &a.out, &out)?;
    Ok(sibling(&a.out, ".manifest.json"))
}

/// Index written by `aggregate` and read by `its`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesIndex {
    pub policy_month: MonthKey,
    pub series: Vec<SeriesEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub family: DrugFamily,
    pub group: SeriesGroup,
    pub file: String,
    pub first_month: Option<MonthKey>,
    pub last_month: Option<MonthKey>,
    pub n_months: usize,
    pub missing_months: usize,
    pub n_records: usize,
}

fn aggregate(a: &AggregateArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let records = read_classified(rec, &a.input)?;
    let all = aggregate_all(&records, a.policy_month);
    let mut index = SeriesIndex { policy_month: a.policy_month, series: Vec::new() };
    for s in &all {
        let file = format!("{}.csv", report::plot_file_stem(s.family, s.group));
        let data = render(|b| write_series_csv(s, b))?;
        write_output(rec, &a.out_dir.join(&file), &data)?;
        index.series.push(SeriesEntry {
            family: s.family,
            group: s.group,
            file,
            first_month: s.points.first().map(|p| p.month),
            last_month: s.points.last().map(|p| p.month),
            n_months: s.len(),
            missing_months: s.missing_count(),
            n_records: s.points.iter().map(|p| p.n_records).sum(),
        });
    }
    write_json(rec, &a.out_dir.join("series.json"), &index)?;
    Ok(a.out_dir.join("aggregate.manifest.json"))
}

fn summary_table(a: &SummaryTableArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let records = read_classified(rec, &a.input)?;
    for family in families_present(&records) {
        let rows = summarize_classes(&records, family);
        write_output(rec, &a.out_dir.join(format!("class_summary_{family}.md")), report::class_summary_markdown(family, &rows).as_bytes())?;
        let csv = render(|b| report::class_summary_csv(&rows, b))?;
        write_output(rec, &a.out_dir.join(format!("class_summary_{family}.csv")), &csv)?;
        let table = pre_post_table(&records, family, a.policy_month);
        write_output(rec, &a.out_dir.join(format!("pre_post_{family}.md")), report::pre_post_markdown(&table).as_bytes())?;
        let csv = render(|b| report::pre_post_csv(&table, b))?;
        write_output(rec, &a.out_dir.join(format!("pre_post_{family}.csv")), &csv)?;
    }
    Ok(a.out_dir.join("summary-table.manifest.json"))
}

#[derive(Serialize)]
struct GroupStat {
    class: String,
    n: usize,
    mean: f64,
}

#[derive(Serialize)]
struct AnovaOutput {
    family: DrugFamily,
    groups: Vec<GroupStat>,
    /// Classes with a single record, left out of the test.
    excluded: Vec<GroupStat>,
    statistic: f64,
    df: Vec<f64>,
    p_value: f64,
}

fn anova(a: &AnovaArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let records = read_classified(rec, &a.input)?;
    let mut groups = Vec::new();
    let mut stats_rows = Vec::new();
    let mut excluded = Vec::new();
    for code in rxits::ClassCode::all() {
        let v: Vec<f64> = records.iter().filter(|r| r.record.drug_family == a.family && r.class == code).map(|r| r.mme_day).collect();
        let row = GroupStat { class: code.to_string(), n: v.len(), mean: stats::mean(&v) };
        match v.len() {
            0 => {}
            1 => excluded.push(row),
            _ => {
                stats_rows.push(row);
                groups.push(v);
            }
        }
    }
    let t = stats::one_way_anova(&groups)?;
    let out = AnovaOutput { family: a.family, groups: stats_rows, excluded, statistic: t.statistic, df: t.df, p_value: t.p_value };
    write_json(rec, &a.out, &out)?;
    Ok(sibling(&a.out, ".manifest.json"))
}

#[derive(Serialize)]
struct TtestRow {
    class: String,
    n: usize,
    mean: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    statistic: Option<f64>,
    df: Option<f64>,
    p_value: Option<f64>,
    above_threshold: bool,
    note: Option<String>,
}

#[derive(Serialize)]
struct TtestOutput {
    family: DrugFamily,
    mu: f64,
    unit: TtestUnit,
    alpha: f64,
    rows: Vec<TtestRow>,
}

fn ttest(a: &TtestArgs, rec: &mut Recorder) -> Result<PathBuf> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return usage("--alpha must lie in (0, 1)");
    }
    let records = read_classified(rec, &a.input)?;
    let monthly = match a.unit {
        TtestUnit::Month => aggregate_monthly(&records, GroupBy::Class, a.family, MonthKey::default_policy()),
        TtestUnit::Record => Vec::new(),
    };
    let mut rows = Vec::new();
    for (i, code) in rxits::ClassCode::all().enumerate() {
        let values: Vec<f64> = match a.unit {
            TtestUnit::Month => monthly.get(i).map(|s| s.observed()).unwrap_or_default(),
            TtestUnit::Record => records.iter().filter(|r| r.record.drug_family == a.family && r.class == code).map(|r| r.mme_day).collect(),
        };
        let row = match (stats::t_test_greater(&values, a.mu), stats::mean_ci(&values, 0.95)) {
            (Ok(t), Ok(ci)) => TtestRow {
                class: code.to_string(),
                n: values.len(),
                mean: Some(ci.mean),
                ci_lo: Some(ci.lo),
                ci_hi: Some(ci.hi),
                statistic: Some(t.statistic),
                df: t.df.first().copied(),
                p_value: Some(t.p_value),
                above_threshold: t.p_value < a.alpha,
                note: None,
            },
            (Err(e), _) | (_, Err(e)) => TtestRow {
                class: code.to_string(),
                n: values.len(),
                mean: None,
                ci_lo: None,
                ci_hi: None,
                statistic: None,
                df: None,
                p_value: None,
                above_threshold: false,
                note: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    write_json(rec, &a.out, &TtestOutput { family: a.family, mu: a.mu, unit: a.unit, alpha: a.alpha, rows })?;
    Ok(sibling(&a.out, ".manifest.json"))
}

#[derive(Serialize)]
struct FitOutput {
    input: PathBuf,
    months: Vec<MonthKey>,
    n_interpolated: usize,
    fit: rxits::ArimaFit,
    selection: Option<rxits::arima::AutoFit>,
    forecast_months: Vec<MonthKey>,
    forecast: Option<rxits::Forecast>,
}

/// `opioid_03.csv` → (opioid, 03); anything else is treated as an overall series.
fn series_identity(path: &Path) -> (DrugFamily, SeriesGroup) {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.split_once('_'))
        .and_then(|(f, g)| Some((f.parse().ok()?, g.parse().ok()?)))
        .unwrap_or((DrugFamily::Opioid, SeriesGroup::Overall))
}

fn fit(a: &FitArgs, rec: &mut Recorder) -> Result<PathBuf> {
    if a.season < 2 {
        return usage("--season must be at least 2");
    }
    if !(a.level > 0.0 && a.level < 1.0) {
        return usage("--level must lie in (0, 1)");
    }
    if a.order.is_none() && a.constant.is_some() {
        return usage("--constant requires --order");
    }
    let orders = match &a.order {
        Some(s) => Some(ArimaOrders::parse(s, a.season).map_err(|e| Failure::Usage(format!("--order: {e}")))?),
        None => None,
    };
    let data = read_input(rec, &a.input)?;
    let (family, group) = series_identity(&a.input);
    let series = read_series_csv(&data[..], family, group, MonthKey::default_policy())?;
    let (values, n_interpolated) = series.interpolated()?;
    let (fit, selection) = match orders {
        Some(o) => (fit_with(&values, &o, &FitOptions { include_constant: a.constant, ..Default::default() })?, None),
        None => {
            let auto = auto_fit_with(&values, &AutoOptions { season: a.season, ..Default::default() })?;
            (auto.fit.clone(), Some(auto))
        }
    };
    let (forecast_months, fc) = if a.horizon > 0 {
        let last = series.points.last().map(|p| p.month).expect("non-empty after interpolation");
        ((1..=a.horizon as i32).map(|h| last.offset(h)).collect(), Some(forecast(&fit, a.horizon, a.level)?))
    } else {
        (Vec::new(), None)
    };
    let out = FitOutput { input: a.input.clone(), months: series.months(), n_interpolated, fit, selection, forecast_months, forecast: fc };
    write_json(rec, &a.out, &out)?;
    Ok(sibling(&a.out, ".manifest.json"))
}

/// Index written by `its` and read by `report`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ItsIndex {
    pub policy_month: MonthKey,
    pub families: Vec<DrugFamily>,
    pub series: Vec<ItsIndexEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItsIndexEntry {
    pub family: DrugFamily,
    pub group: SeriesGroup,
    pub error: Option<String>,
    pub significant_event: bool,
    pub plot: Option<String>,
}

fn its(a: &ItsArgs, rec: &mut Recorder) -> Result<PathBuf> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) || !(a.level > 0.0 && a.level < 1.0) {
        return usage("--alpha and --level must lie in (0, 1)");
    }
    if a.events.is_empty() {
        return usage("--events needs at least one of level_shift, ramp, inverse_trend");
    }
    if a.season < 2 {
        return usage("--season must be at least 2");
    }
    let index_path = a.series_dir.join("series.json");
    let index: SeriesIndex = serde_json::from_slice(&read_input(rec, &index_path)?)
        .with_context(|| format!("{}: invalid series index", index_path.display()))?;
    let mut series = Vec::with_capacity(index.series.len());
    for e in &index.series {
        let path = a.series_dir.join(&e.file);
        let data = read_input(rec, &path)?;
        series.push(read_series_csv(&data[..], e.family, e.group, a.policy_month).map_err(|err| Failure::Data(anyhow!("{}: {err}", path.display())))?);
    }
    let mut events = a.events.clone();
    events.dedup();
    let opts = ItsOptions {
        policy_month: a.policy_month,
        events,
        announcement_month: a.announcement_month,
        alpha: a.alpha,
        interval_level: a.level,
        min_pre_months: a.min_pre_months,
        min_post_months: a.min_post_months,
        auto: AutoOptions { season: a.season, ..Default::default() },
    };
    let batch = its_batch(&series, &opts);
    write_json(rec, &a.out_dir.join("results.json"), &batch)?;

    let mut families: Vec<DrugFamily> = batch.iter().map(|e| e.family).collect();
    families.dedup();
    let mut entries = Vec::new();
    for family in &families {
        let fam: Vec<_> = batch.iter().filter(|e| e.family == *family).collect();
        let ok: Vec<_> = fam.iter().filter_map(|e| e.result.as_ref().ok()).collect();
        let rows = report::coefficient_rows(&ok);
        write_output(rec, &a.out_dir.join(format!("coefficients_{family}.md")), report::coefficient_markdown(*family, &rows).as_bytes())?;
        let csv = render(|b| report::coefficient_csv(&rows, b))?;
        write_output(rec, &a.out_dir.join(format!("coefficients_{family}.csv")), &csv)?;
        write_output(rec, &a.out_dir.join(format!("mismatch_{family}.md")), report::mismatch_markdown(*family, &fam).as_bytes())?;
        for e in fam {
            let (plot, significant, error) = match &e.result {
                Ok(r) => {
                    let rel = format!("plots/{}.csv", report::plot_file_stem(e.family, e.group));
                    let csv = render(|b| report::plot_csv(r, b))?;
                    write_output(rec, &a.out_dir.join(&rel), &csv)?;
                    (Some(rel), r.has_significant_event(), None)
                }
                Err(msg) => (None, false, Some(msg.clone())),
            };
            entries.push(ItsIndexEntry { family: e.family, group: e.group, error, significant_event: significant, plot });
        }
    }
    write_json(rec, &a.out_dir.join("its_index.json"), &ItsIndex { policy_month: a.policy_month, families, series: entries })?;
    Ok(a.out_dir.join("its.manifest.json"))
}

fn require(rec: &mut Recorder, path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Failure::Data(anyhow!("missing stage output: {}", path.display())));
    }
    let data = read_input(rec, path)?;
    String::from_utf8(data).map_err(|_| Failure::Data(anyhow!("{} is not UTF-8", path.display())))
}

fn report_cmd(a: &ReportArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let tables = a.tables_dir.clone().unwrap_or_else(|| a.results_dir.join("tables"));
    let its_dir = a.its_dir.clone().unwrap_or_else(|| a.results_dir.join("its"));
    let out = a.out.clone().unwrap_or_else(|| a.results_dir.join("report.md"));
    let index_path = its_dir.join("its_index.json");
    let index: ItsIndex = serde_json::from_str(&require(rec, &index_path)?)
        .with_context(|| format!("{}: invalid its index", index_path.display()))?;
    let out_dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    let display = |p: &Path| p.strip_prefix(&out_dir).unwrap_or(p).display().to_string();

    let mut md = format!("# Prescription policy report\n\nPolicy month: {}\n", index.policy_month);
    for family in &index.families {
        md.push_str(&format!("\n## {family}\n\n"));
        for name in [format!("class_summary_{family}.md"), format!("pre_post_{family}.md")] {
            md.push_str(&require(rec, &tables.join(name))?);
            md.push('\n');
        }
        for name in [format!("coefficients_{family}.md"), format!("mismatch_{family}.md")] {
            md.push_str(&require(rec, &its_dir.join(name))?);
            md.push('\n');
        }
        md.push_str("### Plot data\n\nColumns: month, actual, fitted, forecast, lo, hi, policy_flag.\n\n");
        for e in index.series.iter().filter(|e| e.family == *family) {
            if let Some(rel) = &e.plot {
                let p = its_dir.join(rel);
                if !p.is_file() {
                    return Err(Failure::Data(anyhow!("missing stage output: {}", p.display())));
                }
                rec.input(&p)?;
                md.push_str(&format!("- {}: `{}`\n", e.group, display(&p)));
            }
        }
    }
    write_output(rec, &out, md.as_bytes())?;
    Ok(sibling(&out, ".manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_from_file_name() {
        assert_eq!(series_identity(Path::new("x/benzodiazepine_31.csv")), (DrugFamily::Benzodiazepine, "31".parse().unwrap()));
        assert_eq!(series_identity(Path::new("opioid_overall.csv")), (DrugFamily::Opioid, SeriesGroup::Overall));
        assert_eq!(series_identity(Path::new("mine.csv")), (DrugFamily::Opioid, SeriesGroup::Overall));
    }

    #[test]
    fn sibling_appends() {
        assert_eq!(sibling(Path::new("a/b.csv"), ".manifest.json"), PathBuf::from("a/b.csv.manifest.json"));
    }
}
