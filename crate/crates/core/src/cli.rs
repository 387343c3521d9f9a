//! The `fairgate` command line: assess, fit, optimize, evaluate, sweep, report.
//!
//! Every command writes into `--out`. On failure the files it created are
//! removed and a single `error: ...` line goes to stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::assessment::{run_wizard, AssessmentDocument, BenefitSource, Justifier, MoralAssessment};
use crate::error::{Error, Result};
use crate::frontier::{default_gammas, emit_frontier, headline_families, sweep, FrontierFormat};
use crate::io::{load_csv, write_csv, ColumnRoles, RuleDocument};
use crate::metrics::{compute_rates_by, disparity_ratio, MetricReport};
use crate::model::{CriterionKind, Dataset, DecisionRule, FairnessCriterion, UtilityMatrix};
use crate::optimizer::{
    optimize, optimize_unconstrained, verify_solution, OptimizationProblem, OracleConfig, Solution, DEFAULT_MIN_COUNT,
};
use crate::scorer::{fit_with_history, split, FitConfig};

#[derive(Parser, Debug)]
#[command(name = "fairgate", version, about = "Fair decision rules from scored predictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Answer the assessment questions and write assessment.toml.
    Assess(AssessArgs),
    /// Train the logistic scorer on a seeded split; writes model.toml, train.csv, test.csv.
    Fit(FitArgs),
    /// Find the best rule under the fairness constraint; writes rule.toml and report_train.json.
    Optimize(OptimizeArgs),
    /// Apply a rule file to a dataset; writes evaluation.json.
    Evaluate(EvaluateArgs),
    /// Solve over a grid of gamma; writes frontier.csv and frontier.svg.
    Sweep(SweepArgs),
    /// Split, fit (when there are no scores), optimize and summarize per seed; writes report.txt and report.csv.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "group")]
    pub group_col: String,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value = "score")]
    pub score_col: String,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    #[arg(long, default_value = "x_")]
    pub feature_prefix: String,
    #[arg(long, default_value = "l_")]
    pub legit_prefix: String,
    /// Extra feature columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Keep only these groups, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
}

impl DataArgs {
    fn roles(&self) -> ColumnRoles {
        ColumnRoles {
            id: Some(self.id_col.clone()),
            group: self.group_col.clone(),
            label: self.label_col.clone(),
            score: self.score_col.clone(),
            feature_prefix: self.feature_prefix.clone(),
            legit_prefix: self.legit_prefix.clone(),
            features: self.features.clone(),
        }
    }

    fn load(&self) -> Result<Dataset> {
        self.load_path(&self.input)
    }

    fn load_path(&self, path: &Path) -> Result<Dataset> {
        let ds = load_csv(path, &self.roles()).map_err(|e| match e {
            Error::Io(io) => Error::Usage(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?;
        if self.groups.is_empty() {
            return Ok(ds);
        }
        for g in &self.groups {
            if !ds.groups().contains(g) {
                return Err(Error::InvalidDataset(format!("group `{g}` not found in {}", path.display())));
            }
        }
        ds.filter(|r| self.groups.contains(&r.group))
    }
}

#[derive(Args, Debug, Clone)]
pub struct CriterionArgs {
    /// Criterion name, e.g. fpr-parity or separation.
    #[arg(long, conflicts_with = "assessment")]
    pub criterion: Option<CriterionKind>,
    /// Assessment file written by `assess`.
    #[arg(long)]
    pub assessment: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Legitimate attributes for conditional parity, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub legit: Vec<String>,
    /// Cells u(0,0),u(0,1),u(1,0),u(1,1); accuracy when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub utility: Option<UtilityMatrix>,
    /// Smallest group size a stratum needs to be constrained.
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
}

impl CriterionArgs {
    fn utility(&self) -> UtilityMatrix {
        self.utility.unwrap_or_else(UtilityMatrix::accuracy)
    }

    fn assessment(&self) -> Result<Option<AssessmentDocument>> {
        self.assessment.as_ref().map(|p| AssessmentDocument::from_toml(&read_text(p)?)).transpose()
    }

    /// The criterion at `--gamma`, plus the assessment it came from if any.
    fn resolve(&self) -> Result<(FairnessCriterion, Option<AssessmentDocument>)> {
        let doc = self.assessment()?;
        let criterion = match (&doc, self.criterion) {
            (Some(d), _) => {
                let legit = if self.legit.is_empty() { d.criterion.legit_names.clone() } else { self.legit.clone() };
                FairnessCriterion::with_legit(d.criterion.kind, self.gamma, legit)?
            }
            (None, Some(kind)) => FairnessCriterion::with_legit(kind, self.gamma, self.legit.clone())?,
            (None, None) => return Err(Error::Usage("give --criterion or --assessment".into())),
        };
        Ok((criterion, doc))
    }

    fn problem(&self, ds: Dataset) -> Result<(OptimizationProblem, Option<AssessmentDocument>)> {
        let (criterion, doc) = self.resolve()?;
        let p = OptimizationProblem::new(ds, self.utility(), criterion)?.with_min_count(self.min_count);
        Ok((p, doc))
    }
}

#[derive(Args, Debug)]
pub struct AssessArgs {
    /// Scripted answers, one per line; stdin when omitted.
    #[arg(long)]
    pub answers: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct FitParams {
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    /// Use group indicators as features too.
    #[arg(long)]
    pub include_group: bool,
}

impl FitParams {
    fn config(&self) -> FitConfig {
        FitConfig {
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            l2: self.l2,
            include_group: self.include_group,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitParams,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub train_fraction: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    /// Check the result against the exhaustive oracle.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Rule file written by `optimize`.
    #[arg(long)]
    pub rule: PathBuf,
    /// Adds the FEC table and the criterion's disparity.
    #[arg(long)]
    pub assessment: Option<PathBuf>,
    #[arg(long)]
    pub criterion: Option<CriterionKind>,
    #[arg(long, value_delimiter = ',')]
    pub legit: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub utility: Option<UtilityMatrix>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    /// Gamma grid, comma separated and ascending; 0, 0.05, ..., 1 when omitted.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Vec<f64>,
    /// Held-out csv for test utilities and rates.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Check every point against the exhaustive oracle.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    #[command(flatten)]
    pub fit: FitParams,
    /// Single split seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Number of split seeds, 0..N.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub train_fraction: f64,
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Files written by one command, removed again if it fails.
struct Outputs {
    dir: PathBuf,
    made_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        let made_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), made_dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        fs::write(&path, content)?;
        Ok(path)
    }

    fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.made_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn out_dir(cmd: &Command) -> &Path {
    match cmd {
        Command::Assess(a) => &a.out,
        Command::Fit(a) => &a.out,
        Command::Optimize(a) => &a.out,
        Command::Evaluate(a) => &a.out,
        Command::Sweep(a) => &a.out,
        Command::Report(a) => &a.out,
    }
}

pub fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    let mut out = Outputs::new(out_dir(&cmd))?;
    let result = match &cmd {
        Command::Assess(a) => cmd_assess(a, &mut out, stdout),
        Command::Fit(a) => cmd_fit(a, &mut out, stdout),
        Command::Optimize(a) => cmd_optimize(a, &mut out, stdout),
        Command::Evaluate(a) => cmd_evaluate(a, &mut out, stdout),
        Command::Sweep(a) => cmd_sweep(a, &mut out, stdout),
        Command::Report(a) => cmd_report(a, &mut out, stdout),
    };
    if result.is_err() {
        out.discard();
    }
    result
}

fn cmd_assess(a: &AssessArgs, out: &mut Outputs, stdout: &mut dyn Write) -> Result<()> {
    let assessment = match &a.answers {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| Error::Usage(format!("cannot read {}: {e}", p.display())))?;
            run_wizard(BufReader::new(f), &mut *stdout)?
        }
        None => run_wizard(std::io::stdin().lock(), &mut *stdout)?,
    };
    let doc = AssessmentDocument::new(assessment)?;
    let path = out.write("assessment.toml", &doc.to_toml()?)?;
    writeln!(stdout, "criterion: {} ({})", doc.criterion.kind, doc.criterion.kind.representation())?;
    writeln!(stdout, "wrote {}", path.display())?;
    Ok(())
}

fn cmd_fit(a: &FitArgs, out: &mut Outputs, stdout: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let (train, test) = split(&ds, a.train_fraction, a.seed)?;
    let (model, history) = fit_with_history(&train, &a.fit.config())?;
    for d in &model.dropped {
        eprintln!("warning: dropped constant feature `{d}`");
    }
    out.write("model.toml", &model.to_toml()?)?;
    out.write("train.csv", &write_csv(&model.score_dataset(&train)?)?)?;
    out.write("test.csv", &write_csv(&model.score_dataset(&test)?)?)?;
    writeln!(
        stdout,
        "fit {} features on {} records; final loss {:.6}",
        model.feature_names.len(),
        train.len(),
        history.last().copied().unwrap_or(f64::NAN)
    )?;
    Ok(())
}

fn check_verification(problem: &OptimizationProblem, s: &Solution, stdout: &mut dyn Write) -> Result<()> {
    match verify_solution(problem, s, &OracleConfig::default()) {
        Ok(v) if v.passed => {
            writeln!(stdout, "verify: ok (oracle {:?}, tolerance {:e})", v.oracle, v.tolerance)?;
            Ok(())
        }
        Ok(v) => Err(Error::Solver(format!(
            "verification failed at gamma {}: optimizer {} vs oracle {:?} (tolerance {:e}, ratio ok {})",
            problem.criterion.gamma, v.optimizer, v.oracle, v.tolerance, v.ratio_ok
        ))),
        Err(Error::TooLarge { records, limit }) => {
            writeln!(stdout, "verify: skipped ({records} records exceed the oracle limit {limit})")?;
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn cmd_optimize(a: &OptimizeArgs, out: &mut Outputs, stdout: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let (problem, doc) = a.criterion.problem(ds)?;
    let s = optimize(&problem)?;
    if a.verify {
        check_verification(&problem, &s, stdout)?;
    }
    let rule_doc = RuleDocument {
        criterion: Some(problem.criterion.clone()),
        utility: Some(problem.utility),
        training_utility: Some(s.utility),
        training_ratio: s.ratio,
        flags: s.flags.clone(),
        rule: s.rule.clone(),
    };
    out.write("rule.toml", &rule_doc.to_toml()?)?;
    let report = MetricReport::build(
        &problem.dataset,
        &s.rule,
        &problem.utility,
        Some(&problem.criterion),
        doc.as_ref().map(|d| &d.assessment),
    )?;
    out.write("report_train.json", &report.to_json()?)?;
    writeln!(
        stdout,
        "{} at gamma {}: utility {}, ratio {}",
        problem.criterion.kind,
        problem.criterion.gamma,
        s.utility,
        s.ratio.map_or("undefined".into(), |r| r.to_string())
    )?;
    for f in &s.flags {
        writeln!(stdout, "note: {f}")?;
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut Outputs, stdout: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let rule_doc = RuleDocument::from_toml(&read_text(&a.rule)?)?;
    let doc = a.assessment.as_ref().map(|p| AssessmentDocument::from_toml(&read_text(p)?)).transpose()?;
    let criterion = match (a.criterion, &doc, &rule_doc.criterion) {
        (Some(kind), _, _) => Some(FairnessCriterion::with_legit(kind, 1.0, a.legit.clone())?),
        (None, Some(d), _) => Some(d.criterion.clone()),
        (None, None, c) => c.clone(),
    };
    let u = a.utility.or(rule_doc.utility).unwrap_or_else(UtilityMatrix::accuracy);
    let report = MetricReport::build(&ds, &rule_doc.rule, &u, criterion.as_ref(), doc.as_ref().map(|d| &d.assessment))?;
    out.write("evaluation.json", &report.to_json()?)?;
    write!(stdout, "utility {}", report.utility)?;
    if let Some(d) = &report.disparity {
        write!(stdout, ", disparity ratio {}", d.ratio)?;
    }
    if let Some(f) = &report.fec {
        write!(stdout, ", FEC max disparity {}", f.max_disparity)?;
    }
    writeln!(stdout)?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &mut Outputs, stdout: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let test = a.test.as_ref().map(|p| a.data.load_path(p)).transpose()?;
    let (problem, _) = a.criterion.problem(ds)?;
    let gammas = if a.gammas.is_empty() { default_gammas() } else { a.gammas.clone() };
    let points = sweep(&problem, &gammas, test.as_ref())?;
    if a.verify {
        for p in &points {
            if let (Some(rule), Some(u)) = (&p.rule, p.utility_train) {
                let s = Solution { rule: rule.clone(), utility: u, ratio: p.train_ratio, flags: Vec::new() };
                check_verification(&problem.at_gamma(p.gamma)?, &s, stdout)?;
            }
        }
    }
    out.write("frontier.csv", &emit_frontier(&points, FrontierFormat::Csv)?)?;
    out.write("frontier.svg", &emit_frontier(&points, FrontierFormat::Svg)?)?;
    for p in &points {
        match &p.error {
            Some(e) => writeln!(stdout, "gamma {}: {e}", p.gamma)?,
            None => writeln!(stdout, "gamma {}: utility {}", p.gamma, p.utility_train.unwrap_or(f64::NAN))?,
        }
    }
    Ok(())
}

/// Results of one split seed.
struct SeedRun {
    seed: u64,
    unconstrained: SplitEval,
    fair: SplitEval,
    fair_rule: DecisionRule,
}

struct SplitEval {
    utility_train: f64,
    utility_test: f64,
    ratio_train: Option<f64>,
    ratio_test: Option<f64>,
    /// headline rate per `<family>_<group>` on the test split
    rates: Vec<(String, Option<f64>)>,
    thresholds: Vec<(String, f64)>,
}

fn split_eval(problem: &OptimizationProblem, test: &Dataset, rule: &DecisionRule) -> Result<SplitEval> {
    let legit = &problem.criterion.legit_names;
    let c = &problem.criterion;
    let ratio = |ds: &Dataset| -> Result<Option<f64>> {
        let rates = compute_rates_by(ds, rule, legit)?;
        Ok(disparity_ratio(&rates, c).ok().map(|d| d.ratio))
    };
    let test_rates = compute_rates_by(test, rule, legit)?;
    let mut rates = Vec::new();
    for f in headline_families(c.kind) {
        for g in test.groups() {
            rates.push((format!("{}_{g}", f.name()), test_rates.rate(*f, g)));
        }
    }
    Ok(SplitEval {
        utility_train: crate::metrics::decision_maker_utility(&problem.dataset, rule, &problem.utility)?,
        utility_test: crate::metrics::decision_maker_utility(test, rule, &problem.utility)?,
        ratio_train: ratio(&problem.dataset)?,
        ratio_test: ratio(test)?,
        rates,
        thresholds: rule.group_thresholds(problem.dataset.groups()).into_iter().collect(),
    })
}

fn run_seed(a: &ReportArgs, ds: &Dataset, seed: u64) -> Result<SeedRun> {
    let (train, test) = split(ds, a.train_fraction, seed)?;
    let scored = train.records().iter().all(|r| r.score.is_some()) && test.records().iter().all(|r| r.score.is_some());
    let (train, test) = if scored {
        (train, test)
    } else {
        let model = crate::scorer::fit(&train, &a.fit.config())?;
        (model.score_dataset(&train)?, model.score_dataset(&test)?)
    };
    let (problem, _) = a.criterion.problem(train)?;
    let s = optimize(&problem)?;
    if a.verify {
        let mut sink = Vec::new();
        check_verification(&problem, &s, &mut sink)?;
    }
    let base = optimize_unconstrained(&problem.dataset, &problem.utility)?;
    Ok(SeedRun {
        seed,
        unconstrained: split_eval(&problem, &test, &base)?,
        fair: split_eval(&problem, &test, &s.rule)?,
        fair_rule: s.rule,
    })
}

fn describe_assessment(a: &MoralAssessment) -> String {
    let source = match a.benefit_source {
        BenefitSource::Decision => format!("the decision (D={} is the advantage)", a.advantage),
        BenefitSource::Outcome => format!("the outcome (Y={} is the advantage)", a.advantage),
        BenefitSource::Unrelated => "neither decision nor outcome".into(),
    };
    let values: Vec<String> = a.relevant_values.iter().map(u8::to_string).collect();
    let justifier = match &a.justifier {
        Justifier::None => "none".to_string(),
        Justifier::Outcome => format!("outcome Y, relevant values {{{}}}", values.join(",")),
        Justifier::Decision => format!("decision D, relevant values {{{}}}", values.join(",")),
        Justifier::Legitimate(names) => format!("legitimate attributes {}", names.join(",")),
    };
    format!("benefit from {source}; justifier: {justifier}; group attribute `{}`", a.group_attribute)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn cmd_report(a: &ReportArgs, out: &mut Outputs, stdout: &mut dyn Write) -> Result<()> {
    let ds = a.data.load()?;
    let (criterion, doc) = a.criterion.resolve()?;
    let seeds: Vec<u64> = match (a.seed, a.seeds) {
        (Some(s), _) => vec![s],
        (None, Some(0)) => return Err(Error::Usage("--seeds must be at least 1".into())),
        (None, Some(n)) => (0..n).collect(),
        (None, None) => vec![0],
    };
    let runs: Vec<SeedRun> = seeds.par_iter().map(|&s| run_seed(a, &ds, s)).collect::<Result<_>>()?;

    // per-seed csv
    let first = &runs[0];
    let rate_names: Vec<&String> = first.fair.rates.iter().map(|(k, _)| k).collect();
    let groups: Vec<&String> = ds.groups().iter().collect();
    let mut csv = String::from("seed,utility_test_unconstrained,utility_test_fair,utility_train_unconstrained,utility_train_fair,ratio_train_fair,ratio_test_fair");
    for r in &rate_names {
        let _ = write!(csv, ",unconstrained_{r},fair_{r}");
    }
    for g in &groups {
        let _ = write!(csv, ",threshold_{g}");
    }
    csv.push('\n');
    for r in &runs {
        let _ = write!(
            csv,
            "{},{},{},{},{},{},{}",
            r.seed,
            r.unconstrained.utility_test,
            r.fair.utility_test,
            r.unconstrained.utility_train,
            r.fair.utility_train,
            opt(r.fair.ratio_train),
            opt(r.fair.ratio_test)
        );
        for ((_, u), (_, f)) in r.unconstrained.rates.iter().zip(&r.fair.rates) {
            let _ = write!(csv, ",{},{}", opt(*u), opt(*f));
        }
        for g in &groups {
            let t = r.fair.thresholds.iter().find(|(h, _)| h == *g).map(|(_, t)| *t);
            let _ = write!(csv, ",{}", opt(t));
        }
        csv.push('\n');
    }
    out.write("report.csv", &csv)?;

    // summary
    let mut text = String::new();
    let _ = writeln!(text, "fairgate report");
    let _ = writeln!(
        text,
        "input: {} ({} records, groups {})",
        a.data.input.display(),
        ds.len(),
        ds.groups().iter().cloned().collect::<Vec<_>>().join(", ")
    );
    match &doc {
        Some(d) => {
            let _ = writeln!(text, "assessment: {}", describe_assessment(&d.assessment));
        }
        None => {
            let _ = writeln!(text, "assessment: none (criterion given directly)");
        }
    }
    let _ = writeln!(
        text,
        "criterion: {} at gamma {}: {}",
        criterion.kind,
        criterion.gamma,
        criterion.kind.representation()
    );
    let u = a.criterion.utility();
    let _ = writeln!(
        text,
        "utility matrix u(d,y): u(0,0)={} u(0,1)={} u(1,0)={} u(1,1)={}",
        u.get(0, 0),
        u.get(0, 1),
        u.get(1, 0),
        u.get(1, 1)
    );
    let _ = writeln!(text, "seeds: {} (train fraction {:.4})", seeds.len(), a.train_fraction);
    let _ = writeln!(text);
    let _ = writeln!(text, "rule (seed {}):", first.seed);
    let _ = writeln!(text, "{}", RuleDocument::bare(first.fair_rule.clone()).to_toml()?.trim_end());
    let _ = writeln!(text);
    let _ = writeln!(text, "{:<28} {:>14} {:>14}", "mean over seeds", "unconstrained", "fair");
    let row = |name: &str, u: f64, f: f64| format!("{name:<28} {u:>14.4} {f:>14.4}");
    let _ = writeln!(
        text,
        "{}",
        row(
            "utility (train)",
            mean(runs.iter().map(|r| r.unconstrained.utility_train)),
            mean(runs.iter().map(|r| r.fair.utility_train))
        )
    );
    let _ = writeln!(
        text,
        "{}",
        row(
            "utility (test)",
            mean(runs.iter().map(|r| r.unconstrained.utility_test)),
            mean(runs.iter().map(|r| r.fair.utility_test))
        )
    );
    let ratio_mean = |f: &dyn Fn(&SeedRun) -> Option<f64>| mean(runs.iter().filter_map(f));
    let _ = writeln!(
        text,
        "{}",
        row(
            "disparity ratio (train)",
            ratio_mean(&|r| r.unconstrained.ratio_train),
            ratio_mean(&|r| r.fair.ratio_train)
        )
    );
    let _ = writeln!(
        text,
        "{}",
        row("disparity ratio (test)", ratio_mean(&|r| r.unconstrained.ratio_test), ratio_mean(&|r| r.fair.ratio_test))
    );
    for (i, name) in rate_names.iter().enumerate() {
        let un = mean(runs.iter().filter_map(|r| r.unconstrained.rates[i].1));
        let fa = mean(runs.iter().filter_map(|r| r.fair.rates[i].1));
        let _ = writeln!(text, "{}", row(&format!("{name} (test)"), un, fa));
    }
    for g in &groups {
        let ts: Vec<f64> =
            runs.iter().filter_map(|r| r.fair.thresholds.iter().find(|(h, _)| h == *g).map(|(_, t)| *t)).collect();
        if ts.len() == runs.len() {
            let un: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.unconstrained.thresholds.iter().find(|(h, _)| h == *g).map(|(_, t)| *t))
                .collect();
            let _ = writeln!(text, "{}", row(&format!("threshold {g}"), mean(un.into_iter()), mean(ts.into_iter())));
        }
    }
    let _ = writeln!(text);
    let ff: Vec<f64> = runs.iter().filter_map(|r| r.fair.ratio_test).collect();
    if ff.is_empty() {
        let _ = writeln!(text, "four-fifths check: test disparity ratio undefined");
    } else {
        let worst = ff.iter().copied().fold(f64::INFINITY, f64::min);
        let verdict = if worst >= 0.8 { "passes" } else { "fails" };
        let _ = writeln!(text, "four-fifths check (test ratio >= 0.8): {verdict}, worst seed ratio {worst:.4}");
    }
    let _ = writeln!(text);
    let _ = writeln!(text, "per seed: see report.csv");
    out.write("report.txt", &text)?;
    stdout.write_all(text.as_bytes())?;
    Ok(())
}
