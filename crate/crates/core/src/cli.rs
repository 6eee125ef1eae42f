//! Pipeline driver behind the `reqcase` binary.
//!
//! Exit codes: 0 success, 1 semantic failure (violations, failing
//! verdicts), 2 operational failure (I/O, parse errors, per-cell execution
//! errors).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::executor::{
    export_csv, import_csv, load_trace_csv, run_suite, save_trace_csv, SuiteReport, Trace,
};
use crate::ontology::{load_ontology, save_ontology, Ontology, OntologyError, RefinementLink};
use crate::rsl::{RslDocument, RslError};
use crate::testgen::{
    build_tree, cases_from_tree, save_test_cases_json, Bounds, TestCase, DEFAULT_MAX_DEPTH,
    DEFAULT_MAX_REPEAT,
};
use crate::wps_sim::{self, default_binding, load_script, run_scenario, PlantParams, Variant};

pub const GENERATED_BY: &str = concat!("reqcase ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(
    name = "reqcase",
    version,
    about = "Requirements-based test generation and execution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check ontologies and requirements.
    Validate(ProjectArgs),
    /// Merge staged ontologies into one refined ontology document.
    Refine(RefineArgs),
    /// Generate test cases (.tc.json and .csv) per requirement.
    Gen(GenArgs),
    /// Simulate scenarios and write trace CSVs.
    Simulate(SimulateArgs),
    /// Execute test-case CSVs over trace CSVs and write a verdict report.
    Exec(ExecArgs),
    /// Print a previously written report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct OntologyArgs {
    /// Ontology document, repeated in stage order.
    #[arg(long = "ontology", value_name = "PATH")]
    pub ontologies: Vec<PathBuf>,
    /// Refinement links between consecutive stages (JSON array of
    /// {"refined", "base"}).
    #[arg(long, value_name = "PATH")]
    pub links: Option<PathBuf>,
    /// Stage to build; defaults to the number of ontologies given.
    #[arg(long)]
    pub stage: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub ontology: OntologyArgs,
    #[arg(long, value_name = "PATH")]
    pub rsl: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    pub ontology: OntologyArgs,
    /// Output `.onto.json` file.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub project: ProjectArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_REPEAT)]
    pub max_repeat: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Model,
    Plant,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Model => vec![Variant::Model],
            VariantArg::Plant => vec![Variant::Plant],
            VariantArg::Both => vec![Variant::Model, Variant::Plant],
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ontology the atom binding is checked against; the bundled tank
    /// ontology when omitted.
    #[command(flatten)]
    pub ontology: OntologyArgs,
    /// Plant parameter file; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub params: Option<PathBuf>,
    /// Scenario script, repeatable.
    #[arg(long = "scenario", value_name = "PATH", required = true)]
    pub scenarios: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::Both)]
    pub variant: VariantArg,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Test-case CSV file or directory of them, repeatable.
    #[arg(long = "tests", value_name = "PATH", required = true)]
    pub tests: Vec<PathBuf>,
    /// Trace CSV file or directory of `*.trace.csv`, repeatable.
    #[arg(long = "traces", value_name = "PATH", required = true)]
    pub traces: Vec<PathBuf>,
    /// Directory receiving `report.txt` and `report.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding `report.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Operational(String),
    #[error("{0}")]
    Semantic(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Semantic(_) => 1,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ontology_error(path: &Path, e: OntologyError) -> CliError {
    match e {
        OntologyError::Invalid(vs) => CliError::Semantic(
            vs.iter()
                .map(|v| format!("{}: {v}", path.display()))
                .collect::<Vec<_>>()
                .join("\n"),
        ),
        other => CliError::Operational(format!("{}: {other}", path.display())),
    }
}

/// Loads the staged ontologies and folds them up to the selected stage.
fn build_ontology(args: &OntologyArgs) -> CliResult<Ontology> {
    if args.ontologies.is_empty() {
        return Err(CliError::Operational(
            "at least one --ontology is required".into(),
        ));
    }
    let stage = args.stage.unwrap_or(args.ontologies.len() as u32);
    if stage == 0 || stage as usize > args.ontologies.len() {
        return Err(CliError::Operational(format!(
            "--stage {stage} needs between 1 and {} ontologies",
            args.ontologies.len()
        )));
    }
    let mut stages = Vec::new();
    for p in &args.ontologies {
        let o = load_ontology(&read(p)?).map_err(|e| ontology_error(p, e))?;
        let violations = o.validate();
        if !violations.is_empty() {
            return Err(ontology_error(p, OntologyError::Invalid(violations)));
        }
        stages.push(o);
    }
    let links: Vec<RefinementLink> = match &args.links {
        Some(p) => serde_json::from_str(&read(p)?)
            .map_err(|e| CliError::Operational(format!("{}: {e}", p.display())))?,
        None => Vec::new(),
    };
    for l in &links {
        if !stages[1..].iter().any(|o| o.vertex(&l.refined).is_some()) {
            return Err(CliError::Semantic(format!(
                "refinement link {} -> {}: {:?} is not a vertex of any later-stage ontology",
                l.refined, l.base, l.refined
            )));
        }
    }

    let mut merged = stages[0].clone();
    for (i, ext) in stages.iter().enumerate().take(stage as usize).skip(1) {
        let here: Vec<RefinementLink> = links
            .iter()
            .filter(|l| ext.vertex(&l.refined).is_some())
            .cloned()
            .collect();
        merged = Ontology::refine(&merged, ext, &here)
            .map_err(|e| ontology_error(&args.ontologies[i], e))?;
    }
    Ok(merged)
}

/// Parses the requirements file and checks each block; returns the valid
/// requirements and the violation lines of the rest.
fn check_project(
    args: &ProjectArgs,
    o: &Ontology,
) -> CliResult<(Vec<crate::rsl::Requirement>, Vec<String>)> {
    let text = read(&args.rsl)?;
    let rsl = args.rsl.display();
    let doc = RslDocument::parse(&text).map_err(|e| CliError::Operational(format!("{rsl}:{e}")))?;
    let mut reqs = Vec::new();
    let mut problems = Vec::new();
    for (block, result) in doc.requirements.iter().zip(doc.elaborate(o)) {
        match result {
            Ok(r) => {
                match o.check_traceability(&r.atoms()) {
                    Ok(untraced) => {
                        for c in untraced {
                            problems.push(format!(
                                "{rsl}:{}: requirement {}: concept {c:?} has no refinement link",
                                block.pos, r.id
                            ));
                        }
                    }
                    Err(e) => problems.push(format!("{rsl}:{}: {e}", block.pos)),
                }
                reqs.push(r);
            }
            Err(RslError::Invalid {
                pos,
                requirement,
                violations,
            }) => {
                for v in violations {
                    problems.push(format!("{rsl}:{pos}: requirement {requirement}: {v}"));
                }
            }
            Err(e) => problems.push(format!("{rsl}:{e}")),
        }
    }
    Ok((reqs, problems))
}

fn cmd_validate(args: &ProjectArgs, out: &mut dyn Write) -> CliResult<()> {
    let o = build_ontology(&args.ontology)?;
    let (reqs, problems) = check_project(args, &o)?;
    if !problems.is_empty() {
        return Err(CliError::Semantic(problems.join("\n")));
    }
    let _ = writeln!(
        out,
        "ok: ontology stage {} ({} vertices, {} arcs), {} requirement(s)",
        o.stage_version,
        o.vertices.len(),
        o.arcs.len(),
        reqs.len()
    );
    Ok(())
}

fn cmd_refine(args: &RefineArgs, out: &mut dyn Write) -> CliResult<()> {
    let o = build_ontology(&args.ontology)?;
    write(&args.out, &save_ontology(&o))?;
    let _ = writeln!(
        out,
        "wrote {} (stage {})",
        args.out.display(),
        o.stage_version
    );
    Ok(())
}

fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let o = build_ontology(&args.project.ontology)?;
    let (reqs, problems) = check_project(&args.project, &o)?;
    if !problems.is_empty() {
        return Err(CliError::Semantic(problems.join("\n")));
    }
    let bounds = Bounds {
        max_depth: args.max_depth,
        max_repeat: args.max_repeat,
    };
    let mut files = Vec::new();
    for r in reqs.iter().filter(|r| r.stage <= o.stage_version) {
        let tree = build_tree(r, bounds);
        let tcs = cases_from_tree(r, &tree, r.stage);
        let leaves = tree.leaves().len();
        if tcs.is_empty() {
            let _ = writeln!(
                out,
                "warning: {}: no release reachable within max depth {}; 0 test cases",
                r.id, bounds.max_depth
            );
        } else {
            let _ = writeln!(
                out,
                "{}: {} test case(s), {} leaf node(s)",
                r.id,
                tcs.len(),
                leaves
            );
        }
        files.push((
            args.out.join(format!("{}.tc.json", r.id)),
            save_test_cases_json(&tcs),
        ));
        files.push((args.out.join(format!("{}.csv", r.id)), export_csv(&tcs)));
    }
    for (path, contents) in files {
        write(&path, &contents)?;
    }
    Ok(())
}

fn file_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".json").unwrap_or(&name).to_string()
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let o = if args.ontology.ontologies.is_empty() {
        wps_sim::wps_ontology()
    } else {
        build_ontology(&args.ontology)?
    };
    let params = match &args.params {
        Some(p) => PlantParams::from_json(&read(p)?)
            .map_err(|e| CliError::Operational(format!("{}: {e}", p.display())))?,
        None => PlantParams::default(),
    };
    let binding = default_binding(&o).map_err(|e| CliError::Operational(e.to_string()))?;
    let mut files = Vec::new();
    for path in &args.scenarios {
        let script = load_script(&read(path)?)
            .map_err(|e| CliError::Operational(format!("{}: {e}", path.display())))?;
        let stem = file_stem(path);
        for variant in args.variant.variants() {
            let trace = run_scenario(&params, &script, &binding, variant)
                .map_err(|e| CliError::Operational(format!("{}: {e}", path.display())))?;
            let target = args.out.join(format!("{stem}.{variant}.trace.csv"));
            let _ = writeln!(out, "{}: {} samples", target.display(), trace.len());
            files.push((target, save_trace_csv(&trace)));
        }
    }
    for (path, contents) in files {
        write(&path, &contents)?;
    }
    Ok(())
}

fn list_files(paths: &[PathBuf], keep: impl Fn(&str) -> bool) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|source| CliError::Io {
                    path: p.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file() && f.file_name().is_some_and(|n| keep(&n.to_string_lossy()))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(CliError::Io {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportDocument {
    generated_by: String,
    #[serde(flatten)]
    report: SuiteReport,
}

fn report_status(report: &SuiteReport) -> CliResult<()> {
    if report.counts.error > 0 {
        Err(CliError::Operational(format!(
            "{} cell(s) could not be executed",
            report.counts.error
        )))
    } else if report.counts.fail > 0 {
        Err(CliError::Semantic(format!(
            "{} failing verdict(s)",
            report.counts.fail
        )))
    } else {
        Ok(())
    }
}

fn cmd_exec(args: &ExecArgs, out: &mut dyn Write) -> CliResult<()> {
    let test_files = list_files(&args.tests, |n| {
        n.ends_with(".csv") && !n.ends_with(".trace.csv")
    })?;
    let trace_files = list_files(&args.traces, |n| n.ends_with(".trace.csv"))?;

    let mut tcs: Vec<TestCase> = Vec::new();
    for f in &test_files {
        let cases = import_csv(&read(f)?)
            .map_err(|e| CliError::Operational(format!("{}: {e}", f.display())))?;
        for tc in cases {
            if tcs.iter().any(|t| t.id == tc.id) {
                return Err(CliError::Operational(format!(
                    "{}: duplicate test case {}",
                    f.display(),
                    tc.id
                )));
            }
            tcs.push(tc);
        }
    }
    let mut traces: BTreeMap<String, Trace> = BTreeMap::new();
    for f in &trace_files {
        let name = f
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let name = name.strip_suffix(".trace.csv").unwrap_or(&name).to_string();
        let trace = load_trace_csv(&read(f)?)
            .map_err(|e| CliError::Operational(format!("{}: {e}", f.display())))?;
        traces.insert(name, trace);
    }

    let report = run_suite(&tcs, &traces);
    let text = format!("generated-by: {GENERATED_BY}\n{}", report.render_text());
    let doc = ReportDocument {
        generated_by: GENERATED_BY.into(),
        report,
    };
    let json = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    write(&args.out.join("report.txt"), &text)?;
    write(&args.out.join("report.json"), &json)?;
    let _ = out.write_all(text.as_bytes());
    report_status(&doc.report)
}

fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = args.out.join("report.json");
    let doc: ReportDocument = serde_json::from_str(&read(&path)?)
        .map_err(|e| CliError::Operational(format!("{}: {e}", path.display())))?;
    let _ = writeln!(out, "generated-by: {}", doc.generated_by);
    let _ = out.write_all(doc.report.render_text().as_bytes());
    report_status(&doc.report)
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a, out),
        Command::Refine(a) => cmd_refine(a, out),
        Command::Gen(a) => cmd_gen(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Exec(a) => cmd_exec(a, out),
        Command::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code()
        }
    }
}
