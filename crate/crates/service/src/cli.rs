//! Command-line front end. Stateful verbs work on a workspace file; `--json`
//! prints the same bodies the HTTP API returns.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use planlens_core::contrastive::Strategy;
use planlens_core::planner::{PlannerConfig, DEFAULT_TIMEOUT_SECS};
use planlens_core::session::{Comparison, PlanId, PlanNode, Session};
use planlens_core::sim::ValidationReport;
use serde::Serialize;

use crate::api;
use crate::error::ApiError;
use crate::ops::{self, AskRequest, NewSession, ValidateRequest};

#[derive(Debug, Parser)]
#[command(name = "planlens", version, about = "Ask why a plan chose one action over another")]
pub struct Cli {
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct PlannerArgs {
    /// External planner command with {domain}, {problem} and optional {plan} placeholders.
    #[arg(long)]
    pub planner_cmd: Option<String>,
    /// Seconds before the external planner is killed.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_SECS)]
    pub timeout: u64,
    /// Left-shift found plans so independent steps overlap.
    #[arg(long)]
    pub compress: bool,
}

impl PlannerArgs {
    fn config(&self) -> PlannerConfig {
        PlannerConfig {
            command: self.planner_cmd.clone(),
            timeout_secs: self.timeout,
            compress: self.compress,
            ..PlannerConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a task and start a workspace from the result.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// Start from this plan file instead of planning.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[command(flatten)]
        planner: PlannerArgs,
        /// Where to write the new workspace.
        #[arg(long)]
        workspace: Option<PathBuf>,
    },
    /// List actions applicable in place of a plan step.
    Alternatives {
        #[arg(long)]
        workspace: PathBuf,
        /// Plan ID; the current plan by default.
        #[arg(long)]
        plan_id: Option<PlanId>,
        #[arg(long)]
        step: usize,
    },
    /// Ask why a step was chosen instead of another action; the answer is
    /// added to the workspace.
    Ask {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        plan_id: Option<PlanId>,
        #[arg(long)]
        step: usize,
        /// The suggested action, e.g. "(load-truck p1 t1 a)".
        #[arg(long)]
        action: String,
        #[arg(long, default_value = "after-action")]
        strategy: Strategy,
        /// Start window for the time-window strategy.
        #[arg(long, value_name = "LB,UB")]
        window: Option<String>,
        /// Replaces the workspace's planner command.
        #[arg(long)]
        planner_cmd: Option<String>,
    },
    /// Tabulate metrics over plans.
    Compare {
        #[arg(long)]
        workspace: PathBuf,
        /// Comma-separated plan IDs; all plans by default.
        #[arg(long, default_value = "")]
        plans: String,
        /// Comma-separated metric names; all metrics by default.
        #[arg(long, default_value = "")]
        metrics: String,
    },
    /// Check a plan against a task.
    Validate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Copy a workspace after checking it.
    Save {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a workspace and show its plan tree.
    Load {
        #[arg(long)]
        workspace: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Milliseconds an ask may run before the API answers 202.
        #[arg(long, default_value_t = api::DEFAULT_ASK_WAIT.as_millis() as u64)]
        ask_wait_ms: u64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Api(#[from] ApiError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("plan is invalid")]
    InvalidPlan,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn open(path: &Path) -> Result<Session, CliError> {
    Ok(Session::load(read(path)?.as_bytes()).map_err(ApiError::from)?)
}

fn emit(
    out: &mut dyn Write,
    json: bool,
    value: &impl Serialize,
    text: impl FnOnce() -> String,
) -> Result<(), CliError> {
    let body = if json { serde_json::to_string_pretty(value).expect("serializes") + "\n" } else { text() };
    out.write_all(body.as_bytes()).map_err(|source| CliError::File { path: "<stdout>".into(), source })
}

pub fn node_text(node: &PlanNode) -> String {
    let mut s = format!("plan {}", node.id);
    if let Some(p) = node.parent {
        let _ = write!(s, " (child of {p})");
    }
    if let (Some(strategy), Some(suggested), Some(replaced)) = (node.strategy, &node.suggested, &node.replaced) {
        let _ = write!(s, ": {suggested} instead of {replaced}, {strategy}");
    }
    s.push('\n');
    if let Some(b) = node.behavior {
        let _ = writeln!(s, "behavior: {b}");
    }
    if let Some(r) = node.rejoin {
        let _ = writeln!(s, "rejoins at step {} (original step {})", r.new_step, r.original_step);
    }
    if let Some(reason) = &node.reason {
        let _ = writeln!(s, "no plan: {reason}");
    }
    for (name, value) in &node.metrics {
        let _ = writeln!(s, "{name}: {value}");
    }
    if let Some(p) = &node.plan {
        s.push_str(&p.to_string());
        if !s.ends_with('\n') {
            s.push('\n');
        }
    }
    s
}

fn comparison_text(c: &Comparison) -> String {
    let mut s = format!("{:>6}", "plan");
    for m in &c.metrics {
        let _ = write!(s, " {m:>14}");
    }
    s.push('\n');
    for (id, row) in c.plans.iter().zip(&c.values) {
        let _ = write!(s, "{id:>6}");
        for v in row {
            let cell = v.map_or("-".to_string(), |v| v.to_string());
            let _ = write!(s, " {cell:>14}");
        }
        s.push('\n');
    }
    let _ = write!(s, "{:>6}", "best");
    for m in &c.metrics {
        let cell = c.best[m].map_or("-".to_string(), |id| id.to_string());
        let _ = write!(s, " {cell:>14}");
    }
    s.push('\n');
    s
}

fn report_text(r: &ValidationReport) -> String {
    match &r.violation {
        None => format!("valid, makespan {}\n", r.makespan),
        Some(v) => format!("invalid: {v}\n"),
    }
}

/// Runs one command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let json = cli.json;
    match cli.command {
        Command::Plan { domain, problem, plan, planner, workspace } => {
            let req = NewSession {
                domain: read(&domain)?,
                problem: read(&problem)?,
                config: planner.config(),
                plan: plan.as_deref().map(read).transpose()?,
            };
            let session = ops::start(&req)?;
            if let Some(path) = workspace {
                write_file(&path, &session.save())?;
            }
            let root = ops::root(&session);
            emit(out, json, &root, || node_text(&root))
        }
        Command::Alternatives { workspace, plan_id, step } => {
            let session = open(&workspace)?;
            let list = ops::alternatives(&session, plan_id.unwrap_or(session.current()), step)?;
            emit(out, json, &list, || list.iter().map(|a| format!("{a}\n")).collect())
        }
        Command::Ask { workspace, plan_id, step, action, strategy, window, planner_cmd } => {
            let mut session = open(&workspace)?;
            if let Some(cmd) = planner_cmd {
                let config = PlannerConfig { command: Some(cmd), ..session.workspace().config.clone() };
                session.set_config(config).map_err(ApiError::from)?;
            }
            let req = AskRequest {
                plan_id: plan_id.unwrap_or(session.current()),
                step,
                action,
                strategy,
                window: window.as_deref().map(ops::parse_window).transpose()?,
            };
            let node = ops::ask(&mut session, &req)?;
            write_file(&workspace, &session.save())?;
            emit(out, json, &node, || node_text(&node))
        }
        Command::Compare { workspace, plans, metrics } => {
            let session = open(&workspace)?;
            let c = ops::compare(&session, &ops::id_list(&plans)?, &ops::name_list(&metrics))?;
            emit(out, json, &c, || comparison_text(&c))
        }
        Command::Validate { domain, problem, plan } => {
            let req = ValidateRequest { domain: read(&domain)?, problem: read(&problem)?, plan: read(&plan)? };
            let report = ops::check_plan(&req)?;
            emit(out, json, &report, || report_text(&report))?;
            if report.valid {
                Ok(())
            } else {
                Err(CliError::InvalidPlan)
            }
        }
        Command::Save { workspace, output } => {
            let session = open(&workspace)?;
            write_file(&output, &session.save())?;
            let path = output.display().to_string();
            emit(out, json, &serde_json::json!({ "path": path }), || format!("saved {path}\n"))
        }
        Command::Load { workspace } => {
            let session = open(&workspace)?;
            let ws = session.workspace();
            emit(out, json, &ws.nodes, || {
                let mut s = String::new();
                for n in &ws.nodes {
                    let mark = if n.id == ws.current { "*" } else { " " };
                    let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
                    let makespan = n.metrics.get("makespan").map_or("no plan".to_string(), |m| m.to_string());
                    let how = n.strategy.map_or(String::new(), |st| format!(" {st}"));
                    let _ = writeln!(s, "{mark}{:>4} parent {parent:>4}  {makespan}{how}", n.id);
                }
                s
            })
        }
        Command::Serve { listen, ask_wait_ms } => {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|source| CliError::File { path: "<runtime>".into(), source })?;
            runtime
                .block_on(api::serve(&listen, Duration::from_millis(ask_wait_ms)))
                .map_err(|source| CliError::File { path: listen.into(), source })
        }
    }
}
