use std::fmt::Write as _;
use std::io::{IsTerminal, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tm_core::events::{parse_overlay_named, print_overlay};
use tm_core::sd::{parse_sd_named, sd_to_tm_with_overlay};
use tm_core::sim::parse_scenario_named;
use tm_core::{
    check_behavior, check_coverage, elaborate, from_json, infer_behavior, print_model,
    render_behavior, render_overlay, render_static, simplify, simulate, validate, EventOverlay,
    RenderOptions, StaticModel, TransformError, View,
};

#[derive(Parser)]
#[command(name = "tm", version, about = "Thinging machine modeling toolchain")]
struct Cli {
    /// Write the artifact here instead of stdout.
    #[arg(short, long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a static model.
    Check {
        model: PathBuf,
        /// One JSON object per violation.
        #[arg(long)]
        json: bool,
    },
    /// Contract boundary-crossing chains into direct arrows.
    Simplify { model: PathBuf },
    /// Expand direct arrows into explicit release/transfer/receive chains.
    Elaborate { model: PathBuf },
    /// Report event regions and coverage of dynamic actions.
    Events { model: PathBuf, overlay: PathBuf },
    /// Print the inferred chronology, or diff it against the declared one.
    Behavior {
        model: PathBuf,
        overlay: PathBuf,
        #[arg(long)]
        declared: bool,
    },
    /// Run a scenario and print the trace as JSON lines.
    Simulate {
        model: PathBuf,
        overlay: PathBuf,
        scenario: PathBuf,
    },
    /// Convert a sequence diagram into a static model.
    ImportSd {
        diagram: PathBuf,
        /// Print the generated event overlay instead of the model.
        #[arg(long)]
        events: bool,
    },
    /// Emit Graphviz DOT.
    Render {
        #[arg(long, default_value = "static")]
        view: View,
        /// Include step labels on action nodes.
        #[arg(long)]
        labels: bool,
        /// Simplify the model before drawing it.
        #[arg(long)]
        simplified: bool,
        /// Comma-separated fill colors for events.
        #[arg(long, value_delimiter = ',')]
        palette: Vec<String>,
        model: PathBuf,
        overlay: Option<PathBuf>,
    },
}

/// Why a command stopped short; the variant picks the exit code.
enum Failure {
    /// Bad input: unreadable file, parse error, inconsistent arguments.
    Input(String),
    /// Well-formed input that failed a check.
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

type Outcome = Result<Report, Failure>;

/// Artifact text plus whether a check inside it failed.
struct Report {
    text: String,
    failed: bool,
}

impl Report {
    fn ok(text: String) -> Self {
        Report {
            text,
            failed: false,
        }
    }
}

struct Style {
    color: bool,
}

impl Style {
    fn from_env(stream_is_tty: bool) -> Self {
        let color = match std::env::var("TM_COLOR").as_deref() {
            Ok("1") => true,
            Ok("0") => false,
            _ => stream_is_tty,
        };
        Style { color }
    }

    fn paint(&self, code: &str, text: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    fn error(&self, text: &str) -> String {
        self.paint("1;31", text)
    }

    fn warning(&self, text: &str) -> String {
        self.paint("1;33", text)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let to_file = cli.output.is_some();
    let style = Style::from_env(!to_file && std::io::stdout().is_terminal());
    let err_style = Style::from_env(std::io::stderr().is_terminal());
    match run(cli.command, &style) {
        Ok(report) => {
            if let Err(e) = emit(cli.output.as_deref(), &report.text) {
                eprintln!("{}: {e}", err_style.error("error"));
                return ExitCode::from(2);
            }
            ExitCode::from(u8::from(report.failed))
        }
        Err(f) => {
            let (Failure::Input(msg) | Failure::Check(msg)) = &f;
            let msg = msg.trim_end();
            if !msg.is_empty() {
                eprintln!("{}", colorize_diagnostics(msg, &err_style));
            }
            ExitCode::from(f.code())
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

fn colorize_diagnostics(msg: &str, style: &Style) -> String {
    msg.lines()
        .map(|l| {
            if let Some(i) = l.find("error") {
                format!("{}{}{}", &l[..i], style.error("error"), &l[i + 5..])
            } else if let Some(i) = l.find("warning") {
                format!("{}{}{}", &l[..i], style.warning("warning"), &l[i + 7..])
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn run(cmd: Command, style: &Style) -> Outcome {
    match cmd {
        Command::Check { model, json } => check(&model, json, style),
        Command::Simplify { model } => {
            let m = transform(simplify(&load_model(&model)?))?;
            Ok(Report::ok(print_model(&m)))
        }
        Command::Elaborate { model } => {
            let m = transform(elaborate(&load_model(&model)?))?;
            Ok(Report::ok(print_model(&m)))
        }
        Command::Events { model, overlay } => {
            let m = load_model(&model)?;
            let o = load_overlay(&overlay, &m)?;
            Ok(Report::ok(events_report(&m, &o)))
        }
        Command::Behavior {
            model,
            overlay,
            declared,
        } => {
            let m = load_model(&model)?;
            let o = load_overlay(&overlay, &m)?;
            behavior(&m, &o, declared, style)
        }
        Command::Simulate {
            model,
            overlay,
            scenario,
        } => {
            let m = load_model(&model)?;
            let o = load_overlay(&overlay, &m)?;
            let sc = parse_scenario_named(&read(&scenario)?, &display(&scenario)).map_err(diag)?;
            if sc.model_name != m.name() {
                return Err(Failure::Input(format!(
                    "scenario `{}` is for model `{}`, not `{}`",
                    sc.name,
                    sc.model_name,
                    m.name()
                )));
            }
            let graph = infer_behavior(&m, &o);
            let trace = simulate(&graph, &sc).map_err(|e| Failure::Input(format!("error: {e}")))?;
            Ok(Report::ok(trace.to_json_lines()))
        }
        Command::ImportSd { diagram, events } => {
            let doc = parse_sd_named(&read(&diagram)?, &display(&diagram)).map_err(diag)?;
            let (m, o) = sd_to_tm_with_overlay(&doc);
            Ok(Report::ok(if events {
                print_overlay(&o)
            } else {
                print_model(&m)
            }))
        }
        Command::Render {
            view,
            labels,
            simplified,
            palette,
            model,
            overlay,
        } => {
            let mut opts = RenderOptions {
                view,
                show_labels: labels,
                simplified,
                ..Default::default()
            };
            if !palette.is_empty() {
                opts.palette = palette;
            }
            render(&opts, &model, overlay.as_deref())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("error: {}: {e}", path.display())))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn diag(d: tm_core::Diagnostics) -> Failure {
    Failure::Input(d.to_string())
}

/// Reads `.tm` text, or the JSON form when the name ends in `.json`.
fn load_model(path: &Path) -> Result<StaticModel, Failure> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        from_json(&text).map_err(|e| Failure::Input(format!("error: {}: {e}", path.display())))
    } else {
        tm_core::dsl::parse_model_named(&text, &display(path)).map_err(diag)
    }
}

fn load_overlay(path: &Path, model: &StaticModel) -> Result<EventOverlay, Failure> {
    parse_overlay_named(&read(path)?, model, &display(path)).map_err(diag)
}

fn transform(result: Result<StaticModel, TransformError>) -> Result<StaticModel, Failure> {
    result.map_err(|e| match e {
        TransformError::NotValidated(ref report) => {
            let mut msg = format!("error: {e}\n");
            for v in report.errors() {
                let _ = writeln!(msg, "error[{}] {}: {}", v.code, v.element, v.message);
            }
            Failure::Check(msg)
        }
        TransformError::NotSimplified => Failure::Check(format!("error: {e}")),
    })
}

fn check(path: &Path, json: bool, style: &Style) -> Outcome {
    let m = load_model(path)?;
    let report = validate(&m);
    let text = if json {
        report.to_json_lines()
    } else {
        let mut out = String::new();
        for v in &report.violations {
            let label = match v.severity.severity() {
                tm_core::dsl::Severity::Error => style.error("error"),
                tm_core::dsl::Severity::Warning => style.warning("warning"),
            };
            let _ = writeln!(out, "{label}[{}] {}: {}", v.code, v.element, v.message);
        }
        let errors = report.errors().count();
        let verdict = if report.passed() { "pass" } else { "fail" };
        let _ = writeln!(
            out,
            "{}: {verdict} ({errors} error(s), {} warning(s))",
            m.name(),
            report.violations.len() - errors
        );
        out
    };
    Ok(Report {
        text,
        failed: !report.passed(),
    })
}

fn events_report(m: &StaticModel, o: &EventOverlay) -> String {
    let mut out = String::new();
    for ev in o.events.values() {
        let region: Vec<&str> = ev.region.iter().map(|a| a.as_str()).collect();
        let _ = writeln!(out, "{} {:?}: {}", ev.id, ev.description, region.join(", "));
    }
    let cov = check_coverage(o, m);
    if cov.is_complete() {
        let _ = writeln!(out, "coverage: complete ({} event(s))", o.events.len());
    } else {
        for a in &cov.uncovered {
            let _ = writeln!(out, "uncovered: {a}");
        }
        let _ = writeln!(out, "coverage: {} uncovered action(s)", cov.uncovered.len());
    }
    out
}

fn behavior(m: &StaticModel, o: &EventOverlay, declared: bool, style: &Style) -> Outcome {
    let inferred = infer_behavior(m, o);
    if !declared {
        let mut out = String::from("chronology {\n");
        for e in &inferred.edges {
            let _ = writeln!(out, "  {e}");
        }
        out.push_str("}\n");
        return Ok(Report::ok(out));
    }
    let Some(decl) = &o.declared else {
        return Err(Failure::Input(
            "error: overlay has no chronology section to compare".into(),
        ));
    };
    let diff =
        check_behavior(decl, &inferred).map_err(|e| Failure::Check(format!("error: {e}")))?;
    let mut out = String::new();
    for e in &diff.missing {
        let _ = writeln!(out, "{} {e}", style.paint("32", "+ inferred only:"));
    }
    for e in &diff.extra {
        let _ = writeln!(out, "{} {e}", style.paint("31", "- declared only:"));
    }
    let _ = writeln!(
        out,
        "{} edge(s) inferred only, {} declared only",
        diff.missing.len(),
        diff.extra.len()
    );
    Ok(Report {
        text: out,
        failed: !diff.is_empty(),
    })
}

fn render(opts: &RenderOptions, model: &Path, overlay: Option<&Path>) -> Outcome {
    let full = load_model(model)?;
    let events = match overlay {
        Some(p) => Some(load_overlay(p, &full)?),
        None => None,
    };
    let m = if opts.simplified && !full.is_simplified() {
        transform(simplify(&full))?
    } else {
        full.clone()
    };
    let need =
        |what: &str| Failure::Input(format!("error: --view={what} needs an event overlay file"));
    let dot = match opts.view {
        View::Static => render_static(&m, opts),
        View::Overlay => {
            let mut o = events.ok_or_else(|| need("overlay"))?;
            for ev in o.events.values_mut() {
                ev.region.retain(|a| m.actions().contains_key(a));
            }
            render_overlay(&m, &o, opts)
        }
        View::Behavior => render_behavior(
            &infer_behavior(&full, &events.ok_or_else(|| need("behavior"))?),
            opts,
        ),
    };
    Ok(Report::ok(dot))
}
