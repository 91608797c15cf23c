//! Command-line front end: parse sentences into annotated forests, evaluate
//! truth against an environment, batch statistics, and an interactive loop.
//!
//! Exit codes: 0 success or "yes", 1 usage or data error, 2 no parse,
//! 3 evaluated false.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use groundparse::{
    annotate_forest, cky_parse, evaluate_tree, evaluate_truth, filter_forest, run_stats,
    AnnotateConfig, AnnotatedForest, AnnotatedTree, DisambigError, EnvironmentDb, Forest, Grammar,
    RunStats,
};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_NO_PARSE: u8 = 2;
const EXIT_FALSE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "groundparse",
    version,
    about = "Parse ambiguous sentences into shared forests grounded in an environment model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a sentence and report trees and root referents.
    Parse {
        #[command(flatten)]
        common: Common,
        /// Sentence tokens.
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Evaluate whether a sentence holds in the environment.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Sentence tokens.
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Batch statistics over a file of sentences, one per line.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Sentence file, one sentence per line.
        #[arg(long)]
        file: PathBuf,
    },
    /// Interactive loop: sentences are evaluated, directives start with ':'.
    Repl {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Grammar file.
    #[arg(long)]
    grammar: PathBuf,
    /// Environment file.
    #[arg(long)]
    env: PathBuf,
    /// Proximity threshold for noun-noun composition.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    /// Maximum trees to enumerate when listing analyses.
    #[arg(long, default_value_t = 20)]
    trees: usize,
    /// List enumerated trees with per-constituent referent sets.
    #[arg(long)]
    show_referents: bool,
    /// Output mode.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Record,
    Dot,
}

/// Grammar and environment loaded once per invocation; immutable afterwards.
struct Session {
    grammar: Grammar,
    db: EnvironmentDb,
    config: AnnotateConfig,
    tree_limit: usize,
    show_referents: bool,
    format: Format,
}

fn load_session(common: &Common) -> Result<Session> {
    if !common.threshold.is_finite() || common.threshold < 0.0 {
        bail!("threshold must be a finite number >= 0");
    }
    if common.trees == 0 {
        bail!("tree limit must be >= 1");
    }
    let grammar_text = fs::read_to_string(&common.grammar)
        .with_context(|| format!("cannot read grammar file {}", common.grammar.display()))?;
    let grammar = groundparse::load_grammar(&grammar_text)
        .with_context(|| format!("grammar file {}", common.grammar.display()))?;
    let env_text = fs::read_to_string(&common.env)
        .with_context(|| format!("cannot read environment file {}", common.env.display()))?;
    let db = groundparse::load_environment(&env_text)
        .with_context(|| format!("environment file {}", common.env.display()))?;
    Ok(Session {
        grammar,
        db,
        config: AnnotateConfig { proximity_threshold: common.threshold },
        tree_limit: common.trees,
        show_referents: common.show_referents,
        format: common.format,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Clap reserves exit code 2 for usage errors; this tool keeps 2
            // for no-parse, so usage problems fold into the error code.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Parse { common, words } => {
            load_session(common).and_then(|s| cmd_parse(&s, words))
        }
        Command::Eval { common, words } => load_session(common).and_then(|s| cmd_eval(&s, words)),
        Command::Stats { common, file } => load_session(common).and_then(|s| cmd_stats(&s, file)),
        Command::Repl { common } => load_session(common).and_then(|s| cmd_repl(&s)),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Parses the sentence or reports why it cannot be parsed. `Ok` carries the
/// process exit code; `Err` is reserved for data errors.
fn parse_sentence(session: &Session, words: &[String]) -> Result<Forest> {
    let forest = cky_parse(&session.grammar, words)?;
    Ok(forest)
}

fn annotate<'a>(session: &'a Session, forest: &'a Forest) -> Result<AnnotatedForest<'a>> {
    let af = annotate_forest(forest, &session.grammar, &session.db, &session.config)?;
    Ok(af)
}

fn cmd_parse(session: &Session, words: &[String]) -> Result<u8> {
    let forest = parse_sentence(session, words)?;
    if forest.roots().is_empty() {
        println!("no parse");
        return Ok(EXIT_NO_PARSE);
    }
    match session.format {
        Format::Dot => {
            print!("{}", forest.to_dot(&session.grammar));
            Ok(EXIT_OK)
        }
        Format::Record => {
            let af = annotate(session, &forest)?;
            let (_, report) = filter_forest(&af);
            println!("{}", run_stats(&af, &report).record());
            Ok(EXIT_OK)
        }
        Format::Text => {
            let af = annotate(session, &forest)?;
            print!("{}", parse_report(session, &af));
            Ok(EXIT_OK)
        }
    }
}

/// Text body for a successful parse: tree count, per-root referents, and by
/// flag the enumerated trees with per-constituent annotations.
fn parse_report(session: &Session, af: &AnnotatedForest) -> String {
    let forest = af.forest();
    let mut out = String::new();
    out.push_str(&format!("trees: {}\n", forest.count_trees()));
    for &root in forest.roots() {
        let node = forest.disj(root);
        let ann = af.annotation(root);
        out.push_str(&format!(
            "root {}{}: {}\n",
            af.grammar().category(node.category).name,
            node.span,
            ann.referents.display(af.db())
        ));
    }
    if session.show_referents {
        for (i, tree) in forest.enumerate_trees(session.tree_limit).iter().enumerate() {
            match evaluate_tree(tree, af.grammar(), af.db(), af.config()) {
                Ok(at) => {
                    let mut line = String::new();
                    render_annotated(&at, af, &mut line);
                    out.push_str(&format!("tree {}: {}\n", i + 1, line));
                }
                Err(e) => out.push_str(&format!("tree {}: error: {}\n", i + 1, e)),
            }
        }
    }
    out
}

/// Bracketed tree text with referent sets on referential constituents, e.g.
/// `(NP:{b1} (NP:{b1, b2, b3} button) (PP:{b1} (P on) (NP:{h1} handle)))`.
fn render_annotated(tree: &AnnotatedTree, af: &AnnotatedForest, out: &mut String) {
    let grammar = af.grammar();
    out.push('(');
    out.push_str(&grammar.category(tree.category).name);
    if grammar.is_referential(tree.category) {
        out.push(':');
        out.push_str(&tree.annotation.referents.display(af.db()).to_string());
    }
    match (&tree.children, tree.token) {
        (Some(children), _) => {
            out.push(' ');
            render_annotated(&children.0, af, out);
            out.push(' ');
            render_annotated(&children.1, af, out);
        }
        (None, Some(token)) => {
            out.push(' ');
            out.push_str(&af.forest().tokens()[token]);
        }
        (None, None) => {}
    }
    out.push(')');
}

fn cmd_eval(session: &Session, words: &[String]) -> Result<u8> {
    let forest = parse_sentence(session, words)?;
    if forest.roots().is_empty() {
        println!("no parse");
        return Ok(EXIT_NO_PARSE);
    }
    let af = annotate(session, &forest)?;
    match evaluate_truth(&af) {
        Ok(verdict) if verdict.holds => {
            println!("yes  witnesses: {}", verdict.witnesses.display(&session.db));
            Ok(EXIT_OK)
        }
        Ok(_) => {
            println!("no");
            Ok(EXIT_FALSE)
        }
        Err(DisambigError::NoParse) => {
            println!("no parse");
            Ok(EXIT_NO_PARSE)
        }
        Err(DisambigError::Algebra(e)) => Err(e.into()),
    }
}

/// Per-sentence outcome of a stats run. Errors stay inline so one bad row
/// cannot abort the batch.
enum Row {
    Parsed(RunStats),
    NoParse(String),
    Failed(String, String),
}

fn stats_row(session: &Session, sentence: &str) -> Row {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    let forest = match cky_parse(&session.grammar, &words) {
        Ok(f) => f,
        Err(e) => return Row::Failed(sentence.to_string(), e.to_string()),
    };
    if forest.roots().is_empty() {
        return Row::NoParse(sentence.to_string());
    }
    let af = match annotate_forest(&forest, &session.grammar, &session.db, &session.config) {
        Ok(af) => af,
        Err(e) => return Row::Failed(sentence.to_string(), e.to_string()),
    };
    let (_, report) = filter_forest(&af);
    Row::Parsed(run_stats(&af, &report))
}

fn cmd_stats(session: &Session, file: &Path) -> Result<u8> {
    let text = fs::read_to_string(file)
        .with_context(|| format!("cannot read sentence file {}", file.display()))?;
    let sentences: Vec<&str> =
        text.lines().map(str::trim).filter(|line| !line.is_empty()).collect();
    if sentences.is_empty() {
        eprintln!("no sentences");
        return Ok(EXIT_ERROR);
    }
    let rows: Vec<Row> = sentences.iter().map(|s| stats_row(session, s)).collect();

    let parsed: Vec<&RunStats> = rows
        .iter()
        .filter_map(|r| match r {
            Row::Parsed(stats) => Some(stats),
            _ => None,
        })
        .collect();
    let mean = |f: &dyn Fn(&RunStats) -> f64| -> f64 {
        if parsed.is_empty() {
            0.0
        } else {
            parsed.iter().map(|s| f(s)).sum::<f64>() / parsed.len() as f64
        }
    };
    let avg_before = mean(&|s: &RunStats| big_f64(&s.trees_before));
    let avg_after = mean(&|s: &RunStats| big_f64(&s.trees_after));
    let avg_sharing = mean(&|s: &RunStats| s.sharing_ratio);
    let avg_reduction = mean(&|s: &RunStats| s.reduction_ratio);

    match session.format {
        Format::Record | Format::Dot => {
            // DOT has no batch meaning; record is the machine format.
            for row in &rows {
                match row {
                    Row::Parsed(stats) => println!("{}", stats.record()),
                    Row::NoParse(s) => println!("{s}\tNOPARSE"),
                    Row::Failed(s, msg) => println!("{s}\tERROR\t{msg}"),
                }
            }
            println!(
                "# summary\tparsed={}/{}\tavg_before={:.1}\tavg_after={:.1}\tsharing={:.1}:1\treduction={:.1}:1",
                parsed.len(),
                rows.len(),
                avg_before,
                avg_after,
                avg_sharing,
                avg_reduction
            );
        }
        Format::Text => {
            for row in &rows {
                match row {
                    Row::Parsed(stats) => println!("{stats}\n"),
                    Row::NoParse(s) => println!("sentence: {s}\nno parse\n"),
                    Row::Failed(s, msg) => println!("sentence: {s}\nerror: {msg}\n"),
                }
            }
            println!("summary:");
            println!("  sentences: {}", rows.len());
            let pct = if rows.is_empty() {
                0.0
            } else {
                100.0 * parsed.len() as f64 / rows.len() as f64
            };
            println!("  parsed: {} ({pct:.1}%)", parsed.len());
            println!("  average trees before: {avg_before:.1}");
            println!("  average trees after: {avg_after:.1}");
            println!("  average sharing ratio: {avg_sharing:.1}:1");
            println!("  average reduction ratio: {avg_reduction:.1}:1");
        }
    }
    Ok(if parsed.is_empty() { EXIT_ERROR } else { EXIT_OK })
}

fn big_f64(x: &groundparse::num_bigint::BigUint) -> f64 {
    // Decimal round-trip sidesteps a direct num-traits dependency here; the
    // value only feeds a one-decimal average.
    x.to_string().parse().unwrap_or(f64::INFINITY)
}

/// One REPL turn. Returns false when the session should end.
fn repl_line(session: &Session, line: &str, last: &mut Option<String>) -> bool {
    let line = line.trim();
    if line.is_empty() {
        return true;
    }
    if let Some(directive) = line.strip_prefix(':') {
        let mut parts = directive.split_whitespace();
        let head = parts.next().unwrap_or("");
        let rest = parts.collect::<Vec<_>>().join(" ");
        match head {
            "quit" => return false,
            "parse" => {
                let sentence = if rest.is_empty() { last.clone() } else { Some(rest) };
                match sentence {
                    None => println!("no sentence yet"),
                    Some(s) => {
                        *last = Some(s.clone());
                        repl_parse(session, &s);
                    }
                }
            }
            "stats" => {
                let sentence = if rest.is_empty() { last.clone() } else { Some(rest) };
                match sentence {
                    None => println!("no sentence yet"),
                    Some(s) => {
                        *last = Some(s.clone());
                        match stats_row(session, &s) {
                            Row::Parsed(stats) => println!("{stats}"),
                            Row::NoParse(_) => println!("no parse"),
                            Row::Failed(_, msg) => println!("error: {msg}"),
                        }
                    }
                }
            }
            "dot" => match (&last, rest.is_empty()) {
                (_, true) => println!("usage: :dot <file>"),
                (None, _) => println!("no sentence yet"),
                (Some(s), _) => {
                    let words: Vec<&str> = s.split_whitespace().collect();
                    match cky_parse(&session.grammar, &words) {
                        Ok(forest) => match fs::write(&rest, forest.to_dot(&session.grammar)) {
                            Ok(()) => println!("wrote {rest}"),
                            Err(e) => println!("error: cannot write {rest}: {e}"),
                        },
                        Err(e) => println!("error: {e}"),
                    }
                }
            },
            other => println!("unknown directive: :{other}"),
        }
        return true;
    }
    *last = Some(line.to_string());
    let words: Vec<String> = line.split_whitespace().map(str::to_string).collect();
    match cmd_eval(session, &words) {
        Ok(_) => {}
        Err(e) => println!("error: {e:#}"),
    }
    true
}

fn repl_parse(session: &Session, sentence: &str) {
    let words: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
    match cmd_parse(session, &words) {
        Ok(_) => {}
        Err(e) => println!("error: {e:#}"),
    }
}

fn cmd_repl(session: &Session) -> Result<u8> {
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    let mut last: Option<String> = None;
    loop {
        print!("> ");
        io::stdout().flush()?;
        let Some(line) = lines.next() else {
            println!();
            break;
        };
        if !repl_line(session, &line?, &mut last) {
            break;
        }
    }
    Ok(EXIT_OK)
}
