//! glyphforge: forge code-to-glyph deceptions, embed them in carrier
//! documents, scan documents for them, classify recovered text, and run
//! the trial statistics.
//!
//! Exit codes: `scan` exits 0/1/2 for clean/suspicious/malicious and 3 on
//! operational failure; every other subcommand exits 0 on success and 1 on
//! failure; usage errors exit 64.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "glyphforge",
    version,
    about = "TrueType character-map forgery, carrier documents, and the scanner that catches them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a font so chosen codes render as other characters' glyphs.
    Forge(ForgeArgs),
    /// Build an HTML/PDF carrier pairing cover text with a hidden payload.
    Embed(EmbedArgs),
    /// Scan a document or font for character-map deception.
    Scan(ScanArgs),
    /// Classify text by data-sensitivity level.
    Classify(ClassifyArgs),
    /// Success rates, moving averages and logistic regression over trials.
    Analyze(AnalyzeArgs),
    /// Print the structure of a font file.
    Inspect(InspectArgs),
}

#[derive(clap::Args)]
struct ForgeArgs {
    /// Base font to rewrite.
    base_font: PathBuf,
    /// Output path for the forged font.
    output: PathBuf,
    /// Pairs as "src=tgt,..." with hex (0x33), decimal, or single
    /// characters on either side.
    #[arg(long, value_name = "PAIRS", conflicts_with = "payload")]
    map: Option<String>,
    /// Payload text file; combined with --decoy or --invisible.
    #[arg(long, value_name = "FILE")]
    payload: Option<PathBuf>,
    /// Decoy text file (same length as payload).
    #[arg(long, value_name = "FILE", requires = "payload")]
    decoy: Option<PathBuf>,
    /// Point every payload character at the space glyph.
    #[arg(long, requires = "payload", conflicts_with = "decoy")]
    invisible: bool,
    /// Keep the segment count unchanged (merge to compensate splits).
    #[arg(long)]
    preserve_segments: bool,
    /// Drop non-canonical cmap encoding records instead of mirroring them.
    #[arg(long)]
    drop_subtables: bool,
    /// Manifest path (default: `<output>.manifest.json`).
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EmbedArgs {
    /// Cover text file (paragraphs separated by blank lines).
    cover: PathBuf,
    /// Payload text file (the hidden machine text).
    payload: PathBuf,
    /// Base font to forge and embed.
    base_font: PathBuf,
    /// Output document path.
    output: PathBuf,
    #[arg(long, value_name = "html|pdf", value_parser = parse_format)]
    format: glyphforge::docgen::DocFormat,
    #[arg(long, default_value = "top", value_name = "top|middle|bottom", value_parser = parse_placement)]
    placement: glyphforge::docgen::Placement,
    #[arg(long, default_value_t = 1)]
    frequency: u32,
    #[arg(long, default_value = "invisible", value_name = "invisible|decoy")]
    mode: String,
    /// Decoy text file (required with --mode decoy).
    #[arg(long, value_name = "FILE")]
    decoy: Option<PathBuf>,
    /// HTML font delivery: inline data URI, sibling file, or remote URL.
    #[arg(long, default_value = "inline", value_name = "inline|file|url")]
    delivery: String,
    /// Remote URL for --delivery url.
    #[arg(long, value_name = "URL")]
    font_url: Option<String>,
    /// PDF /ToUnicode policy.
    #[arg(long, default_value = "omit", value_name = "omit|codes|decoy")]
    tounicode: String,
    #[arg(long)]
    preserve_segments: bool,
}

#[derive(clap::Args)]
struct ScanArgs {
    /// Document (HTML/PDF) or font file to scan.
    document: PathBuf,
    /// Trusted font the suspect is claimed to derive from.
    #[arg(long, value_name = "FONT")]
    reference: Option<PathBuf>,
    /// Input kind; auto-sniffed by default.
    #[arg(long, default_value = "auto", value_name = "auto|html|pdf|font")]
    format: String,
    /// Emit the full report as JSON.
    #[arg(long)]
    json: bool,
    /// Do not resolve relative font references against the document's
    /// directory. (Remote URLs are never fetched.)
    #[arg(long)]
    no_local_fonts: bool,
}

#[derive(clap::Args)]
struct ClassifyArgs {
    /// Text file to classify ("-" for stdin).
    input: PathBuf,
    /// Custom pattern registry (TOML).
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// Trial file: delimiter-separated with a header row; one column must
    /// be "outcome" (1/0).
    trials: PathBuf,
    /// Success rate over trials matching "factor=value,..." (empty string
    /// for all trials).
    #[arg(long, value_name = "FILTER")]
    rates: Option<String>,
    /// Moving-average window (2-5) over per-group success rates.
    #[arg(long, value_name = "WINDOW")]
    ma: Option<usize>,
    /// Factor whose values order the series for --ma.
    #[arg(long, default_value = "frequency", value_name = "FACTOR")]
    by: String,
    /// Logistic regression over the named factors, comma-separated.
    #[arg(long, value_name = "VARS")]
    regress: Option<String>,
}

#[derive(clap::Args)]
struct InspectArgs {
    font: PathBuf,
    /// List every cmap segment.
    #[arg(long)]
    segments: bool,
    #[arg(long)]
    json: bool,
}

fn parse_format(s: &str) -> Result<glyphforge::docgen::DocFormat, String> {
    s.parse()
}

fn parse_placement(s: &str) -> Result<glyphforge::docgen::Placement, String> {
    s.parse()
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (e.g. `glyphforge inspect ... | head`)
    // instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error value.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Scan(args) => match commands::scan(args) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(3)
            }
        },
        other => {
            let result = match other {
                Command::Forge(args) => commands::forge(args),
                Command::Embed(args) => commands::embed(args),
                Command::Classify(args) => commands::classify(args),
                Command::Analyze(args) => commands::analyze(args),
                Command::Inspect(args) => commands::inspect(args),
                Command::Scan(_) => unreachable!(),
            };
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
