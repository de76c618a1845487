//! Subcommand implementations. Thin adapters over the library: every
//! artifact a command writes is produced by the same calls a library user
//! would make, and all file writes go through a temp-file-then-rename so
//! failed runs leave nothing partial behind.

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};

use glyphforge::analysis::{
    self, logistic_fit, moving_average, success_rate, FactorValue, TrialRecord,
};
use glyphforge::docgen::{
    self, DocFormat, DocOptions, ExpectedViews, FontDelivery, InjectionSpec, PayloadMode,
    ToUnicodePolicy,
};
use glyphforge::font::{CodePoint, FontFile, SubtablePolicy};
use glyphforge::forge::{apply_plan, RemapPair, RemapPlan};
use glyphforge::scanner::{
    diff_against_reference, scan_document_with, DocKind, FontFetcher, LocalFileFetcher,
    ScanOptions, Verdict,
};
use glyphforge::sensitivity::PatternRegistry;

use crate::{AnalyzeArgs, ClassifyArgs, EmbedArgs, ForgeArgs, InspectArgs, ScanArgs};

/// Writes via a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_font(path: &Path) -> anyhow::Result<FontFile> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let font = FontFile::parse(&bytes)
        .with_context(|| format!("parsing {}", path.display()))?;
    for warning in font.checksum_warnings() {
        eprintln!("warning: {}: {warning:?}", path.display());
    }
    Ok(font)
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        return Ok(buf);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Parses one side of a `src=tgt` pair: `0x33`, `51`, or a single char.
fn parse_code(text: &str) -> anyhow::Result<CodePoint> {
    let text = text.trim();
    if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        return Ok(CodePoint(u16::from_str_radix(hex, 16)?));
    }
    let mut chars = text.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if !c.is_ascii_digit() {
            return CodePoint::try_from(c)
                .map_err(|c| anyhow!("character {c:?} is outside the BMP"));
        }
    }
    Ok(CodePoint(text.parse::<u16>()?))
}

fn parse_map(map: &str) -> anyhow::Result<Vec<RemapPair>> {
    let mut pairs = Vec::new();
    for piece in map.split(',').filter(|p| !p.trim().is_empty()) {
        let (src, tgt) = piece
            .split_once('=')
            .ok_or_else(|| anyhow!("bad pair '{piece}', want src=tgt"))?;
        pairs.push(RemapPair::new(parse_code(src)?, parse_code(tgt)?));
    }
    if pairs.is_empty() {
        bail!("no remap pairs given");
    }
    Ok(pairs)
}

pub fn forge(args: ForgeArgs) -> anyhow::Result<()> {
    let base = load_font(&args.base_font)?;

    let plan = if let Some(map) = &args.map {
        RemapPlan::from_pairs(parse_map(map)?)?
    } else if let Some(payload_path) = &args.payload {
        let payload = read_text(payload_path)?;
        if args.invisible {
            RemapPlan::invisible(payload.trim_end_matches('\n'))?
        } else if let Some(decoy_path) = &args.decoy {
            let decoy = read_text(decoy_path)?;
            RemapPlan::from_decoy(
                payload.trim_end_matches('\n'),
                decoy.trim_end_matches('\n'),
            )?
        } else {
            bail!("--payload needs either --decoy or --invisible");
        }
    } else {
        bail!("give a plan with --map or --payload");
    };
    let plan = plan.with_preserve_segment_count(args.preserve_segments);
    if plan.is_empty() {
        bail!("plan is empty (payload and decoy may be identical)");
    }

    let output = apply_plan(&base, &plan)?;
    let forged = if args.drop_subtables {
        output.font.with_subtable_policy(SubtablePolicy::DropOthers)
    } else {
        output.font
    };
    write_atomic(&args.output, &forged.to_bytes()?)?;
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| append_ext(&args.output, "manifest.json"));
    write_atomic(&manifest_path, output.manifest.to_json().as_bytes())?;

    let mismatches = diff_against_reference(&forged, &base);
    println!(
        "forged {} pair(s); segments {} -> {}",
        output.manifest.pairs.len(),
        output.manifest.segment_count_before,
        output.manifest.segment_count_after,
    );
    for m in mismatches.iter().take(16) {
        let shown = m
            .impersonated
            .and_then(|c| c.as_char())
            .map(|c| format!("{c:?}"))
            .unwrap_or_else(|| "?".to_string());
        println!(
            "  {} now renders as {} ({} -> {})",
            m.code, shown, m.expected_glyph, m.actual_glyph
        );
    }
    if mismatches.len() > 16 {
        println!("  ... and {} more", mismatches.len() - 16);
    }
    println!("wrote {} and {}", args.output.display(), manifest_path.display());
    Ok(())
}

fn append_ext(path: &Path, ext: &str) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

pub fn embed(args: EmbedArgs) -> anyhow::Result<()> {
    let cover = read_text(&args.cover)?;
    let cover = cover.trim_end_matches('\n');
    let payload = read_text(&args.payload)?;
    let payload = payload.trim_end_matches('\n');
    let base = load_font(&args.base_font)?;

    let format = args.format;
    let placement = args.placement;
    let mode = match args.mode.as_str() {
        "invisible" => PayloadMode::Invisible,
        "decoy" => {
            let decoy_path =
                args.decoy.as_ref().ok_or_else(|| anyhow!("--mode decoy needs --decoy"))?;
            let decoy = read_text(decoy_path)?;
            PayloadMode::Decoy(decoy.trim_end_matches('\n').to_string())
        }
        other => bail!("unknown mode '{other}' (want invisible|decoy)"),
    };

    let tounicode = match args.tounicode.as_str() {
        "omit" => ToUnicodePolicy::Omit,
        "codes" => ToUnicodePolicy::Codes,
        "decoy" => ToUnicodePolicy::Decoy,
        other => bail!("unknown tounicode policy '{other}'"),
    };
    let font_file_name = args
        .output
        .file_stem()
        .map(|s| format!("{}.ttf", s.to_string_lossy()))
        .unwrap_or_else(|| "payload-font.ttf".to_string());
    let delivery = match args.delivery.as_str() {
        "inline" => FontDelivery::InlineDataUri,
        "file" => FontDelivery::FileRef(font_file_name.clone()),
        "url" => FontDelivery::RemoteUrl(
            args.font_url.clone().ok_or_else(|| anyhow!("--delivery url needs --font-url"))?,
        ),
        other => bail!("unknown delivery '{other}' (want inline|file|url)"),
    };
    let options = DocOptions {
        delivery,
        tounicode,
        preserve_segment_count: args.preserve_segments,
        ..DocOptions::default()
    };

    let spec = InjectionSpec::new(payload, mode, placement, args.frequency, format)?;
    let doc = docgen::build_with(cover, &spec, &base, &options)?;

    write_atomic(&args.output, &doc.bytes)?;
    if matches!(options.delivery, FontDelivery::FileRef(_)) && format == DocFormat::Html {
        let font_path = args
            .output
            .parent()
            .unwrap_or(Path::new("."))
            .join(&font_file_name);
        write_atomic(&font_path, &doc.font_bytes)?;
        println!("wrote font {}", font_path.display());
    }
    let views = ExpectedViews::from(&doc);
    let sidecar = append_ext(&args.output, "expected.json");
    write_atomic(&sidecar, serde_json::to_string_pretty(&views)?.as_bytes())?;
    let manifest_path = append_ext(&args.output, "manifest.json");
    write_atomic(&manifest_path, doc.manifest.to_json().as_bytes())?;

    println!(
        "wrote {} ({} bytes, payload x{} at {:?})",
        args.output.display(),
        doc.bytes.len(),
        views.payload_occurrences,
        spec.placement,
    );
    println!("expected views in {}", sidecar.display());
    Ok(())
}

/// Returns the process exit code (verdict-coded).
pub fn scan(args: ScanArgs) -> anyhow::Result<u8> {
    let bytes = std::fs::read(&args.document)
        .with_context(|| format!("reading {}", args.document.display()))?;
    let kind = match args.format.as_str() {
        "auto" => DocKind::detect(&bytes)
            .ok_or_else(|| anyhow!("cannot sniff the document kind; pass --format"))?,
        "html" => DocKind::Html,
        "pdf" => DocKind::Pdf,
        "font" => DocKind::Font,
        other => bail!("unknown format '{other}'"),
    };
    let reference = match &args.reference {
        Some(path) => Some(load_font(path)?),
        None => None,
    };
    let fetcher = (!args.no_local_fonts).then(|| LocalFileFetcher {
        base_dir: args
            .document
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf(),
    });
    let options = ScanOptions {
        fetcher: fetcher.as_ref().map(|f| f as &dyn FontFetcher),
        ..Default::default()
    };
    let report = scan_document_with(&bytes, kind, reference.as_ref(), &options)?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("verdict: {:?}", report.verdict);
        println!(
            "fonts: {} found, {} unresolved; mismatches: {}; heuristics: {}",
            report.fonts_found,
            report.unresolved_fonts.len(),
            report.mismatches.len(),
            report.heuristics_fired.len(),
        );
        for unresolved in &report.unresolved_fonts {
            println!("unresolved font: {unresolved}");
        }
        for hit in &report.heuristics_fired {
            println!("heuristic {:?}: {}", hit.id, hit.detail);
        }
        if !report.hidden_text.is_empty() {
            println!("hidden text ({} run(s)):", report.hidden_text.len());
            for run in &report.hidden_text {
                println!("  {run:?}");
            }
            match report.sensitivity.level {
                Some(level) => println!(
                    "sensitivity: {level} ({:?})",
                    report.sensitivity.data_types
                ),
                None => println!("sensitivity: none detected"),
            }
        }
    }
    if report.verdict == Verdict::Malicious && !args.json {
        eprintln!("MALICIOUS: rendered text differs from machine text");
    }
    Ok(report.verdict.exit_code() as u8)
}

pub fn classify(args: ClassifyArgs) -> anyhow::Result<()> {
    let text = read_text(&args.input)?;
    let custom;
    let registry = match &args.registry {
        Some(path) => {
            custom = PatternRegistry::from_path(path)?;
            &custom
        }
        None => PatternRegistry::builtin(),
    };
    let classification = registry.classify(&text);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&classification)?);
    } else {
        match classification.level {
            Some(level) => println!("level: {level}"),
            None => println!("level: none"),
        }
        for d in &classification.detections {
            println!(
                "  {:?} {:?} at {}..{} ({:?}, {:?})",
                d.data_type, d.text, d.start, d.end, d.confidence, d.pattern
            );
        }
    }
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let trials = analysis::read_trials_path(&args.trials)?;
    let mut did_something = false;

    if let Some(filter) = &args.rates {
        let predicate = parse_filter(filter)?;
        let rate = success_rate(&trials, |t| predicate(t))?;
        println!("{rate}");
        did_something = true;
    }

    if let Some(window) = args.ma {
        let series = grouped_series(&trials, &args.by)?;
        let smoothed = moving_average(&series.iter().map(|(_, r)| r.value()).collect::<Vec<_>>(), window)?;
        println!("{:<12}{:>6}{:>10}{:>10}{:>10}{:>12}", args.by, "n", "rate", "ci_low", "ci_high", format!("ma({window})"));
        for (i, (key, rate)) in series.iter().enumerate() {
            let (low, high) = analysis::binomial_ci(rate.successes, rate.n, 0.95f64)?;
            let ma_text = i
                .checked_sub(window - 1)
                .and_then(|j| smoothed.get(j))
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".to_string());
            println!(
                "{key:<12}{:>6}{:>10.4}{low:>10.4}{high:>10.4}{ma_text:>12}",
                rate.n,
                rate.value(),
            );
        }
        did_something = true;
    }

    if let Some(vars) = &args.regress {
        let names: Vec<&str> = vars.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if names.is_empty() {
            bail!("--regress needs at least one factor name");
        }
        let fit = logistic_fit::<f64>(&trials, &names)?;
        print!("{}", fit.format_table());
        println!(
            "n = {}, log-likelihood = {:.3}, {} in {} iteration(s)",
            fit.n,
            fit.log_likelihood,
            if fit.converged { "converged" } else { "NOT converged" },
            fit.iterations
        );
        did_something = true;
    }

    if !did_something {
        bail!("nothing to do: pass --rates, --ma or --regress");
    }
    Ok(())
}

/// "factor=value,..." into a predicate; empty input selects everything.
fn parse_filter(filter: &str) -> anyhow::Result<impl Fn(&TrialRecord) -> bool> {
    let mut wanted: Vec<(String, String)> = Vec::new();
    for piece in filter.split(',').filter(|p| !p.trim().is_empty()) {
        let (name, value) = piece
            .split_once('=')
            .ok_or_else(|| anyhow!("bad filter '{piece}', want factor=value"))?;
        wanted.push((name.trim().to_string(), value.trim().to_string()));
    }
    Ok(move |trial: &TrialRecord| {
        wanted.iter().all(|(name, value)| {
            trial.factor(name).is_some_and(|v| v.matches(value))
        })
    })
}

/// Per-group success rates ordered by the numeric value of the grouping
/// factor (lexicographic for tags).
fn grouped_series(
    trials: &[TrialRecord],
    by: &str,
) -> anyhow::Result<Vec<(String, analysis::RateEstimate)>> {
    let mut keys: Vec<FactorValue> = Vec::new();
    for trial in trials {
        let value = trial
            .factor(by)
            .ok_or_else(|| anyhow!("factor '{by}' missing from a trial"))?;
        if !keys.contains(value) {
            keys.push(value.clone());
        }
    }
    keys.sort_by(|a, b| match (a, b) {
        (FactorValue::Num(x), FactorValue::Num(y)) => x.partial_cmp(y).unwrap(),
        (FactorValue::Num(_), FactorValue::Tag(_)) => std::cmp::Ordering::Less,
        (FactorValue::Tag(_), FactorValue::Num(_)) => std::cmp::Ordering::Greater,
        (FactorValue::Tag(x), FactorValue::Tag(y)) => x.cmp(y),
    });
    let mut series = Vec::new();
    for key in keys {
        let rate = success_rate(trials, |t| t.factor(by) == Some(&key))?;
        series.push((key.to_string(), rate));
    }
    Ok(series)
}

pub fn inspect(args: InspectArgs) -> anyhow::Result<()> {
    let bytes = std::fs::read(&args.font)
        .with_context(|| format!("reading {}", args.font.display()))?;
    let font = FontFile::parse(&bytes)?;

    if args.json {
        let segments: Vec<serde_json::Value> = font
            .cmap()
            .segments()
            .iter()
            .map(|s| {
                serde_json::json!({
                    "start": s.start.value(),
                    "end": s.end.value(),
                    "id_delta": s.id_delta,
                    "uses_array": s.uses_array(),
                })
            })
            .collect();
        let value = serde_json::json!({
            "file": args.font.display().to_string(),
            "bytes": bytes.len(),
            "sfnt_version": font.sfnt_version(),
            "num_glyphs": font.num_glyphs(),
            "units_per_em": font.units_per_em(),
            "postscript_name": font.postscript_name(),
            "tables": font.directory().iter().map(|r| r.tag.to_string()).collect::<Vec<_>>(),
            "encoding_records": font.encoding_records().len(),
            "segment_count": font.cmap().segment_count(),
            "segments": if args.segments { Some(segments) } else { None },
            "checksum_warnings": font.checksum_warnings().len(),
            "heuristics": glyphforge::scanner::heuristic_scan(&font),
        });
        println!("{}", serde_json::to_string_pretty(&value)?);
        return Ok(());
    }

    println!("{}: {} bytes, {} tables", args.font.display(), bytes.len(), font.directory().len());
    println!(
        "glyphs: {}, units/em: {}, name: {}",
        font.num_glyphs(),
        font.units_per_em(),
        font.postscript_name().as_deref().unwrap_or("(none)")
    );
    println!(
        "cmap: {} encoding record(s), canonical format-4 with {} segments",
        font.encoding_records().len(),
        font.cmap().segment_count()
    );
    if !font.checksum_warnings().is_empty() {
        println!("checksum warnings: {:?}", font.checksum_warnings());
    }
    let hits = glyphforge::scanner::heuristic_scan(&font);
    for hit in &hits {
        println!("heuristic {:?}: {}", hit.id, hit.detail);
    }
    if args.segments {
        for s in font.cmap().segments() {
            if s.uses_array() {
                println!(
                    "  {:#06x}-{:#06x} via glyphIdArray (idDelta {:#06x})",
                    s.start.value(),
                    s.end.value(),
                    s.id_delta
                );
            } else {
                println!(
                    "  {:#06x}-{:#06x} idDelta {:#06x}",
                    s.start.value(),
                    s.end.value(),
                    s.id_delta
                );
            }
        }
    }
    Ok(())
}
