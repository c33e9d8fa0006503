use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::rngs::StdRng;
use rand::SeedableRng;

use dvfs::crypto::{Ciphertext, MasterKey};
use dvfs::fuzzy::{LshFamily, LshSeed};
use dvfs::harness::bench::{
    bench_accuracy, bench_scaling, fit_log, lsh_calibrate, ErrorType, SCALING_MATCHES, SCALING_QUERY,
};
use dvfs::harness::{run_adversary, synthetic_system, AdversaryMode, Config, DocumentStore, System};
use dvfs::index::TreeTag;
use dvfs::ledger::Log;
use dvfs::search::SearchTranscript;
use dvfs::verify::VerifyInput;

#[derive(Parser)]
#[command(name = "dvfs", version, about = "Verifiable fuzzy keyword search over encrypted documents")]
struct Cli {
    /// Configuration file (key = value lines). DVFS_* variables override it.
    #[arg(long, global = true, default_value = "dvfs.conf")]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate keys and write a fresh configuration.
    Setup {
        /// Directory for index, ledger, local repository and documents.
        #[arg(long, default_value = "dvfs-data")]
        dir: PathBuf,
        /// Tree height L (2..=32).
        #[arg(long, default_value_t = 32)]
        height: u8,
        /// Number of LSH functions.
        #[arg(long, default_value_t = 8)]
        k: usize,
        /// Keep the plaintext debug journal.
        #[arg(long)]
        debug_journal: bool,
        /// Overwrite an existing configuration.
        #[arg(long)]
        force: bool,
    },
    /// Encrypt and index every file of a directory.
    Ingest { dir: PathBuf },
    /// Encrypt and index one file.
    Add {
        file: PathBuf,
        /// Document id (default: next free id).
        #[arg(long)]
        id: Option<u64>,
    },
    /// Remove a keyword from a document.
    Del { doc_id: u64, keyword: String },
    /// Conjunctive fuzzy search; the result is verified before it is shown.
    Search {
        #[arg(required = true)]
        keywords: Vec<String>,
        /// Print the auxiliary proof.
        #[arg(long)]
        show_proof: bool,
        /// Write the transcript and the returned ciphertexts here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Verify a saved transcript against returned ciphertexts. Exits 0 iff the verdict is 1.
    Verify {
        /// Transcript file; alternatively `--seq` reads it from the ledger.
        #[arg(long, conflicts_with = "seq")]
        transcript: Option<PathBuf>,
        #[arg(long)]
        seq: Option<u64>,
        /// Directory of `<doc_id>.ct` files (default: the document store).
        #[arg(long)]
        docs: Option<PathBuf>,
    },
    /// Inspect the local repository.
    Repo {
        #[command(subcommand)]
        action: RepoAction,
    },
    /// Inspect the ledger.
    Ledger {
        #[command(subcommand)]
        action: LedgerAction,
    },
    /// Inspect the index.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Run an experiment.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
    /// Run search and verify against a misbehaving cloud store.
    Adversary {
        /// none, tamper-doc, drop-result or stale-doc
        mode: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Size of the synthetic corpus.
        #[arg(long, default_value_t = 32)]
        docs: usize,
    },
}

#[derive(Subcommand)]
enum RepoAction {
    /// Version state of one keyword.
    Show { keyword: String },
}

#[derive(Subcommand)]
enum LedgerAction {
    /// Check the hash chain from genesis.
    Validate,
    /// Print one record.
    Show { seq: u64 },
}

#[derive(Subcommand)]
enum IndexAction {
    /// Document count, entry count and height.
    Stats,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Bucket preservation per spelling-error type.
    Accuracy {
        #[arg(long, default_value_t = 100)]
        sample: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Proof size and probe counts against corpus size.
    Scaling {
        #[arg(long, value_delimiter = ',', default_value = "125,250,500,1000")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Per-function collision rates for near and far vector pairs.
    LshCalibrate {
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(path: &Path) -> Result<Config> {
    if !path.exists() {
        bail!("no configuration at {} (run `dvfs setup` first)", path.display());
    }
    Ok(Config::load_with_env(path)?)
}

fn open_system(path: &Path) -> Result<System> {
    let config = load_config(path)?;
    System::open(&config).with_context(|| format!("opening state for {}", path.display()))
}

/// LSH family from the configuration if there is one, else from `seed`.
fn bench_family(path: &Path, seed: u64) -> Result<LshFamily> {
    if path.exists() {
        return Ok(load_config(path)?.family()?);
    }
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_be_bytes());
    Ok(LshFamily::with_defaults(LshSeed(bytes)))
}

fn setup(path: &Path, dir: &Path, height: u8, k: usize, debug_journal: bool, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} already exists (use --force to replace it)", path.display());
    }
    let mut config = Config::generate(dir, &mut rand::rng());
    let base = Path::new(".");
    config.set("L", &height.to_string(), base)?;
    config.set("k", &k.to_string(), base)?;
    config.debug_journal = debug_journal;
    fs::create_dir_all(dir)?;
    fs::write(path, config.to_text())?;
    let system = System::open(&config)?;
    system.save()?;
    println!("wrote {}", path.display());
    println!("state directory {}", dir.display());
    println!("L = {}, k = {}", config.height.levels(), config.k);
    Ok(())
}

fn print_transcript_proof(t: &SearchTranscript) {
    for (tree, name) in [(TreeTag::Main, "main"), (TreeTag::Delete, "deletion")] {
        println!("{name} tree proof:");
        for p in &t.tree(tree).proofs {
            println!("  {:<34} {}", p.path.to_token(), u8::from(p.matched));
        }
    }
}

fn search(path: &Path, keywords: &[String], show_proof: bool, save: Option<&Path>) -> Result<ExitCode> {
    let mut system = open_system(path)?;
    let outcome = system.query(keywords)?;
    system.save()?;
    let t = &outcome.transcript;
    println!("transcript seq {}, report seq {}", outcome.transcript_seq, outcome.report_seq);
    println!("proof entries {}, probes {}", t.proof_len(), t.probes);
    if show_proof {
        print_transcript_proof(t);
    }
    println!("results ({}):", t.results.len());
    for ct in &outcome.ciphertexts {
        let preview = dvfs::crypto::decrypt_doc(system.key(), ct)
            .map(|p| {
                let text = String::from_utf8_lossy(&p);
                text.split_whitespace().take(12).collect::<Vec<_>>().join(" ")
            })
            .unwrap_or_else(|e| format!("<{e}>"));
        println!("  {:>8}  {preview}", ct.doc_id);
    }
    println!("{}", outcome.report);
    if let Some(dir) = save {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("transcript.txt"), t.to_text())?;
        for ct in &outcome.ciphertexts {
            fs::write(dir.join(format!("{}.ct", ct.doc_id)), &ct.body)?;
        }
        println!("saved transcript and {} ciphertexts to {}", outcome.ciphertexts.len(), dir.display());
    }
    Ok(if outcome.report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn verify(path: &Path, transcript: Option<&Path>, seq: Option<u64>, docs: Option<&Path>) -> Result<ExitCode> {
    let config = load_config(path)?;
    let mut system = System::open(&config)?;
    let transcript = match (transcript, seq) {
        (Some(file), None) => {
            let f = fs::File::open(file).with_context(|| format!("reading {}", file.display()))?;
            SearchTranscript::read_from(BufReader::new(f))?
        }
        (None, Some(seq)) => system.ledger().transcript(seq)?,
        (None, None) => match system.ledger().last_of(dvfs::ledger::RecordKind::SearchTranscript) {
            Some(seq) => system.ledger().transcript(seq)?,
            None => bail!("no transcript given and none on the ledger"),
        },
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    };
    let store = match docs {
        Some(dir) => DocumentStore::open(dir)?,
        None => DocumentStore::open(&config.doc_store_path)?,
    };
    let ciphertexts: Vec<Ciphertext> = store
        .sizes()
        .keys()
        .filter(|id| docs.is_some() || transcript.results.contains(id))
        .map(|&id| store.fetch(id))
        .collect::<dvfs::Result<_>>()?;
    let (seq, report) = system.verify(&VerifyInput {
        transcript,
        ciphertexts,
    })?;
    println!("report seq {seq}");
    println!("{report}");
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn repo_show(path: &Path, keyword: &str) -> Result<()> {
    let system = open_system(path)?;
    let bucket = system.bucket_of(keyword)?;
    println!("keyword  {keyword}");
    println!("stem     {}", dvfs::fuzzy::stem(keyword)?);
    println!("bucket   {bucket}");
    match system.local_repo().get(&bucket) {
        None => println!("state    never added"),
        Some(e) => {
            let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
            println!("version  {}", e.version);
            println!("queried  {}", e.queried);
            println!("n_add    {}", opt(e.last_added));
            println!("n_del    {}", opt(e.last_deleted));
        }
    }
    Ok(())
}

fn ledger_validate(path: &Path) -> Result<ExitCode> {
    let config = load_config(path)?;
    match Log::validate_file(&config.ledger_path) {
        Ok(n) => {
            println!("ledger ok: {n} records, hash chain intact");
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("ledger INVALID: {e}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn ledger_show(path: &Path, seq: u64) -> Result<()> {
    let config = load_config(path)?;
    let log = Log::open(&config.ledger_path)?;
    match log.get(seq) {
        Some(record) => println!("{record}"),
        None => bail!("no record {seq} (ledger has {})", log.len()),
    }
    Ok(())
}

fn index_stats(path: &Path) -> Result<()> {
    let system = open_system(path)?;
    let index = system.ledger().index();
    println!("n (documents)     {}", index.doc_count());
    println!("M (entries)       {}", index.entry_count());
    println!("  main tree       {}", index.tree_len(TreeTag::Main));
    println!("  deletion tree   {}", index.tree_len(TreeTag::Delete));
    println!("L (height)        {}", index.height().levels());
    println!("ledger records    {}", system.ledger().log().len());
    println!("chain records     {}", system.ledger().chain().len());
    println!("local repo        {} keywords", system.local_repo().len());
    Ok(())
}

fn bench(path: &Path, which: BenchCommand) -> Result<()> {
    let mut out = io::stdout().lock();
    match which {
        BenchCommand::Accuracy { sample, seed } => {
            let family = bench_family(path, seed)?;
            let rows = bench_accuracy(&family, sample, &ErrorType::ALL, seed)?;
            writeln!(out, "type  preserved  total  rate")?;
            for r in rows {
                writeln!(out, "{:<4}  {:>9}  {:>5}  {:>5.1}%", r.error, r.preserved, r.total, 100.0 * r.rate())?;
            }
        }
        BenchCommand::Scaling { counts, seed } => {
            let family = bench_family(path, seed)?;
            let key = MasterKey::generate(&mut StdRng::seed_from_u64(seed));
            let rows = bench_scaling(&key, &family, &counts, seed)?;
            writeln!(
                out,
                "query {:?}, {} matching documents at every n",
                SCALING_QUERY, SCALING_MATCHES
            )?;
            writeln!(
                out,
                "{:>6} {:>3} {:>7} {:>7} {:>3} {:>7} {:>7} {:>10} {:>10} {:>8} {:>8}",
                "n", "L", "ap_len", "probes", "|R|", "digests", "checks", "search_us", "verify_us", "add_hash", "add_pad"
            )?;
            for r in &rows {
                writeln!(
                    out,
                    "{:>6} {:>3} {:>7} {:>7} {:>3} {:>7} {:>7} {:>10} {:>10} {:>8} {:>8}",
                    r.n,
                    r.levels,
                    r.ap_len,
                    r.probes,
                    r.results,
                    r.digest_recomputations,
                    r.structural_checks,
                    r.search_time.as_micros(),
                    r.verify_time.as_micros(),
                    r.add_hash_evals,
                    r.add_padding
                )?;
            }
            if rows.len() >= 2 {
                for (name, points) in [
                    ("ap_len", rows.iter().map(|r| (r.n, r.ap_len as f64)).collect::<Vec<_>>()),
                    ("probes", rows.iter().map(|r| (r.n, r.probes as f64)).collect()),
                ] {
                    let fit = fit_log(&points);
                    writeln!(
                        out,
                        "{name}: {:.2} + {:.2}*log2(n), max relative residual {:.1}%, SSR log {:.1} vs linear {:.1}",
                        fit.c1,
                        fit.c2,
                        100.0 * fit.max_relative_residual,
                        fit.ssr_log,
                        fit.ssr_linear
                    )?;
                }
            }
        }
        BenchCommand::LshCalibrate { pairs, seed } => {
            let family = bench_family(path, seed)?;
            let r = lsh_calibrate(&family, pairs, seed)?;
            writeln!(out, "pairs {}, k {}, window {}", r.pairs, family.k(), family.window())?;
            writeln!(out, "fn  near(d<=sqrt3)  far(d>=2)")?;
            for (i, (n, f)) in r.near_rates.iter().zip(&r.far_rates).enumerate() {
                writeln!(out, "{i:>2}  {n:>14.4}  {f:>9.4}")?;
            }
            writeln!(out, "mean near {:.4}, mean far {:.4}", r.near_rate(), r.far_rate())?;
            writeln!(
                out,
                "at the boundary: d=sqrt3 {:.4}, d=2 {:.4}",
                r.boundary_near_rate, r.boundary_far_rate
            )?;
        }
    }
    Ok(())
}

fn adversary(mode: &str, seed: u64, docs: usize) -> Result<ExitCode> {
    let mode: AdversaryMode = mode.parse()?;
    let mut system = synthetic_system(docs, seed)?;
    let outcome = run_adversary(&mut system, mode, seed)?;
    println!("mode {}, query {:?}, target document {}", outcome.mode, outcome.query, outcome.target);
    println!("{}", outcome.report);
    let expected = match mode {
        AdversaryMode::None => outcome.report.passed(),
        _ => !outcome.report.passed(),
    };
    Ok(if expected { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let path = cli.config.as_path();
    match cli.command {
        Command::Setup {
            dir,
            height,
            k,
            debug_journal,
            force,
        } => setup(path, &dir, height, k, debug_journal, force)?,
        Command::Ingest { dir } => {
            let mut system = open_system(path)?;
            let report = system.ingest(&dir)?;
            system.save()?;
            for (file, reason) in &report.skipped {
                eprintln!("warning: skipped {}: {reason}", file.display());
            }
            let keywords: usize = report.indexed.iter().map(|a| a.keywords).sum();
            println!(
                "indexed {} documents ({keywords} keywords), skipped {}",
                report.indexed.len(),
                report.skipped.len()
            );
        }
        Command::Add { file, id } => {
            let mut system = open_system(path)?;
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let added = system.add_document(id, &text)?;
            system.save()?;
            println!(
                "document {}: {} keywords, {} hash evaluations, {} padding entries, {} version bumps",
                added.doc_id, added.keywords, added.hash_evals, added.padding, added.bumps
            );
        }
        Command::Del { doc_id, keyword } => {
            let mut system = open_system(path)?;
            let entries = system.delete_keyword(doc_id, &keyword)?;
            system.save()?;
            println!("removed {keyword:?} from document {doc_id} ({entries} deletion-tree entries)");
        }
        Command::Search {
            keywords,
            show_proof,
            save,
        } => return search(path, &keywords, show_proof, save.as_deref()),
        Command::Verify { transcript, seq, docs } => {
            return verify(path, transcript.as_deref(), seq, docs.as_deref())
        }
        Command::Repo {
            action: RepoAction::Show { keyword },
        } => repo_show(path, &keyword)?,
        Command::Ledger { action } => match action {
            LedgerAction::Validate => return ledger_validate(path),
            LedgerAction::Show { seq } => ledger_show(path, seq)?,
        },
        Command::Index {
            action: IndexAction::Stats,
        } => index_stats(path)?,
        Command::Bench { which } => bench(path, which)?,
        Command::Adversary { mode, seed, docs } => return adversary(&mode, seed, docs),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
