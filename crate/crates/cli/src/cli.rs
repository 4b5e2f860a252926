use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use profile_gender::analysis::{
    bundled_profession_pairs, gender_corpora, read_profession_pairs, stats_report, top_valence_words, valence,
    write_stats_tsv, write_valence_tsv, StatsOptions, DEFAULT_MIN_TOTAL, DEFAULT_VALENCE_THRESHOLD,
};
use profile_gender::classifier::{Hyperparams, DEFAULT_CONFIDENCE_TAU};
use profile_gender::dataset::{anonymize, parse_profiles, write_profiles, UserProfile};
use profile_gender::eval::{
    apply_split, majority_baseline, read_split, run_experiment, train_model, write_report_tsv, ExperimentConfig,
};
use profile_gender::features::{FeatureSet, TweetMode};
use profile_gender::geo::{map_location, Gazetteer};
use profile_gender::lexicon::{build_lexicon, match_description, write_candidates, ExceptionTables, ExclusionList, Lexicon};
use profile_gender::network::combined_predict;
use profile_gender::{GenderLabel, GenderModel};

use crate::service;

#[derive(Debug, Parser)]
#[command(name = "profile-gender", version, about = "Gender and location inference for Arabic social-media profiles")]
struct Cli {
    /// Seed for every random choice (shuffling, calibration split).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Features {
    Usernames,
    Description,
    Tweets,
    All,
}

impl From<Features> for FeatureSet {
    fn from(f: Features) -> Self {
        match f {
            Features::Usernames => FeatureSet::Usernames,
            Features::Description => FeatureSet::Description,
            Features::Tweets => FeatureSet::Tweets,
            Features::All => FeatureSet::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tweets {
    Aggregate,
    Single,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = Features::Usernames)]
    features: Features,
    #[arg(long, value_enum, default_value_t = Tweets::Aggregate)]
    tweets: Tweets,
    /// Regularization strength.
    #[arg(long, default_value_t = Hyperparams::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = Hyperparams::default().epochs)]
    epochs: u32,
    /// Minimum document frequency for n-grams (default depends on the field).
    #[arg(long)]
    min_df: Option<usize>,
}

impl TrainArgs {
    fn config(&self, seed: u64, train_set: String) -> ExperimentConfig {
        ExperimentConfig {
            train_set,
            feature_set: self.features.into(),
            tweet_mode: match self.tweets {
                Tweets::Aggregate => TweetMode::Aggregate,
                Tweets::Single => TweetMode::Single,
            },
            min_df: self.min_df,
            hyperparams: Hyperparams { lambda: self.lambda, epochs: self.epochs, seed },
            ..Default::default()
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bootstrap the gender-marker lexicon from profile descriptions.
    BuildLexicon {
        #[arg(long = "in")]
        input: PathBuf,
        /// Lexicon TSV; candidates and exclusions are written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_count: u64,
        /// Directory with replacement exception lists.
        #[arg(long)]
        exceptions: Option<PathBuf>,
    },
    /// Set gold gender from the lexicon and gold country from the gazetteer.
    Label {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        exclusions: Option<PathBuf>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Train and calibrate a model.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train on one set, score another, print a results row.
    Evaluate {
        #[arg(long, required_unless_present = "split")]
        train: Option<PathBuf>,
        #[arg(long, required_unless_present = "split")]
        test: Option<PathBuf>,
        /// `user_id<TAB>train|test` file selecting from --in.
        #[arg(long, requires = "input")]
        split: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[command(flatten)]
        train_args: TrainArgs,
        /// Also print the majority-baseline row.
        #[arg(long)]
        baseline: bool,
        /// Write the rows (with header) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the JSON detail report here.
        #[arg(long)]
        detail: Option<PathBuf>,
    },
    /// Predict the gender for a name, or for every profile in a file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        name: Option<String>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Use the friend vote when p(Male) is below this value.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Tweet-word valence scores by gender.
    Valence {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_TOTAL)]
        min_count: u64,
        #[arg(long, default_value_t = DEFAULT_VALENCE_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Descriptive statistics as TSV reports.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Label Unknown-gender profiles with this lexicon.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, requires = "lexicon")]
        exclusions: Option<PathBuf>,
        /// Profession pairs TSV (masculine, feminine, domain).
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Serve POST /predict and GET /health.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Replace user ids and screen names with pseudonyms.
    Anonymize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// File whose bytes key the screen-name hash.
        #[arg(long)]
        secret_file: PathBuf,
    },
}

/// Runs the command line `argv` (program name first). Returns the exit
/// code: 0 on success, 1 on runtime failure, 2 on usage errors.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return e.exit_code();
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn read_profiles(path: &Path, err: &mut dyn Write) -> Result<Vec<UserProfile>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let parsed = parse_profiles(BufReader::new(file)).with_context(|| format!("cannot read {}", path.display()))?;
    for d in &parsed.diagnostics {
        writeln!(err, "warning: {}: {d}", path.display())?;
    }
    Ok(parsed.profiles)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn load_model(path: &Path) -> Result<GenderModel> {
    GenderModel::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn load_exclusions(path: Option<&Path>) -> Result<ExclusionList> {
    match path {
        None => Ok(ExclusionList::default()),
        Some(p) => {
            let file = fs::File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
            Ok(ExclusionList::from_reader(file)?)
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::BuildLexicon { input, out: path, min_count, exceptions } => {
            let profiles = read_profiles(&input, err)?;
            let tables = match exceptions {
                Some(dir) => ExceptionTables::load_dir(&dir)?,
                None => ExceptionTables::bundled(),
            };
            let build = build_lexicon(&profiles, min_count, &tables)?;
            let mut f = create(&path)?;
            build.lexicon.write_tsv(&mut f)?;
            f.flush()?;
            let cand_path = sibling(&path, "candidates.tsv");
            let mut f = create(&cand_path)?;
            write_candidates(&mut f, &build.candidates)?;
            f.flush()?;
            let excl_path = sibling(&path, "exclusions.txt");
            let mut f = create(&excl_path)?;
            build.exclusions.write_to(&mut f)?;
            f.flush()?;
            writeln!(
                out,
                "{} entries, {} candidates, {} exclusions",
                build.lexicon.len(),
                build.candidates.len(),
                build.exclusions.len()
            )?;
        }
        Command::Label { input, out: path, lexicon, exclusions, gazetteer } => {
            let mut profiles = read_profiles(&input, err)?;
            let lexicon = Lexicon::load(&lexicon).with_context(|| format!("cannot load lexicon {}", lexicon.display()))?;
            let exclusions = load_exclusions(exclusions.as_deref())?;
            let gaz = match gazetteer {
                Some(p) => Gazetteer::load(&p).with_context(|| format!("cannot load gazetteer {}", p.display()))?,
                None => Gazetteer::bundled(),
            };
            let mut labelled = 0;
            for p in &mut profiles {
                p.gold_gender = match_description(&p.description, &lexicon, &exclusions);
                labelled += p.gold_gender.is_known() as usize;
                p.gold_country = map_location(&p.location_raw, &gaz);
            }
            let mut f = create(&path)?;
            write_profiles(&mut f, &profiles)?;
            f.flush()?;
            writeln!(out, "{labelled} of {} profiles labelled", profiles.len())?;
        }
        Command::Train { input, out: path, train } => {
            let profiles: Vec<UserProfile> =
                read_profiles(&input, err)?.into_iter().filter(|p| p.gold_gender.is_known()).collect();
            let config = train.config(seed, input.display().to_string());
            let model = train_model(&profiles, &config)?;
            model.save(&path).with_context(|| format!("cannot write {}", path.display()))?;
            writeln!(out, "{}\tobjective {}\t{} examples", model.version(), model.meta.objective, model.meta.n_examples)?;
        }
        Command::Evaluate { train, test, split, input, train_args, baseline, out: out_path, detail } => {
            let (train_set, test_set, name) = match (split, input) {
                (Some(split), Some(input)) => {
                    let profiles = read_profiles(&input, err)?;
                    let file = fs::File::open(&split).with_context(|| format!("cannot open {}", split.display()))?;
                    let map = read_split(BufReader::new(file))?;
                    let (a, b) = apply_split(&profiles, &map);
                    (a, b, input.display().to_string())
                }
                _ => {
                    let (train, test) = (train.expect("required by clap"), test.expect("required by clap"));
                    (read_profiles(&train, err)?, read_profiles(&test, err)?, train.display().to_string())
                }
            };
            let config = train_args.config(seed, name);
            let mut reports = Vec::new();
            if baseline {
                let gold = |ps: &[UserProfile]| ps.iter().map(|p| p.gold_gender).collect::<Vec<_>>();
                reports.push(majority_baseline(&gold(&train_set), &gold(&test_set))?);
            }
            let outcome = run_experiment(&train_set, &test_set, &config)?;
            reports.push(outcome.report);
            for r in &reports {
                writeln!(out, "{}", r.tsv_row())?;
            }
            if let Some(p) = out_path {
                let mut f = create(&p)?;
                write_report_tsv(&mut f, &reports)?;
                f.flush()?;
            }
            if let Some(p) = detail {
                let last = reports.last().expect("one report");
                fs::write(&p, last.to_json() + "\n").with_context(|| format!("cannot write {}", p.display()))?;
            }
        }
        Command::Predict { model, name, input, tau } => {
            let model = load_model(&model)?;
            if let Some(name) = name {
                let Some((label, prob)) = service::predict_name(&model, &name) else {
                    bail!("name must not be empty");
                };
                writeln!(out, "{label}\t{prob}")?;
            } else if let Some(input) = input {
                let tau = tau.unwrap_or(DEFAULT_CONFIDENCE_TAU);
                for p in read_profiles(&input, err)? {
                    let c = combined_predict(&p, &model, tau);
                    let prob = match c.label {
                        GenderLabel::Female => 1.0 - c.classifier.p_male,
                        _ => c.classifier.p_male,
                    };
                    let source = if c.label == c.classifier.label { "classifier" } else { "friends" };
                    writeln!(out, "{}\t{}\t{prob}\t{source}", p.user_id, c.label)?;
                }
            }
        }
        Command::Valence { input, out: path, min_count, threshold, top } => {
            let profiles = read_profiles(&input, err)?;
            let corpora = gender_corpora(&profiles, |p| p.gold_gender);
            let scores = valence(&corpora, min_count)?;
            let mut f = create(&path)?;
            write_valence_tsv(&mut f, &scores)?;
            f.flush()?;
            for (cat, label) in [("m", "male"), ("f", "female")] {
                for t in top_valence_words(&scores, cat, threshold, top) {
                    writeln!(out, "{label}\t{}\t{:.3}\t{}", t.token, t.score, t.count)?;
                }
            }
        }
        Command::Stats { input, out: dir, lexicon, exclusions, pairs, top } => {
            let profiles = read_profiles(&input, err)?;
            let lexicon = lexicon
                .map(|p| Lexicon::load(&p).with_context(|| format!("cannot load lexicon {}", p.display())))
                .transpose()?;
            let exclusions = load_exclusions(exclusions.as_deref())?;
            let pairs = match pairs {
                Some(p) => {
                    let file = fs::File::open(&p).with_context(|| format!("cannot open {}", p.display()))?;
                    read_profession_pairs(BufReader::new(file))?
                }
                None => bundled_profession_pairs(),
            };
            let opts = StatsOptions { lexicon: lexicon.as_ref().map(|l| (l, &exclusions)), pairs: &pairs, top_k: top };
            let report = stats_report(&profiles, &opts);
            for p in write_stats_tsv(&report, &dir).with_context(|| format!("cannot write to {}", dir.display()))? {
                writeln!(out, "{}", p.display())?;
            }
        }
        Command::Serve { model, bind } => {
            let model = load_model(&model)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(bind, model)).with_context(|| format!("cannot serve on {bind}"))?;
        }
        Command::Anonymize { input, out: path, secret_file } => {
            let profiles = read_profiles(&input, err)?;
            let secret = fs::read(&secret_file).with_context(|| format!("cannot read {}", secret_file.display()))?;
            if secret.is_empty() {
                bail!("secret file {} is empty", secret_file.display());
            }
            let mut f = create(&path)?;
            write_profiles(&mut f, &anonymize(&profiles, &secret))?;
            f.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(std::iter::once("profile-gender").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(&["frobnicate"]).0, 2);
        assert_eq!(run(&["predict", "--model", "m.bin", "--name", "x", "--bogus"]).0, 2);
        assert_eq!(run(&["train", "--in", "a", "--out", "b", "--features", "emoji"]).0, 2);
        assert_eq!(run(&[]).0, 2);
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("build-lexicon") && out.contains("serve"));
    }

    #[test]
    fn missing_files_exit_1() {
        let (code, _, err) = run(&["predict", "--model", "/nonexistent/m.bin", "--name", "x"]);
        assert_eq!(code, 1);
        assert!(err.contains("/nonexistent/m.bin"), "{err}");
        assert_eq!(run(&["stats", "--in", "/nonexistent.jsonl", "--out", "/tmp/x"]).0, 1);
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("/a/lex.tsv"), "candidates.tsv"), PathBuf::from("/a/lex.candidates.tsv"));
    }
}
