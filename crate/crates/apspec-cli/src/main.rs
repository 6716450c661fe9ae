//! Command-line front end: parse substitution or slope inputs, run the
//! analysis pipeline, and emit deterministic plain-text reports plus
//! plot-ready TSV tables. Identical invocations produce byte-identical
//! output: no timestamps, fixed float precision, ordered tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apspec_core::{
    assemble_form, binary_branching_counts, build_substitution_graph, build_tree,
    check_delta_conditions, closed_form_zeta, complexity_exponents, complexity_table, count_h_n,
    eigensystem, estimate_abscissa, frequencies, horizontal_edges, k_matrix_for_graph,
    laplacian_eigenvalue, leftmost_longitudinal, lifted_microtile_vector, lifted_return_vector,
    make_choice, maximal_fundamental, mc_agreement, measure_pairings, metric_report,
    microtile_vector, monte_carlo_form, nontriviality_check, order_criterion, parse_homomorphism_tsv,
    partial_zeta, path_tree, path_tree_measure, phase_condition, phi_residuals, pisot_data,
    realize_with_choice, render_eigen_rows, render_homomorphism_tsv, render_nontriviality,
    render_pisot_block, render_realization_tsv, return_vector, self_similar_choice,
    self_similar_edges, sturmian_word_measure, tile_geometry_f64, tile_geometry_quad, word_measure,
    ChoiceRule, ChoiceWeights, DiracSpectrum, EdgeScheme, EigenRow, Error, Flavor, GraphPath,
    LanguageOracle, LengthFunction, MetricForm, PairingInput, PrivilegedSet, Result, SturmianSlope,
    Substitution, Tail, TailBound, Word, WordTree,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "apspec",
    version,
    about = "Spectral-triple toolkit for subshifts and one-dimensional substitution tilings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full report: matrix and Perron data, Pisot check, complexity,
    /// privileged words, metric dimension, spectral measure
    Analyze {
        /// Substitution file: lines of the form "letter -> image"
        input: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Zeta function: exact level counts, closed form at geometric lengths,
    /// truncated values with tail bounds
    Zeta {
        input: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Assemble the choice-averaged Laplacian form, check its exact
    /// eigenvectors, and write the spectrum
    Laplacian {
        input: PathBuf,
        /// Form exponent s
        #[arg(long, default_value_t = 4.0)]
        s: f64,
        /// Monte-Carlo cross-check samples (0 = skip)
        #[arg(long, default_value_t = 0)]
        mc: usize,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Extremal boundary distances d_inf and d_sup with their ratio
    Distance {
        input: PathBuf,
        /// Random boundary pairs sampled on top of the sibling pairs
        #[arg(long, default_value_t = 32)]
        pairs: usize,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Lipschitz-order trend of max d_sup/d_inf across a depth ladder
    /// (default depth 256)
    Order {
        input: PathBuf,
        /// Random boundary pairs sampled on top of the sibling pairs
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// K-homology pairings: measure the index homomorphism, realize targets,
    /// verify round trips
    Khom {
        /// Substitution file (defaults to the Fibonacci rule a -> ab, b -> a)
        input: Option<PathBuf>,
        /// Realize a target homomorphism from a TSV file of "word<TAB>value" rows
        #[arg(long)]
        realize: Option<PathBuf>,
        /// After realizing, re-measure the pairing and require equality
        #[arg(long, requires = "realize")]
        verify: bool,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Sturmian slope from partial quotients: complexity, measure, order trend
    /// (default depth 256)
    Sturmian {
        /// Partial quotients a_1 a_2 ...; continued beyond the list per --tail
        #[arg(required = true)]
        quotients: Vec<u32>,
        /// Continue the quotient list: cycle | last
        #[arg(long, default_value = "cycle")]
        tail: String,
        /// Run the order-trend criterion
        #[arg(long)]
        order: bool,
        /// Random boundary pairs for the order criterion
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Algebraic Pisot data, phase condition, and the Dirichlet-form
    /// eigenvalue table
    Pisot {
        input: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Args)]
struct CommonOpts {
    /// Truncation depth (default 8; `order` and `sturmian` default to 256)
    #[arg(long)]
    depth: Option<usize>,
    /// Length function: "recip" (edge level l gets 1/l) or "geom:RHO"
    #[arg(long, default_value = "recip")]
    delta: String,
    /// Shorthand for --delta geom:RHO
    #[arg(long)]
    rho: Option<f64>,
    /// Horizontal edge scheme: max | min | priv | selfsim
    #[arg(long, default_value = "max")]
    scheme: String,
    /// Choice function for pairings: leftmost | weighted
    #[arg(long, default_value = "leftmost")]
    choice: String,
    /// Seed for every stochastic step
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for report.txt and the TSV tables (stdout always gets the report)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Resolved run configuration; every numeric field is validated on parse.
struct AnalysisConfig {
    depth: usize,
    delta: LengthFunction,
    delta_name: String,
    /// Geometric scale when the length function is geometric.
    rho: Option<f64>,
    scheme: EdgeScheme,
    scheme_name: String,
    choice: ChoiceRule,
    choice_name: String,
    seed: u64,
    out: Option<PathBuf>,
    threads: usize,
}

impl AnalysisConfig {
    fn resolve(opts: &CommonOpts, default_depth: usize) -> Result<AnalysisConfig> {
        let depth = opts.depth.unwrap_or(default_depth);
        if depth < 1 {
            return Err(Error::Invalid("depth must be at least 1".into()));
        }
        let (delta, delta_name, rho) = if let Some(r) = opts.rho {
            if opts.delta != "recip" {
                return Err(Error::Invalid(
                    "--rho is a shorthand for --delta geom:RHO; pass only one of them".into(),
                ));
            }
            check_rho(r)?;
            (LengthFunction::Geometric(r), format!("geom rho={r}"), Some(r))
        } else if opts.delta == "recip" {
            (LengthFunction::Reciprocal, "recip (1/(n+1))".to_string(), None)
        } else if let Some(rest) = opts.delta.strip_prefix("geom:") {
            let r: f64 = rest
                .parse()
                .map_err(|_| Error::Invalid(format!("cannot parse '{rest}' as a scale in (0,1)")))?;
            check_rho(r)?;
            (LengthFunction::Geometric(r), format!("geom rho={r}"), Some(r))
        } else {
            return Err(Error::Invalid(format!(
                "unknown length function '{}'; expected recip or geom:RHO",
                opts.delta
            )));
        };
        let scheme = match opts.scheme.as_str() {
            "max" => EdgeScheme::Maximal,
            "min" => EdgeScheme::Minimal,
            "priv" => EdgeScheme::Privileged,
            "selfsim" => EdgeScheme::SelfSimilar,
            other => {
                return Err(Error::Invalid(format!(
                    "unknown edge scheme '{other}'; expected max, min, priv or selfsim"
                )))
            }
        };
        let choice = match opts.choice.as_str() {
            "leftmost" => ChoiceRule::Leftmost,
            "weighted" => ChoiceRule::WeightedOnce { seed: opts.seed },
            other => {
                return Err(Error::Invalid(format!(
                    "unknown choice rule '{other}'; expected leftmost or weighted"
                )))
            }
        };
        let threads = match std::env::var("APSPEC_THREADS") {
            Err(_) => 1,
            Ok(raw) => raw.trim().parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| {
                Error::Invalid(format!("APSPEC_THREADS must be a positive integer, got '{raw}'"))
            })?,
        };
        Ok(AnalysisConfig {
            depth,
            delta,
            delta_name,
            rho,
            scheme,
            scheme_name: opts.scheme.clone(),
            choice,
            choice_name: opts.choice.clone(),
            seed: opts.seed,
            out: opts.out.clone(),
            threads,
        })
    }

    fn header(&self, cmd: &str, input: &str) -> String {
        format!(
            "apspec {cmd}\ninput: {input}\ndepth: {}\ndelta: {}\nscheme: {}\nchoice: {}\nseed: {}\nthreads: {}\n",
            self.depth, self.delta_name, self.scheme_name, self.choice_name, self.seed, self.threads
        )
    }
}

fn check_rho(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Invalid(format!("geometric scale rho = {r} must lie in (0, 1)")));
    }
    Ok(())
}

/// A finished report: the text that goes to stdout and report.txt, plus the
/// named TSV tables written next to it under --out.
struct Report {
    text: String,
    files: Vec<(&'static str, String)>,
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    print!("{}", report.text);
    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", dir.display())))?;
        let mut targets = vec![("report.txt", &report.text)];
        targets.extend(report.files.iter().map(|(n, b)| (*n, b)));
        for (name, body) in targets {
            let path = dir.join(name);
            fs::write(&path, body)
                .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    Ok(())
}

fn load_substitution(path: &Path) -> Result<Substitution> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    Substitution::parse(&text)
}

fn word_pipeline(
    sub: &Substitution,
    cfg: &AnalysisConfig,
) -> Result<(LanguageOracle, WordTree)> {
    let oracle = LanguageOracle::from_substitution(sub, cfg.depth + 2)?;
    let tree = build_tree(&oracle, cfg.depth)?;
    Ok((oracle, tree))
}

fn join_u64(xs: &[u64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn render_privileged_tsv(sub: &Substitution, set: &PrivilegedSet) -> String {
    let mut s = String::from("order\tword\n");
    for (ord, words) in set.by_order.iter().enumerate() {
        for w in words {
            let _ = writeln!(s, "{ord}\t{}", sub.alphabet().render(w));
        }
    }
    s
}

fn render_tail(tail: &TailBound) -> String {
    match tail {
        TailBound::Geometric(b) => format!("{b:.3e} (geometric)"),
        TailBound::Heuristic(b) => format!("{b:.3e} (heuristic)"),
        TailBound::Divergent => "divergent".into(),
        TailBound::Unknown => "unknown".into(),
    }
}

/// Deep word-tree abscissa for two-letter languages: branching counts follow
/// the complexity profile exactly, so levels far beyond any built tree are
/// available from the suffix automaton alone.
fn binary_abscissa_line(sub: &Substitution, levels: usize) -> Result<String> {
    let deep = LanguageOracle::from_substitution(sub, levels + 1)?;
    let p = deep.complexity(levels)?;
    let mut pfull = vec![1u64];
    pfull.extend(&p);
    let counts = binary_branching_counts(&pfull, &LengthFunction::Reciprocal)?;
    let est = estimate_abscissa(&counts)?;
    let mut s = format!("s0 = {:.3} (word tree, delta 1/(n+1), levels {levels})\n", est.best());
    let _ = writeln!(
        s,
        "abscissa estimators: limsup {:.3}, regression {:.3}, disagreement {} (levels {levels})",
        est.limsup_slope,
        est.regression,
        if est.disagreement { "yes" } else { "no" }
    );
    Ok(s)
}

fn cmd_analyze(input: &Path, cfg: &AnalysisConfig) -> Result<Report> {
    let sub = load_substitution(input)?;
    sub.require_primitive()?;
    let mut text = cfg.header("analyze", &input.display().to_string());
    let mut files: Vec<(&'static str, String)> = Vec::new();

    let perron = sub.perron()?;
    let ab = sub.alphabet().clone();
    text.push_str("\n[substitution]\n");
    let _ = writeln!(text, "rule: {}", sub.render_inline());
    let _ = writeln!(
        text,
        "alphabet: {}",
        ab.letters().map(|l| ab.symbol(l).to_string()).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(
        text,
        "occurrence matrix (entry[v][w] = count of v in image of w): {:?}",
        sub.matrix()
    );
    let _ = writeln!(text, "lambda_PF = {:.6}", perron.lambda);
    let freq_line = ab
        .letters()
        .map(|l| format!("{} {:.6}", ab.symbol(l), perron.right[l as usize]))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(text, "letter frequencies: {freq_line}");
    let len_line = ab
        .letters()
        .map(|l| format!("{} {:.6}", ab.symbol(l), perron.left[l as usize]))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(text, "tile lengths: {len_line}");
    text.push_str("primitive: yes\n");

    let verdict = pisot_data(&sub)?;
    let phase = verdict.data().map(phase_condition);
    text.push_str("\n[pisot]\n");
    text.push_str(&render_pisot_block(&verdict, phase.as_ref()));

    let n_max = cfg.depth.max(8);
    let oracle_cx = LanguageOracle::from_substitution(&sub, n_max + 2)?;
    let table = complexity_table(&oracle_cx, n_max)?;
    text.push_str("\n[complexity]\n");
    let _ = writeln!(text, "p(n) for n = 1..{n_max}: {}", join_u64(&table.p));
    let _ = writeln!(text, "right-special counts for n = 1..{n_max}: {}", join_u64(&table.right_special));
    let mut pfull = vec![1u64];
    pfull.extend(&table.p);
    let (lo, hi) = complexity_exponents(&pfull)?;
    let _ = writeln!(
        text,
        "complexity exponents over n in [{}, {}]: lower {lo:.3}, upper {hi:.3}",
        pfull.len() / 2,
        pfull.len() - 1
    );
    files.push(("complexity.tsv", table.render_tsv()));

    let len_bound = (n_max + 2).min(oracle_cx.max_len());
    let privileged = apspec_core::privileged_words(&oracle_cx, 4, len_bound)?;
    text.push_str("\n[privileged]\n");
    let counts: Vec<String> =
        privileged.by_order.iter().map(|lvl| lvl.len().to_string()).collect();
    let _ = writeln!(
        text,
        "privileged words per order 0..{} (length bound {len_bound}): {}",
        privileged.by_order.len() - 1,
        counts.join(" ")
    );
    if privileged.bound_limited {
        text.push_str("note: some complete first returns exceeded the length bound\n");
    }
    files.push(("privileged.tsv", render_privileged_tsv(&sub, &privileged)));

    text.push_str("\n[metric dimension]\n");
    let graph = build_substitution_graph(&sub);
    let fund = maximal_fundamental(&graph, Flavor::Transverse);
    match cfg.rho {
        Some(rho) => {
            let zf = closed_form_zeta(&graph, &fund, rho)?;
            let _ = writeln!(
                text,
                "s0 = {:.3} (closed form, rho {rho}, counts verified to depth {})",
                zf.s0,
                cfg.depth.min(30)
            );
            let mut hn = String::from("n\tcount\n");
            let mut all_match = true;
            for n in 1..=cfg.depth.min(30) {
                let direct = count_h_n(&graph, &fund, n)?;
                let from_form: f64 = zf
                    .eval_counts_probe(n)
                    .unwrap_or(f64::NAN);
                if !((from_form - direct as f64).abs() <= 1e-6 * (direct as f64).max(1.0)) {
                    all_match = false;
                }
                let _ = writeln!(hn, "{n}\t{direct}");
            }
            let _ = writeln!(
                text,
                "#H_n closed form vs direct counts (n <= {}): {}",
                cfg.depth.min(30),
                if all_match { "match" } else { "MISMATCH" }
            );
            files.push(("hn.tsv", hn));
            for line in zf.render_report().lines() {
                let _ = writeln!(text, "  {line}");
            }
        }
        None => {
            if ab.size() == 2 {
                text.push_str(&binary_abscissa_line(&sub, 10_000)?);
            } else {
                let (oracle, tree) = word_pipeline(&sub, cfg)?;
                let scheme = if cfg.scheme == EdgeScheme::SelfSimilar {
                    EdgeScheme::Maximal
                } else {
                    cfg.scheme
                };
                let edges = horizontal_edges(&tree, &oracle, scheme, &cfg.delta, cfg.depth)?;
                let spectrum = DiracSpectrum::from_edges(&edges)?;
                let est = estimate_abscissa(&spectrum.eigenvalues())?;
                let _ = writeln!(
                    text,
                    "s0 = {:.3} (word tree, maximal pairs, depth {})",
                    est.best(),
                    cfg.depth
                );
            }
        }
    }

    let (_oracle, tree) = word_pipeline(&sub, cfg)?;
    let measure = word_measure(&tree, &sub)?;
    measure.validate(&tree, 1e-9)?;
    text.push_str("\n[spectral measure]\n");
    let marginals = ab
        .letters()
        .filter_map(|l| {
            tree.find(&Word::letter(l))
                .map(|v| format!("mu[{}] = {:.6}", ab.symbol(l), measure.mu(v)))
        })
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(text, "{marginals} (depth {})", cfg.depth);
    let exact = tree
        .find(&Word::letter(0))
        .and_then(|v| measure.mu_exact(v))
        .is_some();
    let _ = writeln!(
        text,
        "exact quadratic cylinder values: {} (depth {})",
        if exact { "yes (see measure.tsv)" } else { "no" },
        cfg.depth
    );
    let _ = writeln!(text, "additivity validated at depth {}: ok", cfg.depth);
    files.push(("measure.tsv", measure.render_measure_tsv(&tree)));

    Ok(Report { text, files })
}

fn cmd_zeta(input: &Path, cfg: &AnalysisConfig) -> Result<Report> {
    let sub = load_substitution(input)?;
    sub.require_primitive()?;
    let mut text = cfg.header("zeta", &input.display().to_string());
    let mut files: Vec<(&'static str, String)> = Vec::new();

    let graph = build_substitution_graph(&sub);
    let fund = maximal_fundamental(&graph, Flavor::Transverse);
    let n_counts = cfg.depth.min(60);
    let mut counts = Vec::with_capacity(n_counts);
    let mut hn = String::from("n\tcount\n");
    for n in 1..=n_counts {
        let c = count_h_n(&graph, &fund, n)?;
        let _ = writeln!(hn, "{n}\t{c}");
        counts.push(c);
    }
    files.push(("hn.tsv", hn));
    let _ = writeln!(
        text,
        "\n#H_n for n = 1..{n_counts}: {}",
        counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    );

    match cfg.rho {
        Some(rho) => {
            let zf = closed_form_zeta(&graph, &fund, rho)?;
            for line in zf.render_report().lines() {
                let _ = writeln!(text, "{line}");
            }
            let mut grid = String::from("s\tzeta\n");
            for ds in [0.1, 0.25, 0.5, 1.0, 2.0] {
                let s = zf.s0 + ds;
                let truncated: f64 =
                    counts.iter().enumerate().map(|(i, &c)| c as f64 * rho.powf(s * (i + 1) as f64)).sum();
                let tail = zf.tail(s, n_counts);
                let _ = writeln!(grid, "{s:.6}\t{:.6}", truncated + tail);
                let _ = writeln!(
                    text,
                    "zeta(s0 + {ds}) = {:.6} (sum to depth {n_counts} = {truncated:.6}, exact tail = {tail:.3e})",
                    truncated + tail
                );
            }
            files.push(("zeta_grid.tsv", grid));
        }
        None => {
            let (oracle, tree) = word_pipeline(&sub, cfg)?;
            let scheme = if cfg.scheme == EdgeScheme::SelfSimilar {
                EdgeScheme::Maximal
            } else {
                cfg.scheme
            };
            let edges = horizontal_edges(&tree, &oracle, scheme, &cfg.delta, cfg.depth)?;
            let spectrum = DiracSpectrum::from_edges(&edges)?;
            let unoriented = spectrum.unoriented()?;
            let est = estimate_abscissa(&unoriented.eigenvalues())?;
            let _ = writeln!(
                text,
                "abscissa estimate: limsup {:.3}, regression {:.3} (depth {})",
                est.limsup_slope, est.regression, cfg.depth
            );
            if sub.alphabet().size() == 2 {
                text.push_str(&binary_abscissa_line(&sub, 10_000)?);
            }
            let mut grid = String::from("s\tvalue\ttail\tlevels\n");
            for ds in [0.25, 0.5, 1.0, 2.0] {
                let s = est.best() + ds;
                let pz = partial_zeta(&unoriented, s, cfg.depth, None);
                let _ = writeln!(grid, "{s:.6}\t{:.6}\t{}\t{}", pz.value, render_tail(&pz.tail), pz.levels_used);
                let _ = writeln!(
                    text,
                    "zeta(s0 + {ds}) = {:.6} truncated (tail {}, depth {})",
                    pz.value,
                    render_tail(&pz.tail),
                    pz.levels_used
                );
            }
            files.push(("zeta_grid.tsv", grid));
        }
    }
    Ok(Report { text, files })
}

fn cmd_laplacian(input: &Path, s: f64, mc: usize, cfg: &AnalysisConfig) -> Result<Report> {
    let sub = load_substitution(input)?;
    sub.require_primitive()?;
    let mut text = cfg.header("laplacian", &input.display().to_string());
    let mut files: Vec<(&'static str, String)> = Vec::new();
    if !s.is_finite() {
        return Err(Error::Invalid(format!("form exponent s = {s} must be finite")));
    }

    let (tree, edges, measure) = if cfg.scheme == EdgeScheme::SelfSimilar {
        let graph = build_substitution_graph(&sub);
        let (tree, _oracle) = path_tree(&graph, cfg.depth + 1)?;
        let fund = maximal_fundamental(&graph, Flavor::Transverse);
        let edges = self_similar_edges(&tree, &graph, &fund, &cfg.delta, cfg.depth)?;
        let measure = path_tree_measure(&tree, &graph)?;
        (tree, edges, measure)
    } else {
        let (oracle, tree) = word_pipeline(&sub, cfg)?;
        let edges = horizontal_edges(&tree, &oracle, cfg.scheme, &cfg.delta, cfg.depth)?;
        let measure = word_measure(&tree, &sub)?;
        (tree, edges, measure)
    };

    let form = assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, s, cfg.depth)?;
    let _ = writeln!(
        text,
        "\nform: s = {s}, dim = {}, edges used = {} (depth {})",
        form.dim(),
        form.edges_used,
        cfg.depth
    );
    let ones = vec![1.0; form.dim()];
    let q1 = form.quadratic(&ones);
    let _ = writeln!(text, "constants in kernel: Q(1,1) = {q1:.3e} (depth {})", cfg.depth);

    let checks = phi_residuals(&tree, &form)?;
    let max_resid = checks.iter().map(|c| c.residual).fold(0.0f64, f64::max);
    let _ = writeln!(
        text,
        "sibling difference candidates: {}, max eigen residual = {max_resid:.3e} (depth {})",
        checks.len(),
        cfg.depth
    );

    let eig = eigensystem(&form, &tree)?;
    let _ = writeln!(
        text,
        "eigenvalues: min = {:.6e}, max = {:.6e}, count = {} (depth {})",
        eig.eigenvalues.first().copied().unwrap_or(0.0),
        eig.max_eigenvalue(),
        eig.eigenvalues.len(),
        cfg.depth
    );
    files.push(("eigen.tsv", eig.render_tsv(&tree)));

    if mc > 0 {
        let mcf = monte_carlo_form(
            &tree,
            &edges,
            &measure,
            ChoiceWeights::Conditional,
            s,
            cfg.depth,
            mc,
            cfg.seed,
        )?;
        let agr = mc_agreement(&mcf, &form);
        let _ = writeln!(
            text,
            "monte carlo: {mc} samples (seed {}), max deviation = {:.2} sigma at entry {:?}, 3-sigma {} (depth {})",
            cfg.seed,
            agr.max_sigmas,
            agr.worst_entry,
            if agr.pass { "pass" } else { "FAIL" },
            cfg.depth
        );
    }
    Ok(Report { text, files })
}

fn cmd_distance(input: &Path, pairs: usize, cfg: &AnalysisConfig) -> Result<Report> {
    let sub = load_substitution(input)?;
    sub.require_primitive()?;
    let mut text = cfg.header("distance", &input.display().to_string());
    let mut files: Vec<(&'static str, String)> = Vec::new();

    let (_oracle, tree) = word_pipeline(&sub, cfg)?;
    let form = if cfg.scheme == EdgeScheme::Privileged {
        MetricForm::Privileged
    } else {
        MetricForm::Tree
    };
    let report = metric_report(&tree, form, &cfg.delta, pairs, cfg.seed)?;
    let _ = writeln!(text, "\npairs evaluated: {} (depth {})", report.pairs.len(), report.depth);
    let _ = writeln!(text, "max d_sup/d_inf = {:.6} (depth {})", report.max_ratio, report.depth);
    if let Some((xi, eta)) = &report.witness {
        let _ = writeln!(text, "witness pair: {xi} | {eta} (depth {})", report.depth);
    }
    let dv = check_delta_conditions(&cfg.delta, cfg.depth.max(8))?;
    let _ = writeln!(
        text,
        "length function checks over {} levels: monotone {}, product bound {:.3} ({}), doubling bound {:.3} ({})",
        cfg.depth.max(8),
        if dv.monotone { "yes" } else { "no" },
        dv.upper_constant,
        if dv.upper_holds { "holds" } else { "fails" },
        dv.lower_constant,
        if dv.lower_holds { "holds" } else { "fails" }
    );
    files.push(("distances.tsv", report.render_tsv()));
    Ok(Report { text, files })
}

fn cmd_order(input: &Path, pairs: usize, cfg: &AnalysisConfig) -> Result<Report> {
    let sub = load_substitution(input)?;
    sub.require_primitive()?;
    let mut text = cfg.header("order", &input.display().to_string());
    let oracle = LanguageOracle::from_substitution(&sub, cfg.depth + 2)?;
    let report = order_criterion(&oracle, &cfg.delta, cfg.depth, pairs, cfg.seed)?;
    text.push('\n');
    for (i, d) in report.depths.iter().enumerate() {
        let _ = writeln!(text, "depth {d}: max d_sup/d_inf = {:.6}", report.max_ratios[i]);
    }
    if !report.changes.is_empty() {
        let ch = report.changes.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(text, "relative changes along the ladder: {ch}");
    }
    if report.degenerate {
        text.push_str("language never branches: the two metrics coincide\n");
    }
    let _ = writeln!(text, "{} (depth {})", report.verdict_line(), cfg.depth);
    Ok(Report { text, files: vec![("order.tsv", report.render_tsv())] })
}

fn cmd_khom(
    input: Option<&Path>,
    realize_path: Option<&Path>,
    verify: bool,
    cfg: &AnalysisConfig,
) -> Result<Report> {
    let (sub, shown) = match input {
        Some(p) => (load_substitution(p)?, p.display().to_string()),
        None => (Substitution::fibonacci(), "builtin: fibonacci (a -> ab, b -> a)".to_string()),
    };
    sub.require_primitive()?;
    let mut text = cfg.header("khom", &shown);
    let mut files: Vec<(&'static str, String)> = Vec::new();
    let (oracle, tree) = word_pipeline(&sub, cfg)?;
    match realize_path {
        None => {
            let scheme = if cfg.scheme == EdgeScheme::SelfSimilar {
                EdgeScheme::Minimal
            } else {
                cfg.scheme
            };
            let edges = horizontal_edges(&tree, &oracle, scheme, &cfg.delta, cfg.depth)?;
            let choice = make_choice(&tree, &cfg.choice)?;
            let pin = PairingInput { edges, choice, depth: cfg.depth };
            pin.validate(&tree)?;
            let phi = measure_pairings(&tree, &pin)?;
            let _ = writeln!(text, "\nphi(1) = {} (depth {})", phi.root_value(), cfg.depth);
            let level1: Vec<String> = tree
                .level_range(1)
                .map(|v| format!("phi[{}] = {}", tree.render(v), phi.value(v)))
                .collect();
            let _ = writeln!(text, "{} (depth {})", level1.join(", "), cfg.depth);
            files.push(("phi.tsv", render_homomorphism_tsv(&tree, &phi)));
            let seeds = [cfg.seed, cfg.seed + 1, cfg.seed + 2];
            let nt = nontriviality_check(&tree, &oracle, &seeds)?;
            text.push_str(&render_nontriviality(&nt));
        }
        Some(path) => {
            let raw = fs::read_to_string(path)
                .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let target = parse_homomorphism_tsv(&tree, &raw)?;
            let choice = make_choice(&tree, &cfg.choice)?;
            let realization = realize_with_choice(&tree, &target, choice)?;
            let _ = writeln!(
                text,
                "\nrealized {} tranches over levels 1..{} ({} empty levels)",
                realization.tranches.len(),
                target.depth(),
                realization.empty_levels.len()
            );
            if realization.fredholm_only {
                text.push_str("target is identically zero: the empty module realizes it\n");
            }
            files.push(("realization.tsv", render_realization_tsv(&tree, &realization)));
            if verify {
                let measured = measure_pairings(&tree, &realization.input)?;
                if measured == target {
                    let _ = writeln!(text, "ROUNDTRIP OK (depth {})", target.depth());
                } else {
                    return Err(Error::Invalid(format!(
                        "round trip mismatch at depth {}: re-measured pairing differs from the target",
                        target.depth()
                    )));
                }
            }
        }
    }
    Ok(Report { text, files })
}

fn cmd_sturmian(
    quotients: &[u32],
    tail: &str,
    order: bool,
    pairs: usize,
    cfg: &AnalysisConfig,
) -> Result<Report> {
    let tail = match tail {
        "cycle" => Tail::Cycle,
        "last" => Tail::RepeatLast,
        other => {
            return Err(Error::Invalid(format!(
                "unknown tail rule '{other}'; expected cycle or last"
            )))
        }
    };
    let slope = SturmianSlope::new(quotients.to_vec(), tail)?;
    let mut text = cfg.header("sturmian", &format!("cf [{}]", slope.describe_quotients()));
    let mut files: Vec<(&'static str, String)> = Vec::new();

    let (p, q) = slope.convergent(1_000_000_000_000);
    let _ = writeln!(text, "\ntheta = {:.9} (convergent {p}/{q})", p as f64 / q as f64);
    let oracle = LanguageOracle::from_sturmian(&slope, cfg.depth + 2)?;
    let n_check = cfg.depth.min(64);
    let complexity = oracle.complexity(n_check)?;
    let sturmian_profile = complexity.iter().enumerate().all(|(i, &c)| c == i as u64 + 2);
    let _ = writeln!(
        text,
        "complexity p(n) = n + 1 for n <= {n_check}: {}",
        if sturmian_profile { "yes" } else { "NO" }
    );
    let prefix = slope.characteristic_prefix(48);
    let _ = writeln!(text, "characteristic word: {}...", slope.alphabet().render(&prefix.prefix(48)));

    let shallow = build_tree(&oracle, cfg.depth.min(8))?;
    let measure = sturmian_word_measure(&shallow, &slope)?;
    measure.validate(&shallow, 1e-9)?;
    let ab = slope.alphabet();
    let marginals = ab
        .letters()
        .filter_map(|l| {
            shallow
                .find(&Word::letter(l))
                .map(|v| format!("mu[{}] = {:.6}", ab.symbol(l), measure.mu(v)))
        })
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(text, "{marginals} (depth {})", shallow.depth());
    files.push(("measure.tsv", measure.render_measure_tsv(&shallow)));

    let mut pfull = vec![1u64];
    pfull.extend(oracle.complexity(cfg.depth)?);
    let counts = binary_branching_counts(&pfull, &LengthFunction::Reciprocal)?;
    let est = estimate_abscissa(&counts)?;
    let _ = writeln!(
        text,
        "s0 = {:.3} (word tree, delta 1/(n+1), levels {})",
        est.best(),
        cfg.depth
    );

    if order {
        let report = order_criterion(&oracle, &cfg.delta, cfg.depth, pairs, cfg.seed)?;
        for (i, d) in report.depths.iter().enumerate() {
            let _ = writeln!(text, "depth {d}: max d_sup/d_inf = {:.6}", report.max_ratios[i]);
        }
        let _ = writeln!(text, "{} (depth {})", report.verdict_line(), cfg.depth);
        files.push(("order.tsv", report.render_tsv()));
    }
    Ok(Report { text, files })
}

fn cmd_pisot(input: &Path, cfg: &AnalysisConfig) -> Result<Report> {
    let sub = load_substitution(input)?;
    sub.require_primitive()?;
    let mut text = cfg.header("pisot", &input.display().to_string());
    let files: Vec<(&'static str, String)> = Vec::new();

    let verdict = pisot_data(&sub)?;
    let phase = verdict.data().map(phase_condition);
    text.push('\n');
    text.push_str(&render_pisot_block(&verdict, phase.as_ref()));

    let freq = frequencies(&sub)?;
    let ab = sub.alphabet();
    for l in ab.letters() {
        let exact = freq
            .exact_counting
            .as_ref()
            .map(|v| format!(" (exact {})", v[l as usize].render()))
            .unwrap_or_default();
        let _ = writeln!(
            text,
            "freq[{}]: counting {:.6}, per length {:.6}{exact}",
            ab.symbol(l),
            freq.counting[l as usize],
            freq.per_length[l as usize]
        );
    }

    let Some(data) = verdict.data() else {
        text.push_str("no eigenvalue table: the expansion is not Pisot\n");
        return Ok(Report { text, files });
    };
    if data.degree > 3 {
        text.push_str("no eigenvalue table: star maps cover algebraic degree <= 3 only\n");
        return Ok(Report { text, files });
    }

    let graph = build_substitution_graph(&sub);
    let geom = tile_geometry_f64(&graph)?;
    let lgc = leftmost_longitudinal(&graph);
    let fund_l = maximal_fundamental(&graph, Flavor::Longitudinal);
    let km = k_matrix_for_graph(&graph, &fund_l, &geom, &lgc, &freq)?;
    let _ = writeln!(
        text,
        "K (longitudinal coefficient, exact geometry) = {:.6} over {} fundamental pairs",
        km.value,
        km.terms.len()
    );

    let mut rows: Vec<EigenRow> = Vec::new();
    let crit_l = 1.0 / data.theta;
    for (i, term) in km.terms.iter().enumerate() {
        for (label, beta, rho) in [
            ("critical b=1", 1.0, crit_l),
            ("critical b=2", 2.0, crit_l),
            ("supercritical", 1.0, crit_l * 1.05),
            ("subcritical", 1.0, crit_l * 0.95),
        ] {
            rows.push(EigenRow {
                label: format!("lg{} {}", i, label),
                tile: term.tile.clone(),
                frequency: term.frequency,
                displacement: term.a_h,
                beta,
                regime: laplacian_eigenvalue(
                    data,
                    term.frequency,
                    term.a_h,
                    beta,
                    1.0,
                    rho,
                    Flavor::Longitudinal,
                ),
            });
        }
    }

    if data.quadratic().is_some() {
        let geom_q = tile_geometry_quad(&graph)?;
        let choice = self_similar_choice(&graph, None)?;
        let fund_t = maximal_fundamental(&graph, Flavor::Transverse);
        if let Some(&pair) = fund_t.pairs.first() {
            let depth = cfg.depth.max(8);
            let base = return_vector(&graph, &geom_q, &choice, pair, depth)?;
            let src = graph.edge(pair.0).source;
            let star_disp = base.r_h.conj_f64().abs();
            let freq_t = freq.counting[src as usize];
            let crit_t = data.conjugate_modulus();
            for (label, beta, rho) in [
                ("critical b=1", 1.0, crit_t),
                ("critical b=2", 2.0, crit_t),
                ("supercritical", 1.0, crit_t * 1.05),
                ("subcritical", 1.0, crit_t * 0.95),
            ] {
                rows.push(EigenRow {
                    label: format!("tr {label}"),
                    tile: ab.symbol(src).to_string(),
                    frequency: freq_t,
                    displacement: star_disp,
                    beta,
                    regime: laplacian_eigenvalue(
                        data,
                        freq_t,
                        star_disp,
                        beta,
                        1.0,
                        rho,
                        Flavor::Transverse,
                    ),
                });
            }
            let e2 = graph.edges_into(src)[0];
            let e1 = graph.edges_into(graph.edge(e2).source)[0];
            let gamma = GraphPath(vec![e1, e2]);
            let lift = lifted_return_vector(&graph, &geom_q, &choice, pair, &gamma, depth)?;
            let raw_ratio = lift.r_h.to_f64() / base.r_h.to_f64();
            let star_ratio = lift.r_h.conj_f64() / base.r_h.conj_f64();
            let _ = writeln!(
                text,
                "tau-lift (transverse, |gamma| = 2): return vector x{:.6} (theta^2 = {:.6}), eigenvalue x{:.6} (theta^-4 = {:.6}) (depth {depth})",
                raw_ratio,
                data.theta * data.theta,
                star_ratio * star_ratio,
                data.theta.powi(-4)
            );
        }
        if let Some(&pair_l) = fund_l.pairs.first() {
            let shared = graph.edge(pair_l.0).range;
            let bottom = graph.edges_from(shared)[0];
            let top = graph.edges_from(graph.edge(bottom).range)[0];
            let descent = vec![top, bottom];
            let base = microtile_vector(&graph, &geom_q, &lgc, pair_l)?;
            let lift = lifted_microtile_vector(&graph, &geom_q, &lgc, pair_l, &descent)?;
            let ratio = lift.to_f64() / base.to_f64();
            let _ = writeln!(
                text,
                "tau-lift (longitudinal, descent 2): microtile vector x{:.6} (theta^-2 = {:.6}), eigenvalue x{:.6} (theta^-4 = {:.6})",
                ratio,
                data.theta.powi(-2),
                ratio * ratio,
                data.theta.powi(-4)
            );
        }
    }
    text.push_str(&render_eigen_rows(&rows));
    text.push_str("beta scaling: eigenvalues are quadratic in beta, lambda(2b) / lambda(b) = 4 exactly\n");
    Ok(Report { text, files })
}

fn run(cli: &Cli) -> Result<()> {
    let (report, out) = match &cli.command {
        Command::Analyze { input, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 8)?;
            (cmd_analyze(input, &cfg)?, cfg.out)
        }
        Command::Zeta { input, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 8)?;
            (cmd_zeta(input, &cfg)?, cfg.out)
        }
        Command::Laplacian { input, s, mc, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 8)?;
            (cmd_laplacian(input, *s, *mc, &cfg)?, cfg.out)
        }
        Command::Distance { input, pairs, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 8)?;
            (cmd_distance(input, *pairs, &cfg)?, cfg.out)
        }
        Command::Order { input, pairs, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 256)?;
            (cmd_order(input, *pairs, &cfg)?, cfg.out)
        }
        Command::Khom { input, realize, verify, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 8)?;
            (cmd_khom(input.as_deref(), realize.as_deref(), *verify, &cfg)?, cfg.out)
        }
        Command::Sturmian { quotients, tail, order, pairs, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 256)?;
            (cmd_sturmian(quotients, tail, *order, *pairs, &cfg)?, cfg.out)
        }
        Command::Pisot { input, opts } => {
            let cfg = AnalysisConfig::resolve(opts, 8)?;
            (cmd_pisot(input, &cfg)?, cfg.out)
        }
    };
    emit(&report, out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Parse { .. } => 2,
                Error::NotPrimitive { .. } => 3,
                _ => 1,
            })
        }
    }
}
