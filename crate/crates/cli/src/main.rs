//! Command-line workbench for common belief over KD45: formula parsing,
//! model checking, closures, bisimulations, bounded countermodel search,
//! proof checking, and the cluster construction.
//!
//! Exit codes: 0 affirmative verdict / success, 1 negative verdict
//! (countermodel found, formula false, proof rejected, audit failed),
//! 2 usage or parse error, 3 bound guard.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use doxa_core::bisim;
use doxa_core::construct::{self, ConstructError};
use doxa_core::kripke::{parse_model_file, write_model_file};
use doxa_core::proof::{
    build_axiom, build_chat_n, check_proof, match_axiom, parse_proof_lines, AxiomSchema, Proof,
    Verdict,
};
use doxa_core::search::{find_countermodel, Budget, SearchConfig, SearchStats, SearchVerdict};
use doxa_core::semantics::{self, ClosureMode};
use doxa_core::{
    BisimError, Formula, KripkeModel, ModelError, ParseError, ProofError, PropertyCheck,
    SearchError, UniModalModel,
};

#[derive(Parser)]
#[command(
    name = "doxa",
    version,
    about = "Workbench for the logic of common belief over KD45"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Transitive closure of the union relation.
    #[default]
    Transitive,
    /// Reflexive-transitive closure of the union relation.
    Reflexive,
}

impl ModeArg {
    fn mode(self) -> ClosureMode {
        match self {
            ModeArg::Transitive => ClosureMode::Transitive,
            ModeArg::Reflexive => ClosureMode::ReflexiveTransitive,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula and print its canonical form.
    Parse {
        #[arg(long)]
        formula: String,
    },
    /// Report frame properties of a model file (serial/transitive/euclidean).
    CheckModel {
        #[arg(long)]
        model: PathBuf,
    },
    /// Model-check a formula at a state.
    Mc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: String,
        /// State to check at; defaults to the file's `# point:` comment.
        #[arg(long)]
        state: Option<String>,
        #[arg(long, value_enum, default_value_t)]
        closure: ModeArg,
    },
    /// Emit the closed union relation as a one-agent model file.
    Closure {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        closure: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two pointed models, or print the maximal bisimulation.
    Bisim {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Defaults to the left file's `# point:` comment.
        #[arg(long)]
        left_state: Option<String>,
        /// Defaults to the right file's `# point:` comment.
        #[arg(long)]
        right_state: Option<String>,
    },
    /// Search for a countermodel within bounds.
    Search {
        #[command(flatten)]
        flags: SearchFlags,
    },
    /// Certify a formula valid up to bounds (or print a refutation).
    Certify {
        #[command(flatten)]
        flags: SearchFlags,
    },
    /// Check a Hilbert-style proof file.
    Prove {
        #[arg(long)]
        proof: PathBuf,
        #[arg(long, default_value_t = 2)]
        agents: usize,
        /// Also search each accepted line for small countermodels.
        #[arg(long)]
        screen: bool,
        /// State bound for the screen.
        #[arg(long, default_value_t = 3)]
        max_states: usize,
    },
    /// Fold a one-agent belief structure into a multi-agent KD45 model.
    Construct {
        /// One-agent model file (e.g. the output of `closure`).
        #[arg(long)]
        model: PathBuf,
        /// Root state; defaults to the file's `# point:` comment.
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        formula: String,
        #[arg(long, default_value_t = 2)]
        agents: usize,
        /// Audit the result: KD45, per-node bisimilarity, root agreement.
        #[arg(long)]
        verify: bool,
        /// Prefix the model with the elimination trace as comments.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the model as a DOT graph.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Conjoin two diamonds over a fresh atom before extraction.
        #[arg(long)]
        fresh_atom: bool,
    },
    /// Print axiom schema instances, or match a formula against one.
    Axioms {
        /// One of: k, d, 4, cc, cn.
        #[arg(long)]
        schema: String,
        /// Comma-separated argument formulas; defaults to atoms.
        #[arg(long)]
        args: Option<String>,
        /// Agent count n for the counting schema.
        #[arg(long, default_value_t = 2)]
        agents: usize,
        /// Print the dual diamond form of the counting schema.
        #[arg(long, conflicts_with = "match_formula")]
        dual: bool,
        /// Check this formula against the schema instead of printing.
        #[arg(long = "match")]
        match_formula: Option<String>,
    },
}

/// Flags shared by the `search` and `certify` commands.
#[derive(clap::Args)]
struct SearchFlags {
    #[arg(long)]
    formula: String,
    #[arg(long, default_value_t = 2)]
    agents: usize,
    #[arg(long, default_value_t = 3)]
    max_states: usize,
    /// Comma-separated atoms; defaults to the formula's atoms.
    #[arg(long)]
    atoms: Option<String>,
    /// Visit every relation tuple and valuation (the default).
    #[arg(long, conflicts_with = "random")]
    exhaustive: bool,
    /// Check this many seeded random models instead.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t)]
    closure: ModeArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SearchFlags {
    fn parse_formula(&self) -> Result<Formula, Failure> {
        Ok(self.formula.parse()?)
    }

    fn config(&self, formula: &Formula) -> Result<SearchConfig, Failure> {
        let atoms = match &self.atoms {
            Some(spec) => parse_atom_list(spec)?,
            None => formula.atoms().into_iter().collect(),
        };
        let budget = match self.random {
            Some(sample_count) => Budget::Random {
                sample_count,
                seed: self.seed,
            },
            None => Budget::Exhaustive,
        };
        Ok(SearchConfig {
            agent_count: self.agents,
            max_states: self.max_states,
            atoms,
            budget,
            mode: self.closure.mode(),
            jobs: self.jobs,
        })
    }
}

/// A failure with its exit code: 2 usage/parse, 3 bound guard.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::usage(format!("formula: {e}"))
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<ProofError> for Failure {
    fn from(e: ProofError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<BisimError> for Failure {
    fn from(e: BisimError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        let code = match e {
            SearchError::BoundGuard { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_model(path: &Path) -> Result<(KripkeModel, Option<String>), Failure> {
    let src = fs::read_to_string(path)?;
    Ok(parse_model_file(&src)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Resolves an explicit state flag against a file's `# point:` comment.
fn pick_state(flag: Option<String>, point: Option<String>, what: &str) -> Result<String, Failure> {
    flag.or(point).ok_or_else(|| {
        Failure::usage(format!(
            "no --{what} given and the model file names no `# point:`"
        ))
    })
}

fn parse_atom_list(spec: &str) -> Result<Vec<String>, Failure> {
    let atoms: Vec<String> = spec
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    for atom in &atoms {
        if !doxa_core::syntax::is_valid_ident(atom) {
            return Err(Failure::usage(format!("invalid atom name `{atom}`")));
        }
    }
    Ok(atoms)
}

fn print_stats(stats: &SearchStats) {
    eprintln!(
        "stats: {} relations filtered, {} frames, {} models checked, {:?}",
        stats.relations_filtered, stats.frames_enumerated, stats.models_checked, stats.elapsed
    );
}

fn parse_formula_list(spec: &str) -> Result<Vec<Formula>, Failure> {
    spec.split(',')
        .map(|s| s.trim().parse::<Formula>().map_err(Failure::from))
        .collect()
}

fn to_dot(m: &KripkeModel, point: Option<&str>) -> String {
    let mut out = String::from("digraph model {\n");
    for (i, name) in m.states().iter().enumerate() {
        let atoms: Vec<&str> = m
            .valuation()
            .iter()
            .filter(|(_, set)| set.contains(i))
            .map(|(atom, _)| atom.as_str())
            .collect();
        let label = if atoms.is_empty() {
            name.clone()
        } else {
            format!("{name}\\n{}", atoms.join(","))
        };
        let shape = if Some(name.as_str()) == point {
            ", shape=doublecircle"
        } else {
            ""
        };
        out.push_str(&format!("  \"{name}\" [label=\"{label}\"{shape}];\n"));
    }
    for (agent, rel) in m.relations().iter().enumerate() {
        for (x, y) in rel.pairs() {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
                m.state_name(x),
                m.state_name(y),
                agent + 1
            ));
        }
    }
    out.push_str("}\n");
    out
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Parse { formula } => {
            let f: Formula = formula.parse()?;
            println!("{f}");
            Ok(0)
        }

        Command::CheckModel { model } => {
            let (m, _) = read_model(&model)?;
            let report = m.check_frame_properties();
            let name = |i: usize| m.state_name(i);
            for (agent, props) in report.agents.iter().enumerate() {
                let serial = match &props.serial {
                    PropertyCheck::Holds => "yes".to_string(),
                    PropertyCheck::Fails(x) => format!("no ({} has no successor)", name(*x)),
                };
                let transitive = match &props.transitive {
                    PropertyCheck::Holds => "yes".to_string(),
                    PropertyCheck::Fails((x, y, z)) => {
                        format!("no ({} -> {} -> {})", name(*x), name(*y), name(*z))
                    }
                };
                let euclidean = match &props.euclidean {
                    PropertyCheck::Holds => "yes".to_string(),
                    PropertyCheck::Fails((x, y, z)) => {
                        format!(
                            "no ({} -> {}, {} -> {})",
                            name(*x),
                            name(*y),
                            name(*x),
                            name(*z)
                        )
                    }
                };
                println!(
                    "agent {}: serial={serial} transitive={transitive} euclidean={euclidean}",
                    agent + 1
                );
            }
            println!("kd45: {}", if report.kd45 { "yes" } else { "no" });
            Ok(u8::from(!report.kd45))
        }

        Command::Mc {
            model,
            formula,
            state,
            closure,
        } => {
            let (m, point) = read_model(&model)?;
            let f: Formula = formula.parse()?;
            let state = pick_state(state, point, "state")?;
            let value = semantics::satisfies(&m, &state, &f, closure.mode())?;
            println!("{value} at {state}");
            Ok(u8::from(!value))
        }

        Command::Closure {
            model,
            closure,
            out,
        } => {
            let (m, point) = read_model(&model)?;
            let closed = closure.mode().close(&m.union_relation());
            let uni = UniModalModel::new(m.states().to_vec(), closed, m.valuation().clone())?;
            emit(
                &write_model_file(&uni.to_kripke(), point.as_deref()),
                out.as_deref(),
            )?;
            Ok(0)
        }

        Command::Bisim {
            left,
            right,
            left_state,
            right_state,
        } => {
            let (m1, p1) = read_model(&left)?;
            let (m2, p2) = read_model(&right)?;
            let s1 = left_state.or(p1);
            let s2 = right_state.or(p2);
            match (s1, s2) {
                (Some(s1), Some(s2)) => {
                    let alike = bisim::are_bisimilar(&m1, &s1, &m2, &s2)?;
                    println!("{}", if alike { "bisimilar" } else { "not bisimilar" });
                    Ok(u8::from(!alike))
                }
                _ => {
                    let max = bisim::max_bisimulation(&m1, &m2)?;
                    for (x, y) in max.pairs() {
                        println!("{} ~ {}", m1.state_name(x), m2.state_name(y));
                    }
                    Ok(0)
                }
            }
        }

        Command::Search { flags } => {
            let f = flags.parse_formula()?;
            let cfg = flags.config(&f)?;
            let outcome = find_countermodel(&f, &cfg)?;
            print_stats(&outcome.stats);
            match outcome.verdict {
                SearchVerdict::Countermodel { model, state } => {
                    println!("countermodel found");
                    emit(
                        &write_model_file(&model, Some(&state)),
                        flags.out.as_deref(),
                    )?;
                    Ok(1)
                }
                SearchVerdict::NoCountermodel => {
                    println!("no countermodel within bounds");
                    Ok(0)
                }
            }
        }

        Command::Certify { flags } => {
            let f = flags.parse_formula()?;
            let cfg = flags.config(&f)?;
            let report = doxa_core::search::certify_valid_up_to(&f, &cfg)?;
            print_stats(&report.stats);
            match &report.countermodel {
                None => {
                    println!("certified up to bounds");
                    Ok(0)
                }
                Some((model, state)) => {
                    println!("refuted");
                    emit(&write_model_file(model, Some(state)), flags.out.as_deref())?;
                    Ok(1)
                }
            }
        }

        Command::Prove {
            proof,
            agents,
            screen,
            max_states,
        } => {
            let src = fs::read_to_string(&proof)?;
            let lines = parse_proof_lines(&src)?;
            let p = Proof::new(agents, lines)?;
            match check_proof(&p) {
                Verdict::Rejected { line, reason } => {
                    println!("rejected at line {line}: {reason}");
                    Ok(1)
                }
                Verdict::Accepted => {
                    println!("accepted");
                    if !screen {
                        return Ok(0);
                    }
                    let mut refuted = false;
                    for (i, line) in p.lines.iter().enumerate() {
                        let cfg = SearchConfig {
                            agent_count: agents,
                            max_states,
                            atoms: line.formula.atoms().into_iter().collect(),
                            budget: Budget::Exhaustive,
                            mode: ClosureMode::Transitive,
                            jobs: 1,
                        };
                        let outcome = find_countermodel(&line.formula, &cfg)?;
                        match outcome.verdict {
                            SearchVerdict::Countermodel { state, .. } => {
                                println!("line {}: refuted at {state}", i + 1);
                                refuted = true;
                            }
                            SearchVerdict::NoCountermodel => {
                                println!("line {}: no countermodel within bounds", i + 1);
                            }
                        }
                    }
                    Ok(u8::from(refuted))
                }
            }
        }

        Command::Construct {
            model,
            root,
            formula,
            agents,
            verify,
            trace,
            out,
            dot,
            fresh_atom,
        } => {
            let (mk, point) = read_model(&model)?;
            let uni = mk.to_uni_modal().ok_or_else(|| {
                Failure::usage("construct expects a one-agent model file (try `closure` first)")
            })?;
            let root = pick_state(root, point, "root")?;
            let mut f: Formula = formula.parse()?;
            if fresh_atom {
                let taken: std::collections::BTreeSet<String> = f
                    .atoms()
                    .into_iter()
                    .chain(uni.valuation().keys().cloned())
                    .collect();
                let fresh = (0..)
                    .map(|i| format!("a{i}"))
                    .find(|name| !taken.contains(name))
                    .expect("some fresh atom name is free");
                let fresh = Formula::atom(fresh);
                f = Formula::and(
                    f,
                    Formula::and(
                        Formula::chat(fresh.clone()),
                        Formula::chat(Formula::neg(fresh)),
                    ),
                );
            }
            let cl = f.proper_closure();
            let built = match construct::fold_construct(&uni, &root, &cl, agents) {
                Ok(built) => built,
                Err(ConstructError::Model(e)) => return Err(e.into()),
                Err(ConstructError::Bisim(e)) => return Err(e.into()),
                Err(e @ ConstructError::AgentCount(_)) => {
                    return Err(Failure::usage(e.to_string()))
                }
                Err(e) => {
                    println!("construction failed: {e}");
                    return Ok(1);
                }
            };

            let mut text = String::new();
            if trace {
                for line in construct::render_trace(&built.trace).lines() {
                    text.push_str(&format!("# {line}\n"));
                }
            }
            text.push_str(&write_model_file(&built.model, Some(&built.root)));
            emit(&text, out.as_deref())?;
            if let Some(dot_path) = dot {
                fs::write(&dot_path, to_dot(&built.model, Some(&built.root)))?;
            }

            if verify {
                let report = construct::verify_construction(&uni, &root, &built)
                    .map_err(|e| Failure::usage(e.to_string()))?;
                println!(
                    "verification: {}",
                    if report.all_pass() { "PASS" } else { "FAIL" }
                );
                if !report.all_pass() {
                    eprintln!(
                        "kd45: {}; node failures: {:?}; formula failures: {}",
                        report.kd45,
                        report.node_failures,
                        report.formula_failures.len()
                    );
                    return Ok(1);
                }
            }
            Ok(0)
        }

        Command::Axioms {
            schema,
            args,
            agents,
            dual,
            match_formula,
        } => {
            let schema: AxiomSchema = schema.parse()?;
            if let Some(target) = match_formula {
                let f: Formula = target.parse()?;
                let hit = match_axiom(&f, schema, agents);
                println!("{}", if hit { "matches" } else { "no match" });
                return Ok(u8::from(!hit));
            }
            let args = match args {
                Some(spec) => parse_formula_list(&spec)?,
                None => {
                    let arity = match schema {
                        AxiomSchema::K => 2,
                        AxiomSchema::Cn => agents + 1,
                        _ => 1,
                    };
                    match schema {
                        AxiomSchema::K => vec![Formula::atom("p"), Formula::atom("q")],
                        AxiomSchema::Cn => (1..=arity)
                            .map(|i| Formula::atom(format!("p{i}")))
                            .collect(),
                        _ => vec![Formula::atom("p")],
                    }
                }
            };
            let inst = if dual {
                if schema != AxiomSchema::Cn {
                    return Err(Failure::usage("--dual applies to the cn schema only"));
                }
                build_chat_n(agents, &args)?
            } else {
                build_axiom(schema, agents, &args)?
            };
            println!("{inst}");
            Ok(0)
        }
    }
}
