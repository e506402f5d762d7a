//! The `sqpo` command-line frontend: a thin adapter over the audit trail.
//!
//! Every command delegates to a library call sequence; the store on disk is
//! exactly what the library would produce. Exit codes: 0 on success, 1 on a
//! domain error (a rewrite that is not reversible, an inapplicable rule
//! hierarchy, a missing match, ...), 2 on usage or IO errors. Errors carry a
//! stable machine-readable code on stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::audit::{
    load_trail, save_trail, trail_init, HierarchyMergeSpec, MergeSpec, State, StoreLock, Trail,
};
use crate::codec::{decode_graph, decode_instance, encode_graph};
use crate::error::{Error, Result};
use crate::hierarchy::{induced_rule_hierarchy, Hierarchy};
use crate::matching::find_monomorphisms;
use crate::rewrite::Rule;

/// What one invocation produced; the binary prints both streams and exits
/// with the code.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Parser)]
#[command(
    name = "sqpo",
    about = "Reversible graph rewriting with a git-like audit trail",
    disable_help_subcommand = true
)]
struct Cli {
    /// Store directory; falls back to the SQPO_STORE environment variable.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Fixed commit timestamp (unix seconds) for reproducible stores.
    #[arg(long, global = true)]
    timestamp: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a store from a graph or hierarchy file.
    Init {
        #[arg(long, conflicts_with = "hierarchy")]
        graph: Option<PathBuf>,
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        #[arg(long, default_value = "main")]
        branch: String,
    },
    /// Apply a rule as a reversible commit.
    Apply {
        #[arg(long)]
        rule: PathBuf,
        /// Explicit instance file (pattern id -> host id).
        #[arg(long, conflicts_with = "match_first")]
        instance: Option<PathBuf>,
        /// Take the first match in the deterministic order.
        #[arg(long)]
        match_first: bool,
        /// Hierarchy node to rewrite; propagation is derived automatically.
        #[arg(long)]
        at: Option<String>,
        #[arg(short, long, default_value = "")]
        message: String,
    },
    /// List the commits of the current branch.
    Log,
    /// Undo commits down to the given count.
    Rollback { index: usize },
    /// Register a new branch at the current head.
    Branch { name: String },
    /// Switch the head to another branch.
    Switch { name: String },
    /// Merge a branch into the head and close it.
    Merge {
        name: String,
        /// Non-canonical merge arrows; canonical pushout merge otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(short, long, default_value = "")]
        message: String,
    },
    /// Print the head state.
    Show {
        #[arg(long, default_value = "human")]
        format: String,
    },
    /// Write the head state in canonical form.
    Export { path: Option<PathBuf> },
}

/// Runs one command line (without the program name) and reports the outcome.
pub fn run_command(argv: &[String]) -> CommandOutput {
    let mut full = vec!["sqpo".to_string()];
    full.extend(argv.iter().cloned());
    let cli = match Cli::try_parse_from(&full) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful output, not errors.
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                CommandOutput { code: 2, stdout: String::new(), stderr: rendered }
            } else {
                CommandOutput { code: 0, stdout: rendered, stderr: String::new() }
            };
        }
    };
    let store = match resolve_store(cli.store) {
        Ok(p) => p,
        // Missing store location is a usage problem, not a domain error.
        Err(e) => return CommandOutput { code: 2, stdout: String::new(), stderr: format!("error: USAGE: {e}\n") },
    };
    let timestamp = cli.timestamp.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    match dispatch(cli.command, &store, timestamp) {
        Ok(stdout) => CommandOutput { code: 0, stdout, stderr: String::new() },
        Err(e) => failure(&e),
    }
}

fn failure(e: &Error) -> CommandOutput {
    CommandOutput {
        code: exit_code(e),
        stdout: String::new(),
        stderr: format!("error: {}: {e}\n", e.code()),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ParseError(_)
        | Error::SchemaError(_)
        | Error::StoreCorrupt(_)
        | Error::VersionMismatch(_)
        | Error::StoreLocked(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn resolve_store(arg: Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = arg {
        return Ok(p);
    }
    if let Some(p) = std::env::var_os("SQPO_STORE") {
        return Ok(PathBuf::from(p));
    }
    Err(Error::InvalidState("no store given; pass --store or set SQPO_STORE".into()))
}

fn dispatch(command: Command, store: &Path, timestamp: u64) -> Result<String> {
    match command {
        Command::Init { graph, hierarchy, branch } => {
            let state = match (graph, hierarchy) {
                (Some(path), None) => State::Graph { graph: decode_graph(&fs::read(path)?)? },
                (None, Some(path)) => State::Hierarchy {
                    hierarchy: Hierarchy::from_json(&fs::read(path)?)?,
                },
                _ => {
                    return Err(Error::InvalidState(
                        "init needs exactly one of --graph or --hierarchy".into(),
                    ))
                }
            };
            let trail = trail_init(state, &branch)?;
            fs::create_dir_all(store)?;
            let _lock = StoreLock::acquire(store)?;
            save_trail(&trail, store)?;
            Ok(format!("initialized {} on branch {branch}\n", store.display()))
        }
        Command::Apply { rule, instance, match_first, at, message } => {
            let _lock = StoreLock::acquire(store)?;
            let trail = load_trail(store)?;
            let rule = Rule::from_json(&fs::read(rule)?)?;
            let next = match (trail.head(), at) {
                (State::Graph { graph }, None) => {
                    let m = resolve_instance(&rule, graph, instance, match_first)?;
                    trail.commit_object(&rule, &m, &message, timestamp)?
                }
                (State::Hierarchy { hierarchy }, Some(node)) => {
                    let host = hierarchy.graph(&node).ok_or_else(|| {
                        Error::DomainMismatch(format!("no node {node} in the hierarchy"))
                    })?;
                    let map = resolve_instance(&rule, host, instance, match_first)?;
                    let m = crate::hom::Homomorphism::new(
                        rule.lhs().clone(),
                        host.clone(),
                        map,
                    )
                    .map_err(|e| Error::NoMatch(format!("instance is not a match: {e}")))?;
                    let (rules, assignment) =
                        induced_rule_hierarchy(hierarchy, &node, &rule, &m)?;
                    let maps = assignment
                        .iter()
                        .map(|(v, m)| (v.clone(), m.node_map().clone()))
                        .collect();
                    trail.commit_hierarchy(&rules, &maps, &message, timestamp)?
                }
                (State::Graph { .. }, Some(_)) => {
                    return Err(Error::InvalidState(
                        "--at only applies to hierarchy stores".into(),
                    ))
                }
                (State::Hierarchy { .. }, None) => {
                    return Err(Error::InvalidState(
                        "hierarchy stores need --at <node>".into(),
                    ))
                }
            };
            save_trail(&next, store)?;
            let last = next.log().last().map(|c| c.id.clone()).unwrap_or_default();
            Ok(format!("committed {last}\n"))
        }
        Command::Log => {
            let trail = load_trail(store)?;
            let mut out = String::new();
            for entry in trail.log() {
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    entry.index, entry.id, entry.timestamp, entry.message
                ));
            }
            Ok(out)
        }
        Command::Rollback { index } => {
            let _lock = StoreLock::acquire(store)?;
            let trail = load_trail(store)?;
            let next = trail.rollback(index)?;
            save_trail(&next, store)?;
            Ok(format!("rolled back to {index} commits\n"))
        }
        Command::Branch { name } => {
            let _lock = StoreLock::acquire(store)?;
            let trail = load_trail(store)?;
            let next = trail.branch(&name)?;
            save_trail(&next, store)?;
            Ok(format!("created branch {name}\n"))
        }
        Command::Switch { name } => {
            let _lock = StoreLock::acquire(store)?;
            let trail = load_trail(store)?;
            let next = trail.switch(&name)?;
            save_trail(&next, store)?;
            Ok(format!("switched to {name}\n"))
        }
        Command::Merge { name, spec, message } => {
            let _lock = StoreLock::acquire(store)?;
            let trail = load_trail(store)?;
            let next = match spec {
                None => trail.merge_canonical(&name, &message, timestamp)?,
                Some(path) => {
                    let bytes = fs::read(path)?;
                    match trail.head() {
                        State::Graph { .. } => {
                            let spec: MergeSpec = serde_json::from_slice(&bytes)
                                .map_err(|e| Error::ParseError(format!("merge spec: {e}")))?;
                            trail.merge_with_object_spec(&name, &spec, &message, timestamp)?
                        }
                        State::Hierarchy { .. } => {
                            let spec: HierarchyMergeSpec = serde_json::from_slice(&bytes)
                                .map_err(|e| Error::ParseError(format!("merge spec: {e}")))?;
                            trail.merge_with_hierarchy_spec(&name, &spec, &message, timestamp)?
                        }
                    }
                }
            };
            save_trail(&next, store)?;
            Ok(format!("merged {name}\n"))
        }
        Command::Show { format } => {
            let trail = load_trail(store)?;
            match format.as_str() {
                "json" => Ok(canonical_state(&trail)),
                "human" => Ok(describe(&trail)),
                other => Err(Error::InvalidState(format!(
                    "unknown format {other:?}; use human or json"
                ))),
            }
        }
        Command::Export { path } => {
            let trail = load_trail(store)?;
            let doc = canonical_state(&trail);
            match path {
                Some(p) => {
                    fs::write(&p, doc.as_bytes())?;
                    Ok(format!("exported to {}\n", p.display()))
                }
                None => Ok(doc),
            }
        }
    }
}

/// Resolves the instance per the matching policy: an explicit file, the
/// deterministic first match, or a unique match; anything ambiguous is an
/// error, never a silent pick.
fn resolve_instance(
    rule: &Rule,
    host: &crate::graph::Graph,
    instance: Option<PathBuf>,
    match_first: bool,
) -> Result<BTreeMap<crate::graph::NodeId, crate::graph::NodeId>> {
    if let Some(path) = instance {
        return decode_instance(&fs::read(path)?);
    }
    let monos = find_monomorphisms(rule.lhs(), host);
    match (monos.len(), match_first) {
        (0, _) => Err(Error::NoMatch("pattern has no match in the host".into())),
        (_, true) | (1, false) => Ok(monos[0].node_map().clone()),
        (n, false) => Err(Error::InstanceMismatch(format!(
            "{n} matches; pass --match-first or --instance"
        ))),
    }
}

fn canonical_state(trail: &Trail) -> String {
    match trail.head() {
        State::Graph { graph } => {
            String::from_utf8(encode_graph(graph)).expect("canonical encoding is UTF-8")
        }
        State::Hierarchy { hierarchy } => {
            String::from_utf8(hierarchy.to_json()).expect("canonical encoding is UTF-8")
        }
    }
}

fn describe(trail: &Trail) -> String {
    let mut out = String::new();
    out.push_str(&format!("branch: {}\n", trail.current_branch()));
    let others: Vec<&String> = trail
        .branches()
        .into_iter()
        .filter(|b| b.as_str() != trail.current_branch())
        .collect();
    if !others.is_empty() {
        let names: Vec<&str> = others.iter().map(|s| s.as_str()).collect();
        out.push_str(&format!("other branches: {}\n", names.join(", ")));
    }
    out.push_str(&format!("commits: {}\n", trail.log().len()));
    match trail.head() {
        State::Graph { graph } => {
            out.push_str(&format!(
                "graph: {} nodes, {} edges\n",
                graph.node_count(),
                graph.edge_count()
            ));
            for (id, attrs) in graph.nodes() {
                if attrs.is_empty() {
                    out.push_str(&format!("  {id}\n"));
                } else {
                    let keys: Vec<String> = attrs
                        .iter()
                        .map(|(k, vs)| {
                            let vals: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                            format!("{k}: {{{}}}", vals.join(", "))
                        })
                        .collect();
                    out.push_str(&format!("  {id} [{}]\n", keys.join("; ")));
                }
            }
            for ((a, b), _) in graph.edges() {
                out.push_str(&format!("  {a} -> {b}\n"));
            }
        }
        State::Hierarchy { hierarchy } => {
            out.push_str("hierarchy:\n");
            for (v, g) in hierarchy.graphs() {
                out.push_str(&format!(
                    "  {v}: {} nodes, {} edges\n",
                    g.node_count(),
                    g.edge_count()
                ));
            }
            for ((s, t), _) in hierarchy.homs() {
                out.push_str(&format!("  typing {s} -> {t}\n"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::AttrSet;
    use crate::graph::{Graph, NodeId};

    fn run(store: &Path, args: &[&str]) -> CommandOutput {
        let mut argv: Vec<String> = vec!["--store".into(), store.display().to_string()];
        argv.extend(args.iter().map(|s| s.to_string()));
        run_command(&argv)
    }

    fn write_graph(dir: &Path, name: &str, g: &Graph) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, encode_graph(g)).unwrap();
        path
    }

    #[test]
    fn init_and_empty_log() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("store");
        let g = Graph::build([(NodeId::from("a"), AttrSet::new())], []).unwrap();
        let gpath = write_graph(dir.path(), "g.json", &g);
        let out = run(&store, &["init", "--graph", gpath.to_str().unwrap()]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let out = run(&store, &["log"]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.is_empty());
    }

    #[test]
    fn apply_rollback_show_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("store");
        let g = Graph::build([(NodeId::from("a"), AttrSet::new())], []).unwrap();
        let gpath = write_graph(dir.path(), "g.json", &g);
        run(&store, &["init", "--graph", gpath.to_str().unwrap()]);

        let add_b = crate::rewrite::make_rule(
            Graph::new(),
            Graph::new(),
            Graph::build([(NodeId::from("b"), AttrSet::new())], []).unwrap(),
            Default::default(),
            Default::default(),
        )
        .unwrap();
        let rpath = dir.path().join("add_b.json");
        fs::write(&rpath, add_b.to_json()).unwrap();

        let out = run(
            &store,
            &[
                "--timestamp",
                "7",
                "apply",
                "--rule",
                rpath.to_str().unwrap(),
                "--match-first",
                "-m",
                "add b",
            ],
        );
        assert_eq!(out.code, 0, "{}", out.stderr);
        let out = run(&store, &["rollback", "0"]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let out = run(&store, &["show", "--format", "json"]);
        assert_eq!(out.code, 0);
        assert_eq!(out.stdout.as_bytes(), encode_graph(&g));
    }

    #[test]
    fn irreversible_apply_exits_one_with_code() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("store");
        let g = Graph::build(
            [
                (NodeId::from("c"), AttrSet::new()),
                (NodeId::from("t"), AttrSet::new()),
                (NodeId::from("s"), AttrSet::new()),
            ],
            [(NodeId::from("t"), NodeId::from("s"), AttrSet::new())],
        )
        .unwrap();
        let gpath = write_graph(dir.path(), "g.json", &g);
        run(&store, &["init", "--graph", gpath.to_str().unwrap()]);

        let l = Graph::build(
            [(NodeId::from("c"), AttrSet::new()), (NodeId::from("t"), AttrSet::new())],
            [],
        )
        .unwrap();
        let r = Graph::build([(NodeId::from("ct"), AttrSet::new())], []).unwrap();
        let merge = crate::rewrite::make_rule(
            l.clone(),
            l,
            r,
            [(NodeId::from("c"), NodeId::from("c")), (NodeId::from("t"), NodeId::from("t"))]
                .into_iter()
                .collect(),
            [(NodeId::from("c"), NodeId::from("ct")), (NodeId::from("t"), NodeId::from("ct"))]
                .into_iter()
                .collect(),
        )
        .unwrap();
        let rpath = dir.path().join("merge.json");
        fs::write(&rpath, merge.to_json()).unwrap();
        let ipath = dir.path().join("i.json");
        fs::write(&ipath, br#"{"c": "c", "t": "t"}"#).unwrap();

        let out = run(
            &store,
            &["apply", "--rule", rpath.to_str().unwrap(), "--instance", ipath.to_str().unwrap()],
        );
        assert_eq!(out.code, 1);
        assert!(out.stderr.contains("NOT_REVERSIBLE"));
    }

    #[test]
    fn ambiguous_match_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("store");
        let g = Graph::build(
            [(NodeId::from("a"), AttrSet::new()), (NodeId::from("b"), AttrSet::new())],
            [],
        )
        .unwrap();
        let gpath = write_graph(dir.path(), "g.json", &g);
        run(&store, &["init", "--graph", gpath.to_str().unwrap()]);

        let l = Graph::build([(NodeId::from("x"), AttrSet::new())], []).unwrap();
        let rule = Rule::identity(&l);
        let rpath = dir.path().join("id.json");
        fs::write(&rpath, rule.to_json()).unwrap();

        let out = run(&store, &["apply", "--rule", rpath.to_str().unwrap()]);
        assert_eq!(out.code, 1);
        assert!(out.stderr.contains("INSTANCE_MISMATCH"));
        let out = run(&store, &["apply", "--rule", rpath.to_str().unwrap(), "--match-first"]);
        assert_eq!(out.code, 0, "{}", out.stderr);
    }

    #[test]
    fn missing_store_is_usage_error() {
        let out = run_command(&["log".to_string()]);
        // No --store and possibly no SQPO_STORE: accept either a clean run
        // (if the environment sets it) or exit 2.
        if std::env::var_os("SQPO_STORE").is_none() {
            assert_eq!(out.code, 2);
        }
    }
}
