//! Reversible sesqui-pushout rewriting for simple attributed graphs, with
//! rule hierarchies, canonical propagation, and a git-like audit trail.
//!
//! The crate is organized bottom-up:
//!
//! - [`attr`], [`graph`], [`hom`], [`matching`], [`codec`]: attributed simple
//!   directed graphs, homomorphisms, mono/iso search, canonical file format.
//! - [`category`]: pushouts, pullbacks, final pullback complements, mediating
//!   arrows from the universal properties, and the decision procedures that
//!   recognize each kind of square.
//! - [`rewrite`]: rules `L ← P → R`, two-phase rule application, reversibility
//!   analysis, overlaps, sequential independence, and composition of two
//!   consecutive rewrites.
//! - [`hierarchy`]: DAG-shaped hierarchies of graphs and of rules,
//!   applicability, application, reversal, canonical backward/forward
//!   propagation, and hierarchy-level composition.
//! - [`audit`]: commit/rollback/branch/switch/merge over a single graph or a
//!   whole hierarchy, with delta compression and a durable store.
//! - [`cli`]: the `sqpo` command-line frontend.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod attr;
pub mod audit;
pub mod category;
pub mod cli;
pub mod codec;
pub mod error;
pub mod graph;
pub mod hierarchy;
pub mod hom;
pub mod matching;
pub mod rewrite;

pub use attr::{AttrSet, AttrValue};
pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
pub use hom::{analyze_homomorphism, compose, HomAnalysis, Homomorphism};
pub use matching::{find_isomorphism, find_monomorphisms};
