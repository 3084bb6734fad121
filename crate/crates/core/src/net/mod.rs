//! Dense tanh networks with exact input derivatives and parameter gradients.

mod io;
mod jet;
mod mlp;
mod multi_index;

pub use io::{NetworkDoc, NETWORK_FORMAT_VERSION};
pub use jet::{JetContext, JetTable, MAX_JET_ORDER};
pub use mlp::Mlp;
pub use multi_index::{graded_indices, indices_of_degree, JetLayout, MultiIndex};
