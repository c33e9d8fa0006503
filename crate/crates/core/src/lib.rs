pub mod crypto;
pub mod error;
pub mod fuzzy;
pub mod harness;
pub mod index;
pub mod ledger;
pub mod search;
pub mod verify;
pub mod version;

pub use error::{Error, Result};
