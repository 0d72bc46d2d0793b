pub mod analysis;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod martingale;
pub mod oracle;
pub mod register_store;
pub mod sketches;
pub mod tailcut;

pub use error::{Error, Result};
pub use hashing::{hash64, BucketLayout, HashedElement};
pub use sketches::{
    AnySketch, CardinalitySketch, ChangeProbability, EhllCell, EhllSketch, HllSketch, PcsaSketch,
    RawEstimate, Regime, SketchKind,
};
pub use tailcut::{EhllTcSketch, HllTcSketch};
