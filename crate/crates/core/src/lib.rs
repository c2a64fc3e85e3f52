pub mod cachefit;
pub mod cli;
pub mod costrank;
pub mod deps;
pub mod dnnrank;
pub mod intset;
pub mod loopnest;
pub mod oracle;
pub mod reuse;
pub mod variants;
