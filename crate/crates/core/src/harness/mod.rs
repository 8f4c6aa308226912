pub mod client;
pub mod evaluate;
pub mod extract;
pub mod prompt;
pub mod report;
