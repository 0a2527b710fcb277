//! Seeded generators and independent oracles for the acceptance suite.
//!
//! The oracles work on bitmasks and adjacency lists built straight from the
//! documents' edge lists and never call engine semantics.

#![allow(dead_code)]

pub mod gen;
pub mod oracle;

/// One line per criterion, collected and printed as the suite runs.
pub struct Verdicts {
    failed: Vec<String>,
    total: usize,
}

impl Verdicts {
    pub fn new() -> Self {
        Self { failed: Vec::new(), total: 0 }
    }

    pub fn record(&mut self, name: &str, result: Result<String, String>) {
        self.total += 1;
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                self.failed.push(name.to_string());
            }
        }
    }

    pub fn finish(self) -> bool {
        println!("{} of {} criteria passed", self.total - self.failed.len(), self.total);
        self.failed.is_empty()
    }
}

/// `Err(message)` unless `condition` holds.
pub fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}
